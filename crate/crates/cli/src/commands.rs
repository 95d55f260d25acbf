use std::path::Path;

use lfbgw::identities::{run_identities, IdentityCheck, IdentityOptions, IdentityReport};
use lfbgw::simulate::{run_tree_experiment, StatRow, TreeExperimentConfig};
use lfbgw::*;
use serde::Serialize;

use crate::report::{
    csv_table, emit, fmt_f64, fmt_opt, json_report, model_digest, write_file, CliError, CliResult, Header, Tolerances,
};
use crate::{Cli, Command, Format, EXIT_INPUT, EXIT_INTERNAL};

struct Context<'a> {
    cli: &'a Cli,
    model: Model,
    opts: SpectralOptions<f64>,
}

impl Context<'_> {
    fn header(&self, command: &'static str) -> Header {
        Header {
            tool: "lfbgw",
            version: env!("CARGO_PKG_VERSION"),
            command,
            model_sha256: model_digest(&self.model),
            seed: self.cli.global.seed,
            tolerances: Tolerances {
                root: self.opts.root_tol,
                series_eps: self.opts.series.eps,
                series_k_max: self.opts.series.k_max,
                fixed_point: self.opts.fixed_point_tol,
            },
        }
    }

    fn format(&self, default: Format) -> Format {
        self.cli.global.format.unwrap_or(default)
    }

    fn out(&self) -> Option<&Path> {
        self.cli.global.out.as_deref()
    }

    fn summary(&self) -> CliResult<Summary> {
        Ok(spectral_summary(&self.model, &self.opts)?)
    }
}

fn read_model(path: &Path) -> CliResult<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(load_model(&text)?)
}

fn parse_single(spec: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || CliError::input(format!("--single expects h0,m, got {spec:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let h0 = parts[0].parse::<f64>().map_err(|_| bad())?;
    let m = parts[1].parse::<f64>().map_err(|_| bad())?;
    STParams::new(h0, m).map_err(|e| CliError::input(e.to_string()))?;
    Ok((h0, m))
}

fn load(cli: &Cli) -> CliResult<Model> {
    match (&cli.global.model, &cli.global.single) {
        (Some(path), _) => read_model(path),
        (None, Some(spec)) => {
            let (h0, m) = parse_single(spec)?;
            embed_single_type(h0, m).map_err(|e| CliError::input(e.to_string()))
        }
        (None, None) => Err(CliError::input("one of --model or --single is required")),
    }
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    if let Command::Validate = cli.command {
        return validate(cli);
    }
    let mut opts = SpectralOptions::<f64>::default();
    if let Some(tol) = cli.global.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::input(format!("--tol must be positive, got {tol}")));
        }
        opts.root_tol = tol;
    }
    let ctx = Context {
        cli,
        model: load(cli)?,
        opts,
    };
    match &cli.command {
        Command::Analyze {
            refine,
            with_transforms,
        } => analyze(&ctx, refine.as_deref(), *with_transforms),
        Command::Transform { out_dir, hs_only } => transform(&ctx, out_dir, *hs_only),
        Command::Verify {
            points,
            perturb_q,
            eigen_limit,
        } => verify(&ctx, *points, *perturb_q, *eigen_limit),
        Command::Simulate {
            replicates,
            horizon,
            root_type,
            probe_points,
            workers,
            dot,
            cap,
        } => simulate(
            &ctx,
            SimArgs {
                replicates: *replicates,
                horizon: *horizon,
                root_type: *root_type,
                probe_points: probe_points.as_deref(),
                workers: *workers,
                dot: dot.as_deref(),
                cap: *cap,
            },
        ),
        Command::Validate => unreachable!(),
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Serialize)]
struct SummaryOut {
    rho: f64,
    beta: f64,
    mu: Mu<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    q: Vec<f64>,
    class: Criticality,
    k_used: usize,
    boundary: bool,
}

impl From<&Summary> for SummaryOut {
    fn from(s: &Summary) -> Self {
        Self {
            rho: s.rho,
            beta: s.beta,
            mu: s.mu,
            u: s.u.clone(),
            v: s.v.clone(),
            q: s.q.clone(),
            class: s.class,
            k_used: s.k_used,
            boundary: s.boundary,
        }
    }
}

#[derive(Serialize)]
struct ModelInfo {
    n_types: usize,
    m: f64,
    nnz: usize,
}

#[derive(Serialize)]
struct TransformsOut {
    m_hat: Option<f64>,
    m_tilde: f64,
    dual: Option<DualClosedForm<f64>>,
    hs: HsClosedForm<f64>,
    alpha: Option<Vec<f64>>,
    skeleton_total_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

#[derive(Serialize)]
struct RefineOut {
    n_types: usize,
    rho: f64,
    delta_rho: f64,
    common_types: usize,
    max_delta_q: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    model: ModelInfo,
    summary: SummaryOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_type: Option<STReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transforms: Option<TransformsOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<RefineOut>,
}

fn transforms_out(model: &Model, s: &Summary) -> CliResult<TransformsOut> {
    if !s.is_supercritical() {
        return Err(Error::NotSupercritical { class: s.class }.into());
    }
    let mut notes = Vec::new();
    let hs = hs_spectral_closed(model, s)?;
    let dual = dual_spectral_closed(model, s).map_err(|e| notes.push(e.to_string())).ok();
    let law = skeleton_law(model, s).map_err(|e| notes.push(e.to_string())).ok();
    notes.dedup();
    Ok(TransformsOut {
        m_hat: law.as_ref().map(|l| l.m_hat),
        m_tilde: s.rho - 1.0,
        dual,
        hs,
        alpha: law.as_ref().map(|l| l.alpha.clone()),
        skeleton_total_mean: law.as_ref().map(|l| l.total_mean()),
        notes,
    })
}

fn analyze(ctx: &Context, refine: Option<&Path>, with_transforms: bool) -> CliResult<u8> {
    let model = &ctx.model;
    let s = ctx.summary()?;
    let single_type = (model.n_types() == 1)
        .then(|| STParams::new(model.h0()[0], model.m()).ok())
        .flatten()
        .map(|p| st_analyze(&p));
    let transforms = if with_transforms {
        Some(transforms_out(model, &s)?)
    } else {
        None
    };
    let refine = match refine {
        Some(path) => {
            let other = read_model(path)?;
            let so = spectral_summary(&other, &ctx.opts)?;
            let common = other.n_types().min(model.n_types());
            Some(RefineOut {
                n_types: other.n_types(),
                rho: so.rho,
                delta_rho: (so.rho - s.rho).abs(),
                common_types: common,
                max_delta_q: scalar::max_abs_diff(&so.q[..common], &s.q[..common]),
            })
        }
        None => None,
    };
    let report = AnalyzeReport {
        model: ModelInfo {
            n_types: model.n_types(),
            m: model.m(),
            nnz: model.h().nnz(),
        },
        summary: SummaryOut::from(&s),
        single_type,
        transforms,
        refine,
    };
    let header = ctx.header("analyze");
    let text = match ctx.format(Format::Json) {
        Format::Json => json_report(&header, &report)?,
        Format::Csv => csv_table(&header, &["quantity", "index", "value"], &analyze_rows(&report)),
    };
    emit(ctx.out(), &text)?;
    Ok(0)
}

fn analyze_rows(r: &AnalyzeReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut scalar = |name: &str, v: String| rows.push(vec![name.to_string(), String::new(), v]);
    let s = &r.summary;
    scalar("class", s.class.to_string());
    scalar("rho", fmt_f64(s.rho));
    scalar("beta", fmt_f64(s.beta));
    scalar(
        "mu",
        match s.mu {
            Mu::Finite(x) => fmt_f64(x),
            Mu::Infinite => "inf".into(),
        },
    );
    scalar("k_used", s.k_used.to_string());
    scalar("boundary", s.boundary.to_string());
    for (name, v) in [("u", &s.u), ("v", &s.v), ("q", &s.q)] {
        for (i, x) in v.iter().enumerate() {
            rows.push(vec![name.into(), (i + 1).to_string(), fmt_f64(*x)]);
        }
    }
    if let Some(t) = &r.transforms {
        rows.push(vec!["m_tilde".into(), String::new(), fmt_f64(t.m_tilde)]);
        rows.push(vec!["m_hat".into(), String::new(), fmt_opt(t.m_hat)]);
        rows.push(vec!["beta_tilde".into(), String::new(), fmt_f64(t.hs.beta_tilde)]);
        if let Some(d) = &t.dual {
            rows.push(vec!["rho_hat".into(), String::new(), fmt_f64(d.rho_hat)]);
            rows.push(vec!["beta_hat".into(), String::new(), fmt_f64(d.beta_hat)]);
        }
        for (name, v) in [("alpha", &t.alpha), ("skeleton_total_mean", &t.skeleton_total_mean)] {
            for (i, x) in v.iter().flatten().enumerate() {
                rows.push(vec![name.into(), (i + 1).to_string(), fmt_f64(*x)]);
            }
        }
    }
    if let Some(st) = &r.single_type {
        rows.push(vec!["st_mean".into(), String::new(), fmt_f64(st.mean)]);
        rows.push(vec!["st_q".into(), String::new(), fmt_f64(st.q)]);
    }
    if let Some(rf) = &r.refine {
        rows.push(vec!["refine_delta_rho".into(), String::new(), fmt_f64(rf.delta_rho)]);
        rows.push(vec!["refine_max_delta_q".into(), String::new(), fmt_f64(rf.max_delta_q)]);
    }
    rows
}

// -------------------------------------------------------------- transform

#[derive(Serialize)]
struct TransformReport {
    hs_file: String,
    m_tilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_error: Option<String>,
    comparisons: Vec<IdentityCheck>,
}

fn transform(ctx: &Context, out_dir: &Path, hs_only: bool) -> CliResult<u8> {
    let model = &ctx.model;
    let s = ctx.summary()?;
    if !s.is_supercritical() {
        return Err(Error::NotSupercritical { class: s.class }.into());
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", out_dir.display())))?;

    let hs = hs_triplet(model, &s)?;
    let hs_path = out_dir.join("hs.json");
    write_file(&hs_path, &model_to_json(&hs))?;

    let mut report = TransformReport {
        hs_file: hs_path.display().to_string(),
        m_tilde: hs.m(),
        dual_file: None,
        m_hat: None,
        dual_error: None,
        comparisons: Vec::new(),
    };
    let mut dual_err = None;
    if !hs_only {
        match dual_triplet(model, &s) {
            Ok(dual) => {
                let path = out_dir.join("dual.json");
                write_file(&path, &model_to_json(&dual))?;
                report.dual_file = Some(path.display().to_string());
                report.m_hat = Some(dual.m());
            }
            Err(e) => {
                report.dual_error = Some(e.to_string());
                dual_err = Some(e);
            }
        }
    }
    let checks = run_identities(
        model,
        &s,
        &IdentityOptions {
            points: 0,
            seed: 0,
            eigen_limit_power: None,
        },
    );
    report.comparisons = checks
        .checks
        .into_iter()
        .filter(|c| c.name.starts_with("hs_") || (dual_err.is_none() && !hs_only && c.name.starts_with("dual_")))
        .collect();

    let header = ctx.header("transform");
    let text = match ctx.format(Format::Json) {
        Format::Json => json_report(&header, &report)?,
        Format::Csv => checks_csv(&header, &report.comparisons),
    };
    emit(ctx.out(), &text)?;
    if let Some(e) = dual_err {
        return Err(e.into());
    }
    Ok(0)
}

fn checks_csv(header: &Header, checks: &[IdentityCheck]) -> String {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                fmt_f64(c.residual),
                fmt_f64(c.tolerance),
                c.passed.to_string(),
            ]
        })
        .collect();
    csv_table(header, &["identity", "residual", "tolerance", "passed"], &rows)
}

// ----------------------------------------------------------------- verify

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturb_q: Option<f64>,
    checks: Vec<IdentityCheck>,
}

fn check(name: &'static str, residual: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name,
        residual,
        tolerance,
        passed: residual <= tolerance,
        note: None,
    }
}

/// The one-type pipeline against the closed forms of the single-type law.
fn single_type_checks(model: &Model, s: &Summary) -> Vec<IdentityCheck> {
    let Ok(p) = STParams::new(model.h0()[0], model.m()) else {
        return Vec::new();
    };
    let r = st_analyze(&p);
    let mut out = vec![
        check("single_type_mean", (s.rho - r.mean).abs(), 1e-10),
        check("single_type_q", (s.q[0] - r.q).abs(), 1e-10),
    ];
    if let (Some(d), Ok(law)) = (r.decomposition, skeleton_law(model, s)) {
        out.push(check("single_type_m_hat", (law.m_hat - d.m_hat).abs(), 1e-10));
        out.push(check("single_type_m_tilde", (law.m_tilde - d.m_tilde).abs(), 1e-10));
        out.push(check("single_type_mean_bar", (law.total_mean()[0] - d.mean_bar).abs(), 1e-10));
        out.push(check("single_type_alpha", (law.alpha[0] - d.alpha).abs(), 1e-10));
    }
    out
}

fn verify(ctx: &Context, points: usize, perturb_q: Option<f64>, eigen_limit: Option<usize>) -> CliResult<u8> {
    let model = &ctx.model;
    let mut s = ctx.summary()?;
    if !s.is_supercritical() {
        return Err(Error::NotSupercritical { class: s.class }.into());
    }
    if let Some(eps) = perturb_q {
        for q in &mut s.q {
            *q += eps;
        }
    }
    let IdentityReport { mut checks } = run_identities(
        model,
        &s,
        &IdentityOptions {
            points,
            seed: ctx.cli.global.seed.unwrap_or(0),
            eigen_limit_power: eigen_limit,
        },
    );
    if model.n_types() == 1 {
        checks.extend(single_type_checks(model, &s));
    }
    let passed = checks.iter().all(|c| c.passed);
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "lfbgw: identity {} failed: residual {:e} > {:e}{}",
            c.name,
            c.residual,
            c.tolerance,
            c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
    }
    let report = VerifyReport {
        passed,
        points,
        perturb_q,
        checks,
    };
    let header = ctx.header("verify");
    let text = match ctx.format(Format::Json) {
        Format::Json => json_report(&header, &report)?,
        Format::Csv => checks_csv(&header, &report.checks),
    };
    emit(ctx.out(), &text)?;
    Ok(if passed { 0 } else { EXIT_INTERNAL })
}

// --------------------------------------------------------------- simulate

struct SimArgs<'a> {
    replicates: u64,
    horizon: usize,
    root_type: usize,
    probe_points: Option<&'a str>,
    workers: usize,
    dot: Option<&'a Path>,
    cap: u64,
}

fn parse_point(text: &str, n: usize) -> CliResult<Point> {
    let values = text
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(format!("bad probe point {text:?}: {e}")))?;
    if values.len() != n {
        return Err(CliError::input(format!(
            "probe point {text:?} has {} coordinates, model has {n} types",
            values.len()
        )));
    }
    PgfPoint::new(values).map_err(|e| CliError::input(e.to_string()))
}

fn parse_probes(spec: Option<&str>, n: usize) -> CliResult<Vec<Point>> {
    let Some(spec) = spec else {
        return Ok(vec![PgfPoint::splat(n, 0.5)?]);
    };
    let text = match spec.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {path}: {e}")))?
            .replace('\n', ";"),
        None => spec.to_string(),
    };
    text.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty() && !p.starts_with('#'))
        .map(|p| parse_point(p, n))
        .collect()
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    replicates: u64,
    horizon: usize,
    root_type: usize,
    rows: &'a [StatRow],
}

fn simulate(ctx: &Context, args: SimArgs) -> CliResult<u8> {
    let Some(seed) = ctx.cli.global.seed else {
        return Err(CliError {
            code: EXIT_INPUT,
            message: "simulate requires --seed".into(),
        });
    };
    let model = &ctx.model;
    let n = model.n_types();
    if args.root_type == 0 || args.root_type > n {
        return Err(Error::TypeIndex {
            index: args.root_type,
            n_types: n,
        }
        .into());
    }
    let probes = parse_probes(args.probe_points, n)?;
    let s = ctx.summary()?;
    let cfg = TreeExperimentConfig {
        seed,
        replicates: args.replicates,
        horizon: args.horizon,
        root_type: args.root_type - 1,
        probes,
        workers: args.workers,
        cap: args.cap,
    };
    let mut exp = run_tree_experiment(model, &s, &cfg)?;
    // types and probes are reported 1-based, generations as is
    for row in &mut exp.rows {
        if matches!(row.quantity, "root_skeleton" | "mean_z_horizon" | "offspring_pgf") {
            row.index += 1;
        }
    }
    if let (Some(path), Some(tree)) = (args.dot, &exp.first_tree) {
        write_file(path, &tree.to_dot())?;
    }
    let header = ctx.header("simulate");
    let text = match ctx.format(Format::Csv) {
        Format::Json => json_report(
            &header,
            &SimulateReport {
                replicates: args.replicates,
                horizon: args.horizon,
                root_type: args.root_type,
                rows: &exp.rows,
            },
        )?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = exp
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.quantity.to_string(),
                        r.index.to_string(),
                        fmt_f64(r.estimate),
                        fmt_f64(r.std_error),
                        fmt_opt(r.analytic),
                        r.samples.to_string(),
                    ]
                })
                .collect();
            csv_table(
                &header,
                &["quantity", "index", "estimate", "std_error", "analytic", "samples"],
                &rows,
            )
        }
    };
    emit(ctx.out(), &text)?;
    Ok(0)
}

// --------------------------------------------------------------- validate

/// A violated constraint with 1-based indices, as in model files.
#[derive(Serialize)]
struct ViolationOut {
    rule: Rule,
    row: Option<usize>,
    col: Option<usize>,
    value: f64,
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    n_types: Option<usize>,
    violations: Vec<ViolationOut>,
}

fn validate(cli: &Cli) -> CliResult<u8> {
    let (model, report) = match load(cli) {
        Ok(model) => {
            let r = validate_model(&model);
            (Some(model), r)
        }
        Err(CliError { code: EXIT_INPUT, message }) if message.starts_with("model validation failed") => {
            // re-parse to recover the structured report
            let text = cli
                .global
                .model
                .as_ref()
                .and_then(|p| std::fs::read_to_string(p).ok())
                .unwrap_or_default();
            match load_model::<f64>(&text) {
                Err(Error::Validation(r)) => (None, r),
                _ => return Err(CliError::input(message)),
            }
        }
        Err(e) => return Err(e),
    };
    let body = ValidateReport {
        valid: report.ok,
        n_types: model.as_ref().map(|m| m.n_types()),
        violations: report
            .violations
            .iter()
            .map(|v| ViolationOut {
                rule: v.rule,
                row: v.row.map(|i| i + 1),
                col: v.col.map(|j| j + 1),
                value: v.value,
            })
            .collect(),
    };
    let header = Header {
        tool: "lfbgw",
        version: env!("CARGO_PKG_VERSION"),
        command: "validate",
        model_sha256: model.as_ref().map(model_digest).unwrap_or_default(),
        seed: cli.global.seed,
        tolerances: Tolerances {
            root: cli.global.tol.unwrap_or(f64::ROOT_TOL),
            series_eps: f64::SERIES_EPS,
            series_k_max: SeriesOptions::<f64>::default().k_max,
            fixed_point: SpectralOptions::<f64>::default().fixed_point_tol,
        },
    };
    let text = match cli.global.format.unwrap_or(Format::Json) {
        Format::Json => json_report(&header, &body)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = body
                .violations
                .iter()
                .map(|v| {
                    vec![
                        serde_json::to_value(v.rule)
                            .ok()
                            .and_then(|x| x.as_str().map(String::from))
                            .unwrap_or_default(),
                        v.row.map(|i| i.to_string()).unwrap_or_default(),
                        v.col.map(|j| j.to_string()).unwrap_or_default(),
                        fmt_f64(v.value),
                    ]
                })
                .collect();
            csv_table(&header, &["rule", "row", "col", "value"], &rows)
        }
    };
    emit(cli.global.out.as_deref(), &text)?;
    if !report.ok {
        eprintln!("lfbgw: model validation failed: {report}");
        return Ok(EXIT_INPUT);
    }
    Ok(0)
}
