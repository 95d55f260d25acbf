//! Numerical checks of the algebraic identities tying a process to its
//! spectral data and its two transforms.
//!
//! Every check yields a residual and a tolerance; failures to compute a
//! quantity are reported as failed checks rather than errors, so the suite
//! can run on deliberately corrupted inputs.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genfun::{joint_pgf_defining, joint_pgf_factorized, mixture_residual_with, pgf_eval, PgfPoint};
use crate::matrix::DenseMatrix;
use crate::model::{mean_matrix, LFModel};
use crate::scalar::{max_abs_diff, Scalar};
use crate::simulate::rng::replicate_rng;
use crate::spectral::{
    classify, compute_beta_with, eigen_u_with, eigen_v_with, perron_root, right_series, Criticality,
    SeriesOptions, SpectralSummary,
};
use crate::transforms::{dual_spectral_closed, dual_triplet, hs_spectral_closed, hs_triplet, skeleton_law};
use crate::transforms::{skeleton_total_mean_from_means, SkeletonLaw};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityOptions {
    /// Random probe points for the generating-function checks.
    pub points: usize,
    pub seed: u64,
    /// Power `n` for `|rho^-n M^n - u^t v|`; skipped when `None`.
    pub eigen_limit_power: Option<usize>,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            points: 100,
            seed: 0,
            eigen_limit_power: None,
        }
    }
}

struct Suite<T> {
    checks: Vec<IdentityCheck>,
    floor: f64,
    _t: std::marker::PhantomData<T>,
}

impl<T: Scalar> Suite<T> {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            floor: T::epsilon().to_f64_lossy() * 4e3,
            _t: std::marker::PhantomData,
        }
    }

    fn push(&mut self, name: &'static str, tolerance: f64, residual: Result<f64>) {
        let tolerance = tolerance.max(self.floor);
        let check = match residual {
            Ok(r) => IdentityCheck {
                name,
                residual: r,
                tolerance,
                passed: r <= tolerance,
                note: None,
            },
            Err(e) => IdentityCheck {
                name,
                residual: f64::INFINITY,
                tolerance,
                passed: false,
                note: Some(e.to_string()),
            },
        };
        self.checks.push(check);
    }
}

fn max_abs<T: Scalar>(xs: impl IntoIterator<Item = T>) -> f64 {
    xs.into_iter().map(|x| x.abs().to_f64_lossy()).fold(0.0, f64::max)
}

fn random_point<T: Scalar, R: Rng>(n: usize, rng: &mut R) -> PgfPoint<T> {
    PgfPoint::new((0..n).map(|_| T::lit(rng.gen::<f64>())).collect()).expect("point in the unit cube")
}

/// `|rho^-n M^n - u^t v|_inf`.
pub fn eigen_limit_residual<T: Scalar>(model: &LFModel<T>, summary: &SpectralSummary<T>, n: usize) -> f64 {
    let m = mean_matrix(model).scale(summary.rho.recip());
    let mut p = DenseMatrix::identity(model.n_types());
    for _ in 0..n {
        p = p.matmul(&m);
    }
    let limit = DenseMatrix::outer(&summary.u, &summary.v);
    p.max_abs_diff(&limit).to_f64_lossy()
}

/// Runs every identity that applies to the model. Transform-based checks
/// need a supercritical process with `0 < q < 1` off the boundary.
pub fn run_identities<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    opts: &IdentityOptions,
) -> IdentityReport {
    let mut suite = Suite::<T>::new();
    let n = model.n_types();
    let (rho, m) = (summary.rho, model.m());
    let q = &summary.q;
    let so = SeriesOptions::<T>::default();
    let one = T::one();

    // Eigen relations and normalization.
    let mm = mean_matrix(model);
    suite.push(
        "eigen_right",
        1e-9,
        Ok(max_abs(
            mm.mul_vec(&summary.u).iter().zip(&summary.u).map(|(&a, &u)| a - rho * u),
        )),
    );
    suite.push(
        "eigen_left",
        1e-9,
        Ok(max_abs(
            mm.vec_mul(&summary.v).iter().zip(&summary.v).map(|(&a, &v)| a - rho * v),
        )),
    );
    let vu: T = summary.v.iter().zip(&summary.u).map(|(&a, &b)| a * b).sum();
    let v1: T = summary.v.iter().copied().sum();
    suite.push("normalization", 1e-9, Ok(max_abs([vu - one, v1 - one])));

    if summary.class != Criticality::Supercritical {
        return IdentityReport { checks: suite.checks };
    }

    suite.push(
        "fixed_point",
        1e-9,
        PgfPoint::new(q.clone())
            .and_then(|p| pgf_eval(model, &p))
            .map(|f| max_abs(f.iter().zip(q).map(|(&a, &b)| a - b))),
    );
    let gq: T = model.g().iter().zip(q).map(|(&a, &b)| a * b).sum();
    suite.push("geq", 1e-9, Ok(max_abs([gq - (one + m - rho) / m])));
    let hq = model.h().right_mul(q);
    let h1 = model.h().row_sums();
    suite.push(
        "hq",
        1e-9,
        Ok(max_abs((0..n).map(|i| hq[i] - rho * (h1[i] - one + q[i])))),
    );
    let sum_hq = right_series(model.h(), q, one, &so, "sum of H^n q");
    suite.push(
        "qur",
        1e-9,
        sum_hq
            .as_ref()
            .map(|(s, _)| max_abs((0..n).map(|i| (rho - one) * s[i] - rho * (one - q[i]))))
            .map_err(Clone::clone),
    );
    suite.push(
        "mur",
        1e-9,
        sum_hq
            .map(|(s, _)| {
                let gs: T = model.g().iter().zip(&s).map(|(&a, &b)| a * b).sum();
                max_abs([m * gs - rho])
            }),
    );

    // Transforms.
    let dual = dual_triplet(model, summary);
    let hs = hs_triplet(model, summary);
    let law = skeleton_law(model, summary);

    suite.push(
        "gh",
        1e-10,
        dual.as_ref().map_err(Clone::clone).map(|d| gh_residual(model, d, rho, q, 10)),
    );
    suite.push(
        "dual_subcritical",
        0.0,
        dual.as_ref().map_err(Clone::clone).map(|d| flag(classify(d) == Criticality::Subcritical)),
    );
    suite.push(
        "hs_supercritical",
        0.0,
        hs.as_ref().map_err(Clone::clone).map(|h| flag(classify(h) == Criticality::Supercritical)),
    );
    suite.push(
        "hs_stochastic",
        1e-12,
        hs.as_ref()
            .map_err(Clone::clone)
            .map(|h| max_abs(h.h().row_sums().into_iter().map(|s| s - one))),
    );
    suite.push(
        "split_means",
        1e-12,
        (|| {
            let d = dual.as_ref().map_err(Clone::clone)?;
            let h = hs.as_ref().map_err(Clone::clone)?;
            Ok(max_abs((0..n).map(|j| {
                h.m() * h.g()[j] + (m - h.m()) * d.g()[j] - m * model.g()[j]
            })))
        })(),
    );

    // Dual round trip.
    let dual_rt = (|| -> Result<[f64; 4]> {
        let d = dual.as_ref().map_err(Clone::clone)?;
        let closed = dual_spectral_closed(model, summary)?;
        let rho_hat = perron_root(d, T::lit(T::ROOT_TOL), &so)?;
        let (beta, _) = compute_beta_with(d, closed.rho_hat, &so)?;
        let (u, _) = eigen_u_with(d, closed.rho_hat, closed.beta_hat, &so)?;
        let (v, _) = eigen_v_with(d, closed.rho_hat, &so)?;
        Ok([
            max_abs([rho_hat * rho - one]),
            max_abs([beta - closed.beta_hat]),
            max_abs_diff(&u, &closed.u_hat).to_f64_lossy(),
            max_abs_diff(&v, &closed.v_hat).to_f64_lossy(),
        ])
    })();
    for (k, (name, tol)) in [
        ("dual_rho", 1e-9),
        ("dual_beta", 1e-8),
        ("dual_u", 1e-7),
        ("dual_v", 1e-7),
    ]
    .into_iter()
    .enumerate()
    {
        suite.push(name, tol, dual_rt.as_ref().map(|r| r[k]).map_err(Clone::clone));
    }

    // Skeleton round trip.
    let hs_rt = (|| -> Result<[f64; 4]> {
        let h = hs.as_ref().map_err(Clone::clone)?;
        let closed = hs_spectral_closed(model, summary)?;
        let rho_tilde = perron_root(h, T::lit(T::ROOT_TOL), &so)?;
        let (beta, _) = compute_beta_with(h, rho_tilde, &so)?;
        let (u, _) = eigen_u_with(h, rho_tilde, beta, &so)?;
        let (v, _) = eigen_v_with(h, closed.rho_tilde, &so)?;
        Ok([
            max_abs([rho_tilde - rho]),
            max_abs([beta - closed.beta_tilde]),
            max_abs(u.iter().map(|&x| x - one)),
            max_abs_diff(&v, &closed.v_tilde).to_f64_lossy(),
        ])
    })();
    for (k, (name, tol)) in [
        ("hs_rho", 1e-9),
        ("hs_beta", 1e-8),
        ("hs_u", 1e-8),
        ("hs_v", 1e-7),
    ]
    .into_iter()
    .enumerate()
    {
        suite.push(name, tol, hs_rt.as_ref().map(|r| r[k]).map_err(Clone::clone));
    }

    suite.push(
        "skeleton_mean",
        1e-10,
        (|| {
            let l = law.as_ref().map_err(Clone::clone)?;
            let alt = skeleton_total_mean_from_means(model, summary)?;
            Ok(max_abs_diff(&l.total_mean(), &alt).to_f64_lossy())
        })(),
    );

    // Generating-function identities at random points.
    let mut rng = replicate_rng(opts.seed, 0);
    let points: Vec<(PgfPoint<T>, PgfPoint<T>)> = (0..opts.points)
        .map(|_| (random_point(n, &mut rng), random_point(n, &mut rng)))
        .collect();
    suite.push(
        "mixture",
        1e-10,
        (|| {
            let d = dual.as_ref().map_err(Clone::clone)?;
            let mut worst = 0.0_f64;
            for (s, _) in &points {
                worst = worst.max(max_abs(mixture_residual_with(model, summary, d, s)?));
            }
            Ok(worst)
        })(),
    );
    suite.push(
        "joint_dual_path",
        1e-10,
        (|| {
            let l: &SkeletonLaw<T> = law.as_ref().map_err(Clone::clone)?;
            let mut worst = 0.0_f64;
            for (s, t) in &points {
                let a = joint_pgf_defining(model, summary, s, t)?;
                let b = joint_pgf_factorized(l, s, t);
                worst = worst.max(max_abs_diff(&a, &b).to_f64_lossy());
            }
            Ok(worst)
        })(),
    );
    suite.push(
        "joint_marginal",
        1e-10,
        (|| {
            let h = hs.as_ref().map_err(Clone::clone)?;
            let ones = PgfPoint::ones(n);
            let mut worst = 0.0_f64;
            for (s, _) in &points {
                let a = joint_pgf_defining(model, summary, s, &ones)?;
                let b = pgf_eval(h, s)?;
                worst = worst.max(max_abs_diff(&a, &b).to_f64_lossy());
            }
            Ok(worst)
        })(),
    );

    if let Some(power) = opts.eigen_limit_power {
        suite.push("eigen_limit", 1e-6, Ok(eigen_limit_residual(model, summary, power)));
    }

    IdentityReport { checks: suite.checks }
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

/// `max_k<=kmax |hat g hat H^k - m ((1+m-rho) rho^k)^-1 (g H^k) q|`.
fn gh_residual<T: Scalar>(model: &LFModel<T>, dual: &LFModel<T>, rho: T, q: &[T], kmax: usize) -> f64 {
    let m = model.m();
    let mut lhs = dual.g().to_vec();
    let mut base = model.g().to_vec();
    let mut scale = m / (T::one() + m - rho);
    let mut worst = 0.0_f64;
    for k in 0..=kmax {
        if k > 0 {
            lhs = dual.h().left_mul(&lhs);
            base = model.h().left_mul(&base);
            scale = scale / rho;
        }
        worst = worst.max(max_abs(
            lhs.iter().zip(&base).zip(q).map(|((&l, &b), &qj)| l - scale * b * qj),
        ));
    }
    worst
}

/// Fails with the first violated check, for callers that want a `Result`.
pub fn require_identities(report: &IdentityReport) -> Result<()> {
    match report.failures().next() {
        None => Ok(()),
        Some(c) => Err(Error::Domain(format!(
            "identity {} violated: residual {:e} > {:e}",
            c.name, c.residual, c.tolerance
        ))),
    }
}
