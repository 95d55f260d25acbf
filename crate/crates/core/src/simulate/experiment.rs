//! Parallel replicate runs and the labeled-tree experiment.

use rayon::prelude::*;
use serde::Serialize;

use super::rng::replicate_rng;
use super::sampler::OffspringSampler;
use super::stats::{power_product, Moments};
use super::tree::{simulate_tree_with, GenealogyTree, Label};
use crate::error::{Error, Result};
use crate::genfun::{pgf_eval, pgf_iterate, PgfPoint};
use crate::matrix::DenseMatrix;
use crate::model::{mean_matrix, LFModel};
use crate::scalar::Scalar;
use crate::spectral::{Criticality, SpectralSummary};

/// Runs `f(replicate_index, rng)` for every replicate on `workers` threads.
///
/// Replicate `r` always draws from `replicate_rng(seed, r)` and results come
/// back in replicate order, so the output does not depend on `workers`.
pub fn run_replicates<T, F>(seed: u64, replicates: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut super::rng::SimRng) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, r);
                f(r, &mut rng)
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeExperimentConfig<T> {
    pub seed: u64,
    pub replicates: u64,
    pub horizon: usize,
    pub root_type: usize,
    pub probes: Vec<PgfPoint<T>>,
    pub workers: usize,
    pub cap: u64,
}

/// One line of the experiment table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub quantity: &'static str,
    pub index: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: Option<f64>,
    pub samples: u64,
}

impl StatRow {
    /// `|estimate - analytic|` in standard errors; `None` without an analytic
    /// value, infinite when the standard error is zero but the values differ.
    pub fn z_score(&self) -> Option<f64> {
        let a = self.analytic?;
        let d = (self.estimate - a).abs();
        Some(if d == 0.0 { 0.0 } else { d / self.std_error })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeExperiment {
    pub rows: Vec<StatRow>,
    /// First replicate's tree, kept for export.
    #[serde(skip)]
    pub first_tree: Option<GenealogyTree>,
}

struct Observation {
    extinct: f64,
    root_skeleton: f64,
    skeleton: Vec<f64>,
    doomed: Vec<f64>,
    z_horizon: Vec<f64>,
    probes: Vec<f64>,
}

fn observe(tree: &GenealogyTree, n_types: usize, probes: &[Vec<f64>]) -> Observation {
    let sizes = tree.generation_sizes();
    let labels = tree.label_counts();
    let first_gen = tree.type_counts(1.min(tree.horizon), n_types);
    Observation {
        extinct: f64::from(u8::from(sizes[tree.horizon] == 0)),
        root_skeleton: f64::from(u8::from(tree.root_label() == Label::Skeleton)),
        skeleton: labels.iter().map(|c| c.0 as f64).collect(),
        doomed: labels.iter().map(|c| c.1 as f64).collect(),
        z_horizon: tree
            .type_counts(tree.horizon, n_types)
            .into_iter()
            .map(|c| c as f64)
            .collect(),
        probes: probes.iter().map(|s| power_product(s, &first_gen)).collect(),
    }
}

/// Simulates independent labeled trees and compares empirical statistics
/// with their exact values:
///
/// * `extinct_by_horizon`: `f^(n)_root(0)`;
/// * `root_skeleton`: `1 - q_root`;
/// * `mean_skeleton` / `mean_doomed` per generation `k`:
///   `sum_j (M^k)_{root,j} (1 - q_j)` and `sum_j (M^k)_{root,j} q_j`;
/// * `mean_z_horizon` per type: row `root` of `M^n`;
/// * `offspring_pgf` per probe: `f_root(s)` (needs `horizon >= 1`).
pub fn run_tree_experiment<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    cfg: &TreeExperimentConfig<T>,
) -> Result<TreeExperiment> {
    if summary.class != Criticality::Supercritical {
        return Err(Error::NotSupercritical {
            class: summary.class,
        });
    }
    model.check_type(cfg.root_type)?;
    let n = model.n_types();
    for p in &cfg.probes {
        if p.len() != n {
            return Err(Error::Domain(format!(
                "probe point has {} entries, model has {n} types",
                p.len()
            )));
        }
    }
    if cfg.replicates == 0 {
        return Err(Error::EmptySamples);
    }
    let sampler = OffspringSampler::new(model);
    let probes: Vec<Vec<f64>> = cfg
        .probes
        .iter()
        .map(|p| p.as_slice().iter().map(|x| x.to_f64_lossy()).collect())
        .collect();

    let observed = run_replicates(cfg.seed, cfg.replicates, cfg.workers, |r, rng| {
        let tree = simulate_tree_with(&sampler, &summary.q, cfg.root_type, cfg.horizon, rng, cfg.cap)?;
        let obs = observe(&tree, n, &probes);
        Ok((obs, (r == 0).then_some(tree)))
    })?;

    let h = cfg.horizon;
    let mut extinct = Moments::default();
    let mut root_skeleton = Moments::default();
    let mut skeleton = vec![Moments::default(); h + 1];
    let mut doomed = vec![Moments::default(); h + 1];
    let mut z_horizon = vec![Moments::default(); n];
    let mut probe_m = vec![Moments::default(); probes.len()];
    let mut first_tree = None;
    for (obs, tree) in observed {
        if tree.is_some() {
            first_tree = tree;
        }
        extinct.push(obs.extinct);
        root_skeleton.push(obs.root_skeleton);
        for k in 0..=h {
            skeleton[k].push(obs.skeleton[k]);
            doomed[k].push(obs.doomed[k]);
        }
        for j in 0..n {
            z_horizon[j].push(obs.z_horizon[j]);
        }
        for (m, x) in probe_m.iter_mut().zip(&obs.probes) {
            m.push(*x);
        }
    }

    let f = |x: T| x.to_f64_lossy();
    let root = cfg.root_type;
    let q: Vec<f64> = summary.q.iter().map(|&x| f(x)).collect();
    let mean = mean_matrix(model);
    let mut power = DenseMatrix::<T>::identity(n);
    let mut power_rows = Vec::with_capacity(h + 1);
    for k in 0..=h {
        if k > 0 {
            power = power.matmul(&mean);
        }
        power_rows.push(power.row(root).iter().map(|&x| f(x)).collect::<Vec<f64>>());
    }
    let extinct_exact = f(pgf_iterate(model, &PgfPoint::zeros(n), h)?[root]);

    let row = |quantity, index, m: &Moments, analytic| StatRow {
        quantity,
        index,
        estimate: m.mean(),
        std_error: m.std_err(),
        analytic,
        samples: m.n,
    };
    let mut rows = vec![
        row("extinct_by_horizon", 0, &extinct, Some(extinct_exact)),
        row("root_skeleton", root, &root_skeleton, Some(1.0 - q[root])),
    ];
    for k in 0..=h {
        let s_exact = power_rows[k].iter().zip(&q).map(|(m, q)| m * (1.0 - q)).sum();
        rows.push(row("mean_skeleton", k, &skeleton[k], Some(s_exact)));
    }
    for k in 0..=h {
        let d_exact = power_rows[k].iter().zip(&q).map(|(m, q)| m * q).sum();
        rows.push(row("mean_doomed", k, &doomed[k], Some(d_exact)));
    }
    for j in 0..n {
        rows.push(row("mean_z_horizon", j, &z_horizon[j], Some(power_rows[h][j])));
    }
    for (idx, (m, p)) in probe_m.iter().zip(&cfg.probes).enumerate() {
        let exact = if h >= 1 {
            Some(f(pgf_eval(model, p)?[root]))
        } else {
            None
        };
        rows.push(row("offspring_pgf", idx, m, exact));
    }
    Ok(TreeExperiment { rows, first_tree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::extinction_q;
    use crate::simulate::tree::DEFAULT_POPULATION_CAP;

    fn model_b() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
    }

    fn cfg(workers: usize) -> TreeExperimentConfig<f64> {
        TreeExperimentConfig {
            seed: 42,
            replicates: 2000,
            horizon: 4,
            root_type: 0,
            probes: vec![PgfPoint::splat(2, 0.5).unwrap()],
            workers,
            cap: DEFAULT_POPULATION_CAP,
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let a = run_tree_experiment(&b, &s, &cfg(1)).unwrap();
        let c = run_tree_experiment(&b, &s, &cfg(4)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn estimates_are_near_exact_values() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let e = run_tree_experiment(&b, &s, &cfg(2)).unwrap();
        for r in &e.rows {
            let z = r.z_score().unwrap();
            assert!(z < 5.0, "{r:?}");
        }
        let root = &e.rows[1];
        assert_eq!(root.quantity, "root_skeleton");
        assert!((root.analytic.unwrap() - 0.4).abs() < 1e-10);
    }

    #[test]
    fn replicate_results_are_ordered() {
        let out = run_replicates(1, 50, 3, |r, _| Ok(r)).unwrap();
        assert_eq!(out, (0..50).collect::<Vec<_>>());
    }
}
