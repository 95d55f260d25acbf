//! Random supercritical models for property tests and benchmarks.

use rand::seq::index::sample;
use rand::Rng;

use crate::matrix::SparseMatrix;
use crate::model::LFModel;
use crate::spectral::{classify, Criticality};

/// Shape of generated models. Every row of `H` has between one and
/// `density * N` nonzero entries with row sum in `row_sum`; `g` has full
/// support, which makes the mean matrix positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelSpec {
    pub n_types: (usize, usize),
    pub density: f64,
    pub row_sum: (f64, f64),
    pub m: (f64, f64),
    /// Smallest accepted `mu`; keeps `rho` away from one.
    pub min_mu: f64,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self {
            n_types: (1, 20),
            density: 0.3,
            row_sum: (0.2, 0.95),
            m: (0.5, 3.0),
            min_mu: 1.2,
        }
    }
}

impl RandomModelSpec {
    /// Few types, dense `H` and a strong geometric part: the mean matrix
    /// has a wide spectral gap, so `rho^-n M^n` settles within a few dozen
    /// steps.
    pub fn small() -> Self {
        Self {
            n_types: (2, 6),
            density: 1.0,
            row_sum: (0.2, 0.8),
            m: (1.0, 3.0),
            min_mu: 1.5,
        }
    }
}

/// Draws models until one is supercritical with `mu >= min_mu`.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, spec: &RandomModelSpec) -> LFModel<f64> {
    loop {
        let model = draw(rng, spec);
        if classify(&model) != Criticality::Supercritical {
            continue;
        }
        let mu = crate::spectral::compute_mu(&model).finite().unwrap_or(f64::INFINITY);
        if mu >= spec.min_mu {
            return model;
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, spec: &RandomModelSpec) -> LFModel<f64> {
    let n = rng.gen_range(spec.n_types.0..=spec.n_types.1);
    let max_nnz = ((spec.density * n as f64).ceil() as usize).clamp(1, n);
    let mut triplets = Vec::new();
    for i in 0..n {
        let k = rng.gen_range(1..=max_nnz);
        let cols = sample(rng, n, k);
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let row_sum = rng.gen_range(spec.row_sum.0..=spec.row_sum.1);
        for (j, wj) in cols.iter().zip(&w) {
            triplets.push((i, j, row_sum * wj / total));
        }
    }
    let h = SparseMatrix::from_triplets(n, &triplets).expect("distinct columns per row");
    let gw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let gt: f64 = gw.iter().sum();
    let g = gw.into_iter().map(|x| x / gt).collect();
    let m = rng.gen_range(spec.m.0..=spec.m.1);
    LFModel::new(h, g, m).expect("generated model is valid")
}

/// Supercritical single-type parameters `(h0, m)` with mean at least
/// `min_mean`.
pub fn random_single_type<R: Rng + ?Sized>(rng: &mut R, min_mean: f64) -> (f64, f64) {
    loop {
        let h0 = rng.gen_range(0.0..0.9);
        let m = rng.gen_range(0.1..5.0);
        if (1.0 - h0) * (1.0 + m) >= min_mean {
            return (h0, m);
        }
    }
}
