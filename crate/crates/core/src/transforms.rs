//! Dual (extinction-conditioned) and Harris-Sevastyanov (skeleton) triplets,
//! their closed-form spectral data, and the joint skeleton offspring law.
//!
//! For a supercritical process with extinction probabilities `q` and Perron
//! root `rho`:
//!
//! * dual: `hat h_ij = h_ij q_j / (q_i rho)`, `hat m = (1 + m - rho) / rho`,
//!   `hat g_j = g_j q_j m / (1 + m - rho)`;
//! * skeleton: `tilde h_ij = (1-q_j)/(1-q_i) (h_ij + m g_j (q_i - h_i0))`,
//!   `tilde m = rho - 1`, `tilde g_j = m g_j (1 - q_j) / (rho - 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::model::{validate_model_with_tol, LFModel};
use crate::scalar::{dot, Scalar};
use crate::spectral::{left_series, Criticality, Mu, SeriesOptions, SpectralSummary};

fn require_supercritical<T: Scalar>(s: &SpectralSummary<T>) -> Result<()> {
    match s.class {
        Criticality::Supercritical => Ok(()),
        class => Err(Error::NotSupercritical { class }),
    }
}

const BOUNDARY_TOL: f64 = 1e-12;

fn require_dual<T: Scalar>(model: &LFModel<T>, s: &SpectralSummary<T>) -> Result<()> {
    require_supercritical(s)?;
    let gap = T::one() + model.m() - s.rho;
    if gap <= T::lit(BOUNDARY_TOL.max(T::STOCHASTIC_TOL)) {
        return Err(Error::DualDegenerate(format!(
            "rho = {} is on the boundary 1 + m",
            s.rho
        )));
    }
    if let Some(i) = s.q.iter().position(|&qi| qi <= T::zero()) {
        return Err(Error::DualDegenerate(format!(
            "q[{i}] = 0: type {i} never goes extinct"
        )));
    }
    Ok(())
}

fn require_hs<T: Scalar>(s: &SpectralSummary<T>) -> Result<()> {
    require_supercritical(s)?;
    match s.q.iter().position(|&qi| qi >= T::one()) {
        Some(index) => Err(Error::CertainExtinction { index }),
        None => Ok(()),
    }
}

/// Transformed triplets are checked loosely: their stochasticity holds only
/// up to the accuracy of `q` and `rho`.
fn finish<T: Scalar>(h: SparseMatrix<T>, g: Vec<T>, m: T) -> Result<LFModel<T>> {
    let model = LFModel::new_unchecked(h, g, m);
    let report = validate_model_with_tol(&model, T::lit(T::STOCHASTIC_TOL * 1e3));
    if report.ok {
        Ok(model)
    } else {
        Err(Error::Validation(report))
    }
}

/// Triplet of the process conditioned on extinction.
pub fn dual_triplet<T: Scalar>(model: &LFModel<T>, s: &SpectralSummary<T>) -> Result<LFModel<T>> {
    require_dual(model, s)?;
    let (q, rho, m) = (&s.q, s.rho, model.m());
    let gap = T::one() + m - rho;
    let entries: Vec<(usize, usize, T)> = model
        .h()
        .entries()
        .map(|(i, j, h)| (i, j, h * q[j] / (q[i] * rho)))
        .collect();
    let h_hat = SparseMatrix::from_triplets(model.n_types(), &entries).expect("valid pattern");
    let g_hat = model
        .g()
        .iter()
        .zip(q)
        .map(|(&g, &qj)| g * qj * m / gap)
        .collect();
    finish(h_hat, g_hat, gap / rho)
}

/// Triplet of the skeleton process (infinite lines of descent).
pub fn hs_triplet<T: Scalar>(model: &LFModel<T>, s: &SpectralSummary<T>) -> Result<LFModel<T>> {
    require_hs(s)?;
    let (q, rho, m) = (&s.q, s.rho, model.m());
    let n = model.n_types();
    let h = model.h();
    let h0 = model.h0();
    let g = model.g();
    let rows: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let lift = m * (q[i] - h0[i]);
            let scale = (T::one() - q[i]).recip();
            (0..n)
                .map(|j| (T::one() - q[j]) * scale * (h.get(i, j) + g[j] * lift))
                .collect()
        })
        .collect();
    let m_tilde = rho - T::one();
    let g_tilde = g
        .iter()
        .zip(q)
        .map(|(&gj, &qj)| m / m_tilde * gj * (T::one() - qj))
        .collect();
    finish(SparseMatrix::from_dense(&rows), g_tilde, m_tilde)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualClosedForm<T> {
    pub rho_hat: T,
    pub beta_hat: T,
    pub u_hat: Vec<T>,
    pub v_hat: Vec<T>,
}

/// Spectral data of the dual process without re-solving it:
/// `rho^-1`, `(mu - 1)/(rho - 1)`, `(q^-1 - 1)(1 + m)/(mu - 1)` and
/// `m/(1+m) sum_k (g H^k) q`.
pub fn dual_spectral_closed<T: Scalar>(
    model: &LFModel<T>,
    s: &SpectralSummary<T>,
) -> Result<DualClosedForm<T>> {
    require_dual(model, s)?;
    let mu = match s.mu {
        Mu::Finite(mu) => mu,
        Mu::Infinite => return Err(Error::DualDegenerate("mu is infinite".into())),
    };
    let m = model.m();
    let (series, _) = left_series(model.h(), model.g(), T::one(), &SeriesOptions::default(), "dual v series")?;
    let c = m / (T::one() + m);
    Ok(DualClosedForm {
        rho_hat: s.rho.recip(),
        beta_hat: (mu - T::one()) / (s.rho - T::one()),
        u_hat: s
            .q
            .iter()
            .map(|&qi| (qi.recip() - T::one()) * (T::one() + m) / (mu - T::one()))
            .collect(),
        v_hat: series
            .iter()
            .zip(&s.q)
            .map(|(&x, &qi)| c * x * qi)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsClosedForm<T> {
    pub rho_tilde: T,
    pub beta_tilde: T,
    pub u_tilde: Vec<T>,
    pub v_tilde: Vec<T>,
}

/// Spectral data of the skeleton process: `rho`, `rho/(rho - 1)`, the unit
/// vector, and `m sum_k rho^(-1-k) (g A^k)(1 - q)` with
/// `A = H + m rho^-1 (H q^t) g`.
pub fn hs_spectral_closed<T: Scalar>(
    model: &LFModel<T>,
    s: &SpectralSummary<T>,
) -> Result<HsClosedForm<T>> {
    require_hs(s)?;
    let opts = SeriesOptions::<T>::default();
    let (q, rho, m) = (&s.q, s.rho, model.m());
    let n = model.n_types();
    let h = model.h();
    let g = model.g();
    let hq = h.right_mul(q);
    let inv_rho = rho.recip();
    let coupling = m * inv_rho;

    let mut w = g.to_vec();
    let mut buf = vec![T::zero(); n];
    let mut acc = w.clone();
    let mut prev = T::infinity();
    let mut converged = false;
    for _ in 0..opts.k_max {
        h.left_mul_into(&w, &mut buf);
        let c = coupling * dot(&w, &hq);
        for j in 0..n {
            w[j] = (buf[j] + c * g[j]) * inv_rho;
            acc[j] = acc[j] + w[j];
        }
        let term = w.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        if term < opts.eps && term <= prev {
            converged = true;
            break;
        }
        prev = term;
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "skeleton v series",
            iterations: opts.k_max,
        });
    }
    Ok(HsClosedForm {
        rho_tilde: rho,
        beta_tilde: rho / (rho - T::one()),
        u_tilde: vec![T::one(); n],
        v_tilde: acc
            .iter()
            .zip(q)
            .map(|(&a, &qj)| m * inv_rho * a * (T::one() - qj))
            .collect(),
    })
}

/// Joint offspring law of a skeleton particle, ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonLaw<T> {
    /// The original triplet.
    pub base: LFModel<T>,
    pub rho: T,
    pub h_tilde: SparseMatrix<T>,
    pub m_tilde: T,
    pub g_tilde: Vec<T>,
    pub h_hat: SparseMatrix<T>,
    pub g_hat: Vec<T>,
    pub m_hat: T,
    /// Probability that the `(i, j)` reborn event carries no doomed cluster.
    pub h_ij0: DenseMatrix<T>,
    pub alpha: Vec<T>,
    pub q: Vec<T>,
    /// `h_ij + m g_j (q_i - h_i0)`.
    pair_weight: DenseMatrix<T>,
}

impl<T: Scalar> SkeletonLaw<T> {
    pub fn n_types(&self) -> usize {
        self.q.len()
    }

    /// `m g_j q_i / (h_ij + m g_j (q_i - h_i0))`, zero for pairs with no
    /// weight.
    pub(crate) fn h_ijk_scale(&self, i: usize, j: usize) -> T {
        let d = self.pair_weight[(i, j)];
        if d > T::zero() {
            self.base.m() * self.base.g()[j] * self.q[i] / d
        } else {
            T::zero()
        }
    }

    /// Probability that the doomed cluster of the `(i, j)` event starts with
    /// a type-`k` particle. Computed on demand from the dual kernel.
    pub fn h_ijk(&self, i: usize, j: usize, k: usize) -> T {
        self.h_ijk_scale(i, j) * self.h_hat.get(i, k)
    }

    /// Mean total offspring of a skeleton particle,
    /// `1 + m + alpha_i (1 + hat m)`.
    pub fn total_mean(&self) -> Vec<T> {
        let base = T::one() + self.base.m();
        self.alpha
            .iter()
            .map(|&a| base + a * (T::one() + self.m_hat))
            .collect()
    }
}

/// Assembles the joint skeleton law. Pairs `(i, j)` with zero weight get
/// `h_ij0 = 1`; they are never sampled since `tilde h_ij = 0` there.
pub fn skeleton_law<T: Scalar>(model: &LFModel<T>, s: &SpectralSummary<T>) -> Result<SkeletonLaw<T>> {
    let dual = dual_triplet(model, s)?;
    let hs = hs_triplet(model, s)?;
    let n = model.n_types();
    let (q, rho, m) = (&s.q, s.rho, model.m());
    let h0 = model.h0();
    let g = model.g();

    let alpha: Vec<T> = (0..n)
        .map(|i| (rho - T::one()) * (q[i] - h0[i]) / (T::one() - q[i]))
        .collect();
    if let Some(i) = alpha.iter().position(|&a| !(a > T::zero() && a < T::one())) {
        return Err(Error::AlphaOutOfRange {
            index: i,
            value: alpha[i].to_f64_lossy(),
        });
    }

    let mut pair_weight = DenseMatrix::zeros(n, n);
    let mut h_ij0 = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let h = model.h().get(i, j);
            let d = h + m * g[j] * (q[i] - h0[i]);
            pair_weight[(i, j)] = d;
            h_ij0[(i, j)] = if d > T::zero() { h / d } else { T::one() };
        }
    }

    Ok(SkeletonLaw {
        base: model.clone(),
        rho,
        h_tilde: hs.h().clone(),
        m_tilde: hs.m(),
        g_tilde: hs.g().to_vec(),
        h_hat: dual.h().clone(),
        g_hat: dual.g().to_vec(),
        m_hat: dual.m(),
        h_ij0,
        alpha,
        q: q.clone(),
        pair_weight,
    })
}

/// `bar M_i = 1 + m + alpha_i (1 + hat m)`.
pub fn skeleton_total_mean<T: Scalar>(model: &LFModel<T>, s: &SpectralSummary<T>) -> Result<Vec<T>> {
    Ok(skeleton_law(model, s)?.total_mean())
}

/// The same mean through `M_i + (1+m)(h_i0 + (rho-1)(q_i-h_i0)/(rho(1-q_i)))`.
pub fn skeleton_total_mean_from_means<T: Scalar>(
    model: &LFModel<T>,
    s: &SpectralSummary<T>,
) -> Result<Vec<T>> {
    require_dual(model, s)?;
    require_hs(s)?;
    let one_m = T::one() + model.m();
    let rho = s.rho;
    Ok(model
        .h0()
        .iter()
        .zip(&s.q)
        .map(|(&h0, &q)| {
            (T::one() - h0) * one_m
                + one_m * (h0 + (rho - T::one()) * (q - h0) / (rho * (T::one() - q)))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_single_type, validate_model};
    use crate::spectral::extinction_q;

    fn model_b() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn dual_model_b() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let d = dual_triplet(&b, &s).unwrap();
        assert!(validate_model(&d).ok);
        assert!(close(d.m(), 2.0 / 3.0));
        assert!(d.g().iter().all(|&x| close(x, 0.5)));
        for (i, j, h) in b.h().entries() {
            assert!(close(d.h().get(i, j), h / 1.8));
        }
        assert!(d.h0().iter().all(|&x| close(x, 2.0 / 3.0)));
    }

    #[test]
    fn dual_single_type() {
        let st = embed_single_type(0.25, 3.0).unwrap();
        let s = extinction_q(&st).unwrap();
        let d = dual_triplet(&st, &s).unwrap();
        assert!(close(d.m(), 1.0 / 3.0));
        assert!(close(d.h0()[0], 0.75));
    }

    #[test]
    fn dual_degenerate_without_deaths() {
        let st = embed_single_type(0.0, 2.0).unwrap();
        let s = extinction_q(&st).unwrap();
        assert!(matches!(dual_triplet(&st, &s), Err(Error::DualDegenerate(_))));
        assert!(matches!(skeleton_law(&st, &s), Err(Error::DualDegenerate(_))));
        // the skeleton law is the original law when q = 0
        let hs = hs_triplet(&st, &s).unwrap();
        assert!(close(hs.m(), 2.0));
        assert!(close(hs.h().get(0, 0), 1.0));
    }

    #[test]
    fn hs_model_b() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let hs = hs_triplet(&b, &s).unwrap();
        assert!(validate_model(&hs).ok);
        assert!(close(hs.m(), 0.8));
        assert!(hs.g().iter().all(|&x| close(x, 0.5)));
        let expected = [[0.5, 0.5], [0.4, 0.6]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(hs.h().get(i, j), expected[i][j]));
            }
            assert!(hs.h0()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn hs_single_type_and_critical() {
        let st = embed_single_type(0.25, 3.0).unwrap();
        let s = extinction_q(&st).unwrap();
        assert!(close(hs_triplet(&st, &s).unwrap().m(), 2.0));

        let crit = embed_single_type(0.5, 1.0).unwrap();
        let sc = extinction_q(&crit).unwrap();
        assert!(matches!(hs_triplet(&crit, &sc), Err(Error::NotSupercritical { .. })));
    }

    #[test]
    fn closed_forms_model_b() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let d = dual_spectral_closed(&b, &s).unwrap();
        assert!(close(d.rho_hat, 5.0 / 9.0));
        assert!(close(d.beta_hat, 2.5));
        assert!(d.u_hat.iter().all(|&x| close(x, 1.0)));
        let h = hs_spectral_closed(&b, &s).unwrap();
        assert!(close(h.rho_tilde, 1.8));
        assert!(close(h.beta_tilde, 2.25));
        assert_eq!(h.u_tilde, vec![1.0, 1.0]);
        assert!(close(h.v_tilde.iter().sum::<f64>(), 1.0));

        let st = embed_single_type(0.25, 3.0).unwrap();
        let sst = extinction_q(&st).unwrap();
        assert!(close(dual_spectral_closed(&st, &sst).unwrap().rho_hat, 1.0 / 3.0));
        assert!(close(hs_spectral_closed(&st, &sst).unwrap().v_tilde[0], 1.0));
    }

    #[test]
    fn skeleton_law_model_b() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let law = skeleton_law(&b, &s).unwrap();
        // denominator 0.3 + 2 * 0.5 * 0.2 = 0.5
        assert!(close(law.h_ij0[(0, 0)], 0.6));
        let tail: f64 = (0..2).map(|k| law.h_ijk(0, 0, k)).sum();
        assert!(close(tail, 0.4));
        for i in 0..2 {
            for j in 0..2 {
                let t: f64 = (0..2).map(|k| law.h_ijk(i, j, k)).sum();
                assert!(close(law.h_ij0[(i, j)] + t, 1.0));
            }
        }
        assert!(law.alpha.iter().all(|&a| close(a, 0.4)));
        let tm = skeleton_total_mean(&b, &s).unwrap();
        let alt = skeleton_total_mean_from_means(&b, &s).unwrap();
        for (a, c) in tm.iter().zip(&alt) {
            assert!(close(*a, 11.0 / 3.0));
            assert!(close(*c, 11.0 / 3.0));
        }
    }

    #[test]
    fn skeleton_law_single_type_split() {
        let st = embed_single_type(0.25, 3.0).unwrap();
        let s = extinction_q(&st).unwrap();
        let law = skeleton_law(&st, &s).unwrap();
        // extra offspring are skeleton with probability tilde m / m
        assert!(close(law.m_tilde * law.g_tilde[0] / 3.0, 2.0 / 3.0));
        assert!(close((3.0 - law.m_tilde) * law.g_hat[0] / 3.0, 1.0 / 3.0));
        assert!(close(law.alpha[0], 0.25));
        assert!(close(law.total_mean()[0], 13.0 / 3.0));
    }

    #[test]
    fn zero_weight_pairs_use_convention() {
        // type 2 is never a first child of type 1 and g puts no mass on it
        let model = LFModel::from_dense(
            &[vec![0.6, 0.0], vec![0.3, 0.3]],
            vec![1.0, 0.0],
            2.0,
        )
        .unwrap();
        let s = extinction_q(&model).unwrap();
        let law = skeleton_law(&model, &s).unwrap();
        assert_eq!(law.h_ij0[(0, 1)], 1.0);
        assert_eq!(law.h_tilde.get(0, 1), 0.0);
        assert_eq!(law.h_ijk(0, 1, 0), 0.0);
    }
}
