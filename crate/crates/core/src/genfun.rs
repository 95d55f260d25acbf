//! Evaluation of the offspring generating functions and of the joint
//! skeleton/doomed generating function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LFModel;
use crate::scalar::{dot, max_abs_diff, Scalar};
use crate::spectral::{Criticality, SpectralSummary};
use crate::transforms::{self, SkeletonLaw};

/// A point of `[0, 1]^N` at which generating functions are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfPoint<T>(Vec<T>);

impl<T: Scalar> PgfPoint<T> {
    pub fn new(s: Vec<T>) -> Result<Self> {
        match s.iter().position(|&x| !(x >= T::zero() && x <= T::one())) {
            Some(j) => Err(Error::Domain(format!(
                "point component {j} = {} outside [0, 1]",
                s[j]
            ))),
            None => Ok(Self(s)),
        }
    }

    pub fn splat(n: usize, x: T) -> Result<Self> {
        Self::new(vec![x; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![T::one(); n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

fn check_dim<T: Scalar>(model: &LFModel<T>, s: &[T]) -> Result<()> {
    if s.len() == model.n_types() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "point has {} components, model has {} types",
            s.len(),
            model.n_types()
        )))
    }
}

const DENOMINATOR_FLOOR: f64 = 1e-14;

/// `out_i = h_i0 + (H s)_i / (1 + m - m g.s)`.
pub(crate) fn eval_into<T: Scalar>(model: &LFModel<T>, s: &[T], out: &mut [T]) -> Result<()> {
    let m = model.m();
    let denom = T::one() + m - m * dot(model.g(), s);
    if !(denom >= T::lit(DENOMINATOR_FLOOR)) {
        return Err(Error::DegenerateDenominator {
            value: denom.to_f64_lossy(),
        });
    }
    model.h().right_mul_into(s, out);
    for (o, &h0) in out.iter_mut().zip(model.h0()) {
        *o = h0 + *o / denom;
    }
    Ok(())
}

pub(crate) fn eval_raw<T: Scalar>(model: &LFModel<T>, s: &[T]) -> Result<Vec<T>> {
    check_dim(model, s)?;
    let mut out = vec![T::zero(); s.len()];
    eval_into(model, s, &mut out)?;
    Ok(out)
}

/// Offspring generating functions `f_i(s)` for all types.
pub fn pgf_eval<T: Scalar>(model: &LFModel<T>, s: &PgfPoint<T>) -> Result<Vec<T>> {
    eval_raw(model, s.as_slice())
}

/// `n`-fold composition `f^(n)(s)`; `n = 0` returns `s`.
pub fn pgf_iterate<T: Scalar>(model: &LFModel<T>, s: &PgfPoint<T>, n: usize) -> Result<Vec<T>> {
    check_dim(model, s.as_slice())?;
    let mut x = s.as_slice().to_vec();
    let mut next = vec![T::zero(); x.len()];
    for _ in 0..n {
        eval_into(model, &x, &mut next)?;
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x)
}

fn require_supercritical<T: Scalar>(summary: &SpectralSummary<T>) -> Result<()> {
    match summary.class {
        Criticality::Supercritical => Ok(()),
        class => Err(Error::NotSupercritical { class }),
    }
}

/// `F_i(s, t) = (f_i(s(1-q) + tq) - f_i(tq)) / (1 - q_i)`.
pub fn joint_pgf_defining<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    s: &PgfPoint<T>,
    t: &PgfPoint<T>,
) -> Result<Vec<T>> {
    require_supercritical(summary)?;
    let q = &summary.q;
    if let Some(i) = q.iter().position(|&qi| qi >= T::one()) {
        return Err(Error::CertainExtinction { index: i });
    }
    let (s, t) = (s.as_slice(), t.as_slice());
    check_dim(model, s)?;
    check_dim(model, t)?;
    let mixed: Vec<T> = (0..q.len())
        .map(|j| s[j] * (T::one() - q[j]) + t[j] * q[j])
        .collect();
    let doomed: Vec<T> = t.iter().zip(q).map(|(&tj, &qj)| tj * qj).collect();
    let a = eval_raw(model, &mixed)?;
    let b = eval_raw(model, &doomed)?;
    Ok((0..q.len())
        .map(|i| (a[i] - b[i]) / (T::one() - q[i]))
        .collect())
}

/// Product form of `F_i(s, t)`: a reborn skeleton child of type `j`, a
/// geometric cluster split into skeleton and doomed offspring, and a
/// linear-fractional doomed cluster whose first member depends on `(i, j)`.
pub fn joint_pgf_factorized<T: Scalar>(law: &SkeletonLaw<T>, s: &PgfPoint<T>, t: &PgfPoint<T>) -> Vec<T> {
    let (s, t) = (s.as_slice(), t.as_slice());
    let n = law.q.len();
    let m = law.base.m();
    let mixed_extra = m - law.m_tilde;
    let d_geo = T::one() + m - law.m_tilde * dot(&law.g_tilde, s) - mixed_extra * dot(&law.g_hat, t);
    let d_dual = T::one() + law.m_hat - law.m_hat * dot(&law.g_hat, t);
    // sum_k h_hat[i][k] t_k; the doomed first-child weights h_ijk factor
    // through it.
    let hat_t = law.h_hat.right_mul(t);
    (0..n)
        .map(|i| {
            law.h_tilde
                .row(i)
                .map(|(j, ht)| {
                    let first_doomed = law.h_ijk_scale(i, j) * hat_t[i];
                    ht * s[j] / d_geo * (law.h_ij0[(i, j)] + first_doomed / d_dual)
                })
                .sum()
        })
        .collect()
}

/// Joint generating function evaluated along both routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointPgf<T> {
    /// Defining-formula value; this is the returned value.
    pub value: Vec<T>,
    /// Product-form value, absent when the dual law is degenerate.
    pub factorized: Option<Vec<T>>,
}

impl<T: Scalar> JointPgf<T> {
    pub fn max_discrepancy(&self) -> Option<T> {
        self.factorized
            .as_ref()
            .map(|f| max_abs_diff(&self.value, f))
    }
}

pub const JOINT_AGREEMENT_TOL: f64 = 1e-10;

/// `F(s, t)` by the defining formula, cross-evaluated in product form.
/// In debug builds the two routes are asserted to agree.
pub fn joint_pgf<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    s: &PgfPoint<T>,
    t: &PgfPoint<T>,
) -> Result<JointPgf<T>> {
    let law = match transforms::skeleton_law(model, summary) {
        Ok(law) => Some(law),
        Err(Error::DualDegenerate(_)) => None,
        Err(e) => return Err(e),
    };
    joint_pgf_with_law(model, summary, law.as_ref(), s, t)
}

pub fn joint_pgf_with_law<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    law: Option<&SkeletonLaw<T>>,
    s: &PgfPoint<T>,
    t: &PgfPoint<T>,
) -> Result<JointPgf<T>> {
    let value = joint_pgf_defining(model, summary, s, t)?;
    let out = JointPgf {
        value,
        factorized: law.map(|l| joint_pgf_factorized(l, s, t)),
    };
    if let Some(d) = out.max_discrepancy() {
        debug_assert!(
            d.to_f64_lossy() < JOINT_AGREEMENT_TOL.max(T::STOCHASTIC_TOL * 100.0),
            "joint generating function routes disagree by {d}"
        );
    }
    Ok(out)
}

/// `r_i = f_i(s) - (1-q_i) F_i(s,s) - q_i fhat_i(s)`, which vanishes when the
/// process is the mixture of its skeleton and doomed parts.
pub fn mixture_residual<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    s: &PgfPoint<T>,
) -> Result<Vec<T>> {
    let dual = transforms::dual_triplet(model, summary)?;
    mixture_residual_with(model, summary, &dual, s)
}

pub fn mixture_residual_with<T: Scalar>(
    model: &LFModel<T>,
    summary: &SpectralSummary<T>,
    dual: &LFModel<T>,
    s: &PgfPoint<T>,
) -> Result<Vec<T>> {
    let f = pgf_eval(model, s)?;
    let skel = joint_pgf_defining(model, summary, s, s)?;
    let fhat = pgf_eval(dual, s)?;
    let q = &summary.q;
    Ok((0..q.len())
        .map(|i| f[i] - (T::one() - q[i]) * skel[i] - q[i] * fhat[i])
        .collect())
}

/// Distribution of the total offspring count of one particle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalCountPmf<T> {
    /// `P(total = k)` for `k = 0..=k_cap`.
    pub pmf: Vec<T>,
    /// `P(total > k_cap)`.
    pub tail_mass: T,
    /// `E[total; total > k_cap]`.
    pub tail_mean: T,
}

impl<T: Scalar> TotalCountPmf<T> {
    /// Mean including the analytic tail.
    pub fn mean(&self) -> T {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| T::lit(k as f64) * p)
            .sum::<T>()
            + self.tail_mean
    }
}

/// Total count is zero with probability `h_i0`, otherwise one plus a
/// geometric number with mean `m`.
pub fn total_count_pmf<T: Scalar>(model: &LFModel<T>, i: usize, k_cap: usize) -> Result<TotalCountPmf<T>> {
    model.check_type(i)?;
    let h0 = model.h0()[i];
    let h1 = T::one() - h0;
    let m = model.m();
    let r = m / (T::one() + m);
    let first = h1 / (T::one() + m);
    let mut pmf = Vec::with_capacity(k_cap + 1);
    pmf.push(h0);
    let mut w = first;
    for _ in 1..=k_cap {
        pmf.push(w);
        w = w * r;
    }
    // P(total >= k_cap + 1) = h1 r^k_cap; mean over that tail is
    // h1 r^k_cap (k_cap + 1 + m).
    let rk = r.powi(k_cap as i32);
    Ok(TotalCountPmf {
        pmf,
        tail_mass: h1 * rk,
        tail_mean: h1 * rk * (T::lit(k_cap as f64) + T::one() + m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_single_type, mean_matrix};
    use crate::spectral::extinction_q;

    fn model_b() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
    }

    #[test]
    fn pgf_at_corners_and_fixed_point() {
        let b = model_b();
        let one = pgf_eval(&b, &PgfPoint::ones(2)).unwrap();
        assert!(one.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert_eq!(pgf_eval(&b, &PgfPoint::zeros(2)).unwrap(), b.h0().to_vec());
        let q = pgf_eval(&b, &PgfPoint::splat(2, 0.6).unwrap()).unwrap();
        assert!(q.iter().all(|&x| (x - 0.6).abs() < 1e-15));
    }

    #[test]
    fn point_validation() {
        assert!(PgfPoint::new(vec![0.5, 1.2]).is_err());
        assert!(PgfPoint::new(vec![f64::NAN]).is_err());
        assert!(pgf_eval(&model_b(), &PgfPoint::ones(3)).is_err());
    }

    #[test]
    fn denominator_guard() {
        let bad = LFModel::new_unchecked(
            crate::matrix::SparseMatrix::from_dense(&[vec![0.5]]),
            vec![2.0],
            1.0,
        );
        assert!(matches!(
            pgf_eval(&bad, &PgfPoint::ones(1)),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn iteration() {
        let b = model_b();
        let s = PgfPoint::new(vec![0.2, 0.7]).unwrap();
        assert_eq!(pgf_iterate(&b, &s, 0).unwrap(), vec![0.2, 0.7]);
        let mut prev = 0.0;
        for n in 1..=30 {
            let x = pgf_iterate(&b, &PgfPoint::zeros(2), n).unwrap();
            assert!(x[0] >= prev && x[0] <= 0.6 + 1e-15);
            prev = x[0];
        }
        assert!((prev - 0.6).abs() < 1e-6);
    }

    #[test]
    fn iteration_matches_scalar_composition() {
        let st = embed_single_type(0.25_f64, 3.0).unwrap();
        let f = |s: f64| 0.25 + 0.75 * s / (4.0 - 3.0 * s);
        let mut x = 0.3;
        for _ in 0..7 {
            x = f(x);
        }
        let it = pgf_iterate(&st, &PgfPoint::new(vec![0.3]).unwrap(), 7).unwrap();
        assert!((it[0] - x).abs() < 1e-15);
    }

    #[test]
    fn joint_corners() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let ones = joint_pgf(&b, &s, &PgfPoint::ones(2), &PgfPoint::ones(2)).unwrap();
        assert!(ones.value.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let zeros = joint_pgf(&b, &s, &PgfPoint::zeros(2), &PgfPoint::zeros(2)).unwrap();
        assert!(zeros.value.iter().all(|&x| x.abs() < 1e-15));
        let half = PgfPoint::splat(2, 0.5).unwrap();
        let mid = joint_pgf(&b, &s, &half, &half).unwrap();
        assert!(mid.max_discrepancy().unwrap() < 1e-12);
    }

    #[test]
    fn joint_requires_supercritical() {
        let sub = embed_single_type(0.9, 0.1).unwrap();
        let s = extinction_q(&sub).unwrap();
        assert!(matches!(
            joint_pgf(&sub, &s, &PgfPoint::ones(1), &PgfPoint::ones(1)),
            Err(Error::NotSupercritical { .. })
        ));
    }

    #[test]
    fn joint_without_dual_has_no_product_route() {
        let st = embed_single_type(0.0_f64, 2.0).unwrap();
        let s = extinction_q(&st).unwrap();
        let half = PgfPoint::splat(1, 0.5).unwrap();
        let j = joint_pgf(&st, &s, &half, &half).unwrap();
        assert!(j.factorized.is_none());
        // q = 0: F(s, t) = f(s)
        assert!((j.value[0] - 0.5 / (3.0 - 2.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn mixture_corners() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        for p in [PgfPoint::ones(2), PgfPoint::zeros(2)] {
            let r = mixture_residual(&b, &s, &p).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-14));
        }
        let st = embed_single_type(0.0_f64, 2.0).unwrap();
        let sst = extinction_q(&st).unwrap();
        assert!(matches!(
            mixture_residual(&st, &sst, &PgfPoint::ones(1)),
            Err(Error::DualDegenerate(_))
        ));
    }

    #[test]
    fn finite_difference_means() {
        let b = model_b();
        let mm = mean_matrix(&b);
        let eps = 1e-6;
        let f1 = pgf_eval(&b, &PgfPoint::ones(2)).unwrap();
        for j in 0..2 {
            let mut s = vec![1.0; 2];
            s[j] -= eps;
            let fj = pgf_eval(&b, &PgfPoint::new(s).unwrap()).unwrap();
            for i in 0..2 {
                assert!(((f1[i] - fj[i]) / eps - mm[(i, j)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn total_count_distribution() {
        let st = embed_single_type(0.25_f64, 3.0).unwrap();
        let p = total_count_pmf(&st, 0, 200).unwrap();
        assert_eq!(p.pmf[0], 0.25);
        assert!((p.pmf[1] - 0.1875).abs() < 1e-15);
        assert!((p.pmf.iter().sum::<f64>() + p.tail_mass - 1.0).abs() < 1e-12);
        assert!((p.mean() - 3.0).abs() < 1e-12);
        let short = total_count_pmf(&st, 0, 3).unwrap();
        assert!((short.mean() - 3.0).abs() < 1e-12);
        assert!((short.pmf.iter().sum::<f64>() + short.tail_mass - 1.0).abs() < 1e-15);
        assert!(total_count_pmf(&st, 1, 3).is_err());
    }
}
