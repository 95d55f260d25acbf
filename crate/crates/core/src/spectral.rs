//! Perron root, eigenvectors and extinction probabilities of a
//! linear-fractional process.
//!
//! Everything is expressed through the weights `a_k = g H^k 1^t`. The
//! Perron root `rho` of the mean matrix solves
//! `phi(rho) = m sum_{k>=1} rho^-k a_k = 1`, and `phi` is strictly
//! decreasing, so the root is bracketed and found without an eigensolver.
//! All series are evaluated with iterated vector-matrix products.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::genfun;
use crate::matrix::SparseMatrix;
use crate::model::LFModel;
use crate::scalar::{max_abs_diff, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        })
    }
}

/// Truncation policy shared by every series in the crate.
#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions<T> {
    /// A series stops at the first non-increasing term below `eps`.
    pub eps: T,
    pub k_max: usize,
}

impl<T: Scalar> Default for SeriesOptions<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(T::SERIES_EPS),
            k_max: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions<T> {
    pub series: SeriesOptions<T>,
    /// Target for `|phi(rho) - 1|`.
    pub root_tol: T,
    /// Allowed disagreement between the closed-form `q` and fixed-point
    /// iteration.
    pub fixed_point_tol: T,
    pub fixed_point_max_iter: usize,
}

impl<T: Scalar> Default for SpectralOptions<T> {
    fn default() -> Self {
        Self {
            series: SeriesOptions::default(),
            root_tol: T::lit(T::ROOT_TOL),
            fixed_point_tol: T::lit(1e-8_f64.max(T::STOCHASTIC_TOL * 10.0)),
            fixed_point_max_iter: 1_000_000,
        }
    }
}

/// `mu = m sum_{n>=1} g H^n 1^t`, which is infinite when the weights do not
/// decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Mu<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Mu::Finite(x) => Some(x),
            Mu::Infinite => None,
        }
    }
}

impl<T: Scalar> Serialize for Mu<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mu::Finite(x) => s.serialize_f64(x.to_f64_lossy()),
            Mu::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary<T> {
    pub rho: T,
    pub beta: T,
    pub mu: Mu<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub q: Vec<T>,
    pub class: Criticality,
    /// Deepest series truncation used while assembling the summary.
    pub k_used: usize,
    /// `rho` sits on the boundary `1 + m`, where every `q_i` vanishes and
    /// the dual law is undefined.
    pub boundary: bool,
}

impl<T: Scalar> SpectralSummary<T> {
    pub fn is_supercritical(&self) -> bool {
        self.class == Criticality::Supercritical
    }
}

/// Repeated products `rho^-k g H^k` (left) or `rho^-k H^k 1^t` (right).
struct ScaledPowers<'a, T> {
    h: &'a SparseMatrix<T>,
    inv_rho: T,
    cur: Vec<T>,
    buf: Vec<T>,
    left: bool,
}

impl<'a, T: Scalar> ScaledPowers<'a, T> {
    fn left(h: &'a SparseMatrix<T>, start: &[T], rho: T) -> Self {
        Self::new(h, start, rho, true)
    }

    fn right(h: &'a SparseMatrix<T>, start: &[T], rho: T) -> Self {
        Self::new(h, start, rho, false)
    }

    fn new(h: &'a SparseMatrix<T>, start: &[T], rho: T, left: bool) -> Self {
        Self {
            h,
            inv_rho: rho.recip(),
            cur: start.to_vec(),
            buf: vec![T::zero(); start.len()],
            left,
        }
    }

    fn current(&self) -> &[T] {
        &self.cur
    }

    fn advance(&mut self) -> &[T] {
        if self.left {
            self.h.left_mul_into(&self.cur, &mut self.buf);
        } else {
            self.h.right_mul_into(&self.cur, &mut self.buf);
        }
        let s = self.inv_rho;
        for (c, &b) in self.cur.iter_mut().zip(&self.buf) {
            *c = b * s;
        }
        &self.cur
    }
}

/// Tracks the cutoff rule: stop at the first term that is below `eps` and
/// not larger than its predecessor.
struct Cutoff<T> {
    eps: T,
    prev: T,
}

impl<T: Scalar> Cutoff<T> {
    fn new(eps: T) -> Self {
        Self {
            eps,
            prev: T::infinity(),
        }
    }

    fn done(&mut self, term: T) -> bool {
        let stop = term < self.eps && term <= self.prev;
        self.prev = term;
        stop
    }
}

fn sum<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum()
}

fn max_norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWeights<T> {
    /// `a_1, ..., a_K`.
    pub weights: Vec<T>,
    /// The cutoff `K`.
    pub cutoff: usize,
}

/// Weights `a_k = g H^k 1^t` up to the first `K` with `m rho^-K a_K < eps`.
pub fn series_weights<T: Scalar>(
    model: &LFModel<T>,
    rho: T,
    opts: &SeriesOptions<T>,
) -> Result<SeriesWeights<T>> {
    let mut raw = ScaledPowers::left(model.h(), model.g(), T::one());
    let mut cutoff = Cutoff::new(opts.eps);
    let mut weights = Vec::new();
    let inv = rho.recip();
    let mut scale = T::one();
    for k in 1..=opts.k_max {
        let a = sum(raw.advance());
        weights.push(a);
        scale = scale * inv;
        if cutoff.done(model.m() * scale * a) {
            return Ok(SeriesWeights { weights, cutoff: k });
        }
    }
    Err(Error::NotConverged {
        what: "series weights",
        iterations: opts.k_max,
    })
}

/// Partial evaluation of `phi`: `None` once the partial sum exceeds `cap`,
/// which certifies `phi(rho) > cap` because all terms are non-negative.
fn phi_capped<T: Scalar>(
    model: &LFModel<T>,
    rho: T,
    opts: &SeriesOptions<T>,
    cap: T,
) -> Result<(Option<T>, usize)> {
    let mut pw = ScaledPowers::left(model.h(), model.g(), rho);
    let mut cutoff = Cutoff::new(opts.eps);
    let mut acc = T::zero();
    for k in 1..=opts.k_max {
        let term = model.m() * sum(pw.advance());
        acc = acc + term;
        if acc > cap {
            return Ok((None, k));
        }
        if cutoff.done(term) {
            return Ok((Some(acc), k));
        }
    }
    Err(Error::NotConverged {
        what: "phi series",
        iterations: opts.k_max,
    })
}

/// `phi(rho) = m sum_{k>=1} rho^-k g H^k 1^t`.
pub fn phi<T: Scalar>(model: &LFModel<T>, rho: T, opts: &SeriesOptions<T>) -> Result<T> {
    let (v, _) = phi_capped(model, rho, opts, T::infinity())?;
    Ok(v.expect("uncapped series"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuEstimate<T> {
    pub mu: Mu<T>,
    pub k_used: usize,
    /// False when `k_max` was reached with a finite partial sum.
    pub converged: bool,
}

const STALL_WINDOW: usize = 64;

/// Evaluates `mu`. Non-summable weights are reported as [`Mu::Infinite`]
/// once the partial sum exceeds one and the weights have stopped decaying
/// over a window of terms, or when `k_max` is reached past one.
pub fn compute_mu_detailed<T: Scalar>(model: &LFModel<T>, opts: &SeriesOptions<T>) -> MuEstimate<T> {
    let mut pw = ScaledPowers::left(model.h(), model.g(), T::one());
    let mut cutoff = Cutoff::new(opts.eps);
    let mut acc = T::zero();
    let mut prev_a = T::one();
    let mut stalled = 0usize;
    let stall_ratio = T::one() - T::lit(T::STOCHASTIC_TOL);
    for k in 1..=opts.k_max {
        let a = sum(pw.advance());
        let term = model.m() * a;
        acc = acc + term;
        if cutoff.done(term) {
            return MuEstimate {
                mu: Mu::Finite(acc),
                k_used: k,
                converged: true,
            };
        }
        if a >= prev_a * stall_ratio && a > T::zero() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev_a = a;
        if acc > T::one() && stalled >= STALL_WINDOW {
            return MuEstimate {
                mu: Mu::Infinite,
                k_used: k,
                converged: false,
            };
        }
    }
    MuEstimate {
        mu: if acc > T::one() { Mu::Infinite } else { Mu::Finite(acc) },
        k_used: opts.k_max,
        converged: false,
    }
}

pub fn compute_mu<T: Scalar>(model: &LFModel<T>) -> Mu<T> {
    compute_mu_detailed(model, &SeriesOptions::default()).mu
}

const CRITICAL_BAND: f64 = 1e-12;

/// Classifies by `mu`: supercritical iff `mu > 1`. The series is abandoned as
/// soon as its partial sum proves supercriticality.
pub fn classify<T: Scalar>(model: &LFModel<T>) -> Criticality {
    classify_with(model, &SeriesOptions::default())
}

pub fn classify_with<T: Scalar>(model: &LFModel<T>, opts: &SeriesOptions<T>) -> Criticality {
    let band = T::lit(CRITICAL_BAND.max(T::STOCHASTIC_TOL));
    match phi_capped(model, T::one(), opts, T::one() + band) {
        Ok((None, _)) => Criticality::Supercritical,
        _ => match compute_mu_detailed(model, opts).mu {
            Mu::Infinite => Criticality::Supercritical,
            Mu::Finite(mu) if mu > T::one() + band => Criticality::Supercritical,
            Mu::Finite(mu) if mu < T::one() - band => Criticality::Subcritical,
            Mu::Finite(_) => Criticality::Critical,
        },
    }
}

const ROOT_BUDGET: usize = 200;

/// Bisection until the bracket is narrow, then secant steps safeguarded by
/// the bracket. `eval` returns `None` for values known to be above the cap
/// (treated as positive). `flo > 0 > fhi` on entry.
fn bracketed_root<T: Scalar>(
    mut eval: impl FnMut(T) -> Result<Option<T>>,
    mut lo: T,
    mut flo: Option<T>,
    mut hi: T,
    mut fhi: T,
    tol: T,
) -> Result<T> {
    let switch_width = (hi - lo) * T::lit(1e-3);
    let two = T::lit(2.0);
    let mut last: Option<(T, T)> = None;
    let mut before: Option<(T, T)> = None;
    for _ in 0..ROOT_BUDGET {
        let mid = (lo + hi) / two;
        let x = match (flo, before, last) {
            (Some(_), Some((a, fa)), Some((b, fb))) if hi - lo < switch_width && fa != fb => {
                let cand = b - fb * (b - a) / (fb - fa);
                if cand > lo && cand < hi && cand.is_finite() {
                    cand
                } else {
                    mid
                }
            }
            _ => mid,
        };
        let fx = eval(x)?;
        match fx {
            None => {
                lo = x;
                flo = None;
            }
            Some(v) => {
                if v.abs() < tol {
                    return Ok(x);
                }
                if v > T::zero() {
                    lo = x;
                    flo = Some(v);
                } else {
                    hi = x;
                    fhi = v;
                }
                before = last;
                last = Some((x, v));
            }
        }
        if hi - lo <= T::epsilon() * hi * T::lit(4.0) {
            return Ok(match flo {
                Some(fl) if fl.abs() < fhi.abs() => lo,
                _ => hi,
            });
        }
    }
    Err(Error::NotConverged {
        what: "Perron root",
        iterations: ROOT_BUDGET,
    })
}

const BRACKET_DELTA: f64 = 1e-9;

/// Perron root of a supercritical process, located in `(1, 1 + m]`.
pub fn solve_rho<T: Scalar>(model: &LFModel<T>, tol: T) -> Result<T> {
    solve_rho_with(model, tol, &SeriesOptions::default())
}

pub fn solve_rho_with<T: Scalar>(model: &LFModel<T>, tol: T, opts: &SeriesOptions<T>) -> Result<T> {
    let class = classify_with(model, opts);
    if class != Criticality::Supercritical {
        return Err(Error::NotSupercritical { class });
    }
    let cap = T::lit(2.0);
    let f = |r: T| -> Result<Option<T>> {
        Ok(phi_capped(model, r, opts, cap)?.0.map(|p| p - T::one()))
    };
    let hi = T::one() + model.m();
    let fhi = f(hi)?.expect("phi(1+m) <= 1");
    if fhi.abs() < tol || fhi > T::zero() {
        return Ok(hi);
    }
    let lo = T::one() + T::lit(BRACKET_DELTA);
    let flo = f(lo)?;
    match flo {
        Some(v) if v.abs() < tol || v < T::zero() => Ok(lo),
        _ => bracketed_root(f, lo, flo, hi, fhi, tol),
    }
}

/// Perron root for any criticality class. Non-supercritical roots lie in
/// `(0, 1]` and are bracketed by halving downwards from one.
pub fn perron_root<T: Scalar>(model: &LFModel<T>, tol: T, opts: &SeriesOptions<T>) -> Result<T> {
    match classify_with(model, opts) {
        Criticality::Supercritical => solve_rho_with(model, tol, opts),
        _ => {
            let cap = T::lit(2.0);
            let f = |r: T| -> Result<Option<T>> {
                Ok(phi_capped(model, r, opts, cap)?.0.map(|p| p - T::one()))
            };
            let mut hi = T::one();
            let mut fhi = f(hi)?.expect("mu <= 1");
            if fhi.abs() < tol {
                return Ok(hi);
            }
            let half = T::lit(0.5);
            let floor = T::lit(1e-12);
            let mut lo = half;
            loop {
                match f(lo)? {
                    Some(v) if v.abs() < tol => return Ok(lo),
                    Some(v) if v < T::zero() => {
                        hi = lo;
                        fhi = v;
                        lo = lo * half;
                        if lo < floor {
                            return Err(Error::Domain(
                                "phi stays below one: the mean matrix has no Perron root".into(),
                            ));
                        }
                    }
                    flo => return bracketed_root(f, lo, flo, hi, fhi, tol),
                }
            }
        }
    }
}

/// `beta = m sum_{k>=1} k rho^-k a_k`.
pub fn compute_beta<T: Scalar>(model: &LFModel<T>, rho: T) -> Result<T> {
    compute_beta_with(model, rho, &SeriesOptions::default()).map(|(b, _)| b)
}

pub fn compute_beta_with<T: Scalar>(
    model: &LFModel<T>,
    rho: T,
    opts: &SeriesOptions<T>,
) -> Result<(T, usize)> {
    let mut pw = ScaledPowers::left(model.h(), model.g(), rho);
    let mut cutoff = Cutoff::new(opts.eps);
    let mut acc = T::zero();
    for k in 1..=opts.k_max {
        let term = model.m() * T::lit(k as f64) * sum(pw.advance());
        acc = acc + term;
        if cutoff.done(term) {
            return Ok((acc, k));
        }
    }
    Err(Error::NotConverged {
        what: "beta series",
        iterations: opts.k_max,
    })
}

/// Right eigenvector `u = (1+m) beta^-1 sum_{k>=1} rho^-k H^k 1^t`.
pub fn eigen_u<T: Scalar>(model: &LFModel<T>, rho: T, beta: T) -> Result<Vec<T>> {
    eigen_u_with(model, rho, beta, &SeriesOptions::default()).map(|(u, _)| u)
}

pub fn eigen_u_with<T: Scalar>(
    model: &LFModel<T>,
    rho: T,
    beta: T,
    opts: &SeriesOptions<T>,
) -> Result<(Vec<T>, usize)> {
    let n = model.n_types();
    let (s, k) = right_series(model.h(), &vec![T::one(); n], rho, opts, "u series")?;
    let c = (T::one() + model.m()) / beta;
    Ok((s.into_iter().map(|x| x * c).collect(), k))
}

/// `sum_{k>=1} rho^-k H^k x^t`.
pub(crate) fn right_series<T: Scalar>(
    h: &SparseMatrix<T>,
    x: &[T],
    rho: T,
    opts: &SeriesOptions<T>,
    what: &'static str,
) -> Result<(Vec<T>, usize)> {
    let mut pw = ScaledPowers::right(h, x, rho);
    let mut cutoff = Cutoff::new(opts.eps);
    let mut acc = vec![T::zero(); x.len()];
    for k in 1..=opts.k_max {
        let term = pw.advance();
        for (a, &t) in acc.iter_mut().zip(term) {
            *a = *a + t;
        }
        if cutoff.done(max_norm(term)) {
            return Ok((acc, k));
        }
    }
    Err(Error::NotConverged {
        what,
        iterations: opts.k_max,
    })
}

/// `sum_{k>=0} rho^-k x H^k`.
pub(crate) fn left_series<T: Scalar>(
    h: &SparseMatrix<T>,
    x: &[T],
    rho: T,
    opts: &SeriesOptions<T>,
    what: &'static str,
) -> Result<(Vec<T>, usize)> {
    let mut pw = ScaledPowers::left(h, x, rho);
    let mut cutoff = Cutoff::new(opts.eps);
    let mut acc = pw.current().to_vec();
    for k in 1..=opts.k_max {
        let term = pw.advance();
        for (a, &t) in acc.iter_mut().zip(term) {
            *a = *a + t;
        }
        if cutoff.done(max_norm(term)) {
            return Ok((acc, k));
        }
    }
    Err(Error::NotConverged {
        what,
        iterations: opts.k_max,
    })
}

/// Left eigenvector `v = m/(1+m) sum_{k>=0} rho^-k g H^k`.
pub fn eigen_v<T: Scalar>(model: &LFModel<T>, rho: T) -> Result<Vec<T>> {
    eigen_v_with(model, rho, &SeriesOptions::default()).map(|(v, _)| v)
}

pub fn eigen_v_with<T: Scalar>(
    model: &LFModel<T>,
    rho: T,
    opts: &SeriesOptions<T>,
) -> Result<(Vec<T>, usize)> {
    let (s, k) = left_series(model.h(), model.g(), rho, opts, "v series")?;
    let c = model.m() / (T::one() + model.m());
    Ok((s.into_iter().map(|x| x * c).collect(), k))
}

/// Minimal fixed point of the generating function by iterating from zero.
///
/// Iterates converge geometrically at rate `1/rho`, so the remaining error
/// is estimated as `increment / (rho - 1)`.
pub fn fixed_point_q<T: Scalar>(model: &LFModel<T>, rho: T, max_iter: usize) -> Result<Vec<T>> {
    let n = model.n_types();
    let mut x = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let gap = (rho - T::one()).max(T::lit(1e-6));
    let target = T::lit(T::SERIES_EPS * 100.0);
    for _ in 0..max_iter {
        genfun::eval_into(model, &x, &mut next)?;
        let inc = max_abs_diff(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if inc / gap < target {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "extinction fixed point",
        iterations: max_iter,
    })
}

/// Full spectral summary with default options.
pub fn extinction_q<T: Scalar>(model: &LFModel<T>) -> Result<SpectralSummary<T>> {
    spectral_summary(model, &SpectralOptions::default())
}

/// Assembles the spectral summary. For a supercritical process
/// `q = 1 - (rho - 1)(1 + m)^-1 beta u` and the result is checked against
/// fixed-point iteration; otherwise `q = 1`.
pub fn spectral_summary<T: Scalar>(
    model: &LFModel<T>,
    opts: &SpectralOptions<T>,
) -> Result<SpectralSummary<T>> {
    let n = model.n_types();
    let so = &opts.series;
    let class = classify_with(model, so);
    let mu_est = compute_mu_detailed(model, so);
    let rho = perron_root(model, opts.root_tol, so)?;
    let (beta, kb) = compute_beta_with(model, rho, so)?;
    let (u, ku) = eigen_u_with(model, rho, beta, so)?;
    let (v, kv) = eigen_v_with(model, rho, so)?;
    let k_used = mu_est.k_used.max(kb).max(ku).max(kv);
    let boundary = (T::one() + model.m() - rho).abs() <= T::lit(CRITICAL_BAND.max(T::STOCHASTIC_TOL));

    let q = if class == Criticality::Supercritical {
        let c = (rho - T::one()) / (T::one() + model.m()) * beta;
        let q: Vec<T> = u
            .iter()
            .map(|&ui| (T::one() - c * ui).max(T::zero()).min(T::one()))
            .collect();
        let fp = fixed_point_q(model, rho, opts.fixed_point_max_iter)?;
        let diff = max_abs_diff(&q, &fp);
        if !(diff <= opts.fixed_point_tol) {
            return Err(Error::FixedPointMismatch {
                max_diff: diff.to_f64_lossy(),
            });
        }
        q
    } else {
        vec![T::one(); n]
    };

    Ok(SpectralSummary {
        rho,
        beta,
        mu: mu_est.mu,
        u,
        v,
        q,
        class,
        k_used,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_single_type, mean_matrix};

    fn model_b() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
    }

    fn stochastic() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.5, 0.5], vec![0.1, 0.9]], vec![0.3, 0.7], 1.5).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn weights_follow_row_sums() {
        let w = series_weights(&model_b(), 1.8, &SeriesOptions::default()).unwrap();
        for (k, a) in w.weights.iter().enumerate() {
            assert!(close(*a, 0.6_f64.powi(k as i32 + 1), 1e-15));
        }
        assert_eq!(w.cutoff, w.weights.len());
        let st = embed_single_type(0.25, 3.0).unwrap();
        let w = series_weights(&st, 3.0, &SeriesOptions::default()).unwrap();
        assert!(w.weights.iter().enumerate().all(|(k, a)| close(*a, 0.75_f64.powi(k as i32 + 1), 1e-15)));

        let zero = LFModel::new(SparseMatrix::zeros(2), vec![0.5, 0.5], 2.0).unwrap();
        let w = series_weights(&zero, 2.0, &SeriesOptions::default()).unwrap();
        assert_eq!(w.weights, vec![0.0]);
        assert_eq!(w.cutoff, 1);
    }

    #[test]
    fn weights_fail_when_k_max_exhausted() {
        let opts = SeriesOptions { eps: 1e-15, k_max: 5 };
        assert!(matches!(
            series_weights(&model_b(), 1.8, &opts),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn phi_closed_forms() {
        let o = SeriesOptions::default();
        assert!(close(phi(&model_b(), 1.8, &o).unwrap(), 1.0, 1e-14));
        assert!(close(phi(&model_b(), 3.0, &o).unwrap(), 0.5, 1e-14));
        let st = embed_single_type(0.25, 3.0).unwrap();
        assert!(close(phi(&st, 3.0, &o).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn mu_values() {
        assert!(close(compute_mu(&model_b()).finite().unwrap(), 3.0, 1e-13));
        let st = embed_single_type(0.25, 3.0).unwrap();
        assert!(close(compute_mu(&st).finite().unwrap(), 9.0, 1e-12));
        assert_eq!(compute_mu(&stochastic()), Mu::Infinite);
    }

    #[test]
    fn rho_values() {
        assert!(close(solve_rho(&model_b(), 1e-14).unwrap(), 1.8, 1e-12));
        let st = embed_single_type(0.25, 3.0).unwrap();
        assert!(close(solve_rho(&st, 1e-14).unwrap(), 3.0, 1e-12));
        assert!(close(solve_rho(&stochastic(), 1e-14).unwrap(), 2.5, 1e-12));

        let critical = embed_single_type(0.5, 1.0).unwrap();
        assert!(matches!(
            solve_rho(&critical, 1e-14),
            Err(Error::NotSupercritical { class: Criticality::Critical })
        ));
    }

    #[test]
    fn subcritical_perron_root() {
        // single type (0.9, 0.1): M = 0.1 * 1.1 = 0.11
        let sub = embed_single_type(0.9, 0.1).unwrap();
        let r = perron_root(&sub, 1e-14, &SeriesOptions::default()).unwrap();
        assert!(close(r, 0.11, 1e-12));
    }

    #[test]
    fn beta_values() {
        assert!(close(compute_beta(&model_b(), 1.8).unwrap(), 1.5, 1e-13));
        let st = embed_single_type(0.25, 3.0).unwrap();
        assert!(close(compute_beta(&st, 3.0).unwrap(), 4.0 / 3.0, 1e-13));
        assert!(close(compute_beta(&stochastic(), 2.5).unwrap(), 2.5 / 1.5, 1e-13));
    }

    #[test]
    fn eigenvectors_model_b() {
        let b = model_b();
        let u = eigen_u(&b, 1.8, 1.5).unwrap();
        assert!(u.iter().all(|&x| close(x, 1.0, 1e-13)));
        let v = eigen_v(&b, 1.8).unwrap();
        assert!(close(v.iter().sum::<f64>(), 1.0, 1e-13));
        let vm = mean_matrix(&b).vec_mul(&v);
        for (a, b) in vm.iter().zip(&v) {
            assert!(close(*a, 1.8 * b, 1e-12));
        }
        let st = embed_single_type(0.25, 3.0).unwrap();
        assert!(close(eigen_u(&st, 3.0, 4.0 / 3.0).unwrap()[0], 1.0, 1e-13));
        assert!(close(eigen_v(&st, 3.0).unwrap()[0], 1.0, 1e-13));
    }

    #[test]
    fn summaries() {
        let s = extinction_q(&model_b()).unwrap();
        assert_eq!(s.class, Criticality::Supercritical);
        assert!(s.q.iter().all(|&q| close(q, 0.6, 1e-12)));
        assert!(!s.boundary);

        let st = extinction_q(&embed_single_type(0.25, 3.0).unwrap()).unwrap();
        assert!(close(st.q[0], 1.0 / 3.0, 1e-12));

        let no_death = extinction_q(&embed_single_type(0.0_f64, 2.0).unwrap()).unwrap();
        assert!(no_death.q[0].abs() < 1e-12);
        assert!(no_death.boundary);

        let s = extinction_q(&stochastic()).unwrap();
        assert!(s.q.iter().all(|&q| q.abs() < 1e-12));
        assert!(s.boundary);
        assert_eq!(s.mu, Mu::Infinite);
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&model_b()), Criticality::Supercritical);
        assert_eq!(classify(&embed_single_type(0.5, 1.0).unwrap()), Criticality::Critical);
        assert_eq!(classify(&embed_single_type(0.9, 0.1).unwrap()), Criticality::Subcritical);
        assert_eq!(classify(&stochastic()), Criticality::Supercritical);
    }

    #[test]
    fn subcritical_summary_has_unit_q() {
        let s = extinction_q(&embed_single_type(0.9, 0.1).unwrap()).unwrap();
        assert_eq!(s.class, Criticality::Subcritical);
        assert_eq!(s.q, vec![1.0]);
        let c = extinction_q(&embed_single_type(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(c.class, Criticality::Critical);
        assert!(close(c.rho, 1.0, 1e-12));
    }

    #[test]
    fn f32_pipeline() {
        let b: LFModel<f32> = model_b().cast();
        let s = extinction_q(&b).unwrap();
        assert!((s.rho - 1.8).abs() < 1e-5);
        assert!(s.q.iter().all(|&q| (q - 0.6).abs() < 1e-4));
    }
}
