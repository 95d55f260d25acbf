//! Closed forms for the single-type law `f(s) = h0 + h1 s / (1 + m - m s)`.
//!
//! Used on its own for quick analysis, and as an independent reference for
//! the one-type case of the multitype pipeline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::Criticality;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct STParams<T> {
    h0: T,
    m: T,
}

impl<T: Scalar> STParams<T> {
    pub fn new(h0: T, m: T) -> Result<Self> {
        if !(h0 >= T::zero() && h0 < T::one()) {
            return Err(Error::Domain(format!("h0 = {h0} must lie in [0, 1)")));
        }
        if !(m > T::zero()) {
            return Err(Error::Domain(format!("m = {m} must be positive")));
        }
        Ok(Self { h0, m })
    }

    pub fn h0(&self) -> T {
        self.h0
    }

    pub fn h1(&self) -> T {
        T::one() - self.h0
    }

    pub fn m(&self) -> T {
        self.m
    }

    /// Offspring mean `h1 (1 + m)`.
    pub fn mean(&self) -> T {
        self.h1() * (T::one() + self.m)
    }

    pub fn class(&self) -> Criticality {
        let band = T::lit(1e-12_f64.max(T::STOCHASTIC_TOL));
        let mean = self.mean();
        if mean > T::one() + band {
            Criticality::Supercritical
        } else if mean < T::one() - band {
            Criticality::Subcritical
        } else {
            Criticality::Critical
        }
    }

    pub fn pgf(&self, s: T) -> T {
        self.h0 + self.h1() * s / (T::one() + self.m - self.m * s)
    }

    fn q(&self) -> T {
        (T::one() + self.m - self.mean()) / self.m
    }

    fn require_supercritical(&self) -> Result<()> {
        match self.class() {
            Criticality::Supercritical => Ok(()),
            class => Err(Error::NotSupercritical { class }),
        }
    }
}

/// Means and parameters of the skeleton/doomed decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct STDecomposition<T> {
    pub m_hat: T,
    pub h0_hat: T,
    pub mean_hat: T,
    pub m_tilde: T,
    pub mean_bar: T,
    pub alpha: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct STReport<T> {
    pub mean: T,
    pub q: T,
    pub class: Criticality,
    /// Present only for supercritical laws.
    pub decomposition: Option<STDecomposition<T>>,
}

pub fn st_analyze<T: Scalar>(p: &STParams<T>) -> STReport<T> {
    let mean = p.mean();
    let class = p.class();
    if class != Criticality::Supercritical {
        return STReport {
            mean,
            q: T::one(),
            class,
            decomposition: None,
        };
    }
    let (h0, m) = (p.h0(), p.m());
    let q = p.q();
    let m_hat = h0 / p.h1();
    STReport {
        mean,
        q,
        class,
        decomposition: Some(STDecomposition {
            m_hat,
            h0_hat: m / (m + T::one()),
            mean_hat: mean.recip(),
            m_tilde: mean - T::one(),
            mean_bar: T::one() + m + m_hat,
            alpha: (mean - T::one()) * (q - h0) / (T::one() - q),
        }),
    }
}

/// Dual law `f(sq)/q`.
pub fn st_dual_pgf<T: Scalar>(p: &STParams<T>, s: T) -> Result<T> {
    p.require_supercritical()?;
    let q = p.q();
    if q <= T::zero() {
        return Err(Error::DualDegenerate("q = 0".into()));
    }
    Ok(p.pgf(s * q) / q)
}

/// Skeleton law `s / (1 + tilde m - tilde m s)`.
pub fn st_hs_pgf<T: Scalar>(p: &STParams<T>, s: T) -> Result<T> {
    p.require_supercritical()?;
    let mt = p.mean() - T::one();
    Ok(s / (T::one() + mt - mt * s))
}

/// `F(s, t)` in product form: one skeleton child, a geometric cluster of
/// mixed subtypes, and a geometric doomed cluster.
pub fn st_joint_f<T: Scalar>(p: &STParams<T>, s: T, t: T) -> Result<T> {
    p.require_supercritical()?;
    let m = p.m();
    let mt = p.mean() - T::one();
    let mh = p.h0() / p.h1();
    Ok(s / (T::one() + m - mt * s - (m - mt) * t) / (T::one() + mh - mh * t))
}

/// `F(s, t) = (f(s(1-q) + tq) - f(tq)) / (1 - q)`.
pub fn st_joint_f_defining<T: Scalar>(p: &STParams<T>, s: T, t: T) -> Result<T> {
    p.require_supercritical()?;
    let q = p.q();
    Ok((p.pgf(s * (T::one() - q) + t * q) - p.pgf(t * q)) / (T::one() - q))
}

/// Total offspring law of a skeleton particle, `F(s, s)`.
pub fn st_fbar<T: Scalar>(p: &STParams<T>, s: T) -> Result<T> {
    st_joint_f(p, s, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(h0: f64, m: f64) -> STParams<f64> {
        STParams::new(h0, m).unwrap()
    }

    /// Minimal fixed point of f by iteration from zero.
    fn fixed_point(par: &STParams<f64>) -> f64 {
        let mut x = 0.0;
        for _ in 0..10_000 {
            x = par.pgf(x);
        }
        x
    }

    fn fd_mean(f: impl Fn(f64) -> f64) -> f64 {
        let eps = 1e-7;
        (f(1.0) - f(1.0 - eps)) / eps
    }

    #[test]
    fn reference_law() {
        let par = p(0.25, 3.0);
        let r = st_analyze(&par);
        let d = r.decomposition.unwrap();
        assert!((r.mean - 3.0).abs() < 1e-15);
        assert!((r.q - 1.0 / 3.0).abs() < 1e-15);
        assert!((fixed_point(&par) - r.q).abs() < 1e-12);
        assert!((fd_mean(|s| par.pgf(s)) - 3.0).abs() < 1e-5);
        assert!((d.m_hat - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.h0_hat - 0.75).abs() < 1e-15);
        assert!((d.mean_hat - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.m_tilde - 2.0).abs() < 1e-15);
        assert!((d.mean_bar - 13.0 / 3.0).abs() < 1e-14);
        assert!((d.alpha - 0.25).abs() < 1e-15);
        // the two expressions for the skeleton total mean coincide
        assert!((d.mean_bar - (r.mean + (r.mean + 1.0) * d.m_hat)).abs() < 1e-14);
    }

    #[test]
    fn no_deaths() {
        let r = st_analyze(&p(0.0, 2.5));
        let d = r.decomposition.unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(d.m_tilde, 2.5);
        assert_eq!(d.m_hat, 0.0);
        assert_eq!(d.mean_bar, 3.5);
    }

    #[test]
    fn critical_and_subcritical() {
        let r = st_analyze(&p(0.5, 1.0));
        assert_eq!(r.class, Criticality::Critical);
        assert_eq!(r.q, 1.0);
        assert!(r.decomposition.is_none());
        assert_eq!(st_analyze(&p(0.9, 0.1)).class, Criticality::Subcritical);
        assert!(matches!(
            st_joint_f(&p(0.5, 1.0), 0.5, 0.5),
            Err(Error::NotSupercritical { .. })
        ));
    }

    #[test]
    fn params_domain() {
        assert!(STParams::new(1.0, 2.0).is_err());
        assert!(STParams::new(-0.1, 2.0).is_err());
        assert!(STParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn joint_routes_agree() {
        let par = p(0.25, 3.0);
        assert!((st_joint_f(&par, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(st_joint_f(&par, 0.0, 0.0).unwrap(), 0.0);
        for &(s, t) in &[(0.5, 0.5), (0.1, 0.9), (0.9, 0.1), (0.0, 0.7)] {
            let a = st_joint_f(&par, s, t).unwrap();
            let b = st_joint_f_defining(&par, s, t).unwrap();
            assert!((a - b).abs() < 1e-12, "{s} {t}: {a} vs {b}");
        }
    }

    #[test]
    fn fbar() {
        let par = p(0.25, 3.0);
        assert!((st_fbar(&par, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(st_fbar(&par, 0.0).unwrap(), 0.0);
        assert!((fd_mean(|s| st_fbar(&par, s).unwrap()) - 13.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn transformed_means() {
        let par = p(0.25, 3.0);
        assert!((fd_mean(|s| st_hs_pgf(&par, s).unwrap()) - 3.0).abs() < 1e-5);
        assert!((fd_mean(|s| st_dual_pgf(&par, s).unwrap()) - 1.0 / 3.0).abs() < 1e-5);
        // dual is again linear-fractional with hat h0 = m/(m+1), hat m = h0/h1
        let d = st_analyze(&par).decomposition.unwrap();
        let dual = STParams::new(d.h0_hat, d.m_hat).unwrap();
        for s in [0.0, 0.3, 0.8] {
            assert!((dual.pgf(s) - st_dual_pgf(&par, s).unwrap()).abs() < 1e-15);
        }
    }
}
