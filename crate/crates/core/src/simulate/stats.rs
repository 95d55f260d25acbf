//! Running moments and empirical generating functions.

use serde::Serialize;

use super::sampler::OffspringSample;
use crate::error::{Error, Result};
use crate::genfun::PgfPoint;
use crate::scalar::Scalar;

/// Count, sum and sum of squares of a scalar observable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Sample standard deviation over `sqrt(n)`.
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Which counts of a sample an estimator looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountView {
    #[default]
    Total,
    Skeleton,
    Doomed,
}

impl CountView {
    /// Falls back to the total counts for samples without a subtype split.
    pub fn counts<'a>(&self, sample: &'a OffspringSample) -> &'a [u64] {
        match (self, &sample.split) {
            (CountView::Skeleton, Some(split)) => &split.skeleton,
            (CountView::Doomed, Some(split)) => &split.doomed,
            _ => &sample.counts,
        }
    }
}

pub(crate) fn power_product(s: &[f64], counts: &[u64]) -> f64 {
    s.iter()
        .zip(counts)
        .map(|(&x, &c)| if c == 0 { 1.0 } else { x.powi(c.min(i32::MAX as u64) as i32) })
        .product()
}

/// Mean of `s^counts` with its standard error.
pub fn empirical_pgf<T: Scalar>(samples: &[OffspringSample], s: &PgfPoint<T>) -> Result<(f64, f64)> {
    empirical_pgf_view(samples, s, CountView::Total)
}

pub fn empirical_pgf_view<T: Scalar>(
    samples: &[OffspringSample],
    s: &PgfPoint<T>,
    view: CountView,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let s: Vec<f64> = s.as_slice().iter().map(|x| x.to_f64_lossy()).collect();
    let m: Moments = samples.iter().map(|x| power_product(&s, view.counts(x))).collect();
    Ok((m.mean(), m.std_err()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl From<&Moments> for Estimate {
    fn from(m: &Moments) -> Self {
        Self {
            estimate: m.mean(),
            std_error: m.std_err(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub n_samples: u64,
    pub means: Vec<Estimate>,
    pub pgf: Vec<Estimate>,
}

impl SimStats {
    pub fn from_samples<T: Scalar>(
        samples: &[OffspringSample],
        probes: &[PgfPoint<T>],
        view: CountView,
    ) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptySamples)?;
        let n_types = first.counts.len();
        let means = (0..n_types)
            .map(|j| {
                let m: Moments = samples.iter().map(|x| view.counts(x)[j] as f64).collect();
                Estimate::from(&m)
            })
            .collect();
        let pgf = probes
            .iter()
            .map(|p| {
                empirical_pgf_view(samples, p, view).map(|(estimate, std_error)| Estimate {
                    estimate,
                    std_error,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n_samples: samples.len() as u64,
            means,
            pgf,
        })
    }
}
