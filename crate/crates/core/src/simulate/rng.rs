//! Seeded random streams and the primitive draws built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based stream; one per replicate.
pub type SimRng = ChaCha8Rng;

/// Stream for replicate `index` of a run. Streams are independent of the
/// order and the thread in which replicates execute.
pub fn replicate_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Number of failures before the first success, with the given mean, by
/// inverse CDF: `floor(ln U / ln(mean / (1 + mean)))`.
#[inline]
pub fn geometric<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let ln_p = (mean / (1.0 + mean)).ln();
    let u = uniform_open(rng);
    let k = (u.ln() / ln_p).floor();
    if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// Discrete law over `targets` by cumulative weights. Draws past the total
/// weight (for sub-stochastic rows) yield `None`.
#[derive(Debug, Clone)]
pub struct Categorical {
    targets: Vec<usize>,
    cum: Vec<f64>,
}

impl Categorical {
    pub fn new(weights: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut targets = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for (t, w) in weights {
            if w > 0.0 {
                acc += w;
                targets.push(t);
                cum.push(acc);
            }
        }
        Self { targets, cum }
    }

    pub fn total(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Draw with the weights taken as absolute probabilities.
    pub fn sample_sub<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let u = rng.gen::<f64>();
        self.lookup(u)
    }

    /// Draw with the weights renormalized to sum to one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.total();
        self.lookup(u)
            .or_else(|| self.targets.last().copied())
            .expect("categorical law with positive mass")
    }

    fn lookup(&self, u: f64) -> Option<usize> {
        let pos = self.cum.partition_point(|&c| c <= u);
        self.targets.get(pos).copied()
    }
}
