//! Exact samplers for one reproduction event.

use rand::Rng;
use serde::Serialize;

use super::rng::{geometric, Categorical};
use crate::error::Result;
use crate::model::LFModel;
use crate::scalar::Scalar;
use crate::transforms::SkeletonLaw;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubtypeSplit {
    pub skeleton: Vec<u64>,
    pub doomed: Vec<u64>,
}

/// Offspring counts by type, with the skeleton/doomed split when the sample
/// comes from the skeleton law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffspringSample {
    pub counts: Vec<u64>,
    pub split: Option<SubtypeSplit>,
}

impl OffspringSample {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Sampler for the law with generating function `f_i`: no offspring with
/// probability `h_i0`, otherwise a first child of type `j` with probability
/// `h_ij` and a geometric number (mean `m`) of extra children of type
/// `~ g`.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    rows: Vec<Categorical>,
    g: Categorical,
    m: f64,
}

impl OffspringSampler {
    pub fn new<T: Scalar>(model: &LFModel<T>) -> Self {
        Self {
            rows: (0..model.n_types())
                .map(|i| Categorical::new(model.h().row(i).map(|(j, v)| (j, v.to_f64_lossy()))))
                .collect(),
            g: Categorical::new(model.g().iter().map(|v| v.to_f64_lossy()).enumerate()),
            m: model.m().to_f64_lossy(),
        }
    }

    pub fn n_types(&self) -> usize {
        self.rows.len()
    }

    /// Appends the child types of one type-`i` particle.
    pub fn sample_children<R: Rng + ?Sized>(&self, i: usize, rng: &mut R, children: &mut Vec<usize>) {
        let Some(first) = self.rows[i].sample_sub(rng) else {
            return;
        };
        children.push(first);
        let extra = geometric(rng, self.m);
        for _ in 0..extra {
            children.push(self.g.sample(rng));
        }
    }

    /// Adds one type-`i` particle's offspring to `counts`; returns how many.
    pub fn add_offspring<R: Rng + ?Sized>(&self, i: usize, rng: &mut R, counts: &mut [u64]) -> u64 {
        let Some(first) = self.rows[i].sample_sub(rng) else {
            return 0;
        };
        counts[first] += 1;
        let extra = geometric(rng, self.m);
        for _ in 0..extra {
            counts[self.g.sample(rng)] += 1;
        }
        extra + 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> OffspringSample {
        let mut counts = vec![0; self.n_types()];
        self.add_offspring(i, rng, &mut counts);
        OffspringSample { counts, split: None }
    }
}

/// One draw from `f_i` for a type-`i` parent.
pub fn sample_offspring<T: Scalar, R: Rng + ?Sized>(
    model: &LFModel<T>,
    i: usize,
    rng: &mut R,
) -> Result<OffspringSample> {
    model.check_type(i)?;
    Ok(OffspringSampler::new(model).sample(i, rng))
}

/// Sampler for the joint skeleton law, drawn as three independent parts:
///
/// 1. one skeleton child of type `j ~ tilde h_i`;
/// 2. a geometric number (mean `m`) of children of type `k ~ g`, each a
///    skeleton child with probability `1 - q_k`;
/// 3. with probability `1 - h_ij0`, a doomed cluster: a first child of type
///    `k ~ hat h_i` and a geometric number (mean `hat m`) of doomed
///    children of type `~ hat g`.
#[derive(Debug, Clone)]
pub struct SkeletonSampler {
    reborn: Vec<Categorical>,
    g: Categorical,
    survive: Vec<f64>,
    m: f64,
    no_cluster: Vec<Vec<f64>>,
    doomed_first: Vec<Option<Categorical>>,
    g_hat: Categorical,
    m_hat: f64,
}

impl SkeletonSampler {
    pub fn new<T: Scalar>(law: &SkeletonLaw<T>) -> Self {
        let n = law.n_types();
        let f = |v: T| v.to_f64_lossy();
        Self {
            reborn: (0..n)
                .map(|i| Categorical::new(law.h_tilde.row(i).map(|(j, v)| (j, f(v)))))
                .collect(),
            g: Categorical::new(law.base.g().iter().map(|&v| f(v)).enumerate()),
            survive: law.q.iter().map(|&q| 1.0 - f(q)).collect(),
            m: f(law.base.m()),
            no_cluster: (0..n)
                .map(|i| (0..n).map(|j| f(law.h_ij0[(i, j)])).collect())
                .collect(),
            doomed_first: (0..n)
                .map(|i| {
                    let c = Categorical::new(law.h_hat.row(i).map(|(k, v)| (k, f(v))));
                    (c.total() > 0.0).then_some(c)
                })
                .collect(),
            g_hat: Categorical::new(law.g_hat.iter().map(|&v| f(v)).enumerate()),
            m_hat: f(law.m_hat),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> OffspringSample {
        let n = self.survive.len();
        let mut skeleton = vec![0u64; n];
        let mut doomed = vec![0u64; n];

        let j = self.reborn[i].sample(rng);
        skeleton[j] += 1;

        for _ in 0..geometric(rng, self.m) {
            let k = self.g.sample(rng);
            if rng.gen::<f64>() < self.survive[k] {
                skeleton[k] += 1;
            } else {
                doomed[k] += 1;
            }
        }

        if rng.gen::<f64>() >= self.no_cluster[i][j] {
            if let Some(first) = &self.doomed_first[i] {
                doomed[first.sample(rng)] += 1;
                for _ in 0..geometric(rng, self.m_hat) {
                    doomed[self.g_hat.sample(rng)] += 1;
                }
            }
        }

        OffspringSample {
            counts: skeleton.iter().zip(&doomed).map(|(a, b)| a + b).collect(),
            split: Some(SubtypeSplit { skeleton, doomed }),
        }
    }
}

pub fn sample_skeleton_offspring<T: Scalar, R: Rng + ?Sized>(
    law: &SkeletonLaw<T>,
    i: usize,
    rng: &mut R,
) -> Result<OffspringSample> {
    law.base.check_type(i)?;
    Ok(SkeletonSampler::new(law).sample(i, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::rng::replicate_rng;
    use crate::spectral::extinction_q;
    use crate::transforms::skeleton_law;

    fn model_b() -> LFModel<f64> {
        LFModel::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
    }

    #[test]
    fn childless_type_never_reproduces() {
        let model =
            LFModel::from_dense(&[vec![0.0, 0.0], vec![0.5, 0.5]], vec![0.5, 0.5], 1.0).unwrap();
        let mut rng = replicate_rng(3, 0);
        for _ in 0..1000 {
            assert_eq!(sample_offspring(&model, 0, &mut rng).unwrap().total(), 0);
        }
        assert!(sample_offspring(&model, 2, &mut rng).is_err());
    }

    #[test]
    fn skeleton_samples_contain_a_skeleton_child() {
        let b = model_b();
        let s = extinction_q(&b).unwrap();
        let law = skeleton_law(&b, &s).unwrap();
        let sampler = SkeletonSampler::new(&law);
        let mut rng = replicate_rng(5, 0);
        for _ in 0..10_000 {
            let x = sampler.sample(1, &mut rng);
            let split = x.split.as_ref().unwrap();
            assert!(split.skeleton.iter().sum::<u64>() >= 1);
            for t in 0..2 {
                assert_eq!(x.counts[t], split.skeleton[t] + split.doomed[t]);
            }
        }
    }

    #[test]
    fn same_stream_same_samples() {
        let b = model_b();
        let sampler = OffspringSampler::new(&b);
        let a: Vec<_> = {
            let mut rng = replicate_rng(9, 1);
            (0..100).map(|_| sampler.sample(0, &mut rng)).collect()
        };
        let mut rng = replicate_rng(9, 1);
        let c: Vec<_> = (0..100).map(|_| sampler.sample(0, &mut rng)).collect();
        assert_eq!(a, c);
    }
}
