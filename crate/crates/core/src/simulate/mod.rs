//! Monte Carlo simulation of the process, its skeleton law and labeled
//! genealogies.

pub mod experiment;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tree;

pub use experiment::{run_replicates, run_tree_experiment, StatRow, TreeExperiment, TreeExperimentConfig};
pub use rng::{replicate_rng, SimRng};
pub use sampler::{
    sample_offspring, sample_skeleton_offspring, OffspringSample, OffspringSampler, SkeletonSampler, SubtypeSplit,
};
pub use stats::{empirical_pgf, empirical_pgf_view, CountView, Estimate, Moments, SimStats};
pub use tree::{simulate_generations, simulate_tree_labeled, GenealogyTree, Label, TreeNode, DEFAULT_POPULATION_CAP};
