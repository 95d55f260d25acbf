use thiserror::Error;

use crate::model::ValidationReport;
use crate::spectral::Criticality;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("model validation failed: {0}")]
    Validation(ValidationReport),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged {
        what: &'static str,
        iterations: usize,
    },

    #[error("process is {class}, a supercritical process is required")]
    NotSupercritical { class: Criticality },

    #[error("extinction probabilities disagree with fixed-point iteration by {max_diff:e}")]
    FixedPointMismatch { max_diff: f64 },

    #[error("dual law is degenerate: {0}")]
    DualDegenerate(String),

    #[error("alpha[{index}] = {value} lies outside (0, 1)")]
    AlphaOutOfRange { index: usize, value: f64 },

    #[error("type {index} goes extinct almost surely; its skeleton law is undefined")]
    CertainExtinction { index: usize },

    #[error("generating function denominator {value:e} is degenerate")]
    DegenerateDenominator { value: f64 },

    #[error("population exceeded cap {cap} at generation {generation}")]
    PopulationOverflow { generation: usize, cap: u64 },

    #[error("no samples to aggregate")]
    EmptySamples,

    #[error("type index {index} out of range for {n_types} types")]
    TypeIndex { index: usize, n_types: usize },
}
