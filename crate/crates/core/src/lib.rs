//! Linear-fractional multitype Galton-Watson processes.
//!
//! A process is given by a triplet `(H, g, m)`: a type-`i` particle has no
//! offspring with probability `h_i0 = 1 - sum_j h_ij`, and otherwise one
//! child of type `j` with probability `h_ij` plus a geometric number (mean
//! `m`) of further children with types drawn from `g`.
//!
//! The crate computes the Perron root and eigenvectors of the mean matrix,
//! the extinction probabilities, the dual (extinction-conditioned) and
//! skeleton (survival-conditioned) triplets, the joint skeleton/doomed
//! generating function, and simulates all of these for validation.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom fix `f64`.

pub mod error;
pub mod genfun;
pub mod identities;
pub mod matrix;
pub mod model;
pub mod random;
pub mod scalar;
pub mod simulate;
pub mod singletype;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
pub use identities::{run_identities, IdentityCheck, IdentityOptions, IdentityReport};
pub use genfun::{
    joint_pgf, joint_pgf_defining, joint_pgf_factorized, joint_pgf_with_law, mixture_residual, pgf_eval,
    pgf_iterate, total_count_pmf, JointPgf, PgfPoint, TotalCountPmf,
};
pub use matrix::{DenseMatrix, SparseMatrix};
pub use model::{
    embed_single_type, load_model, mean_matrix, model_to_json, total_means, validate_model, LFModel, Rule,
    ValidationReport, Violation,
};
pub use scalar::Scalar;
pub use singletype::{st_analyze, st_dual_pgf, st_fbar, st_hs_pgf, st_joint_f, STDecomposition, STParams, STReport};
pub use spectral::{
    classify, compute_beta, compute_mu, eigen_u, eigen_v, extinction_q, fixed_point_q, perron_root, solve_rho,
    spectral_summary, Criticality, Mu, SeriesOptions, SpectralOptions, SpectralSummary,
};
pub use transforms::{
    dual_spectral_closed, dual_triplet, hs_spectral_closed, hs_triplet, skeleton_law, skeleton_total_mean,
    DualClosedForm, HsClosedForm, SkeletonLaw,
};

pub type Model = LFModel<f64>;
pub type Summary = SpectralSummary<f64>;
pub type Law = SkeletonLaw<f64>;
pub type Point = PgfPoint<f64>;
pub type SingleType = STParams<f64>;
