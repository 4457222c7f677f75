//! Latent position estimation for random dot product graphs.
//!
//! A random dot product graph places each vertex at a latent vector and
//! draws edge (i, j) as Bernoulli(rho x_i^T x_j). This crate implements the
//! standard spectral estimators of the latent positions (adjacency and
//! Laplacian spectral embeddings), a one-step Newton refinement of either
//! that attains the efficient per-vertex covariance, the asymptotic
//! covariance formulas of all four estimators, vertex-wise confidence
//! intervals, Chernoff-information clustering-rate criteria for block
//! models, clustering evaluation utilities, and a reproducible Monte Carlo
//! experiment harness.
//!
//! The estimators:
//!
//! - **ASE** — top-d scaled eigenvectors of the adjacency matrix.
//! - **LSE** — ASE of the degree-normalized Laplacian; estimates the
//!   population LSE transform of the latent positions.
//! - **OSE-A** — one Newton step on the Bernoulli likelihood score from the
//!   ASE (or the degree-scaled LSE); per-vertex errors attain the inverse
//!   Fisher covariance G(x)^{-1}.
//! - **OSE-L** — the one-step estimate renormalized onto the population LSE
//!   scale; dominates the LSE the same way OSE-A dominates the ASE.
//!
//! Data-parallel loops (replicates, one-step rows, grid sweeps, clustering
//! restarts) run under rayon when the default `parallel` feature is enabled
//! and produce results bitwise identical to the sequential schedule.

pub mod chernoff;
pub mod covariance;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod model;
pub mod one_step;
pub mod parallel;
pub mod rng;

pub use chernoff::{
    chernoff_gaussian, chernoff_ratio_grid, rho_star, rho_star_full_chernoff, ChernoffResult,
    EstimatorKind, SpecFamily,
};
pub use covariance::{
    confidence_intervals, covariance_report, g_lse, g_matrix, sigma_ase, sigma_lse,
    CovarianceReport, DiscreteSupport,
};
pub use embedding::{
    ase, ase_matrix, degree_scaled_lse, lse, lse_matrix, normalized_laplacian, population_lse,
    procrustes_align, select_dimension, AlignmentResult, Embedding, EmbeddingWarning, Method,
};
pub use error::{Error, Result};
pub use evaluation::{aligned_sse, gmm_cluster, rand_index, Partition};
pub use experiment::{
    run_simulation, sine_curve_latent, DimensionChoice, ExperimentConfig, GroundTruth, Metric,
    SimulationResults,
};
pub use linalg::EigenStrategy;
pub use model::{
    sample_rdpg, sbm_assignment, sbm_to_latent, three_block_spec, Adjacency, LatentPositions,
    SbmSpec, StorageKind,
};
pub use one_step::{
    mle_single_vertex, one_step_update, ose_a, ose_l, Initializer, OneStepConfig, OneStepUpdate,
};
pub use parallel::Execution;
