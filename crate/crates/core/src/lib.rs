//! Multi-emitter localization from received signal strength.
//!
//! The localizer jointly estimates the number of non-cooperative transmitters,
//! their positions and transmit powers, and the path-loss exponent `alpha` and
//! per-meter path-loss factor `beta` of a log-normal shadowing channel. Each
//! iteration solves a box/simplex constrained least-squares problem over a
//! refining grid, clusters the active grid points with weighted k-means, and
//! averages each cluster into one target estimate.
//!
//! All numerical code is generic over [`Real`] (implemented for `f32` and
//! `f64`). The `f64` aliases at the crate root are what most callers want.

pub mod cluster;
pub mod linalg;
pub mod localizer;
pub mod model;
pub mod qp;
mod scalar;

pub use cluster::{kmeans, ClusterError, KMeans};
pub use linalg::{build_psi, orth_range, pinv, DenseMatrix, LinalgError, Preprocessing, Svd};
pub use localizer::{
    EstimateReport, GridPoint, GridState, IterationRecord, Linearization, Localizer,
    LocalizerConfig, LocalizerError, LocalizerState, ModelEstimate, Phase, TargetEstimate,
};
pub use model::{
    distance, fenton_wilkinson, generate_rss, path_gain, LogNormalMoments, ModelError,
    PathLossParams, Point, RssVector, Scenario, Target,
};
pub use qp::{kkt_residual, solve_each_nu, solve_qp, solve_with_integer_nu, QpError, QpProblem, QpSettings, QpSolution, QpStatus, SumConstraint};
pub use scalar::Real;

/// Row-major dense matrix of `f64`.
pub type Matrix = DenseMatrix<f64>;
/// Row-major dense matrix of `f32`.
pub type Matrix32 = DenseMatrix<f32>;
pub type Params = PathLossParams<f64>;
pub type Config = LocalizerConfig<f64>;
pub type Report = EstimateReport<f64>;
pub type Problem = QpProblem<f64>;
pub type Solution = QpSolution<f64>;
