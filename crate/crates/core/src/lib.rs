//! Spectral co-clustering of directed networks that drive periodic and
//! heterogeneous vector autoregressions.
//!
//! The crate covers degree-corrected co-blockmodels, the transition matrices
//! they induce, simulation and least-squares estimation of VAR, PVAR and VHAR
//! models, the spectral co-clustering pipeline with PisCES smoothing,
//! cross-validation of the smoothing parameter, evaluation metrics and a
//! Monte-Carlo harness.

pub mod analysis;
pub mod assignment;
pub mod bench;
pub mod blockmodel;
pub mod crossval;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod metrics;
pub mod seed;
pub mod simulate;
pub mod spectral;
pub mod transition;

pub use analysis::{analyze, AnalysisConfig, AnalysisOutput, ModelSpec, RankPolicy, SmoothingChoice, Transform};
pub use bench::{run_benchmark, BenchConfig, BenchOutcome, BenchRow, ModelKind, Smoothing};
pub use blockmodel::{BlockModelSpec, Overflow, PropensityScale, SeasonGraph, SeasonalGraphSequence};
pub use crossval::{select_alpha, AlphaGrid, CvOptions, CvReport, FoldAssignment};
pub use error::{Error, Result};
pub use estimate::EstimationResult;
pub use linalg::Mat;
pub use metrics::{ari, benchmark_scores, permutation_accuracy, Ari, PathScores};
pub use seed::{derive_seed, rng_from_seed, Rng};
pub use simulate::{simulate, Innovations, SimulationOptions, TimeSeriesPanel};
pub use spectral::{align_labels, spectral_cocluster, Boundary, ClusterOptions, CommunityPath, SeasonRanks};
pub use transition::{stabilize, StabilizeOptions, TransitionSet};
