//! Spectral co-clustering: seasonal matrices, singular vectors, PisCES
//! smoothing, staggered k-means and label alignment.

pub mod cocluster;
pub mod kmeans;
pub mod pisces;
pub mod rank;
pub mod svd;

pub use cocluster::{
    align_labels, cocluster_pvar, cocluster_vhar, spectral_cocluster, Boundary, ClusterOptions,
    ClusterOutput, CommunityPath, SeasonalSingularBasis,
};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use pisces::{alpha_max, extract_basis_from_projector, pisces_smooth, project_top_k, PiscesOutput};
pub use rank::{select_rank, staggered_ranks, SeasonRanks};
pub use svd::{
    row_normalize, seasonal_autoregressive_matrix, seasonal_matrices, top_singular_vectors,
    SingularBlock,
};
