//! Spectral clustering estimators, k-means solvers, the misclustering loss
//! and per-observation diagnostics.

mod entrywise;
mod kmeans;
mod loss;
mod spectral;

pub use entrywise::{entrywise_diagnostics, EntrywiseContext, EntrywiseRecord, ENTRYWISE_CONSTANT};
pub use kmeans::{
    cluster_means, exact_kmeans_oracle, kmeans, kmeans_cost, labelling_cost, two_means_1d,
    KMeansInit, KMeansOptions, KMeansResult, ORACLE_CAP,
};
pub use loss::{misclustering_loss, misclustering_loss_exhaustive};
pub use spectral::{
    adaptive_spectral_cluster, lrt_cluster, rank_one_cluster, spectral_cluster, threshold_rank,
    ClusteringResult, RankOneResult, Solver,
};
