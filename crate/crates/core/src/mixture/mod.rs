//! Global k-means over target embeddings, per-source cluster-engagement
//! mixtures and centroid placement of out-of-vocabulary entities.

mod engagement;
mod io;
mod kmeans;

pub use engagement::{
    build_mixtures, distribution_from_counts, embed_oov_target, engagement_counts, engagement_distribution,
    EngagementScope, MixtureComponent, MixtureRepresentation, OovAssignment, DEFAULT_CLUSTERS, DEFAULT_TOP_M,
};
pub use io::{
    format_components, load_centroids, load_mixtures, parse_mixtures, save_centroids, save_mixtures, write_mixtures,
    MixtureRecord, CENTROIDS_TABLE,
};
pub use kmeans::{
    kmeans, kmeans_with, ClusterModel, KMeansConfig, DEFAULT_BATCH_SIZE, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE,
};
