//! Post-training analysis of a map: U-matrix, major trends (k-means over
//! node weights), feature vectors and correlation-based feature clustering.

mod features;
mod hclust;
mod kmeans;
mod umatrix;

pub use features::{
    correlation_distance, distance_matrix, extract_feature_vector, feature_vectors, FeatureKey,
    FeatureVector,
};
pub use hclust::{cluster_features, heatmap_order, FeatureClustering, FeatureDendrogram, Linkage, Merge};
pub use kmeans::{cluster_trends, kmeans, TrendClustering, DEFAULT_RESTARTS};
pub use umatrix::{compute_umatrix, UMatrix};
