//! Behavioural clustering of services: feature rows, z-scoring, PCA and
//! k-means with silhouette selection.

pub mod features;
pub mod kmeans;
pub mod pca;

pub use features::{
    build_features, feature_names, standardize, FeatureMatrix, FeatureVector, Standardized,
    FEATURE_COUNT,
};
pub use kmeans::{
    kmeans, loadings_report, select_k, silhouette, ClusterModel, ClusterScores, ComponentLoadings,
    FeatureLoading, KMeansFit, LoadingsReport, Selection, DEFAULT_RESTARTS,
};
pub use pca::{pca_fit, PcaModel, PcaTarget};
