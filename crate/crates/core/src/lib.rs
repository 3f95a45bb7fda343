//! Gini prametric dissimilarities and the learners built on them.

pub mod agglomerative;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod knn;
pub mod metrics;
pub mod ranks;
pub mod rng;

pub use agglomerative::{agglomerative_fit, Dendrogram, Linkage};
pub use dataset::{
    inject_noise, load_csv, split_folds, DataMatrix, FoldPlan, LabelColumn, Manifest,
};
pub use error::{Error, Result};
pub use eval::{
    classification_report, hungarian_align, rank_table, silhouette_score, wilcoxon_signed_rank,
    EvalReport, Objective, RankTable,
};
pub use kmeans::{
    kmeans_fit, kmeans_predict, kmeanspp_init, select_nu_silhouette, KMeansModel, KMeansOptions,
};
pub use knn::{knn_fit, knn_grid_search, knn_predict, KnnModel};
pub use metrics::MetricSpec;
pub use ranks::{build_rank_context, conditional_ranks, RankContext, RankConvention};
