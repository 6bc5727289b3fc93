//! Dissimilarity-based fuzzy clustering (FANNY) with partition validity
//! indices, membership PCA, and a gamma-ray burst catalog study.
//!
//! The pipeline: [`catalog`] turns raw burst records into a [`FeatureTable`]
//! of log variables, [`distance`] builds the Euclidean [`DistanceMatrix`],
//! [`fanny`] computes fuzzy memberships, and [`validity`] and [`mpca`]
//! summarize the result. [`study`] strings the pieces together.

pub mod catalog;
pub mod distance;
pub mod error;
pub mod fanny;
pub mod features;
pub mod mpca;
pub mod study;
pub mod validity;

pub use distance::{euclidean_distance_matrix, DistanceMatrix};
pub use error::{Error, Result};
pub use fanny::{
    closest_hard_clustering, fanny_iterate, fanny_objective, fanny_solve, fanny_solve_from,
    normalized_dunn_partition_coefficient, FannyConfig, FannyResult, Init, MembershipMatrix,
};
pub use features::{standardize_columns, FeatureTable};
pub use mpca::{emit_pc_scatter, membership_pca, membership_pca_or_center, PcaResult};
pub use validity::{
    connectivity_index, cross_tabulate, dunn_index, membership_report, CrossTab, HardPartition,
    MembershipReport,
};
