//! Covariance-difference (COD) hierarchical clustering of the rows and
//! columns of matrix-valued data.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cod;
pub mod covariance;
pub mod data;
pub mod error;
pub mod hclust;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod population;
pub mod rng;
pub mod simulate;
pub mod tensor;
pub mod tuning;
pub mod weights;

pub use nalgebra::DMatrix;

pub use cod::{cod_matrix, mcod, CodMatrix};
pub use covariance::sample_weighted_covariance;
pub use data::{standardize, Axis, DataSet, VarianceDivisor};
pub use error::{CodError, Result};
pub use hclust::{agglomerate, cut_k, cut_threshold, Dendrogram, Merge};
pub use metrics::{ari, ari_score, sensitivity_specificity, AriScore, PairAgreement};
pub use partition::{membership_matrix, partition_from_labels, Membership, Partition};
pub use pipeline::{
    cluster_naive, cluster_nested, cluster_one_step, cluster_two_step, split_folds, ClusterResult, MeanLayerSpec,
    NestedResult, PipelineOptions, SplitMode, StepTrace, StopRule,
};
pub use population::{
    gamma_diagnostic, gamma_upper_bound, population_mcod, population_noise_covariance, population_weighted_covariance,
    population_x_norm, stability_diagnostics, PopulationModel, StabilityReport, TheoryConstants, XNorm,
};
pub use simulate::{
    preset, sample_matrix_normal_dataset, sample_tensor_dataset, Design, NoiseSpec, SimConfig, TensorSimConfig,
};
pub use tensor::{cluster_tensor_identity, matricize, mode_covariance, Tensor3, TensorDataSet};
pub use tuning::{select_alpha, smooth, TuneReport, TuneSpec};
pub use weights::{identity_weight, optimal_weight, optimal_weight_from_partition, Weight, WeightKind};
