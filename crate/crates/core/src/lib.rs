//! Language-based error explainability for image models.
//!
//! Images are split into easy and hard sets by a confidence score (or by
//! prediction outcome), each set is clustered with Ward linkage, and every
//! hard cluster is described by the catalog sentences that are close to its
//! prototype but not to the prototype of the nearest easy cluster. When the
//! input bundle carries a performance score and a relevance matrix, the
//! selected sentences are scored against a sentence-level hardness ground
//! truth.

pub mod cluster;
pub mod config;
pub mod error;
pub mod groundtruth;
pub mod ingest;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod select;
pub mod similarity;
pub mod split;
pub mod synth;

pub use cluster::{assign_to_prototypes, compute_prototypes, ward_cluster, write_merge_log, ClusterModel, Merge};
pub use config::{Method, RunConfig, SplitMode};
pub use error::{LbeeError, Result};
pub use groundtruth::{
    beta_from_factor, build_gt_set, combine_relevance, relevance_confusion, sentence_hardness, CombineMode,
    Confusion, GroundTruthSet, HardnessTable,
};
pub use ingest::{
    load_bundle, normalize_embeddings, Bundle, BundleManifest, BundleParts, EmbeddingTable, Outcome, OutcomeTable,
    Polarity, RelevanceMatrix, ScoreKind, ScoreTable, SentenceCatalog,
};
pub use metrics::{evaluate, precision_at_k, set_agreement, MetricsReport, PartitionEvalInput};
pub use pipeline::{execute, run_pipeline, run_sweep, PipelineReport, PipelineRun, SweepParam};
pub use select::{select, union_selections, ClusterSelection, ExplanationSet};
pub use similarity::{nearest_easy_map, similarity_profile, EasyMatch};
pub use split::{derive_thresholds, split_by_outcome, split_by_score, SplitResult, Thresholds};
pub use synth::{generate_benchmark, oracle_evaluate, SynthBundle, SynthParams};
