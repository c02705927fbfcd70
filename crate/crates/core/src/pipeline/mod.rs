//! Datasets, splitting, training, evaluation and synthetic data.

pub mod manifest;
pub mod metrics;
pub mod split;
pub mod synthetic;
pub mod train;

pub use manifest::{load_samples, Manifest, ManifestRow};
pub use metrics::{age_group, roc_auc, stratified_metrics, Metrics, Roc};
pub use split::{split, split_indices, SplitFractions};
pub use synthetic::{gen_synthetic, DomainShift, PoseMode, SyntheticConfig};
pub use train::{
    evaluate, evaluate_samples, predict_proba, train, train_samples, EpochRecord, TrainConfig,
    TrainOutcome,
};
