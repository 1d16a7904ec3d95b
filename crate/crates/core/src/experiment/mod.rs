//! Cross-validated evaluation of single modalities and their fusion.
//!
//! Every modality of an experiment is cut into the same windows (see
//! [`WindowTable`]) and evaluated on one shared [`FoldPlan`], so held-out
//! class scores can be fused window by window. Each (modality, fold) pair
//! is an independent job; [`Experiment::finish`] reduces their outcomes.

mod data;
mod folds;
mod metrics;
mod report;
mod run;

pub use data::{prepare_modality, Modality, ModalityData, WindowTable};
pub use folds::{kfold_split, FoldPlan, SplitMode};
pub use metrics::{accuracy, confusion_matrix, ConfusionMatrix};
pub use report::{
    standard_channel_sets, ChannelSet, Experiment, ExperimentReport, FusionRow, Improvement, ModalityRow,
};
pub use run::{
    fold_centroids, run_fold, run_fusion, run_modality, train_fold, CentroidSource, ExperimentConfig,
    FoldOutcome, FusedWindow, FusionRun, ModalityRun,
};
