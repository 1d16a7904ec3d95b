use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::{Modality, ModalityData, WindowTable};
use super::folds::{FoldPlan, SplitMode};
use super::metrics::{accuracy, ConfusionMatrix};
use crate::dataset::QuadrantLabel;
use crate::fusion::{argmax, class_centroids, fuse_pipeline, ChannelDecision, ClassScores, LabelCentroids};
use crate::nnet::{predict, train, ArchTag, Architecture, CnnWidths, History, Model, Scalar, TrainConfig};
use crate::preprocess::{WindowRef, ZScoreScope, GRID_SIZE};
use crate::{seed, Error, Result, WINDOW_LEN};

/// Where fusion takes its label centroids from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidSource {
    /// Mean ratings per label over each training fold.
    #[default]
    Fold,
    /// The published DEAP centroids.
    Paper,
}

impl CentroidSource {
    pub fn name(self) -> &'static str {
        match self {
            CentroidSource::Fold => "fold",
            CentroidSource::Paper => "paper",
        }
    }
}

impl FromStr for CentroidSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fold" => Ok(CentroidSource::Fold),
            "paper" => Ok(CentroidSource::Paper),
            other => Err(Error::validation(format!("unknown centroid source `{other}` (fold|paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub split: SplitMode,
    pub seed: u64,
    /// `train.seed` is replaced by a per-fold seed.
    pub train: TrainConfig,
    pub widths_3d: CnnWidths,
    pub widths_1d: CnnWidths,
    pub zscore: ZScoreScope,
    pub centroids: CentroidSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: 10,
            split: SplitMode::Segment,
            seed: 0,
            train: TrainConfig::default(),
            widths_3d: CnnWidths::PAPER_3D,
            widths_1d: CnnWidths::PAPER_1D,
            zscore: ZScoreScope::Window,
            centroids: CentroidSource::Fold,
        }
    }
}

impl ExperimentConfig {
    pub fn architecture(&self, modality: &Modality) -> Result<Architecture> {
        match modality.arch_tag() {
            ArchTag::Cnn3d => Architecture::cnn3d_with(
                QuadrantLabel::COUNT,
                self.widths_3d,
                [GRID_SIZE, GRID_SIZE, WINDOW_LEN],
            ),
            ArchTag::Cnn1d => Architecture::cnn1d_with(QuadrantLabel::COUNT, self.widths_1d, WINDOW_LEN),
        }
    }

    /// Seed stream for one (modality, fold) job.
    pub fn job_seed(&self, modality: &Modality, fold: usize) -> u64 {
        seed::derive(seed::derive(self.seed, seed::name_tag(modality.name())), fold as u64)
    }
}

/// Result of training on all folds but one and scoring the held-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
    pub history: History,
}

/// Fresh model per fold, initialised and trained from fold-indexed seeds.
pub fn run_fold<S: Scalar>(
    data: &ModalityData,
    plan: &FoldPlan,
    fold: usize,
    cfg: &ExperimentConfig,
) -> Result<FoldOutcome> {
    train_fold::<S>(data, plan, fold, cfg).map(|(outcome, _)| outcome)
}

/// [`run_fold`], keeping the trained model.
pub fn train_fold<S: Scalar>(
    data: &ModalityData,
    plan: &FoldPlan,
    fold: usize,
    cfg: &ExperimentConfig,
) -> Result<(FoldOutcome, Model<S>)> {
    if fold >= plan.k {
        return Err(Error::validation(format!("fold {fold} out of range for {} folds", plan.k)));
    }
    if plan.n_windows() != data.examples.len() {
        return Err(Error::structural(format!(
            "fold plan covers {} windows, modality {} has {}",
            plan.n_windows(),
            data.modality,
            data.examples.len()
        )));
    }
    let job = cfg.job_seed(&data.modality, fold);
    let mut model = Model::<S>::new(cfg.architecture(&data.modality)?, seed::derive(job, 0))?;
    let train_idx = plan.train_indices(fold);
    let test = plan.test_indices(fold).to_vec();
    let tc = TrainConfig { seed: seed::derive(job, 1), ..cfg.train };
    let history = train(&mut model, &data.examples, &train_idx, &test, &tc)?;
    let probs = predict(&model, &data.examples, &test)?;
    let predictions: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let truth: Vec<usize> = test.iter().map(|&i| data.examples.label(i)).collect();
    let acc = accuracy(&predictions, &truth)?;
    Ok((FoldOutcome { fold, test, probs, predictions, accuracy: acc, history }, model))
}

/// Cross-validated results of one modality, with the held-out class
/// scores of every window kept for fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityRun {
    pub modality: Modality,
    pub arch: ArchTag,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Held-out class probabilities, indexed by window.
    pub scores: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
    pub confusion: ConfusionMatrix,
    pub final_losses: Vec<f64>,
    pub provenance: Vec<WindowRef>,
    pub plan_digest: u64,
}

impl ModalityRun {
    /// Collects one outcome per fold (any order) into a run.
    pub fn assemble(data: &ModalityData, plan: &FoldPlan, mut outcomes: Vec<FoldOutcome>) -> Result<Self> {
        outcomes.sort_by_key(|o| o.fold);
        if outcomes.len() != plan.k || outcomes.iter().enumerate().any(|(f, o)| o.fold != f) {
            return Err(Error::structural(format!(
                "modality {} needs exactly one outcome per fold",
                data.modality
            )));
        }
        let n = data.examples.len();
        let mut scores = alloc::vec![Vec::new(); n];
        let mut predictions = alloc::vec![0; n];
        let mut confusion = ConfusionMatrix::new(QuadrantLabel::COUNT);
        for o in &outcomes {
            for ((&i, p), &pred) in o.test.iter().zip(&o.probs).zip(&o.predictions) {
                scores[i] = p.clone();
                predictions[i] = pred;
                confusion.add(data.examples.label(i), pred)?;
            }
        }
        let fold_accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
        let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
        Ok(ModalityRun {
            modality: data.modality.clone(),
            arch: data.modality.arch_tag(),
            fold_accuracies,
            mean_accuracy,
            scores,
            predictions,
            confusion,
            final_losses: outcomes.iter().map(|o| o.history.final_loss().unwrap_or(f64::NAN)).collect(),
            provenance: data.provenance.clone(),
            plan_digest: plan.digest(),
        })
    }
}

/// Runs every fold of one modality in sequence.
pub fn run_modality<S: Scalar>(data: &ModalityData, plan: &FoldPlan, cfg: &ExperimentConfig) -> Result<ModalityRun> {
    let outcomes = (0..plan.k)
        .map(|f| run_fold::<S>(data, plan, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    ModalityRun::assemble(data, plan, outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedWindow {
    pub window: WindowRef,
    pub fold: usize,
    pub label: usize,
    pub predicted: usize,
    /// Unnormalized fused score per label.
    pub scores: Vec<f64>,
    /// GauPR and channel reliability of each fused channel.
    pub decisions: Vec<ChannelDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRun {
    pub name: String,
    pub channels: Vec<String>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Centroids used for each fold.
    pub centroids: Vec<LabelCentroids>,
    /// In window-table order.
    pub windows: Vec<FusedWindow>,
}

/// Centroids from the ratings of the training windows of `fold`.
pub fn fold_centroids(table: &WindowTable, plan: &FoldPlan, fold: usize) -> Result<LabelCentroids> {
    let ratings = plan
        .train_indices(fold)
        .into_iter()
        .map(|i| {
            let (a, v) = table.ratings[i];
            let label = QuadrantLabel::from_code(table.labels[i])
                .ok_or_else(|| Error::validation(format!("label code {} out of range", table.labels[i])))?;
            Ok((a, v, label))
        })
        .collect::<Result<Vec<_>>>()?;
    class_centroids(&ratings)
}

/// Fuses the held-out scores of `runs` window by window and scores the
/// fused labels fold by fold.
pub fn run_fusion(
    name: &str,
    runs: &[&ModalityRun],
    table: &WindowTable,
    plan: &FoldPlan,
    source: CentroidSource,
) -> Result<FusionRun> {
    if runs.is_empty() {
        return Err(Error::validation(format!("channel set `{name}` is empty")));
    }
    let digest = plan.digest();
    for run in runs {
        if run.plan_digest != digest {
            return Err(Error::structural(format!(
                "modality {} was evaluated on a different fold plan",
                run.modality
            )));
        }
        if run.provenance != table.refs {
            return Err(Error::structural(format!(
                "window provenance of modality {} does not match the window table",
                run.modality
            )));
        }
    }
    let mut fold_accuracies = Vec::with_capacity(plan.k);
    let mut confusion = ConfusionMatrix::new(QuadrantLabel::COUNT);
    let mut centroids = Vec::with_capacity(plan.k);
    let mut windows = Vec::with_capacity(table.len());
    for fold in 0..plan.k {
        let c = match source {
            CentroidSource::Fold => fold_centroids(table, plan, fold)?,
            CentroidSource::Paper => LabelCentroids::paper_defaults(),
        };
        let test = plan.test_indices(fold);
        let mut predicted = Vec::with_capacity(test.len());
        let mut truth = Vec::with_capacity(test.len());
        for &i in test {
            let scores = runs
                .iter()
                .map(|r| ClassScores::new(r.modality.name(), r.scores[i].clone()))
                .collect::<Result<Vec<_>>>()?;
            let fused = fuse_pipeline(&scores, &c)?;
            confusion.add(table.labels[i], fused.label)?;
            predicted.push(fused.label);
            truth.push(table.labels[i]);
            windows.push((
                i,
                FusedWindow {
                    window: table.refs[i],
                    fold,
                    label: table.labels[i],
                    predicted: fused.label,
                    scores: fused.scores,
                    decisions: fused.decisions,
                },
            ));
        }
        fold_accuracies.push(accuracy(&predicted, &truth)?);
        centroids.push(c);
    }
    windows.sort_by_key(|&(i, _)| i);
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(FusionRun {
        name: name.to_string(),
        channels: runs.iter().map(|r| r.modality.name().to_string()).collect(),
        fold_accuracies,
        mean_accuracy,
        confusion,
        centroids,
        windows: windows.into_iter().map(|(_, w)| w).collect(),
    })
}
