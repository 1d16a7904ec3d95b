use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::data::{prepare_modality, Modality, ModalityData, WindowTable};
use super::folds::{kfold_split, FoldPlan, SplitMode};
use super::metrics::ConfusionMatrix;
use super::run::{run_fold, run_fusion, train_fold, ExperimentConfig, FoldOutcome, FusionRun, ModalityRun};
use crate::dataset::Dataset;
use crate::nnet::{ArchTag, Model, Scalar};
use crate::preprocess::{Band, ElectrodeLayout};
use crate::{Error, Result};

/// A named group of modalities fused together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub name: String,
    pub members: Vec<Modality>,
}

/// The fusion groups reported for a set of completed modalities:
/// `Fusion EEG` (four bands), `Fusion Peripheral`, `EEG+Peripheral` (bands
/// and peripherals) and `EEG*+Peripheral`. A group appears only when all of
/// its members ran and it has at least two of them.
pub fn standard_channel_sets(ran: &[Modality]) -> Vec<ChannelSet> {
    let bands: Vec<Modality> = Band::ALL.iter().map(|&b| Modality::Band(b)).collect();
    let have_bands = bands.iter().all(|b| ran.contains(b));
    let peripherals: Vec<Modality> = ran.iter().filter(|m| !m.is_eeg()).cloned().collect();
    let mut sets = Vec::new();
    let mut push = |name: &str, members: Vec<Modality>| {
        if members.len() >= 2 {
            sets.push(ChannelSet { name: name.to_string(), members });
        }
    };
    if have_bands {
        push("Fusion EEG", bands.clone());
    }
    push("Fusion Peripheral", peripherals.clone());
    if have_bands && !peripherals.is_empty() {
        push("EEG+Peripheral", bands.iter().chain(&peripherals).cloned().collect());
    }
    if ran.contains(&Modality::Eeg) && !peripherals.is_empty() {
        push(
            "EEG*+Peripheral",
            core::iter::once(Modality::Eeg).chain(peripherals.iter().cloned()).collect(),
        );
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityRow {
    pub modality: String,
    pub arch: ArchTag,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub set: String,
    pub channels: Vec<String>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// `delta = fusion_accuracy − single_accuracy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub set: String,
    pub modality: String,
    pub single_accuracy: f64,
    pub fusion_accuracy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub profile: String,
    pub split: SplitMode,
    pub folds: usize,
    pub n_windows: usize,
    pub precision: String,
    /// Effective settings as `(key, value)` pairs.
    pub config: Vec<(String, String)>,
    pub modalities: Vec<ModalityRow>,
    pub fusions: Vec<FusionRow>,
    pub improvements: Vec<Improvement>,
}

impl ExperimentReport {
    pub fn modality(&self, name: &str) -> Option<&ModalityRow> {
        self.modalities.iter().find(|m| m.modality == name)
    }

    pub fn fusion(&self, set: &str) -> Option<&FusionRow> {
        self.fusions.iter().find(|f| f.set == set)
    }
}

/// Prepared inputs, shared window table and fold plan for one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dataset: String,
    pub profile: String,
    pub table: WindowTable,
    pub plan: FoldPlan,
    pub data: Vec<ModalityData>,
    pub config: ExperimentConfig,
}

impl Experiment {
    /// Checks that every modality's windows line up with the table and
    /// builds the fold plan.
    pub fn new(dataset: &Dataset, data: Vec<ModalityData>, config: ExperimentConfig) -> Result<Self> {
        let table = WindowTable::from_dataset(dataset);
        if data.is_empty() {
            return Err(Error::validation("no modalities selected"));
        }
        for (i, d) in data.iter().enumerate() {
            if d.provenance != table.refs {
                return Err(Error::structural(format!(
                    "windows of modality {} are not aligned with the dataset",
                    d.modality
                )));
            }
            if data[..i].iter().any(|o| o.modality == d.modality) {
                return Err(Error::validation(format!("modality {} selected twice", d.modality)));
            }
        }
        let plan = kfold_split(
            table.len(),
            &table.trial_keys(),
            &table.labels,
            config.folds,
            config.split,
            config.seed,
        )?;
        Ok(Experiment {
            dataset: dataset.name.clone(),
            profile: dataset.profile.name().to_string(),
            table,
            plan,
            data,
            config,
        })
    }

    /// Prepares each modality in turn, then calls [`Experiment::new`].
    pub fn prepare(
        dataset: &Dataset,
        modalities: &[Modality],
        layout: &ElectrodeLayout,
        config: ExperimentConfig,
    ) -> Result<Self> {
        let data = modalities
            .iter()
            .map(|m| prepare_modality(dataset, m, layout, config.zscore))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dataset, data, config)
    }

    /// `(modality index, fold)` for every training job.
    pub fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.data.len())
            .flat_map(|m| (0..self.plan.k).map(move |f| (m, f)))
            .collect()
    }

    pub fn run_job<S: Scalar>(&self, (modality, fold): (usize, usize)) -> Result<FoldOutcome> {
        run_fold::<S>(&self.data[modality], &self.plan, fold, &self.config)
    }

    /// [`Experiment::run_job`], keeping the trained model.
    pub fn train_job<S: Scalar>(&self, (modality, fold): (usize, usize)) -> Result<(FoldOutcome, Model<S>)> {
        train_fold::<S>(&self.data[modality], &self.plan, fold, &self.config)
    }

    /// Assembles job outcomes (in [`Experiment::jobs`] order) into runs,
    /// fuses the standard channel sets and builds the report.
    pub fn finish(
        &self,
        outcomes: Vec<FoldOutcome>,
        precision: &str,
        config_echo: Vec<(String, String)>,
    ) -> Result<(ExperimentReport, Vec<ModalityRun>, Vec<FusionRun>)> {
        if outcomes.len() != self.data.len() * self.plan.k {
            return Err(Error::structural(format!(
                "expected {} fold outcomes, got {}",
                self.data.len() * self.plan.k,
                outcomes.len()
            )));
        }
        let mut outcomes = outcomes.into_iter();
        let runs = self
            .data
            .iter()
            .map(|d| ModalityRun::assemble(d, &self.plan, outcomes.by_ref().take(self.plan.k).collect()))
            .collect::<Result<Vec<_>>>()?;
        let ran: Vec<Modality> = runs.iter().map(|r| r.modality.clone()).collect();
        let fusions = standard_channel_sets(&ran)
            .iter()
            .map(|set| {
                let members: Vec<&ModalityRun> = set
                    .members
                    .iter()
                    .filter_map(|m| runs.iter().find(|r| &r.modality == m))
                    .collect();
                run_fusion(&set.name, &members, &self.table, &self.plan, self.config.centroids)
            })
            .collect::<Result<Vec<_>>>()?;
        let report = build_report(self, &runs, &fusions, precision, config_echo);
        Ok((report, runs, fusions))
    }

    /// Runs every job in sequence.
    pub fn run<S: Scalar>(
        &self,
        config_echo: Vec<(String, String)>,
    ) -> Result<(ExperimentReport, Vec<ModalityRun>, Vec<FusionRun>)> {
        let outcomes = self
            .jobs()
            .into_iter()
            .map(|job| self.run_job::<S>(job))
            .collect::<Result<Vec<_>>>()?;
        self.finish(outcomes, S::NAME, config_echo)
    }
}

fn build_report(
    exp: &Experiment,
    runs: &[ModalityRun],
    fusions: &[FusionRun],
    precision: &str,
    config: Vec<(String, String)>,
) -> ExperimentReport {
    let modalities = runs
        .iter()
        .map(|r| ModalityRow {
            modality: r.modality.name().to_string(),
            arch: r.arch,
            fold_accuracies: r.fold_accuracies.clone(),
            mean_accuracy: r.mean_accuracy,
            confusion: r.confusion.clone(),
        })
        .collect::<Vec<_>>();
    let mut improvements = Vec::new();
    for f in fusions {
        for ch in &f.channels {
            if let Some(single) = modalities.iter().find(|m| &m.modality == ch) {
                improvements.push(Improvement {
                    set: f.name.clone(),
                    modality: ch.clone(),
                    single_accuracy: single.mean_accuracy,
                    fusion_accuracy: f.mean_accuracy,
                    delta: f.mean_accuracy - single.mean_accuracy,
                });
            }
        }
    }
    ExperimentReport {
        dataset: exp.dataset.clone(),
        profile: exp.profile.clone(),
        split: exp.plan.mode,
        folds: exp.plan.k,
        n_windows: exp.table.len(),
        precision: precision.to_string(),
        config,
        modalities,
        fusions: fusions
            .iter()
            .map(|f| FusionRow {
                set: f.name.clone(),
                channels: f.channels.clone(),
                fold_accuracies: f.fold_accuracies.clone(),
                mean_accuracy: f.mean_accuracy,
                confusion: f.confusion.clone(),
            })
            .collect(),
        improvements,
    }
}
