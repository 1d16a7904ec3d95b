//! Runs an experiment end to end: load, prepare, train every (modality,
//! fold) job on a worker pool, fuse, and write the result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use affectfuse_core::dataset::Dataset;
use affectfuse_core::experiment::{
    prepare_modality, Experiment, ExperimentReport, FoldOutcome, FusionRun, Modality, ModalityRun,
};
use affectfuse_core::nnet::Scalar;
use affectfuse_core::preprocess::{Band, ElectrodeLayout};
use affectfuse_core::Error as CoreError;
use log::info;
use rayon::prelude::*;

use crate::checkpoint::{save_model, CheckpointHeader};
use crate::config::{Precision, RunConfig};
use crate::error::{Error, Result};
use crate::manifest::load_dataset;
use crate::report::{emit_report, file_stem};

/// Expands modality tokens against a dataset. Order follows the tokens;
/// repeats are dropped.
pub fn resolve_modalities(tokens: &[String], bands: &[Band], dataset: &Dataset) -> Result<Vec<Modality>> {
    if tokens.is_empty() {
        return Err(Error::Usage("no modalities selected".into()));
    }
    let band_modalities = || bands.iter().map(|&b| Modality::Band(b));
    let mut out: Vec<Modality> = Vec::new();
    for token in tokens {
        let expanded: Vec<Modality> = match token.to_ascii_lowercase().as_str() {
            "all" => {
                let mut all = Vec::new();
                if !dataset.roster.eeg.is_empty() {
                    all.push(Modality::Eeg);
                    all.extend(band_modalities());
                }
                all.extend(dataset.roster.peripheral.iter().cloned().map(Modality::Peripheral));
                all
            }
            "bands" => band_modalities().collect(),
            "peripheral" => dataset.roster.peripheral.iter().cloned().map(Modality::Peripheral).collect(),
            _ => vec![token.parse::<Modality>()?],
        };
        for m in expanded {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

pub fn load_layout(path: Option<&Path>) -> Result<ElectrodeLayout> {
    match path {
        None => Ok(ElectrodeLayout::canonical()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(ElectrodeLayout::parse(&text)?)
        }
    }
}

/// Refuses a non-empty directory unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(Error::Usage(format!(
                "output directory {} already exists and is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    } else if dir.exists() {
        return Err(Error::Usage(format!("{} is not a directory", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub runs: Vec<ModalityRun>,
    pub fusions: Vec<FusionRun>,
    pub files: Vec<PathBuf>,
}

/// Loads the manifest, runs the experiment and writes its report to
/// `cfg.out` with at most `jobs` worker threads.
pub fn run_experiment(cfg: &RunConfig, jobs: usize) -> Result<RunOutput> {
    let manifest = cfg
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Usage("no manifest given (--manifest or `manifest =` in --config)".into()))?;
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::Usage("no output directory given (--out)".into()))?;
    let exp_cfg = cfg.experiment_config()?;
    let layout = load_layout(cfg.layout.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;

    let started = Instant::now();
    let dataset = load_dataset(manifest)?;
    if let Some(profile) = cfg.profile {
        if profile != dataset.profile {
            return Err(Error::Usage(format!(
                "--profile {} does not match the manifest's profile {}",
                profile.name(),
                dataset.profile.name()
            )));
        }
    }
    let modalities = resolve_modalities(&cfg.modalities, &cfg.bands, &dataset)?;
    prepare_out_dir(out, cfg.force)?;
    info!(
        "{}: {} trials, modalities {}",
        dataset.name,
        dataset.trials.len(),
        modalities.iter().map(Modality::name).collect::<Vec<_>>().join(", ")
    );
    let data = pool.install(|| {
        modalities
            .par_iter()
            .map(|m| prepare_modality(&dataset, m, &layout, exp_cfg.zscore))
            .collect::<std::result::Result<Vec<_>, CoreError>>()
    })?;
    let exp = Experiment::new(&dataset, data, exp_cfg)?;
    drop(dataset);
    info!("{} windows, {} jobs", exp.table.len(), exp.jobs().len());

    let models = cfg.checkpoints.then(|| out.join("models"));
    if let Some(dir) = &models {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let outcomes = pool.install(|| match cfg.precision {
        Precision::F32 => run_jobs::<f32>(&exp, models.as_deref()),
        Precision::F64 => run_jobs::<f64>(&exp, models.as_deref()),
    })?;
    let (report, runs, fusions) = exp.finish(outcomes, cfg.precision.name(), cfg.echo())?;
    let files = emit_report(out, &report, &runs, &fusions)?;
    info!("finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(RunOutput { report, runs, fusions, files })
}

fn run_jobs<S: Scalar>(exp: &Experiment, models: Option<&Path>) -> Result<Vec<FoldOutcome>> {
    exp.jobs()
        .into_par_iter()
        .map(|job| {
            let modality = exp.data[job.0].modality.name();
            let outcome = match models {
                None => exp.run_job::<S>(job)?,
                Some(dir) => {
                    let (outcome, model) = exp.train_job::<S>(job)?;
                    let mut header = CheckpointHeader::of(&model)?;
                    header.modality = Some(modality.to_string());
                    header.fold = Some(job.1);
                    let path = dir.join(format!("{}_fold{:02}.afck", file_stem(modality), job.1));
                    save_model(&model, &header, &path)?;
                    outcome
                }
            };
            info!("{modality} fold {}: accuracy {:.4}", job.1, outcome.accuracy);
            Ok(outcome)
        })
        .collect()
}
