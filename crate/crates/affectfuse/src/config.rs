//! Run settings and the `key = value` configuration file.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored and
//! dashes in keys are read as underscores. Keys match the `run` flags.
//! Relative paths in a file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use affectfuse_core::dataset::Profile;
use affectfuse_core::experiment::{CentroidSource, ExperimentConfig, SplitMode};
use affectfuse_core::nnet::{AdamConfig, CnnWidths, TrainConfig};
use affectfuse_core::preprocess::{Band, ZScoreScope};

use crate::error::{Error, Result};

/// Parses `key = value` lines, keeping their order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Usage(format!("config line {}: empty key", n + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            other => Err(Error::Usage(format!("unknown precision `{other}` (f32|f64)"))),
        }
    }
}

/// Network width preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArchPreset {
    /// 32/64 maps and 1024 units (3D), 16/32 maps and 256 units (1D).
    #[default]
    Paper,
    /// Narrow variants that fit a desktop.
    Compact,
}

impl ArchPreset {
    pub fn name(self) -> &'static str {
        match self {
            ArchPreset::Paper => "paper",
            ArchPreset::Compact => "compact",
        }
    }

    pub fn widths(self) -> (CnnWidths, CnnWidths) {
        match self {
            ArchPreset::Paper => (CnnWidths::PAPER_3D, CnnWidths::PAPER_1D),
            ArchPreset::Compact => (CnnWidths::COMPACT_3D, CnnWidths::COMPACT_1D),
        }
    }
}

impl FromStr for ArchPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(ArchPreset::Paper),
            "compact" => Ok(ArchPreset::Compact),
            other => Err(Error::Usage(format!("unknown architecture preset `{other}` (paper|compact)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// When set, must match the manifest's profile.
    pub profile: Option<Profile>,
    /// Modality tokens: `all`, `eeg`, `bands`, `peripheral`, a band name or
    /// a channel name.
    pub modalities: Vec<String>,
    /// Bands that `all` and `bands` expand to.
    pub bands: Vec<Band>,
    pub split: SplitMode,
    pub folds: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub keep: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub precision: Precision,
    pub arch: ArchPreset,
    pub zscore: ZScoreScope,
    pub centroids: CentroidSource,
    pub layout: Option<PathBuf>,
    pub checkpoints: bool,
    pub force: bool,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            manifest: None,
            profile: None,
            modalities: vec!["all".into()],
            bands: Band::ALL.to_vec(),
            split: SplitMode::Segment,
            folds: 10,
            epochs: train.epochs,
            batch: train.batch_size,
            lr: train.adam.lr,
            keep: CnnWidths::PAPER_3D.keep_prob,
            seed: 0,
            out: None,
            precision: Precision::F32,
            arch: ArchPreset::Paper,
            zscore: ZScoreScope::Window,
            centroids: CentroidSource::Fold,
            layout: None,
            checkpoints: false,
            force: false,
            jobs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Usage(format!("{key} = `{value}`: {e}")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl RunConfig {
    pub const KEYS: [&'static str; 21] = [
        "manifest", "profile", "modalities", "bands", "split", "folds", "epochs", "batch", "lr", "keep",
        "seed", "out", "precision", "arch", "zscore", "centroids", "layout", "checkpoints", "force",
        "jobs", "config",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "profile" => self.profile = Some(parse(key, value)?),
            "modalities" => self.modalities = list(value),
            "bands" => {
                self.bands = list(value)
                    .iter()
                    .map(|b| parse(key, b))
                    .collect::<Result<Vec<Band>>>()?
            }
            "split" => self.split = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "keep" => self.keep = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "precision" => self.precision = parse(key, value)?,
            "arch" => self.arch = parse(key, value)?,
            "zscore" => self.zscore = parse(key, value)?,
            "centroids" => self.centroids = parse(key, value)?,
            "layout" => self.layout = Some(PathBuf::from(value)),
            "checkpoints" => self.checkpoints = parse(key, value)?,
            "force" => self.force = parse(key, value)?,
            "jobs" => self.jobs = Some(parse(key, value)?),
            other => return Err(Error::Usage(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    /// Applies a configuration file; relative paths are taken from its
    /// directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (key, value) in parse_pairs(&text)? {
            if key == "config" {
                return Err(Error::Usage(format!("{}: config files cannot include others", path.display())));
            }
            self.set(&key, &value)
                .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
            let slot = match key.as_str() {
                "manifest" => &mut self.manifest,
                "out" => &mut self.out,
                "layout" => &mut self.layout,
                _ => continue,
            };
            if let Some(p) = slot.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(())
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let (mut w3, mut w1) = self.arch.widths();
        w3.keep_prob = self.keep;
        w1.keep_prob = self.keep;
        let adam = AdamConfig { lr: self.lr, ..AdamConfig::default() };
        adam.validate()?;
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Usage("epochs and batch must be positive".into()));
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return Err(Error::Usage(format!("keep probability {} is outside (0, 1]", self.keep)));
        }
        Ok(ExperimentConfig {
            folds: self.folds,
            split: self.split,
            seed: self.seed,
            train: TrainConfig { epochs: self.epochs, batch_size: self.batch, adam, seed: 0 },
            widths_3d: w3,
            widths_1d: w1,
            zscore: self.zscore,
            centroids: self.centroids,
        })
    }

    /// Settings that determine the results, as recorded in the report.
    /// Output location, worker count and overwrite flag are left out so that
    /// reruns elsewhere produce the same bytes.
    pub fn echo(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        vec![
            ("manifest".into(), path(&self.manifest)),
            ("profile".into(), self.profile.map_or(String::new(), |p| p.name().into())),
            ("modalities".into(), self.modalities.join(",")),
            ("bands".into(), self.bands.iter().map(|b| b.name()).collect::<Vec<_>>().join(",")),
            ("split".into(), self.split.name().into()),
            ("folds".into(), self.folds.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("keep".into(), self.keep.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("precision".into(), self.precision.name().into()),
            ("arch".into(), self.arch.name().into()),
            ("zscore".into(), self.zscore.name().into()),
            ("centroids".into(), self.centroids.name().into()),
            ("layout".into(), path(&self.layout)),
        ]
    }
}
