use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use affectfuse_core::dataset::{
    dataset_stats, synth_dataset, ChannelRoster, QuadrantLabel, SynthSpec, DEAP_EEG, DEAP_PERIPHERAL,
};
use affectfuse_core::preprocess::{Band, ZScoreScope};
use clap::{Args, Parser, Subcommand};

use crate::clips::write_clips;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::manifest::{load_dataset, save_dataset};
use crate::runner::{load_layout, prepare_out_dir, run_experiment};
use crate::scores::{fuse_windows, load_centroids, read_scores, write_fused};

#[derive(Debug, Parser)]
#[command(name = "affectfuse", version, about = "Multimodal emotion recognition with decision-level fusion")]
pub struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect or generate datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Write baseline-corrected, normalised 1 s clips.
    Preprocess(PreprocessArgs),
    /// Cross-validate every selected modality and fuse them.
    Run(Box<RunArgs>),
    /// Fuse per-channel class probabilities from a CSV file.
    Fuse(FuseArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Print the number of windows per quadrant label.
    Stats(StatsArgs),
    /// Generate a seeded synthetic dataset with planted labels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Window length in samples.
    #[arg(long, default_value_t = 128)]
    pub window: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the manifest and blobs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub subjects: u32,
    #[arg(long, default_value_t = 8)]
    pub trials: u32,
    /// Stimulus windows per trial.
    #[arg(long, default_value_t = 60)]
    pub windows: usize,
    #[arg(long, default_value_t = 3)]
    pub baseline_windows: usize,
    /// Amplitude of the class tones.
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Standard deviation of the white noise.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Number of EEG channels, taken from the DEAP roster in order.
    #[arg(long, default_value_t = 32)]
    pub eeg: usize,
    /// Peripheral channel names.
    #[arg(long, value_delimiter = ',', default_values_t = DEAP_PERIPHERAL.map(String::from))]
    pub peripheral: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// none, theta, alpha, beta or gamma.
    #[arg(long, default_value = "none")]
    pub band: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Normalisation scope: window, trial or frame.
    #[arg(long, default_value = "window")]
    pub zscore: String,
    /// Electrode layout file (`name row col` per line).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Every option may also come from `--config`; flags given here win.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Expected profile: deap, amigos or synthetic.
    #[arg(long)]
    pub profile: Option<String>,
    /// Comma list of all, eeg, bands, peripheral, band names or channel names [default: all].
    #[arg(long)]
    pub modalities: Option<String>,
    /// Bands that `all` and `bands` expand to [default: theta,alpha,beta,gamma].
    #[arg(long)]
    pub bands: Option<String>,
    /// Fold assignment: segment (windows) or trial (whole trials) [default: segment].
    #[arg(long)]
    pub split: Option<String>,
    /// Number of cross-validation folds [default: 10].
    #[arg(long)]
    pub folds: Option<String>,
    /// Training epochs per fold [default: 30].
    #[arg(long)]
    pub epochs: Option<String>,
    /// Mini-batch size [default: 240].
    #[arg(long)]
    pub batch: Option<String>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<String>,
    /// Dropout keep probability [default: 0.5].
    #[arg(long)]
    pub keep: Option<String>,
    /// Seed for folds, initialisation, shuffling and dropout [default: 0].
    #[arg(long)]
    pub seed: Option<String>,
    /// Result directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Arithmetic precision: f32 or f64 [default: f32].
    #[arg(long)]
    pub precision: Option<String>,
    /// Network widths: paper or compact [default: paper].
    #[arg(long)]
    pub arch: Option<String>,
    /// Normalisation scope: window, trial or frame [default: window].
    #[arg(long)]
    pub zscore: Option<String>,
    /// Fusion centroids: fold (training-fold ratings) or paper [default: fold].
    #[arg(long)]
    pub centroids: Option<String>,
    /// Electrode layout file.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Save every trained fold model under `<out>/models`.
    #[arg(long)]
    pub checkpoints: bool,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Worker threads [default: all cores].
    #[arg(long, env = "AFFECTFUSE_JOBS")]
    pub jobs: Option<usize>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let text = [
            ("profile", &self.profile),
            ("modalities", &self.modalities),
            ("bands", &self.bands),
            ("split", &self.split),
            ("folds", &self.folds),
            ("epochs", &self.epochs),
            ("batch", &self.batch),
            ("lr", &self.lr),
            ("keep", &self.keep),
            ("seed", &self.seed),
            ("precision", &self.precision),
            ("arch", &self.arch),
            ("zscore", &self.zscore),
            ("centroids", &self.centroids),
        ];
        for (key, value) in text {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for (slot, value) in [
            (&mut cfg.manifest, &self.manifest),
            (&mut cfg.out, &self.out),
            (&mut cfg.layout, &self.layout),
        ] {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        cfg.checkpoints |= self.checkpoints;
        cfg.force |= self.force;
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// CSV with header `window,channel,p0,p1,...`.
    #[arg(long)]
    pub scores: PathBuf,
    /// `paper` or a CSV of `label,arousal,valence`.
    #[arg(long, default_value = "paper")]
    pub centroids: String,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset(DatasetCommand::Stats(args)) => cmd_stats(&args),
        Command::Dataset(DatasetCommand::Synth(args)) => cmd_synth(&args),
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Fuse(args) => cmd_fuse(&args),
    }
}

fn stdout_error(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let ds = load_dataset(&args.manifest)?;
    let counts = dataset_stats(&ds.trials, args.window)?;
    let mut out = io::stdout().lock();
    if args.json {
        let mut map = serde_json::Map::new();
        for label in QuadrantLabel::ALL {
            map.insert(label.name().into(), counts.get(label).into());
        }
        map.insert("total".into(), counts.total().into());
        map.insert("trials".into(), ds.trials.len().into());
        writeln!(out, "{}", serde_json::Value::Object(map)).map_err(stdout_error)
    } else {
        let mut text = format!("{} ({}), {} trials\n", ds.name, ds.profile.name(), ds.trials.len());
        for label in QuadrantLabel::ALL {
            text += &format!("{:<6}{}\n", label.name(), counts.get(label));
        }
        text += &format!("{:<6}{}\n", "total", counts.total());
        out.write_all(text.as_bytes()).map_err(stdout_error)
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.eeg > DEAP_EEG.len() {
        return Err(Error::Usage(format!("--eeg {} exceeds the {} DEAP channels", args.eeg, DEAP_EEG.len())));
    }
    let spec = SynthSpec {
        n_subjects: args.subjects,
        n_trials: args.trials,
        roster: ChannelRoster::new(
            DEAP_EEG[..args.eeg].iter().map(|s| s.to_string()).collect(),
            args.peripheral.clone(),
        ),
        class_separation: args.separation,
        noise_level: args.noise,
        windows_per_trial: args.windows,
        baseline_windows: args.baseline_windows,
    };
    prepare_out_dir(&args.out, args.force)?;
    let ds = synth_dataset(&spec, args.seed)?;
    let path = save_dataset(&ds, &args.out)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    let band = match args.band.trim().to_ascii_lowercase().as_str() {
        "none" | "original" => None,
        other => Some(other.parse::<Band>()?),
    };
    let scope: ZScoreScope = args.zscore.parse()?;
    let layout = load_layout(args.layout.as_deref())?;
    let ds = load_dataset(&args.manifest)?;
    prepare_out_dir(&args.out, args.force)?;
    let index = write_clips(&ds, band, scope, &layout, &args.out)?;
    println!("{} windows, {} blobs in {}", index.windows.len(), index.blobs.len(), args.out.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let jobs = cfg
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let output = run_experiment(&cfg, jobs)?;
    let mut out = io::stdout().lock();
    let mut text = String::new();
    for m in &output.report.modalities {
        text += &format!("{:<20}{:.4}\n", m.modality, m.mean_accuracy);
    }
    for f in &output.report.fusions {
        text += &format!("{:<20}{:.4}\n", f.set, f.mean_accuracy);
    }
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

fn cmd_fuse(args: &FuseArgs) -> Result<()> {
    let source = args.scores.display().to_string();
    let file = fs::File::open(&args.scores).map_err(|e| Error::io(&args.scores, e))?;
    let windows = read_scores(file, &source)?;
    let centroids = load_centroids(&args.centroids)?;
    let results = fuse_windows(&windows, &centroids)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_fused(file, &windows, &results)
        }
        None => write_fused(io::stdout().lock(), &windows, &results),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn parser_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("run.conf");
        fs::write(&conf, "epochs = 3\nbatch = 16\nseed = 9\n").unwrap();
        let cli = Cli::try_parse_from([
            "affectfuse", "run", "--config", conf.to_str().unwrap(), "--epochs", "5", "--out", "x",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.epochs, cfg.batch, cfg.seed), (5, 16, 9));
        assert_eq!(cfg.out, Some(PathBuf::from("x")));
    }
}
