//! On-disk dataset format: a JSON manifest plus raw little-endian `f32`
//! blobs, one `channels × samples` matrix per trial in channel-major order.
//!
//! ```json
//! {
//!   "dataset": "deap",
//!   "profile": "deap",
//!   "sample_rate": 128,
//!   "channels": { "eeg": ["Fp1", "..."], "peripheral": ["GSR", "..."] },
//!   "subjects": [1, 2],
//!   "trials": [
//!     { "subject": 1, "trial": 1, "blob": "blobs/s01.f32", "offset": 0,
//!       "shape": [40, 8064], "baseline_len": 384,
//!       "arousal": 6.5, "valence": 3.0, "label": "HALV" }
//!   ]
//! }
//! ```
//!
//! Blob paths are relative to the manifest. Several trials may share a blob
//! at different offsets; every blob must be exactly as long as the furthest
//! trial extent declared in it.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use affectfuse_core::dataset::{quadrant_label, ChannelRoster, Dataset, Profile, TrialRecord};
use affectfuse_core::{Error as CoreError, SAMPLE_RATE};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dataset: String,
    pub profile: Profile,
    #[serde(default = "default_rate")]
    pub sample_rate: usize,
    pub channels: ChannelRoster,
    #[serde(default)]
    pub subjects: Vec<u32>,
    #[serde(default)]
    pub trials: Vec<TrialEntry>,
}

fn default_rate() -> usize {
    SAMPLE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub subject: u32,
    pub trial: u32,
    pub blob: String,
    /// Byte offset into the blob.
    #[serde(default)]
    pub offset: u64,
    /// `[channels, samples]`.
    pub shape: [usize; 2],
    /// Defaults to the profile's baseline length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_len: Option<usize>,
    pub arousal: f64,
    pub valence: f64,
    /// Optional cross-check of the label implied by the ratings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TrialEntry {
    fn id(&self) -> String {
        format!("subject {} trial {}", self.subject, self.trial)
    }

    fn byte_len(&self) -> u64 {
        (self.shape[0] * self.shape[1] * 4) as u64
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("manifest {}: {e}", path.display())))
    }
}

/// Loads every trial of the manifest at `path`, in manifest order. Subjects
/// excluded by the profile are dropped.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_manifest(&manifest, base)
}

pub fn load_manifest(manifest: &Manifest, base: &Path) -> Result<Dataset> {
    if manifest.sample_rate != SAMPLE_RATE {
        return Err(CoreError::Validation(format!(
            "sample rate {} Hz is not supported, expected {SAMPLE_RATE}",
            manifest.sample_rate
        ))
        .into());
    }
    let roster = &manifest.channels;
    let excluded = manifest.profile.excluded_subjects();
    check_blob_lengths(manifest, base)?;

    let mut trials = Vec::with_capacity(manifest.trials.len());
    let mut bytes = Vec::new();
    for entry in &manifest.trials {
        if !manifest.subjects.is_empty() && !manifest.subjects.contains(&entry.subject) {
            return Err(CoreError::Structural(format!(
                "{}: subject is not in the manifest's subject list",
                entry.id()
            ))
            .into());
        }
        if excluded.contains(&entry.subject) {
            continue;
        }
        if entry.shape[0] != roster.len() {
            return Err(CoreError::Structural(format!(
                "{}: shape declares {} channels, roster has {}",
                entry.id(),
                entry.shape[0],
                roster.len()
            ))
            .into());
        }
        let blob = base.join(&entry.blob);
        let mut file = File::open(&blob)
            .map_err(|e| Error::Data(format!("{}: cannot open blob {}: {e}", entry.id(), blob.display())))?;
        bytes.resize(entry.byte_len() as usize, 0);
        file.seek(SeekFrom::Start(entry.offset))
            .and_then(|_| file.read_exact(&mut bytes))
            .map_err(|e| Error::io(&blob, e))?;
        let signal = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let baseline_len = entry.baseline_len.unwrap_or(manifest.profile.baseline_len());
        let trial = TrialRecord::new(
            entry.subject,
            entry.trial,
            roster.all(),
            entry.shape[1],
            signal,
            baseline_len,
            entry.arousal,
            entry.valence,
        )?;
        if let Some(declared) = &entry.label {
            let label = quadrant_label(entry.arousal, entry.valence)?;
            if !declared.eq_ignore_ascii_case(label.name()) {
                return Err(CoreError::Validation(format!(
                    "{}: declared label {declared} disagrees with ratings ({label})",
                    entry.id()
                ))
                .into());
            }
        }
        trials.push(trial);
    }
    Ok(Dataset::new(manifest.dataset.clone(), manifest.profile, roster.clone(), trials)?)
}

/// Every blob must exist and be exactly as long as its furthest trial.
fn check_blob_lengths(manifest: &Manifest, base: &Path) -> Result<()> {
    let mut extents: BTreeMap<&str, (u64, &TrialEntry)> = BTreeMap::new();
    for entry in &manifest.trials {
        let end = entry.offset + entry.byte_len();
        let slot = extents.entry(entry.blob.as_str()).or_insert((end, entry));
        if end > slot.0 {
            *slot = (end, entry);
        }
    }
    for (blob, (extent, entry)) in extents {
        let path = base.join(blob);
        let meta = fs::metadata(&path).map_err(|e| {
            Error::Data(format!("{}: blob {} is missing: {e}", entry.id(), path.display()))
        })?;
        if meta.len() != extent {
            return Err(CoreError::Structural(format!(
                "{}: blob {} holds {} bytes ({} samples), manifest declares {} bytes ({} samples)",
                entry.id(),
                path.display(),
                meta.len(),
                meta.len() / 4,
                extent,
                extent / 4
            ))
            .into());
        }
    }
    Ok(())
}

/// Writes `dataset` under `dir` as `manifest.json` plus one blob per
/// subject, and returns the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let blob_dir = dir.join("blobs");
    fs::create_dir_all(&blob_dir).map_err(|e| Error::io(&blob_dir, e))?;
    let mut subjects: Vec<u32> = dataset.trials.iter().map(|t| t.subject_id).collect();
    subjects.sort_unstable();
    subjects.dedup();

    let mut entries = Vec::with_capacity(dataset.trials.len());
    for &subject in &subjects {
        let name = format!("blobs/s{subject:02}.f32");
        let path = dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let mut offset = 0u64;
        for t in dataset.trials.iter().filter(|t| t.subject_id == subject) {
            write_f32(&mut out, t.signal()).map_err(|e| Error::io(&path, e))?;
            entries.push(TrialEntry {
                subject,
                trial: t.trial_id,
                blob: name.clone(),
                offset,
                shape: [t.n_channels(), t.n_samples()],
                baseline_len: Some(t.baseline_len),
                arousal: t.arousal,
                valence: t.valence,
                label: Some(t.label().name().to_string()),
            });
            offset += (t.signal().len() * 4) as u64;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    // keep manifest order equal to dataset order
    let order: Vec<(u32, u32)> = dataset.trials.iter().map(|t| (t.subject_id, t.trial_id)).collect();
    entries.sort_by_key(|e| order.iter().position(|&k| k == (e.subject, e.trial)));

    let manifest = Manifest {
        dataset: dataset.name.clone(),
        profile: dataset.profile,
        sample_rate: SAMPLE_RATE,
        channels: dataset.roster.clone(),
        subjects,
        trials: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub(crate) fn write_f32(out: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
