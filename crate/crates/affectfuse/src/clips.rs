//! Preprocessed clip files.
//!
//! `clips.json` lists the windows (in dataset order) and one blob per
//! stream. EEG windows are stored as 9×9×128 topographic clips in
//! `topo_<band>.f32` (`original` for broadband); with no band selected each
//! peripheral channel also gets `<channel>.f32` of 128-sample clips. Blobs
//! are little-endian `f32`, window after window.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use affectfuse_core::dataset::Dataset;
use affectfuse_core::preprocess::{
    topo_map, trial_windows, Band, BandPassFilter, ElectrodeLayout, WindowRef, ZScoreScope, GRID_SIZE,
};
use affectfuse_core::WINDOW_LEN;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::write_f32;
use crate::report::file_stem;

pub const CLIPS_JSON: &str = "clips.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipBlob {
    pub name: String,
    /// `topo` or `channel`.
    pub kind: String,
    /// Band tag; `original` for unfiltered signals.
    pub band: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    #[serde(flatten)]
    pub origin: WindowRef,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipIndex {
    pub dataset: String,
    pub profile: String,
    pub band: String,
    pub zscore: String,
    pub blobs: Vec<ClipBlob>,
    pub windows: Vec<ClipWindow>,
}

struct Stream {
    blob: ClipBlob,
    rows: Vec<usize>,
    out: BufWriter<File>,
    path: PathBuf,
}

/// Preprocesses every trial and writes the clips into `dir`, one trial at a
/// time.
pub fn write_clips(
    dataset: &Dataset,
    band: Option<Band>,
    scope: ZScoreScope,
    layout: &ElectrodeLayout,
    dir: &Path,
) -> Result<ClipIndex> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tag = band.map_or("original", Band::name).to_string();
    let filter = band.map(|b| BandPassFilter::design(&b.spec())).transpose()?;
    let mut streams = Vec::new();
    let mut open = |name: String, kind: &str, file: String, rows: Vec<usize>| -> Result<()> {
        let path = dir.join(&file);
        let out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let blob = ClipBlob { name, kind: kind.into(), band: tag.clone(), file, shape: vec![0] };
        streams.push(Stream { blob, rows, out, path });
        Ok(())
    };
    if !dataset.roster.eeg.is_empty() {
        layout.covers(&dataset.roster.eeg)?;
        open("EEG".into(), "topo", format!("topo_{tag}.f32"), dataset.roster.eeg_rows().collect())?;
    }
    if band.is_none() {
        for name in &dataset.roster.peripheral {
            let row = dataset.roster.index_of(name).unwrap_or_default();
            open(name.clone(), "channel", format!("{}.f32", file_stem(name)), vec![row])?;
        }
    }

    let mut windows = Vec::new();
    for trial in &dataset.trials {
        let label = trial.label().name().to_string();
        for stream in &mut streams {
            let is_topo = stream.blob.kind == "topo";
            let f = if is_topo { filter.as_ref() } else { None };
            for (w, window) in trial_windows(trial, &stream.rows, f, scope)?.iter().enumerate() {
                let origin = WindowRef { subject: trial.subject_id, trial: trial.trial_id, window: w as u32 };
                let written = if is_topo {
                    let clip = topo_map(window, &dataset.roster.eeg, layout, origin, band)?;
                    write_f32(&mut stream.out, clip.data())
                } else {
                    let values: Vec<f32> = window.row(0).iter().map(|&x| x as f32).collect();
                    write_f32(&mut stream.out, &values)
                };
                written.map_err(|e| Error::io(&stream.path, e))?;
            }
        }
        let n = trial.post_baseline_len() / WINDOW_LEN;
        windows.extend((0..n).map(|w| ClipWindow {
            origin: WindowRef { subject: trial.subject_id, trial: trial.trial_id, window: w as u32 },
            label: label.clone(),
        }));
    }

    let mut blobs = Vec::new();
    for mut stream in streams {
        stream.out.flush().map_err(|e| Error::io(&stream.path, e))?;
        stream.blob.shape = if stream.blob.kind == "topo" {
            vec![windows.len(), GRID_SIZE, GRID_SIZE, WINDOW_LEN]
        } else {
            vec![windows.len(), WINDOW_LEN]
        };
        blobs.push(stream.blob);
    }
    let index = ClipIndex {
        dataset: dataset.name.clone(),
        profile: dataset.profile.name().into(),
        band: tag,
        zscore: scope.name().into(),
        blobs,
        windows,
    };
    let path = dir.join(CLIPS_JSON);
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(index)
}

/// Reads window `i` of a blob listed in `index`.
pub fn read_clip(dir: &Path, blob: &ClipBlob, i: usize) -> Result<Vec<f32>> {
    let per: usize = blob.shape[1..].iter().product();
    let path = dir.join(&blob.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let range = i * per * 4..(i + 1) * per * 4;
    let chunk = bytes
        .get(range)
        .ok_or_else(|| Error::Data(format!("{}: window {i} out of range", path.display())))?;
    Ok(chunk.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}
