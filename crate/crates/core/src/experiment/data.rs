use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::nnet::{ArchTag, Examples};
use crate::preprocess::{
    topo_map, trial_windows, Band, BandPassFilter, ElectrodeLayout, WindowRef, ZScoreScope,
};
use crate::{Error, Result, WINDOW_LEN};

/// One classifier input stream: broadband EEG, one EEG band, or a single
/// peripheral channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Modality {
    Eeg,
    Band(Band),
    Peripheral(String),
}

impl Modality {
    pub const EEG_NAME: &'static str = "EEG*";

    pub fn name(&self) -> &str {
        match self {
            Modality::Eeg => Self::EEG_NAME,
            Modality::Band(b) => b.name(),
            Modality::Peripheral(name) => name,
        }
    }

    pub fn is_eeg(&self) -> bool {
        !matches!(self, Modality::Peripheral(_))
    }

    pub fn arch_tag(&self) -> ArchTag {
        if self.is_eeg() {
            ArchTag::Cnn3d
        } else {
            ArchTag::Cnn1d
        }
    }

    /// EEG*, the four bands, then every peripheral channel of `dataset`.
    pub fn all_for(dataset: &Dataset) -> Vec<Modality> {
        let mut out = Vec::new();
        if !dataset.roster.eeg.is_empty() {
            out.push(Modality::Eeg);
            out.extend(Band::ALL.iter().map(|&b| Modality::Band(b)));
        }
        out.extend(dataset.roster.peripheral.iter().cloned().map(Modality::Peripheral));
        out
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    /// `EEG*` (also `eeg`, `original`), a band name, or anything else as a
    /// peripheral channel name (checked against the dataset later).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::validation("empty modality name"));
        }
        if s == Self::EEG_NAME || s.eq_ignore_ascii_case("eeg") || s.eq_ignore_ascii_case("original") {
            return Ok(Modality::Eeg);
        }
        Ok(s.parse::<Band>().map_or_else(|_| Modality::Peripheral(s.to_string()), Modality::Band))
    }
}

impl From<Modality> for String {
    fn from(m: Modality) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for Modality {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Per-window bookkeeping shared by every modality of a dataset, in trial
/// order then time order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowTable {
    pub refs: Vec<WindowRef>,
    pub labels: Vec<usize>,
    /// (arousal, valence) of the window's trial.
    pub ratings: Vec<(f64, f64)>,
}

impl WindowTable {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut table = WindowTable::default();
        for trial in &dataset.trials {
            let n = trial.post_baseline_len() / WINDOW_LEN;
            for w in 0..n {
                table.refs.push(WindowRef {
                    subject: trial.subject_id,
                    trial: trial.trial_id,
                    window: w as u32,
                });
                table.labels.push(trial.label().code());
                table.ratings.push((trial.arousal, trial.valence));
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    /// One key per (subject, trial).
    pub fn trial_keys(&self) -> Vec<u64> {
        self.refs
            .iter()
            .map(|r| (u64::from(r.subject) << 32) | u64::from(r.trial))
            .collect()
    }
}

/// Classifier inputs for one modality, aligned with [`WindowTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityData {
    pub modality: Modality,
    pub examples: Examples,
    pub provenance: Vec<WindowRef>,
}

/// Builds the per-window inputs of `modality`: 9×9×128 topographic clips
/// for EEG variants, 128-sample vectors for a peripheral channel.
pub fn prepare_modality(
    dataset: &Dataset,
    modality: &Modality,
    layout: &ElectrodeLayout,
    scope: ZScoreScope,
) -> Result<ModalityData> {
    let (rows, filter): (Vec<usize>, Option<BandPassFilter>) = match modality {
        Modality::Peripheral(name) => {
            if !dataset.roster.peripheral.contains(name) {
                return Err(Error::validation(format!(
                    "unknown modality `{name}`: not EEG*, a band, or a peripheral channel of {}",
                    dataset.name
                )));
            }
            let row = dataset.roster.index_of(name).unwrap_or_default();
            (alloc::vec![row], None)
        }
        eeg => {
            if dataset.roster.eeg.is_empty() {
                return Err(Error::validation(format!(
                    "modality `{eeg}` needs EEG channels, {} has none",
                    dataset.name
                )));
            }
            layout.covers(&dataset.roster.eeg)?;
            let filter = match eeg {
                Modality::Band(b) => Some(BandPassFilter::design(&b.spec())?),
                _ => None,
            };
            (dataset.roster.eeg_rows().collect(), filter)
        }
    };
    let band = match modality {
        Modality::Band(b) => Some(*b),
        _ => None,
    };
    let input_len = if modality.is_eeg() {
        crate::preprocess::GRID_SIZE * crate::preprocess::GRID_SIZE * WINDOW_LEN
    } else {
        WINDOW_LEN
    };
    let mut examples = Examples::new(input_len);
    let mut provenance = Vec::new();
    let mut clip = Vec::with_capacity(input_len);
    for trial in &dataset.trials {
        let windows = trial_windows(trial, &rows, filter.as_ref(), scope).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!(
                "subject {} trial {}: {msg}",
                trial.subject_id, trial.trial_id
            )),
            other => other,
        })?;
        let label = trial.label().code();
        for (w, window) in windows.iter().enumerate() {
            let origin = WindowRef { subject: trial.subject_id, trial: trial.trial_id, window: w as u32 };
            if modality.is_eeg() {
                let topo = topo_map(window, &dataset.roster.eeg, layout, origin, band)?;
                examples.push(topo.data(), label)?;
            } else {
                clip.clear();
                clip.extend(window.row(0).iter().map(|&v| v as f32));
                examples.push(&clip, label)?;
            }
            provenance.push(origin);
        }
    }
    Ok(ModalityData { modality: modality.clone(), examples, provenance })
}
