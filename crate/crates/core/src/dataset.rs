//! Trial records, quadrant labels, synthetic recordings and label statistics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SAMPLE_RATE, WINDOW_LEN};

/// Ratings at or below this value are "low" on their axis.
pub const RATING_THRESHOLD: f64 = 5.0;
pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 9.0;

/// Subjects dropped from AMIGOS because the preprocessed release contains
/// invalid data for them.
pub const AMIGOS_EXCLUDED_SUBJECTS: [u32; 7] = [9, 12, 21, 22, 23, 24, 33];

/// Arousal/valence quadrant. Codes are fixed: LALV=0, HALV=1, LAHV=2, HAHV=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuadrantLabel {
    #[serde(rename = "LALV")]
    Lalv = 0,
    #[serde(rename = "HALV")]
    Halv = 1,
    #[serde(rename = "LAHV")]
    Lahv = 2,
    #[serde(rename = "HAHV")]
    Hahv = 3,
}

impl QuadrantLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [QuadrantLabel; 4] = [
        QuadrantLabel::Lalv,
        QuadrantLabel::Halv,
        QuadrantLabel::Lahv,
        QuadrantLabel::Hahv,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadrantLabel::Lalv => "LALV",
            QuadrantLabel::Halv => "HALV",
            QuadrantLabel::Lahv => "LAHV",
            QuadrantLabel::Hahv => "HAHV",
        }
    }

    pub fn high_arousal(self) -> bool {
        matches!(self, QuadrantLabel::Halv | QuadrantLabel::Hahv)
    }

    pub fn high_valence(self) -> bool {
        matches!(self, QuadrantLabel::Lahv | QuadrantLabel::Hahv)
    }
}

impl fmt::Display for QuadrantLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuadrantLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown quadrant label `{s}`")))
    }
}

fn check_rating(axis: &str, value: f64) -> Result<()> {
    if (RATING_MIN..=RATING_MAX).contains(&value) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "{axis} rating {value} outside [{RATING_MIN}, {RATING_MAX}]"
        )))
    }
}

/// Thresholds both ratings at 5; a rating of exactly 5 is low.
pub fn quadrant_label(arousal: f64, valence: f64) -> Result<QuadrantLabel> {
    check_rating("arousal", arousal)?;
    check_rating("valence", valence)?;
    Ok(match (arousal > RATING_THRESHOLD, valence > RATING_THRESHOLD) {
        (false, false) => QuadrantLabel::Lalv,
        (true, false) => QuadrantLabel::Halv,
        (false, true) => QuadrantLabel::Lahv,
        (true, true) => QuadrantLabel::Hahv,
    })
}

/// Recording profile; decides the channel roster, baseline length and
/// subject exclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Deap,
    Amigos,
    Synthetic,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Deap => "deap",
            Profile::Amigos => "amigos",
            Profile::Synthetic => "synthetic",
        }
    }

    /// Baseline length in samples (3 s for DEAP, 5 s for AMIGOS).
    pub fn baseline_len(self) -> usize {
        match self {
            Profile::Deap | Profile::Synthetic => 3 * SAMPLE_RATE,
            Profile::Amigos => 5 * SAMPLE_RATE,
        }
    }

    pub fn excluded_subjects(self) -> &'static [u32] {
        match self {
            Profile::Amigos => &AMIGOS_EXCLUDED_SUBJECTS,
            _ => &[],
        }
    }

    pub fn roster(self) -> ChannelRoster {
        let (eeg, peripheral): (&[&str], &[&str]) = match self {
            Profile::Deap | Profile::Synthetic => (&DEAP_EEG, &DEAP_PERIPHERAL),
            Profile::Amigos => (&AMIGOS_EEG, &AMIGOS_PERIPHERAL),
        };
        ChannelRoster::new(
            eeg.iter().map(|s| s.to_string()).collect(),
            peripheral.iter().map(|s| s.to_string()).collect(),
        )
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deap" => Ok(Profile::Deap),
            "amigos" => Ok(Profile::Amigos),
            "synthetic" => Ok(Profile::Synthetic),
            other => Err(Error::validation(format!("unknown dataset profile `{other}`"))),
        }
    }
}

/// DEAP EEG channels in recording order.
pub const DEAP_EEG: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1",
    "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2",
    "P4", "P8", "PO4", "O2",
];
pub const DEAP_PERIPHERAL: [&str; 8] =
    ["hEOG", "vEOG", "zEMG", "tEMG", "GSR", "Resp", "Plet", "Temp"];
pub const AMIGOS_EEG: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];
pub const AMIGOS_PERIPHERAL: [&str; 3] = ["ECG_R", "ECG_L", "GSR"];

/// Channel names split into EEG and peripheral groups. Signal rows are
/// ordered EEG first, then peripheral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRoster {
    pub eeg: Vec<String>,
    pub peripheral: Vec<String>,
}

impl ChannelRoster {
    pub fn new(eeg: Vec<String>, peripheral: Vec<String>) -> Self {
        ChannelRoster { eeg, peripheral }
    }

    pub fn len(&self) -> usize {
        self.eeg.len() + self.peripheral.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<String> {
        self.eeg.iter().chain(self.peripheral.iter()).cloned().collect()
    }

    /// Row index of `name` in the signal matrix.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.eeg
            .iter()
            .chain(self.peripheral.iter())
            .position(|c| c == name)
    }

    pub fn eeg_rows(&self) -> core::ops::Range<usize> {
        0..self.eeg.len()
    }

    fn validate(&self) -> Result<()> {
        let all = self.all();
        for (i, name) in all.iter().enumerate() {
            if all[..i].contains(name) {
                return Err(Error::validation(format!("duplicate channel `{name}` in roster")));
            }
        }
        Ok(())
    }
}

/// One stimulus presentation.
///
/// `signal` is channel-major: row `c` occupies `signal[c*T..(c+1)*T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject_id: u32,
    pub trial_id: u32,
    pub sample_rate: usize,
    pub channels: Vec<String>,
    n_samples: usize,
    signal: Vec<f32>,
    pub baseline_len: usize,
    pub arousal: f64,
    pub valence: f64,
}

impl TrialRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        subject_id: u32,
        trial_id: u32,
        channels: Vec<String>,
        n_samples: usize,
        signal: Vec<f32>,
        baseline_len: usize,
        arousal: f64,
        valence: f64,
    ) -> Result<Self> {
        let trial = TrialRecord {
            subject_id,
            trial_id,
            sample_rate: SAMPLE_RATE,
            channels,
            n_samples,
            signal,
            baseline_len,
            arousal,
            valence,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn validate(&self) -> Result<()> {
        let id = format!("subject {} trial {}", self.subject_id, self.trial_id);
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::validation(format!(
                "{id}: sample rate {} Hz, expected {SAMPLE_RATE}",
                self.sample_rate
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::validation(format!("{id}: no channels")));
        }
        if self.signal.len() != self.channels.len() * self.n_samples {
            return Err(Error::structural(format!(
                "{id}: signal holds {} samples, expected {} channels × {}",
                self.signal.len(),
                self.channels.len(),
                self.n_samples
            )));
        }
        if self.baseline_len == 0 || self.baseline_len % WINDOW_LEN != 0 {
            return Err(Error::validation(format!(
                "{id}: baseline length {} is not a positive multiple of {WINDOW_LEN}",
                self.baseline_len
            )));
        }
        if self.baseline_len >= self.n_samples {
            return Err(Error::validation(format!(
                "{id}: baseline length {} leaves no stimulus samples (T = {})",
                self.baseline_len, self.n_samples
            )));
        }
        check_rating("arousal", self.arousal)
            .and_then(|_| check_rating("valence", self.valence))
            .map_err(|e| Error::validation(format!("{id}: {e}")))
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn post_baseline_len(&self) -> usize {
        self.n_samples - self.baseline_len
    }

    pub fn signal(&self) -> &[f32] {
        &self.signal
    }

    pub fn channel(&self, row: usize) -> &[f32] {
        &self.signal[row * self.n_samples..(row + 1) * self.n_samples]
    }

    pub fn baseline(&self, row: usize) -> &[f32] {
        &self.channel(row)[..self.baseline_len]
    }

    pub fn stimulus(&self, row: usize) -> &[f32] {
        &self.channel(row)[self.baseline_len..]
    }

    pub fn label(&self) -> QuadrantLabel {
        // Ratings are validated on construction.
        quadrant_label(self.arousal, self.valence).unwrap_or(QuadrantLabel::Lalv)
    }
}

/// A loaded or generated collection of trials sharing one channel roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub profile: Profile,
    pub roster: ChannelRoster,
    pub trials: Vec<TrialRecord>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        profile: Profile,
        roster: ChannelRoster,
        trials: Vec<TrialRecord>,
    ) -> Result<Self> {
        roster.validate()?;
        let names = roster.all();
        for t in &trials {
            if t.channels != names {
                return Err(Error::structural(format!(
                    "subject {} trial {}: channel list does not match the dataset roster",
                    t.subject_id, t.trial_id
                )));
            }
        }
        Ok(Dataset { name: name.into(), profile, roster, trials })
    }
}

/// Parameters for [`synth_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_subjects: u32,
    pub n_trials: u32,
    pub roster: ChannelRoster,
    /// Amplitude of the class-dependent tones.
    pub class_separation: f64,
    /// Standard deviation of additive white noise.
    pub noise_level: f64,
    pub windows_per_trial: usize,
    pub baseline_windows: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_subjects: 2,
            n_trials: 8,
            roster: Profile::Synthetic.roster(),
            class_separation: 1.0,
            noise_level: 0.5,
            windows_per_trial: 60,
            baseline_windows: 3,
        }
    }
}

/// Tone frequencies (Hz) planted by [`synth_dataset`], indexed `[band][class]`.
/// Bands are theta, alpha, beta, gamma; each class gets a distinct frequency in
/// every band and a dominant band equal to its class code.
pub const SYNTH_TONES_HZ: [[f64; 4]; 4] = [
    [4.0, 5.0, 6.0, 7.0],
    [9.0, 10.0, 11.0, 12.0],
    [16.0, 20.0, 24.0, 28.0],
    [33.0, 36.0, 39.0, 42.0],
];

/// Relative amplitude of the non-dominant bands in a synthetic trial.
pub const SYNTH_MINOR_GAIN: f64 = 0.25;

/// Rating centroids the synthetic generator jitters around (arousal, valence),
/// by label code.
pub const SYNTH_RATING_CENTROIDS: [(f64, f64); 4] =
    [(2.95, 3.51), (6.64, 3.07), (3.44, 6.42), (6.58, 7.11)];

/// Generates a seeded dataset whose trials carry planted quadrant labels.
///
/// Labels cycle over trials (`(subject + trial) mod 4`). Every channel of a
/// trial with label `k` carries one tone per EEG band at
/// `SYNTH_TONES_HZ[band][k]`, amplitude `class_separation` in band `k` and
/// `SYNTH_MINOR_GAIN · class_separation` elsewhere, random phases, a random
/// DC offset shared with the baseline, and white noise of standard deviation
/// `noise_level`. The baseline carries only the offset and noise.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    if spec.roster.is_empty() {
        return Err(Error::validation("synthetic dataset needs at least one channel"));
    }
    if !(spec.class_separation >= 0.0 && spec.class_separation.is_finite()) {
        return Err(Error::validation("class_separation must be finite and ≥ 0"));
    }
    if !(spec.noise_level >= 0.0 && spec.noise_level.is_finite()) {
        return Err(Error::validation("noise_level must be finite and ≥ 0"));
    }
    if spec.windows_per_trial == 0 || spec.baseline_windows == 0 {
        return Err(Error::validation(
            "synthetic trials need at least one baseline and one stimulus window",
        ));
    }
    spec.roster.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let names = spec.roster.all();
    let n_ch = names.len();
    let baseline_len = spec.baseline_windows * WINDOW_LEN;
    let n_samples = baseline_len + spec.windows_per_trial * WINDOW_LEN;

    let mut trials = Vec::with_capacity((spec.n_subjects * spec.n_trials) as usize);
    for s in 0..spec.n_subjects {
        for t in 0..spec.n_trials {
            let class = ((s + t) % 4) as usize;
            let (ca, cv) = SYNTH_RATING_CENTROIDS[class];
            let arousal = (ca + rng.random_range(-0.5..0.5)).clamp(RATING_MIN, RATING_MAX);
            let valence = (cv + rng.random_range(-0.5..0.5)).clamp(RATING_MIN, RATING_MAX);

            let mut signal = Vec::with_capacity(n_ch * n_samples);
            for _ in 0..n_ch {
                let offset: f64 = rng.random_range(-20.0..20.0);
                let mut tones = [(0.0f64, 0.0f64, 0.0f64); 4];
                for (band, tone) in tones.iter_mut().enumerate() {
                    let gain = if band == class { 1.0 } else { SYNTH_MINOR_GAIN };
                    let phase = rng.random_range(0.0..2.0 * PI);
                    *tone = (SYNTH_TONES_HZ[band][class], gain * spec.class_separation, phase);
                }
                for i in 0..n_samples {
                    let mut x = offset + spec.noise_level * unit.sample(&mut rng);
                    if i >= baseline_len {
                        let time = i as f64 / SAMPLE_RATE as f64;
                        for &(freq, amp, phase) in &tones {
                            x += amp * libm::sin(2.0 * PI * freq * time + phase);
                        }
                    }
                    signal.push(x as f32);
                }
            }
            trials.push(TrialRecord::new(
                s + 1,
                t + 1,
                names.clone(),
                n_samples,
                signal,
                baseline_len,
                arousal,
                valence,
            )?);
        }
    }
    Dataset::new("synthetic", Profile::Synthetic, spec.roster.clone(), trials)
}

/// Window counts per quadrant label, indexed by label code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub counts: [u64; 4],
}

impl LabelCounts {
    pub fn get(&self, label: QuadrantLabel) -> u64 {
        self.counts[label.code()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts post-baseline windows of `window_len` samples per quadrant label.
pub fn dataset_stats(trials: &[TrialRecord], window_len: usize) -> Result<LabelCounts> {
    if window_len == 0 {
        return Err(Error::validation("window length must be positive"));
    }
    let mut stats = LabelCounts::default();
    for t in trials {
        let post = t.post_baseline_len();
        if post % window_len != 0 {
            return Err(Error::validation(format!(
                "subject {} trial {}: window length {window_len} does not divide {post} post-baseline samples",
                t.subject_id, t.trial_id
            )));
        }
        let label = quadrant_label(t.arousal, t.valence)?;
        stats.counts[label.code()] += (post / window_len) as u64;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn flat_trial(windows: usize, arousal: f64, valence: f64) -> TrialRecord {
        let t = 384 + windows * 128;
        TrialRecord::new(1, 1, vec!["A".into()], t, vec![0.0; t], 384, arousal, valence).unwrap()
    }

    #[test]
    fn quadrant_examples() {
        assert_eq!(quadrant_label(4.0, 4.0).unwrap(), QuadrantLabel::Lalv);
        assert_eq!(quadrant_label(5.0, 5.0).unwrap(), QuadrantLabel::Lalv);
        assert_eq!(quadrant_label(6.64, 3.07).unwrap(), QuadrantLabel::Halv);
        assert_eq!(quadrant_label(3.44, 6.42).unwrap(), QuadrantLabel::Lahv);
        assert_eq!(quadrant_label(6.58, 7.11).unwrap(), QuadrantLabel::Hahv);
    }

    #[test]
    fn quadrant_rejects_out_of_range() {
        assert!(matches!(quadrant_label(0.5, 4.0), Err(Error::Validation(_))));
        assert!(matches!(quadrant_label(4.0, 9.01), Err(Error::Validation(_))));
        assert!(quadrant_label(f64::NAN, 4.0).is_err());
    }

    #[test]
    fn label_codes_are_fixed() {
        for (i, l) in QuadrantLabel::ALL.iter().enumerate() {
            assert_eq!(l.code(), i);
            assert_eq!(QuadrantLabel::from_code(i), Some(*l));
            assert_eq!(l.name().parse::<QuadrantLabel>().unwrap(), *l);
        }
        assert_eq!(QuadrantLabel::from_code(4), None);
    }

    proptest! {
        #[test]
        fn quadrant_is_total_and_partitions(a in 1.0f64..=9.0, v in 1.0f64..=9.0) {
            let l = quadrant_label(a, v).unwrap();
            prop_assert_eq!(l.high_arousal(), a > 5.0);
            prop_assert_eq!(l.high_valence(), v > 5.0);
        }
    }

    #[test]
    fn stats_single_trial() {
        let counts = dataset_stats(&[flat_trial(60, 3.0, 3.0)], 128).unwrap();
        assert_eq!(counts.counts, [60, 0, 0, 0]);
        assert_eq!(counts.total(), 60);
    }

    #[test]
    fn stats_rejects_non_dividing_window() {
        assert!(matches!(
            dataset_stats(&[flat_trial(60, 3.0, 3.0)], 100),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn stats_total_is_trials_times_windows() {
        let trials: Vec<_> = (0..12)
            .map(|i| flat_trial(5, 1.0 + (i % 9) as f64, 9.0 - (i % 9) as f64))
            .collect();
        assert_eq!(dataset_stats(&trials, 128).unwrap().total(), 60);
    }

    #[test]
    fn trial_invariants() {
        let ch = vec!["A".to_string()];
        // baseline not a multiple of 128
        assert!(TrialRecord::new(1, 1, ch.clone(), 512, vec![0.0; 512], 100, 3.0, 3.0).is_err());
        // baseline covers the whole trial
        assert!(TrialRecord::new(1, 1, ch.clone(), 384, vec![0.0; 384], 384, 3.0, 3.0).is_err());
        // signal/channel mismatch
        assert!(matches!(
            TrialRecord::new(1, 1, ch.clone(), 512, vec![0.0; 511], 384, 3.0, 3.0),
            Err(Error::Structural(_))
        ));
        assert!(TrialRecord::new(1, 1, ch, 512, vec![0.0; 512], 384, 3.0, 10.0).is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec { windows_per_trial: 4, ..SynthSpec::default() };
        let a = synth_dataset(&spec, 7).unwrap();
        let b = synth_dataset(&spec, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_dataset(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_labels_are_balanced_and_planted() {
        let spec = SynthSpec { windows_per_trial: 2, ..SynthSpec::default() };
        let ds = synth_dataset(&spec, 1).unwrap();
        assert_eq!(ds.trials.len(), 16);
        let counts = dataset_stats(&ds.trials, 128).unwrap();
        assert_eq!(counts.counts, [8, 8, 8, 8]);
        for t in &ds.trials {
            let planted = ((t.subject_id - 1 + t.trial_id - 1) % 4) as usize;
            assert_eq!(t.label().code(), planted);
        }
    }

    #[test]
    fn synth_rejects_empty_roster() {
        let spec = SynthSpec {
            roster: ChannelRoster::new(vec![], vec![]),
            ..SynthSpec::default()
        };
        assert!(matches!(synth_dataset(&spec, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn amigos_profile_excludes_subjects() {
        assert_eq!(Profile::Amigos.excluded_subjects(), &AMIGOS_EXCLUDED_SUBJECTS);
        assert!(Profile::Deap.excluded_subjects().is_empty());
        assert_eq!(Profile::Amigos.baseline_len(), 640);
        assert_eq!(Profile::Deap.roster().len(), 40);
        assert_eq!(Profile::Amigos.roster().len(), 17);
    }
}
