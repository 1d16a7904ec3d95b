//! Baseline removal, segmentation, normalization, electrode mapping and band
//! decomposition.
//!
//! Windows are held as `f64` so that subtracting and re-adding the baseline
//! mean is exact; clips handed to the classifiers are `f32`.

mod filter;
mod layout;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use filter::{band_decompose, Band, BandPassFilter, BandSpec, MIN_TAPS};
pub use layout::{
    topo_map, ChannelClip, ElectrodeLayout, TopoClip, WindowRef, CANONICAL_LAYOUT, GRID_SIZE,
};

use crate::dataset::TrialRecord;
use crate::{Error, Result, WINDOW_LEN};

/// Standard deviations below this are treated as zero by [`zscore`].
pub const ZSCORE_EPSILON: f64 = 1e-8;

/// Dense row-major matrix; rows are channels, columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::structural(format!(
                "matrix data has {} entries, expected {rows}×{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.as_ref().len() != cols {
                return Err(Error::structural("ragged rows"));
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Columns `start..start+len` of every row.
    pub fn columns(&self, start: usize, len: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, len);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..start + len]);
        }
        out
    }
}

/// Per-channel mean of the baseline segments (C×L).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMean(Matrix);

impl BaselineMean {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n_channels(&self) -> usize {
        self.0.rows
    }

    pub fn segment_len(&self) -> usize {
        self.0.cols
    }

    /// Baseline mean over the selected signal rows of a trial.
    pub fn of_trial(trial: &TrialRecord, rows: &[usize], seg_len: usize) -> Result<Self> {
        let baseline: Vec<&[f32]> = rows.iter().map(|&r| trial.baseline(r)).collect();
        baseline_mean(&baseline, seg_len)
    }
}

/// `out[c][t] = (1/N) Σ_n baseline[c][n·L + t]` for a C×(N·L) baseline.
pub fn baseline_mean<R: AsRef<[f32]>>(baseline: &[R], seg_len: usize) -> Result<BaselineMean> {
    let width = baseline.first().map_or(0, |r| r.as_ref().len());
    if seg_len == 0 || width == 0 || width % seg_len != 0 {
        return Err(Error::validation(format!(
            "baseline width {width} is not a positive multiple of segment length {seg_len}"
        )));
    }
    let n_seg = width / seg_len;
    let mut out = Matrix::zeros(baseline.len(), seg_len);
    for (c, row) in baseline.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != width {
            return Err(Error::structural("baseline rows have different lengths"));
        }
        for (t, slot) in out.row_mut(c).iter_mut().enumerate() {
            let sum: f64 = (0..n_seg).map(|n| f64::from(row[n * seg_len + t])).sum();
            // Stored at f32 precision so that `(x - m) + m == x` holds exactly in f64.
            *slot = f64::from((sum / n_seg as f64) as f32);
        }
    }
    if out.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("baseline contains non-finite samples"));
    }
    Ok(BaselineMean(out))
}

/// Post-baseline signal of the selected rows with `mean` subtracted from each
/// consecutive L-sample stretch, kept continuous (C×(T−T_b)).
pub fn baseline_corrected(trial: &TrialRecord, rows: &[usize], mean: &BaselineMean) -> Result<Matrix> {
    let seg = mean.segment_len();
    if mean.n_channels() != rows.len() {
        return Err(Error::structural(format!(
            "baseline mean has {} channels, trial selection has {}",
            mean.n_channels(),
            rows.len()
        )));
    }
    let post = trial.post_baseline_len();
    if post % seg != 0 {
        return Err(Error::validation(format!(
            "post-baseline length {post} is not a multiple of {seg}"
        )));
    }
    let mut out = Matrix::zeros(rows.len(), post);
    for (c, &r) in rows.iter().enumerate() {
        let m = mean.0.row(c);
        for (i, (dst, &x)) in out.row_mut(c).iter_mut().zip(trial.stimulus(r)).enumerate() {
            *dst = f64::from(x) - m[i % seg];
        }
    }
    Ok(out)
}

/// Cuts a C×T matrix into consecutive C×L windows.
pub fn segment(signal: &Matrix, seg_len: usize) -> Result<Vec<Matrix>> {
    if seg_len == 0 || signal.cols % seg_len != 0 {
        return Err(Error::validation(format!(
            "signal length {} is not a multiple of window length {seg_len}",
            signal.cols
        )));
    }
    Ok((0..signal.cols / seg_len)
        .map(|w| signal.columns(w * seg_len, seg_len))
        .collect())
}

/// Window `w`, entry `[c][t]` = `signal[c][T_b + w·L + t] − M[c][t]`, over
/// every channel of the trial.
pub fn remove_baseline_and_segment(trial: &TrialRecord, mean: &BaselineMean) -> Result<Vec<Matrix>> {
    if mean.n_channels() != trial.n_channels() {
        return Err(Error::structural(format!(
            "baseline mean has {} channels, trial has {}",
            mean.n_channels(),
            trial.n_channels()
        )));
    }
    let rows: Vec<usize> = (0..trial.n_channels()).collect();
    let corrected = baseline_corrected(trial, &rows, mean)?;
    segment(&corrected, mean.segment_len())
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n < 2 {
        return (if n == 1 { sum } else { 0.0 }, 0.0);
    }
    let mean = sum / n as f64;
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}

fn standardize(xs: &mut [f64]) {
    let (mean, std) = mean_std(xs.iter().copied());
    if std < ZSCORE_EPSILON {
        xs.iter_mut().for_each(|x| *x = 0.0);
    } else {
        xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
    }
}

/// Per row: `(x − mean) / std` with the sample standard deviation; rows whose
/// std is below [`ZSCORE_EPSILON`] become zeros.
pub fn zscore(window: &Matrix) -> Matrix {
    let mut out = window.clone();
    zscore_in_place(&mut out);
    out
}

pub fn zscore_in_place(window: &mut Matrix) {
    for r in 0..window.rows {
        standardize(window.row_mut(r));
    }
}

/// Per column (one time sample across all channels).
pub fn zscore_frames(window: &mut Matrix) {
    let mut frame = vec![0.0; window.rows];
    for t in 0..window.cols {
        for (r, f) in frame.iter_mut().enumerate() {
            *f = window.get(r, t);
        }
        standardize(&mut frame);
        for (r, f) in frame.iter().enumerate() {
            window.data[r * window.cols + t] = *f;
        }
    }
}

/// Which samples share one mean/std in z-score normalization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZScoreScope {
    /// Each channel within each window.
    #[default]
    Window,
    /// Each channel over the whole post-baseline trial.
    Trial,
    /// Each time sample across channels.
    Frame,
}

impl ZScoreScope {
    pub fn name(self) -> &'static str {
        match self {
            ZScoreScope::Window => "window",
            ZScoreScope::Trial => "trial",
            ZScoreScope::Frame => "frame",
        }
    }
}

impl FromStr for ZScoreScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "window" => Ok(ZScoreScope::Window),
            "trial" => Ok(ZScoreScope::Trial),
            "frame" => Ok(ZScoreScope::Frame),
            other => Err(Error::validation(format!("unknown z-score scope `{other}`"))),
        }
    }
}

/// Full per-trial chain for a group of rows: baseline mean, baseline removal,
/// optional band-pass on the continuous corrected signal, z-score, and 1 s
/// windows.
pub fn trial_windows(
    trial: &TrialRecord,
    rows: &[usize],
    filter: Option<&BandPassFilter>,
    scope: ZScoreScope,
) -> Result<Vec<Matrix>> {
    let mean = BaselineMean::of_trial(trial, rows, WINDOW_LEN)?;
    let mut corrected = baseline_corrected(trial, rows, &mean)?;
    if let Some(f) = filter {
        for r in 0..corrected.rows {
            let filtered = f.apply(corrected.row(r))?;
            corrected.row_mut(r).copy_from_slice(&filtered);
        }
    }
    if scope == ZScoreScope::Trial {
        zscore_in_place(&mut corrected);
    }
    let mut windows = segment(&corrected, WINDOW_LEN)?;
    for w in &mut windows {
        match scope {
            ZScoreScope::Window => zscore_in_place(w),
            ZScoreScope::Frame => zscore_frames(w),
            ZScoreScope::Trial => {}
        }
    }
    Ok(windows)
}
