use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SAMPLE_RATE};

/// Shortest filter ever designed; narrow bands get longer filters.
pub const MIN_TAPS: usize = 129;

/// Hamming-window transition width is about `3.3 · fs / taps`.
const HAMMING_TRANSITION: f64 = 3.3;
const MAX_TRANSITION_HZ: f64 = 4.0;

/// The four EEG rhythms used as separate modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    /// Band edges in Hz.
    pub fn edges(self) -> (f64, f64) {
        match self {
            Band::Theta => (4.0, 7.0),
            Band::Alpha => (8.0, 13.0),
            Band::Beta => (14.0, 30.0),
            Band::Gamma => (31.0, 45.0),
        }
    }

    pub fn spec(self) -> BandSpec {
        let (low, high) = self.edges();
        BandSpec { name: self.name().to_string(), low, high }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Band::ALL
            .iter()
            .copied()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown band `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Result<Self> {
        let spec = BandSpec { name: name.into(), low, high };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        if 0.0 < self.low && self.low < self.high && self.high < nyquist {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "band `{}` needs 0 < low < high < {nyquist} Hz, got {}–{}",
                self.name, self.low, self.high
            )))
        }
    }
}

/// Linear-phase windowed-sinc band-pass filter applied without delay.
///
/// The passband `[low, high]` is kept flat; the transition bands sit outside
/// it, each `min(octave gap, 4 Hz)` wide (upper side also limited by the
/// Nyquist gap), and the length is chosen so a Hamming window fits them.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPassFilter {
    spec: BandSpec,
    taps: Vec<f64>,
    low_cutoff: f64,
    high_cutoff: f64,
}

impl BandPassFilter {
    pub fn design(spec: &BandSpec) -> Result<Self> {
        spec.validate()?;
        let fs = SAMPLE_RATE as f64;
        let nyquist = fs / 2.0;
        let lower_tw = (spec.low / 2.0).min(MAX_TRANSITION_HZ);
        let upper_tw = spec.high.min(nyquist - spec.high).min(MAX_TRANSITION_HZ);
        let narrowest = lower_tw.min(upper_tw);
        let mut n = libm::ceil(HAMMING_TRANSITION * fs / narrowest) as usize;
        n = n.max(MIN_TAPS);
        if n % 2 == 0 {
            n += 1;
        }
        let low_cutoff = spec.low - lower_tw / 2.0;
        let high_cutoff = spec.high + upper_tw / 2.0;

        let centre = (n - 1) as f64 / 2.0;
        let lowpass = |fc: f64, x: f64| {
            if x == 0.0 {
                2.0 * fc / fs
            } else {
                libm::sin(2.0 * PI * fc * x / fs) / (PI * x)
            }
        };
        let mut taps: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 - centre;
                let window = 0.54 - 0.46 * libm::cos(2.0 * PI * i as f64 / (n - 1) as f64);
                window * (lowpass(high_cutoff, x) - lowpass(low_cutoff, x))
            })
            .collect();
        // exact symmetry
        for i in 0..n / 2 {
            taps[n - 1 - i] = taps[i];
        }
        Ok(BandPassFilter { spec: spec.clone(), taps, low_cutoff, high_cutoff })
    }

    pub fn spec(&self) -> &BandSpec {
        &self.spec
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// −6 dB points of the design (Hz).
    pub fn cutoffs(&self) -> (f64, f64) {
        (self.low_cutoff, self.high_cutoff)
    }

    /// Zero-phase amplitude response at `freq` Hz. Real because the taps are
    /// symmetric.
    pub fn response(&self, freq: f64) -> f64 {
        let centre = (self.taps.len() - 1) as f64 / 2.0;
        let w = 2.0 * PI * freq / SAMPLE_RATE as f64;
        self.taps
            .iter()
            .enumerate()
            .map(|(i, h)| h * libm::cos(w * (i as f64 - centre)))
            .sum()
    }

    /// Centred convolution with reflected edges; output has the input's length.
    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let n = self.taps.len();
        let len = signal.len();
        if len < n {
            return Err(Error::validation(format!(
                "signal of {len} samples is shorter than the {n}-tap `{}` filter",
                self.spec.name
            )));
        }
        let half = (n - 1) / 2;
        let mut padded = Vec::with_capacity(len + 2 * half);
        padded.extend((1..=half).rev().map(|i| signal[i]));
        padded.extend_from_slice(signal);
        padded.extend((1..=half).map(|i| signal[len - 1 - i]));
        Ok((0..len)
            .map(|t| {
                padded[t..t + n]
                    .iter()
                    .zip(&self.taps)
                    .map(|(x, h)| x * h)
                    .sum()
            })
            .collect())
    }
}

/// Band-pass filters one channel at 128 Hz.
pub fn band_decompose(signal: &[f64], band: &BandSpec) -> Result<Vec<f64>> {
    BandPassFilter::design(band)?.apply(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn tone(freq: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| libm::sin(2.0 * PI * freq * i as f64 / SAMPLE_RATE as f64 + 0.3))
            .collect()
    }

    /// Total spectral power via FFT (Parseval), skipping `trim` samples at
    /// each edge.
    fn fft_power(x: &[f64], trim: usize) -> f64 {
        let body = &x[trim..x.len() - trim];
        let mut buf: Vec<Complex<f64>> = body.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf.iter().map(|c| c.norm_sqr()).sum::<f64>() / body.len() as f64
    }

    fn power_ratio(band: Band, freq: f64) -> f64 {
        let x = tone(freq, 7680);
        let y = band_decompose(&x, &band.spec()).unwrap();
        fft_power(&y, 256) / fft_power(&x, 256)
    }

    #[test]
    fn ten_hz_tone_through_alpha_and_gamma() {
        assert!(power_ratio(Band::Alpha, 10.0) >= 0.90);
        assert!(power_ratio(Band::Gamma, 10.0) <= 0.05);
    }

    #[test]
    fn every_band_passes_centre_and_rejects_an_octave_out() {
        for band in Band::ALL {
            let (lo, hi) = band.edges();
            assert!(power_ratio(band, (lo + hi) / 2.0) >= 0.90, "{band:?} centre");
            assert!(power_ratio(band, lo / 2.0) <= 0.05, "{band:?} below");
            if 2.0 * hi < 64.0 {
                assert!(power_ratio(band, 2.0 * hi) <= 0.05, "{band:?} above");
            }
        }
    }

    #[test]
    fn passband_ripple_and_octave_stopband() {
        for band in Band::ALL {
            let f = BandPassFilter::design(&band.spec()).unwrap();
            let (lo, hi) = band.edges();
            for i in 0..=100 {
                let freq = lo + (hi - lo) * i as f64 / 100.0;
                let db = 20.0 * libm::log10(f.response(freq).abs());
                assert!(db.abs() <= 0.5, "{band:?} {freq} Hz: {db} dB");
            }
            let stops = (0..=100)
                .map(|i| lo / 2.0 * i as f64 / 100.0)
                .chain((0..=100).map(|i| (2.0 * hi).min(64.0) + (64.0 - (2.0 * hi).min(64.0)) * i as f64 / 100.0));
            for freq in stops {
                let db = 20.0 * libm::log10(f.response(freq).abs().max(1e-300));
                assert!(db <= -40.0, "{band:?} {freq} Hz: {db} dB");
            }
        }
    }

    #[test]
    fn filter_lengths() {
        let theta = BandPassFilter::design(&Band::Theta.spec()).unwrap();
        assert_eq!(theta.len(), 213);
        for band in [Band::Alpha, Band::Beta, Band::Gamma] {
            assert_eq!(BandPassFilter::design(&band.spec()).unwrap().len(), MIN_TAPS);
        }
        let taps = theta.taps();
        for i in 0..taps.len() / 2 {
            assert_eq!(taps[i], taps[taps.len() - 1 - i]);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let y = band_decompose(&vec![0.0; 512], &Band::Beta.spec()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_signal_rejected() {
        assert!(matches!(
            band_decompose(&vec![1.0; 100], &Band::Alpha.spec()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(BandSpec::new("bad", 10.0, 5.0).is_err());
        assert!(BandSpec::new("bad", 0.0, 5.0).is_err());
        assert!(BandSpec::new("bad", 30.0, 64.0).is_err());
        assert_eq!("Alpha".parse::<Band>().unwrap(), Band::Alpha);
    }

    #[test]
    fn linear_and_idempotent_in_band() {
        let spec = Band::Alpha.spec();
        let a = tone(10.0, 1024);
        let b = tone(11.5, 1024);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let fa = band_decompose(&a, &spec).unwrap();
        let fb = band_decompose(&b, &spec).unwrap();
        let fmix = band_decompose(&mix, &spec).unwrap();
        for i in 0..1024 {
            assert!((fmix[i] - (2.0 * fa[i] - 0.5 * fb[i])).abs() < 1e-12);
        }
        let twice = band_decompose(&fa, &spec).unwrap();
        for i in 128..1024 - 128 {
            assert!((twice[i] - fa[i]).abs() < 0.06, "sample {i}");
        }
    }
}
