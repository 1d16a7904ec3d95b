//! Decision-level fusion of classifier channels.
//!
//! Two pieces:
//!
//! * [`bayes_combine`]: the optimal combination of two independent Gaussian
//!   cues under a flat prior, weighting each by its inverse variance.
//! * The centroid-distance fusion. Each label gets a centroid on the
//!   arousal/valence plane; `f(d) = exp(−d²/2)/√(2π)` of the distance between
//!   two centroids says how much a score for one label also supports the
//!   other. Every channel's softmax vector is spread through that matrix
//!   ([`gau_scores`]), weighted by its own dispersion ([`channel_reliability`])
//!   and summed over channels ([`fuse`]).
//!
//! All arithmetic is `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::QuadrantLabel;
use crate::{Error, Result};

/// `1/√(2π)`: the reliability of a label with itself.
pub const RELIABILITY_PEAK: f64 = 0.398_942_280_401_432_7;

/// Tolerance on `Σ p = 1` for incoming probability vectors.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

/// A noisy estimate with Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCue {
    pub estimate: f64,
    pub variance: f64,
}

impl GaussianCue {
    pub fn new(estimate: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::validation(format!(
                "cue variance must be positive and finite, got {variance}"
            )));
        }
        if !estimate.is_finite() {
            return Err(Error::validation("cue estimate must be finite"));
        }
        Ok(GaussianCue { estimate, variance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueCombination {
    pub estimate: f64,
    pub weight_a: f64,
    pub weight_b: f64,
    /// Variance of the combined estimate, `1 / (1/σa² + 1/σb²)`.
    pub variance: f64,
}

/// Inverse-variance weighted average of two cues.
pub fn bayes_combine(a: GaussianCue, b: GaussianCue) -> Result<CueCombination> {
    let a = GaussianCue::new(a.estimate, a.variance)?;
    let b = GaussianCue::new(b.estimate, b.variance)?;
    let (pa, pb) = (1.0 / a.variance, 1.0 / b.variance);
    let weight_a = pa / (pa + pb);
    let weight_b = pb / (pa + pb);
    Ok(CueCombination {
        estimate: weight_a * a.estimate + weight_b * b.estimate,
        weight_a,
        weight_b,
        variance: 1.0 / (pa + pb),
    })
}

/// Softmax output of one classifier channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub channel: String,
    probs: Vec<f64>,
}

impl ClassScores {
    pub fn new(channel: impl Into<String>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::validation("class scores need at least two labels"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("class probabilities must lie in [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::validation(format!("class probabilities sum to {sum}, not 1")));
        }
        Ok(ClassScores { channel: channel.into(), probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One (arousal, valence) point per label, indexed by label code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCentroids {
    points: Vec<(f64, f64)>,
}

impl LabelCentroids {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("need centroids for at least two labels"));
        }
        for &(a, v) in &points {
            if !((1.0..=9.0).contains(&a) && (1.0..=9.0).contains(&v)) {
                return Err(Error::validation(format!("centroid ({a}, {v}) outside [1, 9]²")));
            }
        }
        Ok(LabelCentroids { points })
    }

    /// Mean ratings per quadrant reported for DEAP: LALV (2.95, 3.51),
    /// HALV (6.64, 3.07), LAHV (3.44, 6.42), HAHV (6.58, 7.11).
    pub fn paper_defaults() -> Self {
        LabelCentroids {
            points: vec![(2.95, 3.51), (6.64, 3.07), (3.44, 6.42), (6.58, 7.11)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn get(&self, label: usize) -> (f64, f64) {
        self.points[label]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-label mean of (arousal, valence) ratings.
pub fn class_centroids(ratings: &[(f64, f64, QuadrantLabel)]) -> Result<LabelCentroids> {
    let mut sums = [(0.0f64, 0.0f64, 0usize); 4];
    for &(a, v, label) in ratings {
        let s = &mut sums[label.code()];
        s.0 += a;
        s.1 += v;
        s.2 += 1;
    }
    let mut points = Vec::with_capacity(4);
    for (code, &(a, v, n)) in sums.iter().enumerate() {
        if n == 0 {
            return Err(Error::validation(format!(
                "no ratings for label {}",
                QuadrantLabel::ALL[code]
            )));
        }
        points.push((a / n as f64, v / n as f64));
    }
    LabelCentroids::new(points)
}

/// `F[i][j] = f(d_ij)` with `d_ij` the Euclidean distance between centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMatrix {
    n: usize,
    distances: Vec<f64>,
    values: Vec<f64>,
}

impl ReliabilityMatrix {
    pub fn n_labels(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Standard normal density at `d`.
pub fn score_reliability(d: f64) -> f64 {
    RELIABILITY_PEAK * libm::exp(-d * d / 2.0)
}

pub fn reliability_matrix(centroids: &LabelCentroids) -> ReliabilityMatrix {
    let n = centroids.len();
    let mut distances = vec![0.0; n * n];
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ai, vi) = centroids.get(i);
            let (aj, vj) = centroids.get(j);
            let d = libm::hypot(ai - aj, vi - vj);
            distances[i * n + j] = d;
            values[i * n + j] = score_reliability(d);
        }
    }
    ReliabilityMatrix { n, distances, values }
}

/// `GauPR[j] = Σ_i pr[i] · F[i][j]`.
pub fn gau_scores(pr: &ClassScores, f: &ReliabilityMatrix) -> Result<Vec<f64>> {
    if pr.len() != f.n {
        return Err(Error::structural(format!(
            "channel `{}` has {} scores but the reliability matrix covers {} labels",
            pr.channel,
            pr.len(),
            f.n
        )));
    }
    Ok((0..f.n)
        .map(|j| pr.probs.iter().enumerate().map(|(i, p)| p * f.get(i, j)).sum())
        .collect())
}

/// Sample standard deviation (divisor NL−1) of a channel's GauPR vector.
pub fn channel_reliability(gau: &[f64]) -> Result<f64> {
    let nl = gau.len();
    if nl < 2 {
        return Err(Error::validation("channel reliability needs at least two labels"));
    }
    if gau.iter().all(|&g| g == gau[0]) {
        return Ok(0.0);
    }
    let mean = gau.iter().sum::<f64>() / nl as f64;
    let ss: f64 = gau.iter().map(|g| (g - mean) * (g - mean)).sum();
    Ok(libm::sqrt(ss / (nl - 1) as f64))
}

/// A channel's reliability-weighted scores and its dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDecision {
    pub channel: String,
    pub gau_pr: Vec<f64>,
    pub reliability: f64,
}

impl ChannelDecision {
    pub fn new(channel: impl Into<String>, gau_pr: Vec<f64>) -> Result<Self> {
        if gau_pr.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::validation("GauPR entries must be finite and non-negative"));
        }
        let reliability = channel_reliability(&gau_pr)?;
        Ok(ChannelDecision { channel: channel.into(), gau_pr, reliability })
    }

    pub fn from_scores(pr: &ClassScores, f: &ReliabilityMatrix) -> Result<Self> {
        Self::new(pr.channel.clone(), gau_scores(pr, f)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    /// Unnormalized fused score per label.
    pub scores: Vec<f64>,
    /// Label code of the largest score, lowest code on ties.
    pub label: usize,
    pub decisions: Vec<ChannelDecision>,
}

impl FusionResult {
    pub fn quadrant(&self) -> Option<QuadrantLabel> {
        QuadrantLabel::from_code(self.label)
    }
}

/// `F[j] = Σ_c GauPR_c[j] · S_c`, label = argmax.
///
/// Each sum adds its terms in ascending order so the result does not depend
/// on channel order.
pub fn fuse(decisions: Vec<ChannelDecision>) -> Result<FusionResult> {
    let nl = match decisions.first() {
        Some(d) => d.gau_pr.len(),
        None => return Err(Error::validation("fusion needs at least one channel")),
    };
    if let Some(bad) = decisions.iter().find(|d| d.gau_pr.len() != nl) {
        return Err(Error::structural(format!(
            "channel `{}` has {} labels, expected {nl}",
            bad.channel,
            bad.gau_pr.len()
        )));
    }
    let mut terms = Vec::with_capacity(decisions.len());
    let scores: Vec<f64> = (0..nl)
        .map(|j| {
            terms.clear();
            terms.extend(decisions.iter().map(|d| d.gau_pr[j] * d.reliability));
            terms.sort_by(f64::total_cmp);
            terms.iter().sum()
        })
        .collect();
    let label = argmax(&scores);
    Ok(FusionResult { scores, label, decisions })
}

/// Reliability matrix → GauPR → channel reliability → fused label.
pub fn fuse_pipeline(scores: &[ClassScores], centroids: &LabelCentroids) -> Result<FusionResult> {
    if scores.is_empty() {
        return Err(Error::validation("fusion needs at least one channel"));
    }
    let f = reliability_matrix(centroids);
    let decisions = scores
        .iter()
        .map(|s| ChannelDecision::from_scores(s, &f))
        .collect::<Result<Vec<_>>>()?;
    fuse(decisions)
}
