use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Windows are assigned independently; one trial may span folds.
    #[default]
    Segment,
    /// Whole trials are assigned to folds.
    Trial,
}

impl SplitMode {
    pub fn name(self) -> &'static str {
        match self {
            SplitMode::Segment => "segment",
            SplitMode::Trial => "trial",
        }
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "segment" => Ok(SplitMode::Segment),
            "trial" => Ok(SplitMode::Trial),
            other => Err(Error::validation(format!("unknown split mode `{other}` (segment|trial)"))),
        }
    }
}

/// Assignment of window indices to `k` folds; each fold's list is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub mode: SplitMode,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_windows(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Fold number of every window.
    pub fn fold_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_windows()];
        for (f, idx) in self.folds.iter().enumerate() {
            for &i in idx {
                out[i] = f;
            }
        }
        out
    }

    /// Order-sensitive fingerprint used to check that runs share a plan.
    pub fn digest(&self) -> u64 {
        self.folds.iter().enumerate().fold(seed::name_tag(self.mode.name()), |h, (f, idx)| {
            idx.iter().fold(seed::derive(h, f as u64), |h, &i| seed::derive(h, i as u64))
        })
    }
}

/// Shuffles `units` within each label group, then deals the concatenated
/// groups round-robin so every fold gets an equal share of every label.
fn deal(units: BTreeMap<usize, Vec<usize>>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order = Vec::new();
    for (_, mut group) in units {
        group.shuffle(rng);
        order.extend(group);
    }
    let mut bins = vec![Vec::new(); k];
    for (i, unit) in order.into_iter().enumerate() {
        bins[i % k].push(unit);
    }
    bins
}

/// `k`-fold plan over `n_windows` windows, stratified by label.
///
/// Segment mode deals windows, so fold sizes differ by at most one. Trial
/// mode deals whole trials (keyed by `trial_of_window`), so trial counts per
/// fold differ by at most one and no trial spans two folds.
pub fn kfold_split(
    n_windows: usize,
    trial_of_window: &[u64],
    labels: &[usize],
    k: usize,
    mode: SplitMode,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::validation(format!("need at least 2 folds, got {k}")));
    }
    if k > n_windows {
        return Err(Error::validation(format!("{k} folds requested for only {n_windows} windows")));
    }
    if trial_of_window.len() != n_windows || labels.len() != n_windows {
        return Err(Error::structural(format!(
            "{n_windows} windows but {} trial ids and {} labels",
            trial_of_window.len(),
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, seed::name_tag("folds")));
    let folds = match mode {
        SplitMode::Segment => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &y) in labels.iter().enumerate() {
                groups.entry(y).or_default().push(i);
            }
            deal(groups, k, &mut rng)
        }
        SplitMode::Trial => {
            let mut members: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, &t) in trial_of_window.iter().enumerate() {
                members.entry(t).or_default().push(i);
            }
            if members.len() < k {
                return Err(Error::validation(format!(
                    "{k} folds requested for only {} trials",
                    members.len()
                )));
            }
            let trials: Vec<Vec<usize>> = members.into_values().collect();
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (t, windows) in trials.iter().enumerate() {
                groups.entry(labels[windows[0]]).or_default().push(t);
            }
            deal(groups, k, &mut rng)
                .into_iter()
                .map(|ts| ts.into_iter().flat_map(|t| trials[t].iter().copied()).collect())
                .collect()
        }
    };
    let folds = folds
        .into_iter()
        .map(|mut f: Vec<usize>| {
            f.sort_unstable();
            f
        })
        .collect();
    Ok(FoldPlan { k, mode, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(plan: &FoldPlan) -> Vec<usize> {
        let mut s: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn equal_division() {
        let n = 76_800;
        let trials: Vec<u64> = (0..n as u64).map(|i| i / 60).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i / 60) % 4).collect();
        let plan = kfold_split(n, &trials, &labels, 10, SplitMode::Segment, 0).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 7680));
    }

    #[test]
    fn balanced_remainder() {
        let n = 103;
        let trials: Vec<u64> = (0..n as u64).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 4).collect();
        let plan = kfold_split(n, &trials, &labels, 10, SplitMode::Segment, 5).unwrap();
        assert_eq!(sizes(&plan), [10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kfold_split(5, &[0; 5], &[0; 5], 10, SplitMode::Segment, 0),
            Err(Error::Validation(_))
        ));
        assert!(kfold_split(20, &[0; 20], &[0; 20], 10, SplitMode::Trial, 0).is_err());
        assert!(matches!(
            kfold_split(20, &[0; 19], &[0; 20], 10, SplitMode::Segment, 0),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn stratified_by_label() {
        let n = 400;
        let trials: Vec<u64> = (0..n as u64).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let plan = kfold_split(n, &trials, &labels, 10, SplitMode::Segment, 9).unwrap();
        for f in &plan.folds {
            for y in 0..4 {
                assert_eq!(f.iter().filter(|&&i| labels[i] == y).count(), 10);
            }
        }
    }

    proptest! {
        #[test]
        fn folds_partition_and_respect_trials(
            n_trials in 10usize..40,
            per_trial in 1usize..8,
            k in 2usize..11,
            seed in any::<u64>(),
            trial_mode in any::<bool>(),
        ) {
            let n = n_trials * per_trial;
            let trials: Vec<u64> = (0..n).map(|i| (i / per_trial) as u64 * 3 + 1).collect();
            let labels: Vec<usize> = (0..n).map(|i| (i / per_trial) % 4).collect();
            let mode = if trial_mode { SplitMode::Trial } else { SplitMode::Segment };
            let plan = kfold_split(n, &trials, &labels, k, mode, seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in &plan.folds {
                for &i in f {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let s = sizes(&plan);
            let unit = if trial_mode { per_trial } else { 1 };
            prop_assert!(s[s.len() - 1] - s[0] <= unit);
            if trial_mode {
                let fold_of = plan.fold_of();
                for i in 1..n {
                    if trials[i] == trials[i - 1] {
                        prop_assert_eq!(fold_of[i], fold_of[i - 1]);
                    }
                }
            }
            prop_assert_eq!(&plan, &kfold_split(n, &trials, &labels, k, mode, seed).unwrap());
        }
    }
}
