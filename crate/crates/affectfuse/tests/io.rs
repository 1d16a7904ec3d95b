use std::fs;
use std::path::Path;

use affectfuse::checkpoint::load_model;
use affectfuse::clips::{read_clip, write_clips};
use affectfuse::config::RunConfig;
use affectfuse::manifest::{load_dataset, load_manifest, save_dataset, Manifest, TrialEntry};
use affectfuse::runner::run_experiment;
use affectfuse_core::dataset::{
    synth_dataset, ChannelRoster, Profile, SynthSpec, DEAP_EEG, DEAP_PERIPHERAL, SYNTH_TONES_HZ,
};
use affectfuse_core::experiment::{prepare_modality, Experiment, Modality};
use affectfuse_core::nnet::predict_proba;
use affectfuse_core::preprocess::{Band, ElectrodeLayout, ZScoreScope, GRID_SIZE};
use affectfuse_core::{SAMPLE_RATE, WINDOW_LEN};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn write_blob(path: &Path, n: usize) {
    let bytes: Vec<u8> = (0..n).flat_map(|i| ((i % 97) as f32 * 0.01).to_le_bytes()).collect();
    fs::write(path, bytes).unwrap();
}

fn entry(subject: u32, trial: u32, blob: &str, offset: u64, shape: [usize; 2]) -> TrialEntry {
    TrialEntry {
        subject,
        trial,
        blob: blob.into(),
        offset,
        shape,
        baseline_len: None,
        arousal: 1.0 + (trial % 9) as f64,
        valence: 9.0 - (subject % 9) as f64,
        label: None,
    }
}

fn deap_manifest(trials: Vec<TrialEntry>) -> Manifest {
    Manifest {
        dataset: "deap".into(),
        profile: Profile::Deap,
        sample_rate: SAMPLE_RATE,
        channels: Profile::Deap.roster(),
        subjects: vec![],
        trials,
    }
}

#[test]
fn deap_shaped_manifest_loads_every_trial_in_order() {
    let dir = tempfile::tempdir().unwrap();
    // one shared blob per subject; 40 channels × (baseline + one window)
    let shape = [40, 384 + 128];
    let per = (shape[0] * shape[1] * 4) as u64;
    let mut trials = Vec::new();
    for s in 1..=32u32 {
        let blob = format!("s{s:02}.f32");
        write_blob(&dir.path().join(&blob), 40 * shape[0] * shape[1]);
        for t in 1..=40u32 {
            trials.push(entry(s, t, &blob, (t as u64 - 1) * per, shape));
        }
    }
    let ds = load_manifest(&deap_manifest(trials), dir.path()).unwrap();
    assert_eq!(ds.trials.len(), 1280);
    assert_eq!((ds.trials[41].subject_id, ds.trials[41].trial_id), (2, 2));
    assert!(ds.trials.iter().all(|t| t.n_channels() == 40 && t.baseline_len == 384));
}

#[test]
fn short_blob_is_structural() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(&dir.path().join("a.f32"), 40 * 8000);
    let err = load_manifest(&deap_manifest(vec![entry(1, 1, "a.f32", 0, [40, 8064])]), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("structural") && msg.contains("subject 1 trial 1"), "{msg}");
}

#[test]
fn missing_blob_names_the_trial() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_manifest(&deap_manifest(vec![entry(3, 7, "gone.f32", 0, [40, 512])]), dir.path()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("subject 3 trial 7") && msg.contains("gone.f32"), "{msg}");
}

#[test]
fn out_of_range_rating_is_validation() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(&dir.path().join("a.f32"), 40 * 512);
    let mut e = entry(1, 1, "a.f32", 0, [40, 512]);
    e.arousal = 9.5;
    let err = load_manifest(&deap_manifest(vec![e]), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn roster_mismatch_and_bad_json() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(&dir.path().join("a.f32"), 32 * 512);
    let err = load_manifest(&deap_manifest(vec![entry(1, 1, "a.f32", 0, [32, 512])]), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let path = dir.path().join("m.json");
    fs::write(&path, "{\"dataset\": 3}").unwrap();
    assert_eq!(load_dataset(&path).unwrap_err().exit_code(), 2);
}

fn small_roster(eeg: usize, peripheral: usize) -> ChannelRoster {
    ChannelRoster::new(
        DEAP_EEG[..eeg].iter().map(|s| s.to_string()).collect(),
        DEAP_PERIPHERAL[..peripheral].iter().map(|s| s.to_string()).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn save_load_round_trip(
        subjects in 1u32..4,
        trials in 1u32..5,
        eeg in 0usize..4,
        peripheral in 1usize..3,
        windows in 1usize..3,
        seed in any::<u64>(),
    ) {
        let spec = SynthSpec {
            n_subjects: subjects,
            n_trials: trials,
            roster: small_roster(eeg, peripheral),
            windows_per_trial: windows,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(&ds, dir.path()).unwrap();
        prop_assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}

/// Least-squares amplitudes of sinusoids at `freqs` (plus a constant) in `x`.
fn tone_amplitudes(x: &[f32], freqs: &[f64]) -> Vec<f64> {
    let n = x.len();
    let cols = 1 + 2 * freqs.len();
    let a = DMatrix::from_fn(n, cols, |i, c| {
        let t = i as f64 / SAMPLE_RATE as f64;
        match c {
            0 => 1.0,
            c => {
                let w = 2.0 * std::f64::consts::PI * freqs[(c - 1) / 2] * t;
                if c % 2 == 1 { w.sin() } else { w.cos() }
            }
        }
    });
    let b = DVector::from_iterator(n, x.iter().map(|&v| v as f64));
    let coef = a.svd(true, true).solve(&b, 1e-12).unwrap();
    (0..freqs.len()).map(|k| coef[1 + 2 * k].hypot(coef[2 + 2 * k])).collect()
}

#[test]
fn alpha_clips_carry_the_planted_alpha_tone() {
    let spec = SynthSpec {
        n_subjects: 1,
        n_trials: 8,
        roster: small_roster(4, 0),
        class_separation: 2.0,
        noise_level: 0.2,
        windows_per_trial: 4,
        baseline_windows: 3,
    };
    let ds = synth_dataset(&spec, 17).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let index = write_clips(&ds, Some(Band::Alpha), ZScoreScope::Window, &ElectrodeLayout::canonical(), dir.path())
        .unwrap();
    let layout = ElectrodeLayout::canonical();
    let (r, c) = layout.position(DEAP_EEG[0]).unwrap();
    let cell = (r * GRID_SIZE + c) * WINDOW_LEN;
    let alpha = &SYNTH_TONES_HZ[1];
    let mut hits = 0;
    for (i, w) in index.windows.iter().enumerate() {
        let clip = read_clip(dir.path(), &index.blobs[0], i).unwrap();
        let amps = tone_amplitudes(&clip[cell..cell + WINDOW_LEN], alpha);
        let best = (0..4).max_by(|&a, &b| amps[a].total_cmp(&amps[b])).unwrap();
        let class = ["LALV", "HALV", "LAHV", "HAHV"].iter().position(|l| *l == w.label).unwrap();
        hits += usize::from(best == class);
    }
    assert_eq!(hits, index.windows.len());
}

#[test]
fn checkpoints_reproduce_held_out_scores() {
    let spec = SynthSpec {
        n_subjects: 1,
        n_trials: 8,
        roster: small_roster(0, 1),
        class_separation: 2.0,
        noise_level: 0.3,
        windows_per_trial: 3,
        baseline_windows: 3,
    };
    let ds = synth_dataset(&spec, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, &dir.path().join("data")).unwrap();
    let out = dir.path().join("out");
    let mut cfg = RunConfig::default();
    for (k, v) in [("modalities", "hEOG"), ("folds", "2"), ("epochs", "2"), ("batch", "8"), ("arch", "compact")] {
        cfg.set(k, v).unwrap();
    }
    cfg.manifest = Some(manifest);
    cfg.out = Some(out.clone());
    cfg.checkpoints = true;
    let result = run_experiment(&cfg, 1).unwrap();

    let data = prepare_modality(&ds, &Modality::Peripheral("hEOG".into()), &ElectrodeLayout::canonical(), ZScoreScope::Window)
        .unwrap();
    let run = &result.runs[0];
    let plan = Experiment::new(&ds, vec![data.clone()], cfg.experiment_config().unwrap()).unwrap().plan;
    assert_eq!(plan.digest(), run.plan_digest);
    let fold_of = plan.fold_of();
    for fold in 0..2 {
        let (model, header) = load_model::<f32>(&out.join(format!("models/hEOG_fold{fold:02}.afck"))).unwrap();
        assert_eq!(header.fold, Some(fold));
        for i in (0..data.examples.len()).filter(|&i| fold_of[i] == fold) {
            let p = predict_proba(&model, data.examples.input(i)).unwrap();
            for (a, b) in p.iter().zip(&run.scores[i]) {
                assert!((a - b).abs() < 1e-6, "window {i}: {a} vs {b}");
            }
        }
    }
}
