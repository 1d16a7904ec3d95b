use affectfuse_core::dataset::{synth_dataset, SynthSpec};
use affectfuse_core::nnet::{
    adam_update, predict_proba, train, ActShape, AdamConfig, AdamState, ArchTag, Architecture,
    CnnWidths, Examples, LayerSpec, Mode, Model, Padding, TrainConfig,
};
use affectfuse_core::preprocess::{trial_windows, ZScoreScope};
use affectfuse_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TINY: CnnWidths = CnnWidths { conv_maps: [2, 2], dense_units: 4, keep_prob: 0.5 };

fn tiny_3d() -> Architecture {
    Architecture::cnn3d_with(4, TINY, [3, 3, 8]).unwrap()
}

fn tiny_1d() -> Architecture {
    let w = CnnWidths { conv_maps: [3, 4], dense_units: 6, keep_prob: 0.5 };
    Architecture::cnn1d_with(4, w, 16).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central differences over every parameter; returns the worst relative
/// error `|a − n| / max(|a|, |n|, 1e-6)`.
fn max_grad_error(model: &Model<f64>, batch: &[Vec<f64>], labels: &[usize], mode: Mode) -> f64 {
    const H: f64 = 1e-5;
    let refs: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
    let (_, analytic) = model.loss_and_grad(&refs, labels, mode).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for t in 0..analytic.len() {
        for i in 0..analytic[t].len() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + H;
            let up = probe.loss(&refs, labels, mode).unwrap();
            probe.params_mut()[t][i] = orig - H;
            let down = probe.loss(&refs, labels, mode).unwrap();
            probe.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic[t][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn gradient_check_both_architectures() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for arch in [tiny_3d(), tiny_1d()] {
        let count = arch.param_count().unwrap();
        assert!(count <= 2000, "{count} parameters");
        let mut model = Model::<f64>::new(arch.clone(), 5).unwrap();
        // non-zero biases so every code path is exercised
        for t in (1..model.params().len()).step_by(2) {
            let n = model.params()[t].len();
            model.params_mut()[t] = random_vec(&mut rng, n).into_iter().map(|v| 0.1 * v).collect();
        }
        let batch: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, arch.input_len())).collect();
        let labels = [0, 3, 1, 2];
        for mode in [Mode::Eval, Mode::Train { seed: 77 }] {
            let err = max_grad_error(&model, &batch, &labels, mode);
            assert!(err < 1e-4, "{:?} {mode:?}: max relative error {err:e}", arch.tag);
        }
    }
    assert!(start.elapsed().as_secs() < 60);
}

/// Independent "same"-padded convolution over `[c][h][w][d]` volumes with
/// `(k − 1) / 2` zeros before each axis.
fn naive_conv(
    x: &[f64],
    [c_in, h, w, d]: [usize; 4],
    weights: &[f64],
    bias: &[f64],
    [kh, kw, kd]: [usize; 3],
) -> Vec<f64> {
    let c_out = bias.len();
    let mut out = vec![0.0; c_out * h * w * d];
    for o in 0..c_out {
        for i in 0..h {
            for j in 0..w {
                for t in 0..d {
                    let mut acc = bias[o];
                    for c in 0..c_in {
                        for a in 0..kh {
                            for b in 0..kw {
                                for e in 0..kd {
                                    let ii = i as isize + a as isize - ((kh - 1) / 2) as isize;
                                    let jj = j as isize + b as isize - ((kw - 1) / 2) as isize;
                                    let tt = t as isize + e as isize - ((kd - 1) / 2) as isize;
                                    if ii < 0 || jj < 0 || tt < 0 {
                                        continue;
                                    }
                                    let (ii, jj, tt) = (ii as usize, jj as usize, tt as usize);
                                    if ii >= h || jj >= w || tt >= d {
                                        continue;
                                    }
                                    let wi = (((o * c_in + c) * kh + a) * kw + b) * kd + e;
                                    acc += weights[wi] * x[((c * h + ii) * w + jj) * d + tt];
                                }
                            }
                        }
                    }
                    out[((o * h + i) * w + j) * d + t] = acc;
                }
            }
        }
    }
    out
}

fn single_layer(input: ActShape, layer: LayerSpec, tag: ArchTag) -> Architecture {
    Architecture { tag, input, layers: vec![layer], n_labels: 2 }
}

#[test]
fn convolution_matches_nested_loops() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let one_d = case % 2 == 1;
        let c_in = rng.random_range(1..=3);
        let c_out = rng.random_range(1..=3);
        let (h, w) = if one_d { (1, 1) } else { (rng.random_range(1..=4), rng.random_range(1..=4)) };
        let d = rng.random_range(1..=9);
        let kernel = if one_d {
            [1, 1, rng.random_range(1..=4)]
        } else {
            [rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4)]
        };
        let layer = if one_d {
            LayerSpec::Conv1d { kernel: kernel[2], stride: 1, maps: c_out, padding: Padding::Same }
        } else {
            LayerSpec::Conv3d { kernel, stride: [1, 1, 1], maps: c_out, padding: Padding::Same }
        };
        let tag = if one_d { ArchTag::Cnn1d } else { ArchTag::Cnn3d };
        let arch = single_layer(ActShape::volume(h, w, d, c_in), layer, tag);
        let weights = random_vec(&mut rng, c_out * c_in * kernel.iter().product::<usize>());
        let bias = random_vec(&mut rng, c_out);
        let x = random_vec(&mut rng, c_in * h * w * d);
        let model = Model::from_params(arch, vec![weights.clone(), bias.clone()]).unwrap();
        let got = model.forward(&[&x], Mode::Eval).unwrap().remove(0);
        let want = naive_conv(&x, [c_in, h, w, d], &weights, &bias, kernel);
        assert_eq!(got.len(), want.len());
        for (g, e) in got.iter().zip(&want) {
            assert!((g - e).abs() <= 1e-6, "case {case}: {g} vs {e}");
        }
    }
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn tiny_conv_hand_unrolled() {
    // 2×2×2 input, one map, 2×2×2 kernel: one zero appended on every axis.
    let x: Vec<f64> = (1..=8).map(f64::from).collect();
    let k: Vec<f64> = vec![1.0, -1.0, 2.0, 0.5, -2.0, 3.0, 0.25, 1.5];
    let layer = LayerSpec::Conv3d { kernel: [2, 2, 2], stride: [1, 1, 1], maps: 1, padding: Padding::Same };
    let arch = single_layer(ActShape::volume(2, 2, 2, 1), layer, ArchTag::Cnn3d);
    let model = Model::from_params(arch, vec![k.clone(), vec![0.0]]).unwrap();
    let y = model.forward(&[&x], Mode::Eval).unwrap().remove(0);
    let full: f64 = k.iter().zip(&x).map(|(a, b)| a * b).sum();
    assert_eq!(y[0], full);
    // y[0][0][1] sees x[·][·][1] through k[·][·][0]
    assert_eq!(y[1], k[0] * x[1] + k[2] * x[3] + k[4] * x[5] + k[6] * x[7]);
    // y[1][1][0] sees x[1][1][·] through k[0][0][·]
    assert_eq!(y[6], k[0] * x[6] + k[1] * x[7]);
    assert_eq!(y[7], k[0] * x[7]);
}

#[test]
fn shape_suite_3d_conv_prefix() {
    // Run the full-width convolutional stack on a real 9×9×128 input; the
    // 165888×1024 dense layer is checked from the declared layout only.
    let full = Architecture::cnn3d(4).unwrap();
    let shapes = full.shapes().unwrap();
    let prefix = Architecture { layers: full.layers[..7].to_vec(), ..full.clone() };
    let model = Model::<f32>::new(prefix.clone(), 1).unwrap();
    let x: Vec<f32> = (0..9 * 9 * 128).map(|i| ((i % 17) as f32 - 8.0) / 8.0).collect();
    for cut in [1, 3, 4, 6] {
        let arch = Architecture { layers: full.layers[..cut].to_vec(), ..full.clone() };
        let m = Model::<f32>::from_params(arch, model.params()[..if cut > 3 { 4 } else { 2 }].to_vec()).unwrap();
        let out = m.forward(&[&x], Mode::Eval).unwrap().remove(0);
        assert_eq!(out.len(), shapes[cut - 1].len());
    }
    assert_eq!(shapes[0], ActShape::volume(9, 9, 128, 32));
    assert_eq!(shapes[2], ActShape::volume(9, 9, 64, 32));
    assert_eq!(shapes[5], ActShape::volume(9, 9, 32, 64));
    let flat = model.forward(&[&x], Mode::Eval).unwrap().remove(0);
    assert_eq!(flat.len(), 165_888);
    assert_eq!(shapes[7], ActShape::Flat(1024));
    assert_eq!(full.param_layout().unwrap()[2].1, 165_888 * 1024);
    assert_eq!(shapes[11], ActShape::Flat(4));
}

#[test]
fn shape_suite_1d_full_forward() {
    let arch = Architecture::cnn1d(4).unwrap();
    let s = arch.shapes().unwrap();
    assert_eq!(s[0], ActShape::volume(1, 1, 128, 16));
    assert_eq!(s[2], ActShape::volume(1, 1, 64, 16));
    assert_eq!(s[5], ActShape::volume(1, 1, 32, 32));
    assert_eq!(s[6], ActShape::Flat(1024));
    assert_eq!(s[7], ActShape::Flat(256));
    let model = Model::<f32>::new(arch, 0).unwrap();
    let x = vec![0.5f32; 128];
    let p = model.forward(&[&x], Mode::Train { seed: 3 }).unwrap().remove(0);
    assert_eq!(p.len(), 4);
    assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
}

#[test]
fn zero_output_layer_gives_uniform_scores() {
    let mut model = Model::<f64>::new(tiny_1d(), 4).unwrap();
    let n = model.params().len();
    for t in [n - 2, n - 1] {
        model.params_mut()[t].iter_mut().for_each(|v| *v = 0.0);
    }
    let x: Vec<f32> = (0..16).map(|i| i as f32).collect();
    let p = predict_proba(&model, &x).unwrap();
    assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    let xs: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    let loss = model.loss(&[&xs], &[2], Mode::Eval).unwrap();
    assert!((loss - 4.0f64.ln()).abs() < 1e-12);
}

#[test]
fn confident_prediction_has_near_zero_loss() {
    let mut model = Model::<f64>::zeros(tiny_1d()).unwrap();
    let n = model.params().len();
    model.params_mut()[n - 1] = vec![0.0, 0.0, 60.0, 0.0];
    let x = vec![0.0f64; 16];
    assert!(model.loss(&[&x], &[2], Mode::Eval).unwrap() < 1e-20);
}

#[test]
fn dropout_is_identity_in_eval_and_unbiased_in_train() {
    let n = 20_000;
    let arch = Architecture {
        tag: ArchTag::Cnn1d,
        input: ActShape::Flat(n),
        layers: vec![LayerSpec::Dropout { keep: 0.5 }],
        n_labels: 2,
    };
    let model = Model::<f64>::zeros(arch).unwrap();
    let x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
    assert_eq!(model.forward(&[&x], Mode::Eval).unwrap()[0], x);
    let y = model.forward(&[&x], Mode::Train { seed: 8 }).unwrap().remove(0);
    let ratio = y.iter().sum::<f64>() / x.iter().sum::<f64>();
    assert!((ratio - 1.0).abs() <= 0.02, "ratio {ratio}");
    assert!(y.iter().zip(&x).all(|(a, b)| *a == 0.0 || *a == 2.0 * b));
}

#[test]
fn constant_gradient_steps_approach_learning_rate() {
    let cfg = AdamConfig::default();
    let mut p = vec![vec![0.0f64, 0.0]];
    let mut st = AdamState::new(cfg, &p).unwrap();
    let g = vec![vec![0.02, -3.0]];
    let mut prev = p.clone();
    for step in 1..=200 {
        adam_update(&mut p, &g, &mut st).unwrap();
        // closed form: m̂ = g and v̂ = g² for every step, so Δ = lr·g/(|g|+ε)
        for (i, &gi) in g[0].iter().enumerate() {
            let delta = prev[0][i] - p[0][i];
            let expect = cfg.lr * gi / (gi.abs() + cfg.epsilon);
            assert!((delta - expect).abs() < 1e-12, "step {step}: {delta} vs {expect}");
        }
        prev = p.clone();
    }
    assert_eq!(st.step, 200);
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut p = vec![vec![0.3f64, -0.7]];
    let mut st = AdamState::new(AdamConfig::default(), &p).unwrap();
    adam_update(&mut p, &[vec![0.0, 0.0]], &mut st).unwrap();
    assert_eq!(p, vec![vec![0.3, -0.7]]);
}

fn toy_examples(n_per_class: usize, len: usize, seed: u64) -> Examples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ex = Examples::new(len);
    for i in 0..4 * n_per_class {
        let label = i % 4;
        let freq = [2.0, 5.0, 9.0, 14.0][label];
        let x: Vec<f32> = (0..len)
            .map(|t| {
                let s = (std::f64::consts::TAU * freq * t as f64 / len as f64 + rng.random_range(0.0..6.28)).sin();
                (s + 0.2 * rng.random_range(-1.0..1.0)) as f32
            })
            .collect();
        ex.push(&x, label).unwrap();
    }
    ex
}

#[test]
fn training_is_deterministic_and_lr_zero_is_a_no_op() {
    let data = toy_examples(8, 16, 1);
    let idx: Vec<usize> = (0..data.len()).collect();
    let cfg = TrainConfig { epochs: 3, batch_size: 8, seed: 21, ..TrainConfig::default() };
    let mut a = Model::<f64>::new(tiny_1d(), 9).unwrap();
    let mut b = a.clone();
    let ha = train(&mut a, &data, &idx, &idx, &cfg).unwrap();
    let hb = train(&mut b, &data, &idx, &idx, &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    assert_eq!(ha.epochs.len(), 3);

    let mut c = Model::<f64>::new(tiny_1d(), 9).unwrap();
    let before = c.clone();
    let zero = TrainConfig { adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..cfg };
    train(&mut c, &data, &idx, &[], &zero).unwrap();
    assert_eq!(c, before);
}

#[test]
fn empty_training_set_is_rejected() {
    let data = toy_examples(1, 16, 1);
    let mut m = Model::<f32>::new(tiny_1d(), 0).unwrap();
    let err = train(&mut m, &data, &[], &[0], &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn separable_synthetic_set_reaches_95_percent() {
    let spec = SynthSpec {
        n_subjects: 2,
        n_trials: 8,
        class_separation: 3.0,
        noise_level: 0.3,
        windows_per_trial: 20,
        ..SynthSpec::default()
    };
    let ds = synth_dataset(&spec, 3).unwrap();
    let row = ds.roster.index_of("GSR").unwrap();
    let mut data = Examples::new(128);
    for trial in &ds.trials {
        for w in trial_windows(trial, &[row], None, ZScoreScope::Window).unwrap() {
            let x: Vec<f32> = w.row(0).iter().map(|&v| v as f32).collect();
            data.push(&x, trial.label().code()).unwrap();
        }
    }
    let (val, tr): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|i| i % 5 == 0);
    let mut model = Model::<f32>::new(Architecture::cnn1d(4).unwrap(), 1).unwrap();
    let cfg = TrainConfig { epochs: 20, batch_size: 32, seed: 2, ..TrainConfig::default() };
    let history = train(&mut model, &data, &tr, &val, &cfg).unwrap();
    let best = history.epochs.iter().filter_map(|e| e.val_accuracy).fold(0.0, f64::max);
    assert!(best >= 0.95, "best validation accuracy {best}");
    assert!(history.epochs[19].loss < history.epochs[0].loss);
}
