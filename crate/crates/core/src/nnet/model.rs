use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::arch::{ActShape, Architecture, LayerSpec};
use super::layers::{self, Dims};
use super::Scalar;
use crate::{Error, Result};

/// Forward-pass behaviour. Dropout draws come from a stream seeded by
/// `seed` and consumed in batch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

enum Aux<S> {
    None,
    Pool(Vec<usize>),
    Mask(Vec<S>),
}

struct Trace<S> {
    /// `acts[l]` is the input to layer `l`; the last entry is the output.
    acts: Vec<Vec<S>>,
    aux: Vec<Aux<S>>,
}

/// A network: architecture plus parameters, `params[2k]` the weights and
/// `params[2k + 1]` the biases of the `k`-th parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    arch: Architecture,
    shapes: Vec<ActShape>,
    slots: Vec<Option<usize>>,
    params: Vec<Vec<S>>,
}

fn dims(shape: ActShape) -> Dims {
    match shape {
        ActShape::Volume { height, width, depth, maps } => Dims { maps, height, width, depth },
        ActShape::Flat(n) => Dims { maps: 1, height: 1, width: 1, depth: n },
    }
}

impl<S: Scalar> Model<S> {
    /// He-normal weights (`σ² = 2 / fan_in`) before ReLU layers, `σ² =
    /// 1 / fan_in` for the output layer; zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = model.arch.param_layout()?;
        let last = layout.len().saturating_sub(1);
        for (k, &(_, w_len, b_len)) in layout.iter().enumerate() {
            let fan_in = (w_len / b_len) as f64;
            let gain = if k == last { 1.0 } else { 2.0 };
            let std = libm::sqrt(gain / fan_in);
            for w in model.params[2 * k].iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = S::from_f64(z * std);
            }
        }
        Ok(model)
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let shapes = arch.shapes()?;
        let layout = arch.param_layout()?;
        let mut slots = vec![None; arch.layers.len()];
        let mut params = Vec::with_capacity(2 * layout.len());
        for (k, &(layer, w_len, b_len)) in layout.iter().enumerate() {
            slots[layer] = Some(k);
            params.push(vec![S::zero(); w_len]);
            params.push(vec![S::zero(); b_len]);
        }
        Ok(Model { arch, shapes, slots, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<Vec<S>>) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        if params.len() != model.params.len()
            || params.iter().zip(&model.params).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::structural(
                "parameter tensors do not match the architecture",
            ));
        }
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn n_labels(&self) -> usize {
        self.arch.n_labels
    }

    pub fn params(&self) -> &[Vec<S>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    fn in_shape(&self, layer: usize) -> ActShape {
        if layer == 0 {
            self.arch.input
        } else {
            self.shapes[layer - 1]
        }
    }

    fn check_input(&self, input: &[S]) -> Result<()> {
        if input.len() != self.arch.input_len() {
            return Err(Error::structural(format!(
                "input has {} values, architecture expects {} ({})",
                input.len(),
                self.arch.input_len(),
                self.arch.input
            )));
        }
        Ok(())
    }

    fn trace(&self, input: &[S], mut rng: Option<&mut ChaCha8Rng>) -> Trace<S> {
        let mut acts = Vec::with_capacity(self.arch.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.arch.layers.len());
        acts.push(input.to_vec());
        for (l, layer) in self.arch.layers.iter().enumerate() {
            let x = &acts[l];
            let (y, a) = match *layer {
                ref conv if conv.conv_geometry().is_some() => {
                    let (kernel, maps) = conv.conv_geometry().unwrap_or_default();
                    let k = self.slots[l].unwrap_or_default();
                    let y = layers::conv_forward(
                        x,
                        dims(self.in_shape(l)),
                        &self.params[2 * k],
                        &self.params[2 * k + 1],
                        kernel,
                        maps,
                    );
                    (y, Aux::None)
                }
                ref pool if pool.pool_size().is_some() => {
                    let size = pool.pool_size().unwrap_or_default();
                    let (y, arg) = layers::maxpool_forward(x, dims(self.in_shape(l)), size);
                    (y, Aux::Pool(arg))
                }
                LayerSpec::Dense { .. } => {
                    let k = self.slots[l].unwrap_or_default();
                    (layers::dense_forward(x, &self.params[2 * k], &self.params[2 * k + 1]), Aux::None)
                }
                LayerSpec::Relu => (x.iter().map(|&v| v.max(S::zero())).collect(), Aux::None),
                LayerSpec::Dropout { keep } => match rng.as_deref_mut() {
                    Some(rng) => {
                        let scale = S::from_f64(1.0 / keep);
                        let mask: Vec<S> = x
                            .iter()
                            .map(|_| if rng.random::<f64>() < keep { scale } else { S::zero() })
                            .collect();
                        (x.iter().zip(&mask).map(|(&v, &m)| v * m).collect(), Aux::Mask(mask))
                    }
                    None => (x.clone(), Aux::None),
                },
                LayerSpec::Softmax => (layers::softmax(x), Aux::None),
                _ => (x.clone(), Aux::None),
            };
            acts.push(y);
            aux.push(a);
        }
        Trace { acts, aux }
    }

    /// Final activations for every input (class probabilities when the
    /// stack ends in softmax).
    pub fn forward(&self, batch: &[&[S]], mode: Mode) -> Result<Vec<Vec<S>>> {
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        batch
            .iter()
            .map(|x| {
                self.check_input(x)?;
                let mut t = self.trace(x, rng.as_mut());
                Ok(t.acts.pop().unwrap_or_default())
            })
            .collect()
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &[&[S]], labels: &[usize], mode: Mode) -> Result<S> {
        let mut grads = Vec::new();
        self.loss_impl(batch, labels, mode, &mut grads, false)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[&[S]], labels: &[usize], mode: Mode) -> Result<(S, Vec<Vec<S>>)> {
        let mut grads = Vec::new();
        let loss = self.loss_and_grad_into(batch, labels, mode, &mut grads)?;
        Ok((loss, grads))
    }

    /// As [`Model::loss_and_grad`], reusing `grads` as the output buffer.
    pub fn loss_and_grad_into(
        &self,
        batch: &[&[S]],
        labels: &[usize],
        mode: Mode,
        grads: &mut Vec<Vec<S>>,
    ) -> Result<S> {
        self.loss_impl(batch, labels, mode, grads, true)
    }

    fn loss_impl(
        &self,
        batch: &[&[S]],
        labels: &[usize],
        mode: Mode,
        grads: &mut Vec<Vec<S>>,
        with_grad: bool,
    ) -> Result<S> {
        let n_layers = self.arch.layers.len();
        if self.arch.layers.last() != Some(&LayerSpec::Softmax)
            || self.arch.layers[..n_layers - 1].contains(&LayerSpec::Softmax)
        {
            return Err(Error::structural(
                "cross-entropy needs exactly one softmax, as the final layer",
            ));
        }
        if batch.is_empty() || batch.len() != labels.len() {
            return Err(Error::validation(format!(
                "batch of {} inputs with {} labels",
                batch.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.n_labels()) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {} classes",
                self.n_labels()
            )));
        }
        if with_grad {
            grads.resize_with(self.params.len(), Vec::new);
            for (g, p) in grads.iter_mut().zip(&self.params) {
                g.clear();
                g.resize(p.len(), S::zero());
            }
        }
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let inv_b = S::from_f64(1.0 / batch.len() as f64);
        let mut total = S::zero();
        for (x, &label) in batch.iter().zip(labels) {
            self.check_input(x)?;
            let trace = self.trace(x, rng.as_mut());
            let logits = &trace.acts[n_layers - 1];
            total = total + layers::cross_entropy(logits, label);
            if !with_grad {
                continue;
            }
            let mut g: Vec<S> = trace.acts[n_layers].iter().map(|&p| p * inv_b).collect();
            g[label] = g[label] - inv_b;
            self.backward(&trace, g, grads);
        }
        Ok(total * inv_b)
    }

    fn backward(&self, trace: &Trace<S>, mut g: Vec<S>, grads: &mut [Vec<S>]) {
        let n_layers = self.arch.layers.len();
        for l in (0..n_layers - 1).rev() {
            let x = &trace.acts[l];
            let layer = &self.arch.layers[l];
            let need_input = l > 0;
            g = if let Some((kernel, maps)) = layer.conv_geometry() {
                let k = self.slots[l].unwrap_or_default();
                let mut gi = if need_input { vec![S::zero(); x.len()] } else { Vec::new() };
                let (gw, gb) = split_pair(grads, k);
                layers::conv_backward(
                    x,
                    dims(self.in_shape(l)),
                    &self.params[2 * k],
                    kernel,
                    maps,
                    &g,
                    gw,
                    gb,
                    need_input.then_some(&mut gi[..]),
                );
                gi
            } else {
                match (layer, &trace.aux[l]) {
                    (_, Aux::Pool(arg)) => {
                        let mut gi = vec![S::zero(); x.len()];
                        for (&idx, &gy) in arg.iter().zip(&g) {
                            gi[idx] = gi[idx] + gy;
                        }
                        gi
                    }
                    (LayerSpec::Dense { .. }, _) => {
                        let k = self.slots[l].unwrap_or_default();
                        let mut gi = if need_input { vec![S::zero(); x.len()] } else { Vec::new() };
                        let (gw, gb) = split_pair(grads, k);
                        layers::dense_backward(
                            x,
                            &self.params[2 * k],
                            &g,
                            gw,
                            gb,
                            need_input.then_some(&mut gi[..]),
                        );
                        gi
                    }
                    (LayerSpec::Relu, _) => {
                        for (gv, &xv) in g.iter_mut().zip(x) {
                            if xv <= S::zero() {
                                *gv = S::zero();
                            }
                        }
                        g
                    }
                    (_, Aux::Mask(mask)) => {
                        for (gv, &m) in g.iter_mut().zip(mask) {
                            *gv = *gv * m;
                        }
                        g
                    }
                    _ => g,
                }
            };
        }
    }
}

fn split_pair<S>(grads: &mut [Vec<S>], k: usize) -> (&mut [S], &mut [S]) {
    let (w, b) = grads[2 * k..2 * k + 2].split_at_mut(1);
    (&mut w[0], &mut b[0])
}
