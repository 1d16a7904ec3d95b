//! Single-sample kernels. Volumes are `[map][height][width][depth]`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub maps: usize,
    pub height: usize,
    pub width: usize,
    pub depth: usize,
}

impl Dims {
    fn row(&self, map: usize, h: usize, w: usize) -> usize {
        ((map * self.height + h) * self.width + w) * self.depth
    }
}

/// Output positions `o` for which `o + offset` stays inside `0..len`.
fn valid(len: usize, offset: isize) -> Range<usize> {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).clamp(0, len as isize) as usize;
    lo..hi.max(lo)
}

fn pad_before(k: usize) -> usize {
    (k - 1) / 2
}

/// "Same" zero-padded convolution with unit stride; weights are
/// `[out][in][kh][kw][kd]`.
pub(crate) fn conv_forward<S: Scalar>(
    input: &[S],
    dims: Dims,
    weights: &[S],
    bias: &[S],
    kernel: [usize; 3],
    out_maps: usize,
) -> Vec<S> {
    let out_dims = Dims { maps: out_maps, ..dims };
    let plane = dims.height * dims.width * dims.depth;
    let mut out = vec![S::zero(); out_maps * plane];
    let [kh, kw, kd] = kernel;
    for o in 0..out_maps {
        out[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..dims.maps {
            for a in 0..kh {
                let dh = a as isize - pad_before(kh) as isize;
                for b in 0..kw {
                    let dw = b as isize - pad_before(kw) as isize;
                    for e in 0..kd {
                        let dd = e as isize - pad_before(kd) as isize;
                        let wv = weights[(((o * dims.maps + c) * kh + a) * kw + b) * kd + e];
                        let ds = valid(dims.depth, dd);
                        if ds.is_empty() {
                            continue;
                        }
                        for h in valid(dims.height, dh) {
                            let ih = (h as isize + dh) as usize;
                            for w in valid(dims.width, dw) {
                                let iw = (w as isize + dw) as usize;
                                let src = dims.row(c, ih, iw);
                                let dst = out_dims.row(o, h, w);
                                let s0 = (ds.start as isize + dd) as usize;
                                let src = &input[src + s0..src + s0 + ds.len()];
                                let dst = &mut out[dst + ds.start..dst + ds.end];
                                for (y, &x) in dst.iter_mut().zip(src) {
                                    *y = *y + wv * x;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and, when `grad_input` is given, the
/// input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<S: Scalar>(
    input: &[S],
    dims: Dims,
    weights: &[S],
    kernel: [usize; 3],
    out_maps: usize,
    grad_out: &[S],
    grad_w: &mut [S],
    grad_b: &mut [S],
    mut grad_input: Option<&mut [S]>,
) {
    let out_dims = Dims { maps: out_maps, ..dims };
    let plane = dims.height * dims.width * dims.depth;
    let [kh, kw, kd] = kernel;
    for o in 0..out_maps {
        let g: S = grad_out[o * plane..(o + 1) * plane]
            .iter()
            .fold(S::zero(), |acc, &v| acc + v);
        grad_b[o] = grad_b[o] + g;
        for c in 0..dims.maps {
            for a in 0..kh {
                let dh = a as isize - pad_before(kh) as isize;
                for b in 0..kw {
                    let dw = b as isize - pad_before(kw) as isize;
                    for e in 0..kd {
                        let dd = e as isize - pad_before(kd) as isize;
                        let widx = (((o * dims.maps + c) * kh + a) * kw + b) * kd + e;
                        let wv = weights[widx];
                        let ds = valid(dims.depth, dd);
                        if ds.is_empty() {
                            continue;
                        }
                        let mut acc = S::zero();
                        for h in valid(dims.height, dh) {
                            let ih = (h as isize + dh) as usize;
                            for w in valid(dims.width, dw) {
                                let iw = (w as isize + dw) as usize;
                                let src = dims.row(c, ih, iw) + (ds.start as isize + dd) as usize;
                                let dst = out_dims.row(o, h, w) + ds.start;
                                let gout = &grad_out[dst..dst + ds.len()];
                                let x = &input[src..src + ds.len()];
                                for (&gy, &xv) in gout.iter().zip(x) {
                                    acc = acc + gy * xv;
                                }
                                if let Some(gi) = grad_input.as_deref_mut() {
                                    for (gx, &gy) in gi[src..src + ds.len()].iter_mut().zip(gout) {
                                        *gx = *gx + wv * gy;
                                    }
                                }
                            }
                        }
                        grad_w[widx] = grad_w[widx] + acc;
                    }
                }
            }
        }
    }
}

/// Non-overlapping max pooling; returns the output and the input index of
/// every selected element (first maximum wins).
pub(crate) fn maxpool_forward<S: Scalar>(
    input: &[S],
    dims: Dims,
    size: [usize; 3],
) -> (Vec<S>, Vec<usize>) {
    let [ph, pw, pd] = size;
    let od = Dims {
        maps: dims.maps,
        height: dims.height / ph,
        width: dims.width / pw,
        depth: dims.depth / pd,
    };
    let n = od.maps * od.height * od.width * od.depth;
    let mut out = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for m in 0..od.maps {
        for h in 0..od.height {
            for w in 0..od.width {
                for d in 0..od.depth {
                    let mut best = dims.row(m, h * ph, w * pw) + d * pd;
                    for a in 0..ph {
                        for b in 0..pw {
                            let row = dims.row(m, h * ph + a, w * pw + b);
                            for e in 0..pd {
                                let idx = row + d * pd + e;
                                if input[idx] > input[best] {
                                    best = idx;
                                }
                            }
                        }
                    }
                    out.push(input[best]);
                    arg.push(best);
                }
            }
        }
    }
    (out, arg)
}

/// `y = W x + b` with `W` stored `[out][in]`.
pub(crate) fn dense_forward<S: Scalar>(input: &[S], weights: &[S], bias: &[S]) -> Vec<S> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            weights[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(input)
                .fold(b, |acc, (&w, &x)| acc + w * x)
        })
        .collect()
}

pub(crate) fn dense_backward<S: Scalar>(
    input: &[S],
    weights: &[S],
    grad_out: &[S],
    grad_w: &mut [S],
    grad_b: &mut [S],
    grad_input: Option<&mut [S]>,
) {
    let n_in = input.len();
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] = grad_b[o] + g;
        if g == S::zero() {
            continue;
        }
        for (gw, &x) in grad_w[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
            *gw = *gw + g * x;
        }
    }
    if let Some(gi) = grad_input {
        for (o, &g) in grad_out.iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            for (gx, &w) in gi.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                *gx = *gx + w * g;
            }
        }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().fold(S::neg_infinity(), |m, &x| m.max(x));
    let exps: Vec<S> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum = exps.iter().fold(S::zero(), |a, &e| a + e);
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln Σ exp(z) − z[label]`.
pub(crate) fn cross_entropy<S: Scalar>(logits: &[S], label: usize) -> S {
    let max = logits.iter().fold(S::neg_infinity(), |m, &x| m.max(x));
    let sum = logits.iter().fold(S::zero(), |a, &x| a + (x - max).exp());
    max + sum.ln() - logits[label]
}
