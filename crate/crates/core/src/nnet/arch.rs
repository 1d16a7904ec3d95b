use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::preprocess::GRID_SIZE;
use crate::{Error, Result, WINDOW_LEN};

/// Activation shape. Volumes are stored `[map][height][width][depth]`,
/// depth being time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActShape {
    Volume { height: usize, width: usize, depth: usize, maps: usize },
    Flat(usize),
}

impl ActShape {
    pub fn volume(height: usize, width: usize, depth: usize, maps: usize) -> Self {
        ActShape::Volume { height, width, depth, maps }
    }

    pub fn len(&self) -> usize {
        match *self {
            ActShape::Volume { height, width, depth, maps } => height * width * depth * maps,
            ActShape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ActShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ActShape::Volume { height: 1, width: 1, depth, maps } => write!(f, "{depth}×{maps}"),
            ActShape::Volume { height, width, depth, maps } => {
                write!(f, "{height}×{width}×{depth}×{maps}")
            }
            ActShape::Flat(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding that preserves spatial size; odd remainders go after.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    /// Kernel and stride are `[height, width, time]`.
    Conv3d { kernel: [usize; 3], stride: [usize; 3], maps: usize, padding: Padding },
    Conv1d { kernel: usize, stride: usize, maps: usize, padding: Padding },
    MaxPool3d { size: [usize; 3] },
    MaxPool1d { size: usize },
    Relu,
    Flatten,
    Dense { units: usize },
    Dropout { keep: f64 },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool3d { .. } | LayerSpec::MaxPool1d { .. } => "maxpool",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Convolution geometry as `(kernel, maps)` with 1D layers lifted to
    /// `[1, 1, k]`.
    pub(crate) fn conv_geometry(&self) -> Option<([usize; 3], usize)> {
        match *self {
            LayerSpec::Conv3d { kernel, maps, .. } => Some((kernel, maps)),
            LayerSpec::Conv1d { kernel, maps, .. } => Some(([1, 1, kernel], maps)),
            _ => None,
        }
    }

    pub(crate) fn pool_size(&self) -> Option<[usize; 3]> {
        match *self {
            LayerSpec::MaxPool3d { size } => Some(size),
            LayerSpec::MaxPool1d { size } => Some([1, 1, size]),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |xs: &[usize]| xs.iter().all(|&x| x > 0);
        let ok = match *self {
            LayerSpec::Conv3d { kernel, stride, maps, .. } => {
                positive(&kernel) && positive(&stride) && maps > 0 && stride == [1, 1, 1]
            }
            LayerSpec::Conv1d { kernel, stride, maps, .. } => {
                kernel > 0 && stride == 1 && maps > 0
            }
            LayerSpec::MaxPool3d { size } => positive(&size),
            LayerSpec::MaxPool1d { size } => size > 0,
            LayerSpec::Dense { units } => units > 0,
            LayerSpec::Dropout { keep } => keep > 0.0 && keep <= 1.0,
            LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::Softmax => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "invalid {} layer {self:?} (sizes must be positive, convolutions use unit stride, keep in (0, 1])",
                self.name()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchTag {
    #[serde(rename = "CNN3D")]
    Cnn3d,
    #[serde(rename = "CNN1D")]
    Cnn1d,
}

impl ArchTag {
    pub fn name(self) -> &'static str {
        match self {
            ArchTag::Cnn3d => "CNN3D",
            ArchTag::Cnn1d => "CNN1D",
        }
    }
}

/// Widths of the two-convolution classifier family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnWidths {
    pub conv_maps: [usize; 2],
    pub dense_units: usize,
    pub keep_prob: f64,
}

impl CnnWidths {
    /// 32 and 64 feature maps, 1024 dense units.
    pub const PAPER_3D: CnnWidths = CnnWidths { conv_maps: [32, 64], dense_units: 1024, keep_prob: 0.5 };
    /// 16 and 32 feature maps, 256 dense units.
    pub const PAPER_1D: CnnWidths = CnnWidths { conv_maps: [16, 32], dense_units: 256, keep_prob: 0.5 };
    /// Narrow 3D variant that trains on a desktop CPU.
    pub const COMPACT_3D: CnnWidths = CnnWidths { conv_maps: [4, 8], dense_units: 64, keep_prob: 0.5 };
    pub const COMPACT_1D: CnnWidths = CnnWidths { conv_maps: [8, 16], dense_units: 64, keep_prob: 0.5 };
}

/// Layer stack plus input shape; carries no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub tag: ArchTag,
    pub input: ActShape,
    pub layers: Vec<LayerSpec>,
    pub n_labels: usize,
}

fn check_labels(n_labels: usize) -> Result<()> {
    if n_labels < 2 {
        return Err(Error::validation(format!("need at least 2 labels, got {n_labels}")));
    }
    Ok(())
}

impl Architecture {
    /// 9×9×128 input; conv 3×3×4 (32) → pool 1×1×2 → conv 3×3×4 (64) →
    /// pool 1×1×2 → dense 1024 → dropout 0.5 → dense NL → softmax.
    pub fn cnn3d(n_labels: usize) -> Result<Self> {
        Self::cnn3d_with(n_labels, CnnWidths::PAPER_3D, [GRID_SIZE, GRID_SIZE, WINDOW_LEN])
    }

    /// 128×1 input; conv 3 (16) → pool 2 → conv 3 (32) → pool 2 → dense 256
    /// → dropout 0.5 → dense NL → softmax.
    pub fn cnn1d(n_labels: usize) -> Result<Self> {
        Self::cnn1d_with(n_labels, CnnWidths::PAPER_1D, WINDOW_LEN)
    }

    pub fn cnn3d_with(n_labels: usize, widths: CnnWidths, input: [usize; 3]) -> Result<Self> {
        check_labels(n_labels)?;
        let conv = |maps| LayerSpec::Conv3d {
            kernel: [3, 3, 4],
            stride: [1, 1, 1],
            maps,
            padding: Padding::Same,
        };
        let pool = LayerSpec::MaxPool3d { size: [1, 1, 2] };
        let arch = Architecture {
            tag: ArchTag::Cnn3d,
            input: ActShape::volume(input[0], input[1], input[2], 1),
            layers: Self::stack(conv(widths.conv_maps[0]), conv(widths.conv_maps[1]), pool, widths, n_labels),
            n_labels,
        };
        arch.shapes()?;
        Ok(arch)
    }

    pub fn cnn1d_with(n_labels: usize, widths: CnnWidths, len: usize) -> Result<Self> {
        check_labels(n_labels)?;
        let conv = |maps| LayerSpec::Conv1d { kernel: 3, stride: 1, maps, padding: Padding::Same };
        let pool = LayerSpec::MaxPool1d { size: 2 };
        let arch = Architecture {
            tag: ArchTag::Cnn1d,
            input: ActShape::volume(1, 1, len, 1),
            layers: Self::stack(conv(widths.conv_maps[0]), conv(widths.conv_maps[1]), pool, widths, n_labels),
            n_labels,
        };
        arch.shapes()?;
        Ok(arch)
    }

    fn stack(
        conv1: LayerSpec,
        conv2: LayerSpec,
        pool: LayerSpec,
        widths: CnnWidths,
        n_labels: usize,
    ) -> Vec<LayerSpec> {
        vec![
            conv1,
            LayerSpec::Relu,
            pool,
            conv2,
            LayerSpec::Relu,
            pool,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: widths.dense_units },
            LayerSpec::Relu,
            LayerSpec::Dropout { keep: widths.keep_prob },
            LayerSpec::Dense { units: n_labels },
            LayerSpec::Softmax,
        ]
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        let mut shape = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            layer.validate()?;
            shape = match (layer, shape) {
                (l, ActShape::Volume { height, width, depth, .. }) if l.conv_geometry().is_some() => {
                    let (_, maps) = l.conv_geometry().unwrap_or_default();
                    ActShape::volume(height, width, depth, maps)
                }
                (l, ActShape::Volume { height, width, depth, maps }) if l.pool_size().is_some() => {
                    let [ph, pw, pd] = l.pool_size().unwrap_or_default();
                    if height < ph || width < pw || depth < pd {
                        return Err(Error::structural(format!("pool {ph}×{pw}×{pd} larger than {shape}")));
                    }
                    ActShape::volume(height / ph, width / pw, depth / pd, maps)
                }
                (LayerSpec::Flatten, s) => ActShape::Flat(s.len()),
                (LayerSpec::Dense { units }, ActShape::Flat(_)) => ActShape::Flat(*units),
                (LayerSpec::Relu | LayerSpec::Dropout { .. }, s) => s,
                (LayerSpec::Softmax, ActShape::Flat(n)) => ActShape::Flat(n),
                (l, s) => {
                    return Err(Error::structural(format!(
                        "{} layer cannot follow activation of shape {s}",
                        l.name()
                    )))
                }
            };
            out.push(shape);
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<ActShape> {
        Ok(self.shapes()?.last().copied().unwrap_or(self.input))
    }

    /// `(weight_len, bias_len)` for every parametric layer, in order, with
    /// the index of the layer they belong to.
    pub fn param_layout(&self) -> Result<Vec<(usize, usize, usize)>> {
        let shapes = self.shapes()?;
        let mut prev = self.input;
        let mut out = Vec::new();
        for (idx, (layer, shape)) in self.layers.iter().zip(&shapes).enumerate() {
            if let Some((k, maps)) = layer.conv_geometry() {
                let in_maps = match prev {
                    ActShape::Volume { maps, .. } => maps,
                    ActShape::Flat(_) => 1,
                };
                out.push((idx, maps * in_maps * k[0] * k[1] * k[2], maps));
            } else if let LayerSpec::Dense { units } = layer {
                out.push((idx, units * prev.len(), *units));
            }
            prev = *shape;
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.param_layout()?.iter().map(|&(_, w, b)| w + b).sum())
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }
}
