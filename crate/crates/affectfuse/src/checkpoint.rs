//! Model checkpoints: the bytes `AFCK`, a `u32` format version, a `u32`
//! header length, a JSON header (architecture, label count, layer table),
//! then every weight and bias tensor as little-endian `f32` in layer order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use affectfuse_core::nnet::{Architecture, Model, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::write_f32;

pub const MAGIC: &[u8; 4] = b"AFCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub index: usize,
    pub name: String,
    pub weights: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Architecture,
    pub n_labels: usize,
    pub layers: Vec<LayerEntry>,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

impl CheckpointHeader {
    pub fn of<S: Scalar>(model: &Model<S>) -> Result<Self> {
        Self::for_arch(model.arch())
    }

    pub fn for_arch(arch: &Architecture) -> Result<Self> {
        let arch = arch.clone();
        let layers = arch
            .param_layout()?
            .into_iter()
            .map(|(index, weights, bias)| LayerEntry {
                index,
                name: arch.layers[index].name().to_string(),
                weights,
                bias,
            })
            .collect();
        Ok(CheckpointHeader {
            n_labels: arch.n_labels,
            param_count: arch.param_count()?,
            arch,
            layers,
            modality: None,
            fold: None,
        })
    }
}

/// Parameters are stored as `f32` whatever `S` is.
pub fn save_model<S: Scalar>(model: &Model<S>, header: &CheckpointHeader, path: &Path) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Internal(e.to_string()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u32).to_le_bytes())?;
        out.write_all(&json)?;
        for tensor in model.params() {
            let values: Vec<f32> = tensor.iter().map(|&v| Scalar::to_f64(v) as f32).collect();
            write_f32(out, &values)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_model<S: Scalar>(path: &Path) -> Result<(Model<S>, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Data(format!("checkpoint {}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    if word(4) != VERSION {
        return Err(bad(format!("unsupported version {}", word(4))));
    }
    let header_end = 12 + word(8) as usize;
    if bytes.len() < header_end {
        return Err(bad("truncated header".into()));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[12..header_end]).map_err(|e| bad(e.to_string()))?;
    let expected = CheckpointHeader::for_arch(&header.arch)?;
    if expected.layers != header.layers || expected.param_count != header.param_count {
        return Err(bad("layer table does not match the architecture".into()));
    }
    let body = &bytes[header_end..];
    if body.len() != header.param_count * 4 {
        return Err(bad(format!(
            "holds {} parameter bytes, header declares {}",
            body.len(),
            header.param_count * 4
        )));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| S::from_f32(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    let mut params = Vec::with_capacity(2 * header.layers.len());
    for layer in &header.layers {
        params.push(values.by_ref().take(layer.weights).collect());
        params.push(values.by_ref().take(layer.bias).collect());
    }
    let model = Model::from_params(header.arch.clone(), params)?;
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use affectfuse_core::nnet::CnnWidths;

    fn tiny() -> Model<f32> {
        let widths = CnnWidths { conv_maps: [2, 3], dense_units: 5, keep_prob: 0.5 };
        Model::new(Architecture::cnn1d_with(4, widths, 16).unwrap(), 3).unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.afck");
        let model = tiny();
        let mut header = CheckpointHeader::of(&model).unwrap();
        header.modality = Some("GSR".into());
        header.fold = Some(2);
        save_model(&model, &header, &path).unwrap();
        let (back, h) = load_model::<f32>(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back.params(), model.params());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.afck");
        let model = tiny();
        save_model(&model, &CheckpointHeader::of(&model).unwrap(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert_eq!(load_model::<f32>(&path).unwrap_err().exit_code(), 2);
        fs::write(&path, b"nope").unwrap();
        assert!(load_model::<f64>(&path).is_err());
    }
}
