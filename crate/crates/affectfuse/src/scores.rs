//! Fusion of externally produced classifier outputs.
//!
//! Scores file: a header `window,channel,p0,p1,...` then one row per
//! (window, channel). Rows of a window need not be adjacent; windows are
//! fused in order of first appearance. Centroids file: `label,arousal,valence`
//! with one row per label, the label given by code or quadrant name.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use affectfuse_core::dataset::QuadrantLabel;
use affectfuse_core::fusion::{fuse_pipeline, ClassScores, FusionResult, LabelCentroids};
use affectfuse_core::Error as CoreError;

use crate::error::{Error, Result};

/// Per-channel scores of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowScores {
    pub window: String,
    pub channels: Vec<ClassScores>,
}

fn line_error(source: &str, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{source}, line {line}: {msg}"))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn read_error(source: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    line_error(source, line, e)
}

pub fn read_scores<R: Read>(input: R, source: &str) -> Result<Vec<WindowScores>> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(|e| read_error(source, e))?.clone();
    if header.len() < 4 || &header[0] != "window" || &header[1] != "channel" {
        return Err(line_error(source, 1, "header must be `window,channel,p0,p1,...`"));
    }
    let nl = header.len() - 2;
    let mut windows: Vec<WindowScores> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| read_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != nl + 2 {
            return Err(line_error(source, line, format!("expected {} fields, found {}", nl + 2, record.len())));
        }
        let probs = (2..record.len())
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| line_error(source, line, format!("`{}`: {e}", &record[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let scores = ClassScores::new(&record[1], probs).map_err(|e| line_error(source, line, e))?;
        let slot = *index.entry(record[0].to_string()).or_insert_with(|| {
            windows.push(WindowScores { window: record[0].to_string(), channels: Vec::new() });
            windows.len() - 1
        });
        if windows[slot].channels.iter().any(|c| c.channel == scores.channel) {
            return Err(line_error(
                source,
                line,
                format!("channel {} repeated for window {}", scores.channel, record[0].to_string()),
            ));
        }
        windows[slot].channels.push(scores);
    }
    Ok(windows)
}

pub fn read_centroids<R: Read>(input: R, source: &str) -> Result<LabelCentroids> {
    let mut rdr = reader(input);
    let mut points: Vec<Option<(f64, f64)>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| read_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(line_error(source, line, "expected `label,arousal,valence`"));
        }
        let code = match record[0].parse::<usize>() {
            Ok(c) => c,
            Err(_) => record[0]
                .parse::<QuadrantLabel>()
                .map_err(|e| line_error(source, line, e))?
                .code(),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| line_error(source, line, format!("`{s}`: {e}")));
        if points.len() <= code {
            points.resize(code + 1, None);
        }
        if points[code].replace((num(&record[1])?, num(&record[2])?)).is_some() {
            return Err(line_error(source, line, format!("label {code} given twice")));
        }
    }
    let points = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::Data(format!("{source}: no centroid for label {i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelCentroids::new(points)?)
}

/// `paper` selects the published DEAP centroids; anything else is a path.
pub fn load_centroids(spec: &str) -> Result<LabelCentroids> {
    if spec.eq_ignore_ascii_case("paper") {
        return Ok(LabelCentroids::paper_defaults());
    }
    let path = Path::new(spec);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_centroids(file, spec)
}

pub fn fuse_windows(windows: &[WindowScores], centroids: &LabelCentroids) -> Result<Vec<FusionResult>> {
    windows
        .iter()
        .map(|w| {
            if w.channels.iter().any(|c| c.len() != centroids.len()) {
                return Err(CoreError::Structural(format!(
                    "window {}: scores have {} labels, centroids {}",
                    w.window,
                    w.channels[0].len(),
                    centroids.len()
                ))
                .into());
            }
            fuse_pipeline(&w.channels, centroids).map_err(Error::from)
        })
        .collect()
}

/// `window,label,name,F_0..,channels,reliabilities`.
pub fn write_fused<W: Write>(out: W, windows: &[WindowScores], results: &[FusionResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let nl = results.first().map_or(0, |r| r.scores.len());
    let mut header = vec!["window".to_string(), "label".into(), "name".into()];
    header.extend((0..nl).map(|j| format!("f{j}")));
    header.extend(["channels".into(), "reliabilities".into()]);
    let err = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(&header).map_err(err)?;
    for (win, r) in windows.iter().zip(results) {
        let mut record = vec![
            win.window.clone(),
            r.label.to_string(),
            r.quadrant().filter(|_| nl == QuadrantLabel::COUNT).map_or(String::new(), |q| q.name().into()),
        ];
        record.extend(r.scores.iter().map(f64::to_string));
        record.push(r.decisions.iter().map(|d| d.channel.as_str()).collect::<Vec<_>>().join(";"));
        record.push(r.decisions.iter().map(|d| d.reliability.to_string()).collect::<Vec<_>>().join(";"));
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}
