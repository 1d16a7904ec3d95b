//! Result files of an experiment run.
//!
//! | file | contents |
//! |---|---|
//! | `report.json` | the full [`ExperimentReport`] |
//! | `report.csv` | one row per modality, then one per fusion set |
//! | `improvements.csv` | fusion minus single-modality accuracy |
//! | `confusion_<name>.csv` | 4×4 counts, rows true, columns predicted |
//! | `fusion_windows.csv` | one row per (set, window, channel) |

use std::fs;
use std::path::{Path, PathBuf};

use affectfuse_core::dataset::QuadrantLabel;
use affectfuse_core::experiment::{ConfusionMatrix, ExperimentReport, FusionRun, ModalityRun};

use crate::error::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const IMPROVEMENTS_CSV: &str = "improvements.csv";
pub const FUSION_WINDOWS_CSV: &str = "fusion_windows.csv";

/// File-name form of a modality or set name: `EEG*` becomes `EEG_star`,
/// other characters outside `[A-Za-z0-9_-]` become `_`.
pub fn file_stem(name: &str) -> String {
    name.replace('*', "_star")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn confusion_file(name: &str) -> String {
    format!("confusion_{}.csv", file_stem(name))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{}: {other:?}", path.display())),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_error(path))
}

fn joined(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Header only when the report has no rows.
pub fn write_summary_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let err = csv_error(path);
    let mut w = writer(path)?;
    w.write_record(["kind", "name", "arch", "channels", "mean_accuracy", "fold_accuracies"])
        .map_err(&err)?;
    for m in &report.modalities {
        w.write_record([
            "modality",
            &m.modality,
            m.arch.name(),
            &m.modality,
            &m.mean_accuracy.to_string(),
            &joined(&m.fold_accuracies),
        ])
        .map_err(&err)?;
    }
    for f in &report.fusions {
        w.write_record([
            "fusion",
            &f.set,
            "",
            &f.channels.join(";"),
            &f.mean_accuracy.to_string(),
            &joined(&f.fold_accuracies),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_improvements_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let err = csv_error(path);
    let mut w = writer(path)?;
    w.write_record(["set", "modality", "single_accuracy", "fusion_accuracy", "delta"])
        .map_err(&err)?;
    for i in &report.improvements {
        w.write_record([
            i.set.clone(),
            i.modality.clone(),
            i.single_accuracy.to_string(),
            i.fusion_accuracy.to_string(),
            i.delta.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_confusion_csv(matrix: &ConfusionMatrix, path: &Path) -> Result<()> {
    let err = csv_error(path);
    let mut w = writer(path)?;
    let names: Vec<String> = (0..matrix.n_labels).map(label_name).collect();
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(&err)?;
    for (t, row) in matrix.counts.iter().enumerate() {
        let mut record = vec![names[t].clone()];
        record.extend(row.iter().map(u64::to_string));
        w.write_record(&record).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn label_name(code: usize) -> String {
    QuadrantLabel::from_code(code).map_or_else(|| code.to_string(), |l| l.name().to_string())
}

/// Per window and channel: the classifier's probabilities (`pr_*`), the
/// reliability-weighted scores (`gau_*`), the channel reliability, the
/// fused scores (`f_*`) and the fused label.
pub fn write_fusion_windows_csv(runs: &[ModalityRun], fusions: &[FusionRun], path: &Path) -> Result<()> {
    let err = csv_error(path);
    let mut w = writer(path)?;
    let nl = QuadrantLabel::COUNT;
    let mut header: Vec<String> = ["set", "subject", "trial", "window", "fold", "label", "predicted", "channel"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["pr", "gau"] {
        header.extend((0..nl).map(|j| format!("{prefix}_{}", label_name(j))));
    }
    header.push("reliability".into());
    header.extend((0..nl).map(|j| format!("f_{}", label_name(j))));
    w.write_record(&header).map_err(&err)?;

    for fusion in fusions {
        for (i, win) in fusion.windows.iter().enumerate() {
            for d in &win.decisions {
                let run = runs
                    .iter()
                    .find(|r| r.modality.name() == d.channel)
                    .ok_or_else(|| Error::Internal(format!("no run for fused channel {}", d.channel)))?;
                let mut record = vec![
                    fusion.name.clone(),
                    win.window.subject.to_string(),
                    win.window.trial.to_string(),
                    win.window.window.to_string(),
                    win.fold.to_string(),
                    label_name(win.label),
                    label_name(win.predicted),
                    d.channel.clone(),
                ];
                record.extend(run.scores[i].iter().map(f64::to_string));
                record.extend(d.gau_pr.iter().map(f64::to_string));
                record.push(d.reliability.to_string());
                record.extend(win.scores.iter().map(f64::to_string));
                w.write_record(&record).map_err(&err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every result file into `dir` and returns their paths.
pub fn emit_report(
    dir: &Path,
    report: &ExperimentReport,
    runs: &[ModalityRun],
    fusions: &[FusionRun],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut file = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    write_json(report, &file(REPORT_JSON))?;
    write_summary_csv(report, &file(REPORT_CSV))?;
    write_improvements_csv(report, &file(IMPROVEMENTS_CSV))?;
    for m in &report.modalities {
        write_confusion_csv(&m.confusion, &file(&confusion_file(&m.modality)))?;
    }
    for f in &report.fusions {
        write_confusion_csv(&f.confusion, &file(&confusion_file(&f.set)))?;
    }
    write_fusion_windows_csv(runs, fusions, &file(FUSION_WINDOWS_CSV))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use affectfuse_core::experiment::{confusion_matrix, FusionRow, Improvement, ModalityRow, SplitMode};
    use affectfuse_core::nnet::ArchTag;

    fn empty() -> ExperimentReport {
        ExperimentReport {
            dataset: "synthetic".into(),
            profile: "synthetic".into(),
            split: SplitMode::Segment,
            folds: 3,
            n_windows: 0,
            precision: "f64".into(),
            config: vec![("seed".into(), "1".into())],
            modalities: vec![],
            fusions: vec![],
            improvements: vec![],
        }
    }

    fn filled() -> ExperimentReport {
        let confusion = confusion_matrix(&[0, 1, 2, 3, 3], &[0, 1, 2, 3, 2], 4).unwrap();
        let mut r = empty();
        r.n_windows = 5;
        r.modalities = vec![
            ModalityRow {
                modality: "EEG*".into(),
                arch: ArchTag::Cnn3d,
                fold_accuracies: vec![0.1, 0.2, 1.0 / 3.0],
                mean_accuracy: (0.1 + 0.2 + 1.0 / 3.0) / 3.0,
                confusion: confusion.clone(),
            },
            ModalityRow {
                modality: "GSR".into(),
                arch: ArchTag::Cnn1d,
                fold_accuracies: vec![0.7, 0.8, 0.9],
                mean_accuracy: 0.8,
                confusion: confusion.clone(),
            },
        ];
        r.fusions = vec![FusionRow {
            set: "EEG*+Peripheral".into(),
            channels: vec!["EEG*".into(), "GSR".into()],
            fold_accuracies: vec![0.9, 0.8, 1.0],
            mean_accuracy: 0.9,
            confusion,
        }];
        r.improvements = vec![Improvement {
            set: "EEG*+Peripheral".into(),
            modality: "GSR".into(),
            single_accuracy: 0.8,
            fusion_accuracy: 0.9,
            delta: 0.9 - 0.8,
        }];
        r
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REPORT_JSON);
        for report in [empty(), filled()] {
            write_json(&report, &path).unwrap();
            assert_eq!(read_json(&path).unwrap(), report);
        }
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REPORT_CSV);
        write_summary_csv(&empty(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "kind,name,arch,channels,mean_accuracy,fold_accuracies\n");
    }

    #[test]
    fn one_row_per_modality_and_fusion() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(dir.path(), &filled(), &[], &[]).unwrap();
        let text = fs::read_to_string(dir.path().join(REPORT_CSV)).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(3).unwrap().starts_with("fusion,EEG*+Peripheral,,EEG*;GSR,0.9,"));
        assert!(files.contains(&dir.path().join("confusion_EEG_star.csv")));
        assert!(files.contains(&dir.path().join("confusion_EEG_star_Peripheral.csv")));
        let confusion = fs::read_to_string(dir.path().join("confusion_GSR.csv")).unwrap();
        assert_eq!(confusion.lines().nth(3).unwrap(), "LAHV,0,0,1,1");
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("Fusion EEG"), "Fusion_EEG");
        assert_eq!(file_stem("ECG_L"), "ECG_L");
        assert_eq!(file_stem("a/b"), "a_b");
    }
}
