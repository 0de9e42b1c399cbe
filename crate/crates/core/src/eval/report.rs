//! CSV and Markdown rendering of evaluation results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{EvalReport, LearningCurve};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 10] = [
    "extractor",
    "extractor_params",
    "classifier",
    "classifier_params",
    "fold",
    "accuracy",
    "n_train",
    "n_test",
    "seed",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "extractor",
    "extractor_params",
    "classifier",
    "classifier_params",
    "dim",
    "n_samples",
    "k",
    "mean",
    "std",
];

pub const CURVE_HEADER: [&str; 7] = [
    "classifier",
    "fraction",
    "train_size",
    "train_mean",
    "train_std",
    "test_mean",
    "test_std",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// One record per (extractor, classifier, fold).
pub fn write_results_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.config.extractor.clone(),
                r.config.extractor_params.clone(),
                r.config.classifier.clone(),
                r.config.classifier_params.clone(),
                (f.fold + 1).to_string(),
                format!("{:.2}", f.accuracy),
                f.n_train.to_string(),
                f.n_test.to_string(),
                r.config.seed.to_string(),
                format!("{:.1}", f.train_ms + f.predict_ms),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One mean/std record per report.
pub fn write_summary_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.write_record([
            r.config.extractor.clone(),
            r.config.extractor_params.clone(),
            r.config.classifier.clone(),
            r.config.classifier_params.clone(),
            r.dim.to_string(),
            r.n_samples.to_string(),
            r.config.k.to_string(),
            format!("{:.2}", r.mean),
            format!("{:.2}", r.std),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(path: &Path, curves: &[LearningCurve]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CURVE_HEADER)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.classifier.clone(),
                p.fraction.to_string(),
                p.train_size.to_string(),
                format!("{:.4}", p.train_mean()),
                format!("{:.4}", p.train_std()),
                format!("{:.4}", p.test_mean()),
                format!("{:.4}", p.test_std()),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Row label for a feature set: the extractor name, plus the layer for
/// feature files that carry one (`vgg19 fc1`).
pub fn row_key(r: &EvalReport) -> String {
    let layer = r
        .config
        .extractor_params
        .split(',')
        .find_map(|kv| kv.trim().strip_prefix("layer="));
    match layer {
        Some(l) => format!("{} {l}", r.config.extractor),
        None => r.config.extractor.clone(),
    }
}

/// Best cell of a row; the first one listed wins ties.
fn best_index(cells: &[&EvalReport]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if best.is_none_or(|b| c.mean > cells[b].mean) {
            best = Some(i);
        }
    }
    best
}

/// Markdown results document: a per-fold grid (feature set × classifier) with
/// the best cell of each row in bold, followed by a best-of summary.
/// Feature sets listed in `absent` get a placeholder row.
pub fn render_report(reports: &[EvalReport], absent: &[String]) -> String {
    let mut classifiers: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), &EvalReport> = BTreeMap::new();
    for r in reports {
        if !classifiers.contains(&r.config.classifier) {
            classifiers.push(r.config.classifier.clone());
        }
        let key = row_key(r);
        if !rows.contains(&key) {
            rows.push(key.clone());
        }
        cells.insert((key, r.config.classifier.clone()), r);
    }

    let mut out = String::new();
    let _ = writeln!(out, "## Cross-validation accuracy\n");
    let _ = write!(out, "| Features | Fold |");
    for c in &classifiers {
        let _ = write!(out, " {} |", c.to_uppercase());
    }
    let _ = write!(out, "\n|---|---|");
    for _ in &classifiers {
        let _ = write!(out, "---|");
    }
    out.push('\n');

    for row in &rows {
        let present: Vec<Option<&EvalReport>> = classifiers
            .iter()
            .map(|c| cells.get(&(row.clone(), c.clone())).copied())
            .collect();
        let filled: Vec<&EvalReport> = present.iter().flatten().copied().collect();
        let best = best_index(&filled).map(|i| filled[i].config.classifier.clone());
        let k = filled.iter().map(|r| r.folds.len()).max().unwrap_or(0);
        let bold = |s: String, is_best: bool| if is_best { format!("**{s}**") } else { s };
        for fold in 0..k {
            let _ = write!(
                out,
                "| {} | Fold {} |",
                if fold == 0 { row.as_str() } else { "" },
                fold + 1
            );
            for cell in &present {
                match cell.and_then(|r| r.folds.get(fold).map(|f| (r, f))) {
                    Some((r, f)) => {
                        let is_best = best.as_deref() == Some(r.config.classifier.as_str());
                        let _ = write!(out, " {} |", bold(format!("{:.2}%", f.accuracy), is_best));
                    }
                    None => out.push_str(" – |"),
                }
            }
            out.push('\n');
        }
        let _ = write!(out, "| {} | All Folds |", if k == 0 { row.as_str() } else { "" });
        for cell in &present {
            match cell {
                Some(r) => {
                    let is_best = best.as_deref() == Some(r.config.classifier.as_str());
                    let _ = write!(out, " {} |", bold(r.summary(), is_best));
                }
                None => out.push_str(" – |"),
            }
        }
        out.push('\n');
    }
    for name in absent {
        let _ = write!(out, "| {name} | absent |");
        for _ in &classifiers {
            out.push_str(" – |");
        }
        out.push('\n');
    }

    let _ = writeln!(out, "\n## Best accuracy per feature set\n");
    let _ = writeln!(out, "| Features | Feature Size | Best Accuracy | Best Classifier |");
    let _ = writeln!(out, "|---|---|---|---|");
    let mut summary: Vec<(&String, &EvalReport)> = rows
        .iter()
        .filter_map(|row| {
            let filled: Vec<&EvalReport> = classifiers
                .iter()
                .filter_map(|c| cells.get(&(row.clone(), c.clone())).copied())
                .collect();
            best_index(&filled).map(|i| (row, filled[i]))
        })
        .collect();
    summary.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean));
    for (row, r) in summary {
        let _ = writeln!(
            out,
            "| {row} | {} | {:.2}% | {} |",
            r.dim,
            r.mean,
            r.config.classifier.to_uppercase()
        );
    }
    out
}
