//! Side-by-side accuracy tables across run reports.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{RunError, Stage};
use crate::report::Report;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub label: String,
    pub overall: f64,
    /// Aligned with [`Comparison::classes`].
    pub per_class: Vec<Option<f64>>,
    pub dataset_fingerprint: String,
    pub split_fingerprint: String,
    /// Dataset or split differs from the first column.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub classes: Vec<String>,
    pub columns: Vec<Column>,
}

impl Comparison {
    pub fn has_mismatch(&self) -> bool {
        self.columns.iter().any(|c| c.mismatch)
    }

    pub fn render(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        let first = self.classes.iter().map(String::len).max().unwrap_or(0).max(7);
        let widths: Vec<usize> = self.columns.iter().map(|c| c.label.len().max(8)).collect();
        let mut s = String::new();
        let _ = write!(s, "{:<first$}", "");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(s, "  {:>w$}", c.label);
        }
        s.push('\n');
        for (i, class) in self.classes.iter().enumerate() {
            let _ = write!(s, "{class:<first$}");
            for (c, w) in self.columns.iter().zip(&widths) {
                let _ = write!(s, "  {:>w$}", cell(c.per_class[i]));
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<first$}", "overall");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(s, "  {:>w$}", cell(Some(c.overall)));
        }
        s.push('\n');
        for c in self.columns.iter().filter(|c| c.mismatch) {
            let _ = writeln!(
                s,
                "MISMATCH {}: dataset {} split {} differ from {}",
                c.label,
                &c.dataset_fingerprint[..12.min(c.dataset_fingerprint.len())],
                &c.split_fingerprint[..12.min(c.split_fingerprint.len())],
                self.columns[0].label
            );
        }
        s
    }
}

/// Aligns reports into one table; column order follows the input.
pub fn compare_reports(reports: &[Report]) -> Result<Comparison, RunError> {
    let Some(first) = reports.first() else {
        return Err(RunError::new(Stage::Compare, "no reports to compare"));
    };
    let mut classes: Vec<String> = first.accuracy.per_class.iter().map(|c| c.class.clone()).collect();
    for r in &reports[1..] {
        for c in &r.accuracy.per_class {
            if !classes.contains(&c.class) {
                classes.push(c.class.clone());
            }
        }
    }
    let columns = reports
        .iter()
        .map(|r| Column {
            label: r.name.clone(),
            overall: r.accuracy.overall,
            per_class: classes
                .iter()
                .map(|name| r.accuracy.per_class.iter().find(|c| &c.class == name).and_then(|c| c.accuracy))
                .collect(),
            dataset_fingerprint: r.dataset.fingerprint.clone(),
            split_fingerprint: r.dataset.split_fingerprint.clone(),
            mismatch: r.dataset.fingerprint != first.dataset.fingerprint
                || r.dataset.split_fingerprint != first.dataset.split_fingerprint,
        })
        .collect();
    Ok(Comparison { classes, columns })
}

/// Loads each path (report file or run directory) and compares them.
pub fn compare_runs(paths: &[PathBuf]) -> Result<Comparison, RunError> {
    let reports = paths.iter().map(|p| Report::load(p)).collect::<Result<Vec<_>, _>>()?;
    compare_reports(&reports)
}
