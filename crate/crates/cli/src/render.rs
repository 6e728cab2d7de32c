//! Plain-text result tables.

use crate::experiment::{CellOutcome, ExperimentReport};

const MISSING: &str = "—";

/// `0` stays `0`; small values switch to scientific notation.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn width(s: &str) -> usize {
    s.chars().count()
}

fn pad(s: &str, w: usize) -> String {
    format!("{s}{}", " ".repeat(w.saturating_sub(width(s))))
}

/// Lays out `rows` under `header`, columns separated by two spaces. An
/// optional group row labels runs of columns.
fn table(groups: Option<(&str, &[(String, usize)])>, header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| width(h)).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(width(c));
        }
    }
    // widen the last column of a group if its label does not fit
    if let Some((_, gs)) = groups {
        let mut at = 1;
        for (label, span) in gs {
            let inner: usize = widths[at..at + span].iter().sum::<usize>() + 2 * (span - 1);
            if width(label) > inner {
                widths[at + span - 1] += width(label) - inner;
            }
            at += span;
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| pad(c, w)).collect();
        format!("{}\n", padded.join("  ").trim_end())
    };
    let mut out = String::new();
    if let Some((first, gs)) = groups {
        let mut cells = vec![pad(first, widths[0])];
        let mut at = 1;
        for (label, span) in gs {
            let inner: usize = widths[at..at + span].iter().sum::<usize>() + 2 * (span - 1);
            cells.push(pad(label, inner));
            at += span;
        }
        out.push_str(&format!("{}\n", cells.join("  ").trim_end()));
    }
    out.push_str(&line(header));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("{}\n", rule.join("  ")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Metric tables (accuracy, weighted precision, recall, F1 per arm) and
/// p-value tables, one of each per test set.
pub fn render_tables(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let groups: Vec<(String, usize)> = report.arms.iter().map(|a| (a.label().to_string(), 4)).collect();
    let mut header = vec!["Classifier".to_string()];
    for _ in &report.arms {
        header.extend(["Acc", "Pre", "Rec", "F1"].map(String::from));
    }
    let pairs: Vec<_> = report
        .arms
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| report.arms[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let tests: Vec<Option<&String>> = if report.test_sets.is_empty() {
        vec![None]
    } else {
        report.test_sets.iter().map(Some).collect()
    };
    for test in tests {
        let title = test.map_or("(no test sets)", |t| t.as_str());
        out.push_str(&format!("Performance on {title}\n"));
        let rows: Vec<Vec<String>> = report
            .classifiers
            .iter()
            .map(|clf| {
                let mut row = vec![clf.clone()];
                for &arm in &report.arms {
                    let cell = test.and_then(|t| report.cell(arm, clf, t)).map(|c| &c.outcome);
                    match cell {
                        Some(CellOutcome::Ok { metrics: m, .. }) => row.extend(
                            [m.accuracy, m.precision, m.recall, m.f1].map(|v| format!("{v:.4}")),
                        ),
                        _ => row.extend([MISSING; 4].map(String::from)),
                    }
                }
                row
            })
            .collect();
        out.push_str(&table(Some(("", &groups)), &header, &rows));
        out.push('\n');

        out.push_str(&format!("Welch t-test p-values on {title}\n"));
        let mut th = vec!["Comparing approaches".to_string()];
        th.extend(report.classifiers.iter().cloned());
        let rows: Vec<Vec<String>> = pairs
            .iter()
            .map(|&(a, b)| {
                let mut row = vec![format!("{a}, {b}")];
                for clf in &report.classifiers {
                    let p = test.and_then(|t| report.ttest(clf, t, a, b)).and_then(|t| t.p);
                    row.push(p.map_or(MISSING.to_string(), format_p));
                }
                row
            })
            .collect();
        out.push_str(&table(None, &th, &rows));
        out.push('\n');
    }
    out
}
