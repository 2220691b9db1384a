use std::collections::BTreeSet;
use std::path::Path;

use super::{EvalError, MetricsReport};

/// Method rows, one Precision/Recall/F1 column group per domain and a
/// final group over all documents.
pub fn render_table(report: &MetricsReport) -> String {
    let domains: BTreeSet<&str> = report
        .methods
        .values()
        .flat_map(|m| m.per_domain.keys().map(String::as_str))
        .collect();
    let mut groups: Vec<&str> = domains.into_iter().collect();
    groups.push("All");

    let method_w = report
        .methods
        .keys()
        .map(|m| m.chars().count())
        .chain(["Method".len()])
        .max()
        .unwrap_or(6);
    let col = 9;
    let group_w = 3 * col + 2;

    let mut lines = Vec::new();
    let mut head = format!("{:method_w$}", "");
    let mut sub = format!("{:method_w$}", "Method");
    for g in &groups {
        head.push_str(&format!(" | {g:^group_w$}"));
        sub.push_str(&format!(
            " | {:>col$} {:>col$} {:>col$}",
            "Precision", "Recall", "F1"
        ));
    }
    lines.push(head.trim_end().to_string());
    lines.push(sub);
    lines.push("-".repeat(lines[1].chars().count()));
    for (name, m) in &report.methods {
        let mut row = format!("{name:method_w$}");
        for g in &groups {
            let metrics = if *g == "All" {
                Some(&m.overall)
            } else {
                m.per_domain.get(*g)
            };
            match metrics {
                Some(x) => row.push_str(&format!(
                    " | {:>col$.4} {:>col$.4} {:>col$.4}",
                    x.precision, x.recall, x.f1
                )),
                None => row.push_str(&format!(" | {:>col$} {:>col$} {:>col$}", "-", "-", "-")),
            }
        }
        lines.push(row);
    }

    if !report.win_rate.is_empty() {
        lines.push(String::new());
        lines.push("Coverage win rate (row beats column)".to_string());
        for (i, row) in &report.win_rate {
            for (j, w) in row {
                lines.push(format!("  {i} vs {j}: {w:.4}"));
            }
        }
    }
    if let Some(a) = &report.agreement {
        lines.push(String::new());
        lines.push(format!(
            "Cohen's kappa ({} vs {}, {} items): {:.4}",
            a.annotators[0], a.annotators[1], a.items, a.kappa
        ));
    }
    lines.join("\n") + "\n"
}

/// Writes `path` as pretty JSON and the text table next to it with a
/// `.txt` extension.
pub fn emit_report(report: &MetricsReport, path: &Path) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| EvalError::Io(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(io)?;
    std::fs::write(path.with_extension("txt"), render_table(report)).map_err(io)
}
