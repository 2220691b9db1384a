use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    aggregate_pairwise, build_reference_pool, records_for, score_agreement, score_metrics,
    win_rate_matrix, EvalError, Judgment, JudgmentIndex, MethodReport, MetricsReport, PairwiseLine,
};
use crate::model::TripletRecord;

/// Reads a JSON Lines file, skipping blank lines. Errors name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let file =
        std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            let text = e.to_string();
            let message = match text.rfind(" at line ") {
                Some(cut) => format!("{} (column {})", &text[..cut], e.column()),
                None => text,
            };
            EvalError::BadLine {
                path: path.display().to_string(),
                line: i + 1,
                message,
            }
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Writes one compact JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(|e| EvalError::Io(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&buf)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

/// Final triplets of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub method: String,
    pub triplets: Vec<TripletRecord>,
}

/// Everything an evaluation needs, already loaded.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub outputs: Vec<MethodOutput>,
    pub judgments: Vec<Judgment>,
    pub pairwise: Vec<PairwiseLine>,
    /// Document id to domain label; unknown documents count as "unlabeled".
    pub domains: BTreeMap<String, String>,
}

/// Scores every method against the pooled reference. The scorer is
/// `scorer` when given, else the first annotator in the judgment list.
pub fn evaluate(inputs: &EvalInputs, scorer: Option<&str>) -> Result<MetricsReport, EvalError> {
    let index = JudgmentIndex::new(&inputs.judgments);
    let scorer = scorer
        .map(str::to_string)
        .or_else(|| index.annotators().first().cloned())
        .unwrap_or_default();
    let gold = build_reference_pool(&inputs.outputs, &index, &scorer)?;

    let mut methods = BTreeMap::new();
    for out in &inputs.outputs {
        let records = records_for(out, &gold, &index, &scorer)?;
        if records.is_empty() {
            continue;
        }
        let overall = score_metrics(&records)?;
        let mut by_domain: BTreeMap<String, Vec<_>> = BTreeMap::new();
        for r in records {
            let domain = inputs
                .domains
                .get(&r.doc_id)
                .cloned()
                .unwrap_or_else(|| "unlabeled".to_string());
            by_domain.entry(domain).or_default().push(r);
        }
        let per_domain = by_domain
            .into_iter()
            .map(|(d, rs)| score_metrics(&rs).map(|m| (d, m)))
            .collect::<Result<_, _>>()?;
        methods.insert(
            out.method.clone(),
            MethodReport {
                overall,
                per_domain,
            },
        );
    }
    Ok(MetricsReport {
        scorer,
        methods,
        win_rate: win_rate_matrix(&aggregate_pairwise(&inputs.pairwise)),
        agreement: score_agreement(&index),
    })
}
