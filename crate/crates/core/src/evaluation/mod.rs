//! Pooled-reference scoring with partial credit, pairwise coverage
//! win-rates and Cohen's kappa.

mod io;
mod report;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{TripletKey, TripletRecord};

pub use io::{evaluate, read_jsonl, write_jsonl, EvalInputs, MethodOutput};
pub use report::{emit_report, render_table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("score must be 0, 0.5 or 1, got {0}")]
    InvalidScore(f64),
    #[error("no judgment for {triplet} in document {doc_id}")]
    MissingJudgment { doc_id: String, triplet: String },
    #[error("no evaluation records")]
    NoRecords,
    #[error("document {doc_id} appears twice for {method_i} vs {method_j}")]
    DuplicateDoc {
        doc_id: String,
        method_i: String,
        method_j: String,
    },
    #[error("document {doc_id} has {got} annotator votes for {method_i} vs {method_j}; exactly 2 are needed")]
    AnnotatorCount {
        doc_id: String,
        method_i: String,
        method_j: String,
        got: usize,
    },
    #[error("no pairwise judgments for {method_i} vs {method_j}")]
    NoComparisons { method_i: String, method_j: String },
    #[error("label lists differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("kappa needs at least one item")]
    NoItems,
    #[error("{path} line {line}: {message}")]
    BadLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Io(String),
}

/// Partial-credit judgment: wrong, correct but incomplete, or complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Score {
    Zero,
    Half,
    One,
}

impl Score {
    /// The score in half points: 0, 1 or 2.
    pub fn halves(self) -> u64 {
        match self {
            Score::Zero => 0,
            Score::Half => 1,
            Score::One => 2,
        }
    }

    pub fn value(self) -> f64 {
        self.halves() as f64 / 2.0
    }
}

impl TryFrom<f64> for Score {
    type Error = EvalError;

    fn try_from(v: f64) -> Result<Self, EvalError> {
        if v == 0.0 {
            Ok(Score::Zero)
        } else if v == 0.5 {
            Ok(Score::Half)
        } else if v == 1.0 {
            Ok(Score::One)
        } else {
            Err(EvalError::InvalidScore(v))
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Score::Zero => "0",
            Score::Half => "0.5",
            Score::One => "1",
        })
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Zero => s.serialize_u8(0),
            Score::Half => s.serialize_f64(0.5),
            Score::One => s.serialize_u8(1),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Score::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// One line of a judgment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub doc_id: String,
    pub entity: String,
    pub attribute: String,
    pub value: String,
    pub score: Score,
    pub annotator_id: String,
}

impl Judgment {
    pub fn key(&self) -> TripletKey {
        TripletRecord {
            doc_id: self.doc_id.clone(),
            entity: self.entity.clone(),
            attribute: self.attribute.clone(),
            value: self.value.clone(),
            stage: crate::model::Stage::Initial,
            provenance: None,
        }
        .key()
    }
}

/// Latest score per (annotator, document, triplet).
#[derive(Debug, Clone, Default)]
pub struct JudgmentIndex {
    annotators: Vec<String>,
    scores: HashMap<(String, String, TripletKey), Score>,
}

impl JudgmentIndex {
    /// Later lines revise earlier ones from the same annotator.
    pub fn new(judgments: &[Judgment]) -> Self {
        let mut idx = JudgmentIndex::default();
        for j in judgments {
            if !idx.annotators.contains(&j.annotator_id) {
                idx.annotators.push(j.annotator_id.clone());
            }
            idx.scores
                .insert((j.annotator_id.clone(), j.doc_id.clone(), j.key()), j.score);
        }
        idx
    }

    /// Annotators in order of first appearance.
    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn get(&self, annotator: &str, doc_id: &str, key: &TripletKey) -> Option<Score> {
        self.scores
            .get(&(annotator.to_string(), doc_id.to_string(), key.clone()))
            .copied()
    }

    /// Keys judged by `annotator`, sorted.
    fn judged_by(&self, annotator: &str) -> Vec<(String, TripletKey)> {
        let mut keys: Vec<_> = self
            .scores
            .keys()
            .filter(|(a, _, _)| a == annotator)
            .map(|(_, d, k)| (d.clone(), k.clone()))
            .collect();
        keys.sort();
        keys
    }
}

/// Predicted triplets of one method on one document, with their scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub doc_id: String,
    pub scores: Vec<Score>,
    pub gold_count: u64,
}

/// Gold size per document: distinct normalized pooled triplets the scorer
/// gave a positive score.
pub fn build_reference_pool(
    outputs: &[MethodOutput],
    index: &JudgmentIndex,
    scorer: &str,
) -> Result<BTreeMap<String, u64>, EvalError> {
    let mut seen: HashSet<(String, TripletKey)> = HashSet::new();
    let mut gold: BTreeMap<String, u64> = BTreeMap::new();
    for out in outputs {
        for rec in &out.triplets {
            let key = rec.key();
            gold.entry(rec.doc_id.clone()).or_insert(0);
            if !seen.insert((rec.doc_id.clone(), key.clone())) {
                continue;
            }
            let score =
                index
                    .get(scorer, &rec.doc_id, &key)
                    .ok_or_else(|| EvalError::MissingJudgment {
                        doc_id: rec.doc_id.clone(),
                        triplet: format!("<{}, {}, {}>", rec.entity, rec.attribute, rec.value),
                    })?;
            if score != Score::Zero {
                *gold.get_mut(&rec.doc_id).expect("inserted above") += 1;
            }
        }
    }
    Ok(gold)
}

/// One record per document in `gold`, for one method's output.
pub fn records_for(
    output: &MethodOutput,
    gold: &BTreeMap<String, u64>,
    index: &JudgmentIndex,
    scorer: &str,
) -> Result<Vec<EvaluationRecord>, EvalError> {
    let mut by_doc: BTreeMap<&str, Vec<Score>> =
        gold.keys().map(|d| (d.as_str(), Vec::new())).collect();
    let mut seen = HashSet::new();
    for rec in &output.triplets {
        let key = rec.key();
        if !seen.insert((rec.doc_id.clone(), key.clone())) {
            continue;
        }
        let score =
            index
                .get(scorer, &rec.doc_id, &key)
                .ok_or_else(|| EvalError::MissingJudgment {
                    doc_id: rec.doc_id.clone(),
                    triplet: format!("<{}, {}, {}>", rec.entity, rec.attribute, rec.value),
                })?;
        by_doc.entry(rec.doc_id.as_str()).or_default().push(score);
    }
    Ok(by_doc
        .into_iter()
        .map(|(doc, scores)| EvaluationRecord {
            doc_id: doc.to_string(),
            scores,
            gold_count: gold.get(doc).copied().unwrap_or(0),
        })
        .collect())
}

/// Micro-averaged precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Sum of scores.
    pub credit: f64,
    pub predicted: u64,
    pub gold: u64,
    /// Set when there were no predictions and precision was defined as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    /// Set when the gold set was empty and recall was defined as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

/// Pooled sums across all records: credit over predictions and credit over
/// gold. An empty denominator gives 0 and sets the matching flag.
pub fn score_metrics(records: &[EvaluationRecord]) -> Result<Metrics, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let halves: u64 = records
        .iter()
        .flat_map(|r| &r.scores)
        .map(|s| s.halves())
        .sum();
    let predicted: u64 = records.iter().map(|r| r.scores.len() as u64).sum();
    let gold: u64 = records.iter().map(|r| r.gold_count).sum();
    let credit = halves as f64 / 2.0;
    let ratio = |den: u64| if den == 0 { 0.0 } else { credit / den as f64 };
    let precision = ratio(predicted);
    let recall = ratio(gold);
    // 2PR/(P+R) with the credit cancelled
    let f1 = if predicted == 0 || gold == 0 || halves == 0 {
        0.0
    } else {
        halves as f64 / (predicted + gold) as f64
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        credit,
        predicted,
        gold,
        precision_undefined: predicted == 0,
        recall_undefined: gold == 0,
    })
}

/// One line of a pairwise file: did `method_i` cover more than `method_j`?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseLine {
    pub doc_id: String,
    pub method_i: String,
    pub method_j: String,
    pub annotator_id: String,
    pub i_wins: bool,
}

/// All votes on one document for one ordered method pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    pub doc_id: String,
    pub method_i: String,
    pub method_j: String,
    pub annotator_votes: BTreeMap<String, bool>,
}

/// Groups lines by (document, method_i, method_j); an annotator's later
/// line replaces their earlier one. Groups keep first-appearance order.
pub fn aggregate_pairwise(lines: &[PairwiseLine]) -> Vec<PairwiseJudgment> {
    let mut out: Vec<PairwiseJudgment> = Vec::new();
    let mut index: HashMap<(String, String, String), usize> = HashMap::new();
    for l in lines {
        let key = (l.doc_id.clone(), l.method_i.clone(), l.method_j.clone());
        let i = *index.entry(key).or_insert_with(|| {
            out.push(PairwiseJudgment {
                doc_id: l.doc_id.clone(),
                method_i: l.method_i.clone(),
                method_j: l.method_j.clone(),
                annotator_votes: BTreeMap::new(),
            });
            out.len() - 1
        });
        out[i]
            .annotator_votes
            .insert(l.annotator_id.clone(), l.i_wins);
    }
    out
}

/// Share of judged documents on which both annotators say `method_i` wins.
/// Split votes count in the denominator only.
pub fn coverage_win_rate(
    judgments: &[PairwiseJudgment],
    method_i: &str,
    method_j: &str,
) -> Result<f64, EvalError> {
    let mut docs = HashSet::new();
    let mut wins = 0u64;
    for j in judgments
        .iter()
        .filter(|j| j.method_i == method_i && j.method_j == method_j)
    {
        if !docs.insert(j.doc_id.as_str()) {
            return Err(EvalError::DuplicateDoc {
                doc_id: j.doc_id.clone(),
                method_i: method_i.into(),
                method_j: method_j.into(),
            });
        }
        if j.annotator_votes.len() != 2 {
            return Err(EvalError::AnnotatorCount {
                doc_id: j.doc_id.clone(),
                method_i: method_i.into(),
                method_j: method_j.into(),
                got: j.annotator_votes.len(),
            });
        }
        if j.annotator_votes.values().all(|v| *v) {
            wins += 1;
        }
    }
    if docs.is_empty() {
        return Err(EvalError::NoComparisons {
            method_i: method_i.into(),
            method_j: method_j.into(),
        });
    }
    Ok(wins as f64 / docs.len() as f64)
}

/// Win rates for every ordered pair with complete comparisons. Documents
/// that do not yet have exactly two votes are left out.
pub fn win_rate_matrix(judgments: &[PairwiseJudgment]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let complete: Vec<PairwiseJudgment> = judgments
        .iter()
        .filter(|j| j.annotator_votes.len() == 2)
        .cloned()
        .collect();
    let pairs: std::collections::BTreeSet<(String, String)> = complete
        .iter()
        .map(|j| (j.method_i.clone(), j.method_j.clone()))
        .collect();
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, j) in pairs {
        if let Ok(w) = coverage_win_rate(&complete, &i, &j) {
            out.entry(i).or_default().insert(j, w);
        }
    }
    out
}

/// `(p_o − p_e) / (1 − p_e)` from marginal label frequencies; 1 when both
/// annotators use one and the same label throughout.
pub fn cohen_kappa<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::NoItems);
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut ca: HashMap<&L, u128> = HashMap::new();
    let mut cb: HashMap<&L, u128> = HashMap::new();
    for x in a {
        *ca.entry(x).or_default() += 1;
    }
    for y in b {
        *cb.entry(y).or_default() += 1;
    }
    let chance: u128 = ca
        .iter()
        .map(|(l, c)| c * cb.get(l).copied().unwrap_or(0))
        .sum();
    // everything scaled by n²
    if chance == n * n {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    let num = (agree * n) as f64 - chance as f64;
    let den = (n * n - chance) as f64;
    Ok(num / den)
}

/// Agreement between two annotators on the triplets both judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub annotators: [String; 2],
    pub items: usize,
    pub kappa: f64,
}

/// Kappa between the first two annotators of `index`, over the triplets
/// both scored. `None` with fewer than two annotators or no overlap.
pub fn score_agreement(index: &JudgmentIndex) -> Option<Agreement> {
    let [a, b] = index.annotators().get(..2)? else {
        return None;
    };
    let (mut la, mut lb) = (Vec::new(), Vec::new());
    for (doc, key) in index.judged_by(a) {
        if let Some(sb) = index.get(b, &doc, &key) {
            la.push(index.get(a, &doc, &key).expect("judged by a"));
            lb.push(sb);
        }
    }
    let kappa = cohen_kappa(&la, &lb).ok()?;
    Some(Agreement {
        annotators: [a.clone(), b.clone()],
        items: la.len(),
        kappa,
    })
}

/// Metrics for one method, overall and per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub overall: Metrics,
    pub per_domain: BTreeMap<String, Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Annotator whose scores define S(t).
    pub scorer: String,
    pub methods: BTreeMap<String, MethodReport>,
    /// `win_rate[i][j]`: share of documents where both annotators found
    /// method i more complete than method j.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub win_rate: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
}
