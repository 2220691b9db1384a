//! Per-document orchestration (extract, enrich, refine, unify), corpus runs
//! and the artifacts they leave on disk.

mod config;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrichment::enrich;
use crate::error::ModelError;
use crate::evaluation::write_jsonl;
use crate::extraction::{extract_cot, extract_fewshot, extract_initial, ExtractionError};
use crate::gateway::GatewayError;
use crate::llm::{ordered_map, Llm};
use crate::model::{Document, EntityStructure, EntityTypeSet, Stage, TripletRecord, TripletSet};
use crate::prompt::PromptError;
use crate::refinement::refine;
use crate::unification::{
    construct_structures, filter_structures, group_by_entity, structures_to_json, Construction,
    Unified,
};

pub use config::{
    BackendConfig, BaselineConfig, CassetteConfig, PipelineConfig, RefineConfig, StageFlags,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Prompt(PromptError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(String),
}

/// Wall-clock milliseconds per stage for one document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extract_ms: u64,
    pub enrich_ms: u64,
    pub refine_ms: u64,
    pub unify_ms: u64,
}

/// All intermediate and final results for one document.
#[derive(Debug, Clone)]
pub struct DocOutcome {
    pub doc_id: String,
    pub initial: TripletSet,
    pub enriched: TripletSet,
    pub refined: TripletSet,
    pub structures: Vec<EntityStructure>,
    /// Pairs across all constructed structures, before type filtering.
    pub constructed_pairs: usize,
    pub dropped: usize,
    pub rejected: usize,
    pub diagnostics: Vec<String>,
    pub timings: StageTimings,
}

fn ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

/// Runs the pipeline on one document. Only a failed initial extraction is
/// fatal; later stages fall back as described on each stage and leave a
/// diagnostic. Disabled stages re-tag their input without changing it.
pub fn run_zoes(
    llm: &Llm,
    doc: &Document,
    types: &EntityTypeSet,
    cfg: &PipelineConfig,
) -> Result<DocOutcome, PipelineError> {
    if types.is_empty() {
        return Err(PipelineError::Config(
            "at least one entity type is required".into(),
        ));
    }
    let mut diagnostics = Vec::new();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let initial = extract_initial(llm, doc)?;
    timings.extract_ms = ms(t);

    let t = Instant::now();
    let enriched = if cfg.stages.enrich {
        match enrich(llm, doc, &initial, &cfg.enrichment) {
            Ok(e) => {
                diagnostics.extend(e.diagnostics);
                e.triplets
            }
            Err(e) => {
                diagnostics.push(format!("enrichment skipped: {e}"));
                initial.clone().promote(Stage::Enriched)?
            }
        }
    } else {
        initial.clone().promote(Stage::Enriched)?
    };
    timings.enrich_ms = ms(t);

    let t = Instant::now();
    let refined = if cfg.stages.refine {
        let r = refine(llm, &enriched, doc, cfg.refinement.match_mode);
        diagnostics.extend(r.diagnostics);
        r.triplets
    } else {
        enriched.clone().promote(Stage::Refined)?
    };
    timings.refine_ms = ms(t);

    let t = Instant::now();
    let built = match construct_structures(llm, doc, &refined) {
        Ok(c) => c,
        Err(e) => {
            diagnostics.push(format!(
                "structure construction failed ({e}); grouping by entity name"
            ));
            group_by_entity(doc, &refined)
        }
    };
    let constructed_pairs = built.pair_count();
    let unified = match filter_structures(llm, doc, built.clone(), types) {
        Ok(u) => u,
        Err(e) => {
            diagnostics.push(format!("type filtration failed ({e}); no structures kept"));
            let Construction {
                structures,
                dropped,
                diagnostics: d,
            } = built;
            Unified {
                structures: Vec::new(),
                rejected: structures,
                dropped,
                diagnostics: d,
            }
        }
    };
    timings.unify_ms = ms(t);
    diagnostics.extend(unified.diagnostics);

    Ok(DocOutcome {
        doc_id: doc.id.clone(),
        initial,
        enriched,
        refined,
        structures: unified.structures,
        constructed_pairs,
        dropped: unified.dropped.len(),
        rejected: unified.rejected.len(),
        diagnostics,
        timings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Cot,
    Fewshot,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Cot => "cot",
            BaselineMethod::Fewshot => "fewshot",
        }
    }
}

/// A corpus line that could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIssue {
    pub line: usize,
    pub message: String,
}

/// Reads a JSON Lines corpus. Malformed lines, invalid documents and
/// repeated ids are reported and skipped.
pub fn read_corpus(path: &Path) -> Result<(Vec<Document>, Vec<CorpusIssue>), PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let mut docs = Vec::new();
    let mut issues = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let issue = |message: String| CorpusIssue {
            line: i + 1,
            message,
        };
        let doc: Document = match serde_json::from_str(line) {
            Ok(d) => d,
            Err(e) => {
                issues.push(issue(e.to_string()));
                continue;
            }
        };
        if let Err(e) = doc.validate() {
            issues.push(issue(e.to_string()));
        } else if !ids.insert(doc.id.clone()) {
            issues.push(issue(format!("duplicate document id {:?}", doc.id)));
        } else {
            docs.push(doc);
        }
    }
    Ok((docs, issues))
}

/// Stage counts and diagnostics for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSummary {
    pub doc_id: String,
    pub initial: usize,
    pub enriched: usize,
    pub refined: usize,
    pub structures: usize,
    pub pairs: usize,
    /// Pairs before type filtering; together with `dropped` this equals `refined`.
    pub constructed_pairs: usize,
    pub dropped: usize,
    pub rejected: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedDoc {
    pub doc_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: String,
    pub types: Vec<String>,
    pub config: PipelineConfig,
    pub documents: Vec<DocSummary>,
    pub failed: Vec<FailedDoc>,
    pub corpus_issues: Vec<CorpusIssue>,
    /// Model calls per prompt tag.
    pub calls: BTreeMap<String, usize>,
}

/// File name for a document's structure file.
pub fn structure_file_name(doc_id: &str) -> String {
    let safe: String = doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn write_records(path: &Path, records: &[TripletRecord]) -> Result<(), PipelineError> {
    write_jsonl(path, records).map_err(|e| PipelineError::Io(e.to_string()))
}

fn records<'a>(sets: impl Iterator<Item = &'a TripletSet>) -> Vec<TripletRecord> {
    sets.flat_map(|s| s.iter().map(TripletRecord::from))
        .collect()
}

/// Final structures flattened to one refined record per pair.
pub fn flatten_structures(structures: &[EntityStructure]) -> Vec<TripletRecord> {
    structures
        .iter()
        .flat_map(|s| {
            s.pairs.iter().map(|(a, v)| TripletRecord {
                doc_id: s.source_doc.clone(),
                entity: s.entity.clone(),
                attribute: a.clone(),
                value: v.clone(),
                stage: Stage::Refined,
                provenance: None,
            })
        })
        .collect()
}

fn call_counts(llm: &Llm) -> BTreeMap<String, usize> {
    let mut calls = BTreeMap::new();
    for e in llm.gateway().trace() {
        *calls
            .entry(e.tag.unwrap_or_else(|| "untagged".into()))
            .or_insert(0) += 1;
    }
    calls
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn prepare_dir(dir: &Path) -> Result<(), PipelineError> {
    for sub in ["triplets", "structures"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    Ok(())
}

/// Runs the pipeline over a corpus file and writes, under `cfg.output_dir`:
/// `triplets/{initial,enriched,refined}.jsonl`, `structures/<doc>.json`,
/// `predictions.jsonl` (final pairs), `manifest.json` and `timings.json`.
pub fn run_corpus(
    llm: &Llm,
    corpus: &Path,
    types: &EntityTypeSet,
    cfg: &PipelineConfig,
) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    if types.is_empty() {
        return Err(PipelineError::Config(
            "at least one entity type is required".into(),
        ));
    }
    let (docs, corpus_issues) = read_corpus(corpus)?;
    let out = &cfg.output_dir;
    prepare_dir(out)?;

    let results = ordered_map(&docs, cfg.workers, |d| run_zoes(llm, d, types, cfg));
    let mut done = Vec::new();
    let mut failed = Vec::new();
    for (doc, r) in docs.iter().zip(results) {
        match r {
            Ok(o) => done.push(o),
            Err(e) => {
                log::error!("{}: {e}", doc.id);
                failed.push(FailedDoc {
                    doc_id: doc.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    write_records(
        &out.join("triplets/initial.jsonl"),
        &records(done.iter().map(|o| &o.initial)),
    )?;
    write_records(
        &out.join("triplets/enriched.jsonl"),
        &records(done.iter().map(|o| &o.enriched)),
    )?;
    write_records(
        &out.join("triplets/refined.jsonl"),
        &records(done.iter().map(|o| &o.refined)),
    )?;
    let mut predictions = Vec::new();
    let mut timings = BTreeMap::new();
    let mut documents = Vec::new();
    for o in &done {
        let path = out.join("structures").join(structure_file_name(&o.doc_id));
        std::fs::write(&path, structures_to_json(&o.structures)).map_err(io_err(&path))?;
        predictions.extend(flatten_structures(&o.structures));
        timings.insert(o.doc_id.clone(), o.timings);
        documents.push(DocSummary {
            doc_id: o.doc_id.clone(),
            initial: o.initial.len(),
            enriched: o.enriched.len(),
            refined: o.refined.len(),
            structures: o.structures.len(),
            pairs: o.structures.iter().map(|s| s.pairs.len()).sum(),
            constructed_pairs: o.constructed_pairs,
            dropped: o.dropped,
            rejected: o.rejected,
            diagnostics: o.diagnostics.clone(),
        });
    }
    write_records(&out.join("predictions.jsonl"), &predictions)?;

    let manifest = RunManifest {
        method: cfg.method_name(),
        types: types.iter().map(str::to_string).collect(),
        config: cfg.clone(),
        documents,
        failed,
        corpus_issues,
        calls: call_counts(llm),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("timings.json"), &timings)?;
    Ok(manifest)
}

/// Runs a type-constrained baseline over a corpus. Writes
/// `triplets/initial.jsonl`, the same rows as `predictions.jsonl`, and a
/// manifest, under `cfg.output_dir`.
pub fn run_baseline(
    llm: &Llm,
    method: BaselineMethod,
    corpus: &Path,
    types: &EntityTypeSet,
    cfg: &PipelineConfig,
) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    if types.is_empty() {
        return Err(ExtractionError::InvalidTypes.into());
    }
    if method == BaselineMethod::Fewshot && cfg.baseline.demos.iter().all(|d| d.trim().is_empty()) {
        return Err(ExtractionError::EmptyDemos.into());
    }
    let (docs, corpus_issues) = read_corpus(corpus)?;
    let out = &cfg.output_dir;
    prepare_dir(out)?;

    let results = ordered_map(&docs, cfg.workers, |d| match method {
        BaselineMethod::Cot => extract_cot(llm, d, types),
        BaselineMethod::Fewshot => extract_fewshot(llm, d, types, &cfg.baseline.demos),
    });
    let mut sets = Vec::new();
    let mut documents = Vec::new();
    let mut failed = Vec::new();
    for (doc, r) in docs.iter().zip(results) {
        match r {
            Ok(set) => {
                documents.push(DocSummary {
                    doc_id: doc.id.clone(),
                    initial: set.len(),
                    enriched: 0,
                    refined: 0,
                    structures: 0,
                    pairs: 0,
                    constructed_pairs: 0,
                    dropped: 0,
                    rejected: 0,
                    diagnostics: Vec::new(),
                });
                sets.push(set);
            }
            Err(e) => failed.push(FailedDoc {
                doc_id: doc.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let rows = records(sets.iter());
    write_records(&out.join("triplets/initial.jsonl"), &rows)?;
    write_records(&out.join("predictions.jsonl"), &rows)?;
    let manifest = RunManifest {
        method: cfg
            .method
            .clone()
            .unwrap_or_else(|| method.name().to_string()),
        types: types.iter().map(str::to_string).collect(),
        config: cfg.clone(),
        documents,
        failed,
        corpus_issues,
        calls: call_counts(llm),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Where a run directory keeps its final triplets.
pub fn predictions_path(run_dir: &Path) -> PathBuf {
    run_dir.join("predictions.jsonl")
}
