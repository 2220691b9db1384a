//! Open zero-shot triplet extraction and the type-constrained baselines.

use thiserror::Error;

use crate::llm::{Llm, LlmError};
use crate::model::{normalize, Document, EntityTypeSet, Stage, Triplet, TripletSet};
use crate::prompt::{parse_triplets, RawTriplet, TemplateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("entity type set is empty")]
    InvalidTypes,
    #[error("few-shot extraction needs at least one demonstration")]
    EmptyDemos,
}

/// Turns parsed rows into triplets, skipping rows with a field that is
/// empty after normalization.
pub fn to_triplets(rows: &[RawTriplet], stage: Stage, doc_id: &str) -> Vec<Triplet> {
    rows.iter()
        .filter(|r| {
            let keep = [&r.entity, &r.attribute, &r.value]
                .iter()
                .all(|f| !normalize(f).canonical.is_empty());
            if !keep {
                log::debug!("{doc_id}: skipping incomplete triplet {r:?}");
            }
            keep
        })
        .filter_map(|r| Triplet::new(&r.entity, &r.attribute, &r.value, stage, doc_id).ok())
        .collect()
}

fn run(
    llm: &Llm,
    id: TemplateId,
    bindings: &[(&str, &str)],
    doc: &Document,
) -> Result<TripletSet, ExtractionError> {
    let rows = llm.ask(id, bindings, parse_triplets)?.payload;
    let set = TripletSet::new(to_triplets(&rows, Stage::Initial, &doc.id), Stage::Initial)
        .expect("fresh triplets start at the initial stage");
    Ok(set)
}

/// One open extraction call with no type constraint.
pub fn extract_initial(llm: &Llm, doc: &Document) -> Result<TripletSet, ExtractionError> {
    run(
        llm,
        TemplateId::ZeroShotExtraction,
        &[("document", &doc.text)],
        doc,
    )
}

/// Chain-of-thought baseline over the given entity types.
pub fn extract_cot(
    llm: &Llm,
    doc: &Document,
    types: &EntityTypeSet,
) -> Result<TripletSet, ExtractionError> {
    if types.is_empty() {
        return Err(ExtractionError::InvalidTypes);
    }
    let t = types.joined();
    run(
        llm,
        TemplateId::CotExtraction,
        &[("T", &t), ("document", &doc.text)],
        doc,
    )
}

/// Few-shot baseline; demonstrations are separated by blank lines.
pub fn extract_fewshot(
    llm: &Llm,
    doc: &Document,
    types: &EntityTypeSet,
    demos: &[String],
) -> Result<TripletSet, ExtractionError> {
    if types.is_empty() {
        return Err(ExtractionError::InvalidTypes);
    }
    if demos.iter().all(|d| d.trim().is_empty()) {
        return Err(ExtractionError::EmptyDemos);
    }
    let t = types.joined();
    let demos = demos
        .iter()
        .map(|d| d.trim())
        .filter(|d| !d.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n");
    run(
        llm,
        TemplateId::FewshotExtraction,
        &[
            ("T", &t),
            ("Demonstrations", &demos),
            ("document", &doc.text),
        ],
        doc,
    )
}
