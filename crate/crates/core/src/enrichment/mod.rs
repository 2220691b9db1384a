//! Root-attribute induction and value-anchored recovery of missed triplets.

mod cluster;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::to_triplets;
use crate::gateway::EmbeddingVector;
use crate::llm::{ordered_map, Llm, LlmError};
use crate::model::{normalize, Document, Stage, Triplet, TripletSet};
use crate::prompt::{parse_string, parse_triplets, parse_value_map, ParseError, TemplateId};
use crate::refinement::match_answer;

pub use cluster::{agglomerate, cosine_distance, Linkage, TIE_EPSILON};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnrichmentError {
    #[error("embedding dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm embedding")]
    ZeroVector,
    #[error("nothing to cluster")]
    EmptyInput,
    #[error("clustering threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("value extraction needs at least one root attribute")]
    NoRoots,
    #[error("anchored value is empty")]
    EmptyValue,
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrichConfig {
    /// Merging stops once the closest clusters are farther apart than this.
    pub threshold: f64,
    pub linkage: Linkage,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        EnrichConfig {
            threshold: 0.35,
            linkage: Linkage::Average,
        }
    }
}

/// Attribute names that express one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeCluster {
    pub members: Vec<String>,
    pub centroid: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootAttribute {
    pub name: String,
    pub cluster: AttributeCluster,
}

/// A value span to be completed into a triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredValue {
    pub value: String,
    pub root: RootAttribute,
    pub source_doc: String,
    /// False when the value does not occur in the document text.
    pub literal: bool,
}

/// Embeds `attrs` and clusters them. Attributes equal under normalization
/// are embedded once; the first spelling is kept.
pub fn cluster_attributes(
    llm: &Llm,
    attrs: &[String],
    cfg: &EnrichConfig,
) -> Result<Vec<AttributeCluster>, EnrichmentError> {
    let mut seen = HashSet::new();
    let unique: Vec<String> = attrs
        .iter()
        .filter(|a| seen.insert(normalize(a).canonical))
        .cloned()
        .collect();
    if unique.is_empty() {
        return Err(EnrichmentError::EmptyInput);
    }
    if !(cfg.threshold > 0.0) {
        return Err(EnrichmentError::InvalidThreshold(cfg.threshold));
    }
    let vectors = llm.embed(&unique)?;
    if let Some(v) = vectors.iter().find(|v| v.dim() != vectors[0].dim()) {
        return Err(EnrichmentError::DimensionMismatch {
            left: vectors[0].dim(),
            right: v.dim(),
        });
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.values().to_vec()).collect();
    let groups = agglomerate(&points, cfg.threshold, cfg.linkage)?;
    Ok(groups
        .into_iter()
        .map(|members| {
            let dim = points[0].len();
            let mut sum = vec![0.0; dim];
            for &m in &members {
                for (s, x) in sum.iter_mut().zip(&points[m]) {
                    *s += x;
                }
            }
            let centroid = EmbeddingVector::new(sum, vectors[0].model_id.clone())
                .unwrap_or_else(|_| vectors[members[0]].clone());
            AttributeCluster {
                members: members.iter().map(|&m| unique[m].clone()).collect(),
                centroid,
            }
        })
        .collect())
}

fn shortest_member(cluster: &AttributeCluster) -> String {
    cluster
        .members
        .iter()
        .min_by_key(|m| m.chars().count())
        .cloned()
        .unwrap_or_default()
}

/// Names a cluster. Singletons keep their member without a model call; an
/// empty name falls back to the shortest member.
pub fn induce_root_attribute(
    llm: &Llm,
    cluster: &AttributeCluster,
) -> Result<RootAttribute, EnrichmentError> {
    if cluster.members.len() == 1 {
        return Ok(RootAttribute {
            name: cluster.members[0].clone(),
            cluster: cluster.clone(),
        });
    }
    let attributes = serde_json::to_string(&cluster.members).expect("strings serialize");
    let name = match llm.ask(
        TemplateId::RootAttributeInduction,
        &[("attributes", &attributes)],
        parse_string,
    ) {
        Ok(p) => p.payload,
        Err(LlmError::Unparseable {
            reason: ParseError::Empty,
            ..
        }) => {
            let fallback = shortest_member(cluster);
            log::warn!("empty root attribute name for {attributes}, using {fallback:?}");
            fallback
        }
        Err(e) => return Err(e.into()),
    };
    Ok(RootAttribute {
        name,
        cluster: cluster.clone(),
    })
}

/// True when `value` occurs in `text` once both are normalized.
pub fn occurs_in(value: &str, text: &str) -> bool {
    let v = normalize(value).canonical;
    !v.is_empty() && (text.contains(value.trim()) || normalize(text).canonical.contains(v.as_str()))
}

/// One value-extraction call for all roots. Values outside the text are
/// kept with `literal = false`.
pub fn extract_values(
    llm: &Llm,
    doc: &Document,
    roots: &[RootAttribute],
) -> Result<Vec<AnchoredValue>, EnrichmentError> {
    if roots.is_empty() {
        return Err(EnrichmentError::NoRoots);
    }
    let names: Vec<String> = roots.iter().map(|r| r.name.clone()).collect();
    let bound = serde_json::to_string(&names).expect("strings serialize");
    let map = llm
        .ask(
            TemplateId::ValueExtraction,
            &[("document", &doc.text), ("root attribute", &bound)],
            |raw| parse_value_map(raw, &names),
        )?
        .payload;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (key, values) in map {
        let k = normalize(&key).canonical;
        let root = roots
            .iter()
            .find(|r| normalize(&r.name).canonical == k)
            .or_else(|| (roots.len() == 1).then(|| &roots[0]));
        let Some(root) = root else {
            log::warn!(
                "{}: values for unknown root attribute {key:?} ignored",
                doc.id
            );
            continue;
        };
        for value in values {
            let canonical = normalize(&value).canonical;
            if canonical.is_empty() || !seen.insert((root.name.clone(), canonical)) {
                continue;
            }
            let literal = occurs_in(&value, &doc.text);
            if !literal {
                log::debug!("{}: value {value:?} is not a literal span", doc.id);
            }
            out.push(AnchoredValue {
                value: value.trim().to_string(),
                root: root.clone(),
                source_doc: doc.id.clone(),
                literal,
            });
        }
    }
    Ok(out)
}

/// Asks for the entity and attribute that `av.value` belongs to. Returns
/// `None` when the reply has no usable entity or attribute.
pub fn anchor_complete(
    llm: &Llm,
    doc: &Document,
    av: &AnchoredValue,
) -> Result<Option<Triplet>, EnrichmentError> {
    if av.value.trim().is_empty() {
        return Err(EnrichmentError::EmptyValue);
    }
    let rows = llm
        .ask(
            TemplateId::ValueGuidedExtraction,
            &[
                ("document", &doc.text),
                ("value", &av.value),
                ("root attribute", &av.root.name),
            ],
            parse_triplets,
        )?
        .payload;
    let Some(row) = rows
        .iter()
        .find(|r| match_answer(&r.value, &av.value))
        .or_else(|| rows.first())
    else {
        log::warn!("{}: no triplet for anchor {:?}", doc.id, av.value);
        return Ok(None);
    };
    let mut row = row.clone();
    row.value = av.value.clone();
    let triplet = to_triplets(&[row], Stage::Enriched, &doc.id)
        .pop()
        .map(|t| t.with_provenance(av.root.name.clone()));
    if triplet.is_none() {
        log::warn!(
            "{}: anchor {:?} came back without an entity or attribute",
            doc.id,
            av.value
        );
    }
    Ok(triplet)
}

/// Everything enrichment produced for one document.
#[derive(Debug, Clone)]
pub struct Enriched {
    pub triplets: TripletSet,
    pub roots: Vec<RootAttribute>,
    pub values: Vec<AnchoredValue>,
    pub diagnostics: Vec<String>,
}

/// Clusters the attributes of `initial`, names each cluster, extracts all
/// values of those root attributes and completes each value into a triplet.
/// The result contains every initial triplet.
pub fn enrich(
    llm: &Llm,
    doc: &Document,
    initial: &TripletSet,
    cfg: &EnrichConfig,
) -> Result<Enriched, EnrichmentError> {
    let mut diagnostics = Vec::new();
    let mut triplets = initial
        .clone()
        .promote(Stage::Enriched)
        .expect("initial precedes enriched");
    if initial.is_empty() {
        return Ok(Enriched {
            triplets,
            roots: Vec::new(),
            values: Vec::new(),
            diagnostics,
        });
    }

    let attrs: Vec<String> = initial.iter().map(|t| t.attribute.clone()).collect();
    let clusters = cluster_attributes(llm, &attrs, cfg)?;
    let roots: Vec<RootAttribute> = ordered_map(&clusters, llm.settings.workers, |c| {
        induce_root_attribute(llm, c)
    })
    .into_iter()
    .zip(&clusters)
    .map(|(r, c)| {
        r.unwrap_or_else(|e| {
            let name = shortest_member(c);
            diagnostics.push(format!(
                "root attribute induction failed ({e}); using {name:?}"
            ));
            RootAttribute {
                name,
                cluster: c.clone(),
            }
        })
    })
    .collect();

    let values = extract_values(llm, doc, &roots)?;
    let anchored = ordered_map(&values, llm.settings.workers, |av| {
        anchor_complete(llm, doc, av)
    });
    let mut fresh = Vec::new();
    for (av, result) in values.iter().zip(anchored) {
        match result {
            Ok(Some(t)) => fresh.push(t),
            Ok(None) => diagnostics.push(format!("anchor {:?} yielded no triplet", av.value)),
            Err(e) => diagnostics.push(format!("anchor {:?} failed: {e}", av.value)),
        }
    }
    triplets
        .extend(fresh)
        .expect("anchored triplets are enriched");
    Ok(Enriched {
        triplets,
        roots,
        values,
        diagnostics,
    })
}
