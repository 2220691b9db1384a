//! Merging refined triplets into per-entity structures and keeping the
//! entities of requested types.

use std::collections::HashMap;

use thiserror::Error;

use crate::llm::{ordered_map, Llm, LlmError};
use crate::model::{normalize, Document, EntityStructure, EntityTypeSet, Triplet, TripletSet};
use crate::prompt::{parse_structures, parse_yes_no, TemplateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnificationError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("entity type set is empty")]
    InvalidTypes,
}

/// Structures built for one document, plus the triplets that did not make it.
#[derive(Debug, Clone, Default)]
pub struct Construction {
    pub structures: Vec<EntityStructure>,
    /// Input triplets the model left out of every structure.
    pub dropped: Vec<Triplet>,
    pub diagnostics: Vec<String>,
}

impl Construction {
    pub fn pair_count(&self) -> usize {
        self.structures.iter().map(|s| s.pairs.len()).sum()
    }
}

fn triplet_rows(triplets: &[Triplet]) -> String {
    let rows: Vec<[&str; 3]> = triplets
        .iter()
        .map(|t| [t.entity.as_str(), t.attribute.as_str(), t.value.as_str()])
        .collect();
    serde_json::to_string(&rows).expect("strings serialize")
}

/// Adds `(attribute, value)` to `s`, suffixing ` (2)`, ` (3)`, ... when the
/// attribute is already present.
fn insert_pair(
    s: &mut EntityStructure,
    attribute: &str,
    value: &str,
    diagnostics: &mut Vec<String>,
) {
    let mut name = attribute.to_string();
    let mut k = 2;
    while s.has_attribute(&name) {
        name = format!("{attribute} ({k})");
        k += 1;
    }
    if name != attribute {
        diagnostics.push(format!(
            "{}: attribute {attribute:?} repeated on {:?}, stored as {name:?}",
            s.source_doc, s.entity
        ));
    }
    s.pairs.push((name, value.to_string()));
}

/// Groups triplets by entity from their text alone, one structure per
/// normalized entity in input order.
pub fn group_by_entity(doc: &Document, triplets: &TripletSet) -> Construction {
    let mut out = Construction::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for t in triplets {
        let key = normalize(&t.entity).canonical;
        let i = *index.entry(key).or_insert_with(|| {
            out.structures
                .push(EntityStructure::new(t.entity.clone(), doc.id.clone()));
            out.structures.len() - 1
        });
        insert_pair(
            &mut out.structures[i],
            &t.attribute,
            &t.value,
            &mut out.diagnostics,
        );
    }
    out
}

/// One structure-construction call. Each pair in the reply is matched to an
/// unused input triplet, by entity, attribute and value first and then by
/// attribute and value only, so coreferent mentions can merge. Pairs with
/// no match are discarded; inputs with no pair are reported as dropped.
pub fn construct_structures(
    llm: &Llm,
    doc: &Document,
    refined: &TripletSet,
) -> Result<Construction, UnificationError> {
    let mut out = Construction::default();
    if refined.is_empty() {
        return Ok(out);
    }
    let rows = triplet_rows(refined.triplets());
    let reply = llm
        .ask(
            TemplateId::StructureConstruction,
            &[("document", &doc.text), ("triplets", &rows)],
            parse_structures,
        )?
        .payload;

    let keys: Vec<_> = refined.iter().map(Triplet::key).collect();
    let mut used = vec![false; keys.len()];
    let mut index: HashMap<String, usize> = HashMap::new();
    for raw in reply {
        let entity_key = normalize(&raw.entity).canonical;
        if entity_key.is_empty() {
            out.diagnostics.push(format!(
                "{}: structure without an entity name ignored",
                doc.id
            ));
            continue;
        }
        for (attribute, value) in &raw.pairs {
            let a = normalize(attribute).canonical;
            let v = normalize(value).canonical;
            let hit = (0..keys.len())
                .find(|&i| {
                    !used[i]
                        && keys[i].entity == entity_key
                        && keys[i].attribute == a
                        && keys[i].value == v
                })
                .or_else(|| {
                    (0..keys.len())
                        .find(|&i| !used[i] && keys[i].attribute == a && keys[i].value == v)
                });
            let Some(i) = hit else {
                out.diagnostics.push(format!(
                    "{}: pair {attribute:?}: {value:?} under {:?} matches no input triplet",
                    doc.id, raw.entity
                ));
                continue;
            };
            used[i] = true;
            let t = &refined.triplets()[i];
            let s = *index.entry(entity_key.clone()).or_insert_with(|| {
                out.structures
                    .push(EntityStructure::new(raw.entity.clone(), doc.id.clone()));
                out.structures.len() - 1
            });
            insert_pair(
                &mut out.structures[s],
                &t.attribute,
                &t.value,
                &mut out.diagnostics,
            );
        }
    }
    for (t, u) in refined.iter().zip(&used) {
        if !u {
            out.diagnostics
                .push(format!("{}: orphaned triplet {t}", doc.id));
            out.dropped.push(t.clone());
        }
    }
    Ok(out)
}

/// One yes/no type-filtration call. Anything but a clear yes is a no.
pub fn filter_by_type(
    llm: &Llm,
    s: &EntityStructure,
    types: &EntityTypeSet,
    doc: &Document,
) -> Result<bool, UnificationError> {
    if types.is_empty() {
        return Err(UnificationError::InvalidTypes);
    }
    let rows = triplet_rows(&s.triplets());
    let raw = llm.ask_raw(
        TemplateId::TypeFiltration,
        &[
            ("Context", &doc.text),
            ("Triplets", &rows),
            ("Entity Type", &types.joined()),
        ],
    )?;
    Ok(match parse_yes_no(&raw) {
        Ok(v) => v,
        Err(e) => {
            log::debug!(
                "{}: type filtration of {:?}: {e}; rejecting",
                doc.id,
                s.entity
            );
            false
        }
    })
}

/// Byte offset of the first case-insensitive mention of `entity` in `text`.
pub fn first_mention(text: &str, entity: &str) -> Option<usize> {
    let needle = entity.trim().to_lowercase();
    if needle.is_empty() {
        return None;
    }
    text.to_lowercase().find(&needle)
}

/// Sorts structures by first mention in the document. Unmentioned entities
/// keep their relative order after all mentioned ones.
pub fn order_by_mention(doc: &Document, structures: &mut [EntityStructure]) {
    structures.sort_by_key(|s| first_mention(&doc.text, &s.entity).unwrap_or(usize::MAX));
}

#[derive(Debug, Clone, Default)]
pub struct Unified {
    /// Structures that passed the type filter, in first-mention order.
    pub structures: Vec<EntityStructure>,
    pub rejected: Vec<EntityStructure>,
    pub dropped: Vec<Triplet>,
    pub diagnostics: Vec<String>,
}

/// Filters `built` by type and orders the survivors.
pub fn filter_structures(
    llm: &Llm,
    doc: &Document,
    built: Construction,
    types: &EntityTypeSet,
) -> Result<Unified, UnificationError> {
    if types.is_empty() {
        return Err(UnificationError::InvalidTypes);
    }
    let verdicts = ordered_map(&built.structures, llm.settings.workers, |s| {
        filter_by_type(llm, s, types, doc)
    });
    let mut out = Unified {
        dropped: built.dropped,
        diagnostics: built.diagnostics,
        ..Default::default()
    };
    for (s, v) in built.structures.into_iter().zip(verdicts) {
        if v? {
            out.structures.push(s);
        } else {
            log::debug!("{}: {:?} rejected by type filter", doc.id, s.entity);
            out.rejected.push(s);
        }
    }
    order_by_mention(doc, &mut out.structures);
    Ok(out)
}

/// Construction followed by type filtering.
pub fn unify(
    llm: &Llm,
    doc: &Document,
    refined: &TripletSet,
    types: &EntityTypeSet,
) -> Result<Unified, UnificationError> {
    if types.is_empty() {
        return Err(UnificationError::InvalidTypes);
    }
    let built = construct_structures(llm, doc, refined)?;
    filter_structures(llm, doc, built, types)
}

/// Renders structures as `{"<entity>": {"<attribute>": "<value>", ...}, ...}`
/// with two-space indentation, keeping entity and pair order.
pub fn structures_to_json(structures: &[EntityStructure]) -> String {
    let q = |s: &str| serde_json::to_string(s).expect("strings serialize");
    if structures.is_empty() {
        return "{}\n".to_string();
    }
    let mut out = String::from("{\n");
    for (i, s) in structures.iter().enumerate() {
        out.push_str(&format!("  {}: {{", q(&s.entity)));
        for (j, (a, v)) in s.pairs.iter().enumerate() {
            out.push_str(if j == 0 { "\n" } else { ",\n" });
            out.push_str(&format!("    {}: {}", q(a), q(v)));
        }
        out.push_str(if s.pairs.is_empty() { "}" } else { "\n  }" });
        out.push_str(if i + 1 < structures.len() {
            ",\n"
        } else {
            "\n"
        });
    }
    out.push_str("}\n");
    out
}
