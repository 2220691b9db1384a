//! Prompt templates, placeholder rendering and structured-output parsing.

mod parse;
mod templates;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{
    parse_string, parse_string_list, parse_structures, parse_triplets, parse_value_map,
    parse_yes_no, ParseError, RawStructure, RawTriplet,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {template} is missing a binding for [{slot}]")]
    MissingBinding { template: TemplateId, slot: String },
    #[error("template {template} uses undeclared placeholder [{slot}]")]
    UndeclaredSlot { template: TemplateId, slot: String },
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
    #[error("cannot read template overrides: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ZeroShotExtraction,
    RootAttributeInduction,
    ValueExtraction,
    ValueGuidedExtraction,
    MdqaGenerate,
    MdqaAnswer,
    TripletRefinement,
    StructureConstruction,
    TypeFiltration,
    CotExtraction,
    FewshotExtraction,
    AnswerJudge,
}

impl TemplateId {
    pub const ALL: [TemplateId; 12] = [
        TemplateId::ZeroShotExtraction,
        TemplateId::RootAttributeInduction,
        TemplateId::ValueExtraction,
        TemplateId::ValueGuidedExtraction,
        TemplateId::MdqaGenerate,
        TemplateId::MdqaAnswer,
        TemplateId::TripletRefinement,
        TemplateId::StructureConstruction,
        TemplateId::TypeFiltration,
        TemplateId::CotExtraction,
        TemplateId::FewshotExtraction,
        TemplateId::AnswerJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ZeroShotExtraction => "zero_shot_extraction",
            TemplateId::RootAttributeInduction => "root_attribute_induction",
            TemplateId::ValueExtraction => "value_extraction",
            TemplateId::ValueGuidedExtraction => "value_guided_extraction",
            TemplateId::MdqaGenerate => "mdqa_generate",
            TemplateId::MdqaAnswer => "mdqa_answer",
            TemplateId::TripletRefinement => "triplet_refinement",
            TemplateId::StructureConstruction => "structure_construction",
            TemplateId::TypeFiltration => "type_filtration",
            TemplateId::CotExtraction => "cot_extraction",
            TemplateId::FewshotExtraction => "fewshot_extraction",
            TemplateId::AnswerJudge => "answer_judge",
        }
    }

    /// Declared placeholder names.
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            TemplateId::ZeroShotExtraction => &["document"],
            TemplateId::RootAttributeInduction => &["attributes"],
            TemplateId::ValueExtraction => &["document", "root attribute"],
            TemplateId::ValueGuidedExtraction => &["document", "value", "root attribute"],
            TemplateId::MdqaGenerate => &["triplet", "context"],
            TemplateId::MdqaAnswer => &["context", "Q_entity", "Q_attribute", "Q_value"],
            TemplateId::TripletRefinement => &["context", "triplet", "value"],
            TemplateId::StructureConstruction => &["document", "triplets"],
            TemplateId::TypeFiltration => &["Context", "Triplets", "Entity Type"],
            TemplateId::CotExtraction => &["T", "document"],
            TemplateId::FewshotExtraction => &["T", "Demonstrations", "document"],
            TemplateId::AnswerJudge => &["context", "predicted", "gold"],
        }
    }

    /// Templates that belong to the enrichment stage.
    pub fn is_enrichment(self) -> bool {
        matches!(
            self,
            TemplateId::RootAttributeInduction
                | TemplateId::ValueExtraction
                | TemplateId::ValueGuidedExtraction
        )
    }

    /// Templates that belong to the refinement stage.
    pub fn is_refinement(self) -> bool {
        matches!(
            self,
            TemplateId::MdqaGenerate
                | TemplateId::MdqaAnswer
                | TemplateId::TripletRefinement
                | TemplateId::AnswerJudge
        )
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

fn is_slot_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == ' '
}

fn split_segments(body: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        let close = after.find(']');
        let name = close.map(|c| &after[..c]);
        match name {
            Some(name)
                if !name.is_empty()
                    && name.chars().all(is_slot_char)
                    && !name.starts_with(' ')
                    && !name.ends_with(' ') =>
            {
                text.push_str(&rest[..open]);
                if !text.is_empty() {
                    out.push(Segment::Text(std::mem::take(&mut text)));
                }
                out.push(Segment::Slot(name.to_string()));
                rest = &after[name.len() + 1..];
            }
            _ => {
                text.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
    out
}

/// A template body split into literal text and `[slot]` segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(id: TemplateId, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        let segments = split_segments(&body);
        for seg in &segments {
            if let Segment::Slot(name) = seg {
                if !id.slots().contains(&name.as_str()) {
                    return Err(PromptError::UndeclaredSlot {
                        template: id,
                        slot: name.clone(),
                    });
                }
            }
        }
        Ok(PromptTemplate { id, body, segments })
    }

    /// Placeholders that actually occur in the body.
    pub fn placeholders(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every slot. Bound values are inserted verbatim and never
    /// rescanned for placeholders.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        for slot in self.id.slots() {
            if !bindings.iter().any(|(k, _)| k == slot) {
                return Err(PromptError::MissingBinding {
                    template: self.id,
                    slot: (*slot).to_string(),
                });
            }
        }
        let mut out = String::with_capacity(self.body.len());
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| *v)
                        .unwrap_or_default();
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

/// Registry of all templates, with optional on-disk overrides.
#[derive(Debug, Clone)]
pub struct PromptKit {
    templates: HashMap<TemplateId, PromptTemplate>,
}

impl Default for PromptKit {
    fn default() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = PromptTemplate::new(id, templates::builtin(id))
                    .expect("built-in templates declare all their slots");
                (id, t)
            })
            .collect();
        PromptKit { templates }
    }
}

impl PromptKit {
    /// Built-in templates, replaced by any `<template_id>.txt` file found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut kit = PromptKit::default();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| PromptError::Io(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| PromptError::Io(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let id: TemplateId = stem.parse()?;
            let body = std::fs::read_to_string(&path)
                .map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
            kit.set(PromptTemplate::new(id, body.trim_end().to_string())?);
        }
        Ok(kit)
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id, template);
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        self.get(id).render(bindings)
    }
}
