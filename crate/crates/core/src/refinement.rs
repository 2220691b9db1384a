//! Component-masking QA probes and value-anchored repair of triplets whose
//! components cannot be recovered from each other.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::to_triplets;
use crate::llm::{ordered_map, Llm, LlmError, Parsed};
use crate::model::{normalize, Document, Stage, Triplet, TripletSet};
use crate::prompt::{parse_string_list, parse_triplets, parse_yes_no, TemplateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefinementError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("probe for {0} has no predicted answer")]
    Unanswered(Component),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Entity,
    Attribute,
    Value,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Entity, Component::Attribute, Component::Value];

    pub fn of(self, t: &Triplet) -> &str {
        match self {
            Component::Entity => &t.entity,
            Component::Attribute => &t.attribute,
            Component::Value => &t.value,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Entity => "entity",
            Component::Attribute => "attribute",
            Component::Value => "value",
        })
    }
}

/// A question that masks one component of a triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAProbe {
    pub masked: Component,
    pub question: String,
    /// The masked component as it appears in the triplet.
    pub gold: String,
    pub predicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub triplet: Triplet,
    pub probes: [QAProbe; 3],
    pub consistent: bool,
    pub failing: Vec<Component>,
}

/// How a predicted answer is compared to the masked component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Lexical,
    /// Lexical first; lexical misses go to the model as a yes/no question.
    LlmJudge,
}

/// Three questions, asking for the entity, attribute and value in turn.
pub fn generate_probes(
    llm: &Llm,
    t: &Triplet,
    doc: &Document,
) -> Result<Parsed<[QAProbe; 3]>, RefinementError> {
    let shown = t.to_string();
    let parsed = llm.ask(
        TemplateId::MdqaGenerate,
        &[("triplet", &shown), ("context", &doc.text)],
        |raw| parse_string_list(raw, Some(3)),
    )?;
    let qs = parsed.payload;
    let probe = |i: usize| QAProbe {
        masked: Component::ALL[i],
        question: qs[i].clone(),
        gold: Component::ALL[i].of(t).to_string(),
        predicted: None,
    };
    Ok(Parsed {
        payload: [probe(0), probe(1), probe(2)],
        repair_count: parsed.repair_count,
    })
}

/// One answering call for all three probes.
pub fn answer_probes(
    llm: &Llm,
    probes: &[QAProbe; 3],
    doc: &Document,
) -> Result<[QAProbe; 3], RefinementError> {
    let answers = llm
        .ask(
            TemplateId::MdqaAnswer,
            &[
                ("context", &doc.text),
                ("Q_entity", &probes[0].question),
                ("Q_attribute", &probes[1].question),
                ("Q_value", &probes[2].question),
            ],
            |raw| parse_string_list(raw, Some(3)),
        )?
        .payload;
    let mut out = probes.clone();
    for (p, a) in out.iter_mut().zip(answers) {
        p.predicted = Some(a);
    }
    Ok(out)
}

fn contains_tokens(long: &[&str], short: &[&str]) -> bool {
    !short.is_empty() && long.windows(short.len()).any(|w| w == short)
}

/// Normalized equality, or one canonical form containing the other at
/// token boundaries.
pub fn match_answer(predicted: &str, gold: &str) -> bool {
    let p = normalize(predicted).canonical;
    let g = normalize(gold).canonical;
    if p == g {
        return true;
    }
    let pt: Vec<&str> = p.split(' ').filter(|s| !s.is_empty()).collect();
    let gt: Vec<&str> = g.split(' ').filter(|s| !s.is_empty()).collect();
    contains_tokens(&pt, &gt) || contains_tokens(&gt, &pt)
}

fn judge(llm: &Llm, doc: &Document, predicted: &str, gold: &str) -> Result<bool, LlmError> {
    let raw = llm.ask_raw(
        TemplateId::AnswerJudge,
        &[
            ("context", &doc.text),
            ("predicted", predicted),
            ("gold", gold),
        ],
    )?;
    Ok(parse_yes_no(&raw).unwrap_or(false))
}

fn report(t: &Triplet, probes: &[QAProbe; 3], matched: [bool; 3]) -> ConsistencyReport {
    let failing: Vec<Component> = Component::ALL
        .into_iter()
        .zip(matched)
        .filter(|(_, ok)| !ok)
        .map(|(c, _)| c)
        .collect();
    ConsistencyReport {
        triplet: t.clone(),
        probes: probes.clone(),
        consistent: failing.is_empty(),
        failing,
    }
}

/// Lexical consistency check over answered probes.
pub fn check_consistency(
    t: &Triplet,
    probes: &[QAProbe; 3],
) -> Result<ConsistencyReport, RefinementError> {
    let mut matched = [false; 3];
    for (m, p) in matched.iter_mut().zip(probes) {
        let predicted = p
            .predicted
            .as_deref()
            .ok_or(RefinementError::Unanswered(p.masked))?;
        *m = match_answer(predicted, Component::of(p.masked, t));
    }
    Ok(report(t, probes, matched))
}

/// Consistency check under `mode`.
pub fn check_consistency_with(
    llm: &Llm,
    mode: MatchMode,
    doc: &Document,
    t: &Triplet,
    probes: &[QAProbe; 3],
) -> Result<ConsistencyReport, RefinementError> {
    let lexical = check_consistency(t, probes)?;
    if mode == MatchMode::Lexical || lexical.consistent {
        return Ok(lexical);
    }
    let mut matched = [true; 3];
    for (m, p) in matched.iter_mut().zip(probes) {
        if lexical.failing.contains(&p.masked) {
            let predicted = p.predicted.as_deref().unwrap_or_default();
            *m = judge(llm, doc, predicted, p.masked.of(t))?;
        }
    }
    Ok(report(t, probes, matched))
}

/// One refinement call anchored on `t.value`. A reply without a usable
/// triplet leaves `t` unchanged apart from its stage.
pub fn refine_triplet(llm: &Llm, t: &Triplet, doc: &Document) -> Result<Triplet, RefinementError> {
    let shown = t.to_string();
    let rows = llm
        .ask(
            TemplateId::TripletRefinement,
            &[
                ("context", &doc.text),
                ("triplet", &shown),
                ("value", &t.value),
            ],
            parse_triplets,
        )?
        .payload;
    let candidate = rows
        .iter()
        .find(|r| match_answer(&r.value, &t.value))
        .or_else(|| rows.first())
        .cloned()
        .map(|mut r| {
            if !match_answer(&r.value, &t.value) {
                r.value = t.value.clone();
            }
            r
        });
    let refined = candidate.and_then(|r| to_triplets(&[r], Stage::Refined, &t.source_doc).pop());
    Ok(match refined {
        Some(mut r) => {
            r.provenance = t.provenance.clone();
            r
        }
        None => {
            log::warn!(
                "{}: refinement of {t} returned nothing usable, keeping it",
                doc.id
            );
            t.clone()
                .promote(Stage::Refined)
                .expect("refined is the last stage")
        }
    })
}

/// Outcome of refining one document's triplets.
#[derive(Debug, Clone)]
pub struct Refined {
    pub triplets: TripletSet,
    /// One report per checked triplet, in input order. Triplets whose check
    /// failed outright have none.
    pub reports: Vec<ConsistencyReport>,
    pub diagnostics: Vec<String>,
}

enum Outcome {
    Checked(ConsistencyReport, Triplet, Option<String>),
    Failed(String),
}

fn refine_one(llm: &Llm, mode: MatchMode, doc: &Document, t: &Triplet) -> Outcome {
    let checked = generate_probes(llm, t, doc)
        .and_then(|p| answer_probes(llm, &p.payload, doc))
        .and_then(|p| check_consistency_with(llm, mode, doc, t, &p));
    let report = match checked {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(format!("consistency check of {t} failed: {e}")),
    };
    if report.consistent {
        return Outcome::Checked(report, t.clone(), None);
    }
    match refine_triplet(llm, t, doc) {
        Ok(r) => Outcome::Checked(report, r, None),
        Err(e) => Outcome::Checked(
            report,
            t.clone(),
            Some(format!("refinement of {t} failed: {e}")),
        ),
    }
}

/// Checks every triplet once and refines the inconsistent ones. Failures
/// pass the triplet through unchanged.
pub fn refine(llm: &Llm, enriched: &TripletSet, doc: &Document, mode: MatchMode) -> Refined {
    let outcomes = ordered_map(enriched.triplets(), llm.settings.workers, |t| {
        refine_one(llm, mode, doc, t)
    });
    let mut out = Vec::with_capacity(outcomes.len());
    let mut reports = Vec::new();
    let mut diagnostics = Vec::new();
    for (t, outcome) in enriched.iter().zip(outcomes) {
        match outcome {
            Outcome::Checked(report, refined, diag) => {
                reports.push(report);
                out.push(refined);
                diagnostics.extend(diag);
            }
            Outcome::Failed(diag) => {
                diagnostics.push(diag);
                out.push(t.clone());
            }
        }
    }
    Refined {
        triplets: TripletSet::new(out, Stage::Refined).expect("refined is the last stage"),
        reports,
        diagnostics,
    }
}
