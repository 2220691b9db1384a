//! Domain types shared by every pipeline stage, plus the single canonical
//! string equality used for deduplication and answer matching.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A source passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, rename = "domain", skip_serializing_if = "Option::is_none")]
    pub domain_label: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let doc = Document {
            id: id.into(),
            text: text.into(),
            domain_label: None,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain_label = Some(domain.into());
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.trim().is_empty() {
            return Err(ModelError::EmptyField("document id"));
        }
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyField("document text"));
        }
        Ok(())
    }
}

/// Ordered set of entity types the user is interested in.
///
/// Duplicates under case-folding are rejected at construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct EntityTypeSet {
    types: Vec<String>,
}

impl EntityTypeSet {
    pub fn new<I, S>(types: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in types {
            let t: String = t.into();
            let t = t.trim().to_string();
            if t.is_empty() {
                return Err(ModelError::EmptyField("entity type"));
            }
            if !seen.insert(t.to_lowercase()) {
                return Err(ModelError::DuplicateType(t));
            }
            out.push(t);
        }
        Ok(EntityTypeSet { types: out })
    }

    /// Parses a comma-separated list such as `battery cell, electrolyte additive`.
    pub fn parse_list(list: &str) -> Result<Self, ModelError> {
        Self::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(String::as_str)
    }

    /// Rendering used when binding the set into a prompt.
    pub fn joined(&self) -> String {
        self.types.join(", ")
    }
}

impl TryFrom<Vec<String>> for EntityTypeSet {
    type Error = ModelError;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        EntityTypeSet::new(value)
    }
}

impl From<EntityTypeSet> for Vec<String> {
    fn from(value: EntityTypeSet) -> Self {
        value.types
    }
}

/// Pipeline stage tag. The derived ordering is the stage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Enriched,
    Refined,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Initial => "initial",
            Stage::Enriched => "enriched",
            Stage::Refined => "refined",
        })
    }
}

/// One ⟨entity, attribute, value⟩ assertion grounded in a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub entity: String,
    pub attribute: String,
    pub value: String,
    pub stage: Stage,
    pub source_doc: String,
    /// Root attribute that elicited this triplet, when it came from enrichment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Triplet {
    /// Builds a triplet, trimming all three fields and rejecting empty ones.
    pub fn new(
        entity: &str,
        attribute: &str,
        value: &str,
        stage: Stage,
        source_doc: &str,
    ) -> Result<Self, ModelError> {
        let entity = entity.trim();
        let attribute = attribute.trim();
        let value = value.trim();
        if entity.is_empty() {
            return Err(ModelError::EmptyField("entity"));
        }
        if attribute.is_empty() {
            return Err(ModelError::EmptyField("attribute"));
        }
        if value.is_empty() {
            return Err(ModelError::EmptyField("value"));
        }
        Ok(Triplet {
            entity: entity.to_string(),
            attribute: attribute.to_string(),
            value: value.to_string(),
            stage,
            source_doc: source_doc.to_string(),
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, root: impl Into<String>) -> Self {
        self.provenance = Some(root.into());
        self
    }

    /// Moves the triplet to a later stage. Backward moves are rejected.
    pub fn promote(mut self, stage: Stage) -> Result<Self, ModelError> {
        if stage < self.stage {
            return Err(ModelError::StageRegression {
                from: self.stage,
                to: stage,
            });
        }
        self.stage = stage;
        Ok(self)
    }

    /// Normalized (entity, attribute, value) used for set equality.
    pub fn key(&self) -> TripletKey {
        TripletKey {
            entity: normalize(&self.entity).canonical,
            attribute: normalize(&self.attribute).canonical,
            value: normalize(&self.value).canonical,
        }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.entity, self.attribute, self.value)
    }
}

/// One line of a triplet artifact file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub doc_id: String,
    pub entity: String,
    pub attribute: String,
    pub value: String,
    pub stage: Stage,
    #[serde(default)]
    pub provenance: Option<String>,
}

impl From<&Triplet> for TripletRecord {
    fn from(t: &Triplet) -> Self {
        TripletRecord {
            doc_id: t.source_doc.clone(),
            entity: t.entity.clone(),
            attribute: t.attribute.clone(),
            value: t.value.clone(),
            stage: t.stage,
            provenance: t.provenance.clone(),
        }
    }
}

impl TripletRecord {
    pub fn key(&self) -> TripletKey {
        TripletKey {
            entity: normalize(&self.entity).canonical,
            attribute: normalize(&self.attribute).canonical,
            value: normalize(&self.value).canonical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletKey {
    pub entity: String,
    pub attribute: String,
    pub value: String,
}

/// Ordered, duplicate-free set of triplets sharing one stage tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletSet {
    triplets: Vec<Triplet>,
    stage: Stage,
}

impl TripletSet {
    pub fn empty(stage: Stage) -> Self {
        TripletSet {
            triplets: Vec::new(),
            stage,
        }
    }

    /// Builds a set, promoting every triplet to `stage` and dropping
    /// normalized duplicates (first occurrence wins).
    pub fn new(triplets: Vec<Triplet>, stage: Stage) -> Result<Self, ModelError> {
        let promoted = triplets
            .into_iter()
            .map(|t| t.promote(stage))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TripletSet {
            triplets: dedup_triplets(promoted),
            stage,
        })
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn into_triplets(self) -> Vec<Triplet> {
        self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.triplets.iter()
    }

    /// Appends triplets that are not already present under normalization.
    pub fn extend<I: IntoIterator<Item = Triplet>>(&mut self, more: I) -> Result<(), ModelError> {
        let mut keys: HashSet<TripletKey> = self.triplets.iter().map(Triplet::key).collect();
        for t in more {
            let t = t.promote(self.stage)?;
            if keys.insert(t.key()) {
                self.triplets.push(t);
            }
        }
        Ok(())
    }

    /// Re-tags the whole set with a later stage without touching content.
    pub fn promote(self, stage: Stage) -> Result<Self, ModelError> {
        TripletSet::new(self.triplets, stage)
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        let key = t.key();
        self.triplets.iter().any(|x| x.key() == key)
    }

    /// True when every triplet of `self` appears in `other` under normalization.
    pub fn is_subset_of(&self, other: &TripletSet) -> bool {
        let keys: HashSet<TripletKey> = other.triplets.iter().map(Triplet::key).collect();
        self.triplets.iter().all(|t| keys.contains(&t.key()))
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a Triplet;
    type IntoIter = std::slice::Iter<'a, Triplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.triplets.iter()
    }
}

/// An entity with its attribute→value pairs, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityStructure {
    pub entity: String,
    pub pairs: Vec<(String, String)>,
    pub source_doc: String,
}

impl EntityStructure {
    pub fn new(entity: impl Into<String>, source_doc: impl Into<String>) -> Self {
        EntityStructure {
            entity: entity.into(),
            pairs: Vec::new(),
            source_doc: source_doc.into(),
        }
    }

    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(a, _)| a == attribute)
            .map(|(_, v)| v.as_str())
    }

    pub fn has_attribute(&self, attribute: &str) -> bool {
        let key = normalize(attribute).canonical;
        self.pairs
            .iter()
            .any(|(a, _)| normalize(a).canonical == key)
    }

    /// Flattens back to refined triplets.
    pub fn triplets(&self) -> Vec<Triplet> {
        self.pairs
            .iter()
            .filter_map(|(a, v)| {
                Triplet::new(&self.entity, a, v, Stage::Refined, &self.source_doc).ok()
            })
            .collect()
    }
}

/// A raw string together with its canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedText {
    pub raw: String,
    pub canonical: String,
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

// Units that attach to a preceding number ("80.6 %" -> "80.6%"). Compared
// after case-folding. Bare "a" (amperes) is absent: it collides with the article.
const UNITS: &[&str] = &[
    "%", "‰", "wt%", "at%", "vol%", "mol%", "ppm", "ppb", "°c", "°f", "°", "k", "c", "v", "mv",
    "kv", "ma", "μa", "w", "kw", "mw", "gw", "wh", "kwh", "mwh", "mah", "ah", "mah/g", "wh/kg",
    "g", "mg", "kg", "μg", "l", "ml", "μl", "m", "cm", "mm", "μm", "um", "nm", "km", "s", "ms",
    "min", "h", "hz", "khz", "mhz", "ghz", "pa", "kpa", "mpa", "gpa", "bar", "mol", "mmol", "m²",
    "cm²", "cm2", "m2", "$", "€",
];

fn is_terminal_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '`' | '“' | '”' | '‘' | '’' | '…'
    )
}

fn is_numeric_token(tok: &str) -> bool {
    let tok = tok.strip_prefix(['-', '+', '~', '≈']).unwrap_or(tok);
    !tok.is_empty()
        && tok.chars().any(|c| c.is_ascii_digit())
        && tok
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

fn normalize_pass(text: &str) -> String {
    let lowered = text.to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| c.is_whitespace() || is_terminal_punct(c));
    let mut tokens: Vec<&str> = trimmed.split_whitespace().collect();

    while tokens.len() > 1 && ARTICLES.contains(&tokens[0]) {
        tokens.remove(0);
    }
    if tokens.len() == 1 && ARTICLES.contains(&tokens[0]) {
        tokens.clear();
    }

    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let joins_unit =
            UNITS.contains(&tok) && out.last().is_some_and(|prev| is_numeric_token(prev));
        match (joins_unit, out.last_mut()) {
            (true, Some(prev)) => prev.push_str(tok),
            _ => out.push(tok.to_string()),
        }
    }
    out.join(" ")
}

/// Canonical form: case-folded, terminal punctuation stripped, whitespace
/// collapsed, leading articles dropped, numbers glued to their units.
///
/// The result is a fixed point: `normalize(normalize(x).canonical)` leaves
/// the canonical form unchanged.
pub fn normalize(text: &str) -> NormalizedText {
    let mut canonical = normalize_pass(text);
    // A pass can expose new terminal punctuation or a new leading article.
    loop {
        let next = normalize_pass(&canonical);
        if next == canonical {
            break;
        }
        canonical = next;
    }
    NormalizedText {
        raw: text.to_string(),
        canonical,
    }
}

fn dedup_triplets(triplets: Vec<Triplet>) -> Vec<Triplet> {
    let mut seen = HashSet::new();
    triplets
        .into_iter()
        .filter(|t| seen.insert(t.key()))
        .collect()
}

/// Removes triplets equal under normalization of all three fields.
/// First occurrence wins and order is preserved.
pub fn dedup(set: TripletSet) -> TripletSet {
    let stage = set.stage;
    TripletSet {
        triplets: dedup_triplets(set.triplets),
        stage,
    }
}
