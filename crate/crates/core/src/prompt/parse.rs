//! Lenient extraction of structured payloads from model replies. Replies
//! may wrap JSON in prose or code fences; the first JSON value of the
//! expected shape wins.

use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no {expected} found in reply")]
    NotFound { expected: &'static str },
    #[error("expected {expected} items, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("reply contains neither yes nor no")]
    Ambiguous,
    #[error("reply is empty")]
    Empty,
}

/// A triplet as the model wrote it; fields may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTriplet {
    pub entity: String,
    pub attribute: String,
    pub value: String,
}

/// One entity object from a structure map, with pairs in reply order.
/// Duplicate attribute keys are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawStructure {
    pub entity: String,
    pub pairs: Vec<(String, String)>,
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some(String::new()),
        Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(scalar_text).collect();
            parts.map(|p| p.join(", "))
        }
        Value::Object(_) => None,
    }
}

/// Yields every JSON value that starts at an `open` byte in `raw`, in
/// order of position.
fn json_candidates<'a>(raw: &'a str, open: &'a [u8]) -> impl Iterator<Item = Value> + 'a {
    raw.char_indices()
        .filter(move |(_, c)| c.is_ascii() && open.contains(&(*c as u8)))
        .filter_map(move |(i, _)| {
            serde_json::Deserializer::from_str(&raw[i..])
                .into_iter::<Value>()
                .next()
                .and_then(Result::ok)
        })
}

fn triplet_from_value(v: &Value) -> Option<RawTriplet> {
    match v {
        Value::Array(items) if items.len() == 3 => Some(RawTriplet {
            entity: scalar_text(&items[0])?,
            attribute: scalar_text(&items[1])?,
            value: scalar_text(&items[2])?,
        }),
        Value::Object(map) => {
            let field = |k: &str| map.get(k).and_then(scalar_text);
            Some(RawTriplet {
                entity: field("entity")?,
                attribute: field("attribute")?,
                value: field("value")?,
            })
        }
        _ => None,
    }
}

// `[a, b, c]` / `(a, b, c)` / `<a, b, c>` one per line, unquoted.
fn bracket_line_triplets(raw: &str) -> Vec<RawTriplet> {
    raw.lines()
        .filter_map(|line| {
            let line = line
                .trim()
                .trim_start_matches(|c: char| {
                    c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ')'
                })
                .trim()
                .trim_end_matches(',');
            let inner = ["[]", "()", "<>"].iter().find_map(|p| {
                let mut cs = p.chars();
                let (o, c) = (cs.next()?, cs.next()?);
                line.strip_prefix(o)?.strip_suffix(c)
            })?;
            let parts: Vec<&str> = inner
                .split(',')
                .map(|p| p.trim().trim_matches('"'))
                .collect();
            (parts.len() == 3).then(|| RawTriplet {
                entity: parts[0].to_string(),
                attribute: parts[1].to_string(),
                value: parts[2].to_string(),
            })
        })
        .collect()
}

/// First JSON array of three-element records. Falls back to a single bare
/// triplet array and then to one bracketed triplet per line.
pub fn parse_triplets(raw: &str) -> Result<Vec<RawTriplet>, ParseError> {
    let mut single = None;
    for v in json_candidates(raw, b"[") {
        let Value::Array(items) = &v else { continue };
        let records: Option<Vec<RawTriplet>> = items
            .iter()
            .map(|item| match item {
                Value::Array(_) | Value::Object(_) => triplet_from_value(item),
                _ => None,
            })
            .collect();
        if let Some(records) = records {
            return Ok(records);
        }
        if single.is_none() {
            single = triplet_from_value(&v);
        }
    }
    if let Some(t) = single {
        return Ok(vec![t]);
    }
    let lines = bracket_line_triplets(raw);
    if !lines.is_empty() {
        return Ok(lines);
    }
    Err(ParseError::NotFound {
        expected: "triplet array",
    })
}

/// A single string: a JSON string, the first string of a JSON array, a
/// one-field JSON object, or else the first non-empty line.
pub fn parse_string(raw: &str) -> Result<String, ParseError> {
    let trimmed = strip_fences(raw);
    if let Ok(Value::String(s)) = serde_json::from_str::<Value>(trimmed) {
        return non_empty(s);
    }
    for v in json_candidates(trimmed, b"[{\"") {
        match v {
            Value::String(s) => return non_empty(s),
            Value::Array(items) => {
                if let Some(Value::String(s)) = items.first() {
                    return non_empty(s.clone());
                }
            }
            Value::Object(map) if map.len() == 1 => {
                if let Some(Value::String(s)) = map.values().next() {
                    return non_empty(s.clone());
                }
            }
            _ => {}
        }
    }
    let line = trimmed
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(ParseError::Empty)?;
    let line = match line.split_once(':') {
        Some((label, rest)) if label.split_whitespace().count() <= 3 && !rest.trim().is_empty() => {
            rest
        }
        _ => line,
    };
    non_empty(
        line.trim()
            .trim_matches(['"', '\'', '*', '`'])
            .trim_end_matches('.')
            .to_string(),
    )
}

fn non_empty(s: String) -> Result<String, ParseError> {
    let s = s.trim().to_string();
    if s.is_empty() {
        Err(ParseError::Empty)
    } else {
        Ok(s)
    }
}

fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

// "1. foo", "Answer 2: bar", "Q3) baz"
fn numbered_lines(raw: &str) -> Vec<String> {
    raw.lines()
        .filter_map(|line| {
            let l = line.trim();
            let l = ["Question", "Answer", "Q", "A"]
                .iter()
                .find_map(|p| l.strip_prefix(p))
                .unwrap_or(l)
                .trim_start();
            let digits = l.chars().take_while(char::is_ascii_digit).count();
            if digits == 0 {
                return None;
            }
            let rest = l[digits..].trim_start();
            let rest = rest.strip_prefix(['.', ':', ')']).unwrap_or(rest);
            Some(rest.trim().to_string())
        })
        .collect()
}

/// First JSON array of scalars. With `expected`, any other length is a
/// [`ParseError::WrongArity`].
pub fn parse_string_list(raw: &str, expected: Option<usize>) -> Result<Vec<String>, ParseError> {
    let found = json_candidates(raw, b"[")
        .find_map(|v| match v {
            Value::Array(items) => items.iter().map(scalar_text).collect::<Option<Vec<_>>>(),
            _ => None,
        })
        .or_else(|| {
            let lines = numbered_lines(raw);
            (!lines.is_empty()).then_some(lines)
        })
        .ok_or(ParseError::NotFound {
            expected: "string array",
        })?;
    match expected {
        Some(n) if found.len() != n => Err(ParseError::WrongArity {
            expected: n,
            got: found.len(),
        }),
        _ => Ok(found),
    }
}

/// First JSON object mapping names to value lists, in reply order. A bare
/// array is accepted when exactly one name was asked for.
pub fn parse_value_map(
    raw: &str,
    asked: &[String],
) -> Result<Vec<(String, Vec<String>)>, ParseError> {
    for v in json_candidates(raw, b"{[") {
        match v {
            Value::Object(map) => {
                let mut out = Vec::new();
                let mut ok = true;
                for (k, val) in &map {
                    let values = match val {
                        Value::Array(items) => items.iter().filter_map(scalar_text).collect(),
                        other => match scalar_text(other) {
                            Some(s) => vec![s],
                            None => {
                                ok = false;
                                break;
                            }
                        },
                    };
                    out.push((k.trim().to_string(), values));
                }
                if ok {
                    return Ok(out);
                }
            }
            Value::Array(items) if asked.len() == 1 => {
                if let Some(values) = items.iter().map(scalar_text).collect::<Option<Vec<_>>>() {
                    return Ok(vec![(asked[0].clone(), values)]);
                }
            }
            _ => {}
        }
    }
    Err(ParseError::NotFound {
        expected: "attribute→values object",
    })
}

struct StructureMap(Vec<RawStructure>);
struct PairList(Vec<(String, String)>);
struct Scalar(String);

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        scalar_text(&v)
            .map(Scalar)
            .ok_or_else(|| de::Error::custom("attribute value must be a scalar"))
    }
}

impl<'de> Deserialize<'de> for PairList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = PairList;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an attribute → value object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<PairList, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Scalar>()? {
                    pairs.push((k.trim().to_string(), v.0));
                }
                Ok(PairList(pairs))
            }
        }
        d.deserialize_map(V)
    }
}

impl<'de> Deserialize<'de> for StructureMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = StructureMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an entity → structure object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<StructureMap, A::Error> {
                let mut out = Vec::new();
                while let Some((entity, pairs)) = map.next_entry::<String, PairList>()? {
                    out.push(RawStructure {
                        entity: entity.trim().to_string(),
                        pairs: pairs.0,
                    });
                }
                Ok(StructureMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// First `{"entity": {"attribute": "value", ...}, ...}` object, keeping
/// reply order and duplicate keys.
pub fn parse_structures(raw: &str) -> Result<Vec<RawStructure>, ParseError> {
    raw.char_indices()
        .filter(|(_, c)| *c == '{')
        .find_map(|(i, _)| {
            serde_json::Deserializer::from_str(&raw[i..])
                .into_iter::<StructureMap>()
                .next()
                .and_then(Result::ok)
        })
        .map(|m| m.0)
        .ok_or(ParseError::NotFound {
            expected: "entity structure object",
        })
}

/// Case-insensitive first whole-word `yes` or `no`.
pub fn parse_yes_no(raw: &str) -> Result<bool, ParseError> {
    raw.split(|c: char| !c.is_alphanumeric())
        .find_map(|w| {
            if w.eq_ignore_ascii_case("yes") {
                Some(true)
            } else if w.eq_ignore_ascii_case("no") {
                Some(false)
            } else {
                None
            }
        })
        .ok_or(ParseError::Ambiguous)
}
