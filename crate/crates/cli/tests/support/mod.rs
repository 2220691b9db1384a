//! Deterministic fixture model shared by the CLI tests. It stands in for
//! the hosted LLM when the checked-in cassette is regenerated.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use openesd_core::gateway::{hashing_embedding, ChatRequest, GatewayError, ScriptedBackend};

pub const BATTERY: &str =
    "At the first cycle, the cell without the additive shows a higher CE of 80.6% \
compared with 78.3% for the cell containing 0.3wt% TosMIC. By the 10th cycle, the cell containing \
0.3wt% TosMIC reaches a CE of 99.1%, while the cell without the additive stays at 97.4%.";

pub const ECON: &str = "Toyota remained profitable last year. It sold 2.3 million cars in the US. Subaru, a close partner, reported record sales. Japan hosts the \
headquarters of both companies.";

pub const POLITICS: &str = "Angela Merkel served as Chancellor of Germany from 2005 to 2021. \
She led the Christian Democratic Union.";

pub const TYPES: &str = "battery cell, company, politician";

type Row = [&'static str; 3];

struct DocScript {
    id: &'static str,
    domain: &'static str,
    text: &'static str,
    initial: &'static [Row],
    /// Reply to value extraction: root name and its values.
    values: &'static [(&'static str, &'static [&'static str])],
    /// Value-guided extraction: value and the triplet it completes to.
    anchors: &'static [(&'static str, Row)],
    /// Triplet refinement rewrites; anything else is echoed.
    refinements: &'static [(Row, Row)],
    /// Answers that differ from what the known triplets give.
    answer_overrides: &'static [(&'static str, &'static str)],
    /// Entity-question overrides for probe generation.
    entity_questions: &'static [(Row, &'static str)],
    rejected_entities: &'static [&'static str],
    cot: &'static [Row],
    fewshot: &'static [Row],
}

const SCRIPTS: [DocScript; 3] = [
    DocScript {
        id: "battery-1",
        domain: "battery",
        text: BATTERY,
        initial: &[
            ["Cell Without the Additive", "CE at First Cycle", "80.6%"],
            [
                "Cell Containing 0.3wt% TosMIC",
                "CE at First Cycle",
                "78.3%",
            ],
            ["Cell Without the Additive", "CE", "higher"],
        ],
        values: &[(
            "Coulombic Efficiency",
            &["80.6%", "78.3%", "higher", "99.1%", "97.4%"],
        )],
        anchors: &[
            (
                "80.6%",
                ["Cell Without the Additive", "CE at First Cycle", "80.6%"],
            ),
            (
                "78.3%",
                [
                    "Cell Containing 0.3wt% TosMIC",
                    "CE at First Cycle",
                    "78.3%",
                ],
            ),
            ("higher", ["Cell Without the Additive", "CE", "higher"]),
            (
                "99.1%",
                [
                    "Cell Containing 0.3wt% TosMIC",
                    "CE at the 10th Cycle",
                    "99.1%",
                ],
            ),
            (
                "97.4%",
                ["Cell Without the Additive", "CE at the 10th Cycle", "97.4%"],
            ),
        ],
        refinements: &[(
            ["Cell Without the Additive", "CE", "higher"],
            [
                "Cell Without the Additive",
                "CE Comparison at First Cycle",
                "higher",
            ],
        )],
        answer_overrides: &[
            ("Which cell shows a higher CE?", "Cell Without the Additive"),
            ("What is the CE of Cell Without the Additive?", "80.6%"),
        ],
        entity_questions: &[(
            ["Cell Without the Additive", "CE", "higher"],
            "Which cell shows a higher CE?",
        )],
        rejected_entities: &[],
        cot: &[
            ["cell without the additive", "CE", "80.6%"],
            ["cell containing 0.3wt% TosMIC", "CE", "78.3%"],
        ],
        fewshot: &[["Cell Without the Additive", "CE at First Cycle", "80.6%"]],
    },
    DocScript {
        id: "econ-1",
        domain: "economics",
        text: ECON,
        initial: &[
            ["Toyota", "Profitability Status", "profitable"],
            ["It", "Annual Car Sales in US", "2.3 million cars"],
            ["Subaru", "Sales", "record"],
            ["Japan", "Hosts Headquarters Of", "Toyota and Subaru"],
        ],
        values: &[
            ("Profitability Status", &["profitable"]),
            ("Sales Volume", &["2.3 million cars", "record"]),
            ("Hosts Headquarters Of", &["Toyota and Subaru"]),
        ],
        anchors: &[
            (
                "profitable",
                ["Toyota", "Profitability Status", "profitable"],
            ),
            (
                "2.3 million cars",
                ["It", "Annual Car Sales in US", "2.3 million cars"],
            ),
            ("record", ["Subaru", "Sales", "record"]),
            (
                "Toyota and Subaru",
                ["Japan", "Hosts Headquarters Of", "Toyota and Subaru"],
            ),
        ],
        refinements: &[],
        answer_overrides: &[],
        entity_questions: &[],
        rejected_entities: &["Japan"],
        cot: &[
            ["Toyota", "annual car sales in US", "2.3 million cars"],
            ["Subaru", "sales", "record"],
        ],
        fewshot: &[["Toyota", "Profitability Status", "profitable"]],
    },
    DocScript {
        id: "pol-1",
        domain: "politics",
        text: POLITICS,
        initial: &[
            ["Angela Merkel", "Position", "Chancellor of Germany"],
            ["Angela Merkel", "Term", "2005 to 2021"],
            ["Angela Merkel", "Party", "Christian Democratic Union"],
        ],
        values: &[
            ("Position", &["Chancellor of Germany"]),
            ("Term", &["2005 to 2021"]),
            ("Party", &["Christian Democratic Union"]),
        ],
        anchors: &[
            (
                "Chancellor of Germany",
                ["Angela Merkel", "Position", "Chancellor of Germany"],
            ),
            ("2005 to 2021", ["Angela Merkel", "Term", "2005 to 2021"]),
            (
                "Christian Democratic Union",
                ["Angela Merkel", "Party", "Christian Democratic Union"],
            ),
        ],
        refinements: &[],
        answer_overrides: &[],
        entity_questions: &[],
        rejected_entities: &[],
        cot: &[["Angela Merkel", "position", "Chancellor of Germany"]],
        fewshot: &[["Angela Merkel", "Party", "Christian Democratic Union"]],
    },
];

const ROOTS: &[(&str, &str)] = &[
    (r#"["CE at First Cycle","CE"]"#, "Coulombic Efficiency"),
    (r#"["Annual Car Sales in US","Sales"]"#, "Sales Volume"),
];

const ALIASES: &[(&str, &str)] = &[("It", "Toyota")];

const EMBED_DIM: usize = 10;

fn basis(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; EMBED_DIM];
    v[i] = 1.0;
    v
}

fn near(i: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; EMBED_DIM];
    v[i] = 0.96;
    v[j] = 0.28;
    v
}

/// Attribute embeddings: the two CE names and the two sales names sit
/// 0.04 apart in cosine distance, everything else is orthogonal.
pub fn fixture_embedding(text: &str) -> Vec<f64> {
    match text.trim().to_lowercase().as_str() {
        "ce at first cycle" => basis(0),
        "ce" => near(0, 1),
        "annual car sales in us" => basis(2),
        "sales" => near(2, 3),
        "profitability status" => basis(4),
        "hosts headquarters of" => basis(5),
        "position" => basis(6),
        "term" => basis(7),
        "party" => basis(8),
        _ => hashing_embedding(text, EMBED_DIM),
    }
}

fn rows_json(rows: &[Row]) -> String {
    serde_json::to_string(rows).expect("rows serialize")
}

fn alias(entity: &str) -> &str {
    ALIASES
        .iter()
        .find(|(from, _)| *from == entity)
        .map_or(entity, |(_, to)| to)
}

fn line_after<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix))
}

fn parse_shown(shown: &str) -> Option<[String; 3]> {
    let inner = shown.trim().strip_prefix('<')?.strip_suffix('>')?;
    let parts: Vec<&str> = inner.split(", ").collect();
    match parts.as_slice() {
        [e, a, v] => Some([e.to_string(), a.to_string(), v.to_string()]),
        _ => None,
    }
}

fn same(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

impl DocScript {
    fn known(&self) -> impl Iterator<Item = &Row> {
        self.initial
            .iter()
            .chain(self.anchors.iter().map(|(_, r)| r))
            .chain(self.refinements.iter().map(|(_, r)| r))
    }

    fn questions(&self, t: &[String; 3]) -> Vec<String> {
        let [e, a, v] = t;
        let q_entity = self
            .entity_questions
            .iter()
            .find(|(r, _)| same(r[0], e) && same(r[1], a) && same(r[2], v))
            .map_or_else(
                || format!("Which entity has {a} equal to {v}?"),
                |(_, q)| q.to_string(),
            );
        vec![
            q_entity,
            format!("Which attribute of {e} has the value {v}?"),
            format!("What is the {a} of {e}?"),
        ]
    }

    fn answer(&self, q: &str) -> String {
        if let Some((_, a)) = self.answer_overrides.iter().find(|(k, _)| *k == q) {
            return a.to_string();
        }
        let found = if let Some(rest) = q.strip_prefix("Which entity has ") {
            rest.strip_suffix('?')
                .and_then(|r| r.split_once(" equal to "))
                .and_then(|(a, v)| self.known().find(|r| same(r[1], a) && same(r[2], v)))
                .map(|r| r[0].to_string())
        } else if let Some(rest) = q.strip_prefix("Which attribute of ") {
            rest.strip_suffix('?')
                .and_then(|r| r.split_once(" has the value "))
                .and_then(|(e, v)| self.known().find(|r| same(r[0], e) && same(r[2], v)))
                .map(|r| r[1].to_string())
        } else if let Some(rest) = q.strip_prefix("What is the ") {
            rest.strip_suffix('?')
                .and_then(|r| r.rsplit_once(" of "))
                .and_then(|(a, e)| self.known().find(|r| same(r[0], e) && same(r[1], a)))
                .map(|r| r[2].to_string())
        } else {
            None
        };
        found.unwrap_or_else(|| "unknown".to_string())
    }

    fn construct(&self, triplets: &str) -> String {
        let rows: Vec<[String; 3]> = serde_json::from_str(triplets).unwrap_or_default();
        let mut groups: Vec<(String, Vec<(String, String)>)> = Vec::new();
        for [e, a, v] in rows {
            let name = alias(&e).to_string();
            match groups.iter_mut().find(|(n, _)| *n == name) {
                Some((_, pairs)) => pairs.push((a, v)),
                None => groups.push((name, vec![(a, v)])),
            }
        }
        let body: Vec<String> = groups
            .iter()
            .map(|(name, pairs)| {
                let inner: Vec<String> = pairs
                    .iter()
                    .map(|(a, v)| format!("{}: {}", serde_json::json!(a), serde_json::json!(v)))
                    .collect();
                format!("{}: {{{}}}", serde_json::json!(name), inner.join(", "))
            })
            .collect();
        format!("{{{}}}", body.join(", "))
    }

    fn reply(&self, tag: &str, prompt: &str) -> String {
        match tag {
            "zero_shot_extraction" => rows_json(self.initial),
            "cot_extraction" => rows_json(self.cot),
            "fewshot_extraction" => rows_json(self.fewshot),
            "value_extraction" => {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .values
                    .iter()
                    .map(|(k, vs)| (k.to_string(), serde_json::json!(vs)))
                    .collect();
                serde_json::Value::Object(map).to_string()
            }
            "value_guided_extraction" => {
                let value = line_after(prompt, "Value: ").unwrap_or_default();
                match self.anchors.iter().find(|(v, _)| *v == value) {
                    Some((_, row)) => rows_json(&[*row]),
                    None => "[]".to_string(),
                }
            }
            "mdqa_generate" => {
                let t = line_after(prompt, "Triplet: ").and_then(parse_shown);
                match t {
                    Some(t) => {
                        serde_json::to_string(&self.questions(&t)).expect("strings serialize")
                    }
                    None => "[]".to_string(),
                }
            }
            "mdqa_answer" => {
                let answers: Vec<String> = (1..=3)
                    .map(|i| {
                        line_after(prompt, &format!("Question {i}: "))
                            .map_or_else(String::new, |q| self.answer(q))
                    })
                    .collect();
                serde_json::to_string(&answers).expect("strings serialize")
            }
            "triplet_refinement" => {
                let Some(t) = line_after(prompt, "Triplet: ").and_then(parse_shown) else {
                    return "[]".to_string();
                };
                let row = self
                    .refinements
                    .iter()
                    .find(|(from, _)| {
                        same(from[0], &t[0]) && same(from[1], &t[1]) && same(from[2], &t[2])
                    })
                    .map(|(_, to)| to.map(str::to_string))
                    .unwrap_or(t);
                serde_json::to_string(&[row]).expect("rows serialize")
            }
            "structure_construction" => {
                self.construct(line_after(prompt, "Triplets: ").unwrap_or("[]"))
            }
            "type_filtration" => {
                let rows = prompt
                    .split_once("The given triplets are ")
                    .and_then(|(_, rest)| rest.split_once(". The given entity types"))
                    .map(|(rows, _)| rows)
                    .unwrap_or("[]");
                let rows: Vec<[String; 3]> = serde_json::from_str(rows).unwrap_or_default();
                let rejected = rows
                    .first()
                    .is_some_and(|r| self.rejected_entities.iter().any(|e| same(e, &r[0])));
                if rejected { "No" } else { "Yes" }.to_string()
            }
            "answer_judge" => "No".to_string(),
            _ => "[]".to_string(),
        }
    }
}

fn fixture_chat(req: &ChatRequest) -> Result<String, GatewayError> {
    let tag = req.tag.as_deref().unwrap_or_default();
    if tag == "root_attribute_induction" {
        let name = ROOTS
            .iter()
            .find(|(members, _)| req.user.contains(members))
            .map_or("Attribute", |(_, name)| name);
        return Ok(serde_json::json!(name).to_string());
    }
    Ok(SCRIPTS
        .iter()
        .find(|s| req.user.contains(s.text))
        .map_or_else(|| "[]".to_string(), |s| s.reply(tag, &req.user)))
}

pub fn fixture_backend() -> ScriptedBackend {
    ScriptedBackend::new(fixture_chat).with_embedder(fixture_embedding)
}

pub fn shared_backend() -> Arc<ScriptedBackend> {
    Arc::new(fixture_backend())
}

pub fn corpus_lines() -> String {
    SCRIPTS
        .iter()
        .map(|s| {
            serde_json::json!({ "id": s.id, "text": s.text, "domain": s.domain }).to_string() + "\n"
        })
        .collect()
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

pub fn openesd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openesd"))
        .args(args)
        .env_remove("OPENESD_API_KEY")
        .output()
        .expect("openesd runs")
}

/// The three pipeline configurations compared in the fixture evaluation,
/// as extra `run` flags.
pub const CONFIGS: [(&str, &[&str]); 3] = [
    ("zoes", &[]),
    ("zoes_no_enrich", &["--no-enrich"]),
    ("zoes_no_refine", &["--no-refine"]),
];

/// Replays one configuration over the fixture corpus into `out`.
pub fn replay_run(flags: &[&str], out: &Path) -> Output {
    let corpus = fixture("corpus.jsonl");
    let config = fixture("config.toml");
    let mut args = vec![
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(flags);
    openesd(&args)
}
