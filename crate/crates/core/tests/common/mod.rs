#![allow(dead_code)]

use std::sync::Arc;

use openesd_core::gateway::{Cassette, CassetteMode, ChatRequest, Gateway, ScriptedBackend};
use openesd_core::llm::{Llm, LlmSettings};
use openesd_core::prompt::PromptKit;
use openesd_core::{Document, Stage, Triplet, TripletSet};

pub const FIG1: &str =
    "At the first cycle, the cell without the additive shows a higher CE of 80.6% \
compared with 78.3% for the cell containing 0.3wt% TosMIC. By the 10th cycle, the cell containing \
0.3wt% TosMIC reaches a CE of 99.1%, while the cell without the additive stays at 97.4%.";

pub const TOYOTA: &str =
    "Toyota remained profitable last year. It sold 2.3 million cars in the US \
and manufactured 1M cars outside the US.";

pub struct Mock {
    pub llm: Llm,
    pub backend: Arc<ScriptedBackend>,
}

impl Mock {
    pub fn chat_calls(&self) -> usize {
        self.backend.chat_calls()
    }

    pub fn embed_calls(&self) -> usize {
        self.backend.embed_calls()
    }
}

pub type Script = dyn Fn(&str, &str) -> String + Send + Sync;

fn scripted(f: Arc<Script>) -> ScriptedBackend {
    ScriptedBackend::new(move |req: &ChatRequest| {
        Ok(f(req.tag.as_deref().unwrap_or_default(), &req.user))
    })
}

fn llm_over(gateway: Gateway) -> Llm {
    Llm::new(
        Arc::new(gateway),
        Arc::new(PromptKit::default()),
        LlmSettings::default(),
    )
}

/// Scripted model: `f(tag, prompt)` gives the reply. The tag is the
/// template id, with `:repair` appended for repair prompts.
pub fn mock(f: impl Fn(&str, &str) -> String + Send + Sync + 'static) -> Mock {
    from_backend(scripted(Arc::new(f)))
}

pub fn mock_embedding(
    f: impl Fn(&str, &str) -> String + Send + Sync + 'static,
    embed: impl Fn(&str) -> Vec<f64> + Send + Sync + 'static,
) -> Mock {
    from_backend(scripted(Arc::new(f)).with_embedder(embed))
}

fn from_backend(backend: ScriptedBackend) -> Mock {
    let backend = Arc::new(backend);
    Mock {
        llm: llm_over(Gateway::passthrough(backend.clone())),
        backend,
    }
}

/// Runs `op` against the script while recording a cassette, then again
/// from the cassette alone. Returns both results and the number of
/// upstream calls made during the replay (always expected to be 0).
pub fn record_then_replay<T>(
    f: impl Fn(&str, &str) -> String + Send + Sync + 'static,
    op: impl Fn(&Llm) -> T,
) -> (T, T, usize) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cassette.jsonl");
    let backend = Arc::new(scripted(Arc::new(f)));
    let recording = llm_over(Gateway::recording(
        backend.clone(),
        Cassette::open(&path, CassetteMode::Record).unwrap(),
    ));
    let recorded = op(&recording);
    let before = backend.chat_calls() + backend.embed_calls();
    let replaying = llm_over(Gateway::replay(
        Cassette::open(&path, CassetteMode::Replay).unwrap(),
    ));
    let replayed = op(&replaying);
    let upstream = backend.chat_calls() + backend.embed_calls() - before;
    (recorded, replayed, upstream)
}

pub fn doc(id: &str, text: &str) -> Document {
    Document::new(id, text).unwrap()
}

pub fn triplet(e: &str, a: &str, v: &str, stage: Stage) -> Triplet {
    Triplet::new(e, a, v, stage, "d").unwrap()
}

pub fn set(rows: &[[&str; 3]], stage: Stage) -> TripletSet {
    TripletSet::new(
        rows.iter()
            .map(|[e, a, v]| triplet(e, a, v, stage))
            .collect(),
        stage,
    )
    .unwrap()
}

pub fn rows(set: &TripletSet) -> Vec<[String; 3]> {
    set.iter()
        .map(|t| [t.entity.clone(), t.attribute.clone(), t.value.clone()])
        .collect()
}

/// Text between `prefix` and the end of its line in `prompt`.
pub fn line_after<'a>(prompt: &'a str, prefix: &str) -> &'a str {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no {prefix:?} line in prompt"))
}
