use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use openesd_core::evaluation::{read_jsonl, EvalInputs, MethodOutput};
use openesd_core::pipeline::{predictions_path, read_corpus};
use openesd_core::{Document, TripletRecord};

/// Files that feed an evaluation.
#[derive(Args, Clone, Debug)]
pub struct EvalSources {
    /// `NAME=PATH`, where PATH is a run directory or a triplet JSON Lines file. Repeatable.
    #[arg(long = "predictions", value_parser = parse_named, required = true)]
    pub predictions: Vec<(String, PathBuf)>,
    /// Judgment JSON Lines file.
    #[arg(long)]
    pub judgments: PathBuf,
    /// Pairwise coverage JSON Lines file.
    #[arg(long)]
    pub pairwise: Option<PathBuf>,
    /// Corpus file, for domain labels and document text.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Annotator whose scores count; defaults to the first one in the judgment file.
    #[arg(long)]
    pub scorer: Option<String>,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.trim().is_empty() && !path.is_empty() => {
            Ok((name.trim().to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn triplet_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        predictions_path(path)
    } else {
        path.to_path_buf()
    }
}

impl EvalSources {
    pub fn documents(&self) -> Result<Vec<Document>> {
        match &self.corpus {
            Some(c) => Ok(read_corpus(c)?.0),
            None => Ok(Vec::new()),
        }
    }

    /// Reads every file. A missing judgment or pairwise file counts as empty.
    pub fn load(&self) -> Result<EvalInputs> {
        let mut outputs = Vec::new();
        for (name, path) in &self.predictions {
            if outputs.iter().any(|o: &MethodOutput| &o.method == name) {
                bail!("method {name:?} given twice");
            }
            let file = triplet_file(path);
            let triplets: Vec<TripletRecord> =
                read_jsonl(&file).with_context(|| format!("reading predictions of {name}"))?;
            outputs.push(MethodOutput {
                method: name.clone(),
                triplets,
            });
        }
        let judgments = if self.judgments.exists() {
            read_jsonl(&self.judgments)?
        } else {
            Vec::new()
        };
        let pairwise = match &self.pairwise {
            Some(p) if p.exists() => read_jsonl(p)?,
            _ => Vec::new(),
        };
        let domains: BTreeMap<String, String> = self
            .documents()?
            .into_iter()
            .filter_map(|d| d.domain_label.map(|l| (d.id, l)))
            .collect();
        Ok(EvalInputs {
            outputs,
            judgments,
            pairwise,
            domains,
        })
    }
}
