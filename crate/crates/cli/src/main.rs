//! `openesd`: run the structure discovery pipeline, the extraction
//! baselines, pooled evaluation, and the annotation review server.

mod serve;
mod sources;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use openesd_core::evaluation::{emit_report, evaluate, render_table};
use openesd_core::gateway::CassetteMode;
use openesd_core::pipeline::{run_baseline, run_corpus, BaselineMethod, PipelineConfig};
use openesd_core::EntityTypeSet;

use crate::sources::EvalSources;

#[derive(Parser)]
#[command(
    name = "openesd",
    version,
    about = "Zero-shot open-schema entity structure discovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, enrich, refine and unify every document of a corpus.
    Run(RunArgs),
    /// Run a type-constrained extraction baseline over a corpus.
    Baseline {
        #[arg(long, value_enum)]
        method: Baseline,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score method outputs against pooled human judgments.
    Eval {
        #[command(flatten)]
        sources: EvalSources,
        /// Write the JSON report here, and the text table next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the review API for annotators.
    Serve {
        #[command(flatten)]
        sources: EvalSources,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Cot,
    Fewshot,
}

#[derive(Args)]
struct RunArgs {
    /// JSON Lines corpus, one `{"id", "text", "domain"}` object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated entity types, e.g. `battery cell, electrolyte additive`.
    #[arg(long)]
    types: Option<String>,
    #[arg(long)]
    no_enrich: bool,
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Serve every model call from the cassette; no network access.
    #[arg(long, requires = "cassette", conflicts_with = "record")]
    replay: bool,
    /// Forward calls upstream and append them to the cassette.
    #[arg(long, requires = "cassette")]
    record: bool,
    /// Documents processed at once.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Method name recorded in the manifest and used for pooling.
    #[arg(long)]
    name: Option<String>,
}

impl RunArgs {
    fn config(&self) -> Result<(PipelineConfig, EntityTypeSet)> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if self.no_enrich {
            cfg.stages.enrich = false;
        }
        if self.no_refine {
            cfg.stages.refine = false;
        }
        if let Some(c) = &self.cassette {
            cfg.cassette.path = Some(c.clone());
            cfg.cassette.mode = if self.replay {
                CassetteMode::Replay
            } else if self.record {
                CassetteMode::Record
            } else {
                bail!("--cassette needs --replay or --record");
            };
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(m) = &self.name {
            cfg.method = Some(m.clone());
        }
        let types = match &self.types {
            Some(list) => EntityTypeSet::parse_list(list)?,
            None => EntityTypeSet::new(cfg.types.clone())?,
        };
        if types.is_empty() {
            bail!("no entity types given; pass --types or set `types` in the config");
        }
        cfg.types = types.iter().map(str::to_string).collect();
        cfg.validate()?;
        Ok((cfg, types))
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let (cfg, types) = args.config()?;
            let llm = cfg.llm(None)?;
            let manifest = run_corpus(&llm, &args.corpus, &types, &cfg)?;
            println!(
                "{}: {} documents processed, {} failed, {} skipped lines; output in {}",
                manifest.method,
                manifest.documents.len(),
                manifest.failed.len(),
                manifest.corpus_issues.len(),
                cfg.output_dir.display()
            );
        }
        Command::Baseline { method, run } => {
            let (cfg, types) = run.config()?;
            let method = match method {
                Baseline::Cot => BaselineMethod::Cot,
                Baseline::Fewshot => BaselineMethod::Fewshot,
            };
            let llm = cfg.llm(None)?;
            let manifest = run_baseline(&llm, method, &run.corpus, &types, &cfg)?;
            println!(
                "{}: {} documents processed, {} failed; output in {}",
                manifest.method,
                manifest.documents.len(),
                manifest.failed.len(),
                cfg.output_dir.display()
            );
        }
        Command::Eval { sources, out } => {
            let inputs = sources.load()?;
            let report = evaluate(&inputs, sources.scorer.as_deref())?;
            print!("{}", render_table(&report));
            if let Some(path) = out {
                emit_report(&report, &path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Serve { sources, addr } => serve::run(sources, &addr)?,
    }
    Ok(())
}
