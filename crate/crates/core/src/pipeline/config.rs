use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::enrichment::EnrichConfig;
use crate::gateway::{Backend, Cassette, CassetteMode, Gateway, OpenAiBackend, RetryPolicy};
use crate::llm::{Llm, LlmSettings};
use crate::prompt::PromptKit;
use crate::refinement::MatchMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// OpenAI-compatible endpoint; the key is read from `OPENESD_API_KEY`.
    pub base_url: String,
    pub timeout_secs: u64,
    /// 0 means unlimited.
    pub requests_per_minute: u32,
    pub max_retries: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "https://api.openai.com/v1".into(),
            timeout_secs: 120,
            requests_per_minute: 0,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub match_mode: MatchMode,
}

/// Ablation switches. Each is independent of the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageFlags {
    pub enrich: bool,
    pub refine: bool,
}

impl Default for StageFlags {
    fn default() -> Self {
        StageFlags {
            enrich: true,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CassetteConfig {
    pub path: Option<PathBuf>,
    pub mode: CassetteMode,
}

impl Default for CassetteConfig {
    fn default() -> Self {
        CassetteConfig {
            path: None,
            mode: CassetteMode::Passthrough,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Demonstrations for the few-shot baseline.
    pub demos: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Name under which outputs are pooled. Derived from the stage flags
    /// or baseline when absent.
    pub method: Option<String>,
    pub types: Vec<String>,
    /// Documents processed at once.
    pub workers: usize,
    pub backend: BackendConfig,
    pub llm: LlmSettings,
    pub enrichment: EnrichConfig,
    pub refinement: RefineConfig,
    pub stages: StageFlags,
    pub cassette: CassetteConfig,
    /// Directory of `<template_id>.txt` prompt overrides.
    pub prompt_dir: Option<PathBuf>,
    pub baseline: BaselineConfig,
    /// Left out of the manifest snapshot so runs into different
    /// directories stay comparable.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: None,
            types: Vec::new(),
            workers: 4,
            backend: BackendConfig::default(),
            llm: LlmSettings::default(),
            enrichment: EnrichConfig::default(),
            refinement: RefineConfig::default(),
            stages: StageFlags::default(),
            cassette: CassetteConfig::default(),
            prompt_dir: None,
            baseline: BaselineConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.cassette.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.prompt_dir.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.workers == 0 || self.llm.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.enrichment.threshold > 0.0) {
            return bad("enrichment.threshold must be positive");
        }
        if self.cassette.mode != CassetteMode::Passthrough && self.cassette.path.is_none() {
            return bad("cassette.path is required for record and replay");
        }
        Ok(())
    }

    /// Method name used for artifacts and pooling.
    pub fn method_name(&self) -> String {
        if let Some(m) = &self.method {
            return m.clone();
        }
        let mut name = String::from("zoes");
        if !self.stages.enrich {
            name.push_str("_no_enrich");
        }
        if !self.stages.refine {
            name.push_str("_no_refine");
        }
        name
    }

    /// Gateway for this configuration. `backend` replaces the HTTP client,
    /// which is otherwise built from `[backend]` and the API key variable.
    /// Replay mode builds no backend and needs no key.
    pub fn gateway(&self, backend: Option<Arc<dyn Backend>>) -> Result<Gateway, PipelineError> {
        self.validate()?;
        let open = |mode| {
            let path = self.cassette.path.as_ref().expect("validated");
            Cassette::open(path, mode).map_err(PipelineError::Gateway)
        };
        if self.cassette.mode == CassetteMode::Replay {
            return Ok(Gateway::replay(open(CassetteMode::Replay)?));
        }
        let backend = match backend {
            Some(b) => b,
            None => Arc::new(
                OpenAiBackend::from_env(
                    &self.backend.base_url,
                    Duration::from_secs(self.backend.timeout_secs),
                )
                .map_err(PipelineError::Gateway)?,
            ),
        };
        let mut gw = match self.cassette.mode {
            CassetteMode::Record => Gateway::recording(backend, open(CassetteMode::Record)?),
            _ => Gateway::passthrough(backend),
        };
        gw = gw.with_retry(RetryPolicy {
            max_retries: self.backend.max_retries,
            ..RetryPolicy::default()
        });
        if self.backend.requests_per_minute > 0 {
            gw = gw.with_rate_limit(self.backend.requests_per_minute);
        }
        Ok(gw)
    }

    pub fn prompts(&self) -> Result<PromptKit, PipelineError> {
        match &self.prompt_dir {
            Some(dir) => PromptKit::with_overrides(dir).map_err(PipelineError::Prompt),
            None => Ok(PromptKit::default()),
        }
    }

    pub fn llm(&self, backend: Option<Arc<dyn Backend>>) -> Result<Llm, PipelineError> {
        Ok(Llm::new(
            Arc::new(self.gateway(backend)?),
            Arc::new(self.prompts()?),
            self.llm.clone(),
        ))
    }
}
