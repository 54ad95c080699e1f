//! Scenario files: a community plus everything needed to run it.
//!
//! ```toml
//! scenario_name = "BOJ Discussion"
//! goal = "To discuss the Bank of Japan's monetary policy."
//! rule = "Use courteous language in discussions."
//! mode = "advanced"
//! seed = 42
//! persona_count = 22
//! reply_rounds = 5
//! corpus = "../corpus"          # relative to this file
//!
//! [backend]
//! kind = "mock"
//! script = "../mock/boj.toml"
//!
//! [[seeds]]
//! name = "tanaka"
//! description = "A retired banker."
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{SimulationResult, Simulator};
use crate::error::{Error, Result};
use crate::llm::{Backend, HttpBackend, HttpBackendConfig, MockBackend, MockScript, TemplateSet};
use crate::model::{CommunityConfig, RagMode, ReplyTargetPolicy, SeedPersona, SimulationConfig};
use crate::retrieval::{ingest_corpus, HttpSource, SourceRegistry};
use crate::summarizer::LexRankConfig;

pub const LOCAL_SOURCE: &str = "local";

fn default_source_id() -> String {
    LOCAL_SOURCE.to_string()
}

fn default_top_level_count() -> usize {
    28
}

fn default_thread_capacity() -> usize {
    10
}

fn default_simple_depth() -> u8 {
    3
}

fn default_source_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Mock {
        #[serde(default)]
        script: Option<PathBuf>,
    },
    Http(HttpBackendConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Mock { script: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_name: String,
    pub goal: String,
    pub rule: String,
    #[serde(default = "default_source_id")]
    pub source_id: String,
    #[serde(default)]
    pub mode: Option<RagMode>,
    #[serde(default)]
    pub seed: u64,
    pub persona_count: usize,
    #[serde(default = "default_top_level_count")]
    pub top_level_count: usize,
    pub reply_rounds: usize,
    #[serde(default = "default_thread_capacity")]
    pub thread_capacity: usize,
    #[serde(default)]
    pub reply_target: ReplyTargetPolicy,
    #[serde(default = "default_simple_depth")]
    pub simple_depth: u8,
    /// Directory of article files backing the local source.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Search endpoint used instead of a local corpus.
    #[serde(default)]
    pub source_endpoint: Option<String>,
    #[serde(default = "default_source_timeout_ms")]
    pub source_timeout_ms: u64,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub lexrank: LexRankConfig,
    pub seeds: Vec<SeedPersona>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut scenario: Scenario = toml::from_str(text).map_err(|e| Error::config("scenario", e.message()))?;
        scenario.base_dir = base_dir.to_path_buf();
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field,
                message: format!("{message} (in {})", path.display()),
            },
            other => other,
        })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    /// Builds the run configuration; `mode` and `seed` override the file.
    pub fn config(&self, mode: Option<RagMode>, seed: Option<u64>) -> Result<SimulationConfig> {
        let rag_mode = mode
            .or(self.mode)
            .ok_or_else(|| Error::config("mode", "no retrieval mode given"))?;
        let backend_id = match &self.backend {
            BackendSpec::Mock { .. } => "mock".to_string(),
            BackendSpec::Http(http) => format!("http:{}", http.endpoint),
        };
        let config = SimulationConfig {
            community: CommunityConfig {
                goal: self.goal.clone(),
                rule: self.rule.clone(),
                scenario_name: self.scenario_name.clone(),
                source_id: self.source_id.clone(),
            },
            rag_mode,
            persona_count: self.persona_count,
            seed_personas: self.seeds.clone(),
            top_level_count: self.top_level_count,
            reply_rounds: self.reply_rounds,
            thread_capacity: self.thread_capacity,
            rng_seed: seed.unwrap_or(self.seed),
            backend_id,
            corpus_path: self
                .corpus
                .as_ref()
                .map(|p| p.display().to_string())
                .or_else(|| self.source_endpoint.clone())
                .unwrap_or_default(),
            reply_target: self.reply_target,
            simple_depth: self.simple_depth,
        };
        config.validate()?;
        self.lexrank.validate()?;
        Ok(config)
    }

    pub fn backend(&self) -> Result<Box<dyn Backend>> {
        Ok(match &self.backend {
            BackendSpec::Mock { script: None } => Box::new(MockBackend::default()),
            BackendSpec::Mock { script: Some(path) } => {
                Box::new(MockBackend::new(MockScript::load(&self.resolve(path))?))
            }
            BackendSpec::Http(http) => Box::new(HttpBackend::new(http.clone())),
        })
    }

    /// Registers the scenario's source. Modes without retrieval get an empty
    /// registry, so no corpus is read.
    pub fn sources(&self, mode: RagMode) -> Result<SourceRegistry> {
        let mut registry = SourceRegistry::new();
        if mode == RagMode::None {
            return Ok(registry);
        }
        match (&self.source_endpoint, &self.corpus) {
            (Some(endpoint), _) => registry.register(
                &self.source_id,
                Box::new(HttpSource::new(endpoint, Duration::from_millis(self.source_timeout_ms))),
            ),
            (None, Some(dir)) => {
                registry.register(&self.source_id, Box::new(ingest_corpus(&self.resolve(dir))?))
            }
            (None, None) => {
                return Err(Error::config(
                    "corpus",
                    format!("mode `{mode}` needs a corpus or source_endpoint"),
                ))
            }
        }
        Ok(registry)
    }

    pub fn templates(&self) -> Result<TemplateSet> {
        match &self.templates_dir {
            Some(dir) => TemplateSet::load_dir(&self.resolve(dir)),
            None => Ok(TemplateSet::default()),
        }
    }

    /// Loads every collaborator and runs the simulation.
    pub fn run(&self, mode: Option<RagMode>, seed: Option<u64>) -> Result<SimulationResult> {
        let config = self.config(mode, seed)?;
        let templates = self.templates()?;
        let sources = self.sources(config.rag_mode)?;
        let backend = self.backend()?;
        let simulator = Simulator {
            templates: &templates,
            sources: &sources,
            backend: backend.as_ref(),
            lexrank: self.lexrank,
        };
        simulator.run(&config)
    }
}
