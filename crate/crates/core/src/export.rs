//! Run export documents.
//!
//! A run is written as three files: `run.json` (the run document, keys sorted
//! at every level so output is byte-stable), `events.jsonl` (one event per
//! line), and `transcript.txt` (threads rendered for reading).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Event, SimulationResult};
use crate::error::{Error, Result};
use crate::model::{render_thread, RagMode, SimulationConfig, Thread, UserPersona};

pub const RUN_FILE: &str = "run.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunExport {
    pub config: SimulationConfig,
    pub personas: Vec<UserPersona>,
    pub threads: Vec<Thread>,
    pub rag_mode: RagMode,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl RunExport {
    pub fn from_result(result: &SimulationResult) -> Self {
        RunExport {
            config: result.config.clone(),
            personas: result.personas.clone(),
            threads: result.threads.clone(),
            rag_mode: result.config.rag_mode,
            rng_seed: result.config.rng_seed,
            aborted: result.aborted.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: RunExport = serde_json::from_str(text)?;
        for thread in &export.threads {
            thread.check()?;
        }
        Ok(export)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let value = sort_keys(serde_json::to_value(self)?);
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn persona(&self, name: &str) -> Option<&UserPersona> {
        self.personas.iter().find(|p| p.name == name)
    }
}

/// Rebuilds every object with its keys in sorted order, independent of how
/// serde_json's map type is configured.
pub fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn events_jsonl(events: &[Event]) -> Result<String> {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(&sort_keys(serde_json::to_value(event)?))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn transcript(result: &SimulationResult) -> String {
    let c = &result.config.community;
    let mut out = format!(
        "# {}\nGoal: {}\nRule: {}\nMode: {}\nSeed: {}\n",
        c.scenario_name, c.goal, c.rule, result.config.rag_mode, result.config.rng_seed
    );
    out.push_str("\n## Personas\n");
    for p in &result.personas {
        out.push_str(&format!(
            "- {} ({}) attention={} range={} depth={}\n",
            p.name, p.description, p.attention, p.range, p.depth
        ));
    }
    for thread in &result.threads {
        out.push_str(&format!("\n## Thread {}\n{}\n", thread.thread_id, render_thread(thread)));
    }
    if let Some(reason) = &result.aborted {
        out.push_str(&format!("\n(aborted: {reason})\n"));
    }
    out
}

/// Writes the three run files into `dir`, creating it if needed.
pub fn write_run(result: &SimulationResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: String| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };
    write(RUN_FILE, RunExport::from_result(result).to_json()?)?;
    write(EVENTS_FILE, events_jsonl(&result.event_log)?)?;
    write(TRANSCRIPT_FILE, transcript(result))
}
