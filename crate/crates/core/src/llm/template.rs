//! Prompt templates.
//!
//! Templates are UTF-8 text files with `{placeholder}` substitutions. The
//! persona template also contains a block between lines `{#each samples}` and
//! `{/each}` that is repeated once per few-shot example. One trailing newline
//! is stripped from template files so that a prompt ends exactly at its
//! response scaffold.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COMMUNITY_GOAL: &str = "community goal";
pub const COMMUNITY_RULE: &str = "community rule";
pub const USER_NAME: &str = "user name";
pub const USER_PERSONA: &str = "user persona";
pub const SAMPLE_USER_NAME: &str = "sample user name";
pub const SAMPLE_USER_PERSONA: &str = "sample user persona";
pub const INFORMATION: &str = "Information";
pub const THREAD: &str = "thread";
pub const THREAD_POSTS: &str = "All posts in targeted thread";
pub const REPLY_TARGET: &str = "reply target";

const REPEAT_OPEN: &str = "{#each samples}";
const REPEAT_CLOSE: &str = "{/each}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    PersonaGen,
    QueryGenPost,
    QueryGenReply,
    PostGen,
    ReplyGen,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::PersonaGen,
        TemplateId::QueryGenPost,
        TemplateId::QueryGenReply,
        TemplateId::PostGen,
        TemplateId::ReplyGen,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::PersonaGen => "persona_gen",
            TemplateId::QueryGenPost => "query_gen_post",
            TemplateId::QueryGenReply => "query_gen_reply",
            TemplateId::PostGen => "post_gen",
            TemplateId::ReplyGen => "reply_gen",
        }
    }

    /// File name inside a template directory.
    pub fn file_name(&self) -> String {
        format!("{}.txt", self.as_str())
    }

    fn builtin_source(&self) -> &'static str {
        match self {
            TemplateId::PersonaGen => include_str!("../../templates/persona_gen.txt"),
            TemplateId::QueryGenPost => include_str!("../../templates/query_gen_post.txt"),
            TemplateId::QueryGenReply => include_str!("../../templates/query_gen_reply.txt"),
            TemplateId::PostGen => include_str!("../../templates/post_gen.txt"),
            TemplateId::ReplyGen => include_str!("../../templates/reply_gen.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::config("template_id", format!("unknown template `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Placeholder(String),
    Repeat(Vec<Segment>),
}

/// Placeholder values. `samples` feeds the repeated few-shot block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    values: BTreeMap<String, String>,
    samples: Vec<BTreeMap<String, String>>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, placeholder: &str, value: impl Into<String>) -> Self {
        self.values.insert(placeholder.to_string(), value.into());
        self
    }

    pub fn sample(mut self, name: impl Into<String>, persona: impl Into<String>) -> Self {
        let mut entry = BTreeMap::new();
        entry.insert(SAMPLE_USER_NAME.to_string(), name.into());
        entry.insert(SAMPLE_USER_PERSONA.to_string(), persona.into());
        self.samples.push(entry);
        self
    }

    pub fn get(&self, placeholder: &str) -> Option<&str> {
        self.values.get(placeholder).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn parse(id: TemplateId, source: &str) -> Result<Self> {
        let body = source.strip_suffix('\n').unwrap_or(source);
        let body = body.strip_suffix('\r').unwrap_or(body).to_string();
        let malformed = |message: &str| Error::Template {
            template: id.to_string(),
            message: message.to_string(),
        };

        let mut stack: Vec<Vec<Segment>> = vec![Vec::new()];
        let lines: Vec<&str> = body.split('\n').collect();
        let last = lines.len() - 1;
        for (i, line) in lines.iter().enumerate() {
            match line.trim_end_matches('\r') {
                REPEAT_OPEN => {
                    if stack.len() > 1 {
                        return Err(malformed("nested repeat blocks are not supported"));
                    }
                    stack.push(Vec::new());
                }
                REPEAT_CLOSE => {
                    let block = stack.pop().filter(|_| !stack.is_empty());
                    let Some(block) = block else {
                        return Err(malformed("`{/each}` without matching `{#each samples}`"));
                    };
                    stack.last_mut().unwrap().push(Segment::Repeat(block));
                }
                _ => {
                    let frame = stack.last_mut().unwrap();
                    parse_line(line, frame);
                    if i != last {
                        frame.push(Segment::Text("\n".to_string()));
                    }
                }
            }
        }
        if stack.len() != 1 {
            return Err(malformed("unterminated `{#each samples}` block"));
        }
        Ok(PromptTemplate {
            id,
            body,
            segments: stack.pop().unwrap(),
        })
    }

    pub fn builtin(id: TemplateId) -> Self {
        PromptTemplate::parse(id, id.builtin_source()).expect("built-in templates are well formed")
    }

    /// Every placeholder name in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        fn walk(segments: &[Segment], out: &mut Vec<String>) {
            for segment in segments {
                match segment {
                    Segment::Placeholder(name) if !out.contains(name) => out.push(name.clone()),
                    Segment::Repeat(inner) => walk(inner, out),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.segments, &mut out);
        out
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String> {
        let mut out = String::with_capacity(self.body.len() * 2);
        self.render_into(&self.segments, bindings, None, &mut out)?;
        Ok(out)
    }

    fn render_into(
        &self,
        segments: &[Segment],
        bindings: &Bindings,
        sample: Option<&BTreeMap<String, String>>,
        out: &mut String,
    ) -> Result<()> {
        for segment in segments {
            match segment {
                Segment::Text(text) => out.push_str(text),
                Segment::Placeholder(name) => {
                    let value = sample
                        .and_then(|s| s.get(name))
                        .or_else(|| bindings.values.get(name))
                        .ok_or_else(|| Error::MissingBinding {
                            template: self.id.to_string(),
                            placeholder: name.clone(),
                        })?;
                    out.push_str(value);
                }
                Segment::Repeat(inner) => {
                    if bindings.samples.is_empty() {
                        return Err(Error::MissingBinding {
                            template: self.id.to_string(),
                            placeholder: SAMPLE_USER_NAME.to_string(),
                        });
                    }
                    for sample in &bindings.samples {
                        self.render_into(inner, bindings, Some(sample), out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_placeholder_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_alphanumeric() || c == ' ' || c == '_')
        && !name.starts_with(' ')
        && !name.ends_with(' ')
}

fn parse_line(line: &str, out: &mut Vec<Segment>) {
    let mut text = String::new();
    let mut rest = line;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder_name(&after[..close]) => {
                text.push_str(&rest[..open]);
                if !text.is_empty() {
                    out.push(Segment::Text(std::mem::take(&mut text)));
                }
                out.push(Segment::Placeholder(after[..close].to_string()));
                rest = &after[close + 1..];
            }
            _ => {
                text.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
}

/// The five templates used by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: TemplateId::ALL
                .into_iter()
                .map(|id| (id, PromptTemplate::builtin(id)))
                .collect(),
        }
    }
}

impl TemplateSet {
    /// Loads `<id>.txt` files from `dir`, using built-ins for any that are absent.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = TemplateSet::default();
        for id in TemplateId::ALL {
            let path = dir.join(id.file_name());
            if path.exists() {
                let source = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                set.templates.insert(id, PromptTemplate::parse(id, &source)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String> {
        self.get(id).render(bindings)
    }
}
