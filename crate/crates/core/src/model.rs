//! Communities, personas, articles, posts and threads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum user name length in characters.
pub const NAME_MAX_CHARS: usize = 20;
/// Maximum persona description length in characters.
pub const DESCRIPTION_MAX_CHARS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityConfig {
    pub goal: String,
    pub rule: String,
    pub scenario_name: String,
    pub source_id: String,
}

impl CommunityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.goal.trim().is_empty() {
            return Err(Error::config("goal", "must not be empty"));
        }
        if self.rule.trim().is_empty() {
            return Err(Error::config("rule", "must not be empty"));
        }
        if self.scenario_name.trim().is_empty() {
            return Err(Error::config("scenario_name", "must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Generated,
}

/// The three search-behaviour parameters carried by every persona.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Queries pursued and articles read individually, 1..=10.
    pub attention: u8,
    /// Articles skimmed for overall context, 1..=10.
    pub range: u8,
    /// Reading depth mapped onto the summary budget table, 0..=6.
    pub depth: u8,
}

impl SearchParams {
    pub fn in_bounds(&self) -> bool {
        (1..=10).contains(&self.attention) && (1..=10).contains(&self.range) && self.depth <= 6
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPersona {
    pub name: String,
    pub description: String,
    pub attention: u8,
    pub range: u8,
    pub depth: u8,
    pub origin: Origin,
}

impl UserPersona {
    pub fn new(name: String, description: String, params: SearchParams, origin: Origin) -> Self {
        UserPersona {
            name,
            description,
            attention: params.attention,
            range: params.range,
            depth: params.depth,
            origin,
        }
    }

    pub fn params(&self) -> SearchParams {
        SearchParams {
            attention: self.attention,
            range: self.range,
            depth: self.depth,
        }
    }
}

/// A name/description pair given in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPersona {
    pub name: String,
    pub description: String,
}

/// Truncate to at most `max` characters (not bytes).
pub fn truncate_chars(text: &str, max: usize) -> String {
    text.chars().take(max).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub article_id: String,
    pub title: String,
    pub abstract_text: String,
    pub body: String,
    pub body_sentences: Vec<String>,
    pub published: Option<String>,
}

impl Article {
    /// Builds an article, splitting the body into sentences.
    pub fn new(
        article_id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let body = body.into();
        Article {
            article_id: article_id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            body_sentences: crate::summarizer::split_sentences(&body),
            body,
            published: None,
        }
    }

    /// Article length in body sentences.
    pub fn l(&self) -> usize {
        self.body_sentences.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostKind {
    TopLevel,
    Reply,
}

/// A post. Its kind is implied by `reply_to`: top-level posts have none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: u64,
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
    pub body: String,
    pub created_step: u64,
    /// The rendered information bundle the post was generated with.
    #[serde(default)]
    pub information: String,
}

impl Post {
    pub fn top_level(post_id: u64, author: impl Into<String>, body: impl Into<String>, step: u64) -> Self {
        Post {
            post_id,
            author: author.into(),
            reply_to: None,
            body: body.into(),
            created_step: step,
            information: String::new(),
        }
    }

    pub fn reply(
        post_id: u64,
        author: impl Into<String>,
        reply_to: impl Into<String>,
        body: impl Into<String>,
        step: u64,
    ) -> Self {
        Post {
            reply_to: Some(reply_to.into()),
            ..Post::top_level(post_id, author, body, step)
        }
    }

    pub fn with_information(mut self, information: impl Into<String>) -> Self {
        self.information = information.into();
        self
    }

    pub fn kind(&self) -> PostKind {
        if self.reply_to.is_some() {
            PostKind::Reply
        } else {
            PostKind::TopLevel
        }
    }

    /// The bracketed single-line form used inside prompts.
    pub fn render_line(&self) -> String {
        match &self.reply_to {
            None => format!("[{}]: {}", self.author, self.body),
            Some(target) => format!("[{}][ReplyTo: {}]: {}", self.author, target, self.body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: u64,
    pub posts: Vec<Post>,
}

impl Thread {
    pub fn new(thread_id: u64, post: Post) -> Result<Self> {
        if post.kind() != PostKind::TopLevel {
            return Err(Error::Thread(format!(
                "post {} is a reply and cannot start a thread",
                post.post_id
            )));
        }
        Ok(Thread {
            thread_id,
            posts: vec![post],
        })
    }

    pub fn append_reply(&mut self, post: Post) -> Result<()> {
        if post.kind() != PostKind::Reply {
            return Err(Error::Thread(format!(
                "post {} is top-level and cannot be appended to thread {}",
                post.post_id, self.thread_id
            )));
        }
        let last = self.last_post().post_id;
        if post.post_id <= last {
            return Err(Error::Thread(format!(
                "post id {} does not follow {} in thread {}",
                post.post_id, last, self.thread_id
            )));
        }
        self.posts.push(post);
        Ok(())
    }

    pub fn top_level(&self) -> &Post {
        &self.posts[0]
    }

    pub fn last_post(&self) -> &Post {
        self.posts.last().expect("threads are never empty")
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn reply_count(&self) -> usize {
        self.posts.len() - 1
    }

    /// Checks the structural invariants; used when loading exported runs.
    pub fn check(&self) -> Result<()> {
        let Some(first) = self.posts.first() else {
            return Err(Error::Thread(format!("thread {} is empty", self.thread_id)));
        };
        if first.kind() != PostKind::TopLevel {
            return Err(Error::Thread(format!(
                "thread {} does not start with a top-level post",
                self.thread_id
            )));
        }
        for pair in self.posts.windows(2) {
            if pair[1].kind() != PostKind::Reply || pair[1].post_id <= pair[0].post_id {
                return Err(Error::Thread(format!(
                    "thread {} has a misordered or non-reply post {}",
                    self.thread_id, pair[1].post_id
                )));
            }
        }
        Ok(())
    }
}

/// Allocates thread ids; ids are strictly increasing.
#[derive(Debug, Default, Clone)]
pub struct ThreadFactory {
    next_id: u64,
}

impl ThreadFactory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_thread(&mut self, post: Post) -> Result<Thread> {
        let thread = Thread::new(self.next_id + 1, post)?;
        self.next_id += 1;
        Ok(thread)
    }
}

/// One line per post, oldest first.
pub fn render_thread(thread: &Thread) -> String {
    thread
        .posts
        .iter()
        .map(Post::render_line)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RagMode {
    None,
    Simple,
    Advanced,
}

impl RagMode {
    pub const ALL: [RagMode; 3] = [RagMode::None, RagMode::Simple, RagMode::Advanced];

    pub fn as_str(&self) -> &'static str {
        match self {
            RagMode::None => "none",
            RagMode::Simple => "simple",
            RagMode::Advanced => "advanced",
        }
    }
}

impl fmt::Display for RagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RagMode::None),
            "simple" => Ok(RagMode::Simple),
            "advanced" => Ok(RagMode::Advanced),
            other => Err(Error::config(
                "mode",
                format!("unknown mode `{other}` (expected none, simple or advanced)"),
            )),
        }
    }
}

/// Who a reply is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyTargetPolicy {
    /// The author of the newest post in the thread.
    #[default]
    LastAuthor,
    /// A uniformly chosen author among the thread's posts.
    RandomPriorAuthor,
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub community: CommunityConfig,
    pub rag_mode: RagMode,
    pub persona_count: usize,
    pub seed_personas: Vec<SeedPersona>,
    #[serde(default = "default_top_level_count")]
    pub top_level_count: usize,
    pub reply_rounds: usize,
    #[serde(default = "default_thread_capacity")]
    pub thread_capacity: usize,
    pub rng_seed: u64,
    pub backend_id: String,
    pub corpus_path: String,
    #[serde(default)]
    pub reply_target: ReplyTargetPolicy,
    /// Summary depth used for the shared simple-mode bundle.
    #[serde(default = "default_simple_depth")]
    pub simple_depth: u8,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.community.validate()?;
        if self.seed_personas.is_empty() {
            return Err(Error::config("seeds", "at least one seed persona is required"));
        }
        if self.persona_count == 0 {
            return Err(Error::config("persona_count", "must be positive"));
        }
        if self.persona_count < self.seed_personas.len() {
            return Err(Error::config(
                "persona_count",
                format!(
                    "{} is smaller than the {} seed personas",
                    self.persona_count,
                    self.seed_personas.len()
                ),
            ));
        }
        if self.top_level_count == 0 {
            return Err(Error::config("top_level_count", "must be positive"));
        }
        if self.thread_capacity == 0 {
            return Err(Error::config("thread_capacity", "must be at least 1"));
        }
        if self.simple_depth > 6 {
            return Err(Error::config("simple_depth", "must be within 0..=6"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, seed) in self.seed_personas.iter().enumerate() {
            let field = format!("seeds[{i}]");
            let name = seed.name.trim();
            if name.is_empty() {
                return Err(Error::config(format!("{field}.name"), "must not be empty"));
            }
            if name.chars().count() > NAME_MAX_CHARS {
                return Err(Error::config(
                    format!("{field}.name"),
                    format!("longer than {NAME_MAX_CHARS} characters"),
                ));
            }
            if seed.description.chars().count() > DESCRIPTION_MAX_CHARS {
                return Err(Error::config(
                    format!("{field}.description"),
                    format!("longer than {DESCRIPTION_MAX_CHARS} characters"),
                ));
            }
            if !names.insert(name.to_string()) {
                return Err(Error::config(format!("{field}.name"), format!("duplicate name `{name}`")));
            }
        }
        Ok(())
    }
}

/// The assembled text inserted at `{Information}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationBundle {
    pub overall: Vec<(String, String)>,
    pub individual: Vec<(String, String)>,
    pub rendered: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// `{Information}` value when no retrieval is performed.
pub const EMPTY_INFORMATION: &str = "(no information)";
/// Line emitted when retrieval ran but found no articles.
pub const NOTHING_FOUND: &str = "(no related articles were found)";

const OVERALL_HEADER: &str = "Overall information:";
const INDIVIDUAL_HEADER: &str = "Individual information:";

impl InformationBundle {
    pub fn empty() -> Self {
        InformationBundle {
            overall: Vec::new(),
            individual: Vec::new(),
            rendered: EMPTY_INFORMATION.to_string(),
            diagnostics: Vec::new(),
        }
    }

    /// Builds a bundle, rendering overall entries before individual ones,
    /// each as `【title】summary` on its own line.
    pub fn from_parts(overall: Vec<(String, String)>, individual: Vec<(String, String)>) -> Self {
        let rendered = if overall.is_empty() && individual.is_empty() {
            NOTHING_FOUND.to_string()
        } else {
            let mut lines = Vec::new();
            for (header, entries) in [(OVERALL_HEADER, &overall), (INDIVIDUAL_HEADER, &individual)] {
                if entries.is_empty() {
                    continue;
                }
                lines.push(header.to_string());
                lines.extend(entries.iter().map(|(title, summary)| format!("【{title}】{summary}")));
            }
            lines.join("\n")
        };
        InformationBundle {
            overall,
            individual,
            rendered,
            diagnostics: Vec::new(),
        }
    }
}
