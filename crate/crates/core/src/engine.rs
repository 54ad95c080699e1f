//! The simulation loop: personas, then top-level posts, then reply rounds.
//!
//! Information collection happens per event, immediately before each post is
//! generated, because reply queries depend on the current thread contents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::template::{self, Bindings, TemplateId, TemplateSet};
use crate::llm::{complete, parse_post_body, Backend, BackendRequest, MAX_REGENERATIONS};
use crate::model::{
    render_thread, InformationBundle, Post, ReplyTargetPolicy, SimulationConfig, Thread,
    ThreadFactory, UserPersona,
};
use crate::persona::populate;
use crate::rag::{InformationProvider, RagContext};
use crate::retrieval::SourceRegistry;
use crate::sampling::RngStream;
use crate::summarizer::LexRankConfig;

pub const STREAM_PERSONA: &str = "persona";
pub const STREAM_AUTHOR_SELECT: &str = "author_select";
pub const STREAM_REPLY_ORDER: &str = "reply_order";
pub const STREAM_THREAD_SELECT: &str = "thread_select";
pub const STREAM_QUERY_SELECT: &str = "query_select";
pub const STREAM_REPLY_TARGET: &str = "reply_target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    PersonaCreated,
    TopLevelPost,
    Reply,
    /// No thread had room for another reply.
    SkipNoThread,
    /// Completions stayed unusable after every regeneration.
    SkipUnparseable,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Generation step; 0 for persona creation.
    pub step: u64,
    /// Reply round (0-based); absent outside the reply stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    pub actor: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<u64>,
    /// Post count of the chosen thread when it was selected for a reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_size_at_selection: Option<usize>,
    /// The `{Information}` text used for this event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Event {
    fn new(step: u64, actor: &str, action: Action) -> Self {
        Event {
            step,
            round: None,
            actor: actor.to_string(),
            action,
            thread_id: None,
            post_id: None,
            thread_size_at_selection: None,
            information: None,
            diagnostics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub personas: Vec<UserPersona>,
    pub threads: Vec<Thread>,
    pub event_log: Vec<Event>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

impl SimulationResult {
    pub fn top_level_count(&self) -> usize {
        self.threads.len()
    }

    pub fn reply_count(&self) -> usize {
        self.threads.iter().map(Thread::reply_count).sum()
    }

    pub fn persona(&self, name: &str) -> Option<&UserPersona> {
        self.personas.iter().find(|p| p.name == name)
    }
}

/// Picks a thread uniformly, redrawing among the remaining threads whenever
/// the pick already holds more than `capacity` posts. Returns the index into
/// `threads`, or `None` when no thread qualifies.
pub fn select_thread(threads: &[Thread], capacity: usize, rng: &mut RngStream) -> Option<usize> {
    let mut candidates: Vec<usize> = (0..threads.len()).collect();
    while !candidates.is_empty() {
        let pick = candidates.swap_remove(rng.index(candidates.len()));
        if threads[pick].len() <= capacity {
            return Some(pick);
        }
    }
    None
}

/// Who a reply in `thread` is addressed to.
pub fn reply_target(thread: &Thread, policy: ReplyTargetPolicy, rng: &mut RngStream) -> String {
    match policy {
        ReplyTargetPolicy::LastAuthor => thread.last_post().author.clone(),
        ReplyTargetPolicy::RandomPriorAuthor => {
            thread.posts[rng.index(thread.posts.len())].author.clone()
        }
    }
}

/// Shared, read-only collaborators of a run.
pub struct Simulator<'a> {
    pub templates: &'a TemplateSet,
    pub sources: &'a SourceRegistry,
    pub backend: &'a dyn Backend,
    pub lexrank: LexRankConfig,
}

enum Generated {
    Body(String),
    Unusable(String),
}

struct RunState<'c> {
    config: &'c SimulationConfig,
    personas: Vec<UserPersona>,
    threads: Vec<Thread>,
    factory: ThreadFactory,
    events: Vec<Event>,
    next_post_id: u64,
    step: u64,
}

impl RunState<'_> {
    fn event_rng(&self, label: &str) -> RngStream {
        RngStream::new(self.config.rng_seed, format!("{label}/{}", self.step))
    }

    fn take_post_id(&mut self) -> u64 {
        self.next_post_id += 1;
        self.next_post_id
    }
}

impl<'a> Simulator<'a> {
    fn generate_body(&self, tag: TemplateId, prompt: String) -> Result<Generated> {
        let mut last = String::new();
        for _ in 0..=MAX_REGENERATIONS {
            let response = complete(self.backend, &BackendRequest::new(tag, prompt.clone()))?;
            match parse_post_body(&response.text) {
                Ok(body) => return Ok(Generated::Body(body)),
                Err(e) => last = e.to_string(),
            }
        }
        Ok(Generated::Unusable(last))
    }

    pub fn post_prompt(&self, config: &SimulationConfig, persona: &UserPersona, information: &str) -> Result<String> {
        let bindings = Bindings::new()
            .set(template::COMMUNITY_GOAL, &config.community.goal)
            .set(template::COMMUNITY_RULE, &config.community.rule)
            .set(template::USER_NAME, &persona.name)
            .set(template::USER_PERSONA, &persona.description)
            .set(template::INFORMATION, information);
        self.templates.render(TemplateId::PostGen, &bindings)
    }

    pub fn reply_prompt(
        &self,
        config: &SimulationConfig,
        persona: &UserPersona,
        thread: &Thread,
        target: &str,
        information: &str,
    ) -> Result<String> {
        let bindings = Bindings::new()
            .set(template::COMMUNITY_GOAL, &config.community.goal)
            .set(template::COMMUNITY_RULE, &config.community.rule)
            .set(template::USER_NAME, &persona.name)
            .set(template::USER_PERSONA, &persona.description)
            .set(template::INFORMATION, information)
            .set(template::THREAD, render_thread(thread))
            .set(template::REPLY_TARGET, target);
        self.templates.render(TemplateId::ReplyGen, &bindings)
    }

    /// Runs a whole simulation. Configuration errors are returned; failures
    /// during the run produce a partial result with `aborted` set.
    pub fn run(&self, config: &SimulationConfig) -> Result<SimulationResult> {
        config.validate()?;
        if !self.sources.contains(&config.community.source_id) && config.rag_mode != crate::model::RagMode::None {
            return Err(Error::UnknownSource(config.community.source_id.clone()));
        }
        let mut state = RunState {
            config,
            personas: Vec::new(),
            threads: Vec::new(),
            factory: ThreadFactory::new(),
            events: Vec::new(),
            next_post_id: 0,
            step: 0,
        };
        let aborted = match self.execute(&mut state) {
            Ok(()) => None,
            Err(e) => {
                let reason = e.to_string();
                log::error!("run aborted: {reason}");
                let mut event = Event::new(state.step, "engine", Action::Abort);
                event.diagnostics.push(reason.clone());
                state.events.push(event);
                Some(reason)
            }
        };
        Ok(SimulationResult {
            config: config.clone(),
            personas: state.personas,
            threads: state.threads,
            event_log: state.events,
            aborted,
        })
    }

    fn execute(&self, state: &mut RunState<'_>) -> Result<()> {
        let config = state.config;

        // Stage 1: personas.
        let mut persona_rng = RngStream::new(config.rng_seed, STREAM_PERSONA);
        let mut diagnostics = Vec::new();
        state.personas = populate(
            &config.community,
            &config.seed_personas,
            config.persona_count,
            self.templates,
            &mut persona_rng,
            self.backend,
            &mut diagnostics,
        )?;
        for persona in &state.personas {
            state.events.push(Event::new(0, &persona.name, Action::PersonaCreated));
        }
        if let (Some(first), false) = (state.events.first_mut(), diagnostics.is_empty()) {
            first.diagnostics = diagnostics;
        }

        let provider = InformationProvider::new(
            config.rag_mode,
            RagContext::new(&config.community, self.templates, self.sources, self.backend, self.lexrank),
            config.simple_depth,
        )?;

        // Stages 2 and 3, interleaved per event: top-level posts.
        let n = state.personas.len();
        let mut author_rng = RngStream::new(config.rng_seed, STREAM_AUTHOR_SELECT);
        let authors: Vec<usize> = if config.top_level_count <= n {
            author_rng.sample_indices(n, config.top_level_count)
        } else {
            (0..config.top_level_count).map(|_| author_rng.index(n)).collect()
        };
        for author in authors {
            state.step += 1;
            let persona = state.personas[author].clone();
            let mut query_rng = state.event_rng(STREAM_QUERY_SELECT);
            let bundle = provider.bundle_for(&persona, None, &mut query_rng)?;
            let prompt = self.post_prompt(config, &persona, &bundle.rendered)?;
            let mut event = Event::new(state.step, &persona.name, Action::TopLevelPost);
            event.information = Some(bundle.rendered.clone());
            event.diagnostics = bundle.diagnostics.clone();
            match self.generate_body(TemplateId::PostGen, prompt)? {
                Generated::Body(body) => {
                    let post = Post::top_level(state.take_post_id(), &persona.name, body, state.step)
                        .with_information(&bundle.rendered);
                    event.post_id = Some(post.post_id);
                    let thread = state.factory.create_thread(post)?;
                    event.thread_id = Some(thread.thread_id);
                    state.threads.push(thread);
                }
                Generated::Unusable(reason) => {
                    event.action = Action::SkipUnparseable;
                    event.diagnostics.push(reason);
                }
            }
            state.events.push(event);
        }

        // Reply rounds: every persona replies once per round in shuffled order.
        let mut order_rng = RngStream::new(config.rng_seed, STREAM_REPLY_ORDER);
        let mut thread_rng = RngStream::new(config.rng_seed, STREAM_THREAD_SELECT);
        for round in 0..config.reply_rounds {
            for idx in order_rng.permutation(n) {
                state.step += 1;
                let persona = state.personas[idx].clone();
                let mut event = Event::new(state.step, &persona.name, Action::Reply);
                event.round = Some(round);
                let Some(ti) = select_thread(&state.threads, config.thread_capacity, &mut thread_rng) else {
                    event.action = Action::SkipNoThread;
                    event.diagnostics.push("no thread within capacity".into());
                    state.events.push(event);
                    continue;
                };
                event.thread_id = Some(state.threads[ti].thread_id);
                event.thread_size_at_selection = Some(state.threads[ti].len());
                self.reply_event(state, &provider, &persona, ti, &mut event)?;
                state.events.push(event);
            }
        }
        Ok(())
    }

    fn reply_event(
        &self,
        state: &mut RunState<'_>,
        provider: &InformationProvider<'_>,
        persona: &UserPersona,
        thread_index: usize,
        event: &mut Event,
    ) -> Result<()> {
        let config = state.config;
        let mut query_rng = state.event_rng(STREAM_QUERY_SELECT);
        let mut target_rng = state.event_rng(STREAM_REPLY_TARGET);
        let thread = &state.threads[thread_index];
        let bundle: InformationBundle = provider.bundle_for(persona, Some(thread), &mut query_rng)?;
        let target = reply_target(thread, config.reply_target, &mut target_rng);
        let prompt = self.reply_prompt(config, persona, thread, &target, &bundle.rendered)?;
        event.information = Some(bundle.rendered.clone());
        event.diagnostics.extend(bundle.diagnostics.iter().cloned());
        match self.generate_body(TemplateId::ReplyGen, prompt)? {
            Generated::Body(body) => {
                let post = Post::reply(state.take_post_id(), &persona.name, target, body, state.step)
                    .with_information(&bundle.rendered);
                event.post_id = Some(post.post_id);
                state.threads[thread_index].append_reply(post)?;
            }
            Generated::Unusable(reason) => {
                event.action = Action::SkipUnparseable;
                event.diagnostics.push(reason);
            }
        }
        Ok(())
    }
}
