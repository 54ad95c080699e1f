//! Prompt rendering, completion backends and response parsing.

pub mod backend;
pub mod parse;
pub mod template;

pub use backend::{
    complete, information_digest, Backend, BackendRequest, BackendResponse, HttpBackend,
    HttpBackendConfig, MockBackend, MockScript,
};
pub use parse::{parse_persona, parse_post_body, parse_queries, MAX_QUERIES};
pub use template::{Bindings, PromptTemplate, TemplateId, TemplateSet};

/// Regeneration attempts for unparseable completions before an action is skipped.
pub const MAX_REGENERATIONS: usize = 3;
