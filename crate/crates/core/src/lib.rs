//! Simulation of a small online community whose members are played by a
//! language model, optionally grounded in retrieved news articles.
//!
//! Everything random is drawn from seeded streams, so a run is a pure
//! function of its configuration, its seed, and the backend's responses.

pub mod engine;
pub mod error;
pub mod eval;
pub mod export;
pub mod llm;
pub mod model;
pub mod persona;
pub mod rag;
pub mod retrieval;
pub mod sampling;
pub mod scenario;
pub mod summarizer;
pub mod text;

pub use engine::{Event, SimulationResult, Simulator};
pub use error::{Error, Result};
pub use model::{
    Article, CommunityConfig, InformationBundle, Post, RagMode, SearchParams, SeedPersona,
    SimulationConfig, Thread, UserPersona,
};
pub use scenario::Scenario;
