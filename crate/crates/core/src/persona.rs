//! Growing a persona population from seed personas by few-shot prompting.

use crate::error::{Error, Result};
use crate::llm::template::{self, Bindings, TemplateId, TemplateSet};
use crate::llm::{complete, parse_persona, Backend, BackendRequest, MAX_REGENERATIONS};
use crate::model::{CommunityConfig, Origin, SeedPersona, UserPersona};
use crate::sampling::{assign_parameters, RngStream};

/// Few-shot examples per persona prompt.
pub const MAX_FEW_SHOT: usize = 10;

/// Renders the persona prompt for a sample of the pool drawn from `rng`.
pub fn persona_prompt(
    pool: &[UserPersona],
    community: &CommunityConfig,
    templates: &TemplateSet,
    rng: &mut RngStream,
) -> Result<String> {
    let mut bindings = Bindings::new().set(template::COMMUNITY_GOAL, &community.goal);
    for i in rng.sample_indices(pool.len(), MAX_FEW_SHOT) {
        bindings = bindings.sample(&pool[i].name, &pool[i].description);
    }
    templates.render(TemplateId::PersonaGen, &bindings)
}

/// Generates one new persona whose name is not already in `pool`.
///
/// Each attempt draws a fresh few-shot sample, so a retry after a duplicate
/// name or an unparseable completion sends a different prompt. Parameters are
/// drawn only once a usable name/description pair has been accepted.
pub fn generate_persona(
    pool: &[UserPersona],
    community: &CommunityConfig,
    templates: &TemplateSet,
    rng: &mut RngStream,
    backend: &dyn Backend,
    diagnostics: &mut Vec<String>,
) -> Result<UserPersona> {
    if pool.is_empty() {
        return Err(Error::config("seeds", "persona generation needs at least one seed"));
    }
    let attempts = MAX_REGENERATIONS + 1;
    let mut last_reason = String::new();
    for attempt in 1..=attempts {
        let prompt = persona_prompt(pool, community, templates, rng)?;
        let response = complete(backend, &BackendRequest::new(TemplateId::PersonaGen, prompt))?;
        match parse_persona(&response.text) {
            Ok((name, description)) => {
                if pool.iter().any(|p| p.name.trim() == name) {
                    last_reason = format!("duplicate name `{name}`");
                } else {
                    let params = assign_parameters(rng);
                    return Ok(UserPersona::new(name, description, params, Origin::Generated));
                }
            }
            Err(e) => last_reason = e.to_string(),
        }
        diagnostics.push(format!("persona attempt {attempt}/{attempts} rejected: {last_reason}"));
    }
    Err(Error::PersonaExhausted {
        attempts,
        reason: last_reason,
    })
}

/// Seeds (with sampled parameters) followed by generated personas until the
/// population has `persona_count` members.
pub fn populate(
    community: &CommunityConfig,
    seeds: &[SeedPersona],
    persona_count: usize,
    templates: &TemplateSet,
    rng: &mut RngStream,
    backend: &dyn Backend,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<UserPersona>> {
    if persona_count < seeds.len() {
        return Err(Error::config(
            "persona_count",
            format!("{persona_count} is smaller than the {} seeds", seeds.len()),
        ));
    }
    let mut population: Vec<UserPersona> = seeds
        .iter()
        .map(|seed| {
            UserPersona::new(
                seed.name.trim().to_string(),
                seed.description.trim().to_string(),
                assign_parameters(rng),
                Origin::Seed,
            )
        })
        .collect();
    while population.len() < persona_count {
        let persona = generate_persona(&population, community, templates, rng, backend, diagnostics)?;
        population.push(persona);
    }
    Ok(population)
}
