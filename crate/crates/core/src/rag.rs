//! Assembly of the `{Information}` bundle for each generation event.
//!
//! - `none`: every event sees [`EMPTY_INFORMATION`].
//! - `simple`: one query from the community goal at the start of the run; the
//!   top three results are summarized once and shared by every event.
//! - `advanced`: per event, the persona generates ten queries, keeps
//!   `attention` of them, and searches each for ten articles. The top hit of
//!   each kept query is summarized at the persona's depth ("individual"), and
//!   the first `range` distinct articles taken round-robin over the result
//!   lists are summarized at abstract depth ("overall").

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use crate::error::Result;
use crate::llm::template::{self, Bindings, TemplateId, TemplateSet};
use crate::llm::{complete, parse_queries, Backend, BackendRequest, MAX_REGENERATIONS};
use crate::model::{render_thread, Article, CommunityConfig, InformationBundle, RagMode, Thread, UserPersona};
use crate::retrieval::{SearchQuery, SourceRegistry, RESULTS_PER_QUERY};
use crate::sampling::RngStream;
use crate::summarizer::{summarize, LexRankConfig, Summary};
use crate::text::tokenize;

pub use crate::model::{EMPTY_INFORMATION, NOTHING_FOUND};

/// Articles summarized for the shared simple-mode bundle.
pub const SIMPLE_MODE_ARTICLES: usize = 3;
/// Depth used for the overall (breadth) articles.
pub const OVERALL_DEPTH: u8 = 1;

/// Identity bound to the query prompt when simple mode generates its one query.
pub const SIMPLE_MODE_USER: &str = "community member";
pub const SIMPLE_MODE_PERSONA: &str = "a participant in this community";

const FALLBACK_STOPWORDS: [&str; 12] = [
    "to", "the", "a", "an", "of", "and", "about", "in", "on", "for", "s", "with",
];

/// Everything retrieval needs besides the persona and event.
pub struct RagContext<'a> {
    pub community: &'a CommunityConfig,
    pub templates: &'a TemplateSet,
    pub sources: &'a SourceRegistry,
    pub backend: &'a dyn Backend,
    pub lexrank: LexRankConfig,
    /// Summaries already computed this run, keyed by article id and depth.
    /// Summarization is deterministic, so reuse never changes a bundle.
    summaries: Mutex<HashMap<(String, u8), Summary>>,
}

impl<'a> RagContext<'a> {
    pub fn new(
        community: &'a CommunityConfig,
        templates: &'a TemplateSet,
        sources: &'a SourceRegistry,
        backend: &'a dyn Backend,
        lexrank: LexRankConfig,
    ) -> Self {
        RagContext {
            community,
            templates,
            sources,
            backend,
            lexrank,
            summaries: Mutex::new(HashMap::new()),
        }
    }

    fn summary(&self, article: &Article, depth: u8) -> Result<Summary> {
        let key = (article.article_id.clone(), depth);
        if let Some(hit) = self.summaries.lock().expect("summary cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let summary = summarize(article, depth, &self.lexrank)?;
        self.summaries
            .lock()
            .expect("summary cache poisoned")
            .insert(key, summary.clone());
        Ok(summary)
    }
}

/// A single query made of the community goal's content words.
pub fn fallback_query(goal: &str) -> SearchQuery {
    let words: Vec<String> = tokenize(goal)
        .into_iter()
        .filter(|w| !FALLBACK_STOPWORDS.contains(&w.as_str()))
        .collect();
    SearchQuery::parse(&words.join(" "))
        .or_else(|| SearchQuery::parse(goal))
        .unwrap_or(SearchQuery {
            terms: vec!["news".into()],
            raw: "news".into(),
        })
}

/// Renders the query prompt for a top-level post (`thread == None`) or a reply.
pub fn query_prompt(
    persona_name: &str,
    persona_description: &str,
    community: &CommunityConfig,
    thread: Option<&Thread>,
    templates: &TemplateSet,
) -> Result<String> {
    let bindings = Bindings::new()
        .set(template::USER_NAME, persona_name)
        .set(template::USER_PERSONA, persona_description)
        .set(template::COMMUNITY_GOAL, &community.goal);
    match thread {
        None => templates.render(TemplateId::QueryGenPost, &bindings),
        Some(thread) => templates.render(
            TemplateId::QueryGenReply,
            &bindings.set(template::THREAD_POSTS, render_thread(thread)),
        ),
    }
}

/// Asks the backend for up to ten queries, regenerating on empty parses and
/// falling back to [`fallback_query`]. Never returns an empty list.
pub fn generate_queries(
    persona_name: &str,
    persona_description: &str,
    ctx: &RagContext<'_>,
    thread: Option<&Thread>,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<SearchQuery>> {
    let prompt = query_prompt(persona_name, persona_description, ctx.community, thread, ctx.templates)?;
    let tag = if thread.is_some() {
        TemplateId::QueryGenReply
    } else {
        TemplateId::QueryGenPost
    };
    for _ in 0..=MAX_REGENERATIONS {
        let response = complete(ctx.backend, &BackendRequest::new(tag, prompt.clone()))?;
        let queries = parse_queries(&response.text);
        if !queries.is_empty() {
            return Ok(queries);
        }
    }
    diagnostics.push(format!(
        "no parseable queries for {persona_name}; using the community goal"
    ));
    Ok(vec![fallback_query(&ctx.community.goal)])
}

/// `min(attention, n)` queries sampled without replacement, kept in their
/// original relative order.
pub fn select_queries(queries: &[SearchQuery], attention: u8, rng: &mut RngStream) -> Vec<SearchQuery> {
    let mut picked = rng.sample_indices(queries.len(), usize::from(attention.max(1)));
    picked.sort_unstable();
    picked.into_iter().map(|i| queries[i].clone()).collect()
}

fn summarize_all(
    articles: &[&Article],
    depth: u8,
    ctx: &RagContext<'_>,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<(String, String)>> {
    articles
        .iter()
        .map(|article| {
            let summary = ctx.summary(article, depth)?;
            diagnostics.extend(summary.diagnostic);
            Ok((article.title.clone(), summary.text))
        })
        .collect()
}

/// Chooses the individual and overall article sets from per-query result
/// lists. Individual: top hit of each list, deduplicated, in query order.
/// Overall: the first `range` distinct articles visiting rank 1 of every list,
/// then rank 2, and so on. The two sets may overlap.
pub fn pick_articles(results: &[Vec<Article>], attention: usize, range: usize) -> (Vec<&Article>, Vec<&Article>) {
    let mut seen = BTreeSet::new();
    let individual: Vec<&Article> = results
        .iter()
        .filter_map(|list| list.first())
        .filter(|a| seen.insert(a.article_id.as_str()))
        .take(attention)
        .collect();

    let mut seen = BTreeSet::new();
    let mut overall = Vec::new();
    let depth = results.iter().map(Vec::len).max().unwrap_or(0);
    'outer: for rank in 0..depth {
        for list in results {
            if let Some(article) = list.get(rank) {
                if seen.insert(article.article_id.as_str()) {
                    overall.push(article);
                    if overall.len() == range {
                        break 'outer;
                    }
                }
            }
        }
    }
    (individual, overall)
}

pub fn gather_advanced(
    persona: &UserPersona,
    thread: Option<&Thread>,
    ctx: &RagContext<'_>,
    rng: &mut RngStream,
) -> Result<InformationBundle> {
    let mut diagnostics = Vec::new();
    let queries = generate_queries(&persona.name, &persona.description, ctx, thread, &mut diagnostics)?;
    let selected = select_queries(&queries, persona.attention, rng);
    let results = selected
        .iter()
        .map(|q| ctx.sources.search(&ctx.community.source_id, q, RESULTS_PER_QUERY))
        .collect::<Result<Vec<_>>>()?;

    let (individual, overall) = pick_articles(&results, usize::from(persona.attention), usize::from(persona.range));
    let overall = summarize_all(&overall, OVERALL_DEPTH, ctx, &mut diagnostics)?;
    let individual = summarize_all(&individual, persona.depth, ctx, &mut diagnostics)?;
    if overall.is_empty() && individual.is_empty() {
        let raws: Vec<&str> = selected.iter().map(|q| q.raw.as_str()).collect();
        diagnostics.push(format!("no articles found for queries {raws:?}"));
    }
    let mut bundle = InformationBundle::from_parts(overall, individual);
    bundle.diagnostics = diagnostics;
    Ok(bundle)
}

/// The shared simple-mode bundle; call once per run.
pub fn gather_simple(ctx: &RagContext<'_>, depth: u8) -> Result<InformationBundle> {
    let mut diagnostics = Vec::new();
    let queries = generate_queries(SIMPLE_MODE_USER, SIMPLE_MODE_PERSONA, ctx, None, &mut diagnostics)?;
    let query = &queries[0];
    let articles = ctx
        .sources
        .search(&ctx.community.source_id, query, SIMPLE_MODE_ARTICLES)?;
    let refs: Vec<&Article> = articles.iter().collect();
    let summaries = summarize_all(&refs, depth, ctx, &mut diagnostics)?;
    if summaries.is_empty() {
        diagnostics.push(format!("no articles found for query {:?}", query.raw));
    }
    let mut bundle = InformationBundle::from_parts(Vec::new(), summaries);
    bundle.diagnostics = diagnostics;
    Ok(bundle)
}

/// Per-run bundle provider that applies the mode gate.
pub struct InformationProvider<'a> {
    mode: RagMode,
    ctx: RagContext<'a>,
    shared: Option<InformationBundle>,
}

impl<'a> InformationProvider<'a> {
    /// In simple mode this performs the one shared retrieval immediately.
    pub fn new(mode: RagMode, ctx: RagContext<'a>, simple_depth: u8) -> Result<Self> {
        let shared = match mode {
            RagMode::Simple => Some(gather_simple(&ctx, simple_depth)?),
            RagMode::None | RagMode::Advanced => None,
        };
        Ok(InformationProvider { mode, ctx, shared })
    }

    pub fn mode(&self) -> RagMode {
        self.mode
    }

    pub fn context(&self) -> &RagContext<'a> {
        &self.ctx
    }

    pub fn bundle_for(
        &self,
        persona: &UserPersona,
        thread: Option<&Thread>,
        rng: &mut RngStream,
    ) -> Result<InformationBundle> {
        match self.mode {
            RagMode::None => Ok(InformationBundle::empty()),
            RagMode::Simple => Ok(self.shared.clone().expect("simple bundle gathered at construction")),
            RagMode::Advanced => gather_advanced(persona, thread, &self.ctx, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, MockScript};
    use crate::model::{Origin, Post, SearchParams};
    use crate::retrieval::CorpusIndex;

    fn community() -> CommunityConfig {
        CommunityConfig {
            goal: "To discuss the Bank of Japan's monetary policy.".into(),
            rule: "Use courteous language in discussions.".into(),
            scenario_name: "BOJ".into(),
            source_id: "local".into(),
        }
    }

    fn persona(attention: u8, range: u8, depth: u8) -> UserPersona {
        UserPersona::new(
            "tester".into(),
            "a curious reader".into(),
            SearchParams { attention, range, depth },
            Origin::Seed,
        )
    }

    fn article(id: &str, body: &str) -> Article {
        Article::new(id, format!("Title {id}"), format!("Abstract {id}."), body)
    }

    fn registry(articles: Vec<Article>) -> SourceRegistry {
        SourceRegistry::new().with("local", Box::new(CorpusIndex::from_articles(articles).unwrap()))
    }

    fn queries(raws: &[&str]) -> Vec<SearchQuery> {
        raws.iter().map(|r| SearchQuery::parse(r).unwrap()).collect()
    }

    #[test]
    fn select_all_when_attention_ten() {
        let qs = queries(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let mut rng = RngStream::new(1, "query_select");
        assert_eq!(select_queries(&qs, 10, &mut rng), qs);
    }

    #[test]
    fn select_subset_keeps_order() {
        let qs = queries(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let mut rng = RngStream::new(1, "query_select");
        let picked = select_queries(&qs, 3, &mut rng);
        assert_eq!(picked.len(), 3);
        let positions: Vec<usize> = picked.iter().map(|p| qs.iter().position(|q| q == p).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn select_clamps_to_available() {
        let qs = queries(&["a", "b"]);
        let mut rng = RngStream::new(1, "query_select");
        assert_eq!(select_queries(&qs, 5, &mut rng).len(), 2);
    }

    #[test]
    fn round_robin_overall_and_top_hit_individual() {
        let a = |id: &str| article(id, "x.");
        let results = vec![vec![a("1"), a("2"), a("3")], vec![a("1"), a("4"), a("5")]];
        let (individual, overall) = pick_articles(&results, 2, 3);
        let ids = |v: &[&Article]| v.iter().map(|a| a.article_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&individual), vec!["1"]);
        assert_eq!(ids(&overall), vec!["1", "2", "4"]);
    }

    #[test]
    fn advanced_counts_follow_parameters() {
        let articles: Vec<Article> = (0..6)
            .map(|i| article(&format!("a{i}"), &format!("The yen and rates moved. Policy item {i}.")))
            .collect();
        let sources = registry(articles);
        let templates = TemplateSet::default();
        let backend = MockBackend::new(MockScript {
            query_terms: vec!["yen".into(), "rates".into(), "policy".into()],
            max_query_terms: Some(1),
            ..MockScript::default()
        });
        let c = community();
        let ctx = RagContext::new(&c, &templates, &sources, &backend, LexRankConfig::default());
        let mut rng = RngStream::new(9, "query_select");
        let bundle = gather_advanced(&persona(2, 3, 0), None, &ctx, &mut rng).unwrap();
        assert_eq!(bundle.overall.len(), 3);
        assert!(!bundle.individual.is_empty() && bundle.individual.len() <= 2);
        // depth 0: individual summaries are titles.
        for (title, summary) in &bundle.individual {
            assert_eq!(title, summary);
        }
    }

    #[test]
    fn single_article_corpus_overlaps() {
        let sources = registry(vec![article("only", "The yen rose.")]);
        let templates = TemplateSet::default();
        let backend = MockBackend::new(MockScript {
            query_terms: vec!["yen".into()],
            ..MockScript::default()
        });
        let c = community();
        let ctx = RagContext::new(&c, &templates, &sources, &backend, LexRankConfig::default());
        let mut rng = RngStream::new(9, "query_select");
        let bundle = gather_advanced(&persona(1, 1, 3), None, &ctx, &mut rng).unwrap();
        assert_eq!(bundle.overall.len(), 1);
        assert_eq!(bundle.individual.len(), 1);
        assert_eq!(bundle.overall[0].0, "Title only");
        assert_eq!(bundle.individual[0].0, "Title only");
    }

    #[test]
    fn empty_pool_gives_marker() {
        let sources = registry(vec![article("x", "Unrelated text.")]);
        let templates = TemplateSet::default();
        let backend = MockBackend::new(MockScript {
            query_terms: vec!["missing".into()],
            ..MockScript::default()
        });
        let c = community();
        let ctx = RagContext::new(&c, &templates, &sources, &backend, LexRankConfig::default());
        let mut rng = RngStream::new(9, "query_select");
        let bundle = gather_advanced(&persona(3, 3, 3), None, &ctx, &mut rng).unwrap();
        assert_eq!(bundle.rendered, NOTHING_FOUND);
        assert!(!bundle.diagnostics.is_empty());
    }

    #[test]
    fn simple_mode_takes_at_most_three() {
        let two = vec![article("a", "Monetary policy news."), article("b", "Monetary policy again.")];
        let sources = registry(two);
        let templates = TemplateSet::default();
        let backend = MockBackend::new(MockScript {
            query_terms: vec!["monetary".into()],
            ..MockScript::default()
        });
        let c = community();
        let ctx = RagContext::new(&c, &templates, &sources, &backend, LexRankConfig::default());
        let bundle = gather_simple(&ctx, 3).unwrap();
        assert_eq!(bundle.individual.len(), 2);
    }

    #[test]
    fn reply_queries_use_thread() {
        let thread = Thread::new(1, Post::top_level(1, "alice", "What about the yen?", 0)).unwrap();
        let c = community();
        let prompt = query_prompt("bob", "trader", &c, Some(&thread), &TemplateSet::default()).unwrap();
        assert!(prompt.contains("[alice]: What about the yen?"));
        assert!(prompt.contains("Reply to the input conversation"));
        let post_prompt = query_prompt("bob", "trader", &c, None, &TemplateSet::default()).unwrap();
        assert!(post_prompt.contains("Output the search words for the search on the input theme."));
    }

    #[test]
    fn fallback_query_uses_content_words() {
        let q = fallback_query("To discuss the Bank of Japan's monetary policy.");
        assert_eq!(q.raw, "discuss bank japan monetary policy");
    }
}
