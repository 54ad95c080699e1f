//! Article sources with AND-keyword search.
//!
//! The local source is an inverted index over a directory of JSON article
//! files. Matching is per token (see [`crate::text`]): an article matches
//! when every query token occurs in its title or body. Matches are ranked by
//! the summed term frequency of the query tokens, ties by ascending id.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Article;
use crate::text::tokenize;

/// Results requested per query.
pub const RESULTS_PER_QUERY: usize = 10;

/// A space-separated AND query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub terms: Vec<String>,
    pub raw: String,
}

impl SearchQuery {
    /// `None` if `raw` has no terms.
    pub fn parse(raw: &str) -> Option<Self> {
        let terms: Vec<String> = raw.split_whitespace().map(str::to_string).collect();
        if terms.is_empty() {
            return None;
        }
        Some(SearchQuery {
            raw: terms.join(" "),
            terms,
        })
    }

    /// Normalized index tokens for all terms, deduplicated.
    pub fn tokens(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.terms.iter().flat_map(|t| tokenize(t)).collect();
        set.into_iter().collect()
    }
}

pub trait ArticleSource: Send + Sync {
    fn search(&self, query: &SearchQuery, limit: usize) -> Result<Vec<Article>>;
}

/// On-disk article document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleFile {
    pub article_id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
}

impl ArticleFile {
    fn into_article(self, path: &Path) -> Result<Article> {
        let malformed = |message: &str| Error::MalformedArticle {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if self.article_id.trim().is_empty() {
            return Err(malformed("article_id is empty"));
        }
        if self.title.trim().is_empty() {
            return Err(malformed("title is empty"));
        }
        let mut article = Article::new(self.article_id, self.title, self.abstract_text, self.body);
        article.published = self.published;
        Ok(article)
    }
}

/// Reads and validates one article file.
pub fn read_article(path: &Path) -> Result<Article> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ArticleFile = serde_json::from_str(&text).map_err(|e| Error::MalformedArticle {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.into_article(path)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusIndex {
    articles: BTreeMap<String, Article>,
    postings: BTreeMap<String, BTreeMap<String, u32>>,
}

impl CorpusIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_articles(articles: impl IntoIterator<Item = Article>) -> Result<Self> {
        let mut index = CorpusIndex::new();
        for article in articles {
            index.insert(article, Path::new("<memory>"))?;
        }
        Ok(index)
    }

    fn insert(&mut self, article: Article, origin: &Path) -> Result<()> {
        if self.articles.contains_key(&article.article_id) {
            return Err(Error::DuplicateArticle {
                id: article.article_id,
                path: origin.to_path_buf(),
            });
        }
        for token in tokenize(&article.title).into_iter().chain(tokenize(&article.body)) {
            *self
                .postings
                .entry(token)
                .or_default()
                .entry(article.article_id.clone())
                .or_default() += 1;
        }
        self.articles.insert(article.article_id.clone(), article);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, article_id: &str) -> Option<&Article> {
        self.articles.get(article_id)
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    /// Term frequency of `token` in an article's title and body.
    pub fn term_frequency(&self, token: &str, article_id: &str) -> u32 {
        self.postings
            .get(token)
            .and_then(|p| p.get(article_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn search(&self, query: &SearchQuery, limit: usize) -> Vec<Article> {
        let tokens = query.tokens();
        if tokens.is_empty() || limit == 0 {
            return Vec::new();
        }
        let mut lists = Vec::with_capacity(tokens.len());
        for token in &tokens {
            match self.postings.get(token) {
                Some(list) => lists.push(list),
                None => return Vec::new(),
            }
        }
        // Walk the shortest posting list and probe the others.
        lists.sort_by_key(|l| l.len());
        let mut scored: Vec<(u64, &str)> = lists[0]
            .iter()
            .filter_map(|(id, &tf)| {
                let mut score = u64::from(tf);
                for other in &lists[1..] {
                    score += u64::from(*other.get(id)?);
                }
                Some((score, id.as_str()))
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored
            .into_iter()
            .take(limit)
            .map(|(_, id)| self.articles[id].clone())
            .collect()
    }
}

impl ArticleSource for CorpusIndex {
    fn search(&self, query: &SearchQuery, limit: usize) -> Result<Vec<Article>> {
        Ok(CorpusIndex::search(self, query, limit))
    }
}

/// Files considered articles: `*.json` directly inside the directory, by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Builds an index from every article file in `dir`.
pub fn ingest_corpus(dir: &Path) -> Result<CorpusIndex> {
    let mut index = CorpusIndex::new();
    for path in corpus_files(dir)? {
        let article = read_article(&path)?;
        index.insert(article, &path)?;
    }
    Ok(index)
}

/// Report produced by a checking ingest that keeps going past bad files.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub indexed: usize,
    pub failures: Vec<Error>,
}

pub fn check_corpus(dir: &Path) -> Result<IngestReport> {
    let mut index = CorpusIndex::new();
    let mut report = IngestReport::default();
    for path in corpus_files(dir)? {
        match read_article(&path).and_then(|a| index.insert(a, &path)) {
            Ok(()) => report.indexed += 1,
            Err(e) => report.failures.push(e),
        }
    }
    Ok(report)
}

/// Remote source: `GET {endpoint}?q=<query>&limit=<n>` returning a JSON array
/// of article documents in rank order.
pub struct HttpSource {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpSource {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpSource {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl ArticleSource for HttpSource {
    fn search(&self, query: &SearchQuery, limit: usize) -> Result<Vec<Article>> {
        let mut response = self
            .agent
            .get(&self.endpoint)
            .query("q", &query.raw)
            .query("limit", limit.to_string())
            .call()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let files: Vec<ArticleFile> = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::MalformedResponse(e.to_string()))?;
        let origin = PathBuf::from(&self.endpoint);
        files
            .into_iter()
            .take(limit)
            .map(|f| f.into_article(&origin))
            .collect()
    }
}

/// Named article sources; communities refer to one by `source_id`.
#[derive(Default)]
pub struct SourceRegistry {
    sources: BTreeMap<String, Box<dyn ArticleSource>>,
}

impl SourceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: impl Into<String>, source: Box<dyn ArticleSource>) {
        self.sources.insert(id.into(), source);
    }

    pub fn with(mut self, id: impl Into<String>, source: Box<dyn ArticleSource>) -> Self {
        self.register(id, source);
        self
    }

    pub fn search(&self, source_id: &str, query: &SearchQuery, limit: usize) -> Result<Vec<Article>> {
        let source = self
            .sources
            .get(source_id)
            .ok_or_else(|| Error::UnknownSource(source_id.to_string()))?;
        source.search(query, limit)
    }

    pub fn contains(&self, source_id: &str) -> bool {
        self.sources.contains_key(source_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> CorpusIndex {
        CorpusIndex::from_articles([
            Article::new("a", "Yen falls", "", "The yen fell. The yen fell again. Rates held."),
            Article::new("b", "Rates", "", "The bank held rates. The yen moved."),
            Article::new("c", "Baseball", "", "Ohtani hit a home run."),
        ])
        .unwrap()
    }

    fn q(raw: &str) -> SearchQuery {
        SearchQuery::parse(raw).unwrap()
    }

    #[test]
    fn query_parsing() {
        let query = q("  日銀   金融政策 ");
        assert_eq!(query.terms, vec!["日銀", "金融政策"]);
        assert_eq!(query.raw, "日銀 金融政策");
        assert!(SearchQuery::parse("   ").is_none());
    }

    #[test]
    fn single_match() {
        let ids: Vec<_> = corpus().search(&q("ohtani"), 10).into_iter().map(|a| a.article_id).collect();
        assert_eq!(ids, vec!["c"]);
    }

    #[test]
    fn ranked_by_tf_sum() {
        // "yen": a has 3 (title + 2 body), b has 1.
        let ids: Vec<_> = corpus().search(&q("yen"), 10).into_iter().map(|a| a.article_id).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn and_semantics() {
        let ids: Vec<_> = corpus().search(&q("yen bank"), 10).into_iter().map(|a| a.article_id).collect();
        assert_eq!(ids, vec!["b"]);
        assert!(corpus().search(&q("yen ohtani"), 10).is_empty());
        assert!(corpus().search(&q("missingterm"), 10).is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = CorpusIndex::from_articles([
            Article::new("a", "t", "", ""),
            Article::new("a", "u", "", ""),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateArticle { .. }));
    }

    #[test]
    fn unknown_source() {
        let registry = SourceRegistry::new().with("local", Box::new(corpus()));
        assert!(registry.search("local", &q("yen"), 1).is_ok());
        assert!(matches!(
            registry.search("nhk", &q("yen"), 1),
            Err(Error::UnknownSource(_))
        ));
    }
}
