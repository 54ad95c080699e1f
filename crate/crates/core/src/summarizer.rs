//! Extractive summarization with LexRank under a depth/length budget.
//!
//! | depth | target   | l < 500 | l >= 500 |
//! |-------|----------|---------|----------|
//! | 0     | title    | 100%    | 100%     |
//! | 1     | abstract | 100%    | 100%     |
//! | 2     | body     | 10%     | 5%       |
//! | 3     | body     | 20%     | 10%      |
//! | 4     | body     | 30%     | 15%      |
//! | 5     | body     | 40%     | 20%      |
//! | 6     | body     | 50%     | 25%      |
//!
//! `l` is the body length in sentences. Body budgets are `ceil(fraction * l)`
//! with a floor of one sentence.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Article;
use crate::text::tokenize;

/// Body length (in sentences) from which the halved fractions apply.
pub const LONG_ARTICLE_SENTENCES: usize = 500;

/// Body percentages for depths 2..=6 when `l < 500`.
const BODY_PERCENT: [u32; 5] = [10, 20, 30, 40, 50];

/// Sentences kept from the body when the abstract is missing.
const ABSTRACT_FALLBACK_SENTENCES: usize = 3;

const CJK_TERMINATORS: [char; 3] = ['。', '！', '？'];
const LATIN_TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 8] = ['」', '』', '）', ')', '"', '\'', '”', '’'];

/// Splits text into sentences on `。！？`, and on `.!?` when followed by
/// whitespace or the end of input. Closing quotes and brackets stay with the
/// sentence they close.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;

    let flush = |from: usize, to: usize, out: &mut Vec<String>| {
        let s: String = chars[from..to].iter().collect();
        let s = s.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };

    while i < chars.len() {
        let ch = chars[i];
        let cjk = CJK_TERMINATORS.contains(&ch);
        if !cjk && !LATIN_TERMINATORS.contains(&ch) {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < chars.len()
            && (CJK_TERMINATORS.contains(&chars[end])
                || LATIN_TERMINATORS.contains(&chars[end])
                || CLOSERS.contains(&chars[end]))
        {
            end += 1;
        }
        if cjk || end == chars.len() || chars[end].is_whitespace() {
            flush(start, end, &mut sentences);
            start = end;
        }
        i = end;
    }
    flush(start, chars.len(), &mut sentences);
    sentences
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryTarget {
    Title,
    Abstract,
    Body,
}

/// A cell of the budget table: what to summarize and how much to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryBudget {
    pub target: SummaryTarget,
    /// Share of the target's sentences kept, in percent (1..=100).
    pub percent: u32,
}

impl SummaryBudget {
    pub fn fraction(&self) -> f64 {
        f64::from(self.percent) / 100.0
    }

    /// Sentences to emit from a target field that has `source_len` sentences.
    pub fn sentence_count(&self, source_len: usize) -> usize {
        match self.target {
            SummaryTarget::Title => 1,
            SummaryTarget::Abstract => source_len,
            SummaryTarget::Body => (self.percent as usize * source_len).div_ceil(100).max(1),
        }
    }
}

pub fn budget_for(depth: u8, l: usize) -> Result<SummaryBudget> {
    let (target, percent) = match depth {
        0 => (SummaryTarget::Title, 100),
        1 => (SummaryTarget::Abstract, 100),
        2..=6 => {
            let full = BODY_PERCENT[usize::from(depth) - 2];
            let percent = if l >= LONG_ARTICLE_SENTENCES { full / 2 } else { full };
            (SummaryTarget::Body, percent)
        }
        other => return Err(Error::DepthOutOfRange(i64::from(other))),
    };
    Ok(SummaryBudget { target, percent })
}

/// Resolves the budget against a concrete article: the target field and the
/// number of sentences to emit from it.
pub fn budget_for_article(depth: u8, article: &Article) -> Result<(SummaryTarget, usize)> {
    let budget = budget_for(depth, article.l())?;
    let source_len = match budget.target {
        SummaryTarget::Title => 1,
        SummaryTarget::Abstract => split_sentences(&article.abstract_text).len(),
        SummaryTarget::Body => article.l(),
    };
    Ok((budget.target, budget.sentence_count(source_len)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexRankConfig {
    pub similarity_threshold: f64,
    pub damping: f64,
    pub convergence_epsilon: f64,
    pub max_iterations: usize,
}

impl Default for LexRankConfig {
    fn default() -> Self {
        LexRankConfig {
            similarity_threshold: 0.1,
            damping: 0.15,
            convergence_epsilon: 1e-6,
            max_iterations: 100,
        }
    }
}

impl LexRankConfig {
    /// Reads parameters from a TOML file, either at top level or under a
    /// `[lexrank]` table (so a scenario file works too). Missing keys keep
    /// their defaults.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |e: toml::de::Error| Error::config(path.display().to_string(), e.message().to_string());
        let mut table: toml::Table = toml::from_str(&text).map_err(bad)?;
        let section = match table.remove("lexrank") {
            Some(toml::Value::Table(t)) => t,
            _ => table
                .into_iter()
                .filter(|(k, _)| {
                    matches!(
                        k.as_str(),
                        "similarity_threshold" | "damping" | "convergence_epsilon" | "max_iterations"
                    )
                })
                .collect(),
        };
        let config: LexRankConfig = section.try_into().map_err(bad)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::config("damping", "must be within [0, 1)"));
        }
        if !(self.similarity_threshold >= 0.0) {
            return Err(Error::config("similarity_threshold", "must be non-negative"));
        }
        if !(self.convergence_epsilon > 0.0) {
            return Err(Error::config("convergence_epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// A tf-idf vector as (term id, weight) pairs sorted by term id, with its norm.
struct SparseVec {
    entries: Vec<(usize, f64)>,
    norm: f64,
}

/// tf-idf vectors with the sentences of one document as the collection.
/// idf is smoothed (`ln((1 + n) / (1 + df)) + 1`) so terms shared by every
/// sentence still carry weight.
fn tfidf_vectors(sentences: &[String]) -> Vec<SparseVec> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let tokenized: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            tokenize(s)
                .into_iter()
                .map(|t| {
                    let next = ids.len();
                    *ids.entry(t).or_insert(next)
                })
                .collect()
        })
        .collect();
    let mut df = vec![0usize; ids.len()];
    let counted: Vec<BTreeMap<usize, f64>> = tokenized
        .iter()
        .map(|tokens| {
            let mut tf = BTreeMap::new();
            for &t in tokens {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
            for &t in tf.keys() {
                df[t] += 1;
            }
            tf
        })
        .collect();
    let n = sentences.len() as f64;
    counted
        .into_iter()
        .map(|tf| {
            let entries: Vec<(usize, f64)> = tf
                .into_iter()
                .map(|(t, count)| (t, count * (((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0)))
                .collect();
            let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            SparseVec { entries, norm }
        })
        .collect()
}

fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.entries.len() && j < b.entries.len() {
        let (ta, wa) = a.entries[i];
        let (tb, wb) = b.entries[j];
        match ta.cmp(&tb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += wa * wb;
                i += 1;
                j += 1;
            }
        }
    }
    dot / (a.norm * b.norm)
}

/// The row-stochastic transition matrix of the thresholded similarity graph.
///
/// Edges (including self loops) exist where cosine similarity is at least the
/// threshold; each row is normalized by its degree. A sentence with no edges
/// gets a uniform row.
pub fn transition_matrix(sentences: &[String], config: &LexRankConfig) -> Vec<Vec<f64>> {
    let n = sentences.len();
    let vectors = tfidf_vectors(sentences);
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let sim = cosine(&vectors[i], &vectors[j]);
            if sim > 0.0 && sim >= config.similarity_threshold {
                matrix[i][j] = 1.0;
                matrix[j][i] = 1.0;
            }
        }
    }
    for row in matrix.iter_mut() {
        let degree: f64 = row.iter().sum();
        if degree == 0.0 {
            row.iter_mut().for_each(|x| *x = 1.0 / n as f64);
        } else {
            row.iter_mut().for_each(|x| *x /= degree);
        }
    }
    matrix
}

/// LexRank centrality by power iteration of `p <- d/N + (1 - d) B^T p`.
/// The result sums to one.
pub fn lexrank_scores(sentences: &[String], config: &LexRankConfig) -> Vec<f64> {
    let n = sentences.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![1.0];
    }
    let b = transition_matrix(sentences, config);
    let teleport = config.damping / n as f64;
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..config.max_iterations {
        let mut next = vec![teleport; n];
        for (i, row) in b.iter().enumerate() {
            for (j, weight) in row.iter().enumerate() {
                next[j] += (1.0 - config.damping) * weight * p[i];
            }
        }
        let delta: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if delta < config.convergence_epsilon {
            break;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Indices of the `k` best-scoring sentences, returned in document order.
/// Equal scores prefer the earlier sentence.
pub fn top_k_in_order(scores: &[f64], k: usize) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ranked.truncate(k);
    ranked.sort_unstable();
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub target: SummaryTarget,
    pub text: String,
    /// Set when the requested target was unavailable and a fallback was used.
    pub diagnostic: Option<String>,
}

pub fn summarize(article: &Article, depth: u8, config: &LexRankConfig) -> Result<Summary> {
    let budget = budget_for(depth, article.l())?;
    let title_fallback = |reason: String| Summary {
        target: SummaryTarget::Title,
        text: article.title.clone(),
        diagnostic: Some(reason),
    };
    match budget.target {
        SummaryTarget::Title => Ok(Summary {
            target: SummaryTarget::Title,
            text: article.title.clone(),
            diagnostic: None,
        }),
        SummaryTarget::Abstract => {
            if !article.abstract_text.trim().is_empty() {
                return Ok(Summary {
                    target: SummaryTarget::Abstract,
                    text: article.abstract_text.trim().to_string(),
                    diagnostic: None,
                });
            }
            if article.body_sentences.is_empty() {
                return Ok(title_fallback(format!(
                    "article {} has neither abstract nor body; using title",
                    article.article_id
                )));
            }
            let lead = &article.body_sentences
                [..ABSTRACT_FALLBACK_SENTENCES.min(article.body_sentences.len())];
            Ok(Summary {
                target: SummaryTarget::Body,
                text: lead.join(" "),
                diagnostic: Some(format!(
                    "article {} has no abstract; using leading body sentences",
                    article.article_id
                )),
            })
        }
        SummaryTarget::Body => {
            if article.body_sentences.is_empty() {
                return Ok(title_fallback(format!(
                    "article {} has an empty body; using title",
                    article.article_id
                )));
            }
            let k = budget.sentence_count(article.l());
            let scores = lexrank_scores(&article.body_sentences, config);
            let text = top_k_in_order(&scores, k)
                .into_iter()
                .map(|i| article.body_sentences[i].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Ok(Summary {
                target: SummaryTarget::Body,
                text,
                diagnostic: None,
            })
        }
    }
}
