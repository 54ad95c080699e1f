//! Oracles and fixtures shared by the integration tests and the acceptance
//! suite in the CLI crate.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use statrs::distribution::{ContinuousCDF, Normal};

use snsim::llm::{MockBackend, TemplateId, TemplateSet};
use snsim::model::{CommunityConfig, InformationBundle, Origin, Post, SearchParams, Thread, UserPersona};
use snsim::persona::persona_prompt;
use snsim::rag::query_prompt;
use snsim::retrieval::SourceRegistry;
use snsim::sampling::RngStream;
use snsim::summarizer::LexRankConfig;
use snsim::text::tokenize;
use snsim::{RagMode, SeedPersona, SimulationConfig, Simulator};

/// Simpson's rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

pub fn gamma3_pdf(x: f64) -> f64 {
    x * x * (-x).exp() / 2.0
}

pub fn gamma3_cdf_numeric(x: f64) -> f64 {
    simpson(gamma3_pdf, 0.0, x, 20_000)
}

/// Expected value of the rounded, clamped depth, by integrating the density
/// over each rounding bucket.
pub fn depth_mean_oracle() -> f64 {
    let mut mean = 0.0;
    for k in 1..=6 {
        let lo = k as f64 - 0.5;
        let mass = if k == 6 {
            1.0 - gamma3_cdf_numeric(lo)
        } else {
            gamma3_cdf_numeric(lo + 1.0) - gamma3_cdf_numeric(lo)
        };
        mean += k as f64 * mass;
    }
    mean
}

pub fn attention_mean_oracle() -> f64 {
    let n = Normal::new(5.0, 1.0).unwrap();
    (1..=10)
        .map(|k| {
            let lo = if k == 1 { f64::NEG_INFINITY } else { k as f64 - 0.5 };
            let hi = if k == 10 { f64::INFINITY } else { k as f64 + 0.5 };
            k as f64 * (n.cdf(hi) - n.cdf(lo))
        })
        .sum()
}

pub const LEXRANK_FIXTURES: [&str; 12] = [
    "The bank raised rates. The bank kept rates.",
    "Rates rose today. Stocks fell sharply. The yen weakened against the dollar.",
    "Ohtani hit a home run. The Dodgers won the game. Ohtani stole a base. Fans cheered the home run.",
    "Inflation is above target. Wages are rising. Inflation and wages matter for policy. The policy board met. \
     Markets expect a hike.",
    "A. B. C. D. E. F.",
    "Bond yields climbed. Bond yields fell. Bond yields were flat. The governor spoke. The governor was cautious. \
     Yields and the governor were in the news. Nothing else happened.",
    "日本銀行は金利を引き上げた。円安が進んだ。日本銀行の総裁は慎重だった。金利の上昇は住宅ローンに影響する。",
    "The pitcher struck out ten. The pitcher walked two. The batter hit a double. The batter hit a single. \
     The crowd was loud. The crowd went home happy. The manager praised the pitcher. The manager praised the batter.",
    "One topic only. One topic only. One topic only.",
    "Exporters gained from the weak yen. Importers lost from the weak yen. Households paid more for food. \
     Households paid more for energy. The government planned subsidies. Subsidies for energy were extended. \
     Economists debated the effect. The effect on inflation was small. Inflation stayed above two percent. \
     The bank watched inflation closely.",
    "Game one was close. Game two was a blowout. Game three went to extra innings. Game four was rained out. \
     Game five decided the series. The series drew record ratings. Ratings in Japan were high. Japan celebrated. \
     Ohtani was named the series MVP. The MVP award was his first. His first season with the team ended well.",
    "Alpha beta. Beta gamma. Gamma delta. Delta epsilon. Epsilon zeta. Zeta eta. Eta theta. Theta iota. \
     Iota kappa. Kappa lambda. Lambda mu. Mu alpha.",
];

/// Independent construction of the thresholded, row-normalized similarity
/// graph, keyed by term strings.
pub fn oracle_matrix(sentences: &[String], threshold: f64) -> Vec<Vec<f64>> {
    let n = sentences.len();
    let docs: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for doc in &docs {
        for term in doc.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(term).or_default() += 1.0;
        }
    }
    let vectors: Vec<BTreeMap<&str, f64>> = docs
        .iter()
        .map(|doc| {
            let mut v: BTreeMap<&str, f64> = BTreeMap::new();
            for t in doc {
                *v.entry(t.as_str()).or_default() += 1.0;
            }
            for (t, w) in v.iter_mut() {
                *w *= ((1.0 + n as f64) / (1.0 + df[t])).ln() + 1.0;
            }
            v
        })
        .collect();
    let cos = |a: &BTreeMap<&str, f64>, b: &BTreeMap<&str, f64>| {
        let dot: f64 = a.iter().map(|(t, x)| x * b.get(t).copied().unwrap_or(0.0)).sum();
        let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n)
                .map(|j| {
                    let s = cos(&vectors[i], &vectors[j]);
                    if s > 0.0 && s >= threshold {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let degree: f64 = row.iter().sum();
            if degree == 0.0 {
                vec![1.0 / n as f64; n]
            } else {
                row.into_iter().map(|x| x / degree).collect()
            }
        })
        .collect()
}

/// Stationary vector of `p = d/N + (1 - d) B^T p`, solved directly as the
/// linear system `(I - (1 - d) B^T) p = d/N` by Gaussian elimination.
pub fn oracle_scores(b: &[Vec<f64>], damping: f64) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - (1.0 - damping) * b[j][i])
                .collect();
            row.push(damping / n as f64);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    let p: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    let total: f64 = p.iter().sum();
    p.into_iter().map(|x| x / total).collect()
}

fn community() -> CommunityConfig {
    CommunityConfig {
        goal: "To discuss the Bank of Japan's monetary policy.".into(),
        rule: "Use courteous language in discussions.".into(),
        scenario_name: "BOJ Discussion".into(),
        source_id: "local".into(),
    }
}

fn config() -> SimulationConfig {
    SimulationConfig {
        community: community(),
        rag_mode: RagMode::Advanced,
        persona_count: 2,
        seed_personas: vec![SeedPersona {
            name: "tanaka_k".into(),
            description: "A retired bank branch manager".into(),
        }],
        top_level_count: 28,
        reply_rounds: 5,
        thread_capacity: 10,
        rng_seed: 42,
        backend_id: "mock".into(),
        corpus_path: String::new(),
        reply_target: Default::default(),
        simple_depth: 3,
    }
}

fn persona(name: &str, description: &str) -> UserPersona {
    let params = SearchParams {
        attention: 5,
        range: 5,
        depth: 3,
    };
    UserPersona::new(name.into(), description.into(), params, Origin::Seed)
}

fn thread() -> Thread {
    let mut t = Thread::new(1, Post::top_level(1, "tanaka_k", "Rates went up again today.", 1)).unwrap();
    t.append_reply(Post::reply(2, "mika_fx", "tanaka_k", "The yen barely moved.", 2))
        .unwrap();
    t.append_reply(Post::reply(3, "econ_student", "mika_fx", "Bond yields did, though.", 3))
        .unwrap();
    t
}

fn information() -> String {
    InformationBundle::from_parts(
        vec![("Bank of Japan raises interest rates".into(), "The policy rate is now 0.25 percent.".into())],
        vec![("Yen slides after decision".into(), "The yen weakened. Import prices rose.".into())],
    )
    .rendered
}

pub fn check_golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    if std::env::var_os("SNSIM_UPDATE_GOLDENS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden");
}

pub fn render_prompts() -> Vec<(TemplateId, String)> {
    let templates = TemplateSet::default();
    let sources = SourceRegistry::new();
    let backend = MockBackend::default();
    let sim = Simulator {
        templates: &templates,
        sources: &sources,
        backend: &backend,
        lexrank: LexRankConfig::default(),
    };
    let cfg = config();
    let me = persona("econ_student", "An economics undergraduate");
    let replier = persona("bakery_owner", "Runs a bakery in Osaka");
    let pool = vec![
        persona("tanaka_k", "A retired bank branch manager"),
        persona("mika_fx", "A part-time yen trader"),
    ];
    let mut rng = RngStream::new(1, "persona");
    vec![
        (TemplateId::PersonaGen, persona_prompt(&pool, &cfg.community, &templates, &mut rng).unwrap()),
        (
            TemplateId::QueryGenPost,
            query_prompt(&me.name, &me.description, &cfg.community, None, &templates).unwrap(),
        ),
        (
            TemplateId::QueryGenReply,
            query_prompt(&me.name, &me.description, &cfg.community, Some(&thread()), &templates).unwrap(),
        ),
        (TemplateId::PostGen, sim.post_prompt(&cfg, &me, &information()).unwrap()),
        (
            TemplateId::ReplyGen,
            sim.reply_prompt(&cfg, &replier, &thread(), "econ_student", &information()).unwrap(),
        ),
    ]
}

