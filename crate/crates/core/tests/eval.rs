use std::path::PathBuf;

use proptest::prelude::*;

use snsim::eval::{
    aggregate, load_ratings, make_post_sheets, make_thread_sheets, parse_ratings, render_tables, write_sheets,
    RatingRecord, TargetKind, POST_INSTRUCTION,
};
use snsim::export::RunExport;
use snsim::model::{CommunityConfig, Origin, Post, SearchParams, Thread, UserPersona};
use snsim::{RagMode, SeedPersona, SimulationConfig};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn paper_table_rows_round_trip() {
    let records = load_ratings(&fixtures().join("ratings/thread_goal.csv")).unwrap();
    let rows = aggregate(&records).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].scenario.as_str(), rows[0].condition.as_str()), ("BOJ Discussion", "Without RAG"));
    assert_eq!(rows[0].counts, [50, 19, 5, 1]);
    assert_eq!(rows[0].total, 75);
    assert_eq!(rows[0].percent_strings(), ["66.67", "25.33", "6.67", "1.33"]);
    assert_eq!(rows[1].total, 81);
    assert_eq!(rows[1].percent_strings(), ["72.84", "23.46", "1.23", "2.47"]);
    let tables = render_tables(&rows);
    assert!(tables.contains("66.67%") && tables.contains("Eval. total"));
}

fn persona(name: &str) -> UserPersona {
    let params = SearchParams {
        attention: 5,
        range: 5,
        depth: 3,
    };
    UserPersona::new(name.into(), format!("{name} description"), params, Origin::Seed)
}

fn export(mode: RagMode) -> RunExport {
    let mut threads = Vec::new();
    let mut id = 0;
    for t in 1..=6u64 {
        id += 1;
        let mut thread = Thread::new(t, Post::top_level(id, "alice", format!("topic {t}"), id)).unwrap();
        // Threads 2 and 5 never get replies.
        if t != 2 && t != 5 {
            for k in 0..t {
                id += 1;
                let author = if k % 2 == 0 { "bob" } else { "alice" };
                let target = thread.last_post().author.clone();
                thread
                    .append_reply(Post::reply(id, author, target, format!("reply {k}"), id))
                    .unwrap();
            }
        }
        threads.push(thread);
    }
    let config = SimulationConfig {
        community: CommunityConfig {
            goal: "To chat about Shohei Ohtani's activities.".into(),
            rule: "Avoid topics not related to Shohei Ohtani.".into(),
            scenario_name: "Otani Chat".into(),
            source_id: "local".into(),
        },
        rag_mode: mode,
        persona_count: 2,
        seed_personas: vec![SeedPersona {
            name: "alice".into(),
            description: "alice description".into(),
        }],
        top_level_count: 6,
        reply_rounds: 3,
        thread_capacity: 10,
        rng_seed: 11,
        backend_id: "mock".into(),
        corpus_path: String::new(),
        reply_target: Default::default(),
        simple_depth: 3,
    };
    RunExport {
        config,
        personas: vec![persona("alice"), persona("bob")],
        threads,
        rag_mode: mode,
        rng_seed: 11,
        aborted: None,
    }
}

#[test]
fn thread_sheets_skip_reply_less_threads() {
    let sheets = make_thread_sheets(&export(RagMode::None), 11, 3);
    assert_eq!(sheets.len(), 4);
    let mut targets: Vec<u64> = sheets.iter().map(|s| s.target_id).collect();
    targets.sort_unstable();
    assert_eq!(targets, vec![1, 3, 4, 6]);
    assert!(sheets.iter().all(|s| s.replications == 3 && s.text.contains("[ReplyTo:")));
}

#[test]
fn post_sheets_cover_every_post() {
    let run = export(RagMode::Advanced);
    let total: usize = run.threads.iter().map(Thread::len).sum();
    let sheets = make_post_sheets(&run, 11, 6);
    assert_eq!(sheets.len(), total);
    for sheet in &sheets {
        assert!(sheet.text.contains(POST_INSTRUCTION));
        assert!(sheet.text.contains("Avoid topics not related to Shohei Ohtani."));
        assert!(sheet.text.contains("description"));
        assert_eq!(sheet.text.matches("[ ] ").count(), 5 * 4);
    }
}

#[test]
fn sheets_are_blind_to_the_condition() {
    for seed in [0, 11, 99] {
        let texts = |mode| {
            let run = export(mode);
            let mut all = make_post_sheets(&run, seed, 6);
            all.extend(make_thread_sheets(&run, seed, 3));
            all.into_iter().map(|s| (s.sheet_id, s.target_id, s.text)).collect::<Vec<_>>()
        };
        let none = texts(RagMode::None);
        assert_eq!(none, texts(RagMode::Simple));
        assert_eq!(none, texts(RagMode::Advanced));
        for (_, _, text) in &none {
            for word in ["advanced", "simple", "RAG", "retrieval"] {
                assert!(!text.contains(word), "sheet mentions {word}");
            }
        }
    }
}

#[test]
fn order_is_shuffled_under_seed() {
    let run = export(RagMode::None);
    let order = |seed| make_post_sheets(&run, seed, 6).into_iter().map(|s| s.target_id).collect::<Vec<_>>();
    assert_eq!(order(5), order(5));
    let orders: std::collections::BTreeSet<_> = (0..5).map(order).collect();
    assert!(orders.len() > 1);
    let sequential: Vec<u64> = (1..=order(5).len() as u64).collect();
    assert!((0..5).any(|s| order(s) != sequential));
}

#[test]
fn sheets_and_manifest_written() {
    let dir = tempfile::tempdir().unwrap();
    let sheets = make_thread_sheets(&export(RagMode::None), 1, 3);
    write_sheets(&sheets, dir.path()).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + sheets.len());
    assert!(dir.path().join("thread-001.txt").exists());
}

fn record_strategy() -> impl Strategy<Value = RatingRecord> {
    (prop::bool::ANY, 1u8..=5, 0u8..=3).prop_map(|(post, item, value)| {
        let kind = if post { TargetKind::Post } else { TargetKind::Thread };
        RatingRecord {
            scenario: "s".into(),
            condition: "c".into(),
            subject_id: "x".into(),
            target_kind: kind,
            target_id: "1".into(),
            item_index: if kind == TargetKind::Thread { item.min(4) } else { item },
            value,
        }
    })
}

proptest! {
    #[test]
    fn counts_sum_to_totals(records in prop::collection::vec(record_strategy(), 1..200)) {
        let rows = aggregate(&records).unwrap();
        prop_assert_eq!(rows.iter().map(|r| r.total).sum::<u64>(), records.len() as u64);
        for row in rows {
            prop_assert_eq!(row.counts.iter().sum::<u64>(), row.total);
            let pct: u64 = row.basis_points.iter().sum();
            // Each level rounds by at most half a basis point.
            prop_assert!((9_998..=10_002).contains(&pct), "{}", pct);
        }
    }

    #[test]
    fn ratings_text_round_trips(records in prop::collection::vec(record_strategy(), 1..50)) {
        let text: String = std::iter::once("# scenario: s\n# condition: c\n".to_string())
            .chain(records.iter().map(|r| {
                format!("{},{},{},{},{}\n", r.subject_id, r.target_kind, r.target_id, r.item_index, r.value)
            }))
            .collect();
        prop_assert_eq!(parse_ratings(&text).unwrap(), records);
    }
}
