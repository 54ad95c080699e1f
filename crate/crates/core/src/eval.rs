//! Human-evaluation instruments: blinded sheets, rating files, and tables.
//!
//! Sheets never mention the retrieval condition. Their order is shuffled
//! under a recorded seed and sheet ids are assigned after shuffling.
//!
//! Rating files hold one record per line:
//!
//! ```text
//! # scenario: BOJ Discussion
//! # condition: Without RAG
//! subject_id,target_kind,target_id,item_index,value_code
//! ```
//!
//! Fields may be separated by commas or tabs. `value_code` 0 is the best
//! level of the item's scale and 3 the worst. The optional `# scenario:` and
//! `# condition:` directives label the records that follow them; other lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::RunExport;
use crate::model::render_thread;
use crate::sampling::RngStream;

/// Ratings collected per post and per thread by default.
pub const POST_REPLICATIONS: usize = 6;
pub const THREAD_REPLICATIONS: usize = 3;

pub const POST_INSTRUCTION: &str =
    "Evaluate only the content of the post below, ignoring the context before and after it.";
pub const THREAD_INSTRUCTION: &str =
    "Evaluate the exchange taking place in the thread below as a whole.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Post,
    Thread,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Post => "post",
            TargetKind::Thread => "thread",
        }
    }

    pub fn items(&self) -> &'static [EvalItem] {
        match self {
            TargetKind::Post => &POST_ITEMS,
            TargetKind::Thread => &THREAD_ITEMS,
        }
    }

    pub fn item(&self, index: u8) -> Option<&'static EvalItem> {
        self.items().get(usize::from(index).checked_sub(1)?)
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(TargetKind::Post),
            "thread" => Ok(TargetKind::Thread),
            other => Err(Error::Scale(format!("unknown target kind `{other}`"))),
        }
    }
}

/// A four-level ordinal scale, best level first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Grammar,
    Conformity,
    Naturalness,
}

impl Scale {
    pub fn labels(&self) -> [&'static str; 4] {
        match self {
            Scale::Grammar => ["None at all", "Almost none", "Slightly", "Many"],
            Scale::Conformity => [
                "Compatible",
                "Somewhat compatible",
                "Somewhat incompatible",
                "Incompatible",
            ],
            Scale::Naturalness => ["natural", "somewhat natural", "somewhat unnatural", "unnatural"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalItem {
    pub question: &'static str,
    pub scale: Scale,
}

pub const POST_ITEMS: [EvalItem; 5] = [
    EvalItem {
        question: "Is there any grammatical errors in the content of the post?",
        scale: Scale::Grammar,
    },
    EvalItem {
        question: "Is the content of the post appropriate for the community goals?",
        scale: Scale::Conformity,
    },
    EvalItem {
        question: "Is the content of the post adhere to the community rules?",
        scale: Scale::Conformity,
    },
    EvalItem {
        question: "Is the content of the post as imagined by the persona used to generate the post?",
        scale: Scale::Conformity,
    },
    EvalItem {
        question: "Is the content of the post natural as a post on an internet forum with that community goal?",
        scale: Scale::Naturalness,
    },
];

pub const THREAD_ITEMS: [EvalItem; 4] = [
    EvalItem {
        question: "Is there any grammatical errors in the content of the exchange?",
        scale: Scale::Grammar,
    },
    EvalItem {
        question: "Is the content of the exchange is appropriate for the community goal?",
        scale: Scale::Conformity,
    },
    EvalItem {
        question: "Is the content of the exchange in compliance with the community rules?",
        scale: Scale::Conformity,
    },
    EvalItem {
        question: "Is the exchange natural as an exchange on an internet forum with that community goal?",
        scale: Scale::Naturalness,
    },
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationSheet {
    pub sheet_id: String,
    pub target_kind: TargetKind,
    /// post_id for post sheets, thread_id for thread sheets.
    pub target_id: u64,
    /// Number of independent ratings to collect with this sheet.
    pub replications: usize,
    pub text: String,
}

fn items_block(kind: TargetKind) -> String {
    let mut out = String::from("Items (mark one answer per item):\n");
    for (i, item) in kind.items().iter().enumerate() {
        let options: Vec<String> = item.scale.labels().iter().map(|l| format!("[ ] {l}")).collect();
        out.push_str(&format!("{}. {}\n   {}\n", i + 1, item.question, options.join("  ")));
    }
    out
}

fn shuffle_and_number(
    mut drafts: Vec<(u64, String)>,
    kind: TargetKind,
    seed: u64,
    replications: usize,
) -> Vec<EvaluationSheet> {
    let mut rng = RngStream::new(seed, format!("sheet_order/{kind}"));
    let order = rng.permutation(drafts.len());
    let mut slots: Vec<Option<(u64, String)>> = drafts.drain(..).map(Some).collect();
    order
        .into_iter()
        .enumerate()
        .map(|(n, i)| {
            let (target_id, body) = slots[i].take().expect("permutation visits each index once");
            let sheet_id = format!("{kind}-{:03}", n + 1);
            EvaluationSheet {
                text: format!("Evaluation sheet {sheet_id}\n{body}"),
                sheet_id,
                target_kind: kind,
                target_id,
                replications,
            }
        })
        .collect()
}

/// One sheet per post or reply.
pub fn make_post_sheets(run: &RunExport, seed: u64, replications: usize) -> Vec<EvaluationSheet> {
    let c = &run.config.community;
    let drafts = run
        .threads
        .iter()
        .flat_map(|t| t.posts.iter())
        .map(|post| {
            let persona = run
                .persona(&post.author)
                .map(|p| p.description.as_str())
                .unwrap_or("(unknown)");
            let body = format!(
                "{POST_INSTRUCTION}\n\nCommunity goal: {}\nCommunity rule: {}\nUser persona: {persona}\n\nPost:\n{}\n\n{}",
                c.goal,
                c.rule,
                post.body,
                items_block(TargetKind::Post)
            );
            (post.post_id, body)
        })
        .collect();
    shuffle_and_number(drafts, TargetKind::Post, seed, replications)
}

/// One sheet per thread that has at least one reply.
pub fn make_thread_sheets(run: &RunExport, seed: u64, replications: usize) -> Vec<EvaluationSheet> {
    let c = &run.config.community;
    let drafts = run
        .threads
        .iter()
        .filter(|t| t.reply_count() > 0)
        .map(|thread| {
            let body = format!(
                "{THREAD_INSTRUCTION}\n\nCommunity goal: {}\nCommunity rule: {}\n\nThread:\n{}\n\n{}",
                c.goal,
                c.rule,
                render_thread(thread),
                items_block(TargetKind::Thread)
            );
            (thread.thread_id, body)
        })
        .collect();
    shuffle_and_number(drafts, TargetKind::Thread, seed, replications)
}

/// Writes `<sheet_id>.txt` for each sheet plus `manifest.csv` mapping sheets
/// to their targets.
pub fn write_sheets(sheets: &[EvaluationSheet], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("sheet_id,target_kind,target_id,replications\n");
    for sheet in sheets {
        let path = dir.join(format!("{}.txt", sheet.sheet_id));
        fs::write(&path, &sheet.text).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!(
            "{},{},{},{}\n",
            sheet.sheet_id, sheet.target_kind, sheet.target_id, sheet.replications
        ));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub scenario: String,
    pub condition: String,
    pub subject_id: String,
    pub target_kind: TargetKind,
    pub target_id: String,
    pub item_index: u8,
    /// 0 (best) ..= 3 (worst).
    pub value: u8,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if self.target_kind.item(self.item_index).is_none() {
            return Err(Error::Scale(format!(
                "item {} does not exist for {} ratings (1..={})",
                self.item_index,
                self.target_kind,
                self.target_kind.items().len()
            )));
        }
        if self.value > 3 {
            return Err(Error::Scale(format!("value code {} is outside 0..=3", self.value)));
        }
        Ok(())
    }
}

const UNLABELED: &str = "-";

pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>> {
    let mut scenario = UNLABELED.to_string();
    let mut condition = UNLABELED.to_string();
    let mut records = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("scenario:") {
                scenario = v.trim().to_string();
            } else if let Some(v) = comment.strip_prefix("condition:") {
                condition = v.trim().to_string();
            }
            continue;
        }
        let bad = |message: String| Error::RatingsLine { line: line_no, message };
        let fields: Vec<&str> = line.split([',', '\t']).map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let record = RatingRecord {
            scenario: scenario.clone(),
            condition: condition.clone(),
            subject_id: fields[0].to_string(),
            target_kind: fields[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            target_id: fields[2].to_string(),
            item_index: fields[3]
                .parse()
                .map_err(|_| bad(format!("item index `{}` is not a number", fields[3])))?,
            value: fields[4]
                .parse()
                .map_err(|_| bad(format!("value code `{}` is not a number", fields[4])))?,
        };
        record.validate().map_err(|e| bad(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(&text)
}

/// Percentage in hundredths of a percent, rounded half up.
fn basis_points(count: u64, total: u64) -> u64 {
    (20_000 * count + total) / (2 * total)
}

/// One row of the count and percentage tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateRow {
    pub scenario: String,
    pub condition: String,
    pub target_kind: TargetKind,
    pub item_index: u8,
    pub counts: [u64; 4],
    pub total: u64,
    /// Per-level percentage in hundredths (6667 == 66.67%).
    pub basis_points: [u64; 4],
}

impl AggregateRow {
    pub fn percents(&self) -> [f64; 4] {
        self.basis_points.map(|bp| bp as f64 / 100.0)
    }

    pub fn percent_strings(&self) -> [String; 4] {
        self.basis_points.map(|bp| format!("{}.{:02}", bp / 100, bp % 100))
    }

    pub fn item(&self) -> &'static EvalItem {
        self.target_kind.item(self.item_index).expect("validated")
    }
}

/// Counts ratings per (scenario, condition, kind, item), in order of first
/// appearance; totals are the number of records in each group.
pub fn aggregate(records: &[RatingRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::EmptyRatings);
    }
    type Key = (String, String, TargetKind, u8);
    let mut order: Vec<Key> = Vec::new();
    let mut counts: BTreeMap<Key, [u64; 4]> = BTreeMap::new();
    for record in records {
        record.validate()?;
        let key = (
            record.scenario.clone(),
            record.condition.clone(),
            record.target_kind,
            record.item_index,
        );
        let entry = counts.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            [0; 4]
        });
        entry[usize::from(record.value)] += 1;
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let c = counts[&key];
            let total: u64 = c.iter().sum();
            let (scenario, condition, target_kind, item_index) = key;
            AggregateRow {
                scenario,
                condition,
                target_kind,
                item_index,
                counts: c,
                total,
                basis_points: c.map(|x| basis_points(x, total)),
            }
        })
        .collect())
}

fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Count table as CSV: one row per group, levels as `level1..level4`.
pub fn counts_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("scenario,condition,target_kind,item_index,level1,level2,level3,level4,eval_total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.scenario),
            csv_field(&r.condition),
            r.target_kind,
            r.item_index,
            r.counts[0],
            r.counts[1],
            r.counts[2],
            r.counts[3],
            r.total
        ));
    }
    out
}

pub fn percentages_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("scenario,condition,target_kind,item_index,level1,level2,level3,level4,eval_total\n");
    for r in rows {
        let p = r.percent_strings();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.scenario),
            csv_field(&r.condition),
            r.target_kind,
            r.item_index,
            p[0],
            p[1],
            p[2],
            p[3],
            r.total
        ));
    }
    out
}

fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let width = |col: usize| {
        std::iter::once(&header[col])
            .chain(rows.iter().map(|r| &r[col]))
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule: String = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    let mut out = vec![line(header), rule];
    out.extend(rows.iter().map(|r| line(r)));
    out.join("\n") + "\n"
}

/// Plain-text tables, one count table and one percentage table per
/// (kind, item), with rows per scenario and condition.
pub fn render_tables(rows: &[AggregateRow]) -> String {
    let mut groups: Vec<(TargetKind, u8)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.target_kind, r.item_index)) {
            groups.push((r.target_kind, r.item_index));
        }
    }
    let mut out = String::new();
    for (kind, index) in groups {
        let item = kind.item(index).expect("validated");
        let members: Vec<&AggregateRow> = rows
            .iter()
            .filter(|r| r.target_kind == kind && r.item_index == index)
            .collect();
        let mut header = vec!["Scenario".to_string(), "Conditions".to_string()];
        header.extend(item.scale.labels().iter().map(|s| s.to_string()));

        let count_rows: Vec<Vec<String>> = members
            .iter()
            .map(|r| {
                let mut row = vec![r.scenario.clone(), r.condition.clone()];
                row.extend(r.counts.iter().map(u64::to_string));
                row
            })
            .collect();
        out.push_str(&format!("{kind} item {index}: {} (counts)\n", item.question));
        out.push_str(&aligned(&header, &count_rows));
        out.push('\n');

        let mut pct_header = header.clone();
        pct_header.push("Eval. total".to_string());
        let pct_rows: Vec<Vec<String>> = members
            .iter()
            .map(|r| {
                let mut row = vec![r.scenario.clone(), r.condition.clone()];
                row.extend(r.percent_strings().iter().map(|p| format!("{p}%")));
                row.push(r.total.to_string());
                row
            })
            .collect();
        out.push_str(&format!("{kind} item {index}: {} (percent)\n", item.question));
        out.push_str(&aligned(&pct_header, &pct_rows));
        out.push('\n');
    }
    out
}
