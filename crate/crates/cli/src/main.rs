use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use snsim::eval::{self, TargetKind};
use snsim::export::{write_run, RunExport};
use snsim::llm::HttpBackendConfig;
use snsim::retrieval::{check_corpus, ingest_corpus, read_article};
use snsim::scenario::BackendSpec;
use snsim::summarizer::{budget_for, summarize, LexRankConfig};
use snsim::{Error, RagMode, Scenario};

/// Multi-agent community simulator.
#[derive(Debug, Parser)]
#[command(name = "snsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write run.json, events.jsonl and transcript.txt.
    Simulate(SimulateArgs),
    /// Validate and index a directory of article files.
    CorpusIngest(IngestArgs),
    /// Summarize one article file at a given depth.
    Summarize(SummarizeArgs),
    /// Produce blinded evaluation sheets from a run export.
    EvalSheets(SheetArgs),
    /// Aggregate a ratings file into count and percentage tables.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    None,
    Simple,
    Advanced,
}

impl From<Mode> for RagMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::None => RagMode::None,
            Mode::Simple => RagMode::Simple,
            Mode::Advanced => RagMode::Advanced,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Parser)]
struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Retrieval mode; overrides the scenario's `mode`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// RNG seed; overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Completion backend; overrides the scenario's `[backend]` kind.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Endpoint for `--backend http` when the scenario has none.
    #[arg(long)]
    endpoint: Option<String>,
    /// Article directory; overrides the scenario's `corpus`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Parser)]
struct IngestArgs {
    /// Directory of `*.json` article files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Keep going past malformed files and list all of them.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Parser)]
struct SummarizeArgs {
    /// Reading depth, 0 (title) to 6.
    #[arg(long, allow_negative_numbers = true)]
    depth: i64,
    /// TOML file with LexRank parameters (top level or `[lexrank]` table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Article file.
    article: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Post,
    Thread,
}

#[derive(Debug, Parser)]
struct SheetArgs {
    /// Run export (run.json).
    #[arg(long)]
    run: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output directory for sheets and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    /// Shuffle seed; defaults to the run's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Ratings to collect per sheet; defaults to 6 for posts, 3 for threads.
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Debug, Parser)]
struct AggregateArgs {
    /// Ratings file.
    #[arg(long)]
    ratings: PathBuf,
    /// Output directory for counts.csv, percentages.csv and tables.txt.
    #[arg(long)]
    out: PathBuf,
}

/// Exit code 1 for bad input, 2 for failures while running.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut scenario = Scenario::load(&args.scenario)?;
    // Paths given on the command line are relative to the working directory.
    if let Some(corpus) = args.corpus {
        scenario.corpus = Some(std::path::absolute(&corpus).unwrap_or(corpus));
        scenario.source_endpoint = None;
    }
    if let Some(dir) = args.templates {
        scenario.templates_dir = Some(std::path::absolute(&dir).unwrap_or(dir));
    }
    match (args.backend, &scenario.backend) {
        (Some(BackendKind::Mock), BackendSpec::Http(_)) => scenario.backend = BackendSpec::default(),
        (Some(BackendKind::Http), BackendSpec::Mock { .. }) => {
            let endpoint = args.endpoint.clone().ok_or_else(|| {
                Failure::Validation("--backend http needs --endpoint or an http [backend] table".into())
            })?;
            scenario.backend = BackendSpec::Http(HttpBackendConfig::new(endpoint));
        }
        _ => {}
    }
    if let (Some(endpoint), BackendSpec::Http(http)) = (args.endpoint, &mut scenario.backend) {
        http.endpoint = endpoint;
    }

    let result = scenario.run(args.mode.map(RagMode::from), args.seed)?;
    write_run(&result, &args.out)?;
    info!(
        "{} threads, {} replies written to {}",
        result.top_level_count(),
        result.reply_count(),
        args.out.display()
    );
    println!(
        "{}: mode {}, {} personas, {} threads, {} replies",
        result.config.community.scenario_name,
        result.config.rag_mode,
        result.personas.len(),
        result.top_level_count(),
        result.reply_count()
    );
    match result.aborted {
        Some(reason) => Err(Failure::Runtime(format!("run aborted: {reason}"))),
        None => Ok(()),
    }
}

fn corpus_ingest(args: IngestArgs) -> CmdResult {
    if args.check {
        let report = check_corpus(&args.input)?;
        for failure in &report.failures {
            eprintln!("error: {failure}");
        }
        if report.indexed == 0 {
            eprintln!("warning: 0 articles indexed");
        }
        println!("{} articles indexed", report.indexed);
        if !report.failures.is_empty() {
            return Err(Failure::Validation(format!("{} malformed files", report.failures.len())));
        }
        return Ok(());
    }
    let index = ingest_corpus(&args.input)?;
    if index.is_empty() {
        eprintln!("warning: 0 articles indexed");
    }
    println!("{} articles indexed", index.len());
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> CmdResult {
    let depth = u8::try_from(args.depth)
        .ok()
        .filter(|d| *d <= 6)
        .ok_or(Error::DepthOutOfRange(args.depth))?;
    let config = match &args.config {
        Some(path) => LexRankConfig::load(path)?,
        None => LexRankConfig::default(),
    };
    let article = read_article(&args.article)?;
    let budget = budget_for(depth, article.l())?;
    let summary = summarize(&article, depth, &config)?;
    if let Some(diagnostic) = &summary.diagnostic {
        eprintln!("warning: {diagnostic}");
    }
    info!("depth {depth}: {:?} at {}%", budget.target, budget.percent);
    println!("{}", summary.text);
    Ok(())
}

fn eval_sheets(args: SheetArgs) -> CmdResult {
    let run = RunExport::load(&args.run)?;
    let seed = args.seed.unwrap_or(run.rng_seed);
    let sheets = match args.kind {
        Kind::Post => eval::make_post_sheets(
            &run,
            seed,
            args.replications.unwrap_or(eval::POST_REPLICATIONS),
        ),
        Kind::Thread => eval::make_thread_sheets(
            &run,
            seed,
            args.replications.unwrap_or(eval::THREAD_REPLICATIONS),
        ),
    };
    eval::write_sheets(&sheets, &args.out)?;
    let kind = match args.kind {
        Kind::Post => TargetKind::Post,
        Kind::Thread => TargetKind::Thread,
    };
    println!("{} {kind} sheets written to {}", sheets.len(), args.out.display());
    Ok(())
}

fn aggregate_cmd(args: AggregateArgs) -> CmdResult {
    let records = eval::load_ratings(&args.ratings)?;
    let rows = eval::aggregate(&records)?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Runtime(format!("{}: {e}", args.out.display())))?;
    let tables = eval::render_tables(&rows);
    write_file(&args.out.join("counts.csv"), &eval::counts_csv(&rows))?;
    write_file(&args.out.join("percentages.csv"), &eval::percentages_csv(&rows))?;
    write_file(&args.out.join("tables.txt"), &tables)?;
    print!("{tables}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::CorpusIngest(args) => corpus_ingest(args),
        Command::Summarize(args) => summarize_cmd(args),
        Command::EvalSheets(args) => eval_sheets(args),
        Command::Aggregate(args) => aggregate_cmd(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
