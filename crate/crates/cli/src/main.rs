use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use ctxlab::agent::{Stopping, StrategyConfig, ToolsetKind};
use ctxlab::corpus::{snapshot_stats, TokenCounter, TokenCounterConfig};
use ctxlab::experiment::{
    self, load_dataset, load_repo_context, workspace_dir, ExperimentError, IngestStatus,
    PolicySpec, RunConfig, RunOptions,
};
use ctxlab::retrieval::{Bm25Params, DEFAULT_WINDOW};
use ctxlab::Execution;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

/// Context retrieval experiments for repository-level code editing.
#[derive(Parser)]
#[command(name = "ctxlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export each instance's base commit into a content-addressed workspace.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Directory holding (bare) clones, named `owner__name`, `owner/name` or `name`.
        #[arg(long)]
        repos: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Extract entities, cache them and print per-workspace statistics.
    Index {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "approximate")]
        tokenizer: TokenCounterConfig,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run one retrieval strategy over a dataset.
    Run(RunArgs),
    /// Score completed runs against the gold patches.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Run directory (repeatable).
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Combine eval outputs (or row files) into one markdown table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// JSONL dataset of task instances.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "workspaces")]
    workspaces: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "bm25")]
    toolset: ToolsetKind,
    #[arg(long, default_value = "tc")]
    stopping: Stopping,
    /// Context-length threshold in tokens.
    #[arg(long, default_value_t = 500)]
    threshold: usize,
    #[arg(long, default_value_t = 25)]
    max_steps: usize,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = ctxlab::retrieval::DEFAULT_RESULT_LIMIT)]
    result_limit: usize,
    /// `scripted:<path>` or `remote` (CTXLAB_ENDPOINT, CTXLAB_API_KEY, CTXLAB_MODEL).
    #[arg(long, default_value = "remote")]
    policy: PolicySpec,
    /// `approximate` or `bpe:<merges file>`.
    #[arg(long, default_value = "approximate")]
    tokenizer: TokenCounterConfig,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Output root; each run gets its own hashed subdirectory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Unix seconds for the manifest; defaults to SOURCE_DATE_EPOCH, then now.
    #[arg(long)]
    timestamp: Option<u64>,
}

fn execution(workers: Option<usize>) -> Execution {
    workers.map_or(Execution::parallel(), Execution::with_workers)
}

fn timestamp(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok()?.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Ingest {
            data,
            repos,
            workers,
        } => ingest(&data, &repos, execution(workers)),
        Command::Index {
            data,
            tokenizer,
            window,
            workers,
        } => index(&data, &tokenizer, window, execution(workers)),
        Command::Run(args) => run(args),
        Command::Eval {
            data,
            runs,
            out,
            workers,
        } => {
            let dataset = load_dataset(&data.dataset)?;
            let summary =
                experiment::eval(&runs, &dataset, &data.workspaces, &out, execution(workers))?;
            for run in &summary.runs {
                let d = &run.diagnostics;
                eprintln!(
                    "{}: {} scored, {} failed runs, {} empty file gold, {} empty entity gold",
                    run.run_name,
                    run.gold.len(),
                    d.failed_runs.len(),
                    d.empty_gold_file.len(),
                    d.empty_gold_entity.len()
                );
            }
            print!("{}", std::fs::read_to_string(out.join("table.md"))?);
            Ok(Outcome::Done)
        }
        Command::Report { inputs, out } => {
            let table = experiment::report(&inputs)?;
            match out {
                Some(path) => std::fs::write(&path, table)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{table}"),
            }
            Ok(Outcome::Done)
        }
    }
}

fn ingest(data: &DataArgs, repos: &Path, exec: Execution) -> anyhow::Result<Outcome> {
    let dataset = load_dataset(&data.dataset)?;
    let report = experiment::ingest(&dataset, repos, &data.workspaces, exec)?;
    for (id, status) in &report.instances {
        if let IngestStatus::Unavailable(reason) = status {
            eprintln!("{id}: unavailable: {reason}");
        }
    }
    println!(
        "{} instance(s): {} new checkout(s), {} already present, {} unavailable",
        report.instances.len(),
        report.created,
        report.count(|s| *s == IngestStatus::AlreadyPresent),
        report.unavailable()
    );
    Ok(Outcome::Done)
}

fn index(
    data: &DataArgs,
    tokenizer: &TokenCounterConfig,
    window: usize,
    exec: Execution,
) -> anyhow::Result<Outcome> {
    let dataset = load_dataset(&data.dataset)?;
    let counter = TokenCounter::from_config(tokenizer)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut workspaces = Vec::new();
    for inst in &dataset.instances {
        let dir = workspace_dir(&data.workspaces, &inst.repo, &inst.base_commit);
        if seen.insert(dir.clone()) {
            workspaces.push((inst.repo.clone(), inst.base_commit.clone(), dir));
        }
    }
    let stats = exec.map(&workspaces, |(repo, commit, dir)| {
        let ctx = load_repo_context(dir, window, Bm25Params::default(), Execution::Sequential)?;
        let s = snapshot_stats(&ctx.snapshot, &counter);
        Ok::<_, ExperimentError>(serde_json::json!({
            "repo": repo,
            "base_commit": commit,
            "workspace": dir.display().to_string(),
            "files": s.file_count,
            "lines": s.line_count,
            "tokens": s.token_count,
            "entities": ctx.code_index.len(),
            "parse_failures": ctx.code_index.parse_failures().len(),
            "chunks": ctx.bm25.len(),
        }))
    });
    for (entry, (_, _, dir)) in stats.into_iter().zip(&workspaces) {
        match entry {
            Ok(json) => println!("{json}"),
            Err(e) => eprintln!("{}: {e}", dir.display()),
        }
    }
    Ok(Outcome::Done)
}

fn run(args: RunArgs) -> anyhow::Result<Outcome> {
    let strategy = StrategyConfig {
        toolset: args.toolset,
        stopping: args.stopping,
        context_threshold_tokens: args.threshold,
        max_steps: args.max_steps,
        top_k: args.top_k,
        result_limit: args.result_limit,
    };
    strategy.validate()?;
    let dataset = load_dataset(&args.data.dataset)?;
    let config = RunConfig {
        strategy,
        policy: args.policy,
        tokenizer: args.tokenizer,
        chunk_window: args.window,
        bm25: Bm25Params::default(),
    };
    let options = RunOptions {
        output_root: args.out,
        workspaces: args.data.workspaces,
        exec: execution(args.workers),
        timestamp: timestamp(args.timestamp),
        stop_after: None,
    };
    let summary = experiment::run(&dataset, &config, &options)?;
    for (id, err) in &summary.failures {
        eprintln!("{id}: failed: {err}");
    }
    println!("{}", summary.output_dir.display());
    let counts = &summary.manifest.instances;
    eprintln!(
        "{} of {} instance(s) succeeded",
        counts.succeeded, counts.total
    );
    Ok(if summary.failed_above_threshold() {
        Outcome::Partial
    } else {
        Outcome::Done
    })
}
