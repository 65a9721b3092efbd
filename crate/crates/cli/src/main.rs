use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sciwrite_lint_core::config::{self, Config};
use sciwrite_lint_core::eval::corpus::{generate_corpus, generate_matching_fixtures, load_json, save_json};
use sciwrite_lint_core::eval::degrade::{run_matching_benchmark, MatchingFixture, Scenario};
use sciwrite_lint_core::eval::inject::{run_injection, TexDocument};
use sciwrite_lint_core::pipeline::{self, CheckInput, Services, EXIT_USAGE};
use sciwrite_lint_core::render::{render_structured, render_terminal};
use sciwrite_lint_core::signals::SignalsFile;

const EXIT_HELP: &str = "\
Exit status:
  0  no errors (and no warnings when fail_on_warnings is set)
  1  at least one error
  2  warnings only, when fail_on_warnings is true (the default)
  3  usage or environment failure";

#[derive(Parser)]
#[command(name = "sciwrite-lint", version, about = "Verify the bibliography of a LaTeX manuscript and score its referencing", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lint a manuscript.
    Check(CheckArgs),
    /// Evaluation harness.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Terminal,
    Structured,
}

#[derive(Args)]
struct CheckArgs {
    /// Main `.tex` file.
    main: PathBuf,
    /// Bibliography file; defaults to the one named in the manuscript.
    #[arg(long)]
    bib: Option<PathBuf>,
    /// Replay recorded registry responses instead of querying the network.
    #[arg(long)]
    offline: bool,
    /// JSON file of externally computed signals.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "terminal")]
    format: Format,
    /// Config file; defaults to the nearest `.sciwrite-lint.toml` above the manuscript.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON map from bibliography key to a local full-text file.
    #[arg(long)]
    pdf_manifest: Option<PathBuf>,
    /// Cache directory; overrides the config file and SCIWRITE_LINT_CACHE.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Inject fake citations and broken cross-references and measure recall.
    Inject {
        /// Corpus JSON; a seeded synthetic corpus is generated when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 10)]
        per_doc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the metadata degradation benchmark for the matching engine.
    Matching {
        /// Fixture JSON; seeded synthetic fixtures are generated when absent.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = sciwrite_lint_core::matching::DEFAULT_MATCH_THRESHOLD)]
        threshold: f64,
    },
    /// Write the synthetic corpus and matching fixtures as JSON.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(args: &CheckArgs) -> Result<Config> {
    let path = match &args.config {
        Some(p) => Some(p.clone()),
        None => config::discover(args.main.parent().unwrap_or(Path::new("."))),
    };
    Ok(match path {
        Some(p) => Config::load(&p)?,
        None => Config::default(),
    })
}

fn check(args: CheckArgs) -> Result<i32> {
    let config = load_config(&args)?;
    let signals = args.signals.as_deref().map(SignalsFile::load).transpose()?;
    let pdf_manifest = match &args.pdf_manifest {
        Some(p) => pipeline::load_pdf_manifest(p)?,
        None => Default::default(),
    };
    let input = CheckInput {
        main: args.main.clone(),
        bib: args.bib.clone(),
        signals,
        pdf_manifest,
    };
    let cache = args.cache_dir.clone().unwrap_or_else(|| config.resolve_cache_dir());
    let services = Services::from_cache(&config, &cache, args.offline);
    let outcome = pipeline::run_check(&input, &config, &services)?;
    let text = match args.format {
        Format::Terminal => render_terminal(&outcome.findings, &outcome.report),
        Format::Structured => render_structured(&outcome.findings, &outcome.references, &outcome.report),
    };
    print!("{text}");
    Ok(outcome.exit_code)
}

fn eval(cmd: EvalCommand) -> Result<i32> {
    match cmd {
        EvalCommand::Inject {
            corpus,
            docs,
            per_doc,
            seed,
        } => {
            let corpus: Vec<TexDocument> = match corpus {
                Some(p) => load_json(&p)?,
                None => generate_corpus(docs, seed),
            };
            let (injected, report) = run_injection(&corpus, per_doc, seed);
            let out = serde_json::json!({
                "documents": corpus.len(),
                "skipped": injected.skipped,
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        EvalCommand::Matching {
            fixtures,
            count,
            seed,
            threshold,
        } => {
            let fixtures: Vec<MatchingFixture> = match fixtures {
                Some(p) => load_json(&p)?,
                None => generate_matching_fixtures(count, seed),
            };
            let report = run_matching_benchmark(&fixtures, &Scenario::ALL, threshold, seed);
            let out = serde_json::json!({
                "fixtures": fixtures.len(),
                "scenarios": report.scenarios,
                "mean_scenarios_correct": report.mean_scenarios_correct,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        EvalCommand::Generate { out, count, seed } => {
            std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            save_json(&out.join("corpus.json"), &generate_corpus(count, seed))?;
            save_json(&out.join("matching.json"), &generate_matching_fixtures(count, seed))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Check(args) => check(args),
        Command::Eval(cmd) => eval(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sciwrite-lint: {e:#}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
