use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use cogcaptcha::bank::{load_bank, parameterization_count};
use cogcaptcha::harness::{run_trials, BankTarget, BotStrategy, Target, TrialConfig, DEFAULT_DICTIONARY};
use cogcaptcha::stats::Rounding;
use cogcaptcha::survey::{export_report, parse_csv, ReportOptions};
use cogcaptcha::{Category, QuestionBank};
use cogcaptcha_service::{http, HttpTarget, ServiceConfig};

#[derive(Parser)]
#[command(name = "cogcaptcha", version, about = "Cognitive-question CAPTCHA service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Question bank tools.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Run a simulated attacker against a bank or a running service.
    Botsim(BotsimArgs),
    /// Survey analytics.
    Survey {
        #[command(subcommand)]
        command: SurveyCommand,
    },
}

#[derive(Subcommand)]
enum BankCommand {
    /// Load a bank file and report what it holds.
    Validate { path: PathBuf },
}

#[derive(Subcommand)]
enum SurveyCommand {
    /// Build the report bundle from a respondent CSV.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = RoundingArg::HalfUp)]
        rounding: RoundingArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    HalfUp,
    Truncate,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Replay,
    Combiner,
}

#[derive(clap::Args)]
struct BotsimArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// `bank:<path>` (or `bank:default`) or `url:<host:port>`.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    warmup: u64,
    #[arg(long, default_value_t = 3)]
    attempts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to these categories; repeatable.
    #[arg(long = "category")]
    categories: Vec<Category>,
    #[arg(long)]
    api_key: Option<String>,
    #[arg(long)]
    wall_clock: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let config = match config {
                Some(path) => ServiceConfig::load(&path)?,
                None => {
                    let mut c = ServiceConfig::default();
                    c.apply_env(|k| std::env::var(k).ok())?;
                    c.validate()?;
                    c
                }
            };
            tokio::runtime::Runtime::new()?.block_on(http::serve(config))
        }
        Command::Bank {
            command: BankCommand::Validate { path },
        } => {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let bank = load_bank(&bytes)?;
            println!("bank {} ok: {} templates", bank.version(), bank.len());
            for c in Category::ALL {
                for t in bank.templates(c) {
                    println!("  {c:<13} {:<28} parameterizations {}", t.id, parameterization_count(t));
                }
            }
            Ok(())
        }
        Command::Botsim(args) => botsim(args),
        Command::Survey {
            command: SurveyCommand::Analyze { input, out, rounding },
        } => {
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let dataset = parse_csv(&bytes)?;
            let options = ReportOptions {
                rounding: match rounding {
                    RoundingArg::HalfUp => Rounding::HalfUp,
                    RoundingArg::Truncate => Rounding::Truncate,
                },
                ..ReportOptions::default()
            };
            let report = export_report(&dataset, &out, &options)?;
            println!("{} respondents, report written to {}", report.respondents, out.display());
            Ok(())
        }
    }
}

fn botsim(args: BotsimArgs) -> anyhow::Result<()> {
    let mut strategy = match args.strategy {
        StrategyArg::Random => BotStrategy::random(DEFAULT_DICTIONARY),
        StrategyArg::Replay => BotStrategy::replay(DEFAULT_DICTIONARY),
        StrategyArg::Combiner => BotStrategy::combiner(),
    };
    let config = TrialConfig {
        trials: args.trials,
        warmup: args.warmup,
        attempts: args.attempts,
        seed: args.seed,
        categories: args.categories,
        measure_wall_clock: args.wall_clock,
    };
    let report = if let Some(spec) = args.target.strip_prefix("bank:") {
        let bank = if spec == "default" {
            QuestionBank::default_bank()
        } else {
            load_bank(&std::fs::read(spec).with_context(|| format!("reading {spec}"))?)?
        };
        let mut target = BankTarget::new(&bank, args.attempts);
        run_trials(&mut strategy, &mut target, &config)?
    } else if let Some(addr) = args.target.strip_prefix("url:") {
        let mut target: Box<dyn Target> = Box::new(HttpTarget::new(addr, args.api_key)?);
        run_trials(&mut strategy, target.as_mut(), &config)?
    } else {
        bail!("target must be bank:<path> or url:<addr>");
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    match args.out {
        Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", String::from_utf8(json)?),
    }
    Ok(())
}
