use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prophetlab::experiment::{self, Baseline, ExperimentConfig, InstanceSource, Mode, OrderPolicy};
use prophetlab::generate::{generate_instance, GeneratorSpec};
use prophetlab::suite::Lemma;

/// Prophet and secretary simulations and correlation-gap checks.
#[derive(Parser)]
#[command(name = "prophetlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the matroid prophet algorithm.
    Prophet(RunArgs),
    /// Simulate the subadditive secretary reduction.
    Secretary(SecretaryArgs),
    /// Lemma and inequality checks.
    Gaps {
        #[command(subcommand)]
        command: GapsCommand,
    },
    /// Print a generated instance as JSON.
    Gen {
        /// Generator spec, e.g. "coverage n=8 sets=5".
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GapsCommand {
    /// Check one lemma (or all) on generated instances.
    Verify {
        #[arg(long)]
        lemma: Option<Lemma>,
        #[arg(long, default_value_t = experiment::DEFAULT_GAPS_N)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        instances: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for CSV, summary, verdicts and witnesses.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the witness on failure when no --out is given.
        #[arg(long, default_value = "witness.json")]
        witness: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "generate")]
    instance: Option<PathBuf>,
    /// Generator spec used instead of a file.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// identity, reverse, random, or a comma-separated list.
    #[arg(long)]
    order: Option<String>,
    /// Directory for trials.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SecretaryArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    alpha_override: Option<f64>,
    #[arg(long, default_value = "sample-greedy")]
    baseline: String,
}

fn parse_order(text: Option<&str>, default: OrderPolicy) -> Result<OrderPolicy> {
    Ok(match text {
        None => default,
        Some("identity") => OrderPolicy::Identity,
        Some("reverse") => OrderPolicy::Reverse,
        Some("random") => OrderPolicy::Random,
        Some(list) => OrderPolicy::List(
            list.split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("invalid order {list:?}"))?,
        ),
    })
}

fn config_from(mode: Mode, args: &RunArgs, default_order: OrderPolicy) -> Result<ExperimentConfig> {
    let instance = match (&args.instance, &args.generate) {
        (Some(path), None) => InstanceSource::File(path.clone()),
        (None, Some(spec)) => InstanceSource::Generator {
            spec: spec.parse::<GeneratorSpec>()?,
            seed: args.instance_seed,
        },
        _ => bail!("give exactly one of --instance or --generate"),
    };
    let mut config = ExperimentConfig::new(mode, args.trials, args.seed);
    config.instance = Some(instance);
    config.order = parse_order(args.order.as_deref(), default_order)?;
    config.output_dir = args.out.clone();
    Ok(config)
}

enum Outcome {
    Pass,
    Fail,
}

fn report(config: &ExperimentConfig) -> Result<Outcome> {
    let artifacts = experiment::execute(config)?;
    if let Some(dir) = &config.output_dir {
        experiment::write_artifacts(&artifacts, dir)?;
    }
    print!(
        "{}",
        artifacts.verdicts_json.as_deref().unwrap_or(&artifacts.summary_json)
    );
    Ok(if artifacts.summary.passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Prophet(args) => report(&config_from(Mode::Prophet, &args, OrderPolicy::Identity)?),
        Command::Secretary(args) => {
            let mut config = config_from(Mode::Secretary, &args.run, OrderPolicy::Random)?;
            config.alpha_override = args.alpha_override;
            config.baseline = match args.baseline.as_str() {
                "sample-greedy" => Baseline::SampleGreedy,
                other => bail!("unknown baseline {other:?}; available: sample-greedy"),
            };
            report(&config)
        }
        Command::Gaps {
            command:
                GapsCommand::Verify {
                    lemma,
                    n,
                    instances,
                    seed,
                    out,
                    witness,
                },
        } => {
            let mut config = ExperimentConfig::new(Mode::Gaps, instances, seed);
            config.lemma = lemma;
            config.n = Some(n);
            config.output_dir = out.clone();
            let artifacts = experiment::execute(&config)?;
            match &out {
                Some(dir) => experiment::write_artifacts(&artifacts, dir)?,
                None => {
                    if let Some(w) = &artifacts.witness_json {
                        std::fs::write(&witness, w).with_context(|| format!("writing {}", witness.display()))?;
                    }
                }
            }
            print!("{}", artifacts.verdicts_json.as_deref().unwrap_or_default());
            Ok(if artifacts.summary.passed {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
        Command::Gen { spec, seed, out } => {
            let instance = generate_instance(&spec.parse()?, seed)?;
            let text = serde_json::to_string_pretty(&instance)? + "\n";
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(Outcome::Pass)
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut parsed: ExperimentConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            if out.is_some() {
                parsed.output_dir = out;
            }
            report(&parsed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
