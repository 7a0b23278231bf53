//! `incentme`: run auctions, sweep experiments, verify mechanism properties,
//! and benchmark the budget search from the command line.
//!
//! Exit codes: 0 success, 1 a verified property failed, 2 bad input.

mod bench;
mod experiment;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use incentme_core::baselines::{greedy_bid_threshold, random_selection};
use incentme_core::oracle::{property_battery, truthfulness_sweep, Mechanism, MAX_SWEEP_BIDDERS};
use incentme_core::sim::derive_seed;
use incentme_core::{
    generate_instance, hvm_run, tvm_run, AuctionInstance, AuctionOutcome, PopulationConfig,
    SearchLog,
};

#[derive(Parser)]
#[command(name = "incentme", version, about = "Budget-feasible crowdsensing auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for marginal evaluation and payment runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Master RNG seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; defaults to json for run/verify, csv for experiment/bench.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize, Debug)]
#[serde(rename_all = "lowercase")]
pub enum MechanismArg {
    Tvm,
    Hvm,
    Greedy,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run one auction on an instance file and print the outcome.
    Run {
        /// Instance JSON file.
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "tvm")]
        mechanism: MechanismArg,
        /// Include the budget-search probe log (hvm only).
        #[arg(long)]
        emit_search_log: bool,
        /// Bid-to-marginal-value acceptance threshold for the greedy baseline.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Make the greedy baseline skip bidders that no longer fit the
        /// budget; by default it ignores the budget entirely.
        #[arg(long)]
        clamp_budget: bool,
    },
    /// Run a mechanism x parameter sweep from a config file; report CSV.
    Experiment {
        /// Config JSON: population fields plus sweep, sweep_values,
        /// mechanisms, repetitions, budget, tfp.
        config: PathBuf,
    },
    /// Check mechanism properties on an instance file or random instances.
    Verify {
        /// Instance JSON file; omit to use --random.
        instance: Option<PathBuf>,
        /// Verify this many seeded synthetic instances instead.
        #[arg(long)]
        random: Option<usize>,
    },
    /// Compare the interpolation and bisection budget searches, and thread
    /// scaling, on synthetic instances.
    Bench {
        /// Bidder counts for the search comparison.
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 200, 300, 400, 500, 600, 700, 800, 900, 1000])]
        bidder_counts: Vec<usize>,
        /// Thread counts for the scaling comparison.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4])]
        jobs_list: Vec<usize>,
    },
    /// Write a synthetic instance file.
    Generate {
        /// Population config JSON; defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        budget: f64,
    },
}

/// Input problems exit 2; verified property failures exit 1.
pub enum Failure {
    Input(anyhow::Error),
    Property(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(msg)) => {
            eprintln!("property failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Run {
            instance,
            mechanism,
            emit_search_log,
            theta,
            clamp_budget,
        } => cmd_run(cli, instance, *mechanism, *emit_search_log, *theta, *clamp_budget),
        Command::Experiment { config } => experiment::cmd_experiment(cli, config),
        Command::Verify { instance, random } => cmd_verify(cli, instance.as_deref(), *random),
        Command::Bench {
            bidder_counts,
            jobs_list,
        } => bench::cmd_bench(cli, bidder_counts, jobs_list),
        Command::Generate { config, budget } => cmd_generate(cli, config.as_deref(), *budget),
    }
}

fn load_instance(path: &std::path::Path) -> Result<AuctionInstance, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst: AuctionInstance =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(inst)
}

fn emit(cli: &Cli, content: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{content}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct RunReport {
    mechanism: MechanismArg,
    outcome: AuctionOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_log: Option<SearchLog>,
}

fn cmd_run(
    cli: &Cli,
    path: &std::path::Path,
    mechanism: MechanismArg,
    emit_search_log: bool,
    theta: f64,
    clamp_budget: bool,
) -> CmdResult {
    let inst = load_instance(path)?;
    let (outcome, search_log) = match mechanism {
        MechanismArg::Tvm => (tvm_run(&inst, cli.jobs), None),
        MechanismArg::Hvm => {
            let (outcome, log) = hvm_run(&inst, cli.jobs);
            (outcome, emit_search_log.then_some(log))
        }
        MechanismArg::Greedy => (
            greedy_bid_threshold(&inst, theta, clamp_budget, cli.jobs),
            None,
        ),
        MechanismArg::Random => (random_selection(&inst, cli.seed), None),
    };
    let report = RunReport {
        mechanism,
        outcome,
        search_log,
    };
    emit(cli, &serde_json::to_string_pretty(&report)?)
}

/// Synthetic instances for `verify --random`: small enough for the exact
/// oracle and the misreport sweep.
fn verify_instance(seed: u64, index: u64) -> Result<AuctionInstance, Failure> {
    let config = PopulationConfig {
        sectors: 16,
        timesteps: 4,
        bidder_count: 8,
        rng_seed: derive_seed(seed, index),
        ..PopulationConfig::default()
    };
    let budget = 0.5 + 0.25 * (index % 10) as f64;
    Ok(generate_instance(&config, budget).context("generating verify instance")?)
}

fn cmd_verify(cli: &Cli, path: Option<&std::path::Path>, random: Option<usize>) -> CmdResult {
    let instances: Vec<AuctionInstance> = match (path, random) {
        (Some(p), None) => vec![load_instance(p)?],
        (None, Some(n)) => (0..n as u64)
            .map(|i| verify_instance(cli.seed, i))
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(Failure::Input(anyhow::anyhow!(
                "give an instance file or --random N, not both or neither"
            )))
        }
    };

    let mut reports = Vec::with_capacity(instances.len());
    let mut hard_failures = 0usize;
    for inst in &instances {
        let mut report = property_battery(inst, cli.jobs);
        if inst.len() <= MAX_SWEEP_BIDDERS && inst.bidders.iter().all(|b| b.bid.true_cost.is_some())
        {
            for (mechanism, hard) in [(Mechanism::Tvm, true), (Mechanism::Hvm, false)] {
                let sweep = truthfulness_sweep(inst, mechanism, 25, cli.jobs)
                    .context("misreport sweep")?;
                let gain = sweep.max_violation();
                report.checks.push(incentme_core::oracle::PropertyCheck {
                    name: format!("{mechanism:?} truthfulness (25-point misreport grid)")
                        .to_lowercase(),
                    passed: gain <= 1e-9,
                    hard,
                    detail: format!("max utility gain from misreporting: {gain:.3e}"),
                });
            }
        }
        hard_failures += report
            .checks
            .iter()
            .filter(|c| c.hard && !c.passed)
            .count();
        reports.push(report);
    }

    let mut table = String::new();
    for (i, report) in reports.iter().enumerate() {
        if reports.len() > 1 {
            let _ = writeln!(table, "instance {i}:");
        }
        for check in &report.checks {
            let verdict = if check.passed { "PASS" } else { "FAIL" };
            let kind = if check.hard { "hard" } else { "info" };
            let _ = writeln!(table, "  {verdict} [{kind}] {} — {}", check.name, check.detail);
        }
    }
    let _ = writeln!(
        table,
        "{} instance(s), {hard_failures} hard failure(s)",
        reports.len()
    );

    match cli.format {
        Some(Format::Json) => emit(cli, &serde_json::to_string_pretty(&reports)?)?,
        _ => emit(cli, table.trim_end())?,
    }
    if hard_failures > 0 {
        return Err(Failure::Property(format!(
            "{hard_failures} hard property check(s) failed"
        )));
    }
    Ok(())
}

fn cmd_generate(cli: &Cli, config: Option<&std::path::Path>, budget: f64) -> CmdResult {
    let mut population: PopulationConfig = match config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PopulationConfig::default(),
    };
    if cli.seed != 0 {
        population.rng_seed = cli.seed;
    }
    let inst = generate_instance(&population, budget).context("generating instance")?;
    emit(cli, &serde_json::to_string(&inst)?)
}
