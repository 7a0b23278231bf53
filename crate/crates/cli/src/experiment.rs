//! Batched sweeps: mechanism x parameter-point x repetition cells with
//! mean and 95% confidence columns.
//!
//! Populations are seeded per repetition only, so every mechanism and every
//! sweep point of one repetition sees the same draw; curves are paired.

use std::fs;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use incentme_core::baselines::{greedy_bid_threshold, random_selection};
use incentme_core::oracle::{brute_force_optimal, MAX_BRUTE_FORCE_BIDDERS};
use incentme_core::sim::derive_seed;
use incentme_core::{
    generate_instance, hvm_run, simulate_execution, tvm_run, AuctionInstance, AuctionOutcome,
    PopulationConfig,
};

use crate::{emit, Cli, CmdResult, Failure, Format, MechanismArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Budget,
    Tfp,
    Bidders,
}

fn default_repetitions() -> usize {
    100
}

fn default_budget() -> f64 {
    2.0
}

#[derive(Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub population: PopulationConfig,
    pub sweep: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub mechanisms: Vec<MechanismArg>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Base budget, used when the sweep axis is not the budget.
    #[serde(default = "default_budget")]
    pub budget: f64,
    /// Base task-failure probability; outcomes are realized through it only
    /// on the tfp axis.
    #[serde(default)]
    pub tfp: f64,
}

/// One CSV row: a (mechanism, sweep point) cell aggregated over repetitions.
#[derive(Serialize)]
struct MetricsRow {
    mechanism: MechanismArg,
    sweep: SweepAxis,
    x: f64,
    repetitions: usize,
    ov_mean: f64,
    ov_ci95: f64,
    pov_mean: Option<f64>,
    pov_ci95: Option<f64>,
    payments_mean: f64,
    winners_mean: f64,
    tvm_evaluations_mean: f64,
    /// Informational; excluded from determinism comparisons.
    wall_time_ms: f64,
}

/// Sample mean and 95% Student-t confidence half-width.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

fn run_mechanism(
    mechanism: MechanismArg,
    inst: &AuctionInstance,
    jobs: usize,
    seed: u64,
) -> (AuctionOutcome, usize) {
    match mechanism {
        MechanismArg::Tvm => (tvm_run(inst, jobs), 1),
        MechanismArg::Hvm => {
            let (outcome, log) = hvm_run(inst, jobs);
            (outcome, log.tvm_evaluations)
        }
        // default threshold, budget-unaware: its value curve stays flat
        // across budget sweeps by construction
        MechanismArg::Greedy => (greedy_bid_threshold(inst, 1.0, false, jobs), 0),
        MechanismArg::Random => (random_selection(inst, seed), 0),
    }
}

pub fn cmd_experiment(cli: &Cli, path: &std::path::Path) -> CmdResult {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if config.sweep_values.is_empty() || config.mechanisms.is_empty() || config.repetitions == 0 {
        return Err(Failure::Input(anyhow::anyhow!(
            "sweep_values, mechanisms, and repetitions must be non-empty"
        )));
    }

    let master = config.population.rng_seed;
    let mut rows = Vec::new();
    for &mechanism in &config.mechanisms {
        for &x in &config.sweep_values {
            let mut ov = Vec::with_capacity(config.repetitions);
            let mut pov = Vec::with_capacity(config.repetitions);
            let mut payments = Vec::new();
            let mut winners = Vec::new();
            let mut evaluations = Vec::new();
            let started = Instant::now();
            for rep in 0..config.repetitions as u64 {
                let mut population = config.population.clone();
                population.rng_seed = derive_seed(master, rep);
                let budget = match config.sweep {
                    SweepAxis::Budget => x,
                    _ => config.budget,
                };
                if config.sweep == SweepAxis::Bidders {
                    population.bidder_count = x as usize;
                }
                let inst = generate_instance(&population, budget)
                    .context("generating experiment instance")?;
                let mech_seed = derive_seed(master ^ 0x6d65_6368, rep);
                let (outcome, evals) = run_mechanism(mechanism, &inst, cli.jobs, mech_seed);

                let tfp = match config.sweep {
                    SweepAxis::Tfp => x,
                    _ => config.tfp,
                };
                // realized through task failures, common seeds across x
                let value = if tfp > 0.0 {
                    simulate_execution(&outcome, &inst, tfp, derive_seed(master ^ 0x746670, rep))
                } else {
                    outcome.achieved_value
                };
                ov.push(value);
                if inst.len() <= MAX_BRUTE_FORCE_BIDDERS.min(20) {
                    let opt = brute_force_optimal(&inst).context("exact optimum")?;
                    if opt.opt_value > 0.0 {
                        pov.push(value / opt.opt_value);
                    }
                }
                payments.push(outcome.payments_total);
                winners.push(outcome.winners.len() as f64);
                evaluations.push(evals as f64);
            }
            let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
            let (ov_mean, ov_ci95) = mean_ci(&ov);
            let (pov_mean, pov_ci95) = if pov.len() == ov.len() {
                let (m, c) = mean_ci(&pov);
                (Some(m), Some(c))
            } else {
                (None, None)
            };
            rows.push(MetricsRow {
                mechanism,
                sweep: config.sweep,
                x,
                repetitions: config.repetitions,
                ov_mean,
                ov_ci95,
                pov_mean,
                pov_ci95,
                payments_mean: mean_ci(&payments).0,
                winners_mean: mean_ci(&winners).0,
                tvm_evaluations_mean: mean_ci(&evaluations).0,
                wall_time_ms,
            });
        }
    }

    match cli.format {
        Some(Format::Json) => emit(cli, &serde_json::to_string_pretty(&rows)?),
        _ => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                writer.serialize(row).context("writing csv")?;
            }
            let data = String::from_utf8(writer.into_inner().context("flushing csv")?)
                .context("csv utf-8")?;
            emit(cli, data.trim_end())
        }
    }
}
