//! Probe-count and wall-time comparison of the two budget searches, plus
//! thread-scaling of a single auction. Wall times are informational only;
//! probe counts and outcome equality are the reproducible columns.

use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use incentme_core::sim::derive_seed;
use incentme_core::{
    binary_search_budget, generate_instance, hvm_run, tvm_run, AuctionInstance, PopulationConfig,
};

use crate::{emit, Cli, CmdResult, Format};

#[derive(Serialize)]
struct BenchRow {
    /// "search" rows compare the two budget searches per bidder count;
    /// "scaling" rows time one auction across thread counts.
    section: &'static str,
    bidders: usize,
    jobs: usize,
    binary_evals: Option<usize>,
    interp_evals: Option<usize>,
    binary_ms: Option<f64>,
    interp_ms: Option<f64>,
    /// Times divided by the first row's bisection time, mirroring a
    /// hardware-independent presentation.
    binary_norm: Option<f64>,
    interp_norm: Option<f64>,
    wall_ms: Option<f64>,
    outcome_matches_jobs1: Option<bool>,
}

fn bench_instance(bidders: usize, seed: u64) -> Result<AuctionInstance, crate::Failure> {
    let config = PopulationConfig {
        sectors: 100,
        timesteps: 6,
        bidder_count: bidders,
        rng_seed: derive_seed(seed, bidders as u64),
        ..PopulationConfig::default()
    };
    Ok(generate_instance(&config, 0.005 * bidders as f64).context("generating bench instance")?)
}

pub fn cmd_bench(cli: &Cli, bidder_counts: &[usize], jobs_list: &[usize]) -> CmdResult {
    let mut rows = Vec::new();

    let mut base_ms = None;
    for &count in bidder_counts {
        let inst = bench_instance(count, cli.seed)?;
        let t0 = Instant::now();
        let (_, bisect) = binary_search_budget(&inst, cli.jobs);
        let binary_ms = t0.elapsed().as_secs_f64() * 1e3;
        let t1 = Instant::now();
        let (_, interp) = hvm_run(&inst, cli.jobs);
        let interp_ms = t1.elapsed().as_secs_f64() * 1e3;
        let base = *base_ms.get_or_insert(binary_ms);
        rows.push(BenchRow {
            section: "search",
            bidders: count,
            jobs: cli.jobs,
            binary_evals: Some(bisect.tvm_evaluations),
            interp_evals: Some(interp.tvm_evaluations),
            binary_ms: Some(binary_ms),
            interp_ms: Some(interp_ms),
            binary_norm: Some(binary_ms / base),
            interp_norm: Some(interp_ms / base),
            wall_ms: None,
            outcome_matches_jobs1: None,
        });
    }

    let scaling_bidders = bidder_counts.iter().copied().max().unwrap_or(1000);
    let inst = bench_instance(scaling_bidders, cli.seed)?;
    let reference = tvm_run(&inst, 1);
    for &jobs in jobs_list {
        let t0 = Instant::now();
        let outcome = tvm_run(&inst, jobs);
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        rows.push(BenchRow {
            section: "scaling",
            bidders: scaling_bidders,
            jobs,
            binary_evals: None,
            interp_evals: None,
            binary_ms: None,
            interp_ms: None,
            binary_norm: None,
            interp_norm: None,
            wall_ms: Some(wall_ms),
            outcome_matches_jobs1: Some(outcome == reference),
        });
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
