//! Synthetic bidder populations, mobility-trace ingestion, and task-failure
//! realization.
//!
//! The default population emulates vehicles reporting from a square sector
//! grid: each bidder takes one trip of Poisson-distributed length along a
//! nearest-neighbor random walk, and its per-timestep position is smeared
//! with a one-cell Gaussian to model uncertain mobility. Bids are Gaussian,
//! truncated to stay positive, with the private cost set equal to the bid.

use std::io::Read;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_instance, AuctionInstance, Bid, Bidder, GridSpec, MobilityProfile, ModelError,
    ValueMatrix,
};
use crate::value::{total_value, CoverageState};

/// Positional uncertainty of the walk, in grid cells.
const WALK_SIGMA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid population config: {0}")]
    InvalidConfig(String),
    #[error("sector count {0} is not a perfect square; the grid walk needs one")]
    NotSquare(usize),
    #[error("trace row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("trace rows must be sorted by (participant_id, timestep); row {row} is out of order")]
    UnsortedTrace { row: usize },
    #[error("no visits recorded; sector weights are undefined")]
    ZeroVisits,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Knobs for synthetic population generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    /// Sector count; must be a perfect square (a side x side grid).
    pub sectors: usize,
    pub timesteps: usize,
    pub bidder_count: usize,
    /// Mean trip length, in timesteps (Poisson).
    pub trip_duration_mean: f64,
    /// Mean delay before a trip starts, in timesteps (Poisson).
    pub bid_gap_mean: f64,
    pub bid_mean: f64,
    pub bid_sd: f64,
    pub rng_seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            sectors: 400,
            timesteps: 12,
            bidder_count: 100,
            trip_duration_mean: 6.0,
            bid_gap_mean: 3.0,
            bid_mean: 0.5,
            bid_sd: 0.15,
            rng_seed: 0,
        }
    }
}

impl PopulationConfig {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.sectors, self.timesteps)
    }

    fn check(&self) -> Result<usize, SimError> {
        if self.sectors == 0 || self.timesteps == 0 || self.bidder_count == 0 {
            return Err(SimError::InvalidConfig(
                "sectors, timesteps, and bidder_count must be positive".into(),
            ));
        }
        if !(self.trip_duration_mean > 0.0) || !(self.bid_gap_mean > 0.0) {
            return Err(SimError::InvalidConfig(
                "trip_duration_mean and bid_gap_mean must be positive".into(),
            ));
        }
        if !(self.bid_mean > 0.01) || !(self.bid_sd >= 0.0) {
            return Err(SimError::InvalidConfig(
                "bid_mean must exceed the 0.01 truncation floor and bid_sd be non-negative".into(),
            ));
        }
        grid_side(self.sectors)
    }
}

fn grid_side(sectors: usize) -> Result<usize, SimError> {
    let side = (sectors as f64).sqrt().round() as usize;
    if side * side == sectors {
        Ok(side)
    } else {
        Err(SimError::NotSquare(sectors))
    }
}

/// splitmix64; decorrelates per-bidder streams from (seed, id).
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn bidder_rng(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, id))
}

/// Decorrelated child seed for (master seed, cell index) pairs, so batched
/// experiment cells are reproducible independently of scheduling order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master, index)
}

/// Discrete Gaussian kernel centered on `(row, col)`, truncated at three
/// sigma and normalized to sum 1 over the in-grid cells.
fn smear(probs: &mut [f64], grid: GridSpec, side: usize, row: usize, col: usize, t: usize, sigma: f64) {
    if sigma == 0.0 {
        probs[grid.idx(row * side + col, t)] = 1.0;
        return;
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut weights = Vec::new();
    let mut total = 0.0;
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            let (r, c) = (row as isize + dr, col as isize + dc);
            if r < 0 || c < 0 || r >= side as isize || c >= side as isize {
                continue;
            }
            let d2 = (dr * dr + dc * dc) as f64;
            let w = (-d2 / (2.0 * sigma * sigma)).exp();
            total += w;
            weights.push((r as usize * side + c as usize, w));
        }
    }
    for (sector, w) in weights {
        probs[grid.idx(sector, t)] += w / total;
    }
}

/// Generates the bidder side of an instance: bids plus mobility profiles.
/// A pure function of the config; per-bidder streams are independent.
pub fn generate_population(config: &PopulationConfig) -> Result<Vec<Bidder>, SimError> {
    let side = config.check()?;
    let grid = config.grid();
    let trip = Poisson::new(config.trip_duration_mean)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let gap = Poisson::new(config.bid_gap_mean)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;

    let mut bidders = Vec::with_capacity(config.bidder_count);
    for id in 0..config.bidder_count as u64 {
        let mut rng = bidder_rng(config.rng_seed, id);
        let duration = (trip.sample(&mut rng) as usize).max(1);
        let start_t = (gap.sample(&mut rng) as usize).min(config.timesteps - 1);
        let (mut row, mut col) = (rng.gen_range(0..side), rng.gen_range(0..side));

        let mut probs = vec![0.0; grid.cells()];
        let end_t = (start_t + duration).min(config.timesteps);
        for t in start_t..end_t {
            smear(&mut probs, grid, side, row, col, t, WALK_SIGMA);
            // step to a uniformly chosen in-grid neighbor
            let mut moves = Vec::with_capacity(4);
            if row > 0 {
                moves.push((row - 1, col));
            }
            if row + 1 < side {
                moves.push((row + 1, col));
            }
            if col > 0 {
                moves.push((row, col - 1));
            }
            if col + 1 < side {
                moves.push((row, col + 1));
            }
            (row, col) = moves[rng.gen_range(0..moves.len())];
        }

        let bid = if config.bid_sd == 0.0 {
            config.bid_mean
        } else {
            let normal = Normal::new(config.bid_mean, config.bid_sd)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            loop {
                let x = normal.sample(&mut rng);
                if x > 0.01 {
                    break x;
                }
            }
        };
        bidders.push(Bidder {
            bid: Bid::with_cost(id, bid, bid),
            profile: MobilityProfile::new(id, probs),
        });
    }
    Ok(bidders)
}

/// Full synthetic instance: population, visit-share sector weights, budget.
pub fn generate_instance(config: &PopulationConfig, budget: f64) -> Result<AuctionInstance, SimError> {
    let bidders = generate_population(config)?;
    let profiles: Vec<&MobilityProfile> = bidders.iter().map(|b| &b.profile).collect();
    let values = sector_weights_from_profiles(&profiles, config.grid())?;
    Ok(validate_instance(AuctionInstance {
        grid: config.grid(),
        values,
        bidders,
        budget,
    })?)
}

/// One observation of a participant's position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub participant_id: u64,
    pub timestep: usize,
    pub sector_id: usize,
}

/// Reads `participant_id,timestep,sector_id` CSV rows and checks ordering
/// and ranges against the grid.
pub fn read_trace(reader: impl Read, grid: GridSpec) -> Result<Vec<TraceRow>, SimError> {
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut csv_reader = csv::Reader::from_reader(reader);
    for (i, record) in csv_reader.deserialize().enumerate() {
        let row: TraceRow = record?;
        if row.sector_id >= grid.sectors || row.timestep >= grid.timesteps {
            return Err(SimError::MalformedRow {
                row: i,
                reason: format!(
                    "sector {} / timestep {} outside a {}x{} grid",
                    row.sector_id, row.timestep, grid.sectors, grid.timesteps
                ),
            });
        }
        if let Some(prev) = rows.last() {
            let before = (prev.participant_id, prev.timestep);
            let here = (row.participant_id, row.timestep);
            if here <= before {
                return Err(SimError::UnsortedTrace { row: i });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Turns observations into mobility profiles: unit mass on each observed
/// sector, blurred with a Gaussian of `smoothing_sigma` cells. Timesteps
/// without an observation stay all-zero.
pub fn ingest_trace(
    rows: &[TraceRow],
    grid: GridSpec,
    smoothing_sigma: f64,
) -> Result<Vec<MobilityProfile>, SimError> {
    let side = if smoothing_sigma > 0.0 {
        grid_side(grid.sectors)?
    } else {
        0
    };
    let mut profiles: Vec<MobilityProfile> = Vec::new();
    for row in rows {
        if profiles.last().map(|p| p.participant_id) != Some(row.participant_id) {
            profiles.push(MobilityProfile::new(
                row.participant_id,
                vec![0.0; grid.cells()],
            ));
        }
        let probs = &mut profiles.last_mut().unwrap().probs;
        if smoothing_sigma == 0.0 {
            probs[grid.idx(row.sector_id, row.timestep)] = 1.0;
        } else {
            smear(
                probs,
                grid,
                side,
                row.sector_id / side,
                row.sector_id % side,
                row.timestep,
                smoothing_sigma,
            );
        }
    }
    Ok(profiles)
}

/// Sector weights proportional to observed visit counts, constant across
/// timesteps; each timestep's weights sum to 1.
pub fn sector_weights_from_trace(rows: &[TraceRow], grid: GridSpec) -> Result<ValueMatrix, SimError> {
    let mut visits = vec![0.0; grid.sectors];
    for row in rows {
        visits[row.sector_id] += 1.0;
    }
    weights_from_visits(&visits, grid)
}

/// Same weights derived from probability mass instead of discrete counts.
pub fn sector_weights_from_profiles(
    profiles: &[&MobilityProfile],
    grid: GridSpec,
) -> Result<ValueMatrix, SimError> {
    let mut visits = vec![0.0; grid.sectors];
    for p in profiles {
        for sector in 0..grid.sectors {
            for t in 0..grid.timesteps {
                visits[sector] += p.probs[grid.idx(sector, t)];
            }
        }
    }
    weights_from_visits(&visits, grid)
}

fn weights_from_visits(visits: &[f64], grid: GridSpec) -> Result<ValueMatrix, SimError> {
    let total: f64 = visits.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::ZeroVisits);
    }
    let mut values = vec![0.0; grid.cells()];
    for sector in 0..grid.sectors {
        let share = visits[sector] / total;
        for t in 0..grid.timesteps {
            values[grid.idx(sector, t)] = share;
        }
    }
    Ok(ValueMatrix::new(values))
}

/// Drops each winner independently with probability `tfp` and returns the
/// value covered by the survivors. Deterministic given the seed.
pub fn simulate_execution(
    outcome: &crate::model::AuctionOutcome,
    instance: &AuctionInstance,
    tfp: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = CoverageState::empty(instance.grid);
    for &id in &outcome.winners {
        let survives = rng.gen::<f64>() >= tfp;
        if survives {
            state
                .insert(&instance.bidder(id).expect("winner is a bidder").profile)
                .expect("winners are distinct");
        }
    }
    total_value(&instance.values, &state).expect("dimensions match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ROW_SUM_TOL;
    use crate::tvm::tvm_run;

    fn small_config() -> PopulationConfig {
        PopulationConfig {
            sectors: 25,
            timesteps: 6,
            bidder_count: 40,
            rng_seed: 42,
            ..PopulationConfig::default()
        }
    }

    #[test]
    fn generated_population_satisfies_profile_invariants() {
        let config = small_config();
        let bidders = generate_population(&config).unwrap();
        assert_eq!(bidders.len(), 40);
        let grid = config.grid();
        for b in &bidders {
            assert!(b.bid.bid > 0.01 && b.bid.bid < 1.5);
            assert_eq!(b.bid.true_cost, Some(b.bid.bid));
            for t in 0..grid.timesteps {
                let sum: f64 = (0..grid.sectors).map(|i| b.profile.probs[grid.idx(i, t)]).sum();
                assert!(sum <= 1.0 + ROW_SUM_TOL, "row sum {sum}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let config = small_config();
        assert_eq!(
            generate_population(&config).unwrap(),
            generate_population(&config).unwrap()
        );
    }

    #[test]
    fn long_trips_are_truncated_at_the_horizon() {
        let config = PopulationConfig {
            trip_duration_mean: 500.0,
            ..small_config()
        };
        // must not panic or write outside the grid
        let bidders = generate_population(&config).unwrap();
        assert_eq!(bidders.len(), 40);
    }

    #[test]
    fn zero_spread_makes_all_bids_the_mean() {
        let config = PopulationConfig {
            bid_sd: 0.0,
            ..small_config()
        };
        for b in generate_population(&config).unwrap() {
            assert_eq!(b.bid.bid, 0.5);
        }
    }

    #[test]
    fn non_square_sector_count_is_rejected() {
        let config = PopulationConfig {
            sectors: 10,
            ..small_config()
        };
        assert!(matches!(
            generate_population(&config),
            Err(SimError::NotSquare(10))
        ));
    }

    #[test]
    fn trace_ingestion_with_zero_sigma_places_unit_mass() {
        let grid = GridSpec::new(9, 3);
        let rows = vec![
            TraceRow { participant_id: 1, timestep: 0, sector_id: 4 },
            TraceRow { participant_id: 1, timestep: 2, sector_id: 5 },
            TraceRow { participant_id: 3, timestep: 1, sector_id: 0 },
        ];
        let profiles = ingest_trace(&rows, grid, 0.0).unwrap();
        assert_eq!(profiles.len(), 2);
        assert_eq!(profiles[0].probs[grid.idx(4, 0)], 1.0);
        assert_eq!(profiles[0].probs[grid.idx(5, 2)], 1.0);
        // timestep 1 has no observation for participant 1
        assert!((0..9).all(|s| profiles[0].probs[grid.idx(s, 1)] == 0.0));
    }

    #[test]
    fn trace_ingestion_with_blur_spreads_symmetric_unit_mass() {
        let grid = GridSpec::new(9, 1);
        let rows = vec![TraceRow { participant_id: 0, timestep: 0, sector_id: 4 }];
        let profiles = ingest_trace(&rows, grid, 1.0).unwrap();
        let p = &profiles[0].probs;
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // center cell (1,1) of the 3x3 grid carries the most mass, corners equal
        assert!(p[4] > p[1]);
        assert_eq!(p[0], p[8]);
        assert_eq!(p[2], p[6]);
    }

    #[test]
    fn empty_trace_gives_no_profiles() {
        let grid = GridSpec::new(4, 2);
        assert!(ingest_trace(&[], grid, 1.0).is_err() || ingest_trace(&[], grid, 0.0).unwrap().is_empty());
        assert!(ingest_trace(&[], grid, 0.0).unwrap().is_empty());
    }

    #[test]
    fn unsorted_trace_is_rejected() {
        let grid = GridSpec::new(4, 4);
        let csv = "participant_id,timestep,sector_id\n2,1,0\n1,0,0\n";
        assert!(matches!(
            read_trace(csv.as_bytes(), grid),
            Err(SimError::UnsortedTrace { row: 1 })
        ));
    }

    #[test]
    fn sector_weights_follow_visit_shares() {
        let grid = GridSpec::new(3, 2);
        let mut rows = Vec::new();
        for (sector, count) in [(0usize, 10), (1, 50), (2, 40)] {
            for k in 0..count {
                rows.push(TraceRow { participant_id: k as u64, timestep: sector % 2, sector_id: sector });
            }
        }
        rows.sort_by_key(|r| (r.participant_id, r.timestep, r.sector_id));
        let weights = sector_weights_from_trace(&rows, grid).unwrap();
        assert!((weights.values[grid.idx(0, 0)] - 0.1).abs() < 1e-12);
        assert!((weights.values[grid.idx(1, 0)] - 0.5).abs() < 1e-12);
        assert!((weights.values[grid.idx(2, 1)] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_visited_sector_gets_weight_one() {
        let grid = GridSpec::new(3, 1);
        let rows = vec![TraceRow { participant_id: 0, timestep: 0, sector_id: 2 }];
        let weights = sector_weights_from_trace(&rows, grid).unwrap();
        assert_eq!(weights.values[grid.idx(2, 0)], 1.0);
        assert_eq!(weights.values[grid.idx(0, 0)], 0.0);
    }

    #[test]
    fn zero_visits_are_rejected() {
        let grid = GridSpec::new(3, 1);
        assert!(matches!(
            sector_weights_from_trace(&[], grid),
            Err(SimError::ZeroVisits)
        ));
    }

    #[test]
    fn execution_extremes() {
        let inst = crate::fixtures::worked_example();
        let outcome = tvm_run(&inst, 1);
        assert_eq!(
            simulate_execution(&outcome, &inst, 0.0, 1),
            outcome.achieved_value
        );
        assert_eq!(simulate_execution(&outcome, &inst, 1.0, 1), 0.0);
    }

    #[test]
    fn mean_realized_value_matches_the_bernoulli_expectation() {
        let inst = crate::fixtures::worked_example();
        let outcome = tvm_run(&inst, 1);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|seed| simulate_execution(&outcome, &inst, 0.5, seed))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.1125).abs() < 0.005, "mean {mean}");
    }
}
