//! Domain types shared by the mechanisms, oracles, and simulator.
//!
//! All types are plain immutable values after construction. Matrices over the
//! sector/timestep grid are stored row-major: index `(sector, timestep)` maps
//! to `sector * timesteps + timestep`.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on per-timestep probability row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("grid must have at least one sector and one timestep (got {sectors}x{timesteps})")]
    EmptyGrid { sectors: usize, timesteps: usize },
    #[error("{what} has {got} entries, expected {expected} for a {sectors}x{timesteps} grid")]
    DimensionMismatch {
        what: String,
        got: usize,
        expected: usize,
        sectors: usize,
        timesteps: usize,
    },
    #[error("value matrix entry ({sector},{timestep}) is negative: {value}")]
    NegativeValue {
        sector: usize,
        timestep: usize,
        value: f64,
    },
    #[error("bidder {id}: probability at ({sector},{timestep}) out of [0,1]: {value}")]
    ProbabilityOutOfRange {
        id: u64,
        sector: usize,
        timestep: usize,
        value: f64,
    },
    #[error("bidder {id}: probabilities at timestep {timestep} sum to {sum} > 1")]
    RowSumExceeded { id: u64, timestep: usize, sum: f64 },
    #[error("duplicate participant id {id}")]
    DuplicateId { id: u64 },
    #[error("bidder {id}: bid must be positive (got {bid})")]
    NonPositiveBid { id: u64, bid: f64 },
    #[error("bidder {id}: true cost must be positive (got {cost})")]
    NonPositiveCost { id: u64, cost: f64 },
    #[error("budget must be positive (got {budget})")]
    NonPositiveBudget { budget: f64 },
    #[error("bid and profile of a bidder pair carry different ids ({bid_id} vs {profile_id})")]
    MismatchedIds { bid_id: u64, profile_id: u64 },
}

/// Dimensions of the sensing grid: `sectors` spatial cells over `timesteps`
/// discrete slots (the auction duration).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sectors: usize,
    pub timesteps: usize,
}

impl GridSpec {
    pub fn new(sectors: usize, timesteps: usize) -> Self {
        GridSpec { sectors, timesteps }
    }

    /// Total number of grid cells.
    pub fn cells(&self) -> usize {
        self.sectors * self.timesteps
    }

    /// Row-major cell index.
    #[inline]
    pub fn idx(&self, sector: usize, timestep: usize) -> usize {
        sector * self.timesteps + timestep
    }
}

/// Non-negative task values over the grid. A zero entry marks a cell with no
/// sensing task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueMatrix {
    pub values: Vec<f64>,
}

impl ValueMatrix {
    pub fn new(values: Vec<f64>) -> Self {
        ValueMatrix { values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ValueMatrix {
            values: vec![0.0; grid.cells()],
        }
    }
}

/// Per-participant presence probabilities over the grid.
///
/// Row sums per timestep may be below 1: a participant can be outside the
/// sensing area or have left the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    pub participant_id: u64,
    pub probs: Vec<f64>,
}

impl MobilityProfile {
    pub fn new(participant_id: u64, probs: Vec<f64>) -> Self {
        MobilityProfile {
            participant_id,
            probs,
        }
    }
}

/// A declared bid. `true_cost` is simulation-only private information; the
/// mechanisms never read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub participant_id: u64,
    pub bid: f64,
    pub true_cost: Option<f64>,
}

impl Bid {
    pub fn new(participant_id: u64, bid: f64) -> Self {
        Bid {
            participant_id,
            bid,
            true_cost: None,
        }
    }

    pub fn with_cost(participant_id: u64, bid: f64, true_cost: f64) -> Self {
        Bid {
            participant_id,
            bid,
            true_cost: Some(true_cost),
        }
    }
}

/// A bid paired with the bidder's mobility profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Bidder {
    pub bid: Bid,
    pub profile: MobilityProfile,
}

impl Bidder {
    pub fn id(&self) -> u64 {
        self.bid.participant_id
    }
}

/// A complete auction input: grid, task values, bidders, and the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionInstance {
    pub grid: GridSpec,
    pub values: ValueMatrix,
    pub bidders: Vec<Bidder>,
    pub budget: f64,
}

impl AuctionInstance {
    pub fn bidder(&self, id: u64) -> Option<&Bidder> {
        self.bidders.iter().find(|b| b.id() == id)
    }

    /// Number of bidders.
    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    /// Copy of the instance with one bidder's declared bid replaced.
    pub fn with_bid(&self, id: u64, bid: f64) -> AuctionInstance {
        let mut out = self.clone();
        for b in &mut out.bidders {
            if b.id() == id {
                b.bid.bid = bid;
            }
        }
        out
    }
}

/// Result of an auction: ordered winners, their marginal values at selection
/// time, and the reward vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// Winning bidders in selection order.
    pub winners: Vec<u64>,
    /// Marginal value of each winner at the moment it was selected.
    pub marginals: Vec<f64>,
    /// Reward per winner.
    pub rewards: BTreeMap<u64, f64>,
    /// Total value of the winner set.
    pub achieved_value: f64,
    /// Sum of rewards.
    pub payments_total: f64,
}

impl AuctionOutcome {
    pub fn empty() -> Self {
        AuctionOutcome {
            winners: Vec::new(),
            marginals: Vec::new(),
            rewards: BTreeMap::new(),
            achieved_value: 0.0,
            payments_total: 0.0,
        }
    }
}

/// Checks every type invariant and returns the instance unchanged on success.
///
/// Each rejection names the first offending field.
pub fn validate_instance(instance: AuctionInstance) -> Result<AuctionInstance, ModelError> {
    let grid = instance.grid;
    if grid.sectors == 0 || grid.timesteps == 0 {
        return Err(ModelError::EmptyGrid {
            sectors: grid.sectors,
            timesteps: grid.timesteps,
        });
    }
    if instance.values.values.len() != grid.cells() {
        return Err(ModelError::DimensionMismatch {
            what: "value matrix".into(),
            got: instance.values.values.len(),
            expected: grid.cells(),
            sectors: grid.sectors,
            timesteps: grid.timesteps,
        });
    }
    for (cell, &v) in instance.values.values.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(ModelError::NegativeValue {
                sector: cell / grid.timesteps,
                timestep: cell % grid.timesteps,
                value: v,
            });
        }
    }
    if !(instance.budget > 0.0) {
        return Err(ModelError::NonPositiveBudget {
            budget: instance.budget,
        });
    }
    let mut seen = BTreeSet::new();
    for bidder in &instance.bidders {
        let id = bidder.id();
        if bidder.profile.participant_id != id {
            return Err(ModelError::MismatchedIds {
                bid_id: id,
                profile_id: bidder.profile.participant_id,
            });
        }
        if !seen.insert(id) {
            return Err(ModelError::DuplicateId { id });
        }
        if !(bidder.bid.bid > 0.0) {
            return Err(ModelError::NonPositiveBid {
                id,
                bid: bidder.bid.bid,
            });
        }
        if let Some(cost) = bidder.bid.true_cost {
            if !(cost > 0.0) {
                return Err(ModelError::NonPositiveCost { id, cost });
            }
        }
        if bidder.profile.probs.len() != grid.cells() {
            return Err(ModelError::DimensionMismatch {
                what: format!("mobility profile of bidder {id}"),
                got: bidder.profile.probs.len(),
                expected: grid.cells(),
                sectors: grid.sectors,
                timesteps: grid.timesteps,
            });
        }
        for (cell, &p) in bidder.profile.probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::ProbabilityOutOfRange {
                    id,
                    sector: cell / grid.timesteps,
                    timestep: cell % grid.timesteps,
                    value: p,
                });
            }
        }
        for j in 0..grid.timesteps {
            let sum: f64 = (0..grid.sectors)
                .map(|i| bidder.profile.probs[grid.idx(i, j)])
                .sum();
            if sum > 1.0 + ROW_SUM_TOL {
                return Err(ModelError::RowSumExceeded {
                    id,
                    timestep: j,
                    sum,
                });
            }
        }
    }
    Ok(instance)
}

/// Wire form of the instance file format.
mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub(super) struct BidderWire {
        pub id: u64,
        pub bid: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub true_cost: Option<f64>,
        pub probs: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    pub(super) struct InstanceWire {
        pub sectors: usize,
        pub timesteps: usize,
        pub budget: f64,
        pub values: Vec<f64>,
        pub bidders: Vec<BidderWire>,
    }
}

impl Serialize for AuctionInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let w = wire::InstanceWire {
            sectors: self.grid.sectors,
            timesteps: self.grid.timesteps,
            budget: self.budget,
            values: self.values.values.clone(),
            bidders: self
                .bidders
                .iter()
                .map(|b| wire::BidderWire {
                    id: b.id(),
                    bid: b.bid.bid,
                    true_cost: b.bid.true_cost,
                    probs: b.profile.probs.clone(),
                })
                .collect(),
        };
        w.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AuctionInstance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = wire::InstanceWire::deserialize(deserializer)?;
        Ok(AuctionInstance {
            grid: GridSpec::new(w.sectors, w.timesteps),
            values: ValueMatrix::new(w.values),
            bidders: w
                .bidders
                .into_iter()
                .map(|b| Bidder {
                    bid: Bid {
                        participant_id: b.id,
                        bid: b.bid,
                        true_cost: b.true_cost,
                    },
                    profile: MobilityProfile::new(b.id, b.probs),
                })
                .collect(),
            budget: w.budget,
        })
    }
}
