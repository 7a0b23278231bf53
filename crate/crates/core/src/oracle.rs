//! Exhaustive ground truth for small instances: the exact optimum by subset
//! enumeration, misreport sweeps, and the aggregate property battery that
//! anchors the mechanism guarantees.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hvm::hvm_run;
use crate::model::AuctionInstance;
use crate::tvm::tvm_run;
use crate::value::{marginal_unchecked, CoverageState};

/// Worst-case guarantee of the greedy mechanism relative to the optimum,
/// before subtracting the largest single-bidder share: (e-1)/(3e).
pub const APPROX_RATIO: f64 = (E - 1.0) / (3.0 * E);

/// Enumeration guard for the exact optimum.
pub const MAX_BRUTE_FORCE_BIDDERS: usize = 25;

/// Guard for misreport sweeps, which rerun the mechanism per grid point.
pub const MAX_SWEEP_BIDDERS: usize = 10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance has {m} bidders; enumeration is capped at {max}")]
    TooLarge { m: usize, max: usize },
    #[error("bidder {id} has no true cost; the sweep needs one for every bidder")]
    MissingTrueCost { id: u64 },
}

/// Exact maximizer of the coverage value under the bid-sum budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    /// Optimal bidder set, ascending ids.
    pub subset: Vec<u64>,
    pub opt_value: f64,
    /// Largest single-bidder marginal divided by the optimum (0 when the
    /// optimum is 0); the instance-dependent term of the approximation bound.
    pub lambda: f64,
}

/// Exact optimum by recursive subset enumeration with incremental coverage.
///
/// Costs are the declared bids; feasible sets satisfy `sum of bids <= budget`.
/// Value ties break toward the lexicographically smallest id set.
pub fn brute_force_optimal(instance: &AuctionInstance) -> Result<OptimalSolution, OracleError> {
    let m = instance.len();
    if m > MAX_BRUTE_FORCE_BIDDERS {
        return Err(OracleError::TooLarge {
            m,
            max: MAX_BRUTE_FORCE_BIDDERS,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| instance.bidders[i].id());

    struct Best {
        value: f64,
        subset: Vec<u64>,
    }
    let mut best = Best {
        value: 0.0,
        subset: Vec::new(),
    };

    fn walk(
        instance: &AuctionInstance,
        order: &[usize],
        pos: usize,
        state: &CoverageState,
        value: f64,
        bid_sum: f64,
        chosen: &mut Vec<u64>,
        best: &mut Best,
    ) {
        if pos == order.len() {
            if value > best.value || (value == best.value && *chosen < best.subset) {
                best.value = value;
                best.subset = chosen.clone();
            }
            return;
        }
        let bidder = &instance.bidders[order[pos]];
        if bid_sum + bidder.bid.bid <= instance.budget {
            let gain = marginal_unchecked(&instance.values, state, &bidder.profile);
            let next = state
                .inserted(&bidder.profile)
                .expect("enumeration never repeats a bidder");
            chosen.push(bidder.id());
            walk(
                instance,
                order,
                pos + 1,
                &next,
                value + gain,
                bid_sum + bidder.bid.bid,
                chosen,
                best,
            );
            chosen.pop();
        }
        walk(
            instance,
            order,
            pos + 1,
            state,
            value,
            bid_sum,
            chosen,
            best,
        );
    }
    let empty = CoverageState::empty(instance.grid);
    let mut chosen = Vec::new();
    walk(
        instance, &order, 0, &empty, 0.0, 0.0, &mut chosen, &mut best,
    );

    let lambda = if best.value > 0.0 {
        instance
            .bidders
            .iter()
            .map(|b| marginal_unchecked(&instance.values, &empty, &b.profile))
            .fold(0.0_f64, f64::max)
            / best.value
    } else {
        0.0
    };
    Ok(OptimalSolution {
        subset: best.subset,
        opt_value: best.value,
        lambda,
    })
}

/// Independent second route: bitmask enumeration evaluating the value from
/// the direct product form, without touching the incremental coverage code.
pub fn brute_force_optimal_direct(
    instance: &AuctionInstance,
) -> Result<OptimalSolution, OracleError> {
    let m = instance.len();
    if m > 20 {
        return Err(OracleError::TooLarge { m, max: 20 });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| instance.bidders[i].id());

    let cells = instance.grid.cells();
    let mut best_value = 0.0_f64;
    let mut best_subset: Vec<u64> = Vec::new();
    for mask in 0u64..(1u64 << m) {
        let mut bid_sum = 0.0;
        let mut subset = Vec::new();
        for (bit, &i) in order.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                bid_sum += instance.bidders[i].bid.bid;
                subset.push(i);
            }
        }
        if bid_sum > instance.budget {
            continue;
        }
        let mut value = 0.0;
        for cell in 0..cells {
            let mut miss = 1.0;
            for &i in &subset {
                miss *= 1.0 - instance.bidders[i].profile.probs[cell];
            }
            value += instance.values.values[cell] * (1.0 - miss);
        }
        let ids: Vec<u64> = subset.iter().map(|&i| instance.bidders[i].id()).collect();
        if value > best_value || (value == best_value && ids < best_subset) {
            best_value = value;
            best_subset = ids;
        }
    }
    let lambda = if best_value > 0.0 {
        let empty = CoverageState::empty(instance.grid);
        instance
            .bidders
            .iter()
            .map(|b| marginal_unchecked(&instance.values, &empty, &b.profile))
            .fold(0.0_f64, f64::max)
            / best_value
    } else {
        0.0
    };
    Ok(OptimalSolution {
        subset: best_subset,
        opt_value: best_value,
        lambda,
    })
}

/// Which mechanism a sweep or battery should exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Tvm,
    Hvm,
}

/// Misreport sweep result for one bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderSweep {
    pub id: u64,
    pub true_cost: f64,
    /// Utility when bidding the true cost.
    pub truthful_utility: f64,
    /// Largest utility found over the misreport grid.
    pub best_misreport_utility: f64,
    /// Misreport achieving it.
    pub best_misreport: f64,
    /// `best_misreport_utility - truthful_utility`; at most ~0 for a
    /// truthful mechanism.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mechanism: Mechanism,
    pub grid_size: usize,
    pub per_bidder: Vec<BidderSweep>,
}

impl SweepReport {
    pub fn max_violation(&self) -> f64 {
        self.per_bidder
            .iter()
            .map(|b| b.max_violation)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn utility(instance: &AuctionInstance, mechanism: Mechanism, id: u64, cost: f64, jobs: usize) -> f64 {
    let outcome = match mechanism {
        Mechanism::Tvm => tvm_run(instance, jobs),
        Mechanism::Hvm => hvm_run(instance, jobs).0,
    };
    match outcome.rewards.get(&id) {
        Some(reward) => reward - cost,
        None => 0.0,
    }
}

/// Reruns the mechanism for every bidder across a misreport grid over
/// `(0, 3 * true_cost]` and reports the utility gap against truthful bidding.
pub fn truthfulness_sweep(
    instance: &AuctionInstance,
    mechanism: Mechanism,
    grid_size: usize,
    jobs: usize,
) -> Result<SweepReport, OracleError> {
    let m = instance.len();
    if m > MAX_SWEEP_BIDDERS {
        return Err(OracleError::TooLarge {
            m,
            max: MAX_SWEEP_BIDDERS,
        });
    }
    let mut per_bidder = Vec::with_capacity(m);
    for bidder in &instance.bidders {
        let id = bidder.id();
        let cost = bidder
            .bid
            .true_cost
            .ok_or(OracleError::MissingTrueCost { id })?;
        let truthful_utility = utility(&instance.with_bid(id, cost), mechanism, id, cost, jobs);
        let mut best_misreport_utility = f64::NEG_INFINITY;
        let mut best_misreport = cost;
        for t in 1..=grid_size {
            let x = 3.0 * cost * t as f64 / grid_size as f64;
            let u = utility(&instance.with_bid(id, x), mechanism, id, cost, jobs);
            if u > best_misreport_utility {
                best_misreport_utility = u;
                best_misreport = x;
            }
        }
        per_bidder.push(BidderSweep {
            id,
            true_cost: cost,
            truthful_utility,
            best_misreport_utility,
            best_misreport,
            max_violation: best_misreport_utility - truthful_utility,
        });
    }
    Ok(SweepReport {
        mechanism,
        grid_size,
        per_bidder,
    })
}

/// One property verdict with a human-readable witness on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Hard checks are proven guarantees; a failure is a defect.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub checks: Vec<PropertyCheck>,
}

impl BatteryReport {
    pub fn all_hard_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }
}

/// Runs the budget-feasibility, individual-rationality, monotonicity,
/// approximation-ratio, and dominance checks on one instance.
///
/// The approximation check needs the exact optimum and is skipped above 15
/// bidders.
pub fn property_battery(instance: &AuctionInstance, jobs: usize) -> BatteryReport {
    let mut checks = Vec::new();
    let budget = instance.budget;
    let tvm = tvm_run(instance, jobs);

    checks.push(PropertyCheck {
        name: "budget-feasibility".into(),
        passed: tvm.payments_total <= budget,
        hard: true,
        detail: format!(
            "payments {} vs budget {}",
            tvm.payments_total, budget
        ),
    });

    let ir_violation = tvm.winners.iter().find(|&&id| {
        let bid = instance.bidder(id).map(|b| b.bid.bid).unwrap_or(f64::NAN);
        !(tvm.rewards[&id] >= bid)
    });
    checks.push(PropertyCheck {
        name: "individual-rationality".into(),
        passed: ir_violation.is_none(),
        hard: true,
        detail: match ir_violation {
            Some(&id) => format!(
                "winner {id} paid {} below bid {}",
                tvm.rewards[&id],
                instance.bidder(id).unwrap().bid.bid
            ),
            None => format!("{} winners all paid at least their bid", tvm.winners.len()),
        },
    });

    // winners must keep winning when they lower their bid
    let mono_violation = tvm.winners.iter().find(|&&id| {
        let bid = instance.bidder(id).unwrap().bid.bid;
        let again = tvm_run(&instance.with_bid(id, 0.5 * bid), jobs);
        !again.winners.contains(&id)
    });
    checks.push(PropertyCheck {
        name: "allocation-monotonicity".into(),
        passed: mono_violation.is_none(),
        hard: true,
        detail: match mono_violation {
            Some(&id) => format!("winner {id} lost after halving its bid"),
            None => "winners keep winning at lower bids".into(),
        },
    });

    if instance.len() <= 15 {
        let opt = brute_force_optimal(instance).expect("guarded size");
        let bound = (APPROX_RATIO - opt.lambda) * opt.opt_value;
        checks.push(PropertyCheck {
            name: "approximation-ratio".into(),
            passed: tvm.achieved_value >= bound,
            hard: true,
            detail: format!(
                "value {} vs bound ({:.5} - {:.5}) * {}",
                tvm.achieved_value, APPROX_RATIO, opt.lambda, opt.opt_value
            ),
        });
    } else {
        checks.push(PropertyCheck {
            name: "approximation-ratio".into(),
            passed: true,
            hard: false,
            detail: format!("skipped: {} bidders exceed the enumeration cap", instance.len()),
        });
    }

    let (hvm, _) = hvm_run(instance, jobs);
    checks.push(PropertyCheck {
        name: "hvm-dominance".into(),
        passed: hvm.achieved_value >= tvm.achieved_value - 1e-12
            && hvm.payments_total <= budget,
        hard: true,
        detail: format!(
            "hvm value {} (payments {}) vs tvm value {}",
            hvm.achieved_value, hvm.payments_total, tvm.achieved_value
        ),
    });

    BatteryReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{worked_example, worked_example_truthful};

    const TOL: f64 = 1e-12;

    #[test]
    fn worked_example_optimum() {
        let inst = worked_example();
        let opt = brute_force_optimal(&inst).unwrap();
        // feasible subsets: {1}=.27 {2}=.225 {3}=.32 {1,2}=.4535 {2,3}=.489
        assert_eq!(opt.subset, vec![2, 3]);
        assert!((opt.opt_value - 0.489).abs() < TOL);
        assert!((opt.lambda - 0.32 / 0.489).abs() < TOL);
    }

    #[test]
    fn optimum_with_budget_below_every_bid_is_empty() {
        let mut inst = worked_example();
        inst.budget = 1.0;
        let opt = brute_force_optimal(&inst).unwrap();
        assert!(opt.subset.is_empty());
        assert_eq!(opt.opt_value, 0.0);
    }

    #[test]
    fn optimum_with_slack_budget_takes_everyone() {
        let mut inst = worked_example();
        inst.budget = 100.0;
        let opt = brute_force_optimal(&inst).unwrap();
        assert_eq!(opt.subset, vec![1, 2, 3]);
    }

    #[test]
    fn both_enumeration_routes_agree() {
        let inst = worked_example();
        let a = brute_force_optimal(&inst).unwrap();
        let b = brute_force_optimal_direct(&inst).unwrap();
        assert_eq!(a.subset, b.subset);
        assert!((a.opt_value - b.opt_value).abs() < TOL);
    }

    #[test]
    fn enumeration_guard_rejects_large_instances() {
        let mut inst = worked_example();
        let proto = inst.bidders[0].clone();
        for id in 10..40 {
            let mut b = proto.clone();
            b.bid.participant_id = id;
            b.profile.participant_id = id;
            inst.bidders.push(b);
        }
        assert!(matches!(
            brute_force_optimal(&inst),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn tvm_sweep_on_the_worked_example_is_truthful() {
        let inst = worked_example_truthful();
        let report = truthfulness_sweep(&inst, Mechanism::Tvm, 25, 1).unwrap();
        assert!(report.max_violation() <= 1e-9, "{report:?}");
    }

    #[test]
    fn sweep_requires_true_costs() {
        let inst = worked_example();
        assert!(matches!(
            truthfulness_sweep(&inst, Mechanism::Tvm, 5, 1),
            Err(OracleError::MissingTrueCost { .. })
        ));
    }

    #[test]
    fn battery_passes_on_the_worked_example() {
        let inst = worked_example();
        let report = property_battery(&inst, 1);
        assert!(report.all_hard_passed(), "{report:?}");
        serde_json::to_string(&report).unwrap();
    }

    #[test]
    fn approximation_constant_matches_the_closed_form() {
        assert!((APPROX_RATIO - 0.21071).abs() < 1e-5);
    }
}
