//! Truthful value maximization: greedy proportional-share allocation plus
//! critical-value payments.
//!
//! Allocation repeatedly picks the remaining bidder with the best marginal
//! value per unit bid and accepts it when (a) the accepted bids plus its own
//! stay within the input budget and (b) its bid is within the proportional
//! share `(B/2) * gain / (gain + sum of accepted gains)`. A bidder failing
//! either check is removed from the candidate pool and the loop continues.
//!
//! Payments rerun the allocation without each winner and pay the maximum bid
//! with which the winner would still have entered the alternate selection
//! order at some position.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::jobs::with_jobs;
use crate::model::{AuctionInstance, AuctionOutcome, MobilityProfile};
use crate::value::{batch_marginals, marginal_unchecked, total_value, CoverageState};

#[derive(Debug, Error)]
pub enum TvmError {
    #[error("trace winner {id} is not a bidder of this instance")]
    UnknownWinner { id: u64 },
    #[error("trace has {winners} winners but {marginals} marginals")]
    MalformedTrace { winners: usize, marginals: usize },
}

/// One argmax decision during allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsideredBid {
    pub id: u64,
    pub marginal: f64,
    pub ratio: f64,
    pub accepted: bool,
}

/// Full audit record of one allocation run.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTrace {
    /// Winners in selection order.
    pub winners: Vec<u64>,
    /// Marginal value of each winner at its selection moment.
    pub marginals: Vec<f64>,
    /// Declared bid of each winner, parallel to `winners`.
    pub winner_bids: Vec<f64>,
    /// Sum of the winners' bids.
    pub sum_of_bids: f64,
    /// Every considered bidder, in the order the argmax visited them.
    pub considered: Vec<ConsideredBid>,
    /// Candidate marginals (sorted by id) at the start and after each
    /// acceptance; `rounds[0]` holds the marginals against the empty set.
    pub rounds: Vec<Vec<(u64, f64)>>,
}

/// Proportional-share acceptance threshold. Used by both the allocation check
/// and the payment walk so the two sides agree bit for bit.
#[inline]
fn proportional_share(input_budget: f64, gain: f64, accepted_gains: f64) -> f64 {
    if gain > 0.0 {
        0.5 * input_budget * gain / (gain + accepted_gains)
    } else {
        0.0
    }
}

struct Candidate<'a> {
    id: u64,
    bid: f64,
    profile: &'a MobilityProfile,
    gain: f64,
}

fn snapshot(cands: &[Candidate<'_>]) -> Vec<(u64, f64)> {
    let mut s: Vec<(u64, f64)> = cands.iter().map(|c| (c.id, c.gain)).collect();
    s.sort_by_key(|&(id, _)| id);
    s
}

/// Allocation run, optionally excluding one bidder (used by the payment
/// function's alternate runs).
pub(crate) fn allocate_excluding(
    instance: &AuctionInstance,
    input_budget: f64,
    jobs: usize,
    exclude: Option<u64>,
) -> AllocationTrace {
    let values = &instance.values;
    let mut state = CoverageState::empty(instance.grid);
    let mut cands: Vec<Candidate<'_>> = instance
        .bidders
        .iter()
        .filter(|b| Some(b.id()) != exclude)
        .map(|b| Candidate {
            id: b.id(),
            bid: b.bid.bid,
            profile: &b.profile,
            gain: 0.0,
        })
        .collect();

    let refresh = |cands: &mut Vec<Candidate<'_>>, state: &CoverageState| {
        let profiles: Vec<&MobilityProfile> = cands.iter().map(|c| c.profile).collect();
        let gains = batch_marginals(values, state, &profiles, jobs);
        for (c, g) in cands.iter_mut().zip(gains) {
            c.gain = g;
        }
    };
    refresh(&mut cands, &state);

    let mut trace = AllocationTrace {
        winners: Vec::new(),
        marginals: Vec::new(),
        winner_bids: Vec::new(),
        sum_of_bids: 0.0,
        considered: Vec::new(),
        rounds: vec![snapshot(&cands)],
    };
    let mut accepted_gains = 0.0;

    while !cands.is_empty() {
        // argmax of gain/bid; a zero gain counts as ratio 0; ties go to the
        // lowest id for determinism
        let mut best = 0;
        let ratio_of = |c: &Candidate<'_>| if c.gain > 0.0 { c.gain / c.bid } else { 0.0 };
        for idx in 1..cands.len() {
            let (r, rb) = (ratio_of(&cands[idx]), ratio_of(&cands[best]));
            if r > rb || (r == rb && cands[idx].id < cands[best].id) {
                best = idx;
            }
        }
        let cand = cands.swap_remove(best);
        let ratio = ratio_of(&cand);
        let within_bid_sum = trace.sum_of_bids + cand.bid <= input_budget;
        let within_share = cand.bid <= proportional_share(input_budget, cand.gain, accepted_gains);
        let accepted = within_bid_sum && within_share;
        trace.considered.push(ConsideredBid {
            id: cand.id,
            marginal: cand.gain,
            ratio,
            accepted,
        });
        if accepted {
            trace.sum_of_bids += cand.bid;
            accepted_gains += cand.gain;
            trace.winners.push(cand.id);
            trace.marginals.push(cand.gain);
            trace.winner_bids.push(cand.bid);
            state
                .insert(cand.profile)
                .expect("winner cannot already be covered");
            // the covered set changed: refresh the cached marginals
            refresh(&mut cands, &state);
            trace.rounds.push(snapshot(&cands));
        }
    }
    trace
}

/// Greedy proportional-share allocation at the given input budget.
///
/// An empty winner set is a valid outcome. Marginal evaluation fans out over
/// `jobs` workers; the trace is identical for every job count.
pub fn tvm_allocate(instance: &AuctionInstance, input_budget: f64, jobs: usize) -> AllocationTrace {
    allocate_excluding(instance, input_budget, jobs, None)
}

/// Critical value of winner `i` against the alternate run `alt` made without
/// it. At each alternate position the winner could enter by (1) beating that
/// position's value-per-bid ratio, (2) passing the proportional-share check,
/// and (3) fitting in the remaining bid-sum budget; the reward is the largest
/// bid satisfying all three at some position, including the slot after the
/// last alternate winner where only (2) and (3) apply.
fn critical_value(
    instance: &AuctionInstance,
    profile: &MobilityProfile,
    alt: &AllocationTrace,
    input_budget: f64,
) -> f64 {
    if alt.winners.is_empty() {
        // limit of the share rule at the first slot: gain/(0 + gain) = 1
        return 0.5 * input_budget;
    }
    let values = &instance.values;
    let mut prefix = CoverageState::empty(instance.grid);
    let mut prefix_gains = 0.0;
    let mut prefix_bids = 0.0;
    let mut best = 0.0_f64;
    for j in 0..alt.winners.len() {
        let gain_i = marginal_unchecked(values, &prefix, profile);
        let gain_j = alt.marginals[j];
        let bid_j = alt.winner_bids[j];
        let displace = gain_i * bid_j / gain_j;
        let share = proportional_share(input_budget, gain_i, prefix_gains);
        let slack = input_budget - prefix_bids;
        best = best.max(displace.min(share).min(slack));
        let alt_profile = &instance
            .bidder(alt.winners[j])
            .expect("alternate winner is a bidder")
            .profile;
        prefix
            .insert(alt_profile)
            .expect("alternate winners are distinct");
        prefix_gains += gain_j;
        prefix_bids += bid_j;
    }
    let gain_i = marginal_unchecked(values, &prefix, profile);
    let share = proportional_share(input_budget, gain_i, prefix_gains);
    let slack = input_budget - prefix_bids;
    best.max(share.min(slack))
}

pub(crate) fn pay_inner(
    instance: &AuctionInstance,
    trace: &AllocationTrace,
    input_budget: f64,
    jobs: usize,
) -> Result<BTreeMap<u64, f64>, TvmError> {
    if trace.winners.len() != trace.marginals.len() {
        return Err(TvmError::MalformedTrace {
            winners: trace.winners.len(),
            marginals: trace.marginals.len(),
        });
    }
    for &id in &trace.winners {
        if instance.bidder(id).is_none() {
            return Err(TvmError::UnknownWinner { id });
        }
    }
    let reward_of = |&id: &u64| -> (u64, f64) {
        let profile = &instance.bidder(id).unwrap().profile;
        let alt = allocate_excluding(instance, input_budget, jobs, Some(id));
        (id, critical_value(instance, profile, &alt, input_budget))
    };
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        return Ok(trace.winners.par_iter().map(reward_of).collect());
    }
    Ok(trace.winners.iter().map(reward_of).collect())
}

/// Critical-value payments for the winners of `trace`.
pub fn tvm_pay(
    instance: &AuctionInstance,
    trace: &AllocationTrace,
    input_budget: f64,
    jobs: usize,
) -> Result<BTreeMap<u64, f64>, TvmError> {
    pay_inner(instance, trace, input_budget, jobs)
}

pub(crate) fn run_at_inner(
    instance: &AuctionInstance,
    input_budget: f64,
    jobs: usize,
) -> AuctionOutcome {
    let trace = allocate_excluding(instance, input_budget, jobs, None);
    let rewards = pay_inner(instance, &trace, input_budget, jobs)
        .expect("trace from the same instance is well formed");
    let mut state = CoverageState::empty(instance.grid);
    for &id in &trace.winners {
        state
            .insert(&instance.bidder(id).unwrap().profile)
            .expect("winners are distinct");
    }
    let achieved_value =
        total_value(&instance.values, &state).expect("state has instance dimensions");
    // fixed summation order (ascending id) keeps the total deterministic
    let payments_total = rewards.values().sum();
    AuctionOutcome {
        winners: trace.winners,
        marginals: trace.marginals,
        rewards,
        achieved_value,
        payments_total,
    }
}

/// Full auction at an explicit input budget (used by the budget search).
pub fn tvm_run_at(instance: &AuctionInstance, input_budget: f64, jobs: usize) -> AuctionOutcome {
    with_jobs(jobs, || run_at_inner(instance, input_budget, jobs))
}

/// Full truthful auction at the instance's own budget.
pub fn tvm_run(instance: &AuctionInstance, jobs: usize) -> AuctionOutcome {
    tvm_run_at(instance, instance.budget, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;
    use crate::model::{Bid, Bidder, GridSpec, ValueMatrix};

    const TOL: f64 = 1e-12;

    #[test]
    fn worked_example_allocation() {
        let inst = worked_example();
        let trace = tvm_allocate(&inst, 20.0, 1);
        assert_eq!(trace.winners, vec![2]);
        assert!((trace.marginals[0] - 0.225).abs() < TOL);
        assert_eq!(trace.sum_of_bids, 8.0);

        // round 1 marginals for all three, round 2 for the remaining two
        let r1: Vec<f64> = trace.rounds[0].iter().map(|&(_, g)| g).collect();
        assert!((r1[0] - 0.27).abs() < TOL);
        assert!((r1[1] - 0.225).abs() < TOL);
        assert!((r1[2] - 0.32).abs() < TOL);
        let r2 = &trace.rounds[1];
        assert_eq!(r2.len(), 2);
        assert!((r2[0].1 - 0.2285).abs() < TOL);
        assert!((r2[1].1 - 0.2640).abs() < TOL);

        // bidder 2 accepted first, then 1 and 3 rejected
        let order: Vec<(u64, bool)> = trace.considered.iter().map(|c| (c.id, c.accepted)).collect();
        assert_eq!(order, vec![(2, true), (1, false), (3, false)]);
    }

    #[test]
    fn tiny_budget_selects_nobody() {
        let inst = worked_example();
        let trace = tvm_allocate(&inst, 0.0001, 1);
        assert!(trace.winners.is_empty());
        assert!(trace.considered.iter().all(|c| !c.accepted));
    }

    fn single_bidder() -> AuctionInstance {
        AuctionInstance {
            grid: GridSpec::new(2, 1),
            values: ValueMatrix::new(vec![1.0, 1.0]),
            bidders: vec![Bidder {
                bid: Bid::new(5, 1.0),
                profile: crate::model::MobilityProfile::new(5, vec![0.5, 0.25]),
            }],
            budget: 2.0,
        }
    }

    #[test]
    fn single_bidder_with_positive_gain_wins() {
        // condition (b) reduces to bid <= (B/2) * gain/gain = 1
        let trace = tvm_allocate(&single_bidder(), 2.0, 1);
        assert_eq!(trace.winners, vec![5]);
    }

    #[test]
    fn single_winner_with_empty_alternate_run_gets_half_budget() {
        let inst = single_bidder();
        let outcome = tvm_run(&inst, 1);
        assert_eq!(outcome.winners, vec![5]);
        assert_eq!(outcome.rewards[&5], 1.0);
        assert_eq!(outcome.payments_total, 1.0);
    }

    #[test]
    fn worked_example_payment() {
        let inst = worked_example();
        let trace = tvm_allocate(&inst, 20.0, 1);
        let rewards = tvm_pay(&inst, &trace, 20.0, 1).unwrap();
        // displacing bidder 1 in the alternate run: 0.225 * 10 / 0.27
        assert!((rewards[&2] - 8.333333333333334).abs() < 0.01);
        assert!(rewards[&2] >= 8.0);
    }

    #[test]
    fn worked_example_outcome() {
        let inst = worked_example();
        let outcome = tvm_run(&inst, 1);
        assert_eq!(outcome.winners, vec![2]);
        assert!((outcome.achieved_value - 0.225).abs() < TOL);
        assert!(outcome.payments_total <= 20.0);
    }

    #[test]
    fn zero_values_mean_no_winners_and_no_payments() {
        let mut inst = worked_example();
        inst.values = ValueMatrix::new(vec![0.0; 4]);
        let outcome = tvm_run(&inst, 1);
        assert!(outcome.winners.is_empty());
        assert_eq!(outcome.payments_total, 0.0);
    }

    #[test]
    fn pay_rejects_foreign_trace() {
        let inst = worked_example();
        let mut trace = tvm_allocate(&inst, 20.0, 1);
        trace.winners[0] = 42;
        assert!(matches!(
            tvm_pay(&inst, &trace, 20.0, 1),
            Err(TvmError::UnknownWinner { id: 42 })
        ));
    }

    #[test]
    fn outcome_is_identical_across_job_counts() {
        let inst = worked_example();
        let a = tvm_run(&inst, 1);
        let b = tvm_run(&inst, 4);
        assert_eq!(a, b);
    }
}
