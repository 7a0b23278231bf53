//! Simplified comparison mechanisms. Neither is truthful; both pay winners
//! their declared bid (first price). They exist to give the experiment
//! harness budget-unaware and random floors to compare against.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::jobs::with_jobs;
use crate::model::{AuctionInstance, AuctionOutcome};
use crate::value::{batch_marginals, marginal_unchecked, total_value, CoverageState};

/// Greedy selection by initial marginal-value-per-bid ratio.
///
/// Bidders are ranked once by their marginal value per unit bid against the
/// empty set, then accepted in that order while the bid is at most `theta`
/// times the current marginal value. Winners are paid their bid. Without
/// `clamp_budget` the payment total ignores the budget entirely; with it,
/// bidders that no longer fit are skipped.
pub fn greedy_bid_threshold(
    instance: &AuctionInstance,
    theta: f64,
    clamp_budget: bool,
    jobs: usize,
) -> AuctionOutcome {
    with_jobs(jobs, || {
        let values = &instance.values;
        let mut state = CoverageState::empty(instance.grid);
        let profiles: Vec<_> = instance.bidders.iter().map(|b| &b.profile).collect();
        let initial = batch_marginals(values, &state, &profiles, jobs);
        let mut order: Vec<usize> = (0..instance.len()).collect();
        let ratio = |i: usize| {
            let g = initial[i];
            if g > 0.0 {
                g / instance.bidders[i].bid.bid
            } else {
                0.0
            }
        };
        order.sort_by(|&a, &b| {
            ratio(b)
                .total_cmp(&ratio(a))
                .then(instance.bidders[a].id().cmp(&instance.bidders[b].id()))
        });

        let mut outcome = AuctionOutcome::empty();
        for i in order {
            let bidder = &instance.bidders[i];
            let bid = bidder.bid.bid;
            if clamp_budget && outcome.payments_total + bid > instance.budget {
                continue;
            }
            let gain = marginal_unchecked(values, &state, &bidder.profile);
            if bid <= theta * gain {
                state.insert(&bidder.profile).expect("order has no repeats");
                outcome.winners.push(bidder.id());
                outcome.marginals.push(gain);
                outcome.rewards.insert(bidder.id(), bid);
                outcome.payments_total += bid;
            }
        }
        outcome.achieved_value = total_value(values, &state).expect("dimensions match");
        outcome
    })
}

/// Floor baseline: walk a seeded random permutation and take every bidder
/// that still fits in the budget, paying bids.
pub fn random_selection(instance: &AuctionInstance, seed: u64) -> AuctionOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..instance.len()).collect();
    order.shuffle(&mut rng);

    let mut state = CoverageState::empty(instance.grid);
    let mut outcome = AuctionOutcome::empty();
    for i in order {
        let bidder = &instance.bidders[i];
        let bid = bidder.bid.bid;
        if outcome.payments_total + bid > instance.budget {
            continue;
        }
        let gain = marginal_unchecked(&instance.values, &state, &bidder.profile);
        state.insert(&bidder.profile).expect("order has no repeats");
        outcome.winners.push(bidder.id());
        outcome.marginals.push(gain);
        outcome.rewards.insert(bidder.id(), bid);
        outcome.payments_total += bid;
    }
    outcome.achieved_value = total_value(&instance.values, &state).expect("dimensions match");
    outcome
}

/// First-price payment total of an outcome, for symmetry with the mechanisms.
pub fn payments_of(rewards: &BTreeMap<u64, f64>) -> f64 {
    rewards.values().sum()
}
