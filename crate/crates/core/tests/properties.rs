//! Randomized invariant checks for the coverage objective and the auctions.

mod common;

use common::random_instance;
use incentme_core::{
    binary_search_budget, hvm_run, marginal_value, total_value, tvm_run, AuctionInstance,
    CoverageState,
};
use proptest::prelude::*;

fn small_instance() -> impl Strategy<Value = AuctionInstance> {
    (
        any::<u64>(),
        1usize..10,
        1usize..6,
        1usize..4,
        0.05f64..2.0,
    )
        .prop_map(|(seed, m, s, z, scale)| random_instance(seed, m, s, z, scale))
}

/// Coverage by direct product over the member set, bypassing the recurrence.
fn direct_coverage(instance: &AuctionInstance, members: &[usize]) -> Vec<f64> {
    (0..instance.grid.cells())
        .map(|cell| {
            let miss: f64 = members
                .iter()
                .map(|&i| 1.0 - instance.bidders[i].profile.probs[cell])
                .product();
            1.0 - miss
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_coverage_matches_the_direct_product(inst in small_instance()) {
        let mut state = CoverageState::empty(inst.grid);
        for b in &inst.bidders {
            state.insert(&b.profile).unwrap();
        }
        let direct = direct_coverage(&inst, &(0..inst.len()).collect::<Vec<_>>());
        for (a, b) in state.coverage().iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn coverage_is_insertion_order_invariant(inst in small_instance(), seed in any::<u64>()) {
        let mut forward = CoverageState::empty(inst.grid);
        for b in &inst.bidders {
            forward.insert(&b.profile).unwrap();
        }
        let mut order: Vec<usize> = (0..inst.len()).collect();
        // deterministic shuffle from the seed
        for i in (1..order.len()).rev() {
            order.swap(i, (seed as usize).wrapping_mul(i).wrapping_add(i) % (i + 1));
        }
        let mut permuted = CoverageState::empty(inst.grid);
        for &i in &order {
            permuted.insert(&inst.bidders[i].profile).unwrap();
        }
        prop_assert_eq!(forward.members(), permuted.members());
        for (a, b) in forward.coverage().iter().zip(permuted.coverage()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_is_monotone(inst in small_instance()) {
        let mut state = CoverageState::empty(inst.grid);
        let mut last = 0.0;
        for b in &inst.bidders {
            state.insert(&b.profile).unwrap();
            let v = total_value(&inst.values, &state).unwrap();
            prop_assert!(v >= last - 1e-15);
            last = v;
        }
    }

    #[test]
    fn marginals_are_submodular(inst in small_instance()) {
        // marginal of the last bidder shrinks as the base set grows
        if inst.len() < 2 {
            return Ok(());
        }
        let probe = &inst.bidders[inst.len() - 1].profile;
        let mut state = CoverageState::empty(inst.grid);
        let mut last = f64::INFINITY;
        for b in &inst.bidders[..inst.len() - 1] {
            state.insert(&b.profile).unwrap();
            let m = marginal_value(&inst.values, &state, probe).unwrap();
            prop_assert!(m <= last + 1e-12, "{m} after {last}");
            last = m;
        }
    }

    #[test]
    fn marginal_equals_the_value_difference(inst in small_instance()) {
        let mut state = CoverageState::empty(inst.grid);
        for b in &inst.bidders {
            let before = total_value(&inst.values, &state).unwrap();
            let gain = marginal_value(&inst.values, &state, &b.profile).unwrap();
            state.insert(&b.profile).unwrap();
            let after = total_value(&inst.values, &state).unwrap();
            prop_assert!((after - before - gain).abs() <= 1e-9);
        }
    }

    #[test]
    fn tvm_is_budget_feasible_and_individually_rational(inst in small_instance()) {
        let outcome = tvm_run(&inst, 1);
        prop_assert!(outcome.payments_total <= inst.budget);
        for &id in &outcome.winners {
            let bid = inst.bidder(id).unwrap().bid.bid;
            prop_assert!(outcome.rewards[&id] >= bid, "reward below bid for {id}");
        }
        prop_assert_eq!(outcome.winners.len(), outcome.rewards.len());
    }

    #[test]
    fn hvm_is_feasible_and_never_below_tvm(inst in small_instance()) {
        let tvm = tvm_run(&inst, 1);
        let (hvm, log) = hvm_run(&inst, 1);
        prop_assert!(hvm.payments_total <= inst.budget);
        prop_assert!(hvm.achieved_value >= tvm.achieved_value - 1e-12);
        prop_assert_eq!(log.tvm_evaluations, log.probes.len());
        // bracket of <= 65 doublings plus the bounded shrink loop
        prop_assert!(log.tvm_evaluations <= 65 + 2 * 60 + 4);
    }

    #[test]
    fn binary_and_interpolation_searches_agree_on_feasibility(inst in small_instance()) {
        let (a, _) = hvm_run(&inst, 1);
        let (b, _) = binary_search_budget(&inst, 1);
        prop_assert!(a.payments_total <= inst.budget);
        prop_assert!(b.payments_total <= inst.budget);
    }

    #[test]
    fn instances_round_trip_through_json_bit_exactly(inst in small_instance()) {
        let text = serde_json::to_string(&inst).unwrap();
        let back: AuctionInstance = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(inst, back);
    }
}
