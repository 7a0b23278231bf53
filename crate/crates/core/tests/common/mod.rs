//! Seeded random instances shared by the property and acceptance suites.

use incentme_core::{
    validate_instance, AuctionInstance, Bid, Bidder, GridSpec, MobilityProfile, ValueMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random validated instance: per-timestep probability rows drawn uniform
/// and rescaled so each row sums to at most 1, bids uniform in (0.1, 2.1),
/// budget `budget_scale` times the bid sum. True costs equal bids.
pub fn random_instance(
    seed: u64,
    bidders: usize,
    sectors: usize,
    timesteps: usize,
    budget_scale: f64,
) -> AuctionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridSpec::new(sectors, timesteps);

    let values = ValueMatrix::new((0..grid.cells()).map(|_| rng.gen::<f64>()).collect());

    let mut bid_sum = 0.0;
    let bidders: Vec<Bidder> = (0..bidders as u64)
        .map(|id| {
            let mut probs = vec![0.0; grid.cells()];
            for t in 0..timesteps {
                let row: Vec<f64> = (0..sectors).map(|_| rng.gen::<f64>()).collect();
                let mass: f64 = rng.gen();
                let total: f64 = row.iter().sum();
                for (i, p) in row.into_iter().enumerate() {
                    probs[grid.idx(i, t)] = p * mass / total;
                }
            }
            let bid = 0.1 + 2.0 * rng.gen::<f64>();
            bid_sum += bid;
            Bidder {
                bid: Bid::with_cost(id, bid, bid),
                profile: MobilityProfile::new(id, probs),
            }
        })
        .collect();

    validate_instance(AuctionInstance {
        grid,
        values,
        bidders,
        budget: budget_scale * bid_sum,
    })
    .expect("generator satisfies the model invariants")
}
