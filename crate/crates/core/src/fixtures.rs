//! Small hand-checkable instances used by tests, docs, and the CLI examples.

use crate::model::{AuctionInstance, Bid, Bidder, GridSpec, MobilityProfile, ValueMatrix};

/// Four sectors, one timestep, three bidders, budget 20.
///
/// Values {.3,.2,.1,.4}; bids {10, 8, 12}; presence probabilities
/// p1 = {.2,.1,.3,.4}, p2 = {0,.8,.05,.15}, p3 = {.4,.2,0,.4}.
/// The truthful mechanism selects bidder 2 alone and pays it 8.33.
pub fn worked_example() -> AuctionInstance {
    AuctionInstance {
        grid: GridSpec::new(4, 1),
        values: ValueMatrix::new(vec![0.3, 0.2, 0.1, 0.4]),
        bidders: vec![
            Bidder {
                bid: Bid::new(1, 10.0),
                profile: MobilityProfile::new(1, vec![0.2, 0.1, 0.3, 0.4]),
            },
            Bidder {
                bid: Bid::new(2, 8.0),
                profile: MobilityProfile::new(2, vec![0.0, 0.8, 0.05, 0.15]),
            },
            Bidder {
                bid: Bid::new(3, 12.0),
                profile: MobilityProfile::new(3, vec![0.4, 0.2, 0.0, 0.4]),
            },
        ],
        budget: 20.0,
    }
}

/// Same instance with every bidder's private cost set equal to its bid.
pub fn worked_example_truthful() -> AuctionInstance {
    let mut inst = worked_example();
    for b in &mut inst.bidders {
        b.bid.true_cost = Some(b.bid.bid);
    }
    inst
}
