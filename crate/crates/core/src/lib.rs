//! Budget-feasible reverse auctions for crowdsensing participant selection.
//!
//! The market: a platform with budget B wants probabilistic sensing coverage
//! of a sector/timestep grid; participants bid a price for joining. The
//! objective is the expected weighted coverage of the selected set, which is
//! monotone submodular, so greedy selection by marginal value per unit bid
//! plus a proportional-share payment rule gives a truthful, individually
//! rational, budget-feasible mechanism with a constant-factor guarantee
//! ([`tvm`]). Because its payments chronically underuse the budget, [`hvm`]
//! searches over inflated input budgets for the run whose payments best fill
//! the real one.
//!
//! [`oracle`] holds exact brute-force optima and property checkers used by
//! the test suites, [`sim`] generates synthetic populations and ingests
//! mobility traces, and [`baselines`] provides non-truthful comparison
//! mechanisms.
//!
//! With the default `parallel` feature, batch marginal evaluation and
//! per-winner payment runs fan out over a rayon pool sized by the `jobs`
//! argument; `jobs <= 1` or building with `--no-default-features` runs the
//! identical sequential code. Outcomes are bit-identical either way.

pub mod baselines;
pub mod fixtures;
pub mod hvm;
pub mod jobs;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod tvm;
pub mod value;

pub use hvm::{binary_search_budget, find_bracket, hvm_run, BudgetBracket, SearchLog};
pub use model::{
    validate_instance, AuctionInstance, AuctionOutcome, Bid, Bidder, GridSpec, MobilityProfile,
    ModelError, ValueMatrix,
};
pub use oracle::{brute_force_optimal, property_battery, truthfulness_sweep, APPROX_RATIO};
pub use sim::{generate_instance, generate_population, simulate_execution, PopulationConfig};
pub use tvm::{tvm_allocate, tvm_pay, tvm_run, tvm_run_at, AllocationTrace};
pub use value::{marginal_value, total_value, CoverageState};
