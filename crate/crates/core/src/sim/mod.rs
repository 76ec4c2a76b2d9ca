//! Seeded simulation: Monte Carlo deployment trials, the accuracy sweep
//! over beacon counts, and scripted end-to-end protocol scenarios with a
//! complete event ledger.

pub mod ledger;
pub mod scenario;
pub mod sweep;
pub mod trial;

pub use ledger::{EntityKind, EventLedger, LedgerEvent, LedgerEventKind};
pub use scenario::{
    parse_scenario, run_scenario, run_scenario_file, ScenarioError, ScenarioOutcome,
    ScenarioRunConfig, ScenarioScript,
};
pub use sweep::{accuracy_sweep, accuracy_sweep_sequential, spearman, AccuracyReport, CountStats, SweepConfig};
#[cfg(feature = "parallel")]
pub use sweep::accuracy_sweep_parallel;
pub use trial::{run_trial, DeploymentScenario, Placement, TrialOutcome, TrialResult};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trial seed derived from the master seed, the beacon count, and the
/// trial index. Adding counts or trials never perturbs other streams.
pub fn derive_trial_seed(master: u64, beacon_count: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ beacon_count) ^ trial_index)
}
