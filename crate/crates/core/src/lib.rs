//! Infrastructure-based contact tracing built on light-harvesting BLE
//! beacons: fixed beacons broadcast rotating pseudo-random identifiers,
//! user devices only ever scan and log, a central authority publishes the
//! logs of confirmed-positive users, and every device reconciles locally,
//! estimating proximity from received signal strength.
//!
//! The crate bundles the protocol pieces (identity derivation, scan logs,
//! the authority's versioned list and its wire API), the physics they rest
//! on (a log-distance radio model and a harvest/supercap/battery power
//! chain), and a seeded simulation layer for end-to-end scenarios and
//! Monte Carlo accuracy studies.

pub mod detection;
pub mod energy;
pub mod identity;
pub mod io;
pub mod protocol;
pub mod radio;
pub mod sim;

pub use detection::{
    detect_contacts, distance_vector, mad_distance, trilaterate, ContactEvent, ContactParams,
    DistanceVector, ScanRecord, TimeWindow,
};
pub use energy::{
    architecture_energy, predict_lifetime, step_energy, ArchitectureCosts, ArchitectureEnergy,
    EnergyState, Lifetime, LifetimePrediction, LightingProfile, PowerChainConfig,
};
pub use identity::{
    encode_preimage, ephemeral_id, fold_hash, make_broadcast, BatteryStatus, BeaconConfig,
    BroadcastPayload, DeviceId, EphemeralId, Mac, PacketPreimage,
};
pub use protocol::{
    hospital_report, user_reconcile, user_scan_tick, AuthorityStore, HeardBroadcast,
    PositiveReport, PublishedEntry, PublishedList, ScanConfig, UserDevice,
};
pub use radio::{CalibrationFit, CalibrationSample, RadioError, RadioModel, TxPower};
pub use sim::{
    accuracy_sweep, accuracy_sweep_sequential, parse_scenario, run_scenario, run_trial,
    AccuracyReport, DeploymentScenario, EventLedger, Placement, ScenarioRunConfig, SweepConfig,
};
#[cfg(feature = "parallel")]
pub use sim::accuracy_sweep_parallel;
pub use sim::scenario::run_scenario_file;
