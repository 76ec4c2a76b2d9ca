pub mod accuracy;
pub mod calibrate;
pub mod idgen;
pub mod lifetime;
pub mod reconcile;
pub mod scenario;
pub mod serve;
