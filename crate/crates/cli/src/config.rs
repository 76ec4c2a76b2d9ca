//! Merged run configuration: defaults, overridden by a TOML file, in turn
//! overridden by command-line flags. Unknown keys are rejected and the
//! effective configuration is echoed to stderr so any run can be repeated
//! byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use lumitrace_core::detection::ContactParams;
use lumitrace_core::energy::PowerChainConfig;
use lumitrace_core::protocol::ScanConfig;
use lumitrace_core::radio::{RadioModel, TxPower};
use lumitrace_core::sim::ScenarioRunConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub radio: RadioSection,
    pub energy: PowerChainConfig,
    pub detection: ContactParams,
    pub protocol: ProtocolSection,
    pub beacon: BeaconSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub rss_at_1m_dbm: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub min_distance_m: f64,
    pub sensitivity_floor_dbm: f64,
    /// dB offset per transmit-power setting, keyed by the dBm value.
    pub tx_offsets_db: BTreeMap<String, f64>,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            rss_at_1m_dbm: -60.0,
            path_loss_exponent: 2.0,
            shadowing_sigma_db: 2.0,
            min_distance_m: 0.1,
            sensitivity_floor_dbm: -100.0,
            tx_offsets_db: [("-20", -12.0), ("-14", -6.0), ("-8", 0.0), ("-2", 6.0), ("4", 12.0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

impl RadioSection {
    pub fn build_model(&self) -> Result<RadioModel, CliError> {
        let mut offsets = BTreeMap::new();
        for (key, offset) in &self.tx_offsets_db {
            let dbm: i8 = key
                .parse()
                .map_err(|_| CliError::input(format!("bad tx power key in config: {key}")))?;
            offsets.insert(dbm, *offset);
        }
        RadioModel::new(
            self.rss_at_1m_dbm,
            self.path_loss_exponent,
            self.shadowing_sigma_db,
            self.min_distance_m,
            offsets,
        )
        .map_err(|e| CliError::input(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub retention_s: u64,
    pub publish_bucket_s: u64,
    pub scan_period_s: u64,
    pub scan_active_s: u64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            retention_s: lumitrace_core::protocol::DEFAULT_RETENTION_S,
            publish_bucket_s: lumitrace_core::protocol::DEFAULT_PUBLISH_BUCKET_S,
            scan_period_s: 1,
            scan_active_s: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeaconSection {
    pub adv_interval_ms: f64,
    pub tx_dbm: i8,
    pub rotation_epoch_s: u64,
}

impl Default for BeaconSection {
    fn default() -> Self {
        BeaconSection {
            adv_interval_ms: 100.0,
            tx_dbm: -8,
            rotation_epoch_s: lumitrace_core::identity::DEFAULT_ROTATION_EPOCH_S,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub trials: usize,
    pub samples_per_link: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            area_width_m: 10.0,
            area_height_m: 10.0,
            trials: 10_000,
            samples_per_link: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.radio.build_model()?;
        self.energy
            .validate()
            .map_err(|e| CliError::input(e.to_string()))?;
        let d = &self.detection;
        let bad_distance = !d.distance_threshold_m.is_finite() || d.distance_threshold_m <= 0.0;
        if d.window_s == 0 || d.duration_threshold_s == 0 || bad_distance {
            return Err(CliError::input(
                "detection window and thresholds must be positive",
            ));
        }
        if self.protocol.publish_bucket_s == 0 {
            return Err(CliError::input("publish bucket must be positive"));
        }
        if self.beacon.rotation_epoch_s == 0 {
            return Err(CliError::input("rotation epoch must be positive"));
        }
        if self.simulation.trials == 0 || self.simulation.samples_per_link == 0 {
            return Err(CliError::input(
                "simulation trials and samples per link must be positive",
            ));
        }
        Ok(())
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            sensitivity_floor_dbm: self.radio.sensitivity_floor_dbm,
            scan_period_s: self.protocol.scan_period_s,
            scan_active_s: self.protocol.scan_active_s,
        }
    }

    pub fn tx(&self) -> TxPower {
        TxPower::new(self.beacon.tx_dbm)
    }

    pub fn scenario_run_config(&self) -> Result<ScenarioRunConfig, CliError> {
        Ok(ScenarioRunConfig {
            radio: self.radio.build_model()?,
            power: self.energy.clone(),
            contact: self.detection,
            scan: self.scan_config(),
            retention_s: self.protocol.retention_s,
            publish_bucket_s: self.protocol.publish_bucket_s,
            rotation_epoch_s: self.beacon.rotation_epoch_s,
            adv_interval_ms: self.beacon.adv_interval_ms,
            reconcile_tx: self.tx(),
        })
    }

    /// Echo the merged configuration to stderr for reproducibility.
    pub fn echo(&self, seed: Option<u64>) {
        eprintln!("# effective configuration");
        match toml::to_string(self) {
            Ok(text) => {
                for line in text.lines() {
                    eprintln!("# {line}");
                }
            }
            Err(e) => eprintln!("# <unserializable: {e}>"),
        }
        if let Some(seed) = seed {
            eprintln!("# seed = {seed}");
        }
    }
}
