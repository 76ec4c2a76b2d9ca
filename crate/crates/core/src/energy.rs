//! Beacon power-chain simulation: light harvesting into a supercapacitor
//! with a backup battery, firmware consumption scaling, lifetime prediction,
//! and the architecture-level daily energy comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::TxPower;

/// Advertising interval the firmware consumption figure was measured at.
pub const REFERENCE_ADV_INTERVAL_MS: f64 = 100.0;
/// Shortest advertising interval BLE allows.
pub const MIN_ADV_INTERVAL_MS: f64 = 20.0;
/// Hours in a Julian year, used for all lifetime conversions.
pub const HOURS_PER_YEAR: f64 = 24.0 * 365.25;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid power chain config: {0}")]
    InvalidConfig(String),
    #[error("invalid lighting profile: {0}")]
    InvalidProfile(String),
}

/// Static description of the harvesting hardware and firmware load.
///
/// The consumption model anchors on one measured working point
/// (`firmware_current_a` at 100 ms / -8 dBm) and scales with a duty-cycle
/// term: a constant sleep floor plus a per-advertisement charge whose RF
/// share grows linearly with radiated power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerChainConfig {
    pub operating_voltage_v: f64,
    pub supercap_capacitance_f: f64,
    pub supercap_max_v: f64,
    pub backup_battery_mah: f64,
    pub harvest_w_per_lux: f64,
    pub min_harvest_lux: f64,
    pub firmware_current_a: f64,
    pub sleep_floor_a: f64,
    /// Share of the per-advertisement charge that does not scale with
    /// radiated power (processing, ramp-up, hashing).
    pub tx_fixed_fraction: f64,
    pub reference_tx_dbm: i8,
    /// One-off debit covering the primary-buffer boot charge at cold start.
    pub boot_energy_j: f64,
    pub initial_supercap_v: f64,
}

impl Default for PowerChainConfig {
    fn default() -> Self {
        PowerChainConfig {
            operating_voltage_v: 1.8,
            supercap_capacitance_f: 1.0,
            supercap_max_v: 5.5,
            backup_battery_mah: 235.0,
            // Sized so a 500 lux, 12 h/day office profile breaks even at the
            // reference load: 21.96 uW * 86400 s / (500 lux * 43200 s).
            harvest_w_per_lux: 8.784e-8,
            min_harvest_lux: 100.0,
            firmware_current_a: 12.2e-6,
            sleep_floor_a: 2.0e-6,
            tx_fixed_fraction: 0.5,
            reference_tx_dbm: -8,
            boot_energy_j: 1e-4,
            initial_supercap_v: 0.0,
        }
    }
}

impl PowerChainConfig {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("operating_voltage_v", self.operating_voltage_v),
            ("supercap_capacitance_f", self.supercap_capacitance_f),
            ("supercap_max_v", self.supercap_max_v),
            ("harvest_w_per_lux", self.harvest_w_per_lux),
            ("firmware_current_a", self.firmware_current_a),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(EnergyError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.backup_battery_mah < 0.0
            || self.min_harvest_lux < 0.0
            || self.boot_energy_j < 0.0
            || self.initial_supercap_v < 0.0
        {
            return Err(EnergyError::InvalidConfig(
                "battery, lux cutoff, boot debit and initial voltage must be non-negative".into(),
            ));
        }
        if self.supercap_max_v < self.operating_voltage_v {
            return Err(EnergyError::InvalidConfig(
                "supercap max voltage below operating voltage".into(),
            ));
        }
        if self.sleep_floor_a < 0.0 || self.sleep_floor_a >= self.firmware_current_a {
            return Err(EnergyError::InvalidConfig(
                "sleep floor must be non-negative and below the firmware current".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.tx_fixed_fraction) {
            return Err(EnergyError::InvalidConfig(
                "tx_fixed_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Average supply current for a given advertising interval and transmit
    /// power. Returns exactly `firmware_current_a` at the calibration point
    /// (100 ms, reference tx), and decreases strictly with the interval.
    pub fn consumption_current(
        &self,
        adv_interval_ms: f64,
        tx: TxPower,
    ) -> Result<f64, EnergyError> {
        if !adv_interval_ms.is_finite() || adv_interval_ms < MIN_ADV_INTERVAL_MS {
            return Err(EnergyError::InvalidConfig(format!(
                "advertising interval {adv_interval_ms} ms below the {MIN_ADV_INTERVAL_MS} ms BLE minimum"
            )));
        }
        let active_ref = self.firmware_current_a - self.sleep_floor_a;
        Ok(self.sleep_floor_a
            + active_ref * (REFERENCE_ADV_INTERVAL_MS / adv_interval_ms) * self.tx_scale(tx))
    }

    /// Per-advertisement charge relative to the reference transmit power.
    pub fn tx_scale(&self, tx: TxPower) -> f64 {
        let delta_db = f64::from(tx.dbm() - self.reference_tx_dbm);
        self.tx_fixed_fraction + (1.0 - self.tx_fixed_fraction) * 10f64.powf(delta_db / 10.0)
    }

    fn supercap_energy_j(&self, v: f64) -> f64 {
        0.5 * self.supercap_capacitance_f * v * v
    }

    fn supercap_voltage(&self, e_j: f64) -> f64 {
        (2.0 * e_j / self.supercap_capacitance_f).sqrt()
    }

    fn battery_energy_j(&self, mah: f64) -> f64 {
        // mAh -> coulombs is *3.6; energy at the regulated operating voltage.
        mah * 3.6 * self.operating_voltage_v
    }

    fn battery_mah_from_energy(&self, e_j: f64) -> f64 {
        e_j / (3.6 * self.operating_voltage_v)
    }

    pub fn is_alive(&self, supercap_v: f64, battery_remaining_mah: f64) -> bool {
        supercap_v >= self.operating_voltage_v || battery_remaining_mah > 0.0
    }

    /// Daily energy drawn from light, given the 24 h profile.
    pub fn daily_harvest_j(&self, profile: &LightingProfile) -> f64 {
        profile
            .segments()
            .map(|(duration_s, lux)| self.harvest_power_w(lux) * duration_s as f64)
            .sum()
    }

    fn harvest_power_w(&self, lux: f64) -> f64 {
        if lux >= self.min_harvest_lux {
            self.harvest_w_per_lux * lux
        } else {
            0.0
        }
    }
}

/// Instantaneous state of one beacon's energy stores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub supercap_v: f64,
    pub battery_remaining_mah: f64,
    pub alive: bool,
}

impl EnergyState {
    pub fn new(config: &PowerChainConfig, supercap_v: f64, battery_remaining_mah: f64) -> Self {
        let v = supercap_v.clamp(0.0, config.supercap_max_v);
        let mah = battery_remaining_mah.max(0.0);
        EnergyState {
            supercap_v: v,
            battery_remaining_mah: mah,
            alive: config.is_alive(v, mah),
        }
    }

    /// State right after boot: configured initial supercap voltage, full
    /// battery, minus the one-off boot debit (supercap first).
    pub fn cold_start(config: &PowerChainConfig) -> Self {
        let mut e_sc = config.supercap_energy_j(config.initial_supercap_v);
        let mut battery = config.backup_battery_mah;
        let mut debit = config.boot_energy_j;
        if e_sc >= debit {
            e_sc -= debit;
        } else {
            debit -= e_sc;
            e_sc = 0.0;
            battery = (battery - config.battery_mah_from_energy(debit)).max(0.0);
        }
        EnergyState::new(config, config.supercap_voltage(e_sc), battery)
    }
}

/// Per-step energy bookkeeping, for conservation checks and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepFlow {
    pub harvested_j: f64,
    /// Energy the load requested over the step.
    pub load_j: f64,
    /// Energy actually delivered to the load (less than `load_j` only when
    /// both stores are exhausted).
    pub supplied_j: f64,
    pub battery_drawn_j: f64,
    /// Surplus discarded once the supercap is full.
    pub discarded_j: f64,
}

/// Advance one beacon's energy state by `dt_s` seconds.
///
/// Harvested energy is routed to the supercapacitor. The supercap powers the
/// load while it sits at or above the operating voltage; below that the
/// backup battery takes over. The supply decision is made once per step from
/// the entry state, so steps should be small against the charge dynamics.
pub fn step_energy(
    state: &EnergyState,
    config: &PowerChainConfig,
    lux: f64,
    load_a: f64,
    dt_s: f64,
) -> (EnergyState, StepFlow) {
    assert!(dt_s > 0.0, "step must be positive");
    let harvested_j = config.harvest_power_w(lux) * dt_s;
    let load_j = load_a * config.operating_voltage_v * dt_s;

    let e_max = config.supercap_energy_j(config.supercap_max_v);
    let mut e_sc = config.supercap_energy_j(state.supercap_v);
    let mut battery_energy = config.battery_energy_j(state.battery_remaining_mah);

    let mut flow = StepFlow {
        harvested_j,
        load_j,
        ..StepFlow::default()
    };

    if state.supercap_v >= config.operating_voltage_v {
        // Supercap supplies; any shortfall falls through to the battery.
        e_sc += harvested_j - load_j;
        flow.supplied_j = load_j;
        if e_sc < 0.0 {
            let shortfall = -e_sc;
            e_sc = 0.0;
            let from_battery = shortfall.min(battery_energy);
            battery_energy -= from_battery;
            flow.battery_drawn_j = from_battery;
            flow.supplied_j = load_j - (shortfall - from_battery);
        }
    } else {
        // Battery supplies the load; harvest still charges the supercap.
        e_sc += harvested_j;
        let from_battery = load_j.min(battery_energy);
        battery_energy -= from_battery;
        flow.battery_drawn_j = from_battery;
        flow.supplied_j = from_battery;
    }

    if e_sc > e_max {
        flow.discarded_j = e_sc - e_max;
        e_sc = e_max;
    }

    let next = EnergyState::new(
        config,
        config.supercap_voltage(e_sc),
        config.battery_mah_from_energy(battery_energy),
    );
    (next, flow)
}

/// 24 h piecewise-constant illuminance profile.
///
/// Each sample holds from its time of day until the next sample; the last
/// segment wraps past midnight to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct LightingProfile {
    samples: Vec<(u32, f64)>,
}

pub const SECONDS_PER_DAY: u32 = 86_400;

impl LightingProfile {
    pub fn new(samples: Vec<(u32, f64)>) -> Result<Self, EnergyError> {
        if samples.is_empty() {
            return Err(EnergyError::InvalidProfile("profile has no samples".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(EnergyError::InvalidProfile(format!(
                    "sample times must strictly increase ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for (t, lux) in &samples {
            if *t >= SECONDS_PER_DAY {
                return Err(EnergyError::InvalidProfile(format!(
                    "time of day {t} outside one 24 h period"
                )));
            }
            if !lux.is_finite() || *lux < 0.0 {
                return Err(EnergyError::InvalidProfile(format!(
                    "illuminance must be non-negative, got {lux}"
                )));
            }
        }
        Ok(LightingProfile { samples })
    }

    pub fn constant(lux: f64) -> Self {
        LightingProfile::new(vec![(0, lux)]).expect("constant profile is valid")
    }

    pub fn lux_at(&self, time_of_day_s: u32) -> f64 {
        let t = time_of_day_s % SECONDS_PER_DAY;
        match self.samples.iter().rev().find(|(start, _)| *start <= t) {
            Some((_, lux)) => *lux,
            // Before the first sample: still inside the wrapped last segment.
            None => self.samples.last().expect("non-empty").1,
        }
    }

    /// (duration_s, lux) segments covering exactly one day.
    pub fn segments(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        let n = self.samples.len();
        (0..n).map(move |i| {
            let (start, lux) = self.samples[i];
            let end = if i + 1 < n {
                self.samples[i + 1].0
            } else {
                // Wrap: last segment runs to the first sample next day.
                self.samples[0].0 + SECONDS_PER_DAY
            };
            (end - start, lux)
        })
    }

    pub fn hours_lit_per_day(&self, min_lux: f64) -> f64 {
        self.segments()
            .filter(|(_, lux)| *lux >= min_lux)
            .map(|(d, _)| d as f64)
            .sum::<f64>()
            / 3600.0
    }

    /// Total daily illuminance dose in lux-hours.
    pub fn daily_dose_lux_h(&self) -> f64 {
        self.segments()
            .map(|(d, lux)| lux * d as f64 / 3600.0)
            .sum()
    }
}

/// Predicted operating lifetime under a lighting profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifetime {
    /// Daily harvest covers daily consumption; the node runs indefinitely.
    EnergyNeutral,
    Finite { years: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimePrediction {
    pub lifetime: Lifetime,
    /// Same battery, no harvesting.
    pub battery_only_years: f64,
    pub daily_harvest_j: f64,
    pub daily_consumption_j: f64,
}

impl LifetimePrediction {
    /// Lifetime relative to the battery-only baseline; `None` when neutral.
    pub fn extension_ratio(&self) -> Option<f64> {
        match self.lifetime {
            Lifetime::EnergyNeutral => None,
            Lifetime::Finite { years } => Some(years / self.battery_only_years),
        }
    }

    pub fn meets_extension(&self, min_ratio: f64) -> bool {
        match self.extension_ratio() {
            None => true,
            Some(r) => r >= min_ratio,
        }
    }
}

/// Daily energy-balance lifetime model: a deficit between consumption and
/// harvest drains the backup battery at a constant rate.
pub fn predict_lifetime(
    config: &PowerChainConfig,
    profile: &LightingProfile,
    adv_interval_ms: f64,
    tx: TxPower,
) -> Result<LifetimePrediction, EnergyError> {
    config.validate()?;
    let load_a = config.consumption_current(adv_interval_ms, tx)?;
    let daily_consumption_j =
        load_a * config.operating_voltage_v * f64::from(SECONDS_PER_DAY);
    let daily_harvest_j = config.daily_harvest_j(profile);

    // Battery-only baseline: capacity over current draw.
    let battery_only_years = config.backup_battery_mah * 1e-3 / load_a / HOURS_PER_YEAR;

    let lifetime = if daily_harvest_j >= daily_consumption_j {
        Lifetime::EnergyNeutral
    } else {
        let deficit_j_per_day = daily_consumption_j - daily_harvest_j;
        let days = config.battery_energy_j(config.backup_battery_mah) / deficit_j_per_day;
        Lifetime::Finite {
            years: days / 365.25,
        }
    };
    Ok(LifetimePrediction {
        lifetime,
        battery_only_years,
        daily_harvest_j,
        daily_consumption_j,
    })
}

/// Daily cost coefficients for the architecture comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureCosts {
    /// RF transmission cost per device per day.
    pub alpha: f64,
    /// RF receiving (scanning) cost per device per day.
    pub beta: f64,
    /// Cellular server-communication cost per device per day.
    pub gamma: f64,
    /// Smartphone count.
    pub n: u64,
    /// Fixed IoT device count.
    pub m: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchitectureEnergy {
    pub decentralized: f64,
    pub hybrid: f64,
    pub iotrace: f64,
    pub this_work: f64,
}

/// Closed-form daily totals for the four architectures.
pub fn architecture_energy(costs: &ArchitectureCosts) -> ArchitectureEnergy {
    let n = costs.n as f64;
    let m = costs.m as f64;
    ArchitectureEnergy {
        decentralized: n * (costs.alpha + costs.beta),
        hybrid: n * (costs.alpha + costs.beta),
        iotrace: n * costs.alpha + m * (costs.beta + costs.gamma),
        this_work: n * costs.beta + m * costs.alpha,
    }
}

impl ArchitectureCosts {
    /// Soft checks for the intended cost regime; violations are reported,
    /// not rejected.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.alpha < self.beta && self.beta < self.gamma) {
            w.push(format!(
                "expected alpha << beta << gamma, got alpha={} beta={} gamma={}",
                self.alpha, self.beta, self.gamma
            ));
        }
        if self.n <= self.m {
            w.push(format!(
                "expected more smartphones than fixed devices, got n={} m={}",
                self.n, self.m
            ));
        }
        w
    }
}
