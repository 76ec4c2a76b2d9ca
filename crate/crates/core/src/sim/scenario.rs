//! Scripted end-to-end scenarios: timed beacon broadcasts gated by the
//! energy model, user scanning, hospital reporting, authority ingest, and
//! final reconciliation, all recorded in an event ledger.
//!
//! Scripts are line-oriented text:
//!
//! ```text
//! seed 42
//! duration 1260
//! step 1
//! beacon b1 at 4.0 5.0 tx -8
//! lighting b1 profiles/office.csv
//! battery b1 0.5
//! user u1 path 4.5,5.0@0 6.0,5.0@600
//! at 1200 report u1
//! ```
//!
//! `lighting` paths resolve relative to the script file. Waypoints are
//! `x,y@t`; a device holds each position until the next waypoint.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ledger::{EntityKind, EventLedger, LedgerEventKind};
use crate::detection::{ContactEvent, ContactParams};
use crate::energy::{step_energy, EnergyState, LightingProfile, PowerChainConfig};
use crate::identity::{make_broadcast, BeaconConfig, DeviceId, Mac};
use crate::io::read_lighting_profile;
use crate::protocol::{
    hospital_report, user_reconcile, user_scan_tick, AuthorityStore, HeardBroadcast, ProtocolError,
    ScanConfig, UserDevice, DEFAULT_PUBLISH_BUCKET_S, DEFAULT_RETENTION_S,
};
use crate::radio::{RadioError, RadioModel, TxPower};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    File(#[from] crate::io::FileError),
    #[error("energy model: {0}")]
    Energy(#[from] crate::energy::EnergyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeaconSpec {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub tx_dbm: i8,
    pub lighting: Option<PathBuf>,
    pub battery_mah: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time_s: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub label: String,
    pub waypoints: Vec<Waypoint>,
}

impl UserSpec {
    /// Position at time `t`: the last waypoint reached, or the first one
    /// before the path starts.
    pub fn position_at(&self, t: u64) -> (f64, f64) {
        let mut pos = (self.waypoints[0].x, self.waypoints[0].y);
        for w in &self.waypoints {
            if w.time_s <= t {
                pos = (w.x, w.y);
            } else {
                break;
            }
        }
        pos
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    pub time_s: u64,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub seed: u64,
    pub duration_s: u64,
    pub step_s: u64,
    pub beacons: Vec<BeaconSpec>,
    pub users: Vec<UserSpec>,
    pub reports: Vec<ReportSpec>,
}

/// Parse a scenario script. Errors carry the offending line number.
pub fn parse_scenario(text: &str) -> Result<ScenarioScript, ScenarioError> {
    let mut seed = 0u64;
    let mut duration: Option<u64> = None;
    let mut step = 1u64;
    let mut beacons: Vec<BeaconSpec> = Vec::new();
    let mut users: Vec<UserSpec> = Vec::new();
    let mut reports: Vec<ReportSpec> = Vec::new();

    let err = |line: usize, msg: String| ScenarioError::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "seed" => {
                seed = parse_token(&tokens, 1, line_no, "seed value")?;
            }
            "duration" => {
                duration = Some(parse_token(&tokens, 1, line_no, "duration seconds")?);
            }
            "step" => {
                step = parse_token(&tokens, 1, line_no, "step seconds")?;
                if step == 0 {
                    return Err(err(line_no, "step must be positive".into()));
                }
            }
            "beacon" => {
                // beacon <label> at <x> <y> tx <dbm>
                if tokens.len() != 7 || tokens[2] != "at" || tokens[5] != "tx" {
                    return Err(err(
                        line_no,
                        "expected: beacon <label> at <x> <y> tx <dbm>".into(),
                    ));
                }
                let label = tokens[1].to_string();
                if beacons.iter().any(|b| b.label == label) {
                    return Err(err(line_no, format!("duplicate beacon label {label}")));
                }
                beacons.push(BeaconSpec {
                    label,
                    x: parse_token(&tokens, 3, line_no, "x coordinate")?,
                    y: parse_token(&tokens, 4, line_no, "y coordinate")?,
                    tx_dbm: parse_token(&tokens, 6, line_no, "tx power dBm")?,
                    lighting: None,
                    battery_mah: None,
                });
            }
            "lighting" => {
                if tokens.len() != 3 {
                    return Err(err(line_no, "expected: lighting <beacon> <profile-file>".into()));
                }
                let beacon = beacons
                    .iter_mut()
                    .find(|b| b.label == tokens[1])
                    .ok_or_else(|| err(line_no, format!("unknown beacon {}", tokens[1])))?;
                beacon.lighting = Some(PathBuf::from(tokens[2]));
            }
            "battery" => {
                if tokens.len() != 3 {
                    return Err(err(line_no, "expected: battery <beacon> <mah>".into()));
                }
                let mah: f64 = parse_token(&tokens, 2, line_no, "battery mAh")?;
                let beacon = beacons
                    .iter_mut()
                    .find(|b| b.label == tokens[1])
                    .ok_or_else(|| err(line_no, format!("unknown beacon {}", tokens[1])))?;
                beacon.battery_mah = Some(mah);
            }
            "user" => {
                // user <label> path <x,y@t> [...]
                if tokens.len() < 4 || tokens[2] != "path" {
                    return Err(err(
                        line_no,
                        "expected: user <label> path <x,y@t> [<x,y@t> ...]".into(),
                    ));
                }
                let label = tokens[1].to_string();
                if users.iter().any(|u| u.label == label) {
                    return Err(err(line_no, format!("duplicate user label {label}")));
                }
                let mut waypoints = Vec::new();
                for token in &tokens[3..] {
                    waypoints.push(parse_waypoint(token, line_no)?);
                }
                for pair in waypoints.windows(2) {
                    if pair[1].time_s <= pair[0].time_s {
                        return Err(err(line_no, "waypoint times must strictly increase".into()));
                    }
                }
                users.push(UserSpec { label, waypoints });
            }
            "at" => {
                // at <t> report <user>
                if tokens.len() != 4 || tokens[2] != "report" {
                    return Err(err(line_no, "expected: at <t> report <user>".into()));
                }
                let time_s = parse_token(&tokens, 1, line_no, "report time")?;
                let user = tokens[3].to_string();
                if !users.iter().any(|u| u.label == user) {
                    return Err(err(line_no, format!("unknown user {user}")));
                }
                reports.push(ReportSpec { time_s, user });
            }
            other => {
                return Err(err(line_no, format!("unknown directive {other}")));
            }
        }
    }

    let duration_s =
        duration.ok_or_else(|| ScenarioError::Invalid("missing duration directive".into()))?;
    for report in &reports {
        if report.time_s >= duration_s {
            return Err(ScenarioError::Invalid(format!(
                "report for {} at t={} never fires (duration {duration_s})",
                report.user, report.time_s
            )));
        }
    }
    Ok(ScenarioScript {
        seed,
        duration_s,
        step_s: step,
        beacons,
        users,
        reports,
    })
}

fn parse_token<T: std::str::FromStr>(
    tokens: &[&str],
    index: usize,
    line: usize,
    what: &str,
) -> Result<T, ScenarioError> {
    let token = tokens.get(index).ok_or_else(|| ScenarioError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| ScenarioError::Parse {
        line,
        msg: format!("bad {what}: {token}"),
    })
}

fn parse_waypoint(token: &str, line: usize) -> Result<Waypoint, ScenarioError> {
    let bad = || ScenarioError::Parse {
        line,
        msg: format!("bad waypoint {token}, expected x,y@t"),
    };
    let (coords, time) = token.split_once('@').ok_or_else(bad)?;
    let (x, y) = coords.split_once(',').ok_or_else(bad)?;
    Ok(Waypoint {
        time_s: time.parse().map_err(|_| bad())?,
        x: x.parse().map_err(|_| bad())?,
        y: y.parse().map_err(|_| bad())?,
    })
}

/// Everything a scenario run needs beyond the script itself.
#[derive(Debug, Clone)]
pub struct ScenarioRunConfig {
    pub radio: RadioModel,
    pub power: PowerChainConfig,
    pub contact: ContactParams,
    pub scan: ScanConfig,
    pub retention_s: u64,
    pub publish_bucket_s: u64,
    pub rotation_epoch_s: u64,
    pub adv_interval_ms: f64,
    /// Working point used when inverting RSS during reconciliation.
    pub reconcile_tx: TxPower,
}

impl Default for ScenarioRunConfig {
    fn default() -> Self {
        ScenarioRunConfig {
            radio: RadioModel::default(),
            power: PowerChainConfig::default(),
            contact: ContactParams::default(),
            scan: ScanConfig::default(),
            retention_s: DEFAULT_RETENTION_S,
            publish_bucket_s: DEFAULT_PUBLISH_BUCKET_S,
            rotation_epoch_s: crate::identity::DEFAULT_ROTATION_EPOCH_S,
            adv_interval_ms: 100.0,
            reconcile_tx: TxPower::new(crate::radio::DEFAULT_TX_DBM),
        }
    }
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub ledger: EventLedger,
    /// Contact events found at reconciliation, per non-reporting user.
    pub contacts: BTreeMap<String, Vec<ContactEvent>>,
    pub published_version: u64,
    pub published_entries: usize,
}

struct SimBeacon {
    label: String,
    position: (f64, f64),
    config: BeaconConfig,
    power: PowerChainConfig,
    profile: LightingProfile,
    load_a: f64,
    state: EnergyState,
}

/// Deterministic per-beacon secrets: device ID and MAC drawn from a digest
/// of the scenario seed and the beacon label.
fn beacon_identity(seed: u64, label: &str) -> (DeviceId, Mac) {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_be_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut device = [0u8; 18];
    device.copy_from_slice(&digest[..18]);
    let mut mac = [0u8; 6];
    mac.copy_from_slice(&digest[18..24]);
    (DeviceId::from_bytes(device), Mac::from_bytes(mac))
}

/// Run a parsed scenario. `base_dir` anchors relative lighting paths.
pub fn run_scenario(
    script: &ScenarioScript,
    base_dir: &Path,
    config: &ScenarioRunConfig,
) -> Result<ScenarioOutcome, ScenarioError> {
    config.power.validate()?;
    let mut beacons = Vec::with_capacity(script.beacons.len());
    for spec in &script.beacons {
        let tx = TxPower::new(spec.tx_dbm);
        if !config.radio.supports(tx) {
            return Err(ScenarioError::Invalid(format!(
                "beacon {} uses unconfigured tx power {}",
                spec.label, spec.tx_dbm
            )));
        }
        let mut power = config.power.clone();
        if let Some(mah) = spec.battery_mah {
            power.backup_battery_mah = mah;
        }
        let profile = match &spec.lighting {
            Some(path) => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                read_lighting_profile(&resolved)?
            }
            // Undeclared lighting means a well-lit deployment.
            None => LightingProfile::constant(1000.0),
        };
        let (device_id, mac) = beacon_identity(script.seed, &spec.label);
        let load_a = power.consumption_current(config.adv_interval_ms, tx)?;
        let state = EnergyState::cold_start(&power);
        beacons.push(SimBeacon {
            label: spec.label.clone(),
            position: (spec.x, spec.y),
            config: BeaconConfig {
                device_id,
                mac,
                adv_interval_ms: config.adv_interval_ms,
                tx,
                rotation_epoch_s: config.rotation_epoch_s,
            },
            power,
            profile,
            load_a,
            state,
        });
    }

    if script.users.is_empty() {
        return Err(ScenarioError::Invalid("scenario declares no users".into()));
    }
    let mut users: Vec<(UserSpec, UserDevice)> = script
        .users
        .iter()
        .map(|spec| {
            (
                spec.clone(),
                UserDevice::new(spec.label.clone(), config.scan),
            )
        })
        .collect();
    let mac_to_label: BTreeMap<Mac, String> = beacons
        .iter()
        .map(|b| (b.config.mac, b.label.clone()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let mut ledger = EventLedger::new();
    let mut store = AuthorityStore::new(config.publish_bucket_s);
    let mut reporters: BTreeSet<String> = BTreeSet::new();

    let mut t = 0u64;
    while t < script.duration_s {
        // Beacons: advance energy, then broadcast if still alive.
        let mut on_air: Vec<(HeardBroadcast, (f64, f64))> = Vec::new();
        for b in &mut beacons {
            let lux = b.profile.lux_at((t % 86_400) as u32);
            let was_alive = b.state.alive;
            let (next, _) = step_energy(&b.state, &b.power, lux, b.load_a, script.step_s as f64);
            b.state = next;
            if was_alive && !b.state.alive {
                ledger.record(t, EntityKind::Beacon, &b.label, LedgerEventKind::Depleted);
            }
            if let Some(payload) = make_broadcast(&b.config, t, &b.state) {
                ledger.record(
                    t,
                    EntityKind::Beacon,
                    &b.label,
                    LedgerEventKind::RfTransmission {
                        ephemeral_id: payload.ephemeral_id,
                    },
                );
                on_air.push((
                    HeardBroadcast {
                        payload,
                        distance_m: 0.0,
                        tx: b.config.tx,
                    },
                    b.position,
                ));
            }
        }

        // Users: scan whatever is on the air this tick.
        for (spec, device) in &mut users {
            let pos = spec.position_at(t);
            let heard: Vec<HeardBroadcast> = on_air
                .iter()
                .map(|(h, bpos)| HeardBroadcast {
                    distance_m: ((pos.0 - bpos.0).powi(2) + (pos.1 - bpos.1).powi(2)).sqrt(),
                    ..*h
                })
                .collect();
            let appended = user_scan_tick(device, &heard, &config.radio, t, &mut rng)?;
            for record in appended {
                let from = mac_to_label
                    .get(&record.beacon_mac)
                    .cloned()
                    .unwrap_or_default();
                ledger.record(
                    t,
                    EntityKind::User,
                    &device.label,
                    LedgerEventKind::Reception {
                        from_beacon: from,
                        rssi_dbm: record.rssi_dbm,
                    },
                );
            }
        }

        // Scheduled positive reports; a report lands on the tick covering
        // its timestamp, so off-grid times still fire under step > 1.
        let tick_end = t + script.step_s;
        for report_spec in script
            .reports
            .iter()
            .filter(|r| r.time_s >= t && r.time_s < tick_end)
        {
            let device = users
                .iter()
                .find(|(s, _)| s.label == report_spec.user)
                .map(|(_, d)| d)
                .expect("validated at parse time");
            let report_id = format!("report-{}-{}", report_spec.user, t);
            let report = hospital_report(device, t, config.retention_s, &report_id)
                .map_err(|e: ProtocolError| ScenarioError::Invalid(e.to_string()))?;
            ledger.record(
                t,
                EntityKind::Hospital,
                "hospital",
                LedgerEventKind::ReportSubmitted {
                    report_id: report_id.clone(),
                    records: report.records.len(),
                },
            );
            let outcome = store.ingest(&report);
            ledger.record(
                t,
                EntityKind::Authority,
                "authority",
                LedgerEventKind::IngestCommitted {
                    version: outcome.version,
                    new_entries: outcome.new_entries,
                    duplicate: outcome.duplicate,
                },
            );
            reporters.insert(report_spec.user.clone());
        }

        t += script.step_s;
    }

    // Final reconciliation for everyone who did not report.
    let list = store.snapshot();
    let mut contacts = BTreeMap::new();
    for (spec, device) in &users {
        if reporters.contains(&spec.label) {
            continue;
        }
        let events = user_reconcile(
            device,
            &list,
            &config.radio,
            config.reconcile_tx,
            &config.contact,
            config.publish_bucket_s,
        )?;
        ledger.record(
            script.duration_s,
            EntityKind::User,
            &spec.label,
            LedgerEventKind::Reconcile {
                published_version: list.version,
                events_found: events.len(),
            },
        );
        contacts.insert(spec.label.clone(), events);
    }

    Ok(ScenarioOutcome {
        ledger,
        contacts,
        published_version: store.version(),
        published_entries: store.len(),
    })
}

/// Parse and run a scenario file in one step.
pub fn run_scenario_file(
    path: &Path,
    config: &ScenarioRunConfig,
) -> Result<ScenarioOutcome, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::io::FileError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let script = parse_scenario(&text)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    run_scenario(&script, base_dir, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCRIPT: &str = "\
# two beacons, two users
seed 7
duration 120
step 1
beacon b1 at 4.0 5.0 tx -8
beacon b2 at 6.0 5.0 tx -8
battery b2 0.5
user u1 path 4.9,5.0@0
user u2 path 5.1,5.0@0 5.2,5.0@60
at 60 report u1
";

    #[test]
    fn the_reference_script_parses() {
        let s = parse_scenario(SCRIPT).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.duration_s, 120);
        assert_eq!(s.beacons.len(), 2);
        assert_eq!(s.beacons[1].battery_mah, Some(0.5));
        assert_eq!(s.users.len(), 2);
        assert_eq!(s.users[1].waypoints.len(), 2);
        assert_eq!(s.reports.len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "seed 1\nduration 10\nbeacon b1 at x 5.0 tx -8\n";
        match parse_scenario(bad) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let unknown = "seed 1\nflummox\n";
        match parse_scenario(unknown) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_duration_is_rejected() {
        assert!(matches!(
            parse_scenario("seed 1\n"),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn report_for_unknown_user_is_rejected() {
        let bad = "duration 10\nat 5 report ghost\n";
        assert!(matches!(bad.parse_err_line(), Some(2)));
    }

    #[test]
    fn reports_after_the_end_are_rejected() {
        let bad = "duration 100\nuser u path 1,1@0\nat 100 report u\n";
        assert!(matches!(
            parse_scenario(bad),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn off_grid_reports_fire_under_coarse_steps() {
        let text = "\
seed 3
duration 120
step 10
beacon b at 1.0 1.0 tx -8
user u1 path 1.5,1.0@0
user u2 path 2.0,1.0@0
at 57 report u1
";
        let script = parse_scenario(text).unwrap();
        let outcome =
            run_scenario(&script, Path::new("."), &ScenarioRunConfig::default()).unwrap();
        assert_eq!(outcome.published_version, 1);
        let ingests = outcome
            .ledger
            .count_matching(|e| matches!(e.kind, LedgerEventKind::IngestCommitted { .. }));
        assert_eq!(ingests, 1);
    }

    trait ParseErrLine {
        fn parse_err_line(&self) -> Option<usize>;
    }
    impl ParseErrLine for &str {
        fn parse_err_line(&self) -> Option<usize> {
            match parse_scenario(self) {
                Err(ScenarioError::Parse { line, .. }) => Some(line),
                _ => None,
            }
        }
    }

    #[test]
    fn waypoints_hold_until_the_next_one() {
        let spec = UserSpec {
            label: "u".into(),
            waypoints: vec![
                Waypoint { time_s: 10, x: 1.0, y: 1.0 },
                Waypoint { time_s: 20, x: 2.0, y: 2.0 },
            ],
        };
        assert_eq!(spec.position_at(0), (1.0, 1.0));
        assert_eq!(spec.position_at(10), (1.0, 1.0));
        assert_eq!(spec.position_at(19), (1.0, 1.0));
        assert_eq!(spec.position_at(20), (2.0, 2.0));
        assert_eq!(spec.position_at(500), (2.0, 2.0));
    }

    #[test]
    fn beacon_identities_are_deterministic_and_distinct() {
        let (d1, m1) = beacon_identity(7, "b1");
        let (d1b, m1b) = beacon_identity(7, "b1");
        let (d2, m2) = beacon_identity(7, "b2");
        assert_eq!(d1, d1b);
        assert_eq!(m1, m1b);
        assert_ne!(d1, d2);
        assert_ne!(m1, m2);
        let (d3, _) = beacon_identity(8, "b1");
        assert_ne!(d1, d3);
    }

    #[test]
    fn scenario_runs_are_reproducible() {
        let script = parse_scenario(SCRIPT).unwrap();
        let config = ScenarioRunConfig::default();
        let a = run_scenario(&script, Path::new("."), &config).unwrap();
        let b = run_scenario(&script, Path::new("."), &config).unwrap();
        assert_eq!(a.ledger.events(), b.ledger.events());
        assert_eq!(a.contacts, b.contacts);
        assert_eq!(a.published_version, b.published_version);
    }

    #[test]
    fn users_never_transmit() {
        let script = parse_scenario(SCRIPT).unwrap();
        let outcome =
            run_scenario(&script, Path::new("."), &ScenarioRunConfig::default()).unwrap();
        assert_eq!(outcome.ledger.count_rf_transmissions_by(EntityKind::User), 0);
        assert!(outcome.ledger.count_rf_transmissions_by(EntityKind::Beacon) > 0);
    }

    #[test]
    fn reporters_are_excluded_from_reconciliation() {
        let script = parse_scenario(SCRIPT).unwrap();
        let outcome =
            run_scenario(&script, Path::new("."), &ScenarioRunConfig::default()).unwrap();
        assert!(outcome.contacts.contains_key("u2"));
        assert!(!outcome.contacts.contains_key("u1"));
        assert_eq!(outcome.published_version, 1);
    }
}
