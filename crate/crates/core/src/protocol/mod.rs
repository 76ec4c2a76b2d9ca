//! The four-party protocol: beacons broadcast, user devices scan and log,
//! a hospital forwards a positive user's log, the authority publishes a
//! versioned list, and every device reconciles locally against it.
//!
//! User devices have no transmit path anywhere in this module; scanning,
//! reporting (via the hospital), downloading, and reconciling are the only
//! operations they take part in.

pub mod wire;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{
    distance_vector, events_from_windows, mad_distance, ContactEvent, ContactParams,
    DistanceVector, QualifiedWindow, ScanRecord, TimeWindow,
};
use crate::identity::{BroadcastPayload, EphemeralId};
use crate::radio::{RadioError, RadioModel, TxPower};

/// How long reported scan records are kept, by default.
pub const DEFAULT_RETENTION_S: u64 = 14 * 86_400;
/// Published entries carry this coarse time bucket instead of raw
/// timestamps.
pub const DEFAULT_PUBLISH_BUCKET_S: u64 = 3_600;
/// Weakest RSS a scanning device still logs.
pub const DEFAULT_SENSITIVITY_FLOOR_DBM: f64 = -100.0;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no records within the retention window; nothing to report")]
    EmptyLog,
}

/// Receiver-side scanning parameters. The duty cycle opens the scan window
/// for the first `scan_active_s` seconds of every `scan_period_s` period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub sensitivity_floor_dbm: f64,
    pub scan_period_s: u64,
    pub scan_active_s: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            sensitivity_floor_dbm: DEFAULT_SENSITIVITY_FLOOR_DBM,
            scan_period_s: 1,
            scan_active_s: 1,
        }
    }
}

impl ScanConfig {
    pub fn scanning_at(&self, clock_s: u64) -> bool {
        self.scan_period_s > 0 && clock_s % self.scan_period_s < self.scan_active_s
    }
}

/// A scan-only user device: a label, a scan configuration, and an
/// append-only log of received packets.
#[derive(Debug, Clone)]
pub struct UserDevice {
    pub label: String,
    pub scan: ScanConfig,
    log: Vec<ScanRecord>,
}

impl UserDevice {
    pub fn new(label: impl Into<String>, scan: ScanConfig) -> Self {
        UserDevice {
            label: label.into(),
            scan,
            log: Vec::new(),
        }
    }

    /// A device rebuilt around an existing log, e.g. one read from disk.
    pub fn with_log(label: impl Into<String>, scan: ScanConfig, log: Vec<ScanRecord>) -> Self {
        UserDevice {
            label: label.into(),
            scan,
            log,
        }
    }

    pub fn log(&self) -> &[ScanRecord] {
        &self.log
    }
}

/// A broadcast audible at a device this tick, with its ground-truth
/// distance and the emitting beacon's transmit power.
#[derive(Debug, Clone, Copy)]
pub struct HeardBroadcast {
    pub payload: BroadcastPayload,
    pub distance_m: f64,
    pub tx: TxPower,
}

/// One scan pass: sample the RSS of every audible broadcast and append a
/// record for each one above the sensitivity floor. Returns the appended
/// records. Outside the duty-cycle window nothing is logged.
pub fn user_scan_tick<R: Rng + ?Sized>(
    device: &mut UserDevice,
    heard: &[HeardBroadcast],
    model: &RadioModel,
    clock_s: u64,
    rng: &mut R,
) -> Result<Vec<ScanRecord>, RadioError> {
    if !device.scan.scanning_at(clock_s) {
        return Ok(Vec::new());
    }
    let mut appended = Vec::new();
    for h in heard {
        let rssi = model.sample_rss(h.tx, h.distance_m, rng)?;
        if rssi >= device.scan.sensitivity_floor_dbm {
            let record = ScanRecord {
                timestamp_s: clock_s,
                beacon_mac: h.payload.mac,
                ephemeral_id: h.payload.ephemeral_id,
                rssi_dbm: rssi,
            };
            device.log.push(record);
            appended.push(record);
        }
    }
    Ok(appended)
}

/// A positive user's retained scan log, as forwarded by the hospital.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositiveReport {
    pub report_id: String,
    pub upload_time_s: u64,
    pub records: Vec<ScanRecord>,
}

/// Build the report for a confirmed-positive user: all records within the
/// retention window, or a refusal when none remain.
pub fn hospital_report(
    device: &UserDevice,
    clock_s: u64,
    retention_s: u64,
    report_id: impl Into<String>,
) -> Result<PositiveReport, ProtocolError> {
    let cutoff = clock_s.saturating_sub(retention_s);
    let records: Vec<ScanRecord> = device
        .log
        .iter()
        .filter(|r| r.timestamp_s >= cutoff)
        .copied()
        .collect();
    if records.is_empty() {
        return Err(ProtocolError::EmptyLog);
    }
    Ok(PositiveReport {
        report_id: report_id.into(),
        upload_time_s: clock_s,
        records,
    })
}

/// One published datum: an ephemeral ID seen by a positive user, where in
/// time (coarse bucket) and how strongly (RSSI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedEntry {
    pub ephemeral_id: EphemeralId,
    pub bucket_start_s: u64,
    pub rssi_dbm: f64,
}

/// A version-stamped slice of the authority's published list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedList {
    pub version: u64,
    pub entries: Vec<PublishedEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOutcome {
    pub version: u64,
    pub new_entries: usize,
    /// True when the report id had been ingested before; the store is
    /// unchanged in that case.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy)]
struct StoredEntry {
    rssi_dbm: f64,
    version_added: u64,
}

/// The authority's store: deduplicated published entries keyed by
/// (ephemeral ID, time bucket), a strictly increasing version counter, and
/// the set of report ids already ingested.
#[derive(Debug, Clone)]
pub struct AuthorityStore {
    version: u64,
    bucket_s: u64,
    entries: BTreeMap<(EphemeralId, u64), StoredEntry>,
    seen_reports: BTreeSet<String>,
}

impl AuthorityStore {
    pub fn new(bucket_s: u64) -> Self {
        assert!(bucket_s > 0, "publish bucket must be positive");
        AuthorityStore {
            version: 0,
            bucket_s,
            entries: BTreeMap::new(),
            seen_reports: BTreeSet::new(),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bucket_s(&self) -> u64 {
        self.bucket_s
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merge a report. Entries are bucketed and deduplicated on
    /// (id, bucket) with the first-seen RSSI kept; re-ingesting a known
    /// report id changes nothing. Each new report bumps the version by
    /// exactly one.
    pub fn ingest(&mut self, report: &PositiveReport) -> IngestOutcome {
        if self.seen_reports.contains(&report.report_id) {
            return IngestOutcome {
                version: self.version,
                new_entries: 0,
                duplicate: true,
            };
        }
        self.seen_reports.insert(report.report_id.clone());
        self.version += 1;
        let mut new_entries = 0;
        for r in &report.records {
            let bucket = r.timestamp_s / self.bucket_s * self.bucket_s;
            let key = (r.ephemeral_id, bucket);
            if let std::collections::btree_map::Entry::Vacant(slot) = self.entries.entry(key) {
                slot.insert(StoredEntry {
                    rssi_dbm: r.rssi_dbm,
                    version_added: self.version,
                });
                new_entries += 1;
            }
        }
        IngestOutcome {
            version: self.version,
            new_entries,
            duplicate: false,
        }
    }

    /// Entries added after `since`, plus the current version.
    pub fn published_since(&self, since: u64) -> PublishedList {
        let entries = self
            .entries
            .iter()
            .filter(|(_, e)| e.version_added > since)
            .map(|((id, bucket), e)| PublishedEntry {
                ephemeral_id: *id,
                bucket_start_s: *bucket,
                rssi_dbm: e.rssi_dbm,
            })
            .collect();
        PublishedList {
            version: self.version,
            entries,
        }
    }

    /// The complete current list.
    pub fn snapshot(&self) -> PublishedList {
        self.published_since(0)
    }
}

/// Local reconciliation: intersect the device log's ephemeral IDs with the
/// published list and extract contact events between the matching device
/// records and the published observations.
///
/// Published entries only carry a coarse time bucket, so an entry counts
/// toward every detection window its bucket overlaps. Nothing about the
/// device leaves this function.
pub fn user_reconcile(
    device: &UserDevice,
    list: &PublishedList,
    model: &RadioModel,
    tx: TxPower,
    params: &ContactParams,
    bucket_s: u64,
) -> Result<Vec<ContactEvent>, RadioError> {
    let published_ids: BTreeSet<EphemeralId> =
        list.entries.iter().map(|e| e.ephemeral_id).collect();
    let matching: Vec<ScanRecord> = device
        .log
        .iter()
        .filter(|r| published_ids.contains(&r.ephemeral_id))
        .copied()
        .collect();
    if matching.is_empty() {
        return Ok(Vec::new());
    }
    let t_min = matching.iter().map(|r| r.timestamp_s).min().unwrap();
    let t_max = matching.iter().map(|r| r.timestamp_s).max().unwrap();

    let mut qualifying = Vec::new();
    for index in t_min / params.window_s..=t_max / params.window_s {
        let window = TimeWindow::at(index, params.window_s);
        let device_vector = distance_vector(&matching, model, tx, window)?;
        if device_vector.is_empty() {
            continue;
        }
        let published_vector =
            published_vector_for_window(list, &device_vector, model, tx, window, bucket_s)?;
        if let Some(estimate) = mad_distance(&device_vector, &published_vector) {
            if estimate <= params.distance_threshold_m {
                qualifying.push(QualifiedWindow {
                    index,
                    estimate_m: estimate,
                    ids: device_vector.common_keys(&published_vector),
                });
            }
        }
    }
    Ok(events_from_windows(&qualifying, params))
}

/// Distance estimates of the positive user, rebuilt from published entries
/// whose bucket overlaps the window. Multiple overlapping buckets for one
/// ID average in the dB domain, mirroring the device-side aggregation.
fn published_vector_for_window(
    list: &PublishedList,
    device_vector: &DistanceVector,
    model: &RadioModel,
    tx: TxPower,
    window: TimeWindow,
    bucket_s: u64,
) -> Result<DistanceVector, RadioError> {
    let mut sums: BTreeMap<EphemeralId, (f64, usize)> = BTreeMap::new();
    for e in &list.entries {
        if device_vector.get(&e.ephemeral_id).is_none() {
            continue;
        }
        let overlaps = e.bucket_start_s < window.end_s && window.start_s < e.bucket_start_s + bucket_s;
        if overlaps {
            let s = sums.entry(e.ephemeral_id).or_insert((0.0, 0));
            s.0 += e.rssi_dbm;
            s.1 += 1;
        }
    }
    let mut v = DistanceVector::new();
    for (id, (sum, count)) in sums {
        v.insert(id, model.distance_from_rss(tx, sum / count as f64)?);
    }
    Ok(v)
}
