//! CSV readers and writers for the file formats the toolkit exchanges:
//! scan logs, lighting profiles, calibration measurements, published-list
//! snapshots, and contact events.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{ContactEvent, ScanRecord};
use crate::energy::{EnergyError, LightingProfile};
use crate::identity::{EphemeralId, Mac};
use crate::protocol::PublishedEntry;
use crate::radio::CalibrationSample;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, FileError> {
    let file = File::open(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::Reader::from_reader(file))
}

fn csv_err(path: &Path, source: csv::Error) -> FileError {
    FileError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> FileError {
    FileError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScanRow {
    timestamp_s: u64,
    beacon_mac: String,
    ephemeral_id_hex: String,
    rssi_dbm: f64,
}

/// Read a scan log (`timestamp_s,beacon_mac,ephemeral_id_hex,rssi_dbm`).
pub fn read_scan_log(path: &Path) -> Result<Vec<ScanRecord>, FileError> {
    let mut reader = open_reader(path)?;
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<ScanRow>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let beacon_mac = Mac::from_hex(&row.beacon_mac)
            .map_err(|e| format_err(path, format!("record {}: {e}", i + 1)))?;
        let ephemeral_id = EphemeralId::from_hex(&row.ephemeral_id_hex)
            .map_err(|e| format_err(path, format!("record {}: {e}", i + 1)))?;
        if !row.rssi_dbm.is_finite() {
            return Err(format_err(path, format!("record {}: non-finite rssi", i + 1)));
        }
        records.push(ScanRecord {
            timestamp_s: row.timestamp_s,
            beacon_mac,
            ephemeral_id,
            rssi_dbm: row.rssi_dbm,
        });
    }
    Ok(records)
}

pub fn write_scan_log<W: Write>(writer: W, records: &[ScanRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(ScanRow {
            timestamp_s: r.timestamp_s,
            beacon_mac: r.beacon_mac.to_hex(),
            ephemeral_id_hex: r.ephemeral_id.to_hex(),
            rssi_dbm: r.rssi_dbm,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    time_of_day_s: u32,
    lux: f64,
}

/// Read a 24 h lighting profile (`time_of_day_s,lux`).
pub fn read_lighting_profile(path: &Path) -> Result<LightingProfile, FileError> {
    let mut reader = open_reader(path)?;
    let mut samples = Vec::new();
    for row in reader.deserialize::<ProfileRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        samples.push((row.time_of_day_s, row.lux));
    }
    LightingProfile::new(samples).map_err(|e: EnergyError| format_err(path, e.to_string()))
}

/// Read calibration measurements (`tx_dbm,distance_m,rss_dbm`).
pub fn read_calibration_csv(path: &Path) -> Result<Vec<CalibrationSample>, FileError> {
    let mut reader = open_reader(path)?;
    let mut samples = Vec::new();
    for row in reader.deserialize::<CalibrationSample>() {
        samples.push(row.map_err(|e| csv_err(path, e))?);
    }
    Ok(samples)
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRow {
    ephemeral_id_hex: String,
    time_bucket_start_s: u64,
    rssi_dbm: f64,
}

/// Read a published-list snapshot
/// (`ephemeral_id_hex,time_bucket_start_s,rssi_dbm`).
pub fn read_published_snapshot(path: &Path) -> Result<Vec<PublishedEntry>, FileError> {
    let mut reader = open_reader(path)?;
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<SnapshotRow>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let ephemeral_id = EphemeralId::from_hex(&row.ephemeral_id_hex)
            .map_err(|e| format_err(path, format!("record {}: {e}", i + 1)))?;
        entries.push(PublishedEntry {
            ephemeral_id,
            bucket_start_s: row.time_bucket_start_s,
            rssi_dbm: row.rssi_dbm,
        });
    }
    Ok(entries)
}

pub fn write_published_snapshot<W: Write>(
    writer: W,
    entries: &[PublishedEntry],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for e in entries {
        w.serialize(SnapshotRow {
            ephemeral_id_hex: e.ephemeral_id.to_hex(),
            time_bucket_start_s: e.bucket_start_s,
            rssi_dbm: e.rssi_dbm,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Contact events as CSV (`start_s,end_s,min_distance_m,n_matched_ids`).
pub fn contact_events_csv(events: &[ContactEvent]) -> String {
    let mut out = String::from("start_s,end_s,min_distance_m,n_matched_ids\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.window_start_s,
            e.window_end_s,
            e.min_estimated_distance_m,
            e.matched_ids.len()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_file(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("lumitrace-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{}-{name}", std::process::id()));
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn scan_log_roundtrips() {
        let records = vec![
            ScanRecord {
                timestamp_s: 10,
                beacon_mac: Mac::from_bytes([1, 2, 3, 4, 5, 6]),
                ephemeral_id: EphemeralId::from_bytes([0xDE, 0xAD, 0xBE, 0xEF]),
                rssi_dbm: -63.25,
            },
            ScanRecord {
                timestamp_s: 11,
                beacon_mac: Mac::from_bytes([6, 5, 4, 3, 2, 1]),
                ephemeral_id: EphemeralId::from_bytes([0, 1, 2, 3]),
                rssi_dbm: -71.0,
            },
        ];
        let mut buf = Vec::new();
        write_scan_log(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("timestamp_s,beacon_mac,ephemeral_id_hex,rssi_dbm\n"));
        let path = temp_file("scan.csv", &text);
        let back = read_scan_log(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn bad_hex_reports_the_record() {
        let path = temp_file(
            "bad-scan.csv",
            "timestamp_s,beacon_mac,ephemeral_id_hex,rssi_dbm\n1,zzz,deadbeef,-60\n",
        );
        match read_scan_log(&path) {
            Err(FileError::Format { msg, .. }) => assert!(msg.contains("record 1")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn lighting_profile_reads() {
        let path = temp_file(
            "profile.csv",
            "time_of_day_s,lux\n0,0\n25200,300\n68400,0\n",
        );
        let p = read_lighting_profile(&path).unwrap();
        assert_eq!(p.lux_at(30_000), 300.0);
        assert_eq!(p.lux_at(0), 0.0);
    }

    #[test]
    fn snapshot_roundtrips() {
        let entries = vec![PublishedEntry {
            ephemeral_id: EphemeralId::from_bytes([9, 9, 9, 9]),
            bucket_start_s: 3600,
            rssi_dbm: -66.5,
        }];
        let mut buf = Vec::new();
        write_published_snapshot(&mut buf, &entries).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ephemeral_id_hex,time_bucket_start_s,rssi_dbm\n"));
        let path = temp_file("snapshot.csv", &text);
        assert_eq!(read_published_snapshot(&path).unwrap(), entries);
    }

    #[test]
    fn calibration_csv_reads() {
        let path = temp_file(
            "cal.csv",
            "tx_dbm,distance_m,rss_dbm\n-8,1.0,-60.2\n-8,2.0,-66.4\n",
        );
        let samples = read_calibration_csv(&path).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].tx_dbm, -8);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_scan_log(Path::new("/nonexistent/never.csv")),
            Err(FileError::Io { .. })
        ));
    }
}
