//! Authority wire API over a real TCP socket: credential checks, report
//! submission, idempotency, and delta sync.

use lumitrace_core::detection::ScanRecord;
use lumitrace_core::identity::{EphemeralId, Mac};
use lumitrace_core::protocol::wire::{get_published, submit_report, AuthorityServer, WireError};
use lumitrace_core::protocol::{AuthorityStore, PositiveReport, DEFAULT_PUBLISH_BUCKET_S};

fn record(t: u64, beacon: u32, rssi: f64) -> ScanRecord {
    ScanRecord {
        timestamp_s: t,
        beacon_mac: Mac::from_bytes([0; 6]),
        ephemeral_id: EphemeralId::from_bytes(beacon.to_be_bytes()),
        rssi_dbm: rssi,
    }
}

fn spawn_server(credential: &str) -> (std::net::SocketAddr, lumitrace_core::protocol::wire::ServerHandle) {
    let store = AuthorityStore::new(DEFAULT_PUBLISH_BUCKET_S);
    let server = AuthorityServer::bind("127.0.0.1:0", credential, store).unwrap();
    let addr = server.local_addr().unwrap();
    let handle = server.handle().unwrap();
    std::thread::spawn(move || server.run());
    (addr, handle)
}

#[test]
fn submit_and_delta_sync_round_trip() {
    let (addr, handle) = spawn_server("ward-7-credential");

    // Empty store at version 0.
    let list = get_published(addr, 0).unwrap();
    assert_eq!(list.version, 0);
    assert!(list.entries.is_empty());

    let report = PositiveReport {
        report_id: "r-1".into(),
        upload_time_s: 1000,
        records: vec![record(10, 1, -66.0), record(20, 2, -70.0)],
    };
    let response = submit_report(addr, "ward-7-credential", &report).unwrap();
    assert_eq!(response.version, 1);
    assert_eq!(response.new_entries, 2);
    assert!(!response.duplicate);

    // Same report again: idempotent, version unchanged.
    let response = submit_report(addr, "ward-7-credential", &report).unwrap();
    assert_eq!(response.version, 1);
    assert!(response.duplicate);

    // A second report; the delta since version 1 holds only its entry.
    let report2 = PositiveReport {
        report_id: "r-2".into(),
        upload_time_s: 2000,
        records: vec![record(30, 3, -72.0)],
    };
    let response = submit_report(addr, "ward-7-credential", &report2).unwrap();
    assert_eq!(response.version, 2);

    let delta = get_published(addr, 1).unwrap();
    assert_eq!(delta.version, 2);
    assert_eq!(delta.entries.len(), 1);
    assert_eq!(
        delta.entries[0].ephemeral_id,
        EphemeralId::from_bytes(3u32.to_be_bytes())
    );

    let full = get_published(addr, 0).unwrap();
    assert_eq!(full.entries.len(), 3);
    assert_eq!(handle.current_version(), 2);
    handle.stop();
}

#[test]
fn wrong_credential_is_rejected() {
    let (addr, handle) = spawn_server("real-credential");
    let report = PositiveReport {
        report_id: "r-1".into(),
        upload_time_s: 0,
        records: vec![record(10, 1, -66.0)],
    };
    match submit_report(addr, "forged-credential", &report) {
        Err(WireError::Status { status: 401, .. }) => {}
        other => panic!("expected 401, got {other:?}"),
    }
    // Nothing was published.
    assert_eq!(get_published(addr, 0).unwrap().entries.len(), 0);
    handle.stop();
}

#[test]
fn unknown_endpoints_return_404() {
    use std::io::{Read, Write};
    let (addr, handle) = spawn_server("cred");
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    stream
        .write_all(b"GET /nope HTTP/1.1\r\nhost: x\r\ncontent-length: 0\r\n\r\n")
        .unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).unwrap();
    assert!(buf.starts_with("HTTP/1.1 404"));
    handle.stop();
}
