//! `reconcile`: offline local matching of a device scan log against a
//! published-list snapshot, emitting contact events as CSV.

use std::path::PathBuf;

use lumitrace_core::io::{contact_events_csv, read_published_snapshot, read_scan_log};
use lumitrace_core::protocol::{user_reconcile, PublishedList, UserDevice};
use lumitrace_core::radio::TxPower;

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Device scan log CSV.
    #[arg(long, value_name = "FILE")]
    log: PathBuf,

    /// Published-list snapshot CSV.
    #[arg(long, value_name = "FILE")]
    published: PathBuf,

    /// Transmit power assumed when inverting RSS.
    #[arg(long, allow_negative_numbers = true)]
    tx: Option<i8>,
}

pub fn run(args: &Args, config: &RunConfig, output: &mut Output) -> Result<(), CliError> {
    let records = read_scan_log(&args.log).map_err(|e| CliError::input(e.to_string()))?;
    let entries =
        read_published_snapshot(&args.published).map_err(|e| CliError::input(e.to_string()))?;
    let device = UserDevice::with_log("local", config.scan_config(), records);
    let list = PublishedList {
        version: 0,
        entries,
    };
    let model = config.radio.build_model()?;
    let events = user_reconcile(
        &device,
        &list,
        &model,
        TxPower::new(args.tx.unwrap_or(config.beacon.tx_dbm)),
        &config.detection,
        config.protocol.publish_bucket_s,
    )
    .map_err(|e| CliError::input(e.to_string()))?;
    eprintln!("# {} contact event(s)", events.len());
    output.write_all(&contact_events_csv(&events))
}
