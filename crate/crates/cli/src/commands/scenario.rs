//! `scenario`: run a scripted end-to-end protocol scenario. Contact events
//! per user go to stdout as CSV; the ledger summary goes to stderr.

use std::path::PathBuf;

use lumitrace_core::sim::{run_scenario_file, EntityKind, LedgerEventKind};

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario script file.
    file: PathBuf,
}

pub fn run(args: &Args, config: &RunConfig, output: &mut Output) -> Result<(), CliError> {
    let run_config = config.scenario_run_config()?;
    let outcome =
        run_scenario_file(&args.file, &run_config).map_err(|e| CliError::input(e.to_string()))?;

    let ledger = &outcome.ledger;
    let count = |f: fn(&LedgerEventKind) -> bool| ledger.count_matching(|e| f(&e.kind));
    eprintln!(
        "# ledger: {} events | broadcasts {} | receptions {} | reports {} | ingests {} | reconciles {}",
        ledger.len(),
        count(|k| matches!(k, LedgerEventKind::RfTransmission { .. })),
        count(|k| matches!(k, LedgerEventKind::Reception { .. })),
        count(|k| matches!(k, LedgerEventKind::ReportSubmitted { .. })),
        count(|k| matches!(k, LedgerEventKind::IngestCommitted { .. })),
        count(|k| matches!(k, LedgerEventKind::Reconcile { .. })),
    );
    eprintln!(
        "# user rf transmissions: {} | published version: {} | published entries: {}",
        ledger.count_rf_transmissions_by(EntityKind::User),
        outcome.published_version,
        outcome.published_entries,
    );

    let mut csv = String::from("user,start_s,end_s,min_distance_m,n_matched_ids\n");
    for (user, events) in &outcome.contacts {
        for e in events {
            csv.push_str(&format!(
                "{user},{},{},{},{}\n",
                e.window_start_s,
                e.window_end_s,
                e.min_estimated_distance_m,
                e.matched_ids.len()
            ));
        }
    }
    output.write_all(&csv)
}
