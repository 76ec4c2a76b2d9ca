//! `calibrate`: least-squares fit of the propagation model's reference
//! intercept and path-loss exponent from measured samples.

use std::path::PathBuf;

use lumitrace_core::io::read_calibration_csv;

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV of measurements with header `tx_dbm,distance_m,rss_dbm`.
    #[arg(long, value_name = "FILE")]
    measurements: PathBuf,
}

pub fn run(args: &Args, config: &RunConfig, output: &mut Output) -> Result<(), CliError> {
    let samples =
        read_calibration_csv(&args.measurements).map_err(|e| CliError::input(e.to_string()))?;
    let model = config.radio.build_model()?;
    let fit = model
        .calibrate(&samples)
        .map_err(|e| CliError::input(e.to_string()))?;
    output.write_all(&format!(
        "rss_at_1m_dbm,path_loss_exponent,rmse_db,n_samples\n{},{},{},{}\n",
        fit.rss_at_1m_dbm, fit.path_loss_exponent, fit.rmse_db, fit.samples
    ))
}
