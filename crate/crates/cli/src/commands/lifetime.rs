//! `lifetime`: daily energy-balance lifetime prediction per lighting
//! profile, with the extension over the battery-only baseline.

use std::path::PathBuf;

use lumitrace_core::energy::{predict_lifetime, Lifetime};
use lumitrace_core::io::read_lighting_profile;
use lumitrace_core::radio::TxPower;

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Lighting profile CSV (`time_of_day_s,lux`); repeat for several.
    #[arg(long, value_name = "FILE", required = true)]
    profile: Vec<PathBuf>,

    /// Advertising interval in milliseconds.
    #[arg(long)]
    adv_interval_ms: Option<f64>,

    /// Transmit power in dBm.
    #[arg(long, allow_negative_numbers = true)]
    tx: Option<i8>,
}

pub fn run(args: &Args, config: &RunConfig, output: &mut Output) -> Result<(), CliError> {
    let adv = args.adv_interval_ms.unwrap_or(config.beacon.adv_interval_ms);
    let tx = TxPower::new(args.tx.unwrap_or(config.beacon.tx_dbm));
    let mut csv = String::from("location,lux_profile,lifetime_years,extension_pct\n");
    for path in &args.profile {
        let profile = read_lighting_profile(path).map_err(|e| CliError::input(e.to_string()))?;
        let prediction = predict_lifetime(&config.energy, &profile, adv, tx)
            .map_err(|e| CliError::input(e.to_string()))?;
        let location = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let (lifetime, extension) = match prediction.lifetime {
            Lifetime::EnergyNeutral => ("energy-neutral".to_string(), "inf".to_string()),
            Lifetime::Finite { years } => {
                let ratio = prediction
                    .extension_ratio()
                    .expect("finite lifetimes have a ratio");
                (years.to_string(), ((ratio - 1.0) * 100.0).to_string())
            }
        };
        csv.push_str(&format!(
            "{location},{},{lifetime},{extension}\n",
            path.display()
        ));
        eprintln!(
            "# {location}: harvest {:.4} J/day vs consumption {:.4} J/day (baseline {:.3} y)",
            prediction.daily_harvest_j, prediction.daily_consumption_j, prediction.battery_only_years
        );
    }
    output.write_all(&csv)
}
