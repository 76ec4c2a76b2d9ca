//! `accuracy`: Monte Carlo sweep of the separation-estimate error over
//! beacon counts. CSV rows to stdout, the trend check to stderr.

use lumitrace_core::radio::TxPower;
use lumitrace_core::sim::{accuracy_sweep, DeploymentScenario, SweepConfig};

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Trials per beacon count.
    #[arg(long)]
    trials: Option<usize>,

    /// Beacon counts to sweep: an inclusive range `1..10` or a list `1,3,5`.
    #[arg(long, default_value = "1..10")]
    counts: String,

    /// Transmit power in dBm.
    #[arg(long, allow_negative_numbers = true)]
    tx: Option<i8>,
}

fn parse_counts(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::input(format!("bad --counts value: {spec}"));
    let counts: Vec<usize> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if counts.is_empty() || counts.contains(&0) {
        return Err(bad());
    }
    Ok(counts)
}

pub fn run(
    args: &Args,
    config: &RunConfig,
    seed: Option<u64>,
    output: &mut Output,
) -> Result<(), CliError> {
    let model = config.radio.build_model()?;
    let sweep = SweepConfig {
        base: DeploymentScenario {
            area_width_m: config.simulation.area_width_m,
            area_height_m: config.simulation.area_height_m,
            tx: TxPower::new(args.tx.unwrap_or(config.beacon.tx_dbm)),
            seed: seed.unwrap_or(0),
            sensitivity_floor_dbm: config.radio.sensitivity_floor_dbm,
            samples_per_link: config.simulation.samples_per_link,
            ..DeploymentScenario::default()
        },
        beacon_counts: parse_counts(&args.counts)?,
        trials: args.trials.unwrap_or(config.simulation.trials),
    };
    let report = accuracy_sweep(&sweep, &model).map_err(|e| CliError::input(e.to_string()))?;
    let trend = report.spearman_trend();
    eprintln!(
        "# spearman(beacon count, mean error) = {trend:.4} ({})",
        if trend <= -0.8 {
            "monotone decreasing trend holds"
        } else {
            "trend weaker than -0.8"
        }
    );
    output.write_all(&report.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_parse_ranges_and_lists() {
        assert_eq!(parse_counts("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_counts("2,5,9").unwrap(), vec![2, 5, 9]);
        assert!(parse_counts("0..3").is_err());
        assert!(parse_counts("5..2").is_err());
        assert!(parse_counts("a,b").is_err());
    }
}
