//! Accuracy sweep over beacon counts: many independent trials per count,
//! aggregated into mean absolute error with a 95% confidence half-width.
//!
//! Trials draw from seeds derived per (count, index), so the sweep is
//! reproducible bit-for-bit and, with the `parallel` feature, can fan out
//! across threads without changing any result: outcomes are collected in
//! index order and aggregated sequentially either way.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::trial::{run_trial, DeploymentScenario, TrialOutcome};
use super::derive_trial_seed;
use crate::radio::{RadioError, RadioModel};

/// What to sweep: the base deployment (its beacon count is overridden per
/// sweep point), the counts, and the trials per count.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: DeploymentScenario,
    pub beacon_counts: Vec<usize>,
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: DeploymentScenario::default(),
            beacon_counts: (1..=10).collect(),
            trials: 10_000,
        }
    }
}

/// Aggregated accuracy at one beacon count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountStats {
    pub n_beacons: usize,
    pub mean_error_m: f64,
    /// 1.96 * sample-stddev / sqrt(included trials).
    pub ci95_m: f64,
    /// Configured trials at this count.
    pub trials: usize,
    /// Trials with no common beacon, excluded from the mean.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub rows: Vec<CountStats>,
}

impl AccuracyReport {
    /// Plot-ready CSV, one row per beacon count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_beacons,mean_error_m,ci95_m,trials,excluded\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n_beacons, r.mean_error_m, r.ci95_m, r.trials, r.excluded
            ));
        }
        out
    }

    /// Spearman rank correlation between beacon count and mean error; the
    /// expected deployment-density trend is strongly negative.
    pub fn spearman_trend(&self) -> f64 {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.n_beacons as f64).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.mean_error_m).collect();
        spearman(&xs, &ys)
    }
}

fn one_trial(
    scenario: &DeploymentScenario,
    model: &RadioModel,
    master_seed: u64,
    index: usize,
) -> Result<TrialOutcome, RadioError> {
    let seed = derive_trial_seed(master_seed, scenario.n_beacons as u64, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_trial(scenario, model, &mut rng)
}

fn aggregate(n_beacons: usize, trials: usize, outcomes: &[TrialOutcome]) -> CountStats {
    let errors: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Estimated(r) => Some(r.abs_error_m),
            TrialOutcome::NoCommonBeacon { .. } => None,
        })
        .collect();
    let excluded = outcomes.len() - errors.len();
    let n = errors.len();
    let (mean, ci) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = errors.iter().sum::<f64>() / n as f64;
        let ci = if n > 1 {
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        } else {
            f64::NAN
        };
        (mean, ci)
    };
    CountStats {
        n_beacons,
        mean_error_m: mean,
        ci95_m: ci,
        trials,
        excluded,
    }
}

fn sweep_impl(
    config: &SweepConfig,
    model: &RadioModel,
    parallel: bool,
) -> Result<AccuracyReport, RadioError> {
    if config.trials == 0 {
        return Err(RadioError::InvalidModel("trials must be positive".into()));
    }
    let mut rows = Vec::with_capacity(config.beacon_counts.len());
    for &count in &config.beacon_counts {
        let scenario = config.base.with_beacon_count(count);
        scenario.validate(model)?;
        let master = config.base.seed;
        let outcomes: Vec<TrialOutcome> = {
            #[cfg(feature = "parallel")]
            {
                if parallel {
                    (0..config.trials)
                        .into_par_iter()
                        .map(|i| one_trial(&scenario, model, master, i))
                        .collect::<Result<_, _>>()?
                } else {
                    (0..config.trials)
                        .map(|i| one_trial(&scenario, model, master, i))
                        .collect::<Result<_, _>>()?
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                let _ = parallel;
                (0..config.trials)
                    .map(|i| one_trial(&scenario, model, master, i))
                    .collect::<Result<_, _>>()?
            }
        };
        rows.push(aggregate(count, config.trials, &outcomes));
    }
    Ok(AccuracyReport { rows })
}

/// Single-threaded sweep; always available and bit-identical to the
/// parallel path.
pub fn accuracy_sweep_sequential(
    config: &SweepConfig,
    model: &RadioModel,
) -> Result<AccuracyReport, RadioError> {
    sweep_impl(config, model, false)
}

/// Sweep with trials fanned out across the rayon pool.
#[cfg(feature = "parallel")]
pub fn accuracy_sweep_parallel(
    config: &SweepConfig,
    model: &RadioModel,
) -> Result<AccuracyReport, RadioError> {
    sweep_impl(config, model, true)
}

/// Default entry point: parallel when the feature is enabled.
pub fn accuracy_sweep(config: &SweepConfig, model: &RadioModel) -> Result<AccuracyReport, RadioError> {
    #[cfg(feature = "parallel")]
    {
        accuracy_sweep_parallel(config, model)
    }
    #[cfg(not(feature = "parallel"))]
    {
        accuracy_sweep_sequential(config, model)
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
