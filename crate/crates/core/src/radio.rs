//! Log-distance path-loss model with Gaussian shadowing, its analytic
//! inverse, and a least-squares calibration path from measured RSS samples.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default working point used throughout the toolkit.
pub const DEFAULT_TX_DBM: i8 = -8;

/// Adjacent transmit-power curves must be separated by a gap in this range.
pub const MIN_TX_CURVE_GAP_DB: f64 = 5.0;
pub const MAX_TX_CURVE_GAP_DB: f64 = 7.0;

#[derive(Debug, Error)]
pub enum RadioError {
    #[error("invalid radio model: {0}")]
    InvalidModel(String),
    #[error("tx power {0} dBm is not a configured setting")]
    UnknownTxPower(i8),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

/// A transmit-power setting in dBm.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct TxPower(i8);

impl TxPower {
    pub const fn new(dbm: i8) -> Self {
        TxPower(dbm)
    }

    pub const fn dbm(self) -> i8 {
        self.0
    }
}

impl std::fmt::Display for TxPower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}

/// Immutable propagation model: mean RSS follows a log-distance law, noise is
/// Gaussian in the dB domain, and each transmit-power setting shifts the
/// curve by a fixed offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    rss_at_1m_dbm: f64,
    path_loss_exponent: f64,
    shadowing_sigma_db: f64,
    min_distance_m: f64,
    tx_offsets_db: BTreeMap<i8, f64>,
}

impl Default for RadioModel {
    fn default() -> Self {
        // Calibratable defaults; the reference intercept belongs to -8 dBm.
        let tx_offsets_db = [(-20, -12.0), (-14, -6.0), (-8, 0.0), (-2, 6.0), (4, 12.0)]
            .into_iter()
            .collect();
        RadioModel {
            rss_at_1m_dbm: -60.0,
            path_loss_exponent: 2.0,
            shadowing_sigma_db: 2.0,
            min_distance_m: 0.1,
            tx_offsets_db,
        }
    }
}

impl RadioModel {
    pub fn new(
        rss_at_1m_dbm: f64,
        path_loss_exponent: f64,
        shadowing_sigma_db: f64,
        min_distance_m: f64,
        tx_offsets_db: BTreeMap<i8, f64>,
    ) -> Result<Self, RadioError> {
        if !path_loss_exponent.is_finite() || path_loss_exponent <= 0.0 {
            return Err(RadioError::InvalidModel(format!(
                "path loss exponent must be positive, got {path_loss_exponent}"
            )));
        }
        if !shadowing_sigma_db.is_finite() || shadowing_sigma_db < 0.0 {
            return Err(RadioError::InvalidModel(format!(
                "shadowing sigma must be non-negative, got {shadowing_sigma_db}"
            )));
        }
        if !min_distance_m.is_finite() || min_distance_m <= 0.0 {
            return Err(RadioError::InvalidModel(format!(
                "near-field clamp must be positive, got {min_distance_m}"
            )));
        }
        if tx_offsets_db.is_empty() {
            return Err(RadioError::InvalidModel(
                "at least one tx power setting is required".into(),
            ));
        }
        // Adjacent curves must sit 5-7 dB apart and increase with tx power.
        let entries: Vec<(i8, f64)> = tx_offsets_db.iter().map(|(k, v)| (*k, *v)).collect();
        for pair in entries.windows(2) {
            let gap = pair[1].1 - pair[0].1;
            if !(MIN_TX_CURVE_GAP_DB..=MAX_TX_CURVE_GAP_DB).contains(&gap) {
                return Err(RadioError::InvalidModel(format!(
                    "offset gap between {} dBm and {} dBm settings is {gap:.2} dB, \
                     expected within [{MIN_TX_CURVE_GAP_DB}, {MAX_TX_CURVE_GAP_DB}]",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(RadioModel {
            rss_at_1m_dbm,
            path_loss_exponent,
            shadowing_sigma_db,
            min_distance_m,
            tx_offsets_db,
        })
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn shadowing_sigma_db(&self) -> f64 {
        self.shadowing_sigma_db
    }

    pub fn min_distance_m(&self) -> f64 {
        self.min_distance_m
    }

    /// Configured transmit-power settings, ascending.
    pub fn tx_settings(&self) -> impl Iterator<Item = TxPower> + '_ {
        self.tx_offsets_db.keys().map(|dbm| TxPower(*dbm))
    }

    pub fn supports(&self, tx: TxPower) -> bool {
        self.tx_offsets_db.contains_key(&tx.dbm())
    }

    /// Reference RSS at 1 m for the given setting.
    pub fn rss_at_1m(&self, tx: TxPower) -> Result<f64, RadioError> {
        let offset = self
            .tx_offsets_db
            .get(&tx.dbm())
            .ok_or(RadioError::UnknownTxPower(tx.dbm()))?;
        Ok(self.rss_at_1m_dbm + offset)
    }

    /// Mean RSS at distance `d_m`, with the near-field clamp applied.
    pub fn mean_rss(&self, tx: TxPower, d_m: f64) -> Result<f64, RadioError> {
        let d = d_m.max(self.min_distance_m);
        Ok(self.rss_at_1m(tx)? - 10.0 * self.path_loss_exponent * d.log10())
    }

    /// One shadowed RSS observation. Deterministic given the RNG state; with
    /// sigma = 0 this equals `mean_rss` exactly.
    pub fn sample_rss<R: Rng + ?Sized>(
        &self,
        tx: TxPower,
        d_m: f64,
        rng: &mut R,
    ) -> Result<f64, RadioError> {
        let mean = self.mean_rss(tx, d_m)?;
        let noise = Normal::new(0.0, self.shadowing_sigma_db)
            .expect("sigma validated at construction")
            .sample(rng);
        Ok(mean + noise)
    }

    /// Analytic inverse of `mean_rss`, clamped below at the near-field limit.
    pub fn distance_from_rss(&self, tx: TxPower, rss_dbm: f64) -> Result<f64, RadioError> {
        let rss0 = self.rss_at_1m(tx)?;
        let d = 10f64.powf((rss0 - rss_dbm) / (10.0 * self.path_loss_exponent));
        Ok(d.max(self.min_distance_m))
    }

    /// Fit `(rss_at_1m, path_loss_exponent)` to measured samples by simple
    /// linear regression of tx-normalized RSS against -10*log10(distance).
    pub fn calibrate(&self, samples: &[CalibrationSample]) -> Result<CalibrationFit, RadioError> {
        let mut xs = Vec::with_capacity(samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        for s in samples {
            let offset = self
                .tx_offsets_db
                .get(&s.tx_dbm)
                .ok_or(RadioError::UnknownTxPower(s.tx_dbm))?;
            if !s.distance_m.is_finite() || s.distance_m < 0.0 {
                return Err(RadioError::Calibration(format!(
                    "bad distance {} m in measurement",
                    s.distance_m
                )));
            }
            // The 0 m datum has no meaning in a log model; fold it into the clamp.
            xs.push(-10.0 * s.distance_m.max(self.min_distance_m).log10());
            ys.push(s.rss_dbm - offset);
        }
        let n = xs.len() as f64;
        if xs.len() < 2 {
            return Err(RadioError::Calibration(
                "at least two measurements are required".into(),
            ));
        }
        let mean_x = xs.iter().sum::<f64>() / n;
        let mean_y = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
        let sxy: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum();
        if sxx == 0.0 {
            return Err(RadioError::Calibration(
                "measurements must cover at least two distinct distances".into(),
            ));
        }
        let eta = sxy / sxx;
        let intercept = mean_y - eta * mean_x;
        if !eta.is_finite() || eta <= 0.0 {
            return Err(RadioError::Calibration(format!(
                "fitted path loss exponent {eta:.3} is not positive"
            )));
        }
        let rmse = (xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (intercept + eta * x)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        Ok(CalibrationFit {
            rss_at_1m_dbm: intercept,
            path_loss_exponent: eta,
            rmse_db: rmse,
            samples: xs.len(),
        })
    }

    /// New model with the fitted reference intercept and exponent, keeping
    /// the noise, clamp, and offset configuration.
    pub fn with_calibration(&self, fit: &CalibrationFit) -> Result<RadioModel, RadioError> {
        RadioModel::new(
            fit.rss_at_1m_dbm,
            fit.path_loss_exponent,
            self.shadowing_sigma_db,
            self.min_distance_m,
            self.tx_offsets_db.clone(),
        )
    }
}

/// One measured (tx, distance, RSS) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub tx_dbm: i8,
    pub distance_m: f64,
    pub rss_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFit {
    pub rss_at_1m_dbm: f64,
    pub path_loss_exponent: f64,
    pub rmse_db: f64,
    pub samples: usize,
}
