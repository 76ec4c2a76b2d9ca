//! One Monte Carlo deployment trial: place beacons and two receivers in a
//! rectangle, sample scan RSS on every link, and compare the MAD separation
//! estimate with the true receiver separation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::detection::{mad_distance, DistanceVector};
use crate::identity::EphemeralId;
use crate::protocol::DEFAULT_SENSITIVITY_FLOOR_DBM;
use crate::radio::{RadioError, RadioModel, TxPower};

/// Entity placement inside the deployment area.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Uniform-random positions drawn from the trial RNG.
    Random,
    /// Fixed coordinates; entries beyond the entity count are ignored.
    Explicit(Vec<(f64, f64)>),
}

/// Geometry and sampling parameters of one randomized deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentScenario {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub n_beacons: usize,
    pub n_receivers: usize,
    pub beacon_placement: Placement,
    pub receiver_placement: Placement,
    pub tx: TxPower,
    pub seed: u64,
    pub sensitivity_floor_dbm: f64,
    /// Advertisements heard (and dB-averaged) per beacon-receiver link in
    /// one trial; roughly one second of scanning at the default interval.
    pub samples_per_link: usize,
}

impl Default for DeploymentScenario {
    fn default() -> Self {
        DeploymentScenario {
            area_width_m: 10.0,
            area_height_m: 10.0,
            n_beacons: 1,
            n_receivers: 2,
            beacon_placement: Placement::Random,
            receiver_placement: Placement::Random,
            tx: TxPower::new(-8),
            seed: 0,
            sensitivity_floor_dbm: DEFAULT_SENSITIVITY_FLOOR_DBM,
            samples_per_link: 10,
        }
    }
}

impl DeploymentScenario {
    pub fn with_beacon_count(&self, n_beacons: usize) -> Self {
        DeploymentScenario {
            n_beacons,
            ..self.clone()
        }
    }

    pub fn validate(&self, model: &RadioModel) -> Result<(), RadioError> {
        if !(self.area_width_m > 0.0 && self.area_height_m > 0.0) {
            return Err(RadioError::InvalidModel(
                "deployment area must be positive".into(),
            ));
        }
        if self.n_receivers != 2 {
            return Err(RadioError::InvalidModel(format!(
                "separation trials need exactly 2 receivers, got {}",
                self.n_receivers
            )));
        }
        if self.n_beacons == 0 || self.samples_per_link == 0 {
            return Err(RadioError::InvalidModel(
                "beacon count and samples per link must be positive".into(),
            ));
        }
        if !model.supports(self.tx) {
            return Err(RadioError::UnknownTxPower(self.tx.dbm()));
        }
        for (placement, needed) in [
            (&self.beacon_placement, self.n_beacons),
            (&self.receiver_placement, self.n_receivers),
        ] {
            if let Placement::Explicit(points) = placement {
                if points.len() < needed {
                    return Err(RadioError::InvalidModel(format!(
                        "explicit placement lists {} points, {needed} needed",
                        points.len()
                    )));
                }
                for (x, y) in points {
                    if !(0.0..=self.area_width_m).contains(x)
                        || !(0.0..=self.area_height_m).contains(y)
                    {
                        return Err(RadioError::InvalidModel(format!(
                            "explicit placement ({x}, {y}) outside the area"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One trial with a usable estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub true_distance_m: f64,
    pub estimated_distance_m: f64,
    pub abs_error_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    Estimated(TrialResult),
    /// The receivers heard no beacon in common; no estimate exists.
    NoCommonBeacon { true_distance_m: f64 },
}

fn place(
    placement: &Placement,
    index: usize,
    width: f64,
    height: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    match placement {
        Placement::Random => (rng.random_range(0.0..width), rng.random_range(0.0..height)),
        Placement::Explicit(points) => points[index],
    }
}

fn beacon_key(index: usize) -> EphemeralId {
    EphemeralId::from_bytes((index as u32).to_be_bytes())
}

/// Run one trial. RNG draws happen in a fixed order (beacon positions,
/// receiver positions, then per-link samples), so a given seed replays
/// bit-identically.
pub fn run_trial(
    scenario: &DeploymentScenario,
    model: &RadioModel,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome, RadioError> {
    let (w, h) = (scenario.area_width_m, scenario.area_height_m);
    let beacons: Vec<(f64, f64)> = (0..scenario.n_beacons)
        .map(|i| place(&scenario.beacon_placement, i, w, h, rng))
        .collect();
    let receivers: Vec<(f64, f64)> = (0..2)
        .map(|i| place(&scenario.receiver_placement, i, w, h, rng))
        .collect();
    let true_distance_m = dist(receivers[0], receivers[1]);

    let mut vectors = [DistanceVector::new(), DistanceVector::new()];
    for (r, vector) in vectors.iter_mut().enumerate() {
        for (b, beacon_pos) in beacons.iter().enumerate() {
            let d = dist(receivers[r], *beacon_pos);
            let mut sum = 0.0;
            for _ in 0..scenario.samples_per_link {
                sum += model.sample_rss(scenario.tx, d, rng)?;
            }
            let mean_rss = sum / scenario.samples_per_link as f64;
            if mean_rss >= scenario.sensitivity_floor_dbm {
                vector.insert(beacon_key(b), model.distance_from_rss(scenario.tx, mean_rss)?);
            }
        }
    }

    Ok(match mad_distance(&vectors[0], &vectors[1]) {
        Some(estimated_distance_m) => TrialOutcome::Estimated(TrialResult {
            true_distance_m,
            estimated_distance_m,
            abs_error_m: (true_distance_m - estimated_distance_m).abs(),
        }),
        None => TrialOutcome::NoCommonBeacon { true_distance_m },
    })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
