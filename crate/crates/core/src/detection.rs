//! Proximity estimation from scan logs: per-window distance vectors, the
//! maximum-absolute-difference separation estimate between two receivers,
//! position trilateration, and contact-event extraction under distance and
//! duration thresholds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::identity::{EphemeralId, Mac};
use crate::radio::{RadioError, RadioModel, TxPower};

/// One received packet as stored by a scanning device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub timestamp_s: u64,
    pub beacon_mac: Mac,
    pub ephemeral_id: EphemeralId,
    pub rssi_dbm: f64,
}

/// Half-open interval `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start_s: u64,
    pub end_s: u64,
}

impl TimeWindow {
    pub fn new(start_s: u64, end_s: u64) -> Self {
        assert!(end_s >= start_s);
        TimeWindow { start_s, end_s }
    }

    /// The `index`-th consecutive window of the given length.
    pub fn at(index: u64, window_s: u64) -> Self {
        TimeWindow {
            start_s: index * window_s,
            end_s: (index + 1) * window_s,
        }
    }

    pub fn contains(&self, t: u64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

/// Estimated distances from one receiver to each beacon it heard in a
/// window, keyed by ephemeral ID.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceVector {
    entries: BTreeMap<EphemeralId, f64>,
}

impl DistanceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: EphemeralId, distance_m: f64) {
        debug_assert!(distance_m >= 0.0);
        self.entries.insert(id, distance_m);
    }

    pub fn get(&self, id: &EphemeralId) -> Option<f64> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EphemeralId, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Beacon keys present in both vectors.
    pub fn common_keys(&self, other: &DistanceVector) -> Vec<EphemeralId> {
        self.entries
            .keys()
            .filter(|k| other.entries.contains_key(*k))
            .copied()
            .collect()
    }
}

impl FromIterator<(EphemeralId, f64)> for DistanceVector {
    fn from_iter<T: IntoIterator<Item = (EphemeralId, f64)>>(iter: T) -> Self {
        DistanceVector {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Per-beacon distance estimates from the records inside one window: the
/// RSSI samples of each beacon are averaged in the dB domain, then inverted
/// through the propagation model.
pub fn distance_vector(
    records: &[ScanRecord],
    model: &RadioModel,
    tx: TxPower,
    window: TimeWindow,
) -> Result<DistanceVector, RadioError> {
    let mut sums: BTreeMap<EphemeralId, (f64, usize)> = BTreeMap::new();
    for r in records {
        if window.contains(r.timestamp_s) {
            let e = sums.entry(r.ephemeral_id).or_insert((0.0, 0));
            e.0 += r.rssi_dbm;
            e.1 += 1;
        }
    }
    let mut v = DistanceVector::new();
    for (id, (sum, count)) in sums {
        let mean_rssi = sum / count as f64;
        v.insert(id, model.distance_from_rss(tx, mean_rssi)?);
    }
    Ok(v)
}

/// Separation estimate between two receivers: the maximum absolute
/// difference of their distance estimates over the beacons both heard.
/// `None` when they share no beacon.
pub fn mad_distance(v1: &DistanceVector, v2: &DistanceVector) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (id, d1) in v1.iter() {
        if let Some(d2) = v2.get(id) {
            let diff = (d1 - d2).abs();
            best = Some(best.map_or(diff, |b| diff.max(b)));
        }
    }
    best
}

/// Least-squares position fix from beacon distances and known beacon
/// positions. Returns `None` with fewer than three usable beacons or a
/// collinear deployment.
pub fn trilaterate(
    v: &DistanceVector,
    positions: &BTreeMap<EphemeralId, (f64, f64)>,
) -> Option<(f64, f64)> {
    let usable: Vec<((f64, f64), f64)> = v
        .iter()
        .filter_map(|(id, d)| positions.get(id).map(|p| (*p, d)))
        .collect();
    if usable.len() < 3 || is_collinear(&usable) {
        return None;
    }
    let guess = linear_init(&usable)?;
    Some(gauss_newton(&usable, guess))
}

fn is_collinear(points: &[((f64, f64), f64)]) -> bool {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), ((x, y), _)| (ax + x, ay + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), _) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Smallest eigenvalue of the 2x2 scatter matrix, relative to the largest.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l_max = tr / 2.0 + disc;
    let l_min = tr / 2.0 - disc;
    l_max <= 0.0 || l_min / l_max < 1e-9
}

/// Linearized solution: subtracting the first range equation from the rest
/// leaves a linear system in (x, y), solved via 2x2 normal equations.
fn linear_init(points: &[((f64, f64), f64)]) -> Option<(f64, f64)> {
    let ((x0, y0), d0) = points[0];
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &((xi, yi), di) in &points[1..] {
        let ax = 2.0 * (xi - x0);
        let ay = 2.0 * (yi - y0);
        let rhs = d0 * d0 - di * di + xi * xi - x0 * x0 + yi * yi - y0 * y0;
        a11 += ax * ax;
        a12 += ax * ay;
        a22 += ay * ay;
        b1 += ax * rhs;
        b2 += ay * rhs;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 {
        return None;
    }
    Some(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// Refine the fix by minimizing the sum of squared range residuals.
fn gauss_newton(points: &[((f64, f64), f64)], start: (f64, f64)) -> (f64, f64) {
    let cost = |p: (f64, f64)| -> f64 {
        points
            .iter()
            .map(|((x, y), d)| {
                let r = ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt() - d;
                r * r
            })
            .sum()
    };
    let (mut px, mut py) = start;
    let mut damping = 0.0;
    for _ in 0..50 {
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &((x, y), d) in points {
            let dx = px - x;
            let dy = py - y;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist < 1e-12 {
                // Residual gradient is undefined exactly on a beacon.
                continue;
            }
            let r = dist - d;
            let (jx, jy) = (dx / dist, dy / dist);
            a11 += jx * jx;
            a12 += jx * jy;
            a22 += jy * jy;
            g1 += jx * r;
            g2 += jy * r;
        }
        let det = (a11 + damping) * (a22 + damping) - a12 * a12;
        if det.abs() < 1e-15 {
            break;
        }
        let step_x = ((a22 + damping) * g1 - a12 * g2) / det;
        let step_y = ((a11 + damping) * g2 - a12 * g1) / det;
        let candidate = (px - step_x, py - step_y);
        if cost(candidate) <= cost((px, py)) {
            if step_x.abs() < 1e-12 && step_y.abs() < 1e-12 {
                return candidate;
            }
            px = candidate.0;
            py = candidate.1;
            damping *= 0.5;
        } else {
            damping = (damping * 4.0).max(1e-6);
        }
    }
    (px, py)
}

/// Thresholds for contact extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    pub distance_threshold_m: f64,
    pub duration_threshold_s: u64,
    pub window_s: u64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            distance_threshold_m: 2.0,
            duration_threshold_s: 600,
            window_s: 60,
        }
    }
}

/// A maximal run of consecutive windows whose separation estimate stayed at
/// or below the distance threshold for at least the duration threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactEvent {
    pub window_start_s: u64,
    pub window_end_s: u64,
    pub min_estimated_distance_m: f64,
    pub matched_ids: BTreeSet<EphemeralId>,
}

impl ContactEvent {
    pub fn duration_s(&self) -> u64 {
        self.window_end_s - self.window_start_s
    }
}

/// A window that qualified: its index, separation estimate, and the beacon
/// IDs the estimate was built from.
pub(crate) struct QualifiedWindow {
    pub index: u64,
    pub estimate_m: f64,
    pub ids: Vec<EphemeralId>,
}

/// Merge maximal runs of consecutive qualifying windows into events and
/// keep those long enough. Input must be sorted by window index.
pub(crate) fn events_from_windows(
    windows: &[QualifiedWindow],
    params: &ContactParams,
) -> Vec<ContactEvent> {
    let mut events = Vec::new();
    let mut run: Option<(u64, u64, f64, BTreeSet<EphemeralId>)> = None;
    let flush = |run: &mut Option<(u64, u64, f64, BTreeSet<EphemeralId>)>,
                 events: &mut Vec<ContactEvent>| {
        if let Some((first, last, min_d, ids)) = run.take() {
            let event = ContactEvent {
                window_start_s: first * params.window_s,
                window_end_s: (last + 1) * params.window_s,
                min_estimated_distance_m: min_d,
                matched_ids: ids,
            };
            if event.duration_s() >= params.duration_threshold_s {
                events.push(event);
            }
        }
    };
    for w in windows {
        match run.as_mut() {
            Some((_, last, min_d, ids)) if w.index == *last + 1 => {
                *last = w.index;
                *min_d = min_d.min(w.estimate_m);
                ids.extend(w.ids.iter().copied());
            }
            _ => {
                flush(&mut run, &mut events);
                run = Some((
                    w.index,
                    w.index,
                    w.estimate_m,
                    w.ids.iter().copied().collect(),
                ));
            }
        }
    }
    flush(&mut run, &mut events);
    events
}

/// Extract contact events between two scan logs.
///
/// Time is partitioned into consecutive windows; per window each log yields
/// a distance vector and the separation estimate is their MAD over common
/// beacons. Maximal runs of windows with an estimate at or below the
/// distance threshold become events if they last at least the duration
/// threshold.
pub fn detect_contacts(
    log1: &[ScanRecord],
    log2: &[ScanRecord],
    model: &RadioModel,
    tx: TxPower,
    params: &ContactParams,
) -> Result<Vec<ContactEvent>, RadioError> {
    assert!(params.window_s > 0, "window length must be positive");
    assert!(
        params.distance_threshold_m > 0.0 && params.duration_threshold_s > 0,
        "thresholds must be positive"
    );
    let span = log1
        .iter()
        .chain(log2)
        .map(|r| r.timestamp_s)
        .fold(None, |acc: Option<(u64, u64)>, t| {
            Some(acc.map_or((t, t), |(lo, hi)| (lo.min(t), hi.max(t))))
        });
    let Some((t_min, t_max)) = span else {
        return Ok(Vec::new());
    };
    let mut qualifying = Vec::new();
    for index in t_min / params.window_s..=t_max / params.window_s {
        let window = TimeWindow::at(index, params.window_s);
        let v1 = distance_vector(log1, model, tx, window)?;
        if v1.is_empty() {
            continue;
        }
        let v2 = distance_vector(log2, model, tx, window)?;
        if let Some(estimate) = mad_distance(&v1, &v2) {
            if estimate <= params.distance_threshold_m {
                qualifying.push(QualifiedWindow {
                    index,
                    estimate_m: estimate,
                    ids: v1.common_keys(&v2),
                });
            }
        }
    }
    Ok(events_from_windows(&qualifying, params))
}
