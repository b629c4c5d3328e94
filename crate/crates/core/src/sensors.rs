//! Presence rules for ultrasonic ranging, chair acceleration and WiFi sightings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Presence, PresenceSeries, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltrasonicReading {
    pub timestamp: Timestamp,
    pub distance_m: f64,
}

/// Acceleration in units of g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub timestamp: Timestamp,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn magnitude(&self) -> f64 {
        (self.ax * self.ax + self.ay * self.ay + self.az * self.az).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltrasonicConfig {
    /// Closed distance intervals, in meters, that mean the desk is empty.
    pub absence_intervals: Vec<[f64; 2]>,
    /// Meters per second.
    pub sound_speed: f64,
}

impl Default for UltrasonicConfig {
    fn default() -> Self {
        Self {
            absence_intervals: vec![[2.0, f64::INFINITY]],
            sound_speed: 340.0,
        }
    }
}

impl UltrasonicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(Error::InvalidConfig(format!("sound speed {} must be positive", self.sound_speed)));
        }
        let mut sorted = self.absence_intervals.clone();
        sorted.sort_by(|x, y| x[0].total_cmp(&y[0]));
        for iv in &sorted {
            if iv[0].is_nan() || iv[1].is_nan() || iv[0] > iv[1] {
                return Err(Error::InvalidConfig(format!("bad absence interval {iv:?}")));
            }
        }
        if sorted.windows(2).any(|w| w[1][0] <= w[0][1]) {
            return Err(Error::InvalidConfig("absence intervals overlap".into()));
        }
        Ok(())
    }

    pub fn is_absent(&self, distance: f64) -> bool {
        self.absence_intervals.iter().any(|[a, b]| *a <= distance && distance <= *b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    /// Standard deviation threshold in g.
    pub theta: f64,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self { theta: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiConfig {
    /// Half-width in seconds of the presence span around each sighting.
    pub delta: i64,
}

impl Default for WifiConfig {
    fn default() -> Self {
        Self { delta: 3600 }
    }
}

/// Echo round-trip time to distance: half the time at the speed of sound.
pub fn ultrasonic_distance(delta_t: f64, cfg: &UltrasonicConfig) -> Result<f64> {
    if delta_t.is_nan() || delta_t < 0.0 {
        return Err(Error::InvalidConfig(format!("echo time must be nonnegative, got {delta_t}")));
    }
    Ok(0.5 * delta_t * cfg.sound_speed)
}

/// Present exactly where the distance is outside every absence interval.
pub fn ultrasonic_rule(distances: &[f64], cfg: &UltrasonicConfig) -> Result<Vec<Presence>> {
    cfg.validate()?;
    distances
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                return Err(Error::InvalidTrace(format!("non-finite distance {d}")));
            }
            Ok(if cfg.is_absent(d) { Presence::Absent } else { Presence::Present })
        })
        .collect()
}

/// Population standard deviation of the acceleration magnitudes.
pub fn accel_sigma(samples: &[AccelSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mags: Vec<f64> = samples.iter().map(AccelSample::magnitude).collect();
    let mu = mags.iter().sum::<f64>() / n;
    Ok((mags.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / n).sqrt())
}

pub fn accel_rule(sigmas: &[f64], cfg: &AccelConfig) -> Result<Vec<Presence>> {
    if cfg.theta.is_nan() || cfg.theta <= 0.0 {
        return Err(Error::InvalidConfig(format!("theta must be positive, got {}", cfg.theta)));
    }
    Ok(sigmas
        .iter()
        .map(|&s| if s > cfg.theta { Presence::Present } else { Presence::Absent })
        .collect())
}

/// Present at `t` when some sighting lies strictly within `delta` seconds.
pub fn wifi_rule(observations: &[Timestamp], queries: &[Timestamp], cfg: &WifiConfig) -> Result<Vec<Presence>> {
    if cfg.delta <= 0 {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {}", cfg.delta)));
    }
    if observations.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidTrace("wifi sightings must be sorted".into()));
    }
    Ok(queries
        .iter()
        .map(|&t| {
            let i = observations.partition_point(|&o| o < t);
            let near = |j: usize| observations.get(j).is_some_and(|&o| (t - o).abs() < cfg.delta);
            if near(i) || (i > 0 && near(i - 1)) {
                Presence::Present
            } else {
                Presence::Absent
            }
        })
        .collect())
}

/// Window starts covering `[start, end)` at `width` seconds.
pub fn window_grid(start: Timestamp, end: Timestamp, width: i64) -> Vec<Timestamp> {
    if width <= 0 || end <= start {
        return Vec::new();
    }
    (0..(end - start + width - 1) / width).map(|k| start + k * width).collect()
}

fn bucket<T: Copy>(items: &[T], time: impl Fn(&T) -> Timestamp, starts: &[Timestamp], width: i64) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new(); starts.len()];
    for item in items {
        let t = time(item);
        let idx = starts.partition_point(|&s| s <= t);
        if idx > 0 && t < starts[idx - 1] + width {
            out[idx - 1].push(*item);
        }
    }
    out
}

/// Pointwise rule per reading, then a majority within each window. An even
/// split or an empty window counts as absent.
pub fn ultrasonic_windows(
    readings: &[UltrasonicReading],
    starts: &[Timestamp],
    width: i64,
    cfg: &UltrasonicConfig,
) -> Result<PresenceSeries> {
    let groups = bucket(readings, |r| r.timestamp, starts, width);
    let mut states = Vec::with_capacity(starts.len());
    for g in groups {
        let d: Vec<f64> = g.iter().map(|r| r.distance_m).collect();
        let present = ultrasonic_rule(&d, cfg)?.iter().filter(|p| p.is_present()).count();
        states.push(if 2 * present > d.len() { Presence::Present } else { Presence::Absent });
    }
    PresenceSeries::new(starts.to_vec(), states)
}

/// Acceleration spread per window; windows with fewer than two samples count as absent.
pub fn accel_windows(samples: &[AccelSample], starts: &[Timestamp], width: i64, cfg: &AccelConfig) -> Result<PresenceSeries> {
    let sigmas: Vec<f64> = bucket(samples, |s| s.timestamp, starts, width)
        .iter()
        .map(|g| accel_sigma(g).unwrap_or(0.0))
        .collect();
    PresenceSeries::new(starts.to_vec(), accel_rule(&sigmas, cfg)?)
}

/// WiFi rule queried at each window's midpoint.
pub fn wifi_windows(observations: &[Timestamp], starts: &[Timestamp], width: i64, cfg: &WifiConfig) -> Result<PresenceSeries> {
    let mids: Vec<Timestamp> = starts.iter().map(|s| s + width / 2).collect();
    PresenceSeries::new(starts.to_vec(), wifi_rule(observations, &mids, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Presence::{Absent, Present};

    fn acc(ax: f64, ay: f64, az: f64) -> AccelSample {
        AccelSample { timestamp: 0, ax, ay, az }
    }

    #[test]
    fn distance_examples() {
        let cfg = UltrasonicConfig::default();
        assert_eq!(ultrasonic_distance(0.0, &cfg).unwrap(), 0.0);
        assert!((ultrasonic_distance(0.01, &cfg).unwrap() - 1.7).abs() < 1e-12);
        assert!((ultrasonic_distance(0.02, &cfg).unwrap() - 3.4).abs() < 1e-12);
        assert!(ultrasonic_distance(-0.01, &cfg).is_err());
    }

    #[test]
    fn ultrasonic_examples() {
        let cfg = UltrasonicConfig::default();
        assert_eq!(ultrasonic_rule(&[1.0, 2.0], &cfg).unwrap(), vec![Present, Absent]);
        let band = UltrasonicConfig {
            absence_intervals: vec![[2.0, 4.0]],
            ..cfg
        };
        assert_eq!(ultrasonic_rule(&[1.0, 3.0, 1.0, 3.0], &band).unwrap(), vec![Present, Absent, Present, Absent]);
        assert_eq!(ultrasonic_rule(&[4.5], &band).unwrap(), vec![Present]);
        assert!(ultrasonic_rule(&[f64::NAN], &band).is_err());
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let cfg = UltrasonicConfig {
            absence_intervals: vec![[1.0, 3.0], [2.5, 5.0]],
            sound_speed: 340.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(accel_sigma(&[acc(0.0, 0.0, 1.0); 5]).unwrap(), 0.0);
        assert_eq!(acc(3.0, 4.0, 0.0).magnitude(), 5.0);
        let s = accel_sigma(&[acc(1.0, 0.0, 0.0), acc(0.0, 1.0, 0.0), acc(0.0, 0.0, 3.0)]).unwrap();
        assert!((s - (8.0f64 / 9.0).sqrt()).abs() < 1e-12);
        assert!(accel_sigma(&[acc(0.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn accel_rule_examples() {
        let cfg = AccelConfig::default();
        assert_eq!(accel_rule(&[0.0; 3], &cfg).unwrap(), vec![Absent; 3]);
        assert_eq!(accel_rule(&[0.01, 0.05], &cfg).unwrap(), vec![Absent, Present]);
        assert_eq!(accel_rule(&[0.01, 0.05], &AccelConfig { theta: 1.0 }).unwrap(), vec![Absent; 2]);
    }

    #[test]
    fn wifi_examples() {
        let cfg = WifiConfig::default();
        let noon = 12 * 3600;
        assert_eq!(wifi_rule(&[], &[0, noon], &cfg).unwrap(), vec![Absent; 2]);
        let q = [11 * 3600, 11 * 3600 + 1, noon, 13 * 3600 - 1, 13 * 3600];
        assert_eq!(wifi_rule(&[noon], &q, &cfg).unwrap(), vec![Absent, Present, Present, Present, Absent]);

        let obs = [noon, noon + 1800];
        let queries: Vec<i64> = (0..24 * 60).map(|m| m * 60).collect();
        let states = wifi_rule(&obs, &queries, &cfg).unwrap();
        let runs = states.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(runs, 2);
    }

    #[test]
    fn windowed_rules() {
        let starts = window_grid(0, 180, 60);
        assert_eq!(starts, vec![0, 60, 120]);
        let readings: Vec<UltrasonicReading> = (0..18)
            .map(|i| UltrasonicReading {
                timestamp: i * 10,
                distance_m: if (6..12).contains(&i) { 0.6 } else { 3.5 },
            })
            .collect();
        let s = ultrasonic_windows(&readings, &starts, 60, &UltrasonicConfig::default()).unwrap();
        assert_eq!(s.states(), [Absent, Present, Absent]);
        let w = wifi_windows(&[90], &starts, 60, &WifiConfig { delta: 60 }).unwrap();
        assert_eq!(w.states(), [Absent, Present, Absent]);
    }

    proptest! {
        #[test]
        fn wifi_matches_brute_force(
            mut obs in proptest::collection::vec(0i64..20_000, 0..30),
            queries in proptest::collection::vec(0i64..20_000, 1..50),
            delta in 1i64..5000,
        ) {
            obs.sort();
            let cfg = WifiConfig { delta };
            let fast = wifi_rule(&obs, &queries, &cfg).unwrap();
            for (q, s) in queries.iter().zip(fast) {
                let brute = obs.iter().any(|o| (q - o).abs() < delta);
                prop_assert_eq!(s.is_present(), brute);
            }
        }

        #[test]
        fn sigma_rotation_invariant(
            v in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 2..40),
            yaw in 0.0f64..6.3, pitch in 0.0f64..6.3,
        ) {
            let (cy, sy, cp, sp) = (yaw.cos(), yaw.sin(), pitch.cos(), pitch.sin());
            let orig: Vec<AccelSample> = v.iter().map(|&(x, y, z)| acc(x, y, z)).collect();
            let rotated: Vec<AccelSample> = v
                .iter()
                .map(|&(x, y, z)| {
                    let (x1, y1) = (cy * x - sy * y, sy * x + cy * y);
                    let (x2, z2) = (cp * x1 + sp * z, -sp * x1 + cp * z);
                    acc(x2, y1, z2)
                })
                .collect();
            let a = accel_sigma(&orig).unwrap();
            let b = accel_sigma(&rotated).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn pointwise_rules_commute_with_permutation(d in proptest::collection::vec(0.0f64..5.0, 1..50), shift in 0usize..50) {
            let cfg = UltrasonicConfig::default();
            let out = ultrasonic_rule(&d, &cfg).unwrap();
            let mut rotated = d.clone();
            let k = shift % d.len();
            rotated.rotate_left(k);
            let mut expected = out.clone();
            expected.rotate_left(k);
            prop_assert_eq!(ultrasonic_rule(&rotated, &cfg).unwrap(), expected);
        }
    }
}
