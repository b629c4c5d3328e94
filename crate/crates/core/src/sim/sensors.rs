use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::{AccelSample, UltrasonicReading};
use crate::trace::{Presence, PresenceSeries, Timestamp};

const NEAR_M: f64 = 0.6;
const FAR_M: f64 = 3.5;
const OBSTACLE_M: f64 = 1.2;
const ULTRASONIC_PERIOD_S: i64 = 10;
const FIDGET_G: f64 = 0.06;

/// Artifact rates of the simulated auxiliary sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    /// Gaussian error of each range reading, meters.
    pub range_sd_m: f64,
    /// Days with an object left in front of the range sensor.
    pub obstacle_day_prob: f64,
    /// Present minutes spent away from the sensor's line of sight.
    pub away_minute_prob: f64,
    /// Gaussian error of each acceleration axis, g.
    pub accel_sd_g: f64,
    /// Present minutes spent sitting still.
    pub still_minute_prob: f64,
    /// Days on which the chair sensor picks up vibration.
    pub vibration_day_prob: f64,
    pub vibration_sd_g: f64,
    /// Days the phone comes to the office.
    pub phone_day_prob: f64,
    /// Sightings per present hour on phone days.
    pub sightings_per_hour: f64,
    /// One sighting in the middle of every present minute instead of random ones.
    pub sighting_every_minute: bool,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            range_sd_m: 0.03,
            obstacle_day_prob: 0.03,
            away_minute_prob: 0.15,
            accel_sd_g: 0.002,
            still_minute_prob: 0.3,
            vibration_day_prob: 0.3,
            vibration_sd_g: 0.05,
            phone_day_prob: 0.5,
            sightings_per_hour: 3.0,
            sighting_every_minute: false,
        }
    }
}

impl SensorNoise {
    /// Clean channels: every present minute looks present to every sensor.
    pub fn none() -> Self {
        Self {
            range_sd_m: 0.0,
            obstacle_day_prob: 0.0,
            away_minute_prob: 0.0,
            accel_sd_g: 0.0,
            still_minute_prob: 0.0,
            vibration_day_prob: 0.0,
            vibration_sd_g: 0.0,
            phone_day_prob: 1.0,
            sightings_per_hour: 60.0,
            sighting_every_minute: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorTraces {
    /// One reading every 10 s.
    pub ultrasonic: Vec<UltrasonicReading>,
    /// One sample per second.
    pub accel: Vec<AccelSample>,
    /// Sighting times, sorted.
    pub wifi: Vec<Timestamp>,
}

fn gauss<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    } else {
        0.0
    }
}

/// Range, chair and WiFi traces consistent with a per-minute truth.
pub fn simulate_sensors(truth: &PresenceSeries, noise: &SensorNoise, seed: u64) -> Result<SensorTraces> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    for p in [
        noise.obstacle_day_prob,
        noise.away_minute_prob,
        noise.still_minute_prob,
        noise.vibration_day_prob,
        noise.phone_day_prob,
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("sensor probability {p} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = truth.window_starts()[0];
    let day_of = |t: Timestamp| ((t - first).div_euclid(86_400)) as usize;
    let days = day_of(*truth.window_starts().last().expect("non-empty")) + 1;
    let obstacle: Vec<bool> = (0..days).map(|_| rng.random_bool(noise.obstacle_day_prob)).collect();
    let vibration: Vec<bool> = (0..days).map(|_| rng.random_bool(noise.vibration_day_prob)).collect();
    let phone: Vec<bool> = (0..days).map(|_| rng.random_bool(noise.phone_day_prob)).collect();
    let p_sighting = (noise.sightings_per_hour / 60.0).min(1.0);

    let mut out = SensorTraces {
        ultrasonic: Vec::new(),
        accel: Vec::new(),
        wifi: Vec::new(),
    };
    let starts = truth.window_starts();
    for (i, (start, state)) in truth.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(start + 60).min(start + 60);
        let day = day_of(start);
        let present = state == Presence::Present;

        let distance = match (present, rng.random_bool(noise.away_minute_prob)) {
            (true, false) => NEAR_M,
            (true, true) => FAR_M,
            (false, _) if obstacle[day] => OBSTACLE_M,
            (false, _) => FAR_M,
        };
        let first_reading = start + (ULTRASONIC_PERIOD_S - (start - first).rem_euclid(ULTRASONIC_PERIOD_S)) % ULTRASONIC_PERIOD_S;
        for t in (first_reading..end).step_by(ULTRASONIC_PERIOD_S as usize) {
            out.ultrasonic.push(UltrasonicReading {
                timestamp: t,
                distance_m: (distance + gauss(&mut rng, noise.range_sd_m)).max(0.0),
            });
        }

        let fidget = present && !rng.random_bool(noise.still_minute_prob);
        for t in start..end {
            let mut s = AccelSample {
                timestamp: t,
                ax: 0.0,
                ay: 0.0,
                az: 1.0,
            };
            let mut jitter = |sd: f64| {
                s.ax += gauss(&mut rng, sd);
                s.ay += gauss(&mut rng, sd);
                s.az += gauss(&mut rng, sd);
            };
            jitter(noise.accel_sd_g);
            if fidget {
                jitter(FIDGET_G);
            }
            if vibration[day] {
                jitter(noise.vibration_sd_g);
            }
            out.accel.push(s);
        }

        if present && phone[day] {
            if noise.sighting_every_minute {
                out.wifi.push(start + (end - start) / 2);
            } else if rng.random_bool(p_sighting) {
                out.wifi.push(rng.random_range(start..end));
            }
        }
    }
    out.wifi.sort_unstable();
    Ok(out)
}
