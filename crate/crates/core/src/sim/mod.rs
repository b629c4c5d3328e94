//! Synthetic plug-load traces with ground-truth presence.
//!
//! Each simulated day has an arrival, a departure and a few midday
//! absences, all on whole minutes. Devices used that day run at their
//! active level with strong ripple while the user is there. At each
//! departure a device is either switched off or left running at its idle
//! level with little ripple. Switching happens a few seconds after the
//! transition, so every edge falls inside the first window of the new
//! state.

mod profiles;
mod sensors;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{PowerTrace, Presence, PresenceSeries, Timestamp};

pub use profiles::{preset, PRESETS};
pub use sensors::{simulate_sensors, SensorNoise, SensorTraces};

/// 2014-06-02 00:00:00 UTC, a Monday.
pub const START_EPOCH: Timestamp = 1_401_667_200;

const DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Desktop,
    Monitor,
    Laptop,
    Lamp,
    Charger,
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::Desktop => "desktop",
            DeviceKind::Monitor => "monitor",
            DeviceKind::Laptop => "laptop",
            DeviceKind::Lamp => "lamp",
            DeviceKind::Charger => "charger",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub kind: DeviceKind,
    /// Watts while in use.
    pub active_power: f64,
    /// Watts while running unattended.
    pub idle_power: f64,
    pub ripple_sd_active: f64,
    pub ripple_sd_idle: f64,
    pub p_left_on_when_absent: f64,
    /// Chance the device is used at all on a given day.
    pub p_used_per_day: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.active_power >= self.idle_power
            && self.idle_power >= 0.0
            && self.ripple_sd_active >= 0.0
            && self.ripple_sd_idle >= 0.0
            && (0.0..=1.0).contains(&self.p_left_on_when_absent)
            && (0.0..=1.0).contains(&self.p_used_per_day);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid {} profile: {self:?}", self.kind)))
        }
    }
}

/// Daily routine, in hours of day and minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub arrival_mean_h: f64,
    pub arrival_sd_h: f64,
    pub departure_mean_h: f64,
    pub departure_sd_h: f64,
    pub absence_rate_per_h: f64,
    pub absence_mean_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub name: String,
    pub devices: Vec<DeviceProfile>,
    pub schedule: ScheduleParams,
    pub days: usize,
    /// Devices switch at most this many seconds after a transition.
    pub switch_delay_max_s: i64,
}

impl UserProfile {
    pub fn with_days(mut self, days: usize) -> Self {
        self.days = days;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if s.arrival_mean_h.partial_cmp(&s.departure_mean_h) != Some(std::cmp::Ordering::Less) {
            return bad(format!(
                "arrival {}h must precede departure {}h",
                s.arrival_mean_h, s.departure_mean_h
            ));
        }
        if s.arrival_sd_h < 0.0 || s.departure_sd_h < 0.0 || s.absence_rate_per_h < 0.0 || s.absence_mean_min <= 0.0 {
            return bad("schedule spreads and rates must be nonnegative".into());
        }
        if !(0..60).contains(&self.switch_delay_max_s) {
            return bad(format!("switch delay {}s must lie in [0, 60)", self.switch_delay_max_s));
        }
        self.devices.iter().try_for_each(DeviceProfile::validate)
    }
}

/// Simulated power and the matching per-minute presence.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: PowerTrace,
    pub truth: PresenceSeries,
    /// Presence intervals `[start, end)` in epoch seconds.
    pub presence: Vec<(Timestamp, Timestamp)>,
}

/// Presence minutes of one day, relative to midnight.
fn draw_day<R: Rng>(s: &ScheduleParams, rng: &mut R) -> Vec<(i64, i64)> {
    let normal = |mean: f64, sd: f64, rng: &mut R| {
        if sd > 0.0 {
            Normal::new(mean, sd).expect("finite parameters").sample(rng)
        } else {
            mean
        }
    };
    let arrival = (normal(s.arrival_mean_h, s.arrival_sd_h, rng) * 60.0).round() as i64;
    let arrival = arrival.clamp(5 * 60, 13 * 60);
    let departure = (normal(s.departure_mean_h, s.departure_sd_h, rng) * 60.0).round() as i64;
    let departure = departure.clamp((arrival + 120).max(14 * 60), 23 * 60 + 30);

    let span_h = (departure - arrival) as f64 / 60.0;
    let expected = s.absence_rate_per_h * span_h;
    let count = if expected > 0.0 {
        Poisson::new(expected).expect("positive rate").sample(rng) as usize
    } else {
        0
    };
    let exp = Exp::new(1.0 / s.absence_mean_min).expect("positive mean");
    let mut gaps: Vec<(i64, i64)> = (0..count)
        .filter_map(|_| {
            let lo = arrival + 30;
            let hi = departure - 30;
            if hi <= lo {
                return None;
            }
            let start = rng.random_range(lo..hi);
            let len = (exp.sample(rng).round() as i64).max(5);
            Some((start, (start + len).min(departure - 10)))
        })
        .filter(|(a, b)| b > a)
        .collect();
    gaps.sort_unstable();

    let mut out = Vec::new();
    let mut cursor = arrival;
    for (a, b) in gaps {
        if a > cursor {
            out.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if departure > cursor {
        out.push((cursor, departure));
    }
    out
}

/// What a device does over one stretch of time.
#[derive(Clone, Copy)]
enum Mode {
    Off,
    Idle,
    Active,
}

pub fn simulate_user(profile: &UserProfile, seed: u64) -> Result<SimOutput> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = profile.days as i64 * DAY;

    // presence intervals in seconds from the start, plus the day each belongs to
    let mut segments: Vec<(i64, i64, usize)> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::with_capacity(profile.days);
    for day in 0..profile.days {
        let base = day as i64 * DAY;
        for (a, b) in draw_day(&profile.schedule, &mut rng) {
            segments.push((base + a * 60, base + b * 60, day));
        }
        used.push(profile.devices.iter().map(|d| rng.random_bool(d.p_used_per_day)).collect());
    }

    let n = total as usize;
    let mut level = vec![0.0f64; n];
    let mut var = vec![0.0f64; n];
    let delay = |rng: &mut ChaCha8Rng| {
        if profile.switch_delay_max_s > 0 {
            rng.random_range(0..=profile.switch_delay_max_s)
        } else {
            0
        }
    };

    for (di, dev) in profile.devices.iter().enumerate() {
        // piecewise modes: (switch time, mode), starting Off at t = 0
        let mut changes: Vec<(i64, Mode)> = vec![(0, Mode::Off)];
        for &(start, end, day) in &segments {
            if used[day][di] {
                changes.push((start + delay(&mut rng), Mode::Active));
                let left = if rng.random_bool(dev.p_left_on_when_absent) {
                    Mode::Idle
                } else {
                    Mode::Off
                };
                changes.push((end + delay(&mut rng), left));
            }
        }
        changes.push((total, Mode::Off));
        for w in changes.windows(2) {
            let (from, mode) = w[0];
            let to = w[1].0.min(total);
            let (p, sd) = match mode {
                Mode::Off => continue,
                Mode::Idle => (dev.idle_power, dev.ripple_sd_idle),
                Mode::Active => (dev.active_power, dev.ripple_sd_active),
            };
            for t in from.max(0) as usize..to.max(0) as usize {
                level[t] += p;
                var[t] += sd * sd;
            }
        }
    }

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let watts: Vec<f64> = level
        .iter()
        .zip(&var)
        .map(|(&l, &v)| {
            let w = if v > 0.0 { l + v.sqrt() * std_normal.sample(&mut rng) } else { l };
            w.max(0.0)
        })
        .collect();
    let trace = PowerTrace::from_watts(profile.name.clone(), START_EPOCH, 1, &watts)?;

    let minutes = (total / 60) as usize;
    let mut states = vec![Presence::Absent; minutes];
    for &(a, b, _) in &segments {
        states[(a / 60) as usize..(b / 60) as usize].fill(Presence::Present);
    }
    let starts = (0..minutes as i64).map(|m| START_EPOCH + m * 60).collect();
    let truth = PresenceSeries::new(starts, states)?;
    let presence = segments
        .iter()
        .map(|&(a, b, _)| (START_EPOCH + a, START_EPOCH + b))
        .collect();
    Ok(SimOutput { trace, truth, presence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::sd;

    fn flat_profile() -> UserProfile {
        UserProfile {
            name: "flat".into(),
            devices: vec![DeviceProfile {
                kind: DeviceKind::Desktop,
                active_power: 80.0,
                idle_power: 30.0,
                ripple_sd_active: 0.0,
                ripple_sd_idle: 0.0,
                p_left_on_when_absent: 0.0,
                p_used_per_day: 1.0,
            }],
            schedule: ScheduleParams {
                arrival_mean_h: 9.0,
                arrival_sd_h: 0.0,
                departure_mean_h: 17.0,
                departure_sd_h: 0.0,
                absence_rate_per_h: 0.0,
                absence_mean_min: 30.0,
            },
            days: 2,
            switch_delay_max_s: 0,
        }
    }

    #[test]
    fn noise_free_trace_steps_at_transitions() {
        let out = simulate_user(&flat_profile(), 1).unwrap();
        let w: Vec<f64> = out.trace.samples().iter().map(|s| s.watts).collect();
        for day in 0..2 {
            let base = day * 86_400;
            assert_eq!(w[base + 9 * 3600 - 1], 0.0);
            assert_eq!(w[base + 9 * 3600], 80.0);
            assert_eq!(w[base + 17 * 3600 - 1], 80.0);
            assert_eq!(w[base + 17 * 3600], 0.0);
        }
        let edges = w.windows(2).filter(|p| p[0] != p[1]).count();
        assert_eq!(edges, 4);
        assert_eq!(out.presence.len(), 2);
        let present = out.truth.states().iter().filter(|s| s.is_present()).count();
        assert_eq!(present, 2 * 8 * 60);
    }

    #[test]
    fn same_seed_same_trace() {
        let p = preset("user17").unwrap().with_days(2);
        let a = simulate_user(&p, 5).unwrap();
        let b = simulate_user(&p, 5).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.truth, b.truth);
        let c = simulate_user(&p, 6).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = flat_profile();
        p.schedule.arrival_mean_h = 18.0;
        assert!(simulate_user(&p, 0).is_err());
        let mut p = flat_profile();
        p.devices[0].idle_power = 100.0;
        assert!(simulate_user(&p, 0).is_err());
        let mut p = flat_profile();
        p.days = 0;
        assert!(simulate_user(&p, 0).is_err());
    }

    #[test]
    fn left_on_desktop_makes_absence_power_bimodal() {
        let mut p = preset("user17").unwrap().with_days(20);
        p.devices.retain(|d| d.kind == DeviceKind::Desktop);
        p.devices[0].p_left_on_when_absent = 0.5;
        p.devices[0].p_used_per_day = 1.0;
        let out = simulate_user(&p, 3).unwrap();
        let w: Vec<f64> = out.trace.samples().iter().map(|s| s.watts).collect();
        // per-minute mean power over absent minutes, binned at 10 W
        let mut hist = [0usize; 12];
        for (m, s) in out.truth.states().iter().enumerate() {
            if !s.is_present() {
                let mean = w[m * 60..m * 60 + 60].iter().sum::<f64>() / 60.0;
                hist[((mean / 10.0) as usize).min(11)] += 1;
            }
        }
        let idle_bin = (p.devices[0].idle_power / 10.0) as usize;
        assert!(hist[0] > 1000 && hist[idle_bin] > 1000, "{hist:?}");
        let between: usize = hist[2..idle_bin - 1].iter().sum();
        assert!(between < hist[0] / 50, "{hist:?}");
    }

    #[test]
    fn presence_fraction_matches_schedule() {
        let p = preset("user17").unwrap().with_days(60);
        let out = simulate_user(&p, 11).unwrap();
        let frac = out.truth.states().iter().filter(|s| s.is_present()).count() as f64 / out.truth.len() as f64;
        let s = p.schedule;
        // stay length minus expected midday absences, ignoring clamping and overlaps
        let stay = s.departure_mean_h - s.arrival_mean_h;
        let absent_h = s.absence_rate_per_h * stay * s.absence_mean_min / 60.0;
        let expected = (stay - absent_h) / 24.0;
        assert!((frac - expected).abs() < 0.03, "{frac} vs {expected}");
    }

    #[test]
    fn active_ripple_dominates_idle_ripple() {
        let p = preset("user17").unwrap().with_days(10);
        let out = simulate_user(&p, 21).unwrap();
        let w: Vec<f64> = out.trace.samples().iter().map(|s| s.watts).collect();
        let mut present = Vec::new();
        let mut absent = Vec::new();
        for (m, s) in out.truth.states().iter().enumerate() {
            let v = sd(&w[m * 60..m * 60 + 60]).unwrap();
            if s.is_present() { present.push(v) } else { absent.push(v) }
        }
        let pick = |v: &[f64]| -> Vec<f64> { v.iter().step_by(v.len() / 500).take(500).copied().collect() };
        let (x, y) = (pick(&present), pick(&absent));
        // Mann-Whitney U with the normal approximation
        let mut all: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rank_sum = 0.0;
        let mut i = 0;
        while i < all.len() {
            let mut j = i;
            while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            rank_sum += avg * all[i..=j].iter().filter(|e| e.1).count() as f64;
            i = j + 1;
        }
        let (n1, n2) = (x.len() as f64, y.len() as f64);
        let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
        let z = (u - n1 * n2 / 2.0) / (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
        use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
        let p_value = 1.0 - StdNormal::new(0.0, 1.0).unwrap().cdf(z);
        assert!(p_value < 0.01, "z = {z}");
    }
}
