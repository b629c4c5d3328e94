use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{LabelPartition, Presence, Timestamp};

/// Hour-of-day occupancy assumption used to seed the labels and break vote ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorSchedule {
    hours: [Presence; 24],
    /// Added to UTC timestamps before taking the hour of day.
    utc_offset_s: i64,
}

impl Default for PriorSchedule {
    fn default() -> Self {
        Self::office()
    }
}

impl PriorSchedule {
    pub fn new(hours: [Presence; 24]) -> Self {
        Self {
            hours,
            utc_offset_s: 0,
        }
    }

    /// Present from 9 am to 8 pm, absent otherwise.
    pub fn office() -> Self {
        Self::from_span(9, 20)
    }

    /// Present for hours `start..end`; wraps past midnight when `start > end`.
    pub fn from_span(start: u32, end: u32) -> Self {
        let mut hours = [Presence::Absent; 24];
        for (h, slot) in hours.iter_mut().enumerate() {
            let h = h as u32;
            let inside = if start <= end {
                (start..end).contains(&h)
            } else {
                h >= start || h < end
            };
            if inside {
                *slot = Presence::Present;
            }
        }
        Self::new(hours)
    }

    pub fn with_utc_offset(mut self, seconds: i64) -> Self {
        self.utc_offset_s = seconds;
        self
    }

    pub fn utc_offset(&self) -> i64 {
        self.utc_offset_s
    }

    /// The same schedule moved later by `hours` (earlier when negative).
    pub fn shifted(&self, hours: i32) -> Self {
        let mut out = *self;
        for h in 0..24 {
            let src = (h as i32 - hours).rem_euclid(24) as usize;
            out.hours[h] = self.hours[src];
        }
        out
    }

    pub fn hours(&self) -> &[Presence; 24] {
        &self.hours
    }

    pub fn hour_of(&self, t: Timestamp) -> usize {
        ((t + self.utc_offset_s).rem_euclid(86_400) / 3_600) as usize
    }

    pub fn state_at(&self, t: Timestamp) -> Presence {
        self.hours[self.hour_of(t)]
    }

    pub fn labels_for(&self, window_starts: &[Timestamp]) -> Vec<Presence> {
        window_starts.iter().map(|&t| self.state_at(t)).collect()
    }

    pub fn present_count(&self, window_starts: &[Timestamp]) -> usize {
        window_starts
            .iter()
            .filter(|&&t| self.state_at(t).is_present())
            .count()
    }
}

impl fmt::Display for PriorSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.hours {
            write!(f, "{}", h.bit())?;
        }
        Ok(())
    }
}

/// Accepts `"9-20"` (present for hours 9 to 19) or 24 characters of `0`/`1`.
impl FromStr for PriorSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("schedule {s:?}: expected \"START-END\" hours or 24 digits of 0/1"));
        if let Some((a, b)) = s.split_once('-') {
            let start: u32 = a.trim().parse().map_err(|_| bad())?;
            let end: u32 = b.trim().parse().map_err(|_| bad())?;
            if start > 23 || end > 24 {
                return Err(bad());
            }
            return Ok(Self::from_span(start, end % 24));
        }
        if s.len() != 24 {
            return Err(bad());
        }
        let mut hours = [Presence::Absent; 24];
        for (slot, c) in hours.iter_mut().zip(s.chars()) {
            *slot = match c {
                '0' => Presence::Absent,
                '1' => Presence::Present,
                _ => return Err(bad()),
            };
        }
        Ok(Self::new(hours))
    }
}

/// Label every window from the schedule; nothing starts unlabeled.
pub fn init_from_prior(schedule: &PriorSchedule, window_starts: &[Timestamp]) -> Result<LabelPartition> {
    if window_starts.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(LabelPartition::fully_labeled(&schedule.labels_for(window_starts)))
}
