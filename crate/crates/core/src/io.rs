//! CSV formats for traces, labels, features and sensor data.
//!
//! Timestamps are epoch seconds, or ISO-8601 date-times read as UTC when
//! they carry no offset. Fractions of a second are dropped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::sensors::{AccelSample, UltrasonicReading};
use crate::trace::{PowerTrace, Presence, PresenceSeries, Sample, Timestamp};

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_timestamp(s: &str) -> std::result::Result<Timestamp, String> {
    let s = s.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    if let Ok(t) = s.parse::<f64>() {
        if t.is_finite() {
            return Ok(t.trunc() as i64);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(format!("invalid timestamp {s:?}"))
}

fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("invalid {what} {:?}", s.trim()))
}

/// Run `row` on every data record after checking the header.
fn read_csv(path: &Path, header: &[&str], mut row: impl FnMut(&csv::StringRecord, u64) -> Result<()>) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let got = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let names: Vec<String> = got.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names.len() != header.len() || names.iter().zip(header).any(|(a, b)| a != b) {
        return Err(parse_err(path, 1, format!("expected header {:?}, found {:?}", header.join(","), names.join(","))));
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        row(&rec, line)?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Most common spacing between consecutive samples, the smallest on ties.
pub fn infer_period(samples: &[Sample]) -> i64 {
    let mut diffs: Vec<i64> = samples.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    if diffs.is_empty() {
        return 1;
    }
    diffs.sort_unstable();
    let (mut best, mut best_run) = (diffs[0], 0);
    let mut i = 0;
    while i < diffs.len() {
        let j = diffs[i..].partition_point(|&d| d == diffs[i]) + i;
        if j - i > best_run {
            best = diffs[i];
            best_run = j - i;
        }
        i = j;
    }
    best
}

/// Power CSV `timestamp,watts`. Repeated timestamps keep their first
/// sample; going back in time is an error.
pub fn read_power_csv(path: &Path, user_id: &str) -> Result<PowerTrace> {
    let mut samples: Vec<Sample> = Vec::new();
    read_csv(path, &["timestamp", "watts"], |rec, line| {
        let t = parse_timestamp(&rec[0]).map_err(|m| parse_err(path, line, m))?;
        let w = parse_f64(&rec[1], "power").map_err(|m| parse_err(path, line, m))?;
        if w < 0.0 {
            return Err(parse_err(path, line, format!("negative power {w}")));
        }
        match samples.last() {
            Some(prev) if t == prev.timestamp => {}
            Some(prev) if t < prev.timestamp => {
                return Err(parse_err(path, line, format!("timestamp {t} earlier than {}", prev.timestamp)));
            }
            _ => samples.push(Sample { timestamp: t, watts: w }),
        }
        Ok(())
    })?;
    let period = infer_period(&samples);
    PowerTrace::new(user_id, samples, period)
}

pub fn write_power_csv(path: &Path, trace: &PowerTrace) -> Result<()> {
    let mut out = String::with_capacity(trace.len() * 16 + 16);
    out.push_str("timestamp,watts\n");
    for s in trace.samples() {
        let _ = writeln!(out, "{},{}", s.timestamp, s.watts);
    }
    write_file(path, &out)
}

fn parse_state(s: &str) -> Option<Presence> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "present" => Some(Presence::Present),
        "0" | "absent" => Some(Presence::Absent),
        _ => None,
    }
}

/// Presence CSV `window_start,state` with state `1`/`0` (or `present`/`absent`).
pub fn read_presence_csv(path: &Path) -> Result<PresenceSeries> {
    let mut starts = Vec::new();
    let mut states = Vec::new();
    read_csv(path, &["window_start", "state"], |rec, line| {
        let t = parse_timestamp(&rec[0]).map_err(|m| parse_err(path, line, m))?;
        let s = parse_state(&rec[1]).ok_or_else(|| parse_err(path, line, format!("invalid state {:?}", &rec[1])))?;
        if starts.last().is_some_and(|&p| p >= t) {
            return Err(parse_err(path, line, "window starts must be strictly increasing"));
        }
        starts.push(t);
        states.push(s);
        Ok(())
    })?;
    if starts.is_empty() {
        return Err(Error::EmptyInput);
    }
    PresenceSeries::new(starts, states)
}

pub fn write_presence_csv(path: &Path, series: &PresenceSeries) -> Result<()> {
    let mut out = String::from("window_start,state\n");
    for (t, s) in series.iter() {
        let _ = writeln!(out, "{t},{}", s.bit());
    }
    write_file(path, &out)
}

/// Features CSV `window_start,mean_power,mac,mad,mahd,sd`.
pub fn write_features_csv(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut out = String::from("window_start,mean_power,mac,mad,mahd,sd\n");
    for (t, r) in features.window_starts().iter().zip(features.rows()) {
        let _ = writeln!(out, "{t},{},{},{},{},{}", r.mean_power, r.mac, r.mad, r.mahd, r.sd);
    }
    write_file(path, &out)
}

pub fn read_ultrasonic_csv(path: &Path) -> Result<Vec<UltrasonicReading>> {
    let mut out = Vec::new();
    read_csv(path, &["timestamp", "distance_m"], |rec, line| {
        let timestamp = parse_timestamp(&rec[0]).map_err(|m| parse_err(path, line, m))?;
        let distance_m = parse_f64(&rec[1], "distance").map_err(|m| parse_err(path, line, m))?;
        out.push(UltrasonicReading { timestamp, distance_m });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_ultrasonic_csv(path: &Path, readings: &[UltrasonicReading]) -> Result<()> {
    let mut out = String::from("timestamp,distance_m\n");
    for r in readings {
        let _ = writeln!(out, "{},{}", r.timestamp, r.distance_m);
    }
    write_file(path, &out)
}

pub fn read_accel_csv(path: &Path) -> Result<Vec<AccelSample>> {
    let mut out = Vec::new();
    read_csv(path, &["timestamp", "ax", "ay", "az"], |rec, line| {
        let err = |m| parse_err(path, line, m);
        out.push(AccelSample {
            timestamp: parse_timestamp(&rec[0]).map_err(err)?,
            ax: parse_f64(&rec[1], "ax").map_err(err)?,
            ay: parse_f64(&rec[2], "ay").map_err(err)?,
            az: parse_f64(&rec[3], "az").map_err(err)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_accel_csv(path: &Path, samples: &[AccelSample]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 48 + 16);
    out.push_str("timestamp,ax,ay,az\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.timestamp, s.ax, s.ay, s.az);
    }
    write_file(path, &out)
}

/// WiFi sightings, one `timestamp` per row; returned sorted.
pub fn read_wifi_csv(path: &Path) -> Result<Vec<Timestamp>> {
    let mut out = Vec::new();
    read_csv(path, &["timestamp"], |rec, line| {
        out.push(parse_timestamp(&rec[0]).map_err(|m| parse_err(path, line, m))?);
        Ok(())
    })?;
    out.sort_unstable();
    Ok(out)
}

pub fn write_wifi_csv(path: &Path, sightings: &[Timestamp]) -> Result<()> {
    let mut out = String::from("timestamp\n");
    for t in sightings {
        let _ = writeln!(out, "{t}");
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        fs::write(&p, contents).unwrap();
        (dir, p)
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1401667200"), Ok(1_401_667_200));
        assert_eq!(parse_timestamp("2014-06-02T00:00:00Z"), Ok(1_401_667_200));
        assert_eq!(parse_timestamp("2014-06-02 00:00:01.75"), Ok(1_401_667_201));
        assert_eq!(parse_timestamp("2014-06-02T02:00:00+02:00"), Ok(1_401_667_200));
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn power_roundtrip_and_duplicates() {
        let (_d, p) = tmp("timestamp,watts\n0,1.5\n1,2\n1,9\n2,0\n");
        let t = read_power_csv(&p, "u").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.samples()[1].watts, 2.0);
        assert_eq!(t.nominal_period(), 1);
        let out = p.with_file_name("g.csv");
        write_power_csv(&out, &t).unwrap();
        assert_eq!(read_power_csv(&out, "u").unwrap(), t);
    }

    #[test]
    fn errors_name_file_and_line() {
        let (_d, p) = tmp("timestamp,watts\n0,1\n1,abc\n");
        let msg = read_power_csv(&p, "u").unwrap_err().to_string();
        assert!(msg.contains("f.csv:3:"), "{msg}");
        let (_d, p) = tmp("time,power\n0,1\n");
        let msg = read_power_csv(&p, "u").unwrap_err().to_string();
        assert!(msg.contains("f.csv:1:"), "{msg}");
        let (_d, p) = tmp("timestamp,watts\n5,1\n3,1\n");
        assert!(read_power_csv(&p, "u").is_err());
    }

    #[test]
    fn empty_file_gives_empty_trace() {
        let (_d, p) = tmp("");
        assert!(read_power_csv(&p, "u").unwrap().is_empty());
        let (_d, p) = tmp("timestamp,watts\n");
        assert!(read_power_csv(&p, "u").unwrap().is_empty());
    }

    #[test]
    fn period_inference() {
        let s = |ts: &[i64]| ts.iter().map(|&t| Sample { timestamp: t, watts: 0.0 }).collect::<Vec<_>>();
        assert_eq!(infer_period(&s(&[0, 2, 4, 6, 20])), 2);
        assert_eq!(infer_period(&s(&[0])), 1);
    }

    #[test]
    fn presence_roundtrip() {
        let series = PresenceSeries::new(vec![0, 60, 120], vec![Presence::Absent, Presence::Present, Presence::Absent]).unwrap();
        let (_d, p) = tmp("");
        write_presence_csv(&p, &series).unwrap();
        assert_eq!(read_presence_csv(&p).unwrap(), series);
        let (_d, p) = tmp("window_start,state\n0,present\n60,maybe\n");
        assert!(read_presence_csv(&p).unwrap_err().to_string().contains(":3:"));
    }
}
