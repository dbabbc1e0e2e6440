//! Setpoint change detection with two adjacent rolling windows.
//!
//! A boundary slides across the room's temperature grid. At each boundary the
//! mean over the preceding window is compared with the mean over the following
//! window. Boundaries where the absolute difference exceeds the threshold and
//! peaks locally become candidates; the strongest candidate wins over any
//! other within the refractory period.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::RoomTelemetry;
use crate::timefmt::{format_timestamp, parse_timestamp};

pub const DEFAULT_WINDOW_HOURS: i64 = 12;
pub const DEFAULT_THRESHOLD_C: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub window: Duration,
    /// Minimum absolute before/after mean difference, °C.
    pub threshold: f64,
    /// Events closer than this are merged.
    pub refractory: Duration,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let window = Duration::hours(DEFAULT_WINDOW_HOURS);
        Self { window, threshold: DEFAULT_THRESHOLD_C, refractory: window }
    }
}

impl DetectorConfig {
    pub fn new(window: Duration, threshold: f64) -> Self {
        Self { window, threshold, refractory: window }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window <= Duration::zero() {
            return Err(Error::invalid("detector window must be positive"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("detector threshold must be positive"));
        }
        if self.refractory < Duration::zero() {
            return Err(Error::invalid("refractory period must not be negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub room_id: String,
    /// First grid point of the new regime.
    #[serde(with = "crate::timefmt::serde_ts")]
    pub event_time: DateTime<Utc>,
    pub temp_before: f64,
    pub temp_after: f64,
    /// `temp_after - temp_before`.
    pub magnitude: f64,
}

/// Signed difference of after-window and before-window means for every valid
/// boundary index `w..=n-w`, using prefix sums.
fn boundary_differences(temps: &[f64], w: usize) -> Vec<(usize, f64, f64)> {
    let n = temps.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &t in temps {
        acc += t;
        prefix.push(acc);
    }
    let wf = w as f64;
    (w..=n - w)
        .map(|i| {
            let before = (prefix[i] - prefix[i - w]) / wf;
            let after = (prefix[i + w] - prefix[i]) / wf;
            (i, before, after)
        })
        .collect()
}

pub fn detect_changes(room: &RoomTelemetry, cfg: &DetectorConfig) -> Result<Vec<ChangeEvent>> {
    cfg.validate()?;
    let grid = room.grid_interval();
    let w = (cfg.window.num_milliseconds() as f64 / grid.num_milliseconds() as f64).round() as usize;
    if w == 0 {
        return Err(Error::invalid("detector window is shorter than the grid interval"));
    }
    let available = room.span() + grid;
    let needed = grid * (2 * w) as i32;
    if room.len() < 2 * w {
        return Err(Error::SpanTooShort {
            needed_secs: needed.num_seconds(),
            available_secs: if room.is_empty() { 0 } else { available.num_seconds() },
        });
    }

    let temps = room.temperatures();
    let points = room.points();
    let diffs = boundary_differences(&temps, w);
    let strength = |k: usize| (diffs[k].2 - diffs[k].1).abs();

    // Candidates are local maxima of |difference| above the threshold; the
    // maximum of every exceedance run is among them.
    let mut candidates: Vec<usize> = (0..diffs.len())
        .filter(|&k| {
            let s = strength(k);
            s > cfg.threshold
                && (k == 0 || s >= strength(k - 1))
                && (k + 1 == diffs.len() || s > strength(k + 1))
        })
        .collect();

    // Strongest first; a candidate closer than the refractory period to an
    // accepted event is absorbed by it.
    candidates.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)).then(a.cmp(&b)));
    let refractory_ms = cfg.refractory.num_milliseconds();
    let mut accepted: Vec<usize> = Vec::new();
    for k in candidates {
        let t = points[diffs[k].0].timestamp;
        let clashes = accepted
            .iter()
            .any(|&a| (points[diffs[a].0].timestamp - t).num_milliseconds().abs() < refractory_ms);
        if !clashes {
            accepted.push(k);
        }
    }
    accepted.sort_unstable();

    Ok(accepted
        .into_iter()
        .map(|k| {
            let (i, before, after) = diffs[k];
            ChangeEvent {
                room_id: room.room_id.clone(),
                event_time: points[i].timestamp,
                temp_before: before,
                temp_after: after,
                magnitude: after - before,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub total: usize,
    pub per_room: BTreeMap<String, usize>,
    /// Keyed by `YYYY-MM`; months without events are absent.
    pub per_month: BTreeMap<String, usize>,
    /// Signed magnitude in 1 °C bins, keyed by the bin's lower edge.
    pub magnitude_histogram: BTreeMap<i64, usize>,
}

pub fn summarize_changes(events: &[ChangeEvent]) -> ChangeSummary {
    let mut summary = ChangeSummary { total: events.len(), ..Default::default() };
    for ev in events {
        *summary.per_room.entry(ev.room_id.clone()).or_default() += 1;
        *summary.per_month.entry(ev.event_time.format("%Y-%m").to_string()).or_default() += 1;
        *summary.magnitude_histogram.entry(ev.magnitude.floor() as i64).or_default() += 1;
    }
    summary
}

pub const EVENTS_HEADER: [&str; 5] = ["room_id", "event_time", "temp_before", "temp_after", "magnitude"];

pub fn write_events_csv<W: Write>(events: &[ChangeEvent], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for ev in events {
        w.write_record([
            ev.room_id.clone(),
            format_timestamp(ev.event_time),
            ev.temp_before.to_string(),
            ev.temp_after.to_string(),
            ev.magnitude.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<ChangeEvent>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {:?} in events csv", field(i))))
        };
        out.push(ChangeEvent {
            room_id: field(0).to_string(),
            event_time: parse_timestamp(field(1))
                .ok_or_else(|| Error::invalid(format!("bad timestamp {:?} in events csv", field(1))))?,
            temp_before: num(2)?,
            temp_after: num(3)?,
            magnitude: num(4)?,
        });
    }
    Ok(out)
}
