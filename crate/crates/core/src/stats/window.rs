use std::io::Write;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::changepoint::ChangeEvent;
use crate::error::{Error, Result};
use crate::telemetry::{RoomPoint, RoomTelemetry};
use crate::timefmt::format_timestamp;

use super::{correlate, mean, ols};

/// One (event, window length) correlation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub room_id: String,
    #[serde(with = "crate::timefmt::serde_ts")]
    pub event_time: DateTime<Utc>,
    pub window_hours: f64,
    pub guard_minutes: f64,
    pub temp_before: f64,
    pub temp_after: f64,
    pub n_before: usize,
    pub n_after: usize,
    pub mean_power_before: f64,
    pub mean_power_after: f64,
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
    /// kW per °C.
    pub sensitivity_abs: f64,
    /// Percent of before-window mean power per °C.
    pub sensitivity_rel: f64,
    /// A window overlaps another detected change in the same room.
    pub confounded: bool,
}

/// Guard gap excluded on both sides of an event: none for grids coarser than
/// 15 minutes, otherwise the 15 minutes a setpoint needs to settle.
pub fn default_guard(grid_interval: Duration) -> Duration {
    if grid_interval > Duration::minutes(15) {
        Duration::zero()
    } else {
        Duration::minutes(15)
    }
}

/// Points with `lo <= t < hi` (or `lo < t <= hi` when `right_closed`).
fn slice_between(points: &[RoomPoint], lo: DateTime<Utc>, hi: DateTime<Utc>, right_closed: bool) -> &[RoomPoint] {
    let (a, b) = if right_closed {
        (points.partition_point(|p| p.timestamp <= lo), points.partition_point(|p| p.timestamp <= hi))
    } else {
        (points.partition_point(|p| p.timestamp < lo), points.partition_point(|p| p.timestamp < hi))
    };
    &points[a..b.max(a)]
}

fn check_coverage(room: &RoomTelemetry, event: &ChangeEvent, window: Duration, guard: Duration) -> Result<()> {
    if window <= Duration::zero() || guard < Duration::zero() {
        return Err(Error::invalid("window length must be positive and guard non-negative"));
    }
    let (Some(start), Some(end)) = (room.start(), room.end()) else {
        return Err(Error::InsufficientCoverage(format!("room {} has no data", room.room_id)));
    };
    let need_lo = event.event_time - guard - window;
    let need_hi = event.event_time + guard + window;
    if start > need_lo || end < need_hi {
        return Err(Error::InsufficientCoverage(format!(
            "room {} covers {}..{} but the analysis needs {}..{}",
            room.room_id,
            format_timestamp(start),
            format_timestamp(end),
            format_timestamp(need_lo),
            format_timestamp(need_hi)
        )));
    }
    Ok(())
}

/// Before window `[e - g - L, e - g)` and after window `(e + g, e + g + L]`.
fn windows<'a>(
    room: &'a RoomTelemetry,
    event: &ChangeEvent,
    window: Duration,
    guard: Duration,
) -> (&'a [RoomPoint], &'a [RoomPoint]) {
    let e = event.event_time;
    let before = slice_between(room.points(), e - guard - window, e - guard, false);
    let after = slice_between(room.points(), e + guard, e + guard + window, true);
    (before, after)
}

/// Correlates temperature with power over the pooled before and after windows
/// and derives the absolute (OLS slope) and relative sensitivity.
pub fn window_analysis(
    room: &RoomTelemetry,
    event: &ChangeEvent,
    window: Duration,
    guard: Duration,
) -> Result<AnalysisResult> {
    check_coverage(room, event, window, guard)?;
    let (before, after) = windows(room, event, window, guard);
    if before.len() < 3 || after.len() < 3 {
        return Err(Error::InsufficientCoverage(format!(
            "need at least 3 samples per window, got {} before and {} after",
            before.len(),
            after.len()
        )));
    }
    let temps: Vec<f64> = before.iter().chain(after).map(|p| p.temperature).collect();
    let powers: Vec<f64> = before.iter().chain(after).map(|p| p.power).collect();
    let corr = correlate(&temps, &powers)?;
    let slope = ols(&temps, &powers)?.slope;
    let power_before: Vec<f64> = before.iter().map(|p| p.power).collect();
    let power_after: Vec<f64> = after.iter().map(|p| p.power).collect();
    let mean_power_before = mean(&power_before);
    if mean_power_before <= 0.0 {
        return Err(Error::invalid("before-window mean power must be positive"));
    }
    Ok(AnalysisResult {
        room_id: room.room_id.clone(),
        event_time: event.event_time,
        window_hours: window.num_seconds() as f64 / 3600.0,
        guard_minutes: guard.num_seconds() as f64 / 60.0,
        temp_before: event.temp_before,
        temp_after: event.temp_after,
        n_before: before.len(),
        n_after: after.len(),
        mean_power_before,
        mean_power_after: mean(&power_after),
        pearson_r: corr.pearson_r,
        pearson_p: corr.pearson_p,
        spearman_rho: corr.spearman_rho,
        spearman_p: corr.spearman_p,
        sensitivity_abs: slope,
        sensitivity_rel: 100.0 * slope / mean_power_before,
        confounded: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowTag {
    Before,
    Guard,
    After,
}

impl WindowTag {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowTag::Before => "before",
            WindowTag::Guard => "guard",
            WindowTag::After => "after",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub timestamp: DateTime<Utc>,
    pub temperature: f64,
    pub power: f64,
    pub tag: WindowTag,
}

/// Every point from the start of the before window to the end of the after
/// window, tagged by the region it falls into.
pub fn plot_rows(room: &RoomTelemetry, event: &ChangeEvent, window: Duration, guard: Duration) -> Vec<PlotRow> {
    let e = event.event_time;
    slice_between(room.points(), e - guard - window, e + guard + window, false)
        .iter()
        .chain(room.points().iter().filter(|p| p.timestamp == e + guard + window))
        .map(|p| {
            let tag = if p.timestamp < e - guard {
                WindowTag::Before
            } else if p.timestamp <= e + guard {
                WindowTag::Guard
            } else {
                WindowTag::After
            };
            PlotRow { timestamp: p.timestamp, temperature: p.temperature, power: p.power, tag }
        })
        .collect()
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "temperature", "power", "window_tag"])?;
    for r in rows {
        w.write_record([
            format_timestamp(r.timestamp),
            r.temperature.to_string(),
            r.power.to_string(),
            r.tag.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
