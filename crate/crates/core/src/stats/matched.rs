use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::telemetry::TelemetrySeries;

use super::{mean, sample_variance, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Welch's unequal-variance two-sample t-test of `a` against `b`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("welch test needs at least 2 samples per group"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p_value = if diff == 0.0 { 1.0 } else { 0.0 };
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok(WelchTest { t, df: na + nb - 2.0, p_value });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(format!("student t: {e}")))?;
    Ok(WelchTest { t, df, p_value: (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerWindow {
    #[serde(with = "crate::timefmt::serde_ts")]
    pub start: DateTime<Utc>,
    pub duration_hours: f64,
    pub samples: Vec<f64>,
}

/// Before/after power comparison at identical weekday and time of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedComparison {
    #[serde(with = "crate::timefmt::serde_ts")]
    pub event_time: DateTime<Utc>,
    pub before_window: PowerWindow,
    pub after_window: PowerWindow,
    pub mean_before: f64,
    pub mean_after: f64,
    /// Percent change of the after mean relative to the before mean.
    pub relative_change: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

fn window_samples(series: &TelemetrySeries, start: DateTime<Utc>, length: Duration) -> Result<Vec<f64>> {
    let (Some(first), Some(last)) = (series.first_timestamp(), series.last_timestamp()) else {
        return Err(Error::InsufficientCoverage("empty power series".into()));
    };
    if first > start || last < start {
        return Err(Error::InsufficientCoverage(format!(
            "power series {} does not cover the window starting {}",
            series.sensor_id,
            crate::timefmt::format_timestamp(start)
        )));
    }
    let end = start + length;
    let samples: Vec<f64> = series
        .samples()
        .iter()
        .filter(|s| s.timestamp >= start && s.timestamp < end)
        .map(|s| s.value)
        .collect();
    if samples.len() < 3 {
        return Err(Error::InsufficientCoverage(format!(
            "window starting {} holds {} samples, need at least 3",
            crate::timefmt::format_timestamp(start),
            samples.len()
        )));
    }
    Ok(samples)
}

/// Compares power in a window `days_before` days before the event with one
/// `days_after` days after it. The offsets must add up to whole weeks so both
/// windows start on the same weekday and time of day.
pub fn matched_window_analysis(
    power: &TelemetrySeries,
    event_time: DateTime<Utc>,
    days_before: u32,
    days_after: u32,
    window: Duration,
) -> Result<MatchedComparison> {
    if (days_before + days_after) % 7 != 0 || days_before + days_after == 0 {
        return Err(Error::invalid(format!(
            "days_before + days_after must be a positive multiple of 7, got {days_before} + {days_after}"
        )));
    }
    if window <= Duration::zero() {
        return Err(Error::invalid("matched window length must be positive"));
    }
    let before_start = event_time - Duration::days(i64::from(days_before));
    let after_start = event_time + Duration::days(i64::from(days_after));
    let before = window_samples(power, before_start, window)?;
    let after = window_samples(power, after_start, window)?;
    let test = welch_t_test(&after, &before)?;
    let (mean_before, mean_after) = (mean(&before), mean(&after));
    let hours = window.num_seconds() as f64 / 3600.0;
    Ok(MatchedComparison {
        event_time,
        before_window: PowerWindow { start: before_start, duration_hours: hours, samples: before },
        after_window: PowerWindow { start: after_start, duration_hours: hours, samples: after },
        mean_before,
        mean_after,
        relative_change: 100.0 * (mean_after - mean_before) / mean_before,
        t_statistic: test.t,
        p_value: test.p_value,
        significant: test.p_value < DEFAULT_ALPHA,
    })
}
