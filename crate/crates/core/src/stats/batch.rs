use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::changepoint::{detect_changes, DetectorConfig};
use crate::error::{Error, Result};
use crate::telemetry::RoomTelemetry;

use super::{default_guard, mean, ols, sample_variance, window_analysis, AnalysisResult};

pub const RESULTS_HEADER: [&str; 17] = [
    "room_id",
    "event_time",
    "window_hours",
    "guard_minutes",
    "temp_before",
    "temp_after",
    "n_before",
    "n_after",
    "mean_power_before",
    "mean_power_after",
    "pearson_r",
    "pearson_p",
    "spearman_rho",
    "spearman_p",
    "sensitivity_abs",
    "sensitivity_rel",
    "confounded",
];

/// An (event, window) pair that could not be analysed.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedAnalysis {
    pub room_id: String,
    pub event_time: Option<DateTime<Utc>>,
    pub window_hours: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutput {
    pub results: Vec<AnalysisResult>,
    pub skipped: Vec<SkippedAnalysis>,
}

/// Detects changes in every room and analyses each event with every window
/// length. `guard: None` picks [`default_guard`] from each room's grid.
pub fn batch_analysis(
    rooms: &[RoomTelemetry],
    cfg: &DetectorConfig,
    window_lengths: &[Duration],
    guard: Option<Duration>,
) -> Result<BatchOutput> {
    if window_lengths.is_empty() {
        return Err(Error::invalid("batch analysis needs at least one window length"));
    }
    let mut windows = window_lengths.to_vec();
    windows.sort();
    windows.dedup();
    let mut order: Vec<&RoomTelemetry> = rooms.iter().collect();
    order.sort_by(|a, b| a.room_id.cmp(&b.room_id).then_with(|| a.start().cmp(&b.start())));

    let mut out = BatchOutput::default();
    for room in order {
        let events = match detect_changes(room, cfg) {
            Ok(events) => events,
            Err(e) => {
                out.skipped.push(SkippedAnalysis {
                    room_id: room.room_id.clone(),
                    event_time: None,
                    window_hours: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let guard = guard.unwrap_or_else(|| default_guard(room.grid_interval()));
        for event in &events {
            for &window in &windows {
                match window_analysis(room, event, window, guard) {
                    Ok(mut res) => {
                        let lo = event.event_time - guard - window;
                        let hi = event.event_time + guard + window;
                        res.confounded = events
                            .iter()
                            .any(|o| o.event_time != event.event_time && o.event_time >= lo && o.event_time <= hi);
                        out.results.push(res);
                    }
                    Err(e) => out.skipped.push(SkippedAnalysis {
                        room_id: room.room_id.clone(),
                        event_time: Some(event.event_time),
                        window_hours: Some(window.num_seconds() as f64 / 3600.0),
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// One-way analysis of variance across groups.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || groups.iter().any(Vec::is_empty) || n <= k {
        return Err(Error::DegenerateGroups(format!("anova needs >= 2 non-empty groups and more values than groups ({k} groups, {n} values)")));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_between: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    let (df_between, df_within) = (k - 1, n - k);
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p_value) = if ms_within == 0.0 {
        if ms_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| Error::DegenerateGroups(e.to_string()))?;
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(AnovaResult { f, p_value, df_between, df_within })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileBox {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl QuartileBox {
    /// Quartiles by linear interpolation between order statistics.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self { min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
    }
}

/// Correlation direction by significance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionTally {
    pub positive_significant: usize,
    pub positive_not_significant: usize,
    pub negative_significant: usize,
    pub negative_not_significant: usize,
}

impl DirectionTally {
    pub fn positive(&self) -> usize {
        self.positive_significant + self.positive_not_significant
    }

    pub fn negative(&self) -> usize {
        self.negative_significant + self.negative_not_significant
    }

    fn add(&mut self, r: f64, p: f64, alpha: f64) {
        let significant = p < alpha;
        match (r >= 0.0, significant) {
            (true, true) => self.positive_significant += 1,
            (true, false) => self.positive_not_significant += 1,
            (false, true) => self.negative_significant += 1,
            (false, false) => self.negative_not_significant += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGroupSummary {
    pub window_hours: f64,
    pub count: usize,
    pub mean_sensitivity: f64,
    pub quartiles: QuartileBox,
    pub tally: DirectionTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRegression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub count: usize,
    pub alpha: f64,
    /// Mean relative sensitivity over every result, %/°C.
    pub mean_sensitivity: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci_half_width: f64,
    pub groups: Vec<WindowGroupSummary>,
    /// Present when at least two window lengths contribute.
    pub anova: Option<AnovaResult>,
    /// Relative sensitivity regressed on the before-change temperature.
    pub regression: Option<SensitivityRegression>,
    pub tally: DirectionTally,
}

fn window_key(hours: f64) -> i64 {
    (hours * 3600.0).round() as i64
}

pub fn summarize_batch(results: &[AnalysisResult], alpha: f64) -> Result<BatchSummary> {
    if results.is_empty() {
        return Err(Error::DegenerateGroups("no analysis results to summarize".into()));
    }
    let sens: Vec<f64> = results.iter().map(|r| r.sensitivity_rel).collect();
    let n = sens.len();
    let mean_sensitivity = mean(&sens);
    let ci_half_width = 1.96 * (sample_variance(&sens) / n as f64).sqrt();

    let mut by_window: BTreeMap<i64, Vec<&AnalysisResult>> = BTreeMap::new();
    for r in results {
        by_window.entry(window_key(r.window_hours)).or_default().push(r);
    }
    let mut tally = DirectionTally::default();
    let groups: Vec<WindowGroupSummary> = by_window
        .iter()
        .map(|(&key, members)| {
            let values: Vec<f64> = members.iter().map(|r| r.sensitivity_rel).collect();
            let mut group_tally = DirectionTally::default();
            for r in members {
                group_tally.add(r.pearson_r, r.pearson_p, alpha);
                tally.add(r.pearson_r, r.pearson_p, alpha);
            }
            WindowGroupSummary {
                window_hours: key as f64 / 3600.0,
                count: members.len(),
                mean_sensitivity: mean(&values),
                quartiles: QuartileBox::from_values(&values).expect("group non-empty"),
                tally: group_tally,
            }
        })
        .collect();

    let group_values: Vec<Vec<f64>> =
        by_window.values().map(|m| m.iter().map(|r| r.sensitivity_rel).collect()).collect();
    let anova = anova_oneway(&group_values).ok();

    let temps: Vec<f64> = results.iter().map(|r| r.temp_before).collect();
    let regression = if n >= 3 {
        ols(&temps, &sens)
            .ok()
            .map(|fit| SensitivityRegression { slope: fit.slope, intercept: fit.intercept, r_squared: fit.r_squared })
    } else {
        None
    };

    Ok(BatchSummary { count: n, alpha, mean_sensitivity, ci_half_width, groups, anova, regression, tally })
}

pub fn write_results_csv<W: Write>(results: &[AnalysisResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if results.is_empty() {
        w.write_record(RESULTS_HEADER)?;
    }
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<AnalysisResult>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use chrono::TimeZone;

    fn result(window: f64, sens: f64, temp_before: f64, r: f64, p: f64) -> AnalysisResult {
        AnalysisResult {
            room_id: "r".into(),
            event_time: Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            window_hours: window,
            guard_minutes: 0.0,
            temp_before,
            temp_after: temp_before + 2.0,
            n_before: 24,
            n_after: 24,
            mean_power_before: 100.0,
            mean_power_after: 101.0,
            pearson_r: r,
            pearson_p: p,
            spearman_rho: r,
            spearman_p: p,
            sensitivity_abs: sens,
            sensitivity_rel: sens,
            confounded: false,
        }
    }

    #[test]
    fn constant_sensitivities() {
        let results: Vec<_> = (0..6).map(|i| result(24.0 * (1 + i % 2) as f64, 0.4, 23.0 + i as f64, 0.5, 0.01)).collect();
        let s = summarize_batch(&results, 0.05).unwrap();
        assert_relative_eq!(s.mean_sensitivity, 0.4, epsilon = 1e-12);
        assert_eq!(s.ci_half_width, 0.0);
        assert_eq!(s.regression.unwrap().r_squared, 0.0);
        assert_eq!(s.groups.len(), 2);
    }

    #[test]
    fn identical_groups_give_zero_f() {
        let a = anova_oneway(&[vec![0.2, 0.4, 0.6], vec![0.2, 0.4, 0.6]]).unwrap();
        assert!(a.f.abs() < 1e-12);
        assert_relative_eq!(a.p_value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn anova_matches_reference() {
        // scipy.stats.f_oneway
        let a = anova_oneway(&[vec![0.2, 0.4, 0.6], vec![0.3, 0.5, 0.9], vec![0.1, 0.2, 0.25]]).unwrap();
        assert_relative_eq!(a.f, 2.389221556886227, epsilon = 1e-9);
        assert_relative_eq!(a.p_value, 0.17249862962962972, epsilon = 1e-9);
        assert_eq!((a.df_between, a.df_within), (2, 6));
    }

    #[test]
    fn anova_rejects_single_group() {
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn single_result_summary() {
        let s = summarize_batch(&[result(24.0, 0.4, 25.0, 0.3, 0.2)], 0.05).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.ci_half_width, 0.0);
        assert!(s.anova.is_none());
        assert!(s.regression.is_none());
        assert_eq!(s.tally.positive_not_significant, 1);
        assert!(summarize_batch(&[], 0.05).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let q = QuartileBox::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = QuartileBox::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn tally_by_direction_and_significance() {
        let results = vec![
            result(1.0, 0.5, 25.0, 0.8, 0.001),
            result(1.0, 0.5, 25.0, 0.1, 0.4),
            result(1.0, -0.5, 25.0, -0.7, 0.01),
            result(2.0, -0.1, 25.0, -0.1, 0.6),
        ];
        let s = summarize_batch(&results, 0.05).unwrap();
        let t = s.tally;
        assert_eq!(
            (t.positive_significant, t.positive_not_significant, t.negative_significant, t.negative_not_significant),
            (1, 1, 1, 1)
        );
        assert_eq!(s.groups[0].tally.positive(), 2);
        assert_eq!(s.groups[1].tally.negative(), 1);
    }

    #[test]
    fn results_csv_round_trip() {
        let results = vec![result(24.0, 0.41, 25.0, 0.3, 0.2), result(48.0, -0.2, 26.5, -0.1, 0.7)];
        let mut buf = Vec::new();
        write_results_csv(&results, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, RESULTS_HEADER.join(","));
        assert_eq!(read_results_csv(buf.as_slice()).unwrap(), results);

        let mut empty = Vec::new();
        write_results_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), header);
    }
}
