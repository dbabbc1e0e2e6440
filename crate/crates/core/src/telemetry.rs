//! Sensor ingestion: CSV parsing, glitch cleaning, grid resampling and
//! aggregation into room-level virtual sensors.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timefmt::{format_timestamp, parse_timestamp, truncate};

/// Cleaning bounds applied to temperature sensors when none are configured.
pub const DEFAULT_TEMPERATURE_BOUNDS: (f64, f64) = (0.0, 60.0);

/// Upper power bound, as a multiple of the sensor's median, used when no
/// explicit power bounds are configured.
pub const DEFAULT_POWER_MEDIAN_MULTIPLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    /// Inlet temperature in °C.
    Temperature,
    /// Electrical power in kW.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: DateTime<Utc>,
    pub value: f64,
}

impl Sample {
    pub fn new(timestamp: DateTime<Utc>, value: f64) -> Self {
        Self { timestamp, value }
    }
}

/// One sensor's measurements, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySeries {
    pub sensor_id: String,
    pub kind: SensorKind,
    samples: Vec<Sample>,
}

impl TelemetrySeries {
    /// Builds a series from unordered samples. Samples are sorted and
    /// duplicate timestamps collapse onto the last one supplied.
    pub fn new(sensor_id: impl Into<String>, kind: SensorKind, mut samples: Vec<Sample>) -> Self {
        // Stable sort keeps input order among equal timestamps, so the last
        // duplicate is the one that survives below.
        samples.sort_by_key(|s| s.timestamp);
        let mut deduped: Vec<Sample> = Vec::with_capacity(samples.len());
        for s in samples {
            match deduped.last_mut() {
                Some(prev) if prev.timestamp == s.timestamp => *prev = s,
                _ => deduped.push(s),
            }
        }
        Self { sensor_id: sensor_id.into(), kind, samples: deduped }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    pub fn first_timestamp(&self) -> Option<DateTime<Utc>> {
        self.samples.first().map(|s| s.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.samples.last().map(|s| s.timestamp)
    }

    /// Writes the series in the `timestamp,value` telemetry format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "value"])?;
        for s in &self.samples {
            w.write_record([format_timestamp(s.timestamp), s.value.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Result of parsing one telemetry file.
#[derive(Debug, Clone)]
pub struct ParsedSeries {
    pub series: TelemetrySeries,
    /// Data rows dropped because a field failed to parse.
    pub skipped_rows: usize,
}

/// Parses a `timestamp,value` CSV file. The sensor id is the file stem.
pub fn parse_telemetry_csv(path: &Path, kind: SensorKind) -> Result<ParsedSeries> {
    let mut raw = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    let sensor_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let parsed = parse_telemetry_str(&raw, sensor_id, kind);
    if parsed.series.is_empty() {
        return Err(Error::NoData { path: path.to_path_buf() });
    }
    Ok(parsed)
}

/// Parses telemetry CSV text. An initial `timestamp,...` header is optional.
pub fn parse_telemetry_str(raw: &str, sensor_id: impl Into<String>, kind: SensorKind) -> ParsedSeries {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());

    let mut samples = Vec::new();
    let mut skipped_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let Ok(record) = record else {
            skipped_rows += 1;
            continue;
        };
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("timestamp")) {
            continue;
        }
        let ts = record.get(0).and_then(parse_timestamp);
        let value = record
            .get(1)
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite());
        match (ts, value) {
            (Some(ts), Some(v)) if record.len() == 2 => samples.push(Sample::new(ts, v)),
            _ => skipped_rows += 1,
        }
    }
    ParsedSeries { series: TelemetrySeries::new(sensor_id, kind, samples), skipped_rows }
}

/// Replaces values outside `[lo, hi]` by linear interpolation in time between
/// the nearest in-range neighbours. Out-of-range values at either end take the
/// nearest in-range value. Returns the cleaned series and the replacement count.
pub fn clean_outliers(series: &TelemetrySeries, lo: f64, hi: f64) -> Result<(TelemetrySeries, usize)> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("cleaning bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let in_range = |v: f64| v >= lo && v <= hi;
    let samples = series.samples();
    let good: Vec<usize> = (0..samples.len()).filter(|&i| in_range(samples[i].value)).collect();
    if good.is_empty() {
        return Err(Error::AllOutOfRange { lo, hi });
    }

    let mut out = samples.to_vec();
    let mut replaced = 0;
    // Index into `good` of the first in-range sample at or after i.
    let mut next = 0;
    for i in 0..out.len() {
        while next < good.len() && good[next] < i {
            next += 1;
        }
        if in_range(out[i].value) {
            continue;
        }
        replaced += 1;
        let right = good.get(next).copied();
        let left = if next > 0 { Some(good[next - 1]) } else { None };
        out[i].value = match (left, right) {
            (Some(l), Some(r)) => {
                let (a, b) = (samples[l], samples[r]);
                let span = (b.timestamp - a.timestamp).num_milliseconds() as f64;
                let frac = (samples[i].timestamp - a.timestamp).num_milliseconds() as f64 / span;
                a.value + frac * (b.value - a.value)
            }
            (Some(l), None) => samples[l].value,
            (None, Some(r)) => samples[r].value,
            (None, None) => unreachable!("at least one in-range sample"),
        };
    }
    Ok((TelemetrySeries { samples: out, ..series.clone() }, replaced))
}

/// Grid origin used when none is given: the first raw timestamp truncated
/// down to a multiple of `interval` since the Unix epoch.
pub fn default_origin(series: &TelemetrySeries, interval: Duration) -> Option<DateTime<Utc>> {
    series.first_timestamp().map(|t| truncate(t, interval))
}

/// Forward-fill resampling onto the grid `origin + k * interval`.
///
/// The grid runs from the first grid time at or after the first raw sample up
/// to the first grid time at or after the last raw sample. Each grid value is
/// the latest raw value with timestamp `<=` the grid time.
pub fn resample(series: &TelemetrySeries, interval: Duration, origin: DateTime<Utc>) -> Result<TelemetrySeries> {
    if interval <= Duration::zero() {
        return Err(Error::invalid("resample interval must be positive"));
    }
    let (Some(first), Some(last)) = (series.first_timestamp(), series.last_timestamp()) else {
        return Err(Error::invalid("cannot resample an empty series"));
    };
    let step = interval.num_milliseconds();
    let offset_of = |t: DateTime<Utc>| (t - origin).num_milliseconds();
    // ceil division for the first and last grid index
    let k_start = offset_of(first).div_euclid(step) + i64::from(offset_of(first).rem_euclid(step) != 0);
    let k_end = offset_of(last).div_euclid(step) + i64::from(offset_of(last).rem_euclid(step) != 0);

    let raw = series.samples();
    let mut out = Vec::with_capacity((k_end - k_start + 1).max(0) as usize);
    let mut cursor = 0;
    for k in k_start..=k_end {
        let t = origin + Duration::milliseconds(k * step);
        while cursor + 1 < raw.len() && raw[cursor + 1].timestamp <= t {
            cursor += 1;
        }
        out.push(Sample::new(t, raw[cursor].value));
    }
    Ok(TelemetrySeries { sensor_id: series.sensor_id.clone(), kind: series.kind, samples: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomPoint {
    #[serde(with = "crate::timefmt::serde_ts")]
    pub timestamp: DateTime<Utc>,
    /// Mean inlet temperature over the room's sensors, °C.
    pub temperature: f64,
    /// Summed rack power, kW.
    pub power: f64,
}

/// Aligned room-mean temperature and room-total power on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomTelemetry {
    pub room_id: String,
    grid_interval: Duration,
    points: Vec<RoomPoint>,
}

impl RoomTelemetry {
    pub fn new(room_id: impl Into<String>, grid_interval: Duration, points: Vec<RoomPoint>) -> Result<Self> {
        if grid_interval <= Duration::zero() {
            return Err(Error::invalid("grid interval must be positive"));
        }
        if let Some(bad) = points.windows(2).find(|w| w[1].timestamp - w[0].timestamp != grid_interval) {
            return Err(Error::invalid(format!(
                "room points are not on a uniform grid near {}",
                format_timestamp(bad[0].timestamp)
            )));
        }
        if points.iter().any(|p| !p.temperature.is_finite() || !p.power.is_finite()) {
            return Err(Error::invalid("room points must have finite temperature and power"));
        }
        Ok(Self { room_id: room_id.into(), grid_interval, points })
    }

    pub fn grid_interval(&self) -> Duration {
        self.grid_interval
    }

    pub fn points(&self) -> &[RoomPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> Option<DateTime<Utc>> {
        self.points.first().map(|p| p.timestamp)
    }

    pub fn end(&self) -> Option<DateTime<Utc>> {
        self.points.last().map(|p| p.timestamp)
    }

    /// Time from the first to the last grid point.
    pub fn span(&self) -> Duration {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => b - a,
            _ => Duration::zero(),
        }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.temperature).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.power).collect()
    }

    /// Grid index of `ts`, or `None` when off-grid or outside the span.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let start = self.start()?;
        let offset = (ts - start).num_milliseconds();
        let step = self.grid_interval.num_milliseconds();
        if offset < 0 || offset % step != 0 {
            return None;
        }
        let idx = (offset / step) as usize;
        (idx < self.points.len()).then_some(idx)
    }

    /// Splits back into a temperature and a power series.
    pub fn to_series(&self) -> (TelemetrySeries, TelemetrySeries) {
        let temps = self.points.iter().map(|p| Sample::new(p.timestamp, p.temperature)).collect();
        let powers = self.points.iter().map(|p| Sample::new(p.timestamp, p.power)).collect();
        (
            TelemetrySeries::new(format!("{}_temperature", self.room_id), SensorKind::Temperature, temps),
            TelemetrySeries::new(format!("{}_power", self.room_id), SensorKind::Power, powers),
        )
    }
}

/// Explicit cleaning bounds; `power: None` means `[0, 10 * median]` per sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanBounds {
    #[serde(default = "default_temperature_bounds")]
    pub temperature: (f64, f64),
    #[serde(default)]
    pub power: Option<(f64, f64)>,
}

fn default_temperature_bounds() -> (f64, f64) {
    DEFAULT_TEMPERATURE_BOUNDS
}

impl Default for CleanBounds {
    fn default() -> Self {
        Self { temperature: DEFAULT_TEMPERATURE_BOUNDS, power: None }
    }
}

fn default_grid_seconds() -> i64 {
    3600
}

/// Per-room list of sensor files, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomManifest {
    pub room_id: String,
    pub temperature_files: Vec<PathBuf>,
    pub power_files: Vec<PathBuf>,
    #[serde(default = "default_grid_seconds")]
    pub grid_interval_seconds: i64,
    #[serde(default)]
    pub clean_bounds: CleanBounds,
}

impl RoomManifest {
    /// Reads a manifest; relative file paths are resolved against the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: RoomManifest = serde_json::from_str(&raw)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for f in manifest.temperature_files.iter_mut().chain(manifest.power_files.iter_mut()) {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature_files.is_empty() || self.power_files.is_empty() {
            return Err(Error::invalid(format!(
                "room {}: manifest needs at least one temperature and one power file",
                self.room_id
            )));
        }
        if self.grid_interval_seconds <= 0 {
            return Err(Error::invalid("grid_interval_seconds must be positive"));
        }
        Ok(())
    }

    pub fn grid_interval(&self) -> Duration {
        Duration::seconds(self.grid_interval_seconds)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cleans a sensor with the manifest's bounds for its kind.
pub fn clean_with_bounds(series: &TelemetrySeries, bounds: &CleanBounds) -> Result<(TelemetrySeries, usize)> {
    let (lo, hi) = match series.kind {
        SensorKind::Temperature => bounds.temperature,
        SensorKind::Power => match bounds.power {
            Some(b) => b,
            None => {
                let values: Vec<f64> = series.values().collect();
                let hi = DEFAULT_POWER_MEDIAN_MULTIPLE * median(&values);
                if hi <= 0.0 {
                    // all-zero rack: nothing sensible to clip against
                    return Ok((series.clone(), 0));
                }
                (0.0, hi)
            }
        },
    };
    clean_outliers(series, lo, hi)
}

/// Reads, cleans, resamples and aggregates every sensor listed in a manifest.
pub fn aggregate_room(manifest: &RoomManifest) -> Result<RoomTelemetry> {
    manifest.validate()?;
    let load = |paths: &[PathBuf], kind| -> Result<Vec<TelemetrySeries>> {
        paths
            .iter()
            .map(|p| {
                let parsed = parse_telemetry_csv(p, kind)?;
                Ok(clean_with_bounds(&parsed.series, &manifest.clean_bounds)?.0)
            })
            .collect()
    };
    let temps = load(&manifest.temperature_files, SensorKind::Temperature)?;
    let powers = load(&manifest.power_files, SensorKind::Power)?;
    aggregate_series(&manifest.room_id, &temps, &powers, manifest.grid_interval())
}

/// Aggregates already-cleaned sensors: per grid time, mean temperature and
/// summed power, restricted to the span where every sensor has a value.
pub fn aggregate_series(
    room_id: &str,
    temperatures: &[TelemetrySeries],
    powers: &[TelemetrySeries],
    interval: Duration,
) -> Result<RoomTelemetry> {
    if temperatures.is_empty() || powers.is_empty() {
        return Err(Error::invalid(format!("room {room_id}: need at least one sensor of each kind")));
    }
    let all = temperatures.iter().chain(powers);
    let origin = all
        .clone()
        .filter_map(|s| default_origin(s, interval))
        .min()
        .ok_or_else(|| Error::invalid(format!("room {room_id}: empty sensor series")))?;
    let resampled = |set: &[TelemetrySeries]| -> Result<Vec<TelemetrySeries>> {
        set.iter().map(|s| resample(s, interval, origin)).collect()
    };
    let temps = resampled(temperatures)?;
    let pows = resampled(powers)?;

    let start = temps.iter().chain(&pows).filter_map(|s| s.first_timestamp()).max();
    let end = temps.iter().chain(&pows).filter_map(|s| s.last_timestamp()).min();
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::EmptyOverlap { room_id: room_id.to_string() });
    };
    if start > end {
        return Err(Error::EmptyOverlap { room_id: room_id.to_string() });
    }

    let step = interval.num_milliseconds();
    let n = ((end - start).num_milliseconds() / step + 1) as usize;
    let offset = |s: &TelemetrySeries| -> usize {
        let first = s.first_timestamp().expect("resampled series non-empty");
        ((start - first).num_milliseconds() / step) as usize
    };
    let temp_offsets: Vec<usize> = temps.iter().map(offset).collect();
    let pow_offsets: Vec<usize> = pows.iter().map(offset).collect();

    let points = (0..n)
        .map(|i| {
            let t_sum: f64 = temps.iter().zip(&temp_offsets).map(|(s, o)| s.samples()[o + i].value).sum();
            let power: f64 = pows.iter().zip(&pow_offsets).map(|(s, o)| s.samples()[o + i].value).sum();
            RoomPoint {
                timestamp: start + Duration::milliseconds(i as i64 * step),
                temperature: t_sum / temps.len() as f64,
                power,
            }
        })
        .collect();
    RoomTelemetry::new(room_id, interval, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(min: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(min)
    }

    fn series(kind: SensorKind, pts: &[(i64, f64)]) -> TelemetrySeries {
        TelemetrySeries::new("s", kind, pts.iter().map(|&(m, v)| Sample::new(at(m), v)).collect())
    }

    fn vals(s: &TelemetrySeries) -> Vec<f64> {
        s.values().collect()
    }

    #[test]
    fn parses_two_rows_in_order() {
        let raw = "timestamp,value\n2023-01-01T00:00:00Z,24.0\n2023-01-01T00:05:00Z,24.1\n";
        let p = parse_telemetry_str(raw, "t1", SensorKind::Temperature);
        assert_eq!(p.skipped_rows, 0);
        assert_eq!(vals(&p.series), vec![24.0, 24.1]);
        assert_eq!(p.series.samples()[1].timestamp, at(5));
    }

    #[test]
    fn sorts_out_of_order_rows_and_keeps_last_duplicate() {
        let raw = "2023-01-01T00:10:00Z,3\n2023-01-01T00:00:00Z,1\n2023-01-01T00:10:00,4\n2023-01-01T00:05:00Z,2\n";
        let p = parse_telemetry_str(raw, "t1", SensorKind::Temperature);
        assert_eq!(vals(&p.series), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn counts_malformed_rows() {
        let mut raw = String::from("timestamp,value\n");
        for i in 0..100 {
            if i == 42 {
                raw.push_str("2023-01-01T03:30:00Z,not-a-number\n");
            } else {
                raw.push_str(&format!("{},{}\n", format_timestamp(at(i * 5)), 20.0 + i as f64 * 0.01));
            }
        }
        let p = parse_telemetry_str(&raw, "t1", SensorKind::Temperature);
        assert_eq!(p.series.len(), 99);
        assert_eq!(p.skipped_rows, 1);
    }

    #[test]
    fn parse_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.csv");
        assert!(matches!(parse_telemetry_csv(&missing, SensorKind::Power), Err(Error::Io { .. })));
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "timestamp,value\nbad,row\n").unwrap();
        assert!(matches!(parse_telemetry_csv(&empty, SensorKind::Power), Err(Error::NoData { .. })));
    }

    #[test]
    fn cleans_spike_between_equal_neighbours() {
        let s = series(SensorKind::Temperature, &[(0, 24.0), (1, 24.0), (2, 900.0), (3, 24.0)]);
        let (c, n) = clean_outliers(&s, 0.0, 60.0).unwrap();
        assert_eq!(vals(&c), vec![24.0; 4]);
        assert_eq!(n, 1);
    }

    #[test]
    fn clean_leaves_in_range_series_alone() {
        let s = series(SensorKind::Temperature, &[(0, 20.0), (1, 30.0)]);
        let (c, n) = clean_outliers(&s, 0.0, 60.0).unwrap();
        assert_eq!(c, s);
        assert_eq!(n, 0);
    }

    #[test]
    fn clean_interpolates_linearly_in_time() {
        let s = series(SensorKind::Temperature, &[(0, 24.0), (1, -5.0), (2, 26.0)]);
        let (c, _) = clean_outliers(&s, 0.0, 60.0).unwrap();
        assert_eq!(vals(&c), vec![24.0, 25.0, 26.0]);

        // uneven spacing: 1 min then 3 min
        let s = series(SensorKind::Temperature, &[(0, 20.0), (1, 99.0), (4, 28.0)]);
        let (c, _) = clean_outliers(&s, 0.0, 60.0).unwrap();
        assert!((c.samples()[1].value - 22.0).abs() < 1e-12);
    }

    #[test]
    fn clean_fills_edges_with_nearest() {
        let s = series(SensorKind::Temperature, &[(0, -1.0), (1, -2.0), (2, 22.0), (3, 23.0), (4, 70.0)]);
        let (c, n) = clean_outliers(&s, 0.0, 60.0).unwrap();
        assert_eq!(vals(&c), vec![22.0, 22.0, 22.0, 23.0, 23.0]);
        assert_eq!(n, 3);
    }

    #[test]
    fn clean_errors() {
        let s = series(SensorKind::Temperature, &[(0, 90.0), (1, 99.0)]);
        assert!(matches!(clean_outliers(&s, 0.0, 60.0), Err(Error::AllOutOfRange { .. })));
        assert!(matches!(clean_outliers(&s, 5.0, 5.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn resample_forward_fills() {
        let s = series(SensorKind::Power, &[(3, 1.0), (17, 2.0)]);
        let r = resample(&s, Duration::hours(1), at(0)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.samples()[0].timestamp, at(60));
        assert_eq!(r.samples()[0].value, 2.0);
    }

    #[test]
    fn resample_on_grid_is_identity() {
        let s = series(SensorKind::Power, &[(0, 1.0), (60, 2.0), (120, 5.0)]);
        let r = resample(&s, Duration::hours(1), at(0)).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn resample_irregular_two_hours() {
        // 4-6 minute sampling from 00:02 to 01:58
        let mut pts = Vec::new();
        let gaps = [4, 5, 6];
        let mut m = 2;
        let mut i = 0;
        while m <= 118 {
            pts.push((m, m as f64));
            m += gaps[i % 3];
            i += 1;
        }
        let s = series(SensorKind::Temperature, &pts);
        let r = resample(&s, Duration::hours(1), at(0)).unwrap();
        // grid points 01:00 and 02:00
        assert_eq!(r.len(), 2);
        let latest = |t: i64| pts.iter().filter(|p| p.0 <= t).last().unwrap().1;
        assert_eq!(r.samples()[0].value, latest(60));
        assert_eq!(r.samples()[1].value, latest(120));

        // starting exactly on the hour yields three points
        let mut pts0 = pts.clone();
        pts0.insert(0, (0, -1.0));
        pts0.push((120, 120.0));
        let r = resample(&series(SensorKind::Temperature, &pts0), Duration::hours(1), at(0)).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(vals(&r), vec![-1.0, latest(60), 120.0]);
    }

    #[test]
    fn resample_rejects_bad_input() {
        let s = series(SensorKind::Power, &[(0, 1.0)]);
        assert!(resample(&s, Duration::zero(), at(0)).is_err());
        let empty = TelemetrySeries::new("e", SensorKind::Power, vec![]);
        assert!(resample(&empty, Duration::hours(1), at(0)).is_err());
    }

    fn constant(kind: SensorKind, v: f64, hours: i64, step_min: i64, shift: i64) -> TelemetrySeries {
        let pts: Vec<(i64, f64)> = (0..=hours * 60 / step_min).map(|k| (shift + k * step_min, v)).collect();
        series(kind, &pts)
    }

    #[test]
    fn aggregate_mean_and_sum() {
        let t = [constant(SensorKind::Temperature, 24.0, 3, 5, 0), constant(SensorKind::Temperature, 25.0, 3, 5, 1)];
        let p = [constant(SensorKind::Power, 100.0, 3, 10, 2)];
        let room = aggregate_series("r", &t, &p, Duration::hours(1)).unwrap();
        assert!(!room.is_empty());
        for pt in room.points() {
            assert_eq!((pt.temperature, pt.power), (24.5, 100.0));
        }
    }

    #[test]
    fn aggregate_single_sensor_matches_resampled_inputs() {
        let t = series(SensorKind::Temperature, &[(0, 20.0), (30, 21.0), (65, 22.0), (130, 23.0)]);
        let p = series(SensorKind::Power, &[(0, 5.0), (50, 6.0), (70, 7.0), (120, 8.0)]);
        let room = aggregate_series("r", &[t.clone()], &[p.clone()], Duration::hours(1)).unwrap();
        let rt = resample(&t, Duration::hours(1), at(0)).unwrap();
        let rp = resample(&p, Duration::hours(1), at(0)).unwrap();
        // overlap: power ends at 02:00, temperature at 03:00
        assert_eq!(room.len(), 3);
        for (i, pt) in room.points().iter().enumerate() {
            assert_eq!(pt.temperature, rt.samples()[i].value);
            assert_eq!(pt.power, rp.samples()[i].value);
        }
    }

    #[test]
    fn aggregate_constant_48h_fixture() {
        let t = [constant(SensorKind::Temperature, 24.0, 48, 5, 0), constant(SensorKind::Temperature, 26.0, 48, 4, 0)];
        let p = [10.0, 20.0, 30.0].map(|v| constant(SensorKind::Power, v, 48, 15, 0));
        let room = aggregate_series("r", &t, &p, Duration::hours(1)).unwrap();
        assert_eq!(room.len(), 49);
        assert!(room.points().iter().all(|pt| pt.temperature == 25.0 && pt.power == 60.0));
    }

    #[test]
    fn aggregate_requires_overlap() {
        let t = [constant(SensorKind::Temperature, 24.0, 2, 5, 0)];
        let p = [constant(SensorKind::Power, 10.0, 2, 5, 600)];
        assert!(matches!(
            aggregate_series("r", &t, &p, Duration::hours(1)),
            Err(Error::EmptyOverlap { .. })
        ));
    }

    #[test]
    fn manifest_round_trip_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, s: &TelemetrySeries| {
            let f = File::create(dir.path().join(name)).unwrap();
            s.write_csv(f).unwrap();
        };
        let mut t = constant(SensorKind::Temperature, 24.0, 4, 5, 0);
        t.samples[3].value = 400.0;
        write("t1.csv", &t);
        write("p1.csv", &constant(SensorKind::Power, 50.0, 4, 5, 0));
        std::fs::write(
            dir.path().join("room.json"),
            r#"{"room_id":"A","temperature_files":["t1.csv"],"power_files":["p1.csv"],"grid_interval_seconds":3600,"clean_bounds":{"temperature":[0,60]}}"#,
        )
        .unwrap();
        let manifest = RoomManifest::load(&dir.path().join("room.json")).unwrap();
        let room = aggregate_room(&manifest).unwrap();
        assert_eq!(room.len(), 5);
        assert!(room.points().iter().all(|p| p.temperature == 24.0 && p.power == 50.0));
    }

    #[test]
    fn manifest_needs_both_kinds() {
        let m = RoomManifest {
            room_id: "x".into(),
            temperature_files: vec!["a.csv".into()],
            power_files: vec![],
            grid_interval_seconds: 3600,
            clean_bounds: CleanBounds::default(),
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn default_power_bounds_clip_glitches() {
        let mut pts: Vec<(i64, f64)> = (0..20).map(|m| (m, 10.0)).collect();
        pts[7].1 = 5000.0;
        let s = series(SensorKind::Power, &pts);
        let (c, n) = clean_with_bounds(&s, &CleanBounds::default()).unwrap();
        assert_eq!(n, 1);
        assert_eq!(c.samples()[7].value, 10.0);
    }
}
