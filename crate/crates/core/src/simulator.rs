//! Synthetic server-room telemetry driven by the physics model.
//!
//! Loads follow a business-hours daily cycle, a weekend dip, a slow capacity
//! drift and multiplicative noise. Inlet temperatures follow a setpoint
//! schedule through a first-order lag. Room meters report compute plus fans;
//! the building meter adds cooling and fixed overhead.

use std::f64::consts::{PI, TAU};

use chrono::{DateTime, Datelike, Duration, Timelike, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{building_power, server_room_power, CoolingMode, PlantConfig, PowerBreakdown};
use crate::telemetry::{CleanBounds, RoomManifest, RoomPoint, RoomTelemetry, Sample, SensorKind, TelemetrySeries};
use crate::timefmt::format_timestamp;

/// Average month length used for capacity drift.
const MONTH_SECS: f64 = 30.4375 * 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetpointChange {
    #[serde(with = "crate::timefmt::serde_ts")]
    pub time: DateTime<Utc>,
    pub setpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub room_id: String,
    pub base_compute_kw: f64,
    /// Step schedule; the first entry also sets the level before it.
    pub schedule: Vec<SetpointChange>,
}

impl RoomSpec {
    pub fn setpoint_at(&self, t: DateTime<Utc>) -> f64 {
        let idx = self.schedule.partition_point(|c| c.time <= t);
        self.schedule[idx.saturating_sub(1)].setpoint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadShape {
    /// Half peak-to-trough swing of the daily cycle, % of base.
    pub daily_amplitude_pct: f64,
    /// Saturday and Sunday load relative to weekdays.
    pub weekend_ratio: f64,
    /// Standard deviation of multiplicative noise, %.
    pub noise_pct: f64,
    pub drift_pct_per_month: f64,
}

impl Default for LoadShape {
    fn default() -> Self {
        Self { daily_amplitude_pct: 10.0, weekend_ratio: 0.8, noise_pct: 0.5, drift_pct_per_month: 0.0 }
    }
}

impl LoadShape {
    pub fn flat(noise_pct: f64) -> Self {
        Self { daily_amplitude_pct: 0.0, weekend_ratio: 1.0, noise_pct, drift_pct_per_month: 0.0 }
    }
}

/// Sinusoidal outdoor climate: a yearly cycle peaking late July and a daily
/// cycle peaking at 15:00 UTC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutdoorClimate {
    pub mean_c: f64,
    pub seasonal_amplitude_c: f64,
    pub diurnal_amplitude_c: f64,
}

impl Default for OutdoorClimate {
    fn default() -> Self {
        Self { mean_c: 10.0, seasonal_amplitude_c: 8.0, diurnal_amplitude_c: 4.0 }
    }
}

impl OutdoorClimate {
    pub fn constant(temp_c: f64) -> Self {
        Self { mean_c: temp_c, seasonal_amplitude_c: 0.0, diurnal_amplitude_c: 0.0 }
    }

    pub fn temperature_at(&self, t: DateTime<Utc>) -> f64 {
        let day = f64::from(t.ordinal0()) + f64::from(t.num_seconds_from_midnight()) / 86_400.0;
        let hour = f64::from(t.num_seconds_from_midnight()) / 3600.0;
        self.mean_c
            + self.seasonal_amplitude_c * (TAU * (day - 200.0) / 365.25).cos()
            + self.diurnal_amplitude_c * (TAU * (hour - 15.0) / 24.0).cos()
    }

    /// Hourly outdoor temperatures over one calendar year starting `start`.
    pub fn hourly_year(&self, start: DateTime<Utc>) -> Vec<f64> {
        (0..8760).map(|h| self.temperature_at(start + Duration::hours(h))).collect()
    }
}

/// Random chiller on/off cycling added to the building meter. Each block of
/// `block_minutes` is independently on or off with equal probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChillerCycling {
    /// Extra building power while on, % of the instantaneous building total.
    pub magnitude_pct: f64,
    pub block_minutes: i64,
}

impl Default for ChillerCycling {
    fn default() -> Self {
        Self { magnitude_pct: 0.0, block_minutes: 60 }
    }
}

fn default_grid() -> i64 {
    60
}
fn default_sensor_noise() -> f64 {
    0.05
}
fn default_tau() -> f64 {
    15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub load: LoadShape,
    #[serde(default)]
    pub outdoor: OutdoorClimate,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default = "default_grid")]
    pub grid_interval_seconds: i64,
    #[serde(with = "crate::timefmt::serde_ts")]
    pub start: DateTime<Utc>,
    pub span_hours: i64,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of temperature sensor noise, °C.
    #[serde(default = "default_sensor_noise")]
    pub sensor_noise_c: f64,
    /// Time constant of the inlet temperature's response to a setpoint step.
    #[serde(default = "default_tau")]
    pub transition_tau_minutes: f64,
    #[serde(default)]
    pub chiller_cycling: ChillerCycling,
}

impl Scenario {
    pub fn from_json(raw: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(raw)?;
        s.validate()?;
        Ok(s)
    }

    pub fn grid_interval(&self) -> Duration {
        Duration::seconds(self.grid_interval_seconds)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::hours(self.span_hours)
    }

    /// Grid timestamps `start + k * interval` strictly before `end`.
    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        let step = self.grid_interval();
        let n = (Duration::hours(self.span_hours).num_seconds() / self.grid_interval_seconds).max(0);
        (0..n).map(|k| self.start + step * k as i32).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        if self.rooms.is_empty() {
            return Err(Error::invalid("scenario needs at least one room"));
        }
        if self.grid_interval_seconds <= 0 || self.span_hours <= 0 {
            return Err(Error::invalid("grid interval and span must be positive"));
        }
        let l = &self.load;
        if l.daily_amplitude_pct < 0.0 || l.noise_pct < 0.0 || l.weekend_ratio < 0.0 {
            return Err(Error::invalid("load amplitudes, noise and weekend ratio must not be negative"));
        }
        if self.outdoor.seasonal_amplitude_c < 0.0 || self.outdoor.diurnal_amplitude_c < 0.0 {
            return Err(Error::invalid("outdoor amplitudes must not be negative"));
        }
        if self.sensor_noise_c < 0.0 || self.transition_tau_minutes < 0.0 {
            return Err(Error::invalid("sensor noise and transition time constant must not be negative"));
        }
        if self.chiller_cycling.magnitude_pct < 0.0 || self.chiller_cycling.block_minutes <= 0 {
            return Err(Error::invalid("chiller cycling needs magnitude >= 0 and a positive block length"));
        }
        let mut ids: Vec<&str> = self.rooms.iter().map(|r| r.room_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("room ids must be unique"));
        }
        for room in &self.rooms {
            if room.schedule.is_empty() {
                return Err(Error::invalid(format!("room {}: empty setpoint schedule", room.room_id)));
            }
            if room.base_compute_kw < 0.0 {
                return Err(Error::invalid(format!("room {}: negative base load", room.room_id)));
            }
            if room.schedule.windows(2).any(|w| w[1].time <= w[0].time) {
                return Err(Error::invalid(format!("room {}: schedule times must increase", room.room_id)));
            }
            if room.schedule.iter().any(|c| c.time < self.start || c.time > self.end()) {
                return Err(Error::invalid(format!("room {}: schedule time outside the span", room.room_id)));
            }
        }
        Ok(())
    }

    fn room_index(&self, room_id: &str) -> Result<usize> {
        self.rooms
            .iter()
            .position(|r| r.room_id == room_id)
            .ok_or_else(|| Error::invalid(format!("room {room_id} not in scenario")))
    }

    /// Independent random stream per room and purpose, fixed by the seed.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Daily cycle in `[-1, 1]`: a half sine over 08:00-18:00 UTC peaking at
/// 13:00, flat at its minimum outside business hours.
pub fn daily_shape(t: DateTime<Utc>) -> f64 {
    let hour = f64::from(t.num_seconds_from_midnight()) / 3600.0;
    if (8.0..=18.0).contains(&hour) {
        -1.0 + 2.0 * (PI * (hour - 8.0) / 10.0).sin()
    } else {
        -1.0
    }
}

fn is_weekend(t: DateTime<Utc>) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Compute power (kW) of one room on the scenario grid.
pub fn generate_load_profile(scenario: &Scenario, room_id: &str) -> Result<Vec<f64>> {
    let idx = scenario.room_index(room_id)?;
    let room = &scenario.rooms[idx];
    let shape = &scenario.load;
    let mut rng = scenario.rng(2 * idx as u64);
    Ok(scenario
        .timestamps()
        .into_iter()
        .map(|t| {
            let daily = 1.0 + shape.daily_amplitude_pct / 100.0 * daily_shape(t);
            let weekly = if is_weekend(t) { shape.weekend_ratio } else { 1.0 };
            let months = (t - scenario.start).num_seconds() as f64 / MONTH_SECS;
            let drift = 1.0 + shape.drift_pct_per_month / 100.0 * months;
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = 1.0 + shape.noise_pct / 100.0 * z;
            (room.base_compute_kw * daily * weekly * drift * noise).max(0.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRoom {
    /// Measured temperature and metered room power (compute + fans).
    pub telemetry: RoomTelemetry,
    pub setpoints: Vec<f64>,
    /// Inlet temperature the servers actually see.
    pub inlet: Vec<f64>,
    pub breakdowns: Vec<PowerBreakdown>,
}

impl SimRoom {
    pub fn modes(&self) -> impl Iterator<Item = CoolingMode> + '_ {
        self.breakdowns.iter().map(|b| b.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub timestamps: Vec<DateTime<Utc>>,
    pub rooms: Vec<SimRoom>,
    /// Sum of room breakdown totals plus chiller cycling, kW.
    pub building_power: Vec<f64>,
    pub cycling_kw: Vec<f64>,
    pub outdoor: Vec<f64>,
}

pub fn simulate(scenario: &Scenario) -> Result<SimOutput> {
    scenario.validate()?;
    let timestamps = scenario.timestamps();
    if timestamps.len() < 2 {
        return Err(Error::invalid("scenario span holds fewer than two grid points"));
    }
    let outdoor: Vec<f64> = timestamps.iter().map(|&t| scenario.outdoor.temperature_at(t)).collect();
    let dt_min = scenario.grid_interval_seconds as f64 / 60.0;
    let lag = if scenario.transition_tau_minutes > 0.0 {
        1.0 - (-dt_min / scenario.transition_tau_minutes).exp()
    } else {
        1.0
    };

    let mut rooms = Vec::with_capacity(scenario.rooms.len());
    for (idx, spec) in scenario.rooms.iter().enumerate() {
        let load = generate_load_profile(scenario, &spec.room_id)?;
        let mut sensor_rng = scenario.rng(2 * idx as u64 + 1);
        let mut inlet_now = spec.setpoint_at(timestamps[0]);
        let mut setpoints = Vec::with_capacity(timestamps.len());
        let mut inlet = Vec::with_capacity(timestamps.len());
        let mut breakdowns = Vec::with_capacity(timestamps.len());
        let mut points = Vec::with_capacity(timestamps.len());
        for (k, &t) in timestamps.iter().enumerate() {
            let sp = spec.setpoint_at(t);
            if k > 0 {
                inlet_now += (sp - inlet_now) * lag;
            }
            let b = building_power(inlet_now, load[k], outdoor[k], &scenario.plant)?;
            let z: f64 = StandardNormal.sample(&mut sensor_rng);
            points.push(RoomPoint {
                timestamp: t,
                temperature: inlet_now + scenario.sensor_noise_c * z,
                power: b.it_power(),
            });
            setpoints.push(sp);
            inlet.push(inlet_now);
            breakdowns.push(b);
        }
        let telemetry = RoomTelemetry::new(spec.room_id.clone(), scenario.grid_interval(), points)?;
        rooms.push(SimRoom { telemetry, setpoints, inlet, breakdowns });
    }

    let mut cycling_rng = scenario.rng(u64::MAX);
    let block = Duration::minutes(scenario.chiller_cycling.block_minutes);
    let mut block_state: Option<(i64, bool)> = None;
    let mut building = Vec::with_capacity(timestamps.len());
    let mut cycling = Vec::with_capacity(timestamps.len());
    for (k, &t) in timestamps.iter().enumerate() {
        // rooms summed in scenario order
        let base: f64 = rooms.iter().map(|r| r.breakdowns[k].total).sum();
        let extra = if scenario.chiller_cycling.magnitude_pct > 0.0 {
            let block_id = (t - scenario.start).num_seconds().div_euclid(block.num_seconds());
            let on = match block_state {
                Some((id, on)) if id == block_id => on,
                _ => {
                    let on = cycling_rng.random_bool(0.5);
                    block_state = Some((block_id, on));
                    on
                }
            };
            if on {
                scenario.chiller_cycling.magnitude_pct / 100.0 * base
            } else {
                0.0
            }
        } else {
            0.0
        };
        cycling.push(extra);
        building.push(base + extra);
    }

    Ok(SimOutput { timestamps, rooms, building_power: building, cycling_kw: cycling, outdoor })
}

impl SimOutput {
    pub fn building_series(&self) -> TelemetrySeries {
        let samples = self.timestamps.iter().zip(&self.building_power).map(|(&t, &v)| Sample::new(t, v)).collect();
        TelemetrySeries::new("building_power", SensorKind::Power, samples)
    }

    pub fn room(&self, room_id: &str) -> Option<&SimRoom> {
        self.rooms.iter().find(|r| r.telemetry.room_id == room_id)
    }

    /// Every output file as `(relative name, bytes)`, in a fixed order:
    /// per room `<id>_temperature.csv`, `<id>_power.csv` and `<id>.json`
    /// (a room manifest), then `building_power.csv` and `modes.csv`.
    pub fn output_files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = Vec::new();
        for room in &self.rooms {
            let id = &room.telemetry.room_id;
            let (temps, powers) = room.telemetry.to_series();
            let (t_name, p_name) = (format!("{id}_temperature.csv"), format!("{id}_power.csv"));
            let mut buf = Vec::new();
            temps.write_csv(&mut buf)?;
            files.push((t_name.clone(), buf));
            let mut buf = Vec::new();
            powers.write_csv(&mut buf)?;
            files.push((p_name.clone(), buf));
            let manifest = RoomManifest {
                room_id: id.clone(),
                temperature_files: vec![t_name.into()],
                power_files: vec![p_name.into()],
                grid_interval_seconds: room.telemetry.grid_interval().num_seconds(),
                clean_bounds: CleanBounds::default(),
            };
            let mut json = serde_json::to_vec_pretty(&manifest)?;
            json.push(b'\n');
            files.push((format!("{id}.json"), json));
        }
        let mut buf = Vec::new();
        self.building_series().write_csv(&mut buf)?;
        files.push(("building_power.csv".into(), buf));

        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string(), "outdoor".to_string()];
        header.extend(self.rooms.iter().map(|r| r.telemetry.room_id.clone()));
        w.write_record(&header)?;
        for (k, t) in self.timestamps.iter().enumerate() {
            let mut row = vec![format_timestamp(*t), self.outdoor[k].to_string()];
            row.extend(self.rooms.iter().map(|r| r.breakdowns[k].mode.as_str().to_string()));
            w.write_record(&row)?;
        }
        files.push(("modes.csv".into(), w.into_inner().map_err(|e| Error::invalid(e.to_string()))?));
        Ok(files)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityLevel {
    /// Servers including fans, as a room meter sees them.
    Room,
    /// Whole building including cooling and overhead.
    Building,
}

/// Central-difference step for [`analytic_sensitivity`], °C.
pub const SENSITIVITY_STEP_C: f64 = 0.01;

/// Relative change of power per °C of inlet temperature, in %/°C.
pub fn analytic_sensitivity(plant: &PlantConfig, t_inlet: f64, level: SensitivityLevel, outdoor_temp: f64) -> Result<f64> {
    let h = SENSITIVITY_STEP_C;
    // Every term is proportional to compute power, so any positive load works.
    let load = 100.0;
    let total = |t: f64| -> Result<(f64, CoolingMode)> {
        match level {
            SensitivityLevel::Room => {
                let (c, f) = server_room_power(t, load, &plant.fan)?;
                Ok((c + f, CoolingMode::Chiller))
            }
            SensitivityLevel::Building => {
                let b = building_power(t, load, outdoor_temp, plant)?;
                Ok((b.total, b.mode))
            }
        }
    };
    let (lo, mode_lo) = total(t_inlet - h)?;
    let (hi, mode_hi) = total(t_inlet + h)?;
    if mode_lo != mode_hi {
        return Err(Error::ModeBoundary { t_inlet });
    }
    let (mid, _) = total(t_inlet)?;
    Ok(100.0 * (hi - lo) / (2.0 * h) / mid)
}

/// Returns `plant` with the reference fan fraction chosen so that the
/// analytic sensitivity at `t_inlet` equals `target` %/°C.
pub fn calibrate_fan_fraction(
    plant: &PlantConfig,
    target: f64,
    t_inlet: f64,
    level: SensitivityLevel,
    outdoor_temp: f64,
) -> Result<PlantConfig> {
    let at = |fraction: f64| {
        let mut p = *plant;
        p.fan.reference_fan_fraction = fraction;
        analytic_sensitivity(&p, t_inlet, level, outdoor_temp).map(|s| (s, p))
    };
    let (mut lo, mut hi) = (0.0, 0.9);
    let (s_lo, _) = at(lo)?;
    let (s_hi, _) = at(hi)?;
    if target < s_lo || target > s_hi {
        return Err(Error::invalid(format!(
            "sensitivity {target} %/°C is outside the reachable range [{s_lo:.4}, {s_hi:.4}]"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi))?.1)
}

pub mod presets {
    //! Ready-made scenarios.

    use super::*;
    use chrono::TimeZone;
    use rand::seq::SliceRandom;

    /// One injected setpoint change.
    #[derive(Debug, Clone, PartialEq)]
    pub struct InjectedChange {
        pub room_id: String,
        pub time: DateTime<Utc>,
        pub magnitude: f64,
    }

    /// Schedule changes after each room's initial setpoint.
    pub fn injected_changes(scenario: &Scenario) -> Vec<InjectedChange> {
        scenario
            .rooms
            .iter()
            .flat_map(|room| {
                room.schedule.windows(2).map(move |w| InjectedChange {
                    room_id: room.room_id.clone(),
                    time: w[1].time,
                    magnitude: w[1].setpoint - w[0].setpoint,
                })
            })
            .collect()
    }

    /// Two years of hourly data for 11 rooms with 65 setpoint changes of
    /// 1-4 °C, plus two 0.5 °C changes in the last room. Changes stay at
    /// least 45 days from the span edges and 60 days from each other.
    pub fn campaign_two_years(seed: u64) -> Scenario {
        let start = Utc.with_ymd_and_hms(2022, 1, 3, 0, 0, 0).unwrap();
        let span_hours = 2 * 365 * 24;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca11);
        let mut rooms = Vec::new();
        for r in 0..11 {
            let big = if r == 10 { 5 } else { 6 };
            let mut kinds: Vec<Option<f64>> = vec![None; big];
            if r == 10 {
                kinds.extend([Some(0.5), Some(-0.5)]);
                kinds.shuffle(&mut rng);
            }
            let slots = kinds.len();
            let usable = 730 - 2 * 45;
            let spacing = usable / slots;
            let mut setpoint = 24.0 + f64::from(rng.random_range(0..3u8));
            let mut schedule = vec![SetpointChange { time: start, setpoint }];
            for (j, kind) in kinds.into_iter().enumerate() {
                let day = 45 + j * spacing + rng.random_range(0..(spacing - 60).max(1));
                let hour = rng.random_range(0..24);
                let time = start + Duration::days(day as i64) + Duration::hours(hour);
                let delta = kind.unwrap_or_else(|| {
                    let size = f64::from(rng.random_range(1..=4u8));
                    let up = if setpoint + size > 29.0 {
                        false
                    } else if setpoint - size < 22.0 {
                        true
                    } else {
                        rng.random_bool(0.5)
                    };
                    if up {
                        size
                    } else {
                        -size
                    }
                });
                setpoint += delta;
                schedule.push(SetpointChange { time, setpoint });
            }
            rooms.push(RoomSpec {
                room_id: format!("room{:02}", r + 1),
                base_compute_kw: 80.0 + 20.0 * r as f64,
                schedule,
            });
        }
        Scenario {
            rooms,
            load: LoadShape { daily_amplitude_pct: 8.0, weekend_ratio: 0.85, noise_pct: 0.5, drift_pct_per_month: 0.2 },
            outdoor: OutdoorClimate::default(),
            plant: PlantConfig::default(),
            grid_interval_seconds: 3600,
            start,
            span_hours,
            seed,
            sensor_noise_c: 0.1,
            transition_tau_minutes: 15.0,
            chiller_cycling: ChillerCycling::default(),
        }
    }

    /// One room on a one-minute grid with seven alternating 2 °C setpoint
    /// changes eight days apart, each with a full week of data on both sides.
    pub fn minute_steps(seed: u64) -> Scenario {
        let start = Utc.with_ymd_and_hms(2023, 3, 6, 0, 0, 0).unwrap();
        let mut schedule = vec![SetpointChange { time: start, setpoint: 24.0 }];
        for k in 0..7 {
            let time = start + Duration::days(8 + 8 * k) + Duration::hours(10);
            let setpoint = if k % 2 == 0 { 26.0 } else { 24.0 };
            schedule.push(SetpointChange { time, setpoint });
        }
        Scenario {
            rooms: vec![RoomSpec { room_id: "hall1".into(), base_compute_kw: 250.0, schedule }],
            load: LoadShape::flat(0.2),
            outdoor: OutdoorClimate::constant(30.0),
            plant: PlantConfig::default(),
            grid_interval_seconds: 60,
            start,
            span_hours: 24 * 64,
            seed,
            sensor_noise_c: 0.05,
            transition_tau_minutes: 15.0,
            chiller_cycling: ChillerCycling::default(),
        }
    }
}
