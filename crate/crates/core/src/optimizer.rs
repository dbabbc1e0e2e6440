//! Inlet temperature that minimizes profile-averaged building power.

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{building_power, economizer_switch_temp, CoolingMode, PlantConfig};
use crate::simulator::{daily_shape, LoadShape, OutdoorClimate};

/// Highest usable inlet sits this far below the hot-surface temperature;
/// closer than that the fans would need unbounded speed.
pub const FEASIBILITY_MARGIN_C: f64 = 1.0;

/// Sweep spacing for reported curves and before local refinement, °C.
pub const COARSE_STEP_C: f64 = 0.1;

/// Minima whose mean power differs by less than this relative amount are
/// treated as a tie.
pub const PLATEAU_RELATIVE: f64 = 1e-9;

/// Hourly pairs of IT compute load (kW) and outdoor temperature (°C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingProfile {
    pub loads: Vec<f64>,
    pub outdoor: Vec<f64>,
}

impl OperatingProfile {
    pub fn new(loads: Vec<f64>, outdoor: Vec<f64>) -> Result<Self> {
        if loads.is_empty() || loads.len() != outdoor.len() {
            return Err(Error::invalid("profile needs equal, non-zero numbers of loads and outdoor temperatures"));
        }
        if loads.iter().any(|&l| !(l >= 0.0 && l.is_finite())) || outdoor.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("profile values must be finite and loads non-negative"));
        }
        if loads.iter().all(|&l| l == 0.0) {
            return Err(Error::invalid("profile carries no load"));
        }
        Ok(Self { loads, outdoor })
    }

    pub fn constant(load_kw: f64, outdoor_c: f64) -> Result<Self> {
        Self::new(vec![load_kw], vec![outdoor_c])
    }

    /// One synthetic year at hourly resolution, noise free.
    pub fn synthetic_year(base_load_kw: f64, shape: &LoadShape, climate: &OutdoorClimate, start: DateTime<Utc>) -> Result<Self> {
        let hours: Vec<DateTime<Utc>> = (0..8760).map(|h| start + Duration::hours(h)).collect();
        let loads = hours
            .iter()
            .map(|&t| {
                let weekly = if matches!(t.weekday(), Weekday::Sat | Weekday::Sun) { shape.weekend_ratio } else { 1.0 };
                base_load_kw * (1.0 + shape.daily_amplitude_pct / 100.0 * daily_shape(t)) * weekly
            })
            .collect();
        let outdoor = hours.iter().map(|&t| climate.temperature_at(t)).collect();
        Self::new(loads, outdoor)
    }

    /// The default temperate year: 1 MW base load, the default load shape
    /// and climate, calendar 2023.
    pub fn temperate_year() -> Self {
        let start = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        Self::synthetic_year(1000.0, &LoadShape::default(), &OutdoorClimate::default(), start)
            .expect("built-in profile is valid")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.loads.iter().map(|l| l * factor).collect(), self.outdoor.clone())
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t_inlet: f64,
    pub mean_total_kw: f64,
    pub mean_pue: f64,
    /// Fraction of profile hours on free cooling.
    pub economizer_share: f64,
}

pub const CURVE_HEADER: [&str; 4] = ["t_inlet", "mean_total_kw", "mean_pue", "economizer_share"];

/// Averages building power over the profile at one inlet temperature.
pub fn evaluate(plant: &PlantConfig, profile: &OperatingProfile, t_inlet: f64) -> Result<CurvePoint> {
    let (mut total, mut pue, mut econ, mut pue_hours) = (0.0, 0.0, 0usize, 0usize);
    for (&load, &outdoor) in profile.loads.iter().zip(&profile.outdoor) {
        let b = building_power(t_inlet, load, outdoor, plant)?;
        total += b.total;
        if load > 0.0 {
            pue += b.pue;
            pue_hours += 1;
        }
        if b.mode == CoolingMode::Economizer {
            econ += 1;
        }
    }
    let n = profile.len() as f64;
    Ok(CurvePoint {
        t_inlet,
        mean_total_kw: total / n,
        mean_pue: pue / pue_hours as f64,
        economizer_share: econ as f64 / n,
    })
}

/// Search bounds clipped to the feasible range; the flag reports clipping.
pub fn feasible_bounds(plant: &PlantConfig, t_min: f64, t_max: f64) -> Result<(f64, f64, bool)> {
    plant.validate()?;
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(Error::invalid(format!("search bounds [{t_min}, {t_max}] are not increasing")));
    }
    let limit = plant.fan.hot_surface_temp - FEASIBILITY_MARGIN_C;
    if t_min >= limit {
        return Err(Error::InfeasibleCooling { t_inlet: t_min, t_hot: plant.fan.hot_surface_temp });
    }
    Ok(if t_max > limit { (t_min, limit, true) } else { (t_min, t_max, false) })
}

/// Grid `t_min, t_min + step, ...` up to and including the upper bound.
fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| lo + step * k as f64).collect();
    if hi - ts[n] > 1e-9 {
        ts.push(hi);
    }
    ts
}

/// Evaluates the profile on a temperature grid. An upper bound beyond the
/// feasible range is clipped; see [`feasible_bounds`].
pub fn sweep_temperature(plant: &PlantConfig, profile: &OperatingProfile, t_min: f64, t_max: f64, step: f64) -> Result<Vec<CurvePoint>> {
    if !(step > 0.0) {
        return Err(Error::invalid("sweep step must be positive"));
    }
    let (lo, hi, _) = feasible_bounds(plant, t_min, t_max)?;
    grid(lo, hi, step).into_iter().map(|t| evaluate(plant, profile, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweetSpotResult {
    pub optimal_t: f64,
    pub optimal_power: f64,
    pub optimal_pue: f64,
    pub economizer_share: f64,
    pub t_min: f64,
    /// Upper bound actually searched.
    pub t_max: f64,
    pub upper_bound_truncated: bool,
    pub tolerance: f64,
    /// Several separated temperatures reach the minimum; the lowest is reported.
    pub plateau: bool,
    /// Sweep at [`COARSE_STEP_C`] spacing, for reporting.
    pub curve: Vec<CurvePoint>,
}

fn golden_section(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Hours ordered by the inlet temperature at which they switch to free
/// cooling, with running load sums. Every power term is proportional to
/// compute load, so the profile mean at a temperature needs only one
/// evaluation per cooling mode once the number of free-cooled hours is known.
struct SwitchIndex {
    switch_temps: Vec<f64>,
    load_prefix: Vec<f64>,
    total_load: f64,
    hours: f64,
}

impl SwitchIndex {
    fn new(plant: &PlantConfig, profile: &OperatingProfile) -> Self {
        let mut hours: Vec<(f64, f64)> = profile
            .loads
            .iter()
            .zip(&profile.outdoor)
            .map(|(&load, &outdoor)| (economizer_switch_temp(outdoor, plant), load))
            .collect();
        hours.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut load_prefix = Vec::with_capacity(hours.len() + 1);
        load_prefix.push(0.0);
        for &(_, load) in &hours {
            load_prefix.push(load_prefix.last().unwrap() + load);
        }
        Self {
            switch_temps: hours.iter().map(|h| h.0).collect(),
            total_load: *load_prefix.last().unwrap(),
            load_prefix,
            hours: profile.len() as f64,
        }
    }

    fn free_cooled(&self, t: f64) -> usize {
        self.switch_temps.partition_point(|&s| s <= t)
    }

    /// Mean total power at `t` with the first `free` hours on free cooling.
    fn mean_total(&self, plant: &PlantConfig, t: f64, free: usize) -> Result<f64> {
        let econ = building_power(t, 1.0, f64::NEG_INFINITY, plant)?.total;
        let chiller = building_power(t, 1.0, f64::INFINITY, plant)?.total;
        let free_load = self.load_prefix[free];
        Ok((econ * free_load + chiller * (self.total_load - free_load)) / self.hours)
    }

    /// Boundaries of the intervals on which the mode of every hour is fixed.
    fn pieces(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut edges = vec![lo];
        edges.extend(self.switch_temps.iter().copied().filter(|&s| s > lo && s < hi));
        edges.push(hi);
        edges.dedup();
        edges
    }
}

/// Minimizes a smooth function on `[a, b]`: a sweep at [`COARSE_STEP_C`]
/// spacing, then golden-section search around the best sample.
fn minimize_smooth(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let segments = ((b - a) / COARSE_STEP_C).ceil().max(1.0) as usize;
    let samples: Vec<(f64, f64)> = (0..=segments)
        .map(|j| {
            let t = if j == segments { b } else { a + (b - a) * j as f64 / segments as f64 };
            f(t).map(|v| (t, v))
        })
        .collect::<Result<_>>()?;
    let best = (0..samples.len()).fold(0, |best, j| if samples[j].1 < samples[best].1 { j } else { best });
    let left = samples[best.saturating_sub(1)].0;
    let right = samples[(best + 1).min(segments)].0;
    if right - left <= tol {
        return Ok(samples[best]);
    }
    let refined = golden_section(f, left, right, tol)?;
    Ok(if refined.1 < samples[best].1 { refined } else { samples[best] })
}

/// Global minimum of profile-averaged building power. Each hour switching to
/// free cooling steps the objective down, so it is smooth only between those
/// switch temperatures; every such piece is swept at [`COARSE_STEP_C`] and
/// refined by golden-section search. The curve attached to the result is a
/// plain sweep at the same spacing.
pub fn find_sweet_spot(plant: &PlantConfig, profile: &OperatingProfile, t_min: f64, t_max: f64, tol: f64) -> Result<SweetSpotResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (lo, hi, truncated) = feasible_bounds(plant, t_min, t_max)?;
    let curve: Vec<CurvePoint> =
        grid(lo, hi, COARSE_STEP_C).into_iter().map(|t| evaluate(plant, profile, t)).collect::<Result<_>>()?;

    let index = SwitchIndex::new(plant, profile);
    let edges = index.pieces(lo, hi);
    let mut candidates = Vec::with_capacity(edges.len() + 1);
    for w in edges.windows(2) {
        let free = index.free_cooled(w[0]);
        let piece = |t: f64| index.mean_total(plant, t, free);
        candidates.push(minimize_smooth(&piece, w[0], w[1], tol)?);
    }
    candidates.push((hi, index.mean_total(plant, hi, index.free_cooled(hi))?));

    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let cutoff = best + PLATEAU_RELATIVE * best.abs();
    let mut tied: Vec<f64> = candidates.iter().filter(|c| c.1 <= cutoff).map(|c| c.0).collect();
    tied.sort_by(f64::total_cmp);
    let optimal_t = tied[0];
    let plateau = tied.last().is_some_and(|&t| t - optimal_t > tol);
    let at = evaluate(plant, profile, optimal_t)?;
    Ok(SweetSpotResult {
        optimal_t,
        optimal_power: at.mean_total_kw,
        optimal_pue: at.mean_pue,
        economizer_share: at.economizer_share,
        t_min: lo,
        t_max: hi,
        upper_bound_truncated: truncated,
        tolerance: tol,
        plateau,
        curve,
    })
}

pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_HEADER)?;
    for p in curve {
        w.write_record([
            p.t_inlet.to_string(),
            p.mean_total_kw.to_string(),
            p.mean_pue.to_string(),
            p.economizer_share.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_force(plant: &PlantConfig, profile: &OperatingProfile, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (lo, f64::INFINITY);
        for k in 0..=n {
            let t = lo + step * k as f64;
            let v = evaluate(plant, profile, t).unwrap().mean_total_kw;
            if v < best.1 {
                best = (t, v);
            }
        }
        best.0
    }

    fn fan_only() -> PlantConfig {
        let mut p = PlantConfig::default();
        p.economizer.enabled = false;
        p.chiller.cop_gain_per_degc = 0.0;
        p
    }

    #[test]
    fn fan_only_curve_increases() {
        let profile = OperatingProfile::constant(100.0, 20.0).unwrap();
        let curve = sweep_temperature(&fan_only(), &profile, 18.0, 32.0, 0.5).unwrap();
        assert_eq!(curve.len(), 29);
        assert!(curve.windows(2).all(|w| w[1].mean_total_kw > w[0].mean_total_kw));
        let r = find_sweet_spot(&fan_only(), &profile, 18.0, 32.0, 0.01).unwrap();
        assert_eq!(r.optimal_t, 18.0);
        assert!(!r.plateau);
    }

    #[test]
    fn cooling_only_curve_decreases() {
        let mut plant = PlantConfig::default();
        plant.fan.reference_fan_fraction = 0.0;
        let profile = OperatingProfile::constant(100.0, 35.0).unwrap();
        let curve = sweep_temperature(&plant, &profile, 18.0, 32.0, 0.5).unwrap();
        assert!(curve.windows(2).all(|w| w[1].mean_total_kw <= w[0].mean_total_kw));
        let r = find_sweet_spot(&plant, &profile, 18.0, 32.0, 0.01).unwrap();
        assert_eq!(r.optimal_t, 32.0);
    }

    #[test]
    fn chiller_mode_pue_decreases_along_curve() {
        let mut plant = PlantConfig::default();
        plant.economizer.enabled = false;
        let profile = OperatingProfile::temperate_year();
        let curve = sweep_temperature(&plant, &profile, 18.0, 32.0, 0.25).unwrap();
        assert!(curve.iter().all(|p| p.economizer_share == 0.0));
        assert!(curve.windows(2).all(|w| w[1].mean_pue < w[0].mean_pue));
    }

    #[test]
    fn upper_bound_is_truncated() {
        let profile = OperatingProfile::constant(100.0, 20.0).unwrap();
        let r = find_sweet_spot(&PlantConfig::default(), &profile, 20.0, 80.0, 0.01).unwrap();
        assert!(r.upper_bound_truncated);
        assert_eq!(r.t_max, 59.0);
        assert!(sweep_temperature(&PlantConfig::default(), &profile, 70.0, 80.0, 1.0).is_err());
        assert!(find_sweet_spot(&PlantConfig::default(), &profile, 25.0, 20.0, 0.01).is_err());
        assert!(find_sweet_spot(&PlantConfig::default(), &profile, 20.0, 25.0, 0.0).is_err());
    }

    #[test]
    fn matches_grid_oracle_on_single_hour() {
        let plant = PlantConfig::default();
        let profile = OperatingProfile::constant(500.0, 30.0).unwrap();
        let r = find_sweet_spot(&plant, &profile, 18.0, 35.0, 0.001).unwrap();
        let oracle = brute_force(&plant, &profile, 18.0, 35.0, 0.0001);
        assert!((r.optimal_t - oracle).abs() <= 0.001, "{} vs {oracle}", r.optimal_t);
        assert!(r.optimal_t > 18.0 && r.optimal_t < 35.0);
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let plant = PlantConfig::default();
        let profile = OperatingProfile::temperate_year();
        let coarse = find_sweet_spot(&plant, &profile, 20.0, 32.0, 0.1).unwrap();
        let fine = find_sweet_spot(&plant, &profile, 20.0, 32.0, 0.001).unwrap();
        assert!((coarse.optimal_t - fine.optimal_t).abs() <= 0.1);
        assert!(fine.optimal_power <= coarse.optimal_power + 1e-9);
    }

    #[test]
    fn load_scaling_keeps_the_optimum() {
        let plant = PlantConfig::default();
        let profile = OperatingProfile::temperate_year();
        let base = find_sweet_spot(&plant, &profile, 20.0, 32.0, 0.01).unwrap();
        for k in [0.5, 2.0, 8.0] {
            let r = find_sweet_spot(&plant, &profile.scaled(k).unwrap(), 20.0, 32.0, 0.01).unwrap();
            assert!((r.optimal_t - base.optimal_t).abs() <= 0.01);
            assert_relative_eq!(r.optimal_power, k * base.optimal_power, max_relative = 1e-9);
        }
    }

    #[test]
    fn plateau_returns_lowest() {
        // economizer always on and no fans: flat curve
        let mut plant = PlantConfig::default();
        plant.fan.reference_fan_fraction = 0.0;
        let profile = OperatingProfile::constant(100.0, -30.0).unwrap();
        let r = find_sweet_spot(&plant, &profile, 20.0, 30.0, 0.01).unwrap();
        assert_eq!(r.optimal_t, 20.0);
        assert!(r.plateau);
    }

    #[test]
    fn curve_csv_layout() {
        let profile = OperatingProfile::constant(100.0, 20.0).unwrap();
        let curve = sweep_temperature(&PlantConfig::default(), &profile, 20.0, 21.0, 0.5).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_inlet,mean_total_kw,mean_pue,economizer_share\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn profile_validation() {
        assert!(OperatingProfile::new(vec![], vec![]).is_err());
        assert!(OperatingProfile::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(OperatingProfile::new(vec![-1.0], vec![1.0]).is_err());
        assert!(OperatingProfile::new(vec![0.0], vec![1.0]).is_err());
        assert_eq!(OperatingProfile::temperate_year().len(), 8760);
    }
}
