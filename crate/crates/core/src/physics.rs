//! Thermodynamic relations for server fans, chillers and economizers, and
//! their composition into room and building power.
//!
//! Server fans are modelled in ratio form: the convective coefficient grows
//! with air velocity as `h ∝ v^α`, so holding the heat rate
//! `h · A · (T_hot − T_inlet)` constant as the inlet warms requires a speed
//! multiple of `((T_hot − T_ref) / (T_hot − T_inlet))^(1/α)`, and fan power
//! follows the cube of that multiple.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the ASHRAE recommended inlet range, °C.
pub const ASHRAE_UPPER_C: f64 = 27.0;

/// Publicly reported hyperscaler inlet setpoints, °C.
pub const HYPERSCALER_SETPOINTS_C: [(&str, f64); 3] =
    [("google", 26.6), ("microsoft", 27.0), ("meta", 29.4)];

/// Airflow needed per kW of server power, m³/min (165-170 CFM per kW).
pub const AIRFLOW_M3_PER_MIN_PER_KW: f64 = 4.75;

/// Lowest COP the chiller law is allowed to return.
pub const MIN_COP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanModel {
    /// Inlet temperature at which fans run at their reference speed, °C.
    pub reference_inlet: f64,
    /// Temperature of the heat-sink surfaces being cooled, °C.
    pub hot_surface_temp: f64,
    /// Exponent of the convective coefficient on air velocity.
    pub h_velocity_exponent: f64,
    /// Fan power as a fraction of room IT power at the reference inlet.
    pub reference_fan_fraction: f64,
    /// m³/min per kW; informational, the model works in ratios.
    pub airflow_per_kw: f64,
}

impl Default for FanModel {
    fn default() -> Self {
        Self {
            reference_inlet: 24.0,
            hot_surface_temp: 60.0,
            h_velocity_exponent: 0.8,
            reference_fan_fraction: 0.043,
            airflow_per_kw: AIRFLOW_M3_PER_MIN_PER_KW,
        }
    }
}

impl FanModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_velocity_exponent > 0.0 && self.h_velocity_exponent <= 1.0) {
            return Err(Error::invalid("h_velocity_exponent must lie in (0, 1]"));
        }
        if !(self.reference_fan_fraction >= 0.0 && self.reference_fan_fraction < 1.0) {
            return Err(Error::invalid("reference_fan_fraction must lie in [0, 1)"));
        }
        if !(self.hot_surface_temp > self.reference_inlet) {
            return Err(Error::invalid("hot_surface_temp must exceed reference_inlet"));
        }
        Ok(())
    }

    /// Airflow the servers need at the reference speed, m³/min.
    pub fn reference_airflow(&self, it_power_kw: f64) -> f64 {
        self.airflow_per_kw * it_power_kw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChillerModel {
    pub reference_cop: f64,
    /// Chilled-water temperature at which `reference_cop` holds, °C.
    pub reference_chw_temp: f64,
    /// Fractional COP gain per °C of warmer chilled water.
    pub cop_gain_per_degc: f64,
    /// Inlet minus chilled-water temperature, °C.
    pub chw_approach: f64,
}

impl Default for ChillerModel {
    fn default() -> Self {
        Self { reference_cop: 4.0, reference_chw_temp: 16.0, cop_gain_per_degc: 0.0315, chw_approach: 8.0 }
    }
}

impl ChillerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_cop > 0.0) {
            return Err(Error::invalid("reference_cop must be positive"));
        }
        if !(self.cop_gain_per_degc >= 0.0) {
            return Err(Error::invalid("cop_gain_per_degc must not be negative"));
        }
        Ok(())
    }

    pub fn chw_temp(&self, t_inlet: f64) -> f64 {
        t_inlet - self.chw_approach
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomizerModel {
    pub enabled: bool,
    /// Free cooling runs when outdoor air is at least this much colder than
    /// the chilled-water temperature, °C.
    pub approach: f64,
    /// Pump and fan power per unit of heat moved.
    pub overhead_fraction: f64,
}

impl Default for EconomizerModel {
    fn default() -> Self {
        Self { enabled: true, approach: 5.0, overhead_fraction: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub fan: FanModel,
    pub chiller: ChillerModel,
    pub economizer: EconomizerModel,
    /// UPS losses, lighting and similar, as a fraction of IT power.
    pub fixed_overhead_fraction: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            fan: FanModel::default(),
            chiller: ChillerModel::default(),
            economizer: EconomizerModel::default(),
            fixed_overhead_fraction: 0.05,
        }
    }
}

impl PlantConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        self.fan.validate()?;
        self.chiller.validate()?;
        if !(self.economizer.overhead_fraction >= 0.0) {
            return Err(Error::invalid("economizer overhead_fraction must not be negative"));
        }
        if !(self.fixed_overhead_fraction >= 0.0) {
            return Err(Error::invalid("fixed_overhead_fraction must not be negative"));
        }
        Ok(())
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let plant: PlantConfig = serde_json::from_str(raw)?;
        plant.validate()?;
        Ok(plant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingMode {
    Chiller,
    Economizer,
}

impl CoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CoolingMode::Chiller => "chiller",
            CoolingMode::Economizer => "economizer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub compute: f64,
    pub fans: f64,
    pub cooling: f64,
    pub overhead: f64,
    pub total: f64,
    pub pue: f64,
    pub mode: CoolingMode,
}

impl PowerBreakdown {
    /// Power a room meter sees: servers including their fans.
    pub fn it_power(&self) -> f64 {
        self.compute + self.fans
    }
}

/// Coefficient of performance: heat moved over work put in.
pub fn cop_from_energy(heat: f64, work: f64) -> Result<f64> {
    if !(work > 0.0) {
        return Err(Error::invalid("COP needs positive work input"));
    }
    Ok(heat.abs() / work)
}

/// Newton's law of cooling, W.
pub fn convective_heat_rate(h: f64, area: f64, t_hot: f64, t_cold: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::invalid("surface area must be positive"));
    }
    Ok(h * area * (t_hot - t_cold))
}

/// Fan speed multiple that keeps the convective heat rate at its reference
/// value for the given inlet temperature.
pub fn fan_speed_ratio_for_setpoint(t_inlet: f64, fan: &FanModel) -> Result<f64> {
    if t_inlet >= fan.hot_surface_temp {
        return Err(Error::InfeasibleCooling { t_inlet, t_hot: fan.hot_surface_temp });
    }
    let ratio = (fan.hot_surface_temp - fan.reference_inlet) / (fan.hot_surface_temp - t_inlet);
    Ok(ratio.powf(1.0 / fan.h_velocity_exponent))
}

/// Fan affinity law: power scales with the cube of speed.
pub fn fan_power(speed_ratio: f64, reference_fan_power: f64) -> Result<f64> {
    if !(speed_ratio >= 0.0) {
        return Err(Error::invalid("fan speed ratio must not be negative"));
    }
    Ok(reference_fan_power * speed_ratio.powi(3))
}

/// Returns `(compute, fans)` in kW.
pub fn server_room_power(t_inlet: f64, it_compute_power: f64, fan: &FanModel) -> Result<(f64, f64)> {
    if !(it_compute_power >= 0.0) {
        return Err(Error::invalid("compute power must not be negative"));
    }
    let ratio = fan_speed_ratio_for_setpoint(t_inlet, fan)?;
    let fans = fan_power(ratio, it_compute_power * fan.reference_fan_fraction)?;
    Ok((it_compute_power, fans))
}

/// Linear COP law in chilled-water temperature, floored at [`MIN_COP`].
pub fn chiller_cop_at(t_inlet: f64, chiller: &ChillerModel) -> f64 {
    let delta = chiller.chw_temp(t_inlet) - chiller.reference_chw_temp;
    (chiller.reference_cop * (1.0 + chiller.cop_gain_per_degc * delta)).max(MIN_COP)
}

/// Lowest inlet temperature at which free cooling is available; infinite
/// when the economizer is disabled.
pub fn economizer_switch_temp(outdoor_temp: f64, plant: &PlantConfig) -> f64 {
    if plant.economizer.enabled {
        outdoor_temp + plant.economizer.approach + plant.chiller.chw_approach
    } else {
        f64::INFINITY
    }
}

/// Whether outdoor air is cold enough for free cooling at this inlet.
pub fn economizer_active(t_inlet: f64, outdoor_temp: f64, plant: &PlantConfig) -> bool {
    t_inlet >= economizer_switch_temp(outdoor_temp, plant)
}

/// Power to remove `heat_load` kW, with the mode that was used.
pub fn cooling_power(heat_load: f64, t_inlet: f64, outdoor_temp: f64, plant: &PlantConfig) -> Result<(f64, CoolingMode)> {
    if !(heat_load >= 0.0) {
        return Err(Error::invalid("heat load must not be negative"));
    }
    let movers = plant.economizer.overhead_fraction * heat_load;
    if economizer_active(t_inlet, outdoor_temp, plant) {
        Ok((movers, CoolingMode::Economizer))
    } else {
        Ok((heat_load / chiller_cop_at(t_inlet, &plant.chiller) + movers, CoolingMode::Chiller))
    }
}

/// `1 + P_non_IT / P_IT`.
pub fn pue(p_it: f64, p_non_it: f64) -> Result<f64> {
    if !(p_it > 0.0) {
        return Err(Error::invalid("PUE needs positive IT power"));
    }
    if !(p_non_it >= 0.0) {
        return Err(Error::invalid("non-IT power must not be negative"));
    }
    Ok(1.0 + p_non_it / p_it)
}

/// Whole-building power. All IT power, fans included, becomes heat.
pub fn building_power(t_inlet: f64, it_compute_power: f64, outdoor_temp: f64, plant: &PlantConfig) -> Result<PowerBreakdown> {
    let (compute, fans) = server_room_power(t_inlet, it_compute_power, &plant.fan)?;
    let it = compute + fans;
    let (cooling, mode) = cooling_power(it, t_inlet, outdoor_temp, plant)?;
    let overhead = plant.fixed_overhead_fraction * it;
    let total = compute + fans + cooling + overhead;
    // An idle room draws nothing, so the ratio is taken at its limit.
    let pue = if it > 0.0 { total / it } else { 1.0 };
    Ok(PowerBreakdown { compute, fans, cooling, overhead, total, pue, mode })
}
