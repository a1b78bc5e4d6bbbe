//! Electro-thermal battery model.
//!
//! Electrical side: pack-level equivalent circuit, an open-circuit voltage in
//! series with an internal resistance, both functions of SOC. Thermal side:
//! one representative cell heated by Joule losses and cooled by two air
//! channels. Both states advance with one forward-Euler step per stage.

use crate::interp::Curve;
use crate::vehicle::{require, ModelError};

/// Per-cell quantity as a function of SOC.
#[derive(Clone, Debug, PartialEq)]
pub enum SocCurve {
    Constant(f64),
    /// `offset + slope·soc`
    Affine { offset: f64, slope: f64 },
    Table(Curve),
}

impl SocCurve {
    pub fn eval(&self, soc: f64) -> f64 {
        match self {
            SocCurve::Constant(c) => *c,
            SocCurve::Affine { offset, slope } => offset + slope * soc,
            SocCurve::Table(curve) => curve.eval(soc),
        }
    }

    fn min_on_unit_interval(&self) -> f64 {
        match self {
            SocCurve::Constant(c) => *c,
            SocCurve::Affine { offset, slope } => offset.min(offset + slope),
            SocCurve::Table(curve) => curve.min_value(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryElectricalParams {
    /// Total charge capacity, C.
    pub capacity: f64,
    pub series_cells: u32,
    /// Per-cell open-circuit voltage, V.
    pub ocv: SocCurve,
    /// Per-cell internal resistance, Ω.
    pub cell_resistance: SocCurve,
}

impl Default for BatteryElectricalParams {
    fn default() -> Self {
        Self {
            capacity: 15.0 * 3600.0,
            series_cells: 80,
            ocv: SocCurve::Affine { offset: 3.3, slope: 0.9 },
            cell_resistance: SocCurve::Constant(0.004),
        }
    }
}

/// Which resistance drives Joule heating in the lumped cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JouleResistance {
    /// Whole-pack resistance `R_b` heating the representative cell.
    #[default]
    Pack,
    /// Resistance of the representative cell only.
    Cell,
}

/// One cooling air channel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoolingChannel {
    /// Mean convective heat transfer coefficient, W/(m²·K).
    pub h_bar: f64,
    /// Heat transfer area, m².
    pub area: f64,
    /// kg/m³
    pub air_density: f64,
    /// J/(kg·K)
    pub air_specific_heat: f64,
    /// Volumetric air flow, m³/s.
    pub air_flow: f64,
    /// Inlet air temperature, °C.
    pub inlet_temp: f64,
}

impl Default for CoolingChannel {
    fn default() -> Self {
        Self {
            h_bar: 25.0,
            area: 0.02755,
            air_density: 1.2,
            air_specific_heat: 1005.0,
            air_flow: 0.005,
            inlet_temp: 20.0,
        }
    }
}

impl CoolingChannel {
    /// Convective resistance cell → air, K/W.
    pub fn convective_resistance(&self) -> f64 {
        1.0 / (self.h_bar * self.area)
    }

    /// Advective resistance of the air stream, K/W.
    pub fn flow_resistance(&self) -> f64 {
        1.0 / (self.air_density * self.air_specific_heat * self.air_flow)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryThermalParams {
    /// kg
    pub cell_mass: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    pub channels: [CoolingChannel; 2],
    pub joule_resistance: JouleResistance,
}

impl Default for BatteryThermalParams {
    fn default() -> Self {
        Self {
            cell_mass: 3.84,
            specific_heat: 800.0,
            channels: [CoolingChannel::default(), CoolingChannel::default()],
            joule_resistance: JouleResistance::Pack,
        }
    }
}

impl BatteryThermalParams {
    /// m_c · C_p,c, J/K.
    pub fn heat_capacity(&self) -> f64 {
        self.cell_mass * self.specific_heat
    }
}

/// Dynamic battery state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    /// °C
    pub theta: f64,
}

impl BatteryState {
    pub const fn new(soc: f64, theta: f64) -> Self {
        Self { soc, theta }
    }
}

/// Linear heat-removal coefficients: `Q_d = a1·θ + a2·θ_in1 + a3·θ_in2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoolingCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// 2^30: coefficients are kept to about 1e-9 W/K.
const COEFF_SCALE: f64 = 1_073_741_824.0;

pub fn cooling_coefficients(params: &BatteryThermalParams) -> CoolingCoefficients {
    let [c1, c2] = &params.channels;
    // Rounded to a fixed binary grid so that a1 + a2 + a3 is exactly zero in
    // any summation order.
    let conductance = |c: &CoolingChannel| {
        let g = 1.0 / (c.convective_resistance() + c.flow_resistance());
        libm::round(g * COEFF_SCALE) / COEFF_SCALE
    };
    let a2 = -conductance(c1);
    let a3 = -conductance(c2);
    let a1 = -(a2 + a3);
    CoolingCoefficients { a1, a2, a3 }
}

pub fn pack_ocv(params: &BatteryElectricalParams, soc: f64) -> f64 {
    params.series_cells as f64 * params.ocv.eval(soc)
}

pub fn pack_resistance(params: &BatteryElectricalParams, soc: f64) -> f64 {
    params.series_cells as f64 * params.cell_resistance.eval(soc)
}

/// Requested power exceeds what the circuit can deliver (`V_oc² < 4·R·P`).
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
#[error("battery cannot deliver {power} W (limit {limit} W)")]
pub struct InfeasiblePower {
    pub power: f64,
    pub limit: f64,
}

/// Battery current for terminal power `power` (discharge positive).
///
/// Smaller root of `R·I² − V_oc·I + P = 0`, evaluated as
/// `2P / (V_oc + √(V_oc² − 4RP))` to avoid cancellation at low power.
pub fn battery_current(ocv: f64, resistance: f64, power: f64) -> Result<f64, InfeasiblePower> {
    let disc = ocv * ocv - 4.0 * resistance * power;
    if !(disc >= 0.0) {
        return Err(InfeasiblePower { power, limit: ocv * ocv / (4.0 * resistance) });
    }
    Ok(2.0 * power / (ocv + libm::sqrt(disc)))
}

pub fn terminal_voltage(ocv: f64, resistance: f64, current: f64) -> f64 {
    ocv - resistance * current
}

/// dSOC/dt, 1/s.
pub fn soc_rate(params: &BatteryElectricalParams, current: f64) -> f64 {
    -current / params.capacity
}

/// Joule heat, W. The reversible (entropic) term is neglected.
pub fn heat_generation(resistance: f64, current: f64) -> f64 {
    resistance * current * current
}

/// `a1·θ + a2·θ_in1 + a3·θ_in2`, W, evaluated as `a2·(θ_in1 − θ) + a3·(θ_in2 − θ)`
/// so it vanishes exactly when `θ` equals both inlet temperatures.
pub fn heat_removed(coeffs: &CoolingCoefficients, theta: f64, inlet_1: f64, inlet_2: f64) -> f64 {
    coeffs.a2 * (inlet_1 - theta) + coeffs.a3 * (inlet_2 - theta)
}

/// dθ/dt, K/s.
pub fn theta_rate(
    thermal: &BatteryThermalParams,
    coeffs: &CoolingCoefficients,
    resistance: f64,
    current: f64,
    theta: f64,
) -> f64 {
    theta_rate_from_heat(thermal, coeffs, heat_generation(resistance, current), theta)
}

/// dθ/dt given the generated heat directly.
pub fn theta_rate_from_heat(
    thermal: &BatteryThermalParams,
    coeffs: &CoolingCoefficients,
    heat: f64,
    theta: f64,
) -> f64 {
    let [c1, c2] = &thermal.channels;
    (heat - heat_removed(coeffs, theta, c1.inlet_temp, c2.inlet_temp)) / thermal.heat_capacity()
}

/// Complete battery model with its cooling coefficients resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Battery {
    pub electrical: BatteryElectricalParams,
    pub thermal: BatteryThermalParams,
    coeffs: CoolingCoefficients,
}

impl Default for Battery {
    fn default() -> Self {
        Self::new(BatteryElectricalParams::default(), BatteryThermalParams::default())
    }
}

/// Result of advancing the battery by one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryStep {
    pub next: BatteryState,
    pub current: f64,
    pub terminal_voltage: f64,
    pub ocv: f64,
    pub resistance: f64,
}

impl Battery {
    pub fn new(electrical: BatteryElectricalParams, thermal: BatteryThermalParams) -> Self {
        let coeffs = cooling_coefficients(&thermal);
        Self { electrical, thermal, coeffs }
    }

    pub fn coefficients(&self) -> &CoolingCoefficients {
        &self.coeffs
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let e = &self.electrical;
        require(e.capacity > 0.0 && e.capacity.is_finite(), "battery.capacity", "must be > 0")?;
        require(e.series_cells >= 1, "battery.series_cells", "must be >= 1")?;
        require(e.ocv.min_on_unit_interval() > 0.0, "battery.ocv", "must be > 0 on [0, 1]")?;
        require(
            e.cell_resistance.min_on_unit_interval() > 0.0,
            "battery.cell_resistance",
            "must be > 0 on [0, 1]",
        )?;
        let t = &self.thermal;
        require(t.cell_mass > 0.0 && t.cell_mass.is_finite(), "battery.thermal.cell_mass", "must be > 0")?;
        require(
            t.specific_heat > 0.0 && t.specific_heat.is_finite(),
            "battery.thermal.specific_heat",
            "must be > 0",
        )?;
        for c in &t.channels {
            for (v, name) in [
                (c.h_bar, "battery.thermal.h_bar"),
                (c.area, "battery.thermal.area"),
                (c.air_density, "battery.thermal.air_density"),
                (c.air_specific_heat, "battery.thermal.air_specific_heat"),
                (c.air_flow, "battery.thermal.air_flow"),
            ] {
                require(v > 0.0 && v.is_finite(), name, "must be > 0")?;
            }
            require(c.inlet_temp.is_finite(), "battery.thermal.inlet_temp", "must be finite")?;
        }
        Ok(())
    }

    pub fn ocv(&self, soc: f64) -> f64 {
        pack_ocv(&self.electrical, soc)
    }

    pub fn resistance(&self, soc: f64) -> f64 {
        pack_resistance(&self.electrical, soc)
    }

    /// Resistance whose losses heat the lumped cell.
    pub fn joule_resistance(&self, soc: f64) -> f64 {
        match self.thermal.joule_resistance {
            JouleResistance::Pack => self.resistance(soc),
            JouleResistance::Cell => self.electrical.cell_resistance.eval(soc),
        }
    }

    pub fn current(&self, soc: f64, power: f64) -> Result<f64, InfeasiblePower> {
        battery_current(self.ocv(soc), self.resistance(soc), power)
    }

    pub fn next_soc(&self, soc: f64, current: f64, dt: f64) -> f64 {
        soc + dt * soc_rate(&self.electrical, current)
    }

    pub fn next_theta_from_heat(&self, theta: f64, heat: f64, dt: f64) -> f64 {
        theta + dt * theta_rate_from_heat(&self.thermal, &self.coeffs, heat, theta)
    }

    pub fn theta_rate(&self, resistance: f64, current: f64, theta: f64) -> f64 {
        theta_rate(&self.thermal, &self.coeffs, resistance, current, theta)
    }

    /// Thermal equilibrium under a constant current.
    pub fn equilibrium_theta(&self, resistance: f64, current: f64) -> f64 {
        let [c1, c2] = &self.thermal.channels;
        let c = &self.coeffs;
        (heat_generation(resistance, current) - c.a2 * c1.inlet_temp - c.a3 * c2.inlet_temp) / c.a1
    }

    /// One forward-Euler step at terminal power `power` over `dt`. The
    /// current is evaluated once, at the pre-step state.
    pub fn step(&self, state: BatteryState, power: f64, dt: f64) -> Result<BatteryStep, InfeasiblePower> {
        let ocv = self.ocv(state.soc);
        let resistance = self.resistance(state.soc);
        let current = battery_current(ocv, resistance, power)?;
        let heat = heat_generation(self.joule_resistance(state.soc), current);
        Ok(BatteryStep {
            next: BatteryState {
                soc: self.next_soc(state.soc, current, dt),
                theta: self.next_theta_from_heat(state.theta, heat, dt),
            },
            current,
            terminal_voltage: terminal_voltage(ocv, resistance, current),
            ocv,
            resistance,
        })
    }
}
