//! First-approximation controller tuning via plant linearization.
//!
//! The energy balance is nonlinear in the water mass flow. Around a
//! representative operating point it reduces to a PT1 element with time
//! constant `τ_e = C_v·ρ·Δx / α_w,0` and static gain
//! `k_s,e = (T_w,0 − T_Cyl,0)/α_w,0 · ∂α_w/∂ṁ|_0` (negative whenever the
//! water is colder than the head). The Kessler rule then cancels both the
//! engine and the pump time constants, leaving an integrator-dominated
//! open loop whose closed loop is a PT1 with `τ_c = 1/(k_I·k_s,e)`.

use serde::{Deserialize, Serialize};

use crate::control::PidGains;
use crate::error::{Error, Result};
use crate::plant::{water_htc, water_htc_flow_derivative, ThermalPlantParams};

/// Representative operating point for the linearization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    /// Water reference temperature, K.
    pub t_w_0: f64,
    /// Cylinder head temperature, K.
    pub t_cyl_0: f64,
    /// Water mass flow rate, kg/s.
    pub mdot_w_0: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self { t_w_0: 373.0, t_cyl_0: 419.0, mdot_w_0: 2.0 }
    }
}

/// PT1 description of the linearized plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantLinearization {
    /// Engine time constant, s.
    pub tau_e: f64,
    /// Static gain from flow to temperature, K·s/kg.
    pub k_s_e: f64,
}

/// Linearizes the plant at an operating point.
pub fn linearize_plant(
    operating_point: &OperatingPoint,
    params: &ThermalPlantParams,
) -> Result<PlantLinearization> {
    let alpha_w_0 = water_htc(operating_point.mdot_w_0, params)?;
    let tau_e = params.areal_heat_capacity() / alpha_w_0;
    let slope = water_htc_flow_derivative(operating_point.mdot_w_0, params)?;
    let k_s_e = (operating_point.t_w_0 - operating_point.t_cyl_0) / alpha_w_0 * slope;
    Ok(PlantLinearization { tau_e, k_s_e })
}

/// Kessler tuning: compensate the engine and pump time constants.
///
/// `T_R1 = τ_e`, `T_R2 = τ_p`, `k_I = 1/(k_s,e·τ_c)`. By construction
/// `k_I·k_s,e·τ_c = 1`, the open loop is `k_I·k_s,e/s`, and the closed
/// loop is a PT1 with the requested time constant.
pub fn kessler_tune(tau_e: f64, tau_p: f64, k_s_e: f64, tau_c_desired: f64) -> Result<PidGains> {
    if k_s_e == 0.0 {
        return Err(Error::Domain(
            "kessler_tune: plant gain k_s_e is zero (degenerate plant)".into(),
        ));
    }
    for (name, value) in [("tau_e", tau_e), ("tau_p", tau_p), ("tau_c", tau_c_desired)] {
        if !(value > 0.0) {
            return Err(Error::Domain(format!(
                "kessler_tune: {name} must be positive, got {value}"
            )));
        }
    }
    let k_i = 1.0 / (k_s_e * tau_c_desired);
    Ok(PidGains::from_time_constants(k_i, tau_e, tau_p))
}

/// Full tuning report, ready for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub tau_e: f64,
    pub k_s_e: f64,
    #[serde(rename = "k_P")]
    pub k_p: f64,
    #[serde(rename = "k_I")]
    pub k_i: f64,
    #[serde(rename = "k_D")]
    pub k_d: f64,
    pub tau_c: f64,
}

/// Linearizes and tunes in one go.
pub fn tune_at(
    operating_point: &OperatingPoint,
    params: &ThermalPlantParams,
    tau_p: f64,
    tau_c_desired: f64,
) -> Result<TuningReport> {
    let lin = linearize_plant(operating_point, params)?;
    let gains = kessler_tune(lin.tau_e, tau_p, lin.k_s_e, tau_c_desired)?;
    Ok(TuningReport {
        tau_e: lin.tau_e,
        k_s_e: lin.k_s_e,
        k_p: gains.k_p,
        k_i: gains.k_i,
        k_d: gains.k_d,
        tau_c: tau_c_desired,
    })
}
