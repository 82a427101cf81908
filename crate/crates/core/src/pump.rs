//! Water pump actuator: first-order lag with a saturation box.
//!
//! The pump responds to a flow command as a PT1 element `1/(τ_p·s + 1)`
//! between hard flow limits. The lag itself provides the frequency
//! roll-off that bounds the admissible operating region; the minimum flow
//! clamp stands in for boiling/cavitation protection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpParams {
    /// Pump time constant, s.
    pub tau_p: f64,
    /// Minimum deliverable flow, kg/s.
    pub mdot_min: f64,
    /// Maximum deliverable flow, kg/s.
    pub mdot_max: f64,
    /// Base frequency of the admissible region, Hz. Reported for validity
    /// checks only; the PT1 lag already enforces the roll-off.
    pub f_max: f64,
    /// Hydraulic power curve coefficient, W·s³/kg³, such that
    /// `P = coeff · ṁ³`. Default calibrated to 500 W at full flow.
    pub hydraulic_coeff: f64,
}

impl Default for PumpParams {
    fn default() -> Self {
        Self {
            tau_p: 0.2,
            mdot_min: 0.25,
            mdot_max: 4.5,
            f_max: 5.0,
            // 500 W / (4.5 kg/s)³
            hydraulic_coeff: 5.486_968_449_931_413,
        }
    }
}

impl PumpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_p > 0.0) {
            return Err(Error::Config(format!(
                "pump.tau_p must be positive, got {}",
                self.tau_p
            )));
        }
        if !(self.mdot_min > 0.0 && self.mdot_min < self.mdot_max) {
            return Err(Error::Config(format!(
                "pump flow limits must satisfy 0 < mdot_min < mdot_max, got [{}, {}]",
                self.mdot_min, self.mdot_max
            )));
        }
        if !(self.f_max > 0.0) {
            return Err(Error::Config(format!(
                "pump.f_max must be positive, got {}",
                self.f_max
            )));
        }
        if !(self.hydraulic_coeff >= 0.0) {
            return Err(Error::Config(format!(
                "pump.hydraulic_coeff must be non-negative, got {}",
                self.hydraulic_coeff
            )));
        }
        Ok(())
    }

    /// Checks that a step size resolves the lag (dt ≤ τ_p/10).
    pub fn validate_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > self.tau_p / 10.0 {
            return Err(Error::Config(format!(
                "step size {dt} s must lie in (0, tau_p/10 = {}]",
                self.tau_p / 10.0
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, mdot: f64) -> f64 {
        mdot.clamp(self.mdot_min, self.mdot_max)
    }

    pub fn mid_flow(&self) -> f64 {
        0.5 * (self.mdot_min + self.mdot_max)
    }

    /// State with the flow settled at a (clamped) command.
    pub fn settled_state(&self, command: f64) -> PumpState {
        PumpState { mdot_actual: self.clamp(command) }
    }
}

/// Discretized internal state of the lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpState {
    /// Delivered flow, kg/s; always within the pump limits.
    pub mdot_actual: f64,
}

/// Advances the pump by one step of length `dt`.
///
/// The command is clamped to the flow limits, the lag is integrated with
/// the exact discretization factor `1 − e^(−dt/τ_p)`, and the state is
/// clamped again so the invariant holds for any command.
pub fn pump_step(
    state: PumpState,
    mdot_command: f64,
    dt: f64,
    params: &PumpParams,
) -> Result<PumpState> {
    params.validate_dt(dt)?;
    let command = params.clamp(mdot_command);
    let decay = (-dt / params.tau_p).exp();
    let mdot = command + (state.mdot_actual - command) * decay;
    Ok(PumpState { mdot_actual: params.clamp(mdot) })
}

/// Hydraulic power drawn at a flow, W: `coeff · ṁ³` (turbulent pressure
/// loss ∝ ṁ² times volumetric flow).
pub fn hydraulic_power(mdot_actual: f64, coeff: f64) -> f64 {
    coeff * mdot_actual * mdot_actual * mdot_actual
}
