//! Control strategies for the water mass flow rate.
//!
//! Four strategies act on the pump command:
//! - `mechanical`: reference pump geared to engine speed (no feedback),
//! - `feedforward`: flow from the stationary plant solution for the
//!   current heat input and target temperature,
//! - `pid`: feedback around a constant base flow,
//! - `combined`: feed-forward nominal flow plus PID correction, summed
//!   before the pump clamp.
//!
//! Controller gains are negative: raising the flow lowers the temperature,
//! so the static plant gain is negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::HeatInputModel;
use crate::plant::ThermalPlantParams;
use crate::pump::PumpParams;
use crate::trace::EngineSample;

/// PID gains of `G_c = k_P + k_I/s + k_D·s`.
///
/// Units: `k_P` kg/(K·s), `k_I` kg/(K·s²), `k_D` kg/K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
}

impl PidGains {
    /// Builds gains from the factored controller form
    /// `G_c = k_I·(1 + T_R1·s)(1 + T_R2·s)/s`.
    pub fn from_time_constants(k_i: f64, t_r1: f64, t_r2: f64) -> Self {
        Self {
            k_p: k_i * (t_r1 + t_r2),
            k_i,
            k_d: k_i * t_r1 * t_r2,
        }
    }

    /// Recovers the controller time constants `(T_R1, T_R2)` when they are
    /// real, i.e. when `(k_P/k_I)² ≥ 4·k_D/k_I`. Returns the larger one
    /// first.
    pub fn time_constants(&self) -> Option<(f64, f64)> {
        if self.k_i == 0.0 {
            return None;
        }
        let sum = self.k_p / self.k_i;
        let product = self.k_d / self.k_i;
        let discriminant = sum * sum - 4.0 * product;
        if discriminant < 0.0 {
            return None;
        }
        let root = discriminant.sqrt();
        Some((0.5 * (sum + root), 0.5 * (sum - root)))
    }
}

/// Target temperatures per engine state. Equal values give a constant
/// target; a higher coasting target realizes the anticyclical schedule
/// that flattens the lap temperature trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSchedule {
    pub t_target_fired: f64,
    pub t_target_coasting: f64,
}

impl TargetSchedule {
    pub fn constant(target: f64) -> Self {
        Self { t_target_fired: target, t_target_coasting: target }
    }

    pub fn validate(&self, plant: &ThermalPlantParams) -> Result<()> {
        for (name, t) in [
            ("t_target_fired", self.t_target_fired),
            ("t_target_coasting", self.t_target_coasting),
        ] {
            if !(t > plant.t_w_in) || t > 600.0 {
                return Err(Error::Config(format!(
                    "{name} = {t} K must lie in (t_w_in = {} K, 600 K]",
                    plant.t_w_in
                )));
            }
        }
        Ok(())
    }
}

/// Target temperature for the sample's engine state, K.
pub fn target_for(sample: &EngineSample, schedule: &TargetSchedule) -> f64 {
    if sample.fired {
        schedule.t_target_fired
    } else {
        schedule.t_target_coasting
    }
}

/// Strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Mechanical,
    FeedForward,
    Pid,
    Combined,
}

impl Strategy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mechanical" => Ok(Self::Mechanical),
            "feedforward" => Ok(Self::FeedForward),
            "pid" => Ok(Self::Pid),
            "combined" => Ok(Self::Combined),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected mechanical | feedforward | pid | combined)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mechanical => "mechanical",
            Self::FeedForward => "feedforward",
            Self::Pid => "pid",
            Self::Combined => "combined",
        }
    }
}

/// Complete controller description for a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub strategy: Strategy,
    pub gains: PidGains,
    pub schedule: TargetSchedule,
    /// Transmission ratio of the mechanical reference pump, kg/s per rpm.
    pub mechanical_ratio: f64,
}

/// Flow of the mechanical reference pump, kg/s: `ratio · n`, clamped to
/// the pump limits.
pub fn mechanical_pump_flow(sample: &EngineSample, ratio: f64, pump: &PumpParams) -> f64 {
    pump.clamp(ratio * sample.n)
}

/// Feed-forward (nominal) water mass flow, kg/s, clamped to the pump
/// limits.
///
/// Stationary solution of the energy balance at the target temperature,
/// neglecting the water temperature rise:
/// `ṁ = [χ⟨α_c⟩(T_mod − T_t) / ((α_ref/ṁ_ref^m)(T_t − T_w,i))]^(1/m)`.
/// A non-positive numerator (heat input too weak to hold the target)
/// yields the minimum flow.
pub fn feed_forward_flow(
    sample: &EngineSample,
    t_target: f64,
    heat: &HeatInputModel,
    plant: &ThermalPlantParams,
    pump: &PumpParams,
) -> Result<f64> {
    Ok(pump.clamp(feed_forward_flow_unclamped(sample, t_target, heat, plant)?))
}

/// Raw feed-forward flow before the actuator clamp, kg/s.
pub fn feed_forward_flow_unclamped(
    sample: &EngineSample,
    t_target: f64,
    heat: &HeatInputModel,
    plant: &ThermalPlantParams,
) -> Result<f64> {
    if !(t_target > plant.t_w_in) {
        return Err(Error::Config(format!(
            "feed-forward target {t_target} K is not coolable: it must exceed \
             the inlet water temperature {} K",
            plant.t_w_in
        )));
    }
    let (alpha_c, t_mod) = heat.boundary_condition(sample);
    let numerator = plant.chi * alpha_c * (t_mod - t_target);
    if numerator <= 0.0 {
        return Ok(0.0);
    }
    let denominator =
        (plant.alpha_ref / plant.mdot_ref.powf(plant.m_exp)) * (t_target - plant.t_w_in);
    Ok((numerator / denominator).powf(1.0 / plant.m_exp))
}

/// Actuator saturation status fed back to the controller for conditional
/// integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Saturation {
    #[default]
    None,
    AtMin,
    AtMax,
}

impl Saturation {
    /// Classifies a raw command against the pump limits.
    pub fn of_command(raw_command: f64, pump: &PumpParams) -> Self {
        if raw_command >= pump.mdot_max {
            Self::AtMax
        } else if raw_command <= pump.mdot_min {
            Self::AtMin
        } else {
            Self::None
        }
    }
}

/// Discrete realization parameters of the PID law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidDiscretization {
    /// Derivative low-pass filter time constant, s. An ideal derivative on
    /// a sampled error is unusable; τ_p/10 is the default.
    pub derivative_filter_tau: f64,
    /// Cap on the magnitude of the integral contribution `|k_I·∫e|`, kg/s.
    /// The actuator span is the natural bound.
    pub integral_authority: f64,
}

impl PidDiscretization {
    pub fn for_pump(pump: &PumpParams) -> Self {
        Self {
            derivative_filter_tau: pump.tau_p / 10.0,
            integral_authority: pump.mdot_max - pump.mdot_min,
        }
    }
}

/// Discrete controller state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Accumulated error, K·s.
    pub integral: f64,
    /// Error at the previous step, K (None before the first step).
    pub previous_error: Option<f64>,
    /// Low-pass filtered error derivative, K/s.
    pub derivative_filter: f64,
}

/// One PID update. Returns the flow correction, kg/s, and the updated
/// state.
///
/// Anti-windup is conditional integration: the integrator freezes while
/// the actuator is saturated in the direction the integral term is
/// pushing, and the accumulated contribution is capped at the configured
/// authority.
pub fn pid_step(
    state: &ControllerState,
    error: f64,
    dt: f64,
    gains: &PidGains,
    discretization: &PidDiscretization,
    saturation: Saturation,
) -> (f64, ControllerState) {
    let raw_rate = match state.previous_error {
        Some(previous) => (error - previous) / dt,
        None => 0.0,
    };
    let tau_f = discretization.derivative_filter_tau;
    let blend = if tau_f > 0.0 { 1.0 - (-dt / tau_f).exp() } else { 1.0 };
    let derivative = state.derivative_filter + blend * (raw_rate - state.derivative_filter);

    let integral_push = gains.k_i * error;
    let frozen = (saturation == Saturation::AtMax && integral_push > 0.0)
        || (saturation == Saturation::AtMin && integral_push < 0.0);
    let mut integral = state.integral + if frozen { 0.0 } else { error * dt };
    if gains.k_i != 0.0 {
        let cap = discretization.integral_authority / gains.k_i.abs();
        integral = integral.clamp(-cap, cap);
    }

    let delta = gains.k_p * error + gains.k_i * integral + gains.k_d * derivative;
    let next = ControllerState {
        integral,
        previous_error: Some(error),
        derivative_filter: derivative,
    };
    (delta, next)
}
