//! Closed-loop lap simulation.
//!
//! Wires trace → heat input → controller → pump → plant at a fixed step
//! and computes lap metrics. The pump command is held over each step
//! (zero-order hold of the discrete controller); the pump state follows
//! its exact exponential trajectory within the step, and the lump
//! temperature is integrated with RK4 whose stages see the trace, the
//! pump flow and the self-consistent water temperature at the stage
//! times. A fixed step keeps sweep results bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::control::{
    feed_forward_flow_unclamped, mechanical_pump_flow, pid_step, target_for, ControllerSpec,
    ControllerState, PidDiscretization, Saturation, Strategy,
};
use crate::error::{Error, Result};
use crate::heat::HeatInputModel;
use crate::plant::{
    consistent_water_temperature, steady_state_temperature, temperature_rate, water_htc,
    ThermalPlantParams,
};
use crate::pump::{hydraulic_power, PumpParams, PumpState};
use crate::trace::LapTrace;

/// Integrator and metrics settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Fixed integration step, s.
    pub dt: f64,
    /// Emit every n-th sample into the time series.
    pub decimation: usize,
    /// Metrics exclude a warm-up window of this many reference engine time
    /// constants from lap start.
    pub warmup_tau_factor: f64,
    /// Repeat the lap up to this many times, stopping early once the
    /// lap-to-lap mean temperature change falls below `periodic_tol`.
    pub max_laps: usize,
    /// Relative lap-to-lap change considered periodic.
    pub periodic_tol: f64,
    /// Flow at or below this value counts against the turbulence validity
    /// fraction (laminar transition proxy).
    pub re_limit_mdot: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            decimation: 100,
            warmup_tau_factor: 5.0,
            max_laps: 1,
            periodic_tol: 0.005,
            re_limit_mdot: 0.25,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self, pump: &PumpParams) -> Result<()> {
        pump.validate_dt(self.dt)?;
        if self.decimation == 0 {
            return Err(Error::Config("simulation.decimation must be >= 1".into()));
        }
        if self.max_laps == 0 {
            return Err(Error::Config("simulation.max_laps must be >= 1".into()));
        }
        if !(self.warmup_tau_factor >= 0.0) {
            return Err(Error::Config(
                "simulation.warmup_tau_factor must be non-negative".into(),
            ));
        }
        if !(self.periodic_tol > 0.0) {
            return Err(Error::Config("simulation.periodic_tol must be positive".into()));
        }
        Ok(())
    }
}

/// One emitted sample of the closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    /// Time, s.
    pub t: f64,
    /// Cylinder head temperature, K.
    #[serde(rename = "T_cyl")]
    pub t_cyl: f64,
    /// Water reference temperature, K.
    #[serde(rename = "T_w")]
    pub t_w: f64,
    /// Commanded flow before the actuator clamp, kg/s.
    pub mdot_cmd: f64,
    /// Delivered flow, kg/s.
    pub mdot_actual: f64,
    /// Heat flow into the water, W.
    #[serde(rename = "Q_dot")]
    pub q_dot: f64,
    /// Hydraulic pumping power, W.
    #[serde(rename = "P_hyd")]
    pub p_hyd: f64,
}

/// Lap statistics over the metrics window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LapMetrics {
    #[serde(rename = "mean_T_cyl")]
    pub mean_t_cyl: f64,
    #[serde(rename = "std_T_cyl")]
    pub std_t_cyl: f64,
    #[serde(rename = "max_T_cyl")]
    pub max_t_cyl: f64,
    #[serde(rename = "min_T_cyl")]
    pub min_t_cyl: f64,
    #[serde(rename = "mean_Q_dot")]
    pub mean_q_dot: f64,
    pub mean_hydraulic_power: f64,
    pub max_hydraulic_power: f64,
    /// Filled by [`heat_saving`]; absent on standalone runs.
    pub heat_saving_vs_reference: Option<f64>,
    /// Fraction of the lap with the flow demand saturated low.
    pub fraction_at_mdot_min: f64,
    /// Fraction of the lap with the flow demand saturated high.
    pub fraction_at_mdot_max: f64,
    /// Fraction of the lap with the flow at or below the laminar-transition
    /// proxy threshold.
    pub fraction_below_re_limit: f64,
    /// Identity hash of the driving trace.
    pub trace_id: u64,
}

/// Everything a lap simulation produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Decimated state series of the measured lap.
    pub series: Vec<TimeSeriesRow>,
    /// Metrics over the measured lap (warm-up window excluded).
    pub metrics: LapMetrics,
    /// Temperature extremes over the whole run including warm-up, K.
    pub t_cyl_bounds_full: (f64, f64),
    /// Relative closure error of the lump energy balance.
    pub energy_residual_rel: f64,
    /// Number of laps simulated (> 1 only when looping to periodicity).
    pub laps_run: usize,
}

struct StageInput {
    alpha_c: f64,
    t_mod: f64,
    alpha_w: f64,
    mdot: f64,
}

/// Simulates the closed loop over the trace.
pub fn simulate_lap(
    trace: &LapTrace,
    spec: &ControllerSpec,
    plant: &ThermalPlantParams,
    pump: &PumpParams,
    heat: &HeatInputModel,
    settings: &SimulationSettings,
) -> Result<SimulationResult> {
    plant.validate()?;
    pump.validate()?;
    heat.validate()?;
    settings.validate(pump)?;
    spec.schedule.validate(plant)?;
    if spec.strategy == Strategy::Mechanical && !(spec.mechanical_ratio > 0.0) {
        return Err(Error::Config(format!(
            "mechanical strategy requires a positive pump ratio, got {}",
            spec.mechanical_ratio
        )));
    }

    let dt = settings.dt;
    let t0 = trace.start_time();
    let steps = (trace.duration() / dt).round().max(1.0) as usize;
    let warmup = settings.warmup_tau_factor * plant.areal_heat_capacity() / plant.alpha_ref;
    let discretization = PidDiscretization::for_pump(pump);
    let trace_id = trace.id_hash();

    // Pump trajectory factors within one step (exact discretization).
    let decay_full = (-dt / pump.tau_p).exp();
    let decay_half = (-0.5 * dt / pump.tau_p).exp();

    // Initial condition: steady state under the trace's first sample and
    // the strategy's initial command, so lap statistics are not polluted
    // by an artificial start-up transient.
    let mut cursor = trace.cursor();
    let first = cursor.sample_at(t0);
    let mut controller = ControllerState::default();
    let (alpha_c0, t_mod0) = heat.boundary_condition(&first);
    let cmd0 = match spec.strategy {
        Strategy::Mechanical => spec.mechanical_ratio * first.n,
        Strategy::Pid => pump.mid_flow(),
        Strategy::FeedForward | Strategy::Combined => {
            feed_forward_flow_unclamped(&first, target_for(&first, &spec.schedule), heat, plant)?
        }
    };
    let mut pump_state = pump.settled_state(cmd0);
    let mut saturation = Saturation::of_command(cmd0, pump);
    let mut t_cyl = steady_state_temperature(alpha_c0, t_mod0, pump_state.mdot_actual, plant)?;

    let mut t_global = t0;
    let mut laps_run = 0;
    let mut previous_mean: Option<f64> = None;
    let mut last_raw_cmd = cmd0;
    let mut lap = LapRecorder::new(steps, settings, pump, plant, trace_id);

    for lap_index in 0..settings.max_laps {
        laps_run = lap_index + 1;
        cursor.reset();
        let first_sample = cursor.sample_at(t0);
        lap.start(t_global, t_cyl, pump_state, last_raw_cmd, warmup, heat, first_sample);

        for k in 0..steps {
            let t_lap = t0 + k as f64 * dt;
            let sample = cursor.sample_at(t_lap);
            let target = target_for(&sample, &spec.schedule);

            // Controller (zero-order hold over the step).
            let raw_cmd = match spec.strategy {
                Strategy::Mechanical => mechanical_pump_flow(&sample, spec.mechanical_ratio, pump),
                Strategy::FeedForward => {
                    feed_forward_flow_unclamped(&sample, target, heat, plant)?
                }
                Strategy::Pid => {
                    let (delta, next) = pid_step(
                        &controller,
                        target - t_cyl,
                        dt,
                        &spec.gains,
                        &discretization,
                        saturation,
                    );
                    controller = next;
                    pump.mid_flow() + delta
                }
                Strategy::Combined => {
                    let nominal =
                        pump.clamp(feed_forward_flow_unclamped(&sample, target, heat, plant)?);
                    let (delta, next) = pid_step(
                        &controller,
                        target - t_cyl,
                        dt,
                        &spec.gains,
                        &discretization,
                        saturation,
                    );
                    controller = next;
                    nominal + delta
                }
            };
            saturation = Saturation::of_command(raw_cmd, pump);
            last_raw_cmd = raw_cmd;
            let command = pump.clamp(raw_cmd);

            // Exact pump trajectory over the step.
            let mdot_start = pump_state.mdot_actual;
            let mdot_half = command + (mdot_start - command) * decay_half;
            let mdot_end = command + (mdot_start - command) * decay_full;
            pump_state = PumpState { mdot_actual: pump.clamp(mdot_end) };

            // RK4 stages with inputs evaluated at the stage times.
            let t_half = t_lap + 0.5 * dt;
            let t_end = t_lap + dt;
            let stage_start = stage_input(heat, &sample, mdot_start, plant)?;
            let sample_half = cursor.sample_at(t_half);
            let stage_half = stage_input(heat, &sample_half, mdot_half, plant)?;
            let sample_end = cursor.sample_at(t_end);
            let stage_end = stage_input(heat, &sample_end, pump_state.mdot_actual, plant)?;

            let k1 = stage_rate(t_cyl, &stage_start, plant);
            let k2 = stage_rate(t_cyl + 0.5 * dt * k1, &stage_half, plant);
            let k3 = stage_rate(t_cyl + 0.5 * dt * k2, &stage_half, plant);
            let k4 = stage_rate(t_cyl + dt * k3, &stage_end, plant);
            t_cyl += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

            if !t_cyl.is_finite() {
                return Err(Error::Aborted {
                    t: t_global + (k + 1) as f64 * dt,
                    reason: "cylinder head temperature became non-finite".into(),
                });
            }

            lap.record_step(
                k,
                t_global + (k + 1) as f64 * dt,
                t_lap + dt - t0,
                t_cyl,
                raw_cmd,
                pump_state.mdot_actual,
                &stage_end,
            );
        }

        t_global += steps as f64 * dt;
        let mean = lap.window_mean();
        let periodic = previous_mean
            .map(|prev| ((mean - prev) / prev).abs() < settings.periodic_tol)
            .unwrap_or(false);
        previous_mean = Some(mean);
        if periodic || lap_index + 1 == settings.max_laps {
            break;
        }
    }

    Ok(lap.finish(laps_run))
}

fn stage_input(
    heat: &HeatInputModel,
    sample: &crate::trace::EngineSample,
    mdot: f64,
    plant: &ThermalPlantParams,
) -> Result<StageInput> {
    let (alpha_c, t_mod) = heat.boundary_condition(sample);
    Ok(StageInput {
        alpha_c,
        t_mod,
        alpha_w: water_htc(mdot, plant)?,
        mdot,
    })
}

fn stage_rate(t_cyl: f64, stage: &StageInput, plant: &ThermalPlantParams) -> f64 {
    let t_w = consistent_water_temperature(t_cyl, stage.alpha_w, stage.mdot, plant);
    temperature_rate(t_cyl, t_w, stage.alpha_w, stage.alpha_c, stage.t_mod, plant)
}

/// Accumulates the per-lap series and statistics.
struct LapRecorder<'a> {
    settings: &'a SimulationSettings,
    pump: &'a PumpParams,
    plant: &'a ThermalPlantParams,
    trace_id: u64,
    steps: usize,
    warmup: f64,
    series: Vec<TimeSeriesRow>,
    window_t: Vec<f64>,
    window_q: Vec<f64>,
    window_p: Vec<f64>,
    window_flux: Vec<f64>,
    sat_min_steps: usize,
    sat_max_steps: usize,
    re_steps: usize,
    window_steps: usize,
    full_min: f64,
    full_max: f64,
}

impl<'a> LapRecorder<'a> {
    fn new(
        steps: usize,
        settings: &'a SimulationSettings,
        pump: &'a PumpParams,
        plant: &'a ThermalPlantParams,
        trace_id: u64,
    ) -> Self {
        Self {
            settings,
            pump,
            plant,
            trace_id,
            steps,
            warmup: 0.0,
            series: Vec::new(),
            window_t: Vec::new(),
            window_q: Vec::new(),
            window_p: Vec::new(),
            window_flux: Vec::new(),
            sat_min_steps: 0,
            sat_max_steps: 0,
            re_steps: 0,
            window_steps: 0,
            full_min: f64::INFINITY,
            full_max: f64::NEG_INFINITY,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn start(
        &mut self,
        t_global: f64,
        t_cyl: f64,
        pump_state: PumpState,
        cmd: f64,
        warmup: f64,
        heat: &HeatInputModel,
        first: crate::trace::EngineSample,
    ) {
        self.warmup = warmup;
        self.series.clear();
        self.window_t.clear();
        self.window_q.clear();
        self.window_p.clear();
        self.window_flux.clear();
        self.sat_min_steps = 0;
        self.sat_max_steps = 0;
        self.re_steps = 0;
        self.window_steps = 0;

        let mdot = pump_state.mdot_actual;
        let alpha_w = water_htc(mdot, self.plant).expect("pump state within limits");
        let t_w = consistent_water_temperature(t_cyl, alpha_w, mdot, self.plant);
        let q_dot = alpha_w * (t_cyl - t_w) * self.plant.wetted_area;
        let (alpha_c, t_mod) = heat.boundary_condition(&first);
        self.full_min = self.full_min.min(t_cyl);
        self.full_max = self.full_max.max(t_cyl);
        self.series.push(TimeSeriesRow {
            t: t_global,
            t_cyl,
            t_w,
            mdot_cmd: cmd,
            mdot_actual: mdot,
            q_dot,
            p_hyd: hydraulic_power(mdot, self.pump.hydraulic_coeff),
        });
        if self.warmup <= 0.0 {
            self.push_window(t_cyl, q_dot, hydraulic_power(mdot, self.pump.hydraulic_coeff));
            self.window_flux.push(
                self.plant.chi * alpha_c * (t_mod - t_cyl) + alpha_w * (t_w - t_cyl),
            );
        }
    }

    fn push_window(&mut self, t_cyl: f64, q_dot: f64, p_hyd: f64) {
        self.window_t.push(t_cyl);
        self.window_q.push(q_dot);
        self.window_p.push(p_hyd);
    }

    #[allow(clippy::too_many_arguments)]
    fn record_step(
        &mut self,
        k: usize,
        t_global: f64,
        t_lap_elapsed: f64,
        t_cyl: f64,
        raw_cmd: f64,
        mdot: f64,
        stage_end: &StageInput,
    ) {
        let t_w = consistent_water_temperature(t_cyl, stage_end.alpha_w, mdot, self.plant);
        let q_dot = stage_end.alpha_w * (t_cyl - t_w) * self.plant.wetted_area;
        let p_hyd = hydraulic_power(mdot, self.pump.hydraulic_coeff);
        self.full_min = self.full_min.min(t_cyl);
        self.full_max = self.full_max.max(t_cyl);

        let last = k + 1 == self.steps;
        if (k + 1) % self.settings.decimation == 0 || last {
            self.series.push(TimeSeriesRow {
                t: t_global,
                t_cyl,
                t_w,
                mdot_cmd: raw_cmd,
                mdot_actual: mdot,
                q_dot,
                p_hyd,
            });
        }

        if t_lap_elapsed >= self.warmup {
            self.push_window(t_cyl, q_dot, p_hyd);
            self.window_flux.push(
                self.plant.chi * stage_end.alpha_c * (stage_end.t_mod - t_cyl)
                    + stage_end.alpha_w * (t_w - t_cyl),
            );
            self.window_steps += 1;
            if raw_cmd >= self.pump.mdot_max {
                self.sat_max_steps += 1;
            } else if raw_cmd <= self.pump.mdot_min {
                self.sat_min_steps += 1;
            }
            if mdot <= self.settings.re_limit_mdot {
                self.re_steps += 1;
            }
        }
    }

    fn window_mean(&self) -> f64 {
        self.window_t.iter().sum::<f64>() / self.window_t.len() as f64
    }

    fn finish(self, laps_run: usize) -> SimulationResult {
        let n = self.window_t.len() as f64;
        let mean_t = self.window_t.iter().sum::<f64>() / n;
        let var = self
            .window_t
            .iter()
            .map(|t| (t - mean_t) * (t - mean_t))
            .sum::<f64>()
            / n;
        let max_t = self.window_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_t = self.window_t.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean_q = self.window_q.iter().sum::<f64>() / n;
        let mean_p = self.window_p.iter().sum::<f64>() / n;
        let max_p = self.window_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        // Energy bookkeeping over the window: C_v·ρ·Δx·ΔT must equal the
        // time integral of the net flux density (trapezoid rule).
        let dt = self.settings.dt;
        let cap = self.plant.areal_heat_capacity();
        let mut integral = 0.0;
        let mut gross = 0.0;
        for pair in self.window_flux.windows(2) {
            integral += 0.5 * (pair[0] + pair[1]) * dt;
            gross += 0.5 * (pair[0].abs() + pair[1].abs()) * dt;
        }
        let stored = cap * (self.window_t[self.window_t.len() - 1] - self.window_t[0]);
        let energy_residual_rel = if gross > 0.0 {
            (integral - stored).abs() / gross
        } else {
            0.0
        };

        let denom = self.window_steps.max(1) as f64;
        SimulationResult {
            series: self.series,
            metrics: LapMetrics {
                mean_t_cyl: mean_t,
                std_t_cyl: var.sqrt(),
                max_t_cyl: max_t,
                min_t_cyl: min_t,
                mean_q_dot: mean_q,
                mean_hydraulic_power: mean_p,
                max_hydraulic_power: max_p,
                heat_saving_vs_reference: None,
                fraction_at_mdot_min: self.sat_min_steps as f64 / denom,
                fraction_at_mdot_max: self.sat_max_steps as f64 / denom,
                fraction_below_re_limit: self.re_steps as f64 / denom,
                trace_id: self.trace_id,
            },
            t_cyl_bounds_full: (self.full_min, self.full_max),
            energy_residual_rel,
            laps_run,
        }
    }
}

/// Mean heat flow saved by `candidate` relative to `reference`, W.
pub fn heat_saving(candidate: &LapMetrics, reference: &LapMetrics) -> Result<f64> {
    if candidate.trace_id != reference.trace_id {
        return Err(Error::TraceMismatch {
            candidate: candidate.trace_id,
            reference: reference.trace_id,
        });
    }
    Ok(reference.mean_q_dot - candidate.mean_q_dot)
}

/// One row of the feasible-range study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangePoint {
    /// Commanded target temperature, K.
    pub target: f64,
    #[serde(rename = "mean_T_cyl")]
    pub mean_t_cyl: f64,
    #[serde(rename = "std_T_cyl")]
    pub std_t_cyl: f64,
    pub fraction_at_mdot_min: f64,
    pub fraction_at_mdot_max: f64,
    /// True when the flow demand was pinned at a bound for more than 90 %
    /// of the lap: the target sits outside the feasible range.
    pub saturated: bool,
}

/// Runs one PID lap per target temperature and reports the achieved
/// statistics. Targets must be sorted ascending.
#[allow(clippy::too_many_arguments)]
pub fn feasible_range_sweep(
    targets: &[f64],
    gains: &crate::control::PidGains,
    trace: &LapTrace,
    plant: &ThermalPlantParams,
    pump: &PumpParams,
    heat: &HeatInputModel,
    settings: &SimulationSettings,
) -> Result<Vec<RangePoint>> {
    if targets.is_empty() {
        return Err(Error::Config("feasible-range sweep needs at least one target".into()));
    }
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("feasible-range targets must be sorted ascending".into()));
    }
    let mut points = Vec::with_capacity(targets.len());
    for &target in targets {
        let spec = ControllerSpec {
            strategy: Strategy::Pid,
            gains: *gains,
            schedule: crate::control::TargetSchedule::constant(target),
            mechanical_ratio: 0.0,
        };
        let result = simulate_lap(trace, &spec, plant, pump, heat, settings)?;
        let m = result.metrics;
        points.push(RangePoint {
            target,
            mean_t_cyl: m.mean_t_cyl,
            std_t_cyl: m.std_t_cyl,
            fraction_at_mdot_min: m.fraction_at_mdot_min,
            fraction_at_mdot_max: m.fraction_at_mdot_max,
            saturated: m.fraction_at_mdot_min > 0.9 || m.fraction_at_mdot_max > 0.9,
        });
    }
    Ok(points)
}

/// Result of the mechanical-pump ratio calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalCalibration {
    /// Transmission ratio, kg/s per rpm.
    pub ratio: f64,
    /// Lap maximum temperature achieved at that ratio, K.
    #[serde(rename = "max_T_cyl")]
    pub max_t_cyl: f64,
    pub iterations: usize,
}

const CALIBRATION_ITERATIONS: usize = 20;
const CALIBRATION_TOL: f64 = 0.1;

/// Bisects the mechanical pump ratio until the lap maximum temperature
/// hits `target_max` (± 0.1 K). The maximum is monotonically decreasing
/// in the ratio, so plain bisection suffices.
pub fn calibrate_mechanical_ratio(
    trace: &LapTrace,
    plant: &ThermalPlantParams,
    pump: &PumpParams,
    heat: &HeatInputModel,
    settings: &SimulationSettings,
    target_max: f64,
) -> Result<MechanicalCalibration> {
    let max_at = |ratio: f64| -> Result<f64> {
        let spec = ControllerSpec {
            strategy: Strategy::Mechanical,
            gains: crate::control::PidGains { k_p: 0.0, k_i: 0.0, k_d: 0.0 },
            schedule: crate::control::TargetSchedule::constant(target_max),
            mechanical_ratio: ratio,
        };
        Ok(simulate_lap(trace, &spec, plant, pump, heat, settings)?.metrics.max_t_cyl)
    };

    let (mut lo, mut hi) = (1e-5, 5e-3);
    let max_lo = max_at(lo)?;
    let max_hi = max_at(hi)?;
    if !(max_lo >= target_max && max_hi <= target_max) {
        return Err(Error::Config(format!(
            "target maximum {target_max} K is not bracketed by the ratio range: \
             max(T) spans [{max_hi:.1}, {max_lo:.1}] K"
        )));
    }

    let mut mid = 0.5 * (lo + hi);
    let mut achieved = max_at(mid)?;
    for _ in 0..CALIBRATION_ITERATIONS {
        if achieved > target_max {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        achieved = max_at(mid)?;
        if (achieved - target_max).abs() < 0.5 * CALIBRATION_TOL {
            break;
        }
    }
    if (achieved - target_max).abs() > CALIBRATION_TOL {
        return Err(Error::Convergence(format!(
            "mechanical ratio bisection stalled at max T = {achieved:.2} K \
             (target {target_max} K)"
        )));
    }
    Ok(MechanicalCalibration {
        ratio: mid,
        max_t_cyl: achieved,
        iterations: CALIBRATION_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{PidGains, TargetSchedule};
    use approx::assert_abs_diff_eq;

    fn defaults() -> (ThermalPlantParams, PumpParams, HeatInputModel, SimulationSettings) {
        (
            ThermalPlantParams::default(),
            PumpParams::default(),
            HeatInputModel::default(),
            SimulationSettings::default(),
        )
    }

    fn pid_spec(target: f64) -> ControllerSpec {
        ControllerSpec {
            strategy: Strategy::Pid,
            gains: PidGains { k_p: -1.4, k_i: -0.05, k_d: -1.0 },
            schedule: TargetSchedule::constant(target),
            mechanical_ratio: 0.0,
        }
    }

    /// Constant-input trace: speed fixed, one token coasting sample at the
    /// very end so the trace invariants hold while the lap is effectively
    /// a single fired operating point.
    fn constant_trace(n: f64, seconds: f64) -> LapTrace {
        let mut samples = Vec::new();
        let count = (seconds * 2.0) as usize;
        for k in 0..count {
            samples.push(crate::trace::EngineSample {
                t: k as f64 * 0.5,
                n,
                fired: true,
            });
        }
        samples.push(crate::trace::EngineSample {
            t: count as f64 * 0.5,
            n,
            fired: false,
        });
        LapTrace::new(samples).unwrap()
    }

    #[test]
    fn constant_trace_converges_to_analytic_steady_state() {
        let (plant, pump, heat, mut settings) = defaults();
        settings.warmup_tau_factor = 0.0;
        let trace = constant_trace(5000.0, 60.0);
        let ratio = 5e-4;
        let spec = ControllerSpec {
            strategy: Strategy::Mechanical,
            gains: PidGains { k_p: 0.0, k_i: 0.0, k_d: 0.0 },
            schedule: TargetSchedule::constant(407.0),
            mechanical_ratio: ratio,
        };
        let result = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();

        let sample = crate::trace::EngineSample { t: 0.0, n: 5000.0, fired: true };
        let (alpha_c, t_mod) = heat.boundary_condition(&sample);
        let mdot = pump.clamp(ratio * 5000.0);
        let expected = steady_state_temperature(alpha_c, t_mod, mdot, &plant).unwrap();

        // After ten engine time constants the trajectory must sit on the
        // fixed point.
        let tau_e = plant.areal_heat_capacity() / water_htc(mdot, &plant).unwrap();
        let late = result
            .series
            .iter()
            .filter(|row| row.t > 10.0 * tau_e)
            .collect::<Vec<_>>();
        assert!(!late.is_empty());
        for row in late {
            assert!(
                (row.t_cyl - expected).abs() < 0.1,
                "t = {}: {} vs steady state {}",
                row.t,
                row.t_cyl,
                expected
            );
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let spec = pid_spec(407.0);
        let a = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        let b = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        assert_eq!(a.metrics.mean_t_cyl.to_bits(), b.metrics.mean_t_cyl.to_bits());
        assert_eq!(a.metrics.std_t_cyl.to_bits(), b.metrics.std_t_cyl.to_bits());
        assert_eq!(a.series.len(), b.series.len());
        for (ra, rb) in a.series.iter().zip(&b.series) {
            assert_eq!(ra.t_cyl.to_bits(), rb.t_cyl.to_bits());
            assert_eq!(ra.mdot_actual.to_bits(), rb.mdot_actual.to_bits());
        }
    }

    #[test]
    fn decimation_does_not_alter_metrics() {
        let (plant, pump, heat, mut settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let spec = pid_spec(407.0);
        settings.decimation = 1;
        let fine = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        settings.decimation = 250;
        let coarse = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        assert_eq!(
            fine.metrics.mean_t_cyl.to_bits(),
            coarse.metrics.mean_t_cyl.to_bits()
        );
        assert_eq!(
            fine.metrics.std_t_cyl.to_bits(),
            coarse.metrics.std_t_cyl.to_bits()
        );
        assert!(coarse.series.len() < fine.series.len());
    }

    #[test]
    fn emitted_rows_satisfy_state_invariants() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let spec = pid_spec(420.0);
        let result = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        for row in &result.series {
            assert!(row.mdot_actual >= pump.mdot_min && row.mdot_actual <= pump.mdot_max);
            assert!(row.t_cyl > 0.0 && row.t_w > 0.0);
            // The recorded water temperature must be consistent with the
            // recorded heat flow.
            let expected =
                crate::plant::water_temperature(row.q_dot, row.mdot_actual, &plant).unwrap();
            assert_abs_diff_eq!(row.t_w, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn energy_balance_closes() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        for spec in [pid_spec(407.0), pid_spec(460.0)] {
            let result = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
            assert!(
                result.energy_residual_rel < 1e-3,
                "energy residual {} too large",
                result.energy_residual_rel
            );
        }
    }

    #[test]
    fn heat_saving_requires_matching_traces() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let spec = pid_spec(407.0);
        let a = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        assert_eq!(heat_saving(&a.metrics, &a.metrics).unwrap(), 0.0);

        let other = constant_trace(5000.0, 30.0);
        let b = simulate_lap(&other, &spec, &plant, &pump, &heat, &settings).unwrap();
        assert!(matches!(
            heat_saving(&a.metrics, &b.metrics),
            Err(Error::TraceMismatch { .. })
        ));
    }

    #[test]
    fn range_sweep_means_are_monotone_in_target() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let gains = PidGains { k_p: -1.4, k_i: -0.05, k_d: -1.0 };
        let targets: Vec<f64> = (0..10).map(|i| 380.0 + 14.0 * f64::from(i)).collect();
        let points =
            feasible_range_sweep(&targets, &gains, &trace, &plant, &pump, &heat, &settings)
                .unwrap();
        for pair in points.windows(2) {
            assert!(
                pair[1].mean_t_cyl >= pair[0].mean_t_cyl - 1e-9,
                "mean not monotone: {} K target {} vs {} K target {}",
                pair[0].mean_t_cyl,
                pair[0].target,
                pair[1].mean_t_cyl,
                pair[1].target
            );
        }
        // Far-out targets saturate the actuator.
        assert!(points[0].fraction_at_mdot_max > 0.9, "floor target must pin the flow high");
        assert!(
            points[points.len() - 1].fraction_at_mdot_min > 0.9,
            "ceiling target must pin the flow low"
        );
    }

    #[test]
    #[ignore]
    fn diag_range_surface() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let gains = PidGains { k_p: -1.4, k_i: -0.05, k_d: -1.0 };
        let targets: Vec<f64> = (0..14).map(|i| 380.0 + 10.0 * f64::from(i)).collect();
        let points =
            feasible_range_sweep(&targets, &gains, &trace, &plant, &pump, &heat, &settings)
                .unwrap();
        for p in &points {
            println!(
                "target {:6.1}  mean {:7.2}  std {:6.2}  fmin {:5.3}  fmax {:5.3}",
                p.target, p.mean_t_cyl, p.std_t_cyl, p.fraction_at_mdot_min, p.fraction_at_mdot_max
            );
        }
        let cal = calibrate_mechanical_ratio(&trace, &plant, &pump, &heat, &settings, 407.0);
        match cal {
            Ok(c) => println!("mech ratio {:.6e} -> max {:.2}", c.ratio, c.max_t_cyl),
            Err(e) => println!("mech calibration failed: {e}"),
        }
    }

    #[test]
    #[ignore]
    fn diag_strategy_comparison() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let gains = PidGains { k_p: -1.4, k_i: -0.05, k_d: -1.0 };
        let cal =
            calibrate_mechanical_ratio(&trace, &plant, &pump, &heat, &settings, 407.0).unwrap();
        let mech = simulate_lap(
            &trace,
            &ControllerSpec {
                strategy: Strategy::Mechanical,
                gains,
                schedule: TargetSchedule::constant(407.0),
                mechanical_ratio: cal.ratio,
            },
            &plant,
            &pump,
            &heat,
            &settings,
        )
        .unwrap();
        println!(
            "mech: max {:.2} mean {:.2} std {:.3} Q {:.0}",
            mech.metrics.max_t_cyl,
            mech.metrics.mean_t_cyl,
            mech.metrics.std_t_cyl,
            mech.metrics.mean_q_dot
        );

        // Bisect per-strategy constant target so lap max = 407.
        for strategy in [Strategy::FeedForward, Strategy::Pid, Strategy::Combined] {
            let max_at = |target: f64| {
                simulate_lap(
                    &trace,
                    &ControllerSpec {
                        strategy,
                        gains,
                        schedule: TargetSchedule::constant(target),
                        mechanical_ratio: cal.ratio,
                    },
                    &plant,
                    &pump,
                    &heat,
                    &settings,
                )
                .unwrap()
            };
            let (mut lo, mut hi) = (380.0, 430.0);
            for _ in 0..25 {
                let mid = 0.5 * (lo + hi);
                if max_at(mid).metrics.max_t_cyl > 407.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let target = 0.5 * (lo + hi);
            let run = max_at(target);
            let saving = heat_saving(&run.metrics, &mech.metrics).unwrap();
            println!(
                "{:12} target {:.2}: max {:.2} mean {:.2} std {:.3} Q {:.0} saving {:.0} W ({:.2}%)",
                strategy.name(),
                target,
                run.metrics.max_t_cyl,
                run.metrics.mean_t_cyl,
                run.metrics.std_t_cyl,
                run.metrics.mean_q_dot,
                saving,
                100.0 * saving / mech.metrics.mean_q_dot
            );
        }

        for (label, g) in [
            ("comb kP-1.4 kI-.05 kD0", PidGains { k_p: -1.4, k_i: -0.05, k_d: 0.0 }),
            ("comb kP-1.4 kI-.1  kD0", PidGains { k_p: -1.4, k_i: -0.1, k_d: 0.0 }),
            ("comb kP-0.5 kI-.1  kD0", PidGains { k_p: -0.5, k_i: -0.1, k_d: 0.0 }),
            ("comb kP-0.3 kI-.05 kD0", PidGains { k_p: -0.3, k_i: -0.05, k_d: 0.0 }),
            ("comb kessler tc2", PidGains { k_p: -0.119, k_i: -0.031, k_d: -0.0227 }),
            (
                "comb kessler tc5",
                PidGains { k_p: -0.047763, k_i: -0.012422, k_d: -0.0090556 },
            ),
            (
                "comb kessler tc10",
                PidGains { k_p: -0.023881, k_i: -0.0062112, k_d: -0.0045278 },
            ),
            ("comb kI only -.02", PidGains { k_p: 0.0, k_i: -0.02, k_d: 0.0 }),
            ("comb kI only -.05", PidGains { k_p: 0.0, k_i: -0.05, k_d: 0.0 }),
            ("comb P only -.3", PidGains { k_p: -0.3, k_i: 0.0, k_d: 0.0 }),
            ("comb P only -.6", PidGains { k_p: -0.6, k_i: 0.0, k_d: 0.0 }),
            ("comb P only -1.4", PidGains { k_p: -1.4, k_i: 0.0, k_d: 0.0 }),
            ("comb P only -3", PidGains { k_p: -3.0, k_i: 0.0, k_d: 0.0 }),
            ("comb P-.6 I-.002", PidGains { k_p: -0.6, k_i: -0.002, k_d: 0.0 }),
            ("comb P-1.4 I-.005", PidGains { k_p: -1.4, k_i: -0.005, k_d: 0.0 }),
            ("comb PD -.6/-.3", PidGains { k_p: -0.6, k_i: 0.0, k_d: -0.3 }),
            ("comb PID -1.4/-.005/-1", PidGains { k_p: -1.4, k_i: -0.005, k_d: -1.0 }),
        ] {
            let max_at = |target: f64| {
                simulate_lap(
                    &trace,
                    &ControllerSpec {
                        strategy: Strategy::Combined,
                        gains: g,
                        schedule: TargetSchedule::constant(target),
                        mechanical_ratio: cal.ratio,
                    },
                    &plant,
                    &pump,
                    &heat,
                    &settings,
                )
                .unwrap()
            };
            let (mut lo, mut hi) = (380.0, 430.0);
            for _ in 0..25 {
                let mid = 0.5 * (lo + hi);
                if max_at(mid).metrics.max_t_cyl > 407.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let target = 0.5 * (lo + hi);
            let run = max_at(target);
            let saving = heat_saving(&run.metrics, &mech.metrics).unwrap();
            println!(
                "{label} target {:.2}: max {:.2} mean {:.2} std {:.3} saving {:.2}%",
                target,
                run.metrics.max_t_cyl,
                run.metrics.mean_t_cyl,
                run.metrics.std_t_cyl,
                100.0 * saving / mech.metrics.mean_q_dot
            );
        }

        // Temperature shift 407 -> 470 with the combined strategy.
        let shifted = simulate_lap(
            &trace,
            &ControllerSpec {
                strategy: Strategy::Combined,
                gains,
                schedule: TargetSchedule::constant(470.0),
                mechanical_ratio: cal.ratio,
            },
            &plant,
            &pump,
            &heat,
            &settings,
        )
        .unwrap();
        let saving = heat_saving(&shifted.metrics, &mech.metrics).unwrap();
        println!(
            "combined@470: max {:.2} mean {:.2} std {:.3} Q {:.0} saving {:.0} W ({:.2}%)",
            shifted.metrics.max_t_cyl,
            shifted.metrics.mean_t_cyl,
            shifted.metrics.std_t_cyl,
            shifted.metrics.mean_q_dot,
            saving,
            100.0 * saving / mech.metrics.mean_q_dot
        );
    }

    #[test]
    #[ignore]
    fn diag_trajectories() {
        let (plant, pump, heat, mut settings) = defaults();
        settings.decimation = 500; // 0.5 s resolution
        let trace = LapTrace::synthetic_default();
        let run = |strategy: Strategy, gains: PidGains, target: f64| {
            simulate_lap(
                &trace,
                &ControllerSpec {
                    strategy,
                    gains,
                    schedule: TargetSchedule::constant(target),
                    mechanical_ratio: 4.4126e-4,
                },
                &plant,
                &pump,
                &heat,
                &settings,
            )
            .unwrap()
        };
        let ff = run(
            Strategy::FeedForward,
            PidGains { k_p: 0.0, k_i: 0.0, k_d: 0.0 },
            403.67,
        );
        let comb = run(
            Strategy::Combined,
            PidGains { k_p: -1.4, k_i: 0.0, k_d: 0.0 },
            406.42,
        );
        println!("t      ff_T    ff_m   comb_T  comb_m  fired");
        let mut cursor = trace.cursor();
        for (a, b) in ff.series.iter().zip(&comb.series) {
            let s = cursor.sample_at(a.t.min(90.0));
            println!(
                "{:5.1}  {:7.2} {:5.2}  {:7.2} {:5.2}  {}",
                a.t,
                a.t_cyl,
                a.mdot_actual,
                b.t_cyl,
                b.mdot_actual,
                if s.fired { "F" } else { "." }
            );
        }
        println!(
            "ff   mean {:.2} std {:.3} min {:.2} max {:.2}",
            ff.metrics.mean_t_cyl, ff.metrics.std_t_cyl, ff.metrics.min_t_cyl, ff.metrics.max_t_cyl
        );
        println!(
            "comb mean {:.2} std {:.3} min {:.2} max {:.2}",
            comb.metrics.mean_t_cyl,
            comb.metrics.std_t_cyl,
            comb.metrics.min_t_cyl,
            comb.metrics.max_t_cyl
        );
    }

    #[test]
    fn rejects_unsorted_targets() {
        let (plant, pump, heat, settings) = defaults();
        let trace = LapTrace::synthetic_default();
        let gains = PidGains { k_p: -1.4, k_i: -0.05, k_d: -1.0 };
        assert!(feasible_range_sweep(
            &[420.0, 400.0],
            &gains,
            &trace,
            &plant,
            &pump,
            &heat,
            &settings
        )
        .is_err());
    }

    #[test]
    fn looping_reaches_periodicity() {
        let (plant, pump, heat, mut settings) = defaults();
        settings.max_laps = 6;
        let trace = LapTrace::synthetic_default();
        let spec = pid_spec(407.0);
        let result = simulate_lap(&trace, &spec, &plant, &pump, &heat, &settings).unwrap();
        assert!(result.laps_run >= 2, "looping must run at least a second lap");
        assert!(result.laps_run <= 6);
    }
}
