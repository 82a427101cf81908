//! Gain-space sweeps: temperature regularity vs. hydraulic power.
//!
//! The controller gains are varied systematically (full grid) or by
//! stratified random sampling, one closed-loop lap per point. Unstable
//! runs are recorded with sentinel metrics rather than dropped, so the
//! divergence region stays visible in the resulting surface. The Pareto
//! set over (temperature standard deviation, mean hydraulic power) and a
//! scalarized recommendation summarize the sweep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControllerSpec, PidGains, Strategy, TargetSchedule};
use crate::error::{Error, Result};
use crate::heat::HeatInputModel;
use crate::plant::ThermalPlantParams;
use crate::pump::PumpParams;
use crate::simulator::{simulate_lap, LapMetrics, SimulationSettings};
use crate::trace::LapTrace;

/// Runs considered stable must keep the temperature inside this window, K.
pub const STABILITY_RANGE: (f64, f64) = (300.0, 700.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Grid,
    Random,
}

/// One swept gain axis. `count` grid values span `[min, max]` inclusive;
/// a count of 1 pins the axis at `min` (degenerate single-point axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min <= self.max) {
            return Err(Error::Config(format!(
                "sweep axis {name}: min {} must not exceed max {}",
                self.min, self.max
            )));
        }
        if self.count == 0 {
            return Err(Error::Config(format!("sweep axis {name}: count must be >= 1")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub k_p: AxisSpec,
    pub k_i: AxisSpec,
    pub k_d: AxisSpec,
    pub target: TargetSchedule,
    pub seed: u64,
    pub mode: SweepMode,
    /// Number of points in random mode.
    pub samples: usize,
    /// Strategy evaluated at each point (feedback path carries the gains).
    pub strategy: Strategy,
    /// Scalarization weights (std, power) for the recommendation.
    pub weights: (f64, f64),
}

impl Default for SweepSpec {
    fn default() -> Self {
        // Ranges centered on the published operating region; the axes are
        // plotted but not tabulated, so the bounds are a documented choice.
        Self {
            k_p: AxisSpec { min: -3.0, max: 0.0, count: 21 },
            k_i: AxisSpec { min: -0.3, max: 0.0, count: 21 },
            k_d: AxisSpec { min: -2.0, max: 0.0, count: 21 },
            target: TargetSchedule::constant(407.0),
            seed: 42,
            mode: SweepMode::Grid,
            samples: 1000,
            strategy: Strategy::Pid,
            weights: (1.0, 1.0),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.k_p.validate("k_p")?;
        self.k_i.validate("k_i")?;
        self.k_d.validate("k_d")?;
        if self.mode == SweepMode::Random && self.samples == 0 {
            return Err(Error::Config("sweep.samples must be >= 1 in random mode".into()));
        }
        if !matches!(self.strategy, Strategy::Pid | Strategy::Combined) {
            return Err(Error::Config(
                "sweep.strategy must carry a feedback path (pid or combined)".into(),
            ));
        }
        if self.weights.0 < 0.0 || self.weights.1 < 0.0
            || (self.weights.0 == 0.0 && self.weights.1 == 0.0)
        {
            return Err(Error::Config(
                "sweep.weights must be non-negative and not both zero".into(),
            ));
        }
        Ok(())
    }

    /// Non-fatal advisories: the plant gain is negative, so positive gain
    /// ranges fight the physics.
    pub fn sign_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (name, axis) in [("k_p", &self.k_p), ("k_i", &self.k_i), ("k_d", &self.k_d)] {
            if axis.max > 0.0 {
                warnings.push(format!(
                    "sweep axis {name} admits positive values up to {}; the plant gain \
                     is negative, so positive gains destabilize the loop",
                    axis.max
                ));
            }
        }
        warnings
    }

    /// The gain tuples to evaluate, in deterministic order.
    pub fn points(&self) -> Vec<PidGains> {
        match self.mode {
            SweepMode::Grid => {
                let (ps, is, ds) = (self.k_p.values(), self.k_i.values(), self.k_d.values());
                let mut points = Vec::with_capacity(ps.len() * is.len() * ds.len());
                for &k_p in &ps {
                    for &k_i in &is {
                        for &k_d in &ds {
                            points.push(PidGains { k_p, k_i, k_d });
                        }
                    }
                }
                points
            }
            SweepMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let stratified = |axis: &AxisSpec, rng: &mut ChaCha8Rng| -> Vec<f64> {
                    let n = self.samples;
                    let width = (axis.max - axis.min) / n as f64;
                    let mut values: Vec<f64> = (0..n)
                        .map(|i| axis.min + (i as f64 + rng.gen::<f64>()) * width)
                        .collect();
                    // Fisher-Yates permutation decorrelates the dimensions.
                    for i in (1..n).rev() {
                        let j = rng.gen_range(0..=i);
                        values.swap(i, j);
                    }
                    values
                };
                let ps = stratified(&self.k_p, &mut rng);
                let is = stratified(&self.k_i, &mut rng);
                let ds = stratified(&self.k_d, &mut rng);
                (0..self.samples)
                    .map(|i| PidGains { k_p: ps[i], k_i: is[i], k_d: ds[i] })
                    .collect()
            }
        }
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(rename = "k_P")]
    pub k_p: f64,
    #[serde(rename = "k_I")]
    pub k_i: f64,
    #[serde(rename = "k_D")]
    pub k_d: f64,
    #[serde(flatten)]
    pub metrics: LapMetrics,
    pub stable: bool,
}

impl SweepPoint {
    pub fn gains(&self) -> PidGains {
        PidGains { k_p: self.k_p, k_i: self.k_i, k_d: self.k_d }
    }
}

/// Sweep outcome: all points plus the aggregate views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Indices of the Pareto set over (std_T_cyl, mean_hydraulic_power),
    /// both minimized, stable points only.
    pub pareto_indices: Vec<usize>,
    pub best_by_std: Option<usize>,
    pub best_by_power: Option<usize>,
}

/// Evaluates one lap per gain point. Unstable runs (aborted integration or
/// temperature leaving [300, 700] K) are marked, with NaN sentinel
/// metrics, and never silently dropped.
pub fn run_sweep(
    spec: &SweepSpec,
    trace: &LapTrace,
    plant: &ThermalPlantParams,
    pump: &PumpParams,
    heat: &HeatInputModel,
    settings: &SimulationSettings,
) -> Result<SweepResult> {
    spec.validate()?;
    let gains = spec.points();
    let trace_id = trace.id_hash();

    let points: Vec<SweepPoint> = gains
        .par_iter()
        .map(|g| -> Result<SweepPoint> {
            let controller = ControllerSpec {
                strategy: spec.strategy,
                gains: *g,
                schedule: spec.target,
                mechanical_ratio: 0.0,
            };
            match simulate_lap(trace, &controller, plant, pump, heat, settings) {
                Ok(result) => {
                    let (lo, hi) = result.t_cyl_bounds_full;
                    let stable = lo >= STABILITY_RANGE.0 && hi <= STABILITY_RANGE.1;
                    let metrics = if stable {
                        result.metrics
                    } else {
                        sentinel_metrics(trace_id)
                    };
                    Ok(SweepPoint {
                        k_p: g.k_p,
                        k_i: g.k_i,
                        k_d: g.k_d,
                        metrics,
                        stable,
                    })
                }
                Err(Error::Aborted { .. }) => Ok(SweepPoint {
                    k_p: g.k_p,
                    k_i: g.k_i,
                    k_d: g.k_d,
                    metrics: sentinel_metrics(trace_id),
                    stable: false,
                }),
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;

    if points.iter().all(|p| !p.stable) {
        return Err(Error::Sweep(format!(
            "none of the {} evaluated points produced a stable run",
            points.len()
        )));
    }

    let pareto_indices = pareto_front(&points);
    let best_by_std = argmin_stable(&points, |m| m.std_t_cyl);
    let best_by_power = argmin_stable(&points, |m| m.mean_hydraulic_power);
    Ok(SweepResult { points, pareto_indices, best_by_std, best_by_power })
}

fn sentinel_metrics(trace_id: u64) -> LapMetrics {
    LapMetrics {
        mean_t_cyl: f64::NAN,
        std_t_cyl: f64::NAN,
        max_t_cyl: f64::NAN,
        min_t_cyl: f64::NAN,
        mean_q_dot: f64::NAN,
        mean_hydraulic_power: f64::NAN,
        max_hydraulic_power: f64::NAN,
        heat_saving_vs_reference: None,
        fraction_at_mdot_min: f64::NAN,
        fraction_at_mdot_max: f64::NAN,
        fraction_below_re_limit: f64::NAN,
        trace_id,
    }
}

fn argmin_stable(points: &[SweepPoint], key: impl Fn(&LapMetrics) -> f64) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.stable)
        .min_by(|(_, a), (_, b)| {
            key(&a.metrics)
                .partial_cmp(&key(&b.metrics))
                .expect("stable metrics are finite")
        })
        .map(|(i, _)| i)
}

/// Skyline computation of the 2D Pareto front (both objectives minimized)
/// over the stable points. Returns indices in ascending order.
fn pareto_front(points: &[SweepPoint]) -> Vec<usize> {
    let mut stable: Vec<usize> = (0..points.len()).filter(|&i| points[i].stable).collect();
    // Sort by std ascending, power ascending as tiebreak.
    stable.sort_by(|&a, &b| {
        let (ma, mb) = (&points[a].metrics, &points[b].metrics);
        (ma.std_t_cyl, ma.mean_hydraulic_power)
            .partial_cmp(&(mb.std_t_cyl, mb.mean_hydraulic_power))
            .expect("stable metrics are finite")
    });

    let mut front = Vec::new();
    let mut best_power = f64::INFINITY;
    let mut last_kept: Option<(f64, f64)> = None;
    for &i in &stable {
        let m = &points[i].metrics;
        let pair = (m.std_t_cyl, m.mean_hydraulic_power);
        let keep = match last_kept {
            Some(kept) if kept == pair => true, // exact duplicate of a front point
            _ => m.mean_hydraulic_power < best_power,
        };
        if keep {
            best_power = best_power.min(m.mean_hydraulic_power);
            last_kept = Some(pair);
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Picks the Pareto point minimizing the weighted normalized objective
/// sum. Points with `k_I = 0` are excluded: without integral action the
/// closed loop cannot be stationarily accurate.
pub fn recommend_gains(result: &SweepResult, weights: (f64, f64)) -> Result<PidGains> {
    if weights.0 < 0.0 || weights.1 < 0.0 || (weights.0 == 0.0 && weights.1 == 0.0) {
        return Err(Error::Config(
            "recommendation weights must be non-negative and not both zero".into(),
        ));
    }
    let candidates: Vec<&SweepPoint> = result
        .pareto_indices
        .iter()
        .map(|&i| &result.points[i])
        .filter(|p| p.k_i != 0.0)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoRecommendation(
            "the Pareto set contains no stable point with integral action".into(),
        ));
    }

    let min_max = |key: fn(&LapMetrics) -> f64| -> (f64, f64) {
        let values = candidates.iter().map(|p| key(&p.metrics));
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (std_lo, std_hi) = min_max(|m| m.std_t_cyl);
    let (pow_lo, pow_hi) = min_max(|m| m.mean_hydraulic_power);
    let normalize = |value: f64, lo: f64, hi: f64| {
        if hi > lo {
            (value - lo) / (hi - lo)
        } else {
            0.0
        }
    };

    let best = candidates
        .iter()
        .min_by(|a, b| {
            let score = |p: &SweepPoint| {
                weights.0 * normalize(p.metrics.std_t_cyl, std_lo, std_hi)
                    + weights.1 * normalize(p.metrics.mean_hydraulic_power, pow_lo, pow_hi)
            };
            score(a).partial_cmp(&score(b)).expect("finite scores")
        })
        .expect("non-empty candidate set");
    Ok(best.gains())
}
