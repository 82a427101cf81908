//! File output: the schema contract for external plotting and analysis.
//!
//! - time series: CSV `t,T_cyl,T_w,mdot_cmd,mdot_actual,Q_dot,P_hyd`
//! - lap metrics: JSON with the field names of [`LapMetrics`]
//! - feasible range: CSV, one row per target
//! - sweep: CSV (one row per point: gains, metrics, stable flag) plus a
//!   JSON summary with the Pareto set and the recommendation

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::control::PidGains;
use crate::error::Result;
use crate::montecarlo::{SweepResult, SweepSpec};
use crate::simulator::{LapMetrics, RangePoint, TimeSeriesRow};

pub fn write_timeseries_csv<P: AsRef<Path>>(path: P, rows: &[TimeSeriesRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_metrics_json<P: AsRef<Path>>(path: P, metrics: &LapMetrics) -> Result<()> {
    write_pretty_json(path, metrics)
}

pub fn read_metrics_json<P: AsRef<Path>>(path: P) -> Result<LapMetrics> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_range_csv<P: AsRef<Path>>(path: P, points: &[RangePoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())?;
    for point in points {
        wtr.serialize(point)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sweep_csv<P: AsRef<Path>>(path: P, result: &SweepResult) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())?;
    for point in &result.points {
        wtr.serialize(point)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aggregate view persisted next to the full sweep CSV.
#[derive(Debug, Serialize)]
pub struct SweepSummary<'a> {
    pub evaluated: usize,
    pub stable: usize,
    pub pareto_indices: &'a [usize],
    pub best_by_std: Option<&'a crate::montecarlo::SweepPoint>,
    pub best_by_power: Option<&'a crate::montecarlo::SweepPoint>,
    pub recommended: Option<RecommendedGains>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecommendedGains {
    #[serde(rename = "k_P")]
    pub k_p: f64,
    #[serde(rename = "k_I")]
    pub k_i: f64,
    #[serde(rename = "k_D")]
    pub k_d: f64,
}

impl From<PidGains> for RecommendedGains {
    fn from(g: PidGains) -> Self {
        Self { k_p: g.k_p, k_i: g.k_i, k_d: g.k_d }
    }
}

pub fn write_sweep_summary_json<P: AsRef<Path>>(
    path: P,
    spec: &SweepSpec,
    result: &SweepResult,
) -> Result<()> {
    let recommended = crate::montecarlo::recommend_gains(result, spec.weights)
        .ok()
        .map(RecommendedGains::from);
    let summary = SweepSummary {
        evaluated: result.points.len(),
        stable: result.points.iter().filter(|p| p.stable).count(),
        pareto_indices: &result.pareto_indices,
        best_by_std: result.best_by_std.map(|i| &result.points[i]),
        best_by_power: result.best_by_power.map(|i| &result.points[i]),
        recommended,
    };
    write_pretty_json(path, &summary)
}

pub fn write_pretty_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let mut file = std::fs::File::create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    Ok(())
}
