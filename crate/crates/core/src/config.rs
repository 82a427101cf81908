//! Run configuration: a TOML file with one section per subsystem.
//!
//! Every key has a documented default, so an empty file is a valid run
//! configuration. Unknown keys are rejected to catch typos before a long
//! batch run. CLI flags override config keys; config keys override the
//! built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControllerSpec, PidGains, Strategy, TargetSchedule};
use crate::error::{Error, Result};
use crate::heat::HeatInputModel;
use crate::montecarlo::SweepSpec;
use crate::plant::ThermalPlantParams;
use crate::pump::PumpParams;
use crate::simulator::SimulationSettings;
use crate::trace::LapTrace;
use crate::tuning::OperatingPoint;

/// `[controller]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub strategy: Strategy,
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    pub t_target_fired: f64,
    pub t_target_coasting: f64,
    /// Mechanical reference pump ratio, kg/s per rpm. Refine with the
    /// `calibrate` command.
    pub mechanical_ratio: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Combined,
            k_p: -1.4,
            k_i: -0.05,
            k_d: -1.0,
            t_target_fired: 407.0,
            t_target_coasting: 407.0,
            mechanical_ratio: 6.4e-4,
        }
    }
}

impl ControllerConfig {
    pub fn gains(&self) -> PidGains {
        PidGains { k_p: self.k_p, k_i: self.k_i, k_d: self.k_d }
    }

    pub fn schedule(&self) -> TargetSchedule {
        TargetSchedule {
            t_target_fired: self.t_target_fired,
            t_target_coasting: self.t_target_coasting,
        }
    }

    pub fn spec(&self) -> ControllerSpec {
        ControllerSpec {
            strategy: self.strategy,
            gains: self.gains(),
            schedule: self.schedule(),
            mechanical_ratio: self.mechanical_ratio,
        }
    }
}

/// `[tuning]` section: linearization operating point and target closed
/// loop time constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub t_w_0: f64,
    pub t_cyl_0: f64,
    pub mdot_w_0: f64,
    pub tau_c: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { t_w_0: 373.0, t_cyl_0: 419.0, mdot_w_0: 2.0, tau_c: 5.0 }
    }
}

impl TuningConfig {
    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint {
            t_w_0: self.t_w_0,
            t_cyl_0: self.t_cyl_0,
            mdot_w_0: self.mdot_w_0,
        }
    }
}

/// `[range]` section: feasible-range study targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeConfig {
    pub target_min: f64,
    pub target_max: f64,
    pub target_step: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self { target_min: 380.0, target_max: 510.0, target_step: 10.0 }
    }
}

impl RangeConfig {
    pub fn targets(&self) -> Result<Vec<f64>> {
        if !(self.target_step > 0.0) || self.target_max < self.target_min {
            return Err(Error::Config(format!(
                "range section invalid: [{}, {}] step {}",
                self.target_min, self.target_max, self.target_step
            )));
        }
        let mut targets = Vec::new();
        let mut t = self.target_min;
        while t <= self.target_max + 1e-9 {
            targets.push(t);
            t += self.target_step;
        }
        Ok(targets)
    }
}

/// `[calibration]` section: mechanical reference pump calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Lap maximum temperature the mechanical pump must reach, K.
    pub target_max_t: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { target_max_t: 407.0 }
    }
}

/// `[paths]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Lap trace CSV; the built-in synthetic lap is used when absent.
    pub trace: Option<PathBuf>,
    /// Output directory for all generated files.
    pub output_dir: Option<PathBuf>,
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: ThermalPlantParams,
    pub pump: PumpParams,
    pub heat: HeatInputModel,
    pub controller: ControllerConfig,
    pub simulation: SimulationSettings,
    pub tuning: TuningConfig,
    pub range: RangeConfig,
    pub calibration: CalibrationConfig,
    pub sweep: SweepSpec,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Parses a TOML string.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads and parses a config file.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Validates every section against the module invariants, so a run
    /// never starts from a half-broken configuration.
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.pump.validate()?;
        self.heat.validate()?;
        self.simulation.validate(&self.pump)?;
        self.controller.schedule().validate(&self.plant)?;
        self.sweep.validate()?;
        self.sweep.target.validate(&self.plant)?;
        self.range.targets()?;
        if !(self.controller.mechanical_ratio > 0.0) {
            return Err(Error::Config(format!(
                "controller.mechanical_ratio must be positive, got {}",
                self.controller.mechanical_ratio
            )));
        }
        if let Some(trace) = &self.paths.trace {
            if !trace.exists() {
                return Err(Error::Config(format!(
                    "trace file does not exist: {}",
                    trace.display()
                )));
            }
        }
        Ok(())
    }

    /// Loads the configured trace, or the built-in synthetic lap.
    pub fn load_trace(&self) -> Result<LapTrace> {
        match &self.paths.trace {
            Some(path) => LapTrace::from_csv_path(path),
            None => Ok(LapTrace::synthetic_default()),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
