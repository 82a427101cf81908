//! Lumped-capacity engine thermal simulation with water mass flow control.
//!
//! The crate models a cylinder head as a single thermal mass cooled by a
//! water jacket whose heat transfer coefficient follows a turbulent power
//! law in the coolant mass flow rate. A bandwidth- and saturation-limited
//! pump (first-order lag) actuates the flow. Four control strategies are
//! provided: a mechanical reference pump geared to engine speed, a
//! feed-forward law derived from the stationary plant solution, PID
//! feedback, and their combination. Controller gains can be estimated by
//! linearizing the plant at an operating point (Kessler tuning) and then
//! refined by a Monte Carlo sweep that scores temperature regularity
//! against hydraulic pumping power.
//!
//! Module map:
//! - [`plant`]: water-jacket HTC law, lump ODE, water temperature coupling
//! - [`heat`]: combustion-side boundary condition surrogate
//! - [`trace`]: race-lap disturbance traces and CSV ingestion
//! - [`pump`]: PT1 actuator with saturation box
//! - [`control`]: control strategies and target scheduling
//! - [`tuning`]: plant linearization and Kessler gain estimation
//! - [`simulator`]: closed-loop lap simulation and lap metrics
//! - [`montecarlo`]: gain sweeps, Pareto fronts, gain recommendation
//! - [`config`]: TOML run configuration
//! - [`report`]: CSV/JSON output writers

pub mod config;
pub mod control;
pub mod error;
pub mod heat;
pub mod montecarlo;
pub mod plant;
pub mod pump;
pub mod report;
pub mod simulator;
pub mod trace;
pub mod tuning;

pub use config::RunConfig;
pub use control::{ControllerSpec, ControllerState, PidGains, Strategy, TargetSchedule};
pub use error::{Error, Result};
pub use heat::HeatInputModel;
pub use plant::{PlantState, ThermalPlantParams};
pub use pump::{PumpParams, PumpState};
pub use simulator::{LapMetrics, SimulationResult, SimulationSettings};
pub use trace::{EngineSample, LapTrace};
