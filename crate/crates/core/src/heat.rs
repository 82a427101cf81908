//! Combustion-side boundary condition surrogate.
//!
//! The cycle-resolved in-cylinder heat transfer coefficient is treated as
//! a random variable conditioned on engine speed and load state. Only two
//! moments enter the lump energy balance: the mean HTC `⟨α_c⟩` and the
//! flux-weighted gas temperature `T_mod = ⟨α_c·T_gas⟩/⟨α_c⟩`. The
//! surrogate parametrizes the conditional distribution by a mean power law
//! in speed and a coefficient of variation (a lognormal family in spirit,
//! though nothing downstream depends on the family beyond these moments).
//!
//! Race operation alternates between full load and coasting; part load is
//! not modelled. The default constants are plausible surrogates for
//! unpublished measurement-derived data — absolute heat flows are
//! calibration-dependent, trends are not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::EngineSample;

/// Mean HTC as a power law in engine speed: `coeff · n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPowerLaw {
    pub coeff: f64,
    pub exponent: f64,
}

impl SpeedPowerLaw {
    pub fn eval(&self, n: f64) -> f64 {
        self.coeff * n.powf(self.exponent)
    }
}

/// Parametric surrogate for the conditional HTC distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatInputModel {
    /// Mean combustion HTC under full load, W/(m²·K), vs. speed.
    pub fired_alpha: SpeedPowerLaw,
    /// Coefficient of variation of the full-load HTC over cycles.
    pub fired_alpha_cov: f64,
    /// Mean HTC while coasting, W/(m²·K), vs. speed.
    pub coasting_alpha: SpeedPowerLaw,
    /// Effective gas temperature under full load, K.
    pub t_gas_fired: f64,
    /// Effective gas temperature while coasting, K.
    pub t_gas_coasting: f64,
    /// Coefficient of variation of the full-load gas temperature. Coasting
    /// is treated as deterministic (no combustion, small fluctuations).
    pub t_gas_fired_cov: f64,
    /// Pearson correlation between HTC and gas temperature over cycles.
    pub correlation_alpha_t: f64,
    /// Speed range the surrogate was fitted for, rpm; speeds outside are
    /// clamped to the range ends.
    pub n_min: f64,
    pub n_max: f64,
}

impl Default for HeatInputModel {
    fn default() -> Self {
        Self {
            fired_alpha: SpeedPowerLaw { coeff: 2.17, exponent: 0.8 },
            fired_alpha_cov: 0.3,
            coasting_alpha: SpeedPowerLaw { coeff: 0.42, exponent: 0.8 },
            t_gas_fired: 950.0,
            t_gas_coasting: 500.0,
            t_gas_fired_cov: 0.1,
            correlation_alpha_t: 0.3,
            n_min: 1000.0,
            n_max: 8000.0,
        }
    }
}

impl HeatInputModel {
    /// Checks the model invariants, including the configuration rule that
    /// fired samples inject strictly more heat than coasting samples at
    /// the same speed for any plausible wall temperature in [350, 550] K.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_gas_fired > self.t_gas_coasting && self.t_gas_coasting > 0.0) {
            return Err(Error::Config(format!(
                "heat model requires t_gas_fired > t_gas_coasting > 0, got {} and {}",
                self.t_gas_fired, self.t_gas_coasting
            )));
        }
        if !(-1.0..=1.0).contains(&self.correlation_alpha_t) {
            return Err(Error::Config(format!(
                "correlation_alpha_t must lie in [-1, 1], got {}",
                self.correlation_alpha_t
            )));
        }
        if self.fired_alpha_cov < 0.0 || self.t_gas_fired_cov < 0.0 {
            return Err(Error::Config(
                "coefficients of variation must be non-negative".into(),
            ));
        }
        if !(self.n_min > 0.0 && self.n_max > self.n_min) {
            return Err(Error::Config(format!(
                "heat model speed range invalid: [{}, {}]",
                self.n_min, self.n_max
            )));
        }
        let t_mod_fired = self.t_mod_fired();
        for i in 0..=32 {
            let n = self.n_min + (self.n_max - self.n_min) * f64::from(i) / 32.0;
            let a_f = self.fired_alpha.eval(n);
            let a_c = self.coasting_alpha.eval(n);
            if a_f < 0.0 || a_c < 0.0 {
                return Err(Error::Config(format!(
                    "mean HTC must be non-negative over the speed range (n = {n})"
                )));
            }
            for t_ref in [350.0, 550.0] {
                let fired = a_f * (t_mod_fired - t_ref);
                let coasting = a_c * (self.t_gas_coasting - t_ref);
                if fired <= coasting {
                    return Err(Error::Config(format!(
                        "fired heat input must exceed coasting at n = {n} rpm, \
                         T_ref = {t_ref} K ({fired:.1} <= {coasting:.1})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn clamp_speed(&self, n: f64) -> f64 {
        n.clamp(self.n_min, self.n_max)
    }

    /// True if the sample's speed lies outside the fitted range (the
    /// evaluation then clamps; callers may surface a warning).
    pub fn is_extrapolating(&self, sample: &EngineSample) -> bool {
        sample.n < self.n_min || sample.n > self.n_max
    }

    /// Mean combustion HTC `E[α_c | n, fired]`, W/(m²·K).
    pub fn mean_alpha_c(&self, sample: &EngineSample) -> f64 {
        let n = self.clamp_speed(sample.n);
        if sample.fired {
            self.fired_alpha.eval(n)
        } else {
            self.coasting_alpha.eval(n)
        }
    }

    fn t_mod_fired(&self) -> f64 {
        // T_mod = ⟨α·T⟩/⟨α⟩ = μ_T + ρ·σ_α·σ_T/μ_α, which in the
        // mean/cov parametrization collapses to μ_T·(1 + ρ·c_α·c_T),
        // independent of the HTC level (and well-defined as ⟨α⟩ → 0).
        self.t_gas_fired
            * (1.0 + self.correlation_alpha_t * self.fired_alpha_cov * self.t_gas_fired_cov)
    }

    /// Statistically modified reference gas temperature, K.
    pub fn modified_gas_temperature(&self, sample: &EngineSample) -> f64 {
        if sample.fired {
            self.t_mod_fired()
        } else {
            self.t_gas_coasting
        }
    }

    /// Both boundary terms for one sample: `(⟨α_c⟩, T_mod)`.
    pub fn boundary_condition(&self, sample: &EngineSample) -> (f64, f64) {
        (self.mean_alpha_c(sample), self.modified_gas_temperature(sample))
    }
}
