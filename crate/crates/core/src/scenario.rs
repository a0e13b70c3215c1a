use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::OscillatorSpec;
use crate::reservoir::ReservoirSpec;

/// Tighter relative tolerances cannot be met in double precision.
pub const MIN_REL_TOL: f64 = 100.0 * f64::EPSILON;

/// Largest step-size ratio for which variable-step BDF2 stays zero-stable.
pub const MAX_STEP_GROWTH_LIMIT: f64 = 1.0 + std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step_growth: f64,
    /// Hard stop; when absent, 100× the largest pairwise t_eq estimate.
    pub t_end: Option<f64>,
    /// Equalization threshold on the temperature spread; when absent,
    /// `1e-8 · max T0`.
    pub spread_tol: Option<f64>,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step_growth: 2.0,
            t_end: None,
            spread_tol: None,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Tsv,
}

impl OutputFormat {
    pub fn delimiter(self) -> char {
        match self {
            OutputFormat::Csv => ',',
            OutputFormat::Tsv => '\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Tsv => "tsv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
    pub samples_per_decade: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            format: OutputFormat::Csv,
            path: None,
            samples_per_decade: 32,
        }
    }
}

/// An oscillator, the reservoirs attached to it, and run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub oscillator: OscillatorSpec,
    pub reservoirs: Vec<ReservoirSpec>,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

impl Scenario {
    /// Scenario with default integrator and output settings.
    pub fn new(omega: f64, reservoirs: Vec<ReservoirSpec>) -> Result<Self> {
        let s = Self {
            oscillator: OscillatorSpec { omega },
            reservoirs,
            integrator: IntegratorSettings::default(),
            output: OutputSettings::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reservoirs.is_empty()
    }

    pub fn omega(&self) -> f64 {
        self.oscillator.omega
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.reservoirs.iter().map(|r| r.gamma).collect()
    }

    pub fn initial_temperatures(&self) -> Vec<f64> {
        self.reservoirs.iter().map(|r| r.t0).collect()
    }

    pub fn spread_tol(&self) -> f64 {
        self.integrator.spread_tol.unwrap_or_else(|| {
            1e-8 * self
                .reservoirs
                .iter()
                .map(|r| r.t0)
                .fold(0.0, f64::max)
        })
    }

    /// Every violated constraint, each prefixed with its key path.
    /// Reservoir indices are 1-based, matching the `T_1..T_n` columns.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let omega = self.oscillator.omega;
        if !(omega.is_finite() && omega > 0.0) {
            out.push(format!("system.omega: must be positive (got {omega})"));
        }
        if self.reservoirs.is_empty() {
            out.push("reservoir: at least one reservoir is required".to_string());
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            for p in r.problems() {
                out.push(format!("reservoir[{}].{p}", i + 1));
            }
        }
        let total: f64 = self.reservoirs.iter().map(|r| r.energy_unchecked(r.t0)).sum();
        if total.is_infinite() && self.reservoirs.iter().all(|r| r.problems().is_empty()) {
            out.push("reservoir: total initial energy overflows".to_string());
        }
        let ig = &self.integrator;
        let positive = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("integrator.{name}: must be positive (got {v})"));
            }
        };
        positive("rel_tol", ig.rel_tol, &mut out);
        if ig.rel_tol > 0.0 && ig.rel_tol < MIN_REL_TOL {
            out.push(format!(
                "integrator.rel_tol: must be at least {MIN_REL_TOL:e} (got {:e})",
                ig.rel_tol
            ));
        }
        positive("abs_tol", ig.abs_tol, &mut out);
        if let Some(t) = ig.t_end {
            positive("t_end", t, &mut out);
        }
        if let Some(s) = ig.spread_tol {
            positive("spread_tol", s, &mut out);
        }
        if !(ig.max_step_growth > 1.0 && ig.max_step_growth <= MAX_STEP_GROWTH_LIMIT) {
            out.push(format!(
                "integrator.max_step_growth: must lie in (1, {MAX_STEP_GROWTH_LIMIT:.4}] (got {})",
                ig.max_step_growth
            ));
        }
        if ig.max_steps == 0 {
            out.push("integrator.max_steps: must be at least 1".to_string());
        }
        if self.output.samples_per_decade == 0 {
            out.push("output.samples_per_decade: must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(problems))
        }
    }
}
