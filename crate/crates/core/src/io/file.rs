//! The TOML scenario format.
//!
//! ```toml
//! [system]
//! omega = 1.0
//!
//! [[reservoir]]          # one table per reservoir, in order
//! alpha = 3.0
//! A = 1.0                # or D = 3 and d = 1 to derive A (and alpha = D/d)
//! V = 1.0
//! gamma = 1e-4
//! T0 = 0.105
//!
//! [integrator]           # optional, defaults shown
//! rel_tol = 1e-9
//! abs_tol = 1e-12
//! max_step_growth = 2.0
//! # t_end = 1e6
//! # spread_tol = 1e-9
//! max_steps = 5000000
//!
//! [output]               # optional
//! format = "csv"
//! samples_per_decade = 32
//! # path = "out/fig2"
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::OscillatorSpec;
use crate::reservoir::{coefficient_a, ReservoirSpec};
use crate::scenario::{IntegratorSettings, OutputSettings, Scenario};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    system: SystemSection,
    #[serde(default, rename = "reservoir")]
    reservoirs: Vec<ReservoirSection>,
    #[serde(default)]
    integrator: IntegratorSettings,
    #[serde(default)]
    output: OutputSettings,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    omega: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReservoirSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    A: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    D: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    V: f64,
    gamma: f64,
    T0: f64,
}

/// A prefactor computed from `(D, d)` rather than given directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDerivation {
    /// 1-based reservoir index.
    pub reservoir: usize,
    #[serde(rename = "D")]
    pub dimension: u32,
    #[serde(rename = "d")]
    pub dispersion: f64,
    pub alpha: f64,
    #[serde(rename = "A")]
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub derived: Vec<CoefficientDerivation>,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

/// Parses scenario text; `origin` is only used in diagnostics.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<LoadedScenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: describe_toml_error(text, &e),
    })?;

    let mut problems = Vec::new();
    let mut derived = Vec::new();
    let mut reservoirs = Vec::with_capacity(file.reservoirs.len());
    for (i, r) in file.reservoirs.iter().enumerate() {
        let key = format!("reservoir[{}]", i + 1);
        let (alpha, a) = match (r.A, r.D, r.d) {
            (Some(a), None, None) => match r.alpha {
                Some(alpha) => (alpha, a),
                None => {
                    problems.push(format!("{key}.alpha: required when A is given"));
                    (f64::NAN, a)
                }
            },
            (None, Some(dim), Some(disp)) => match coefficient_a(dim, disp) {
                Ok(a) => {
                    let alpha = dim as f64 / disp;
                    if let Some(given) = r.alpha {
                        if (given - alpha).abs() > 1e-12 * alpha {
                            problems.push(format!("{key}.alpha: {given} contradicts D/d = {alpha}"));
                        }
                    }
                    derived.push(CoefficientDerivation {
                        reservoir: i + 1,
                        dimension: dim,
                        dispersion: disp,
                        alpha,
                        a,
                    });
                    (alpha, a)
                }
                Err(e) => {
                    problems.push(format!("{key}.D/d: {e}"));
                    (f64::NAN, f64::NAN)
                }
            },
            (Some(_), _, _) => {
                problems.push(format!("{key}: give either A or both D and d, not both"));
                (f64::NAN, f64::NAN)
            }
            (None, _, _) => {
                problems.push(format!("{key}: either A or both D and d are required"));
                (f64::NAN, f64::NAN)
            }
        };
        reservoirs.push(ReservoirSpec {
            alpha,
            a,
            volume: r.V,
            gamma: r.gamma,
            t0: r.T0,
        });
    }

    let scenario = Scenario {
        oscillator: OscillatorSpec {
            omega: file.system.omega,
        },
        reservoirs,
        integrator: file.integrator,
        output: file.output,
    };
    // structural problems already name the bad reservoir; skip the NaN echo
    let structural: Vec<usize> = problems
        .iter()
        .filter_map(|p| {
            p.strip_prefix("reservoir[")
                .and_then(|s| s.split(']').next())
                .and_then(|s| s.parse().ok())
        })
        .collect();
    for p in scenario.problems() {
        let nan_echo = structural.iter().any(|i| {
            let prefix = format!("reservoir[{i}].");
            p.starts_with(&prefix) && p.contains("NaN")
        });
        if !nan_echo {
            problems.push(p);
        }
    }
    if problems.is_empty() {
        Ok(LoadedScenario { scenario, derived })
    } else {
        Err(Error::InvalidScenario(problems))
    }
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let message = e.message().trim_end();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            format!("line {line}, column {column}: {message}")
        }
        None => message.to_string(),
    }
}

/// Serializes a scenario in the file format. Reservoirs are always written
/// with an explicit `A`, so `parse_scenario` reproduces the same value.
pub fn scenario_to_toml(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        system: SystemSection {
            omega: scenario.oscillator.omega,
        },
        reservoirs: scenario
            .reservoirs
            .iter()
            .map(|r| ReservoirSection {
                alpha: Some(r.alpha),
                A: Some(r.a),
                D: None,
                d: None,
                V: r.volume,
                gamma: r.gamma,
                T0: r.t0,
            })
            .collect(),
        integrator: scenario.integrator.clone(),
        output: scenario.output.clone(),
    };
    toml::to_string(&file).expect("scenario fields are plain numbers and strings")
}

pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario_to_toml(scenario)).map_err(|e| Error::io(path, e))
}
