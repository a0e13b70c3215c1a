//! One-parameter sweeps over a scenario template.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{integrate, Run};
use crate::error::{Error, Result};
use crate::events::EventKind;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirField {
    Alpha,
    A,
    V,
    Gamma,
    T0,
}

impl ReservoirField {
    fn name(self) -> &'static str {
        match self {
            ReservoirField::Alpha => "alpha",
            ReservoirField::A => "A",
            ReservoirField::V => "V",
            ReservoirField::Gamma => "gamma",
            ReservoirField::T0 => "T0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorField {
    RelTol,
    AbsTol,
    MaxStepGrowth,
    TEnd,
    SpreadTol,
}

impl IntegratorField {
    fn name(self) -> &'static str {
        match self {
            IntegratorField::RelTol => "rel_tol",
            IntegratorField::AbsTol => "abs_tol",
            IntegratorField::MaxStepGrowth => "max_step_growth",
            IntegratorField::TEnd => "t_end",
            IntegratorField::SpreadTol => "spread_tol",
        }
    }
}

/// A numeric scenario key, written as in the scenario file:
/// `system.omega`, `reservoir[2].gamma`, `reservoir[*].T0`,
/// `integrator.rel_tol`. Reservoir indices are 1-based; `*` sets the field
/// on every reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Omega,
    Reservoir {
        /// 0-based; `None` for all reservoirs.
        index: Option<usize>,
        field: ReservoirField,
    },
    Integrator(IntegratorField),
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || {
            format!(
                "unknown axis `{s}` (expected system.omega, reservoir[i].<alpha|A|V|gamma|T0>, \
                 reservoir[*].<field> or integrator.<rel_tol|abs_tol|max_step_growth|t_end|spread_tol>)"
            )
        };
        if s == "system.omega" {
            return Ok(SweepAxis::Omega);
        }
        if let Some(rest) = s.strip_prefix("integrator.") {
            let field = [
                IntegratorField::RelTol,
                IntegratorField::AbsTol,
                IntegratorField::MaxStepGrowth,
                IntegratorField::TEnd,
                IntegratorField::SpreadTol,
            ]
            .into_iter()
            .find(|f| f.name() == rest)
            .ok_or_else(bad)?;
            return Ok(SweepAxis::Integrator(field));
        }
        let rest = s.strip_prefix("reservoir[").ok_or_else(bad)?;
        let (idx, field) = rest.split_once("].").ok_or_else(bad)?;
        let index = match idx {
            "*" => None,
            i => match i.parse::<usize>() {
                Ok(k) if k >= 1 => Some(k - 1),
                _ => return Err(bad()),
            },
        };
        let field = [
            ReservoirField::Alpha,
            ReservoirField::A,
            ReservoirField::V,
            ReservoirField::Gamma,
            ReservoirField::T0,
        ]
        .into_iter()
        .find(|f| f.name() == field)
        .ok_or_else(bad)?;
        Ok(SweepAxis::Reservoir { index, field })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepAxis::Omega => f.write_str("system.omega"),
            SweepAxis::Reservoir { index: None, field } => write!(f, "reservoir[*].{}", field.name()),
            SweepAxis::Reservoir { index: Some(i), field } => write!(f, "reservoir[{}].{}", i + 1, field.name()),
            SweepAxis::Integrator(field) => write!(f, "integrator.{}", field.name()),
        }
    }
}

impl SweepAxis {
    /// A copy of `template` with this key set to `value`, validated.
    pub fn apply(&self, template: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = template.clone();
        match *self {
            SweepAxis::Omega => s.oscillator.omega = value,
            SweepAxis::Reservoir { index, field } => {
                let n = s.len();
                let targets: Vec<usize> = match index {
                    Some(i) if i < n => vec![i],
                    Some(i) => {
                        return Err(Error::InvalidScenario(vec![format!(
                            "sweep axis {self}: scenario has only {n} reservoirs (asked for {})",
                            i + 1
                        )]))
                    }
                    None => (0..n).collect(),
                };
                for j in targets {
                    let r = &mut s.reservoirs[j];
                    match field {
                        ReservoirField::Alpha => r.alpha = value,
                        ReservoirField::A => r.a = value,
                        ReservoirField::V => r.volume = value,
                        ReservoirField::Gamma => r.gamma = value,
                        ReservoirField::T0 => r.t0 = value,
                    }
                }
            }
            SweepAxis::Integrator(field) => {
                let ig = &mut s.integrator;
                match field {
                    IntegratorField::RelTol => ig.rel_tol = value,
                    IntegratorField::AbsTol => ig.abs_tol = value,
                    IntegratorField::MaxStepGrowth => ig.max_step_growth = value,
                    IntegratorField::TEnd => ig.t_end = Some(value),
                    IntegratorField::SpreadTol => ig.spread_tol = Some(value),
                }
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub value: f64,
    pub scenario: Option<Scenario>,
    pub result: Result<Run>,
}

/// Runs `template` once per value, in parallel. Rows come back sorted by
/// value; a failing run is recorded in its row and does not stop the rest.
pub fn run_sweep(template: &Scenario, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_par_iter()
        .map(|value| match axis.apply(template, value) {
            Ok(scenario) => {
                let result = integrate(&scenario);
                SweepRow {
                    value,
                    scenario: Some(scenario),
                    result,
                }
            }
            Err(e) => SweepRow {
                value,
                scenario: None,
                result: Err(e),
            },
        })
        .collect()
}

/// One line per run: the swept value, status, event counts and final state.
pub fn write_sweep_table<W: Write>(w: W, axis: SweepAxis, n: usize, rows: &[SweepRow]) -> csv::Result<()> {
    let kinds = [
        EventKind::Extremum,
        EventKind::RankChange,
        EventKind::PairEqualized,
        EventKind::GlobalEqualized,
    ];
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let mut header = vec![axis.to_string(), "status".into(), "t_final".into(), "T_eq".into()];
    header.extend(kinds.iter().map(|k| format!("n_{}", k.as_str())));
    header.extend(["accepted", "rejected", "implicit_switches"].map(String::from));
    header.extend((1..=n).map(|j| format!("T_{j}")));
    header.push("error".into());
    out.write_record(&header)?;

    let num = |x: f64| format!("{x:.16e}");
    for row in rows {
        let mut rec = vec![num(row.value)];
        match &row.result {
            Ok(run) => {
                let last = run.final_point();
                rec.push("ok".into());
                rec.push(num(last.t));
                rec.push(num(run.equilibrium));
                for k in kinds {
                    rec.push(run.events.iter().filter(|e| e.kind == k).count().to_string());
                }
                rec.push(run.stats.accepted.to_string());
                rec.push(run.stats.rejected.to_string());
                rec.push(run.stats.implicit_switches.to_string());
                rec.extend(last.temps.iter().map(|&t| num(t)));
                rec.push(String::new());
            }
            Err(e) => {
                rec.push("error".into());
                rec.extend(std::iter::repeat_n(String::new(), 2 + kinds.len() + 3 + n));
                rec.push(e.to_string().replace('\n', "; "));
            }
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::ReservoirSpec;

    #[test]
    fn axis_names_round_trip() {
        for s in [
            "system.omega",
            "reservoir[1].gamma",
            "reservoir[3].T0",
            "reservoir[*].T0",
            "reservoir[2].A",
            "integrator.rel_tol",
            "integrator.spread_tol",
        ] {
            assert_eq!(s.parse::<SweepAxis>().unwrap().to_string(), s);
        }
        for bad in ["omega", "reservoir[0].T0", "reservoir[1].beta", "integrator.foo", "reservoir[x].V"] {
            assert!(bad.parse::<SweepAxis>().is_err(), "{bad}");
        }
    }

    #[test]
    fn apply_sets_and_validates() {
        let s = Scenario::new(1.0, vec![ReservoirSpec::unit(3.0, 1e-2, 0.1); 3]).unwrap();
        let a: SweepAxis = "reservoir[*].T0".parse().unwrap();
        let t = a.apply(&s, 0.2).unwrap();
        assert!(t.reservoirs.iter().all(|r| r.t0 == 0.2));
        let b: SweepAxis = "reservoir[2].gamma".parse().unwrap();
        assert_eq!(b.apply(&s, 5.0).unwrap().gammas(), vec![1e-2, 5.0, 1e-2]);
        assert!(b.apply(&s, -1.0).is_err());
        let c: SweepAxis = "reservoir[4].V".parse().unwrap();
        assert!(c.apply(&s, 1.0).is_err());
    }

    #[test]
    fn failures_are_recorded_in_order() {
        let s = Scenario::new(1.0, vec![ReservoirSpec::unit(3.0, 1e-2, 0.1); 2]).unwrap();
        let axis: SweepAxis = "reservoir[1].T0".parse().unwrap();
        let rows = run_sweep(&s, axis, &[0.2, -1.0, 0.1]);
        let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![-1.0, 0.1, 0.2]);
        assert!(rows[0].result.is_err());
        assert!(rows[1].result.is_ok() && rows[2].result.is_ok());

        let mut buf = Vec::new();
        write_sweep_table(&mut buf, axis, 2, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
        assert!(lines[1].contains(",error,"));
    }
}
