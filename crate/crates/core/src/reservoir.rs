//! Thermodynamics of a finite bosonic reservoir with `E = A V T^(α+1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::analysis;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::special::zeta;

/// One reservoir: power-law thermodynamics plus its coupling rate at ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    /// Heat-capacity exponent α = D/d.
    pub alpha: f64,
    /// Energy-density prefactor.
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    /// Dissipative rate of the oscillator into this reservoir.
    pub gamma: f64,
    /// Initial temperature.
    #[serde(rename = "T0")]
    pub t0: f64,
}

impl ReservoirSpec {
    pub fn new(alpha: f64, a: f64, volume: f64, gamma: f64, t0: f64) -> Result<Self> {
        let r = Self {
            alpha,
            a,
            volume,
            gamma,
            t0,
        };
        match r.problems().first() {
            None => Ok(r),
            Some(_) => Err(Error::InvalidScenario(r.problems())),
        }
    }

    /// Unit-prefactor, unit-volume reservoir; the setup used by the
    /// three- and five-bath presets.
    pub fn unit(alpha: f64, gamma: f64, t0: f64) -> Self {
        Self {
            alpha,
            a: 1.0,
            volume: 1.0,
            gamma,
            t0,
        }
    }

    /// Violated invariants as `field: message` strings.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name}: must be positive (got {v})"));
            }
        };
        positive("alpha", self.alpha);
        positive("A", self.a);
        positive("V", self.volume);
        positive("T0", self.t0);
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            out.push(format!("gamma: must be non-negative (got {})", self.gamma));
        }
        if out.is_empty() {
            // the integration variable is the energy, so it must be representable
            let e = self.energy_unchecked(self.t0);
            let c = self.capacity_unchecked(self.t0);
            if !(e.is_normal() && c.is_normal()) {
                out.push(format!(
                    "T0: initial energy A V T0^(alpha+1) = {e:e} is outside the floating-point range"
                ));
            }
        }
        out
    }

    /// `A V`, the factor common to energy and heat capacity.
    #[inline]
    pub(crate) fn extent(&self) -> f64 {
        self.a * self.volume
    }

    #[inline]
    pub(crate) fn energy_unchecked(&self, t: f64) -> f64 {
        self.extent() * t.powf(self.alpha + 1.0)
    }

    #[inline]
    pub(crate) fn capacity_unchecked(&self, t: f64) -> f64 {
        (self.alpha + 1.0) * self.extent() * t.powf(self.alpha)
    }

    /// Inverse of the energy function.
    #[inline]
    pub(crate) fn temperature_of_energy(&self, e: f64) -> f64 {
        (e / self.extent()).powf(1.0 / (self.alpha + 1.0))
    }
}

/// `E(T) = A V T^(α+1)`.
pub fn reservoir_energy(spec: &ReservoirSpec, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain("T", t, "must be non-negative and finite"));
    }
    Ok(spec.energy_unchecked(t))
}

/// `C(T) = dE/dT = (α+1) A V T^α`. Zero temperature is rejected because
/// the temperature equation divides by C.
pub fn heat_capacity(spec: &ReservoirSpec, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain("T", t, "must be positive and finite"));
    }
    Ok(spec.capacity_unchecked(t))
}

/// Energy prefactor for a D-dimensional gas of bosonic quasiparticles with
/// dispersion `ε ∝ p^d` (ħ = 1):
///
/// `A = S_D Γ(α+1) ζ(α+1) / (2π)^D`, `S_D = D π^(D/2) / Γ(D/2 + 1)`, `α = D/d`.
///
/// This is the closed form as usually quoted. It carries no dispersion
/// constant and no `1/d` factor, which a direct evaluation of the
/// phase-space integral produces for `d ≠ 1`; set `A` directly when that
/// matters.
pub fn coefficient_a(dimension: u32, dispersion: f64) -> Result<f64> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::domain("D", dimension as f64, "must be 1, 2 or 3"));
    }
    if !(dispersion.is_finite() && dispersion > 0.0) {
        return Err(Error::domain("d", dispersion, "must be positive"));
    }
    let dim = dimension as f64;
    let alpha = dim / dispersion;
    let surface = dim * PI.powf(dim / 2.0) / gamma_fn(dim / 2.0 + 1.0);
    Ok(surface * gamma_fn(alpha + 1.0) * zeta(alpha + 1.0) / (2.0 * PI).powf(dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityThresholds {
    pub min_heat_capacity: f64,
    pub min_timescale_ratio: f64,
}

impl Default for ValidityThresholds {
    fn default() -> Self {
        Self {
            min_heat_capacity: 10.0,
            min_timescale_ratio: 10.0,
        }
    }
}

/// Diagnostics for the two-timescale model's assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Smallest heat capacity over the initial temperatures.
    pub c_min: f64,
    /// Oscillator relaxation time `1/Γ_ω` for the two most strongly coupled
    /// reservoirs; `None` when fewer than two are coupled.
    pub tau_s: Option<f64>,
    /// Shortest pairwise equalization time over `tau_s`.
    pub teq_over_taus: Option<f64>,
    pub capacity_ok: bool,
    /// `None` when the check does not apply (no coupled pair).
    pub timescale_ok: Option<bool>,
    pub ok: bool,
}

pub fn validity_check(scenario: &Scenario) -> ValidityReport {
    validity_check_with(scenario, &ValidityThresholds::default())
}

pub fn validity_check_with(scenario: &Scenario, thresholds: &ValidityThresholds) -> ValidityReport {
    let c_min = scenario
        .reservoirs
        .iter()
        .map(|r| r.capacity_unchecked(r.t0))
        .fold(f64::INFINITY, f64::min);

    let mut gammas: Vec<f64> = scenario.gammas().into_iter().filter(|&g| g > 0.0).collect();
    gammas.sort_by(|a, b| b.total_cmp(a));
    let tau_s = (gammas.len() >= 2).then(|| (gammas[0] + gammas[1]) / (gammas[0] * gammas[1]));

    let t_eq_min = if scenario.len() >= 2 {
        analysis::pairwise_teq_matrix(scenario)
            .estimates()
            .map(|e| e.t_eq)
            .filter(|t| t.is_finite())
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
    } else {
        None
    };
    let teq_over_taus = match (t_eq_min, tau_s) {
        (Some(t), Some(tau)) => Some(t / tau),
        _ => None,
    };

    let capacity_ok = c_min >= thresholds.min_heat_capacity;
    let timescale_ok = teq_over_taus.map(|r| r >= thresholds.min_timescale_ratio);
    ValidityReport {
        c_min,
        tau_s,
        teq_over_taus,
        capacity_ok,
        timescale_ok,
        ok: capacity_ok && timescale_ok.unwrap_or(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(alpha: f64, a: f64, v: f64) -> ReservoirSpec {
        ReservoirSpec::new(alpha, a, v, 1.0, 1.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        assert_relative_eq!(
            reservoir_energy(&spec(3.0, 1.0, 1.0), 0.1).unwrap(),
            1e-4,
            max_relative = 1e-14
        );
        assert_eq!(reservoir_energy(&spec(2.2, 3.0, 7.0), 0.0).unwrap(), 0.0);
        let s = spec(3.0, PI * PI / 30.0, 2.0);
        assert_relative_eq!(
            reservoir_energy(&s, 1.0).unwrap(),
            PI * PI / 15.0,
            max_relative = 1e-15
        );
        assert!(reservoir_energy(&s, -1.0).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_relative_eq!(
            heat_capacity(&spec(3.0, 1.0, 1.0), 0.1).unwrap(),
            4e-3,
            max_relative = 1e-14
        );
        // α = 0 is rejected by validation, but the formula still gives C = A V.
        let flat = ReservoirSpec {
            alpha: 0.0,
            a: 2.0,
            volume: 3.0,
            gamma: 1.0,
            t0: 1.0,
        };
        for t in [0.1, 1.0, 10.0] {
            assert_eq!(heat_capacity(&flat, t).unwrap(), 6.0);
        }
        assert!(heat_capacity(&flat, 0.0).is_err());
    }

    #[test]
    fn capacity_matches_centered_difference() {
        for &(alpha, t) in &[(0.5, 0.03), (1.0, 0.2), (3.0, 0.1), (3.7, 2.5)] {
            let s = spec(alpha, 1.3, 0.7);
            let h = 1e-4 * t;
            let fd = (s.energy_unchecked(t + h) - s.energy_unchecked(t - h)) / (2.0 * h);
            assert_relative_eq!(heat_capacity(&s, t).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn capacity_integrates_to_energy_difference() {
        // Composite Simpson on C(T) over [T1, T2].
        let s = spec(2.6, 0.9, 1.7);
        let (t1, t2) = (0.05, 0.8);
        let m = 2000;
        let h = (t2 - t1) / m as f64;
        let mut acc = s.capacity_unchecked(t1) + s.capacity_unchecked(t2);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * s.capacity_unchecked(t1 + i as f64 * h);
        }
        let integral = acc * h / 3.0;
        let de = s.energy_unchecked(t2) - s.energy_unchecked(t1);
        assert_relative_eq!(integral, de, max_relative = 1e-8);
    }

    #[test]
    fn coefficient_examples() {
        assert_relative_eq!(coefficient_a(3, 1.0).unwrap(), PI * PI / 30.0, max_relative = 1e-12);
        assert_relative_eq!(coefficient_a(1, 1.0).unwrap(), PI / 6.0, max_relative = 1e-12);
        // D = 2, d = 1: S_2 = 2π, Γ(3) ζ(3) / (2π)^2
        assert_relative_eq!(
            coefficient_a(2, 1.0).unwrap(),
            2.0 * PI * 2.0 * 1.202_056_903_159_594_3 / (4.0 * PI * PI),
            max_relative = 1e-12
        );
        assert!(coefficient_a(4, 1.0).is_err());
        assert!(coefficient_a(3, 0.0).is_err());
    }

    #[test]
    fn volume_scaling_is_exact() {
        let s = spec(3.0, 1.0, 1.5);
        let big = ReservoirSpec { volume: 3.0, ..s };
        assert_eq!(2.0 * s.energy_unchecked(0.3), big.energy_unchecked(0.3));
        assert_eq!(2.0 * s.capacity_unchecked(0.3), big.capacity_unchecked(0.3));
    }

    #[test]
    fn problems_list_every_field() {
        let r = ReservoirSpec {
            alpha: -1.0,
            a: 0.0,
            volume: 1.0,
            gamma: -2.0,
            t0: -1.0,
        };
        let p = r.problems();
        assert_eq!(p.len(), 4, "{p:?}");
        assert!(p.iter().any(|m| m.starts_with("T0")));
    }

    #[test]
    fn validity_three_bath_preset_warns() {
        let sc = Scenario::new(
            1.0,
            vec![
                ReservoirSpec::unit(3.0, 1e-4, 0.105),
                ReservoirSpec::unit(3.0, 2e-2, 0.085),
                ReservoirSpec::unit(3.0, 2e-2, 0.107),
            ],
        )
        .unwrap();
        let rep = validity_check(&sc);
        assert_relative_eq!(rep.c_min, 4.0 * 0.085f64.powi(3), max_relative = 1e-14);
        assert!(!rep.capacity_ok);
        assert!(!rep.ok);
        assert_relative_eq!(rep.tau_s.unwrap(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn validity_large_reservoirs_pass() {
        let r = ReservoirSpec::new(3.0, 1.0, 1e6, 1e-2, 0.2).unwrap();
        let sc = Scenario::new(1.0, vec![r, r]).unwrap();
        let rep = validity_check(&sc);
        assert!(rep.capacity_ok && rep.timescale_ok == Some(true) && rep.ok, "{rep:?}");
    }

    #[test]
    fn validity_single_reservoir_timescale_not_applicable() {
        let sc = Scenario::new(1.0, vec![ReservoirSpec::new(3.0, 1.0, 1e6, 1e-2, 0.2).unwrap()]).unwrap();
        let rep = validity_check(&sc);
        assert_eq!(rep.tau_s, None);
        assert_eq!(rep.teq_over_taus, None);
        assert_eq!(rep.timescale_ok, None);
        assert!(rep.ok);
    }

    #[test]
    fn thresholds_are_configurable() {
        let sc = Scenario::new(1.0, vec![ReservoirSpec::unit(3.0, 1e-2, 0.1); 2]).unwrap();
        let lax = ValidityThresholds {
            min_heat_capacity: 1e-3,
            min_timescale_ratio: 0.5,
        };
        assert!(validity_check_with(&sc, &lax).ok, "{:?}", validity_check_with(&sc, &lax));
        assert!(!validity_check(&sc).ok);
    }
}
