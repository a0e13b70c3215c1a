//! Closed-form kernels for a harmonic oscillator coupled to bosonic baths.
//!
//! Units: ħ = k_B = 1, so frequencies, energies and temperatures share a
//! unit and rates are inverse times.
//!
//! Sign convention for flows: a positive `J_j` means reservoir `j` is
//! *losing* energy, i.e. `dE_j/dt = -J_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this value of ω/T the occupancy is evaluated as `exp(-ω/T)`.
const LARGE_RATIO: f64 = 700.0;

/// The open system: a single oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    pub omega: f64,
}

impl OscillatorSpec {
    pub fn new(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Self { omega })
    }
}

/// Downward and upward transition rates induced by one reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub g_down: f64,
    pub g_up: f64,
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("omega", omega, "must be positive and finite"))
    }
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("T", t, "must be non-negative and finite"))
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("gamma", gamma, "must be non-negative and finite"))
    }
}

/// Occupancy as a function of x = ω/T, for x ≥ 0 (x = +inf gives 0).
#[inline]
pub(crate) fn occupancy_of_ratio(x: f64) -> f64 {
    if x > LARGE_RATIO {
        // 1/(e^x - 1) = e^{-x} / (1 - e^{-x}) and e^{-x} < 1e-304 here.
        (-x).exp()
    } else {
        1.0 / x.exp_m1()
    }
}

/// Unchecked occupancy; `t == 0` maps to 0.
#[inline]
pub(crate) fn occupancy(omega: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        occupancy_of_ratio(omega / t)
    }
}

/// ∂n/∂T = (ω/T²) · n (n + 1).
#[inline]
pub(crate) fn occupancy_slope(omega: f64, t: f64) -> f64 {
    let n = occupancy(omega, t);
    omega / (t * t) * n * (n + 1.0)
}

/// Mean Bose–Einstein occupancy `1/(exp(ω/T) - 1)` of a mode at frequency ω.
///
/// Returns exactly 0 at `T = 0`. The evaluation goes through `expm1`, so it
/// keeps full relative accuracy for small ω/T and does not overflow for
/// large ω/T.
pub fn bose_occupancy(omega: f64, temperature: f64) -> Result<f64> {
    check_omega(omega)?;
    check_temperature(temperature)?;
    Ok(occupancy(omega, temperature))
}

/// Transition rates `G(∓ω) = γ (n + 1/2 ± 1/2)` for one reservoir.
pub fn transition_rates(gamma: f64, omega: f64, temperature: f64) -> Result<RatePair> {
    check_gamma(gamma)?;
    let n = bose_occupancy(omega, temperature)?;
    Ok(RatePair {
        g_down: gamma * (n + 1.0),
        g_up: gamma * n,
    })
}

fn check_lists(gammas: &[f64], temps: &[f64], omega: f64) -> Result<()> {
    if gammas.len() != temps.len() {
        return Err(Error::LengthMismatch {
            left: "gammas",
            left_len: gammas.len(),
            right: "temps",
            right_len: temps.len(),
        });
    }
    check_omega(omega)?;
    for &g in gammas {
        check_gamma(g)?;
    }
    for &t in temps {
        check_temperature(t)?;
    }
    if !gammas.iter().any(|&g| g > 0.0) {
        return Err(Error::NoCoupling);
    }
    Ok(())
}

/// Weighted mean `Σ γ_j n_j / Σ γ_j`, clamped into the range of the coupled
/// occupancies so the convex-combination bound survives rounding.
pub(crate) fn weighted_mean_occupancy(gammas: &[f64], occ: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&g, &n) in gammas.iter().zip(occ) {
        if g > 0.0 {
            num += g * n;
            den += g;
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    (num / den).clamp(lo, hi)
}

/// Stationary mean number of quanta in the oscillator for fixed bath
/// temperatures.
pub fn stationary_occupancy(gammas: &[f64], temps: &[f64], omega: f64) -> Result<f64> {
    check_lists(gammas, temps, omega)?;
    let occ: Vec<f64> = temps.iter().map(|&t| occupancy(omega, t)).collect();
    Ok(weighted_mean_occupancy(gammas, &occ))
}

/// Stationary energy flows out of each reservoir.
///
/// `J_j = ω γ_j (n_j − Σ_k p_k n_k)` with `p_k = γ_k / Σ γ`.
pub fn stationary_flows(gammas: &[f64], temps: &[f64], omega: f64) -> Result<Vec<f64>> {
    check_lists(gammas, temps, omega)?;
    let occ: Vec<f64> = temps.iter().map(|&t| occupancy(omega, t)).collect();
    let mut out = vec![0.0; gammas.len()];
    flows_from_occupancies(omega, gammas, &occ, &mut out);
    Ok(out)
}

/// Flows from precomputed occupancies. Requires `Σ γ > 0`.
///
/// Evaluated in the pairwise form `ω/Σγ · Σ_k γ_j γ_k (n_j − n_k)`: the pair
/// terms are exactly antisymmetric, and each row is summed with compensation,
/// so the flows add up to zero at the level of a few ulps of `Σ |J|`. It also
/// makes the hottest reservoir's flow a sum of non-negative terms.
pub(crate) fn flows_from_occupancies(omega: f64, gammas: &[f64], occ: &[f64], out: &mut [f64]) {
    let total: f64 = gammas.iter().sum();
    let scale = omega / total;
    for j in 0..gammas.len() {
        let gj = gammas[j];
        if gj == 0.0 {
            out[j] = 0.0;
            continue;
        }
        let mut sum = 0.0;
        let mut comp = 0.0;
        for k in 0..gammas.len() {
            if k == j || gammas[k] == 0.0 {
                continue;
            }
            let term = (gj * gammas[k]) * (occ[j] - occ[k]);
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        out[j] = scale * (sum + comp);
    }
}

/// Closed-form solution of the oscillator's mean-occupancy equation with the
/// bath temperatures held fixed.
///
/// `d⟨n⟩/dt = Σ_j [−G_j(−ω) ⟨n⟩ + G_j(ω)(1 + ⟨n⟩)] = −Σγ (⟨n⟩ − n̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyRelaxation {
    pub initial: f64,
    pub stationary: f64,
    /// Relaxation rate Σ γ_j.
    pub rate: f64,
}

impl OccupancyRelaxation {
    pub fn new(gammas: &[f64], temps: &[f64], omega: f64, n_initial: f64) -> Result<Self> {
        if !(n_initial.is_finite() && n_initial >= 0.0) {
            return Err(Error::domain("n_initial", n_initial, "must be non-negative"));
        }
        let stationary = stationary_occupancy(gammas, temps, omega)?;
        Ok(Self {
            initial: n_initial,
            stationary,
            rate: gammas.iter().sum(),
        })
    }

    pub fn at(&self, t: f64) -> f64 {
        self.stationary + (self.initial - self.stationary) * (-self.rate * t).exp()
    }
}

/// Samples the occupancy relaxation on `samples` evenly spaced times in
/// `[0, t_end]`, returned as `(t, ⟨n⟩)` pairs.
pub fn occupancy_ode_oracle(
    gammas: &[f64],
    temps: &[f64],
    omega: f64,
    n_initial: f64,
    t_end: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::domain("t_end", t_end, "must be positive"));
    }
    let relax = OccupancyRelaxation::new(gammas, temps, omega, n_initial)?;
    let samples = samples.max(2);
    Ok((0..samples)
        .map(|i| {
            let t = t_end * i as f64 / (samples - 1) as f64;
            (t, relax.at(t))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn occupancy_unit_at_ln2() {
        let t = 1.0 / std::f64::consts::LN_2;
        assert_relative_eq!(bose_occupancy(1.0, t).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn occupancy_zero_temperature() {
        assert_eq!(bose_occupancy(1.0, 0.0).unwrap(), 0.0);
        let r = transition_rates(1.0, 1.0, 0.0).unwrap();
        assert_eq!((r.g_down, r.g_up), (1.0, 0.0));
    }

    #[test]
    fn occupancy_cold_bath() {
        // 1/(e^10 - 1), 40-digit reference.
        let expected = 4.540_199_100_968_776_8e-5;
        assert_relative_eq!(
            bose_occupancy(1.0, 0.1).unwrap(),
            expected,
            max_relative = 1e-9
        );
    }

    #[test]
    fn occupancy_deep_cold_is_finite_and_positive() {
        let n = bose_occupancy(1.0, 1.0 / 720.0).unwrap();
        assert!(n > 0.0 && n < 1e-300);
        assert_eq!(bose_occupancy(1.0, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn rates_examples() {
        let t = 1.0 / std::f64::consts::LN_2;
        let r = transition_rates(2.0, 1.0, t).unwrap();
        assert_relative_eq!(r.g_down, 4.0, max_relative = 1e-14);
        assert_relative_eq!(r.g_up, 2.0, max_relative = 1e-14);

        let r = transition_rates(0.02, 1.0, 0.1).unwrap();
        assert_relative_eq!(r.g_down, 0.020_000_908_039_820_19, max_relative = 1e-6);
        assert_relative_eq!(r.g_up, 9.080_398_201_937_55e-7, max_relative = 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bose_occupancy(0.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(bose_occupancy(-1.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(bose_occupancy(1.0, -0.1), Err(Error::Domain { .. })));
        assert!(matches!(transition_rates(-1.0, 1.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(
            stationary_occupancy(&[0.0, 0.0], &[1.0, 2.0], 1.0),
            Err(Error::NoCoupling)
        ));
        assert!(matches!(
            stationary_flows(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn stationary_occupancy_examples() {
        let n = stationary_occupancy(&[1.0, 2.0, 3.0], &[0.3, 0.3, 0.3], 1.0).unwrap();
        assert_relative_eq!(n, bose_occupancy(1.0, 0.3).unwrap(), max_relative = 1e-15);

        // n = [0, 2]: T_1 = 0, T_2 with e^{1/T} - 1 = 1/2.
        let t2 = 1.0 / 1.5f64.ln();
        let n = stationary_occupancy(&[1.0, 1.0], &[0.0, t2], 1.0).unwrap();
        assert_relative_eq!(n, 1.0, max_relative = 1e-14);

        // Three-bath example; 40-digit reference.
        let n = stationary_occupancy(&[1e-4, 2e-2, 2e-2], &[0.105, 0.085, 0.107], 1.0).unwrap();
        assert_relative_eq!(n, 4.762_057_560_291_603e-5, max_relative = 1e-12);
    }

    #[test]
    fn flows_examples() {
        let j = stationary_flows(&[1.0, 2.0], &[0.2, 0.2], 1.0).unwrap();
        assert_eq!(j, vec![0.0, 0.0]);

        let (g1, g2, w) = (0.3, 0.7, 1.3);
        let (t1, t2) = (0.4, 0.25);
        let j = stationary_flows(&[g1, g2], &[t1, t2], w).unwrap();
        let big_gamma = g1 * g2 / (g1 + g2);
        let expected = w * big_gamma * (occupancy(w, t1) - occupancy(w, t2));
        assert_relative_eq!(j[0], expected, max_relative = 1e-14);
        assert_relative_eq!(j[1], -expected, max_relative = 1e-14);

        let j = stationary_flows(&[1e-4, 2e-2, 2e-2], &[0.105, 0.085, 0.107], 1.0).unwrap();
        assert_relative_eq!(j[0], 2.547_545_961_637_275e-9, max_relative = 1e-9);
        assert_relative_eq!(j[1], -7.969_272_180_509_943e-7, max_relative = 1e-12);
        assert_relative_eq!(j[2], 7.943_796_720_893_570e-7, max_relative = 1e-12);
    }

    #[test]
    fn decoupled_reservoir_carries_no_flow() {
        let j = stationary_flows(&[1.0, 0.0, 2.0], &[0.3, 5.0, 0.1], 1.0).unwrap();
        assert_eq!(j[1], 0.0);
        assert!(j[0] > 0.0 && j[2] < 0.0);
    }

    #[test]
    fn relaxation_examples() {
        let g = [0.5, 1.5];
        let t = [0.3, 0.9];
        let nbar = stationary_occupancy(&g, &t, 1.0).unwrap();
        let traj = occupancy_ode_oracle(&g, &t, 1.0, nbar, 10.0, 11).unwrap();
        assert!(traj.iter().all(|&(_, n)| n == nbar));

        // single bath from vacuum
        let n1 = bose_occupancy(1.0, 0.7).unwrap();
        let relax = OccupancyRelaxation::new(&[0.4], &[0.7], 1.0, 0.0).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let expected = n1 * (1.0 - (-0.4f64 * t).exp());
            assert_relative_eq!(relax.at(t), expected, max_relative = 1e-13);
        }
    }
}
