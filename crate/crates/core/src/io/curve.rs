//! Equalization time of two identical reservoirs as a function of
//! u = ω/2T at fixed ω.

use std::io::Write;

use crate::analysis::equalization_time;
use crate::error::{Error, Result};
use crate::reservoir::ReservoirSpec;

/// `(u, t_eq(u))` for two identical reservoirs with `A = V = 1` and unit
/// pair coupling, so `t_eq` is in units of `1/Γ`.
pub fn emit_teq_curve(omega: f64, alpha: f64, u_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    // γ = 2 on each side gives Γ = γ1γ2/(γ1+γ2) = 1
    let r = ReservoirSpec::new(alpha, 1.0, 1.0, 2.0, 1.0)?;
    u_grid
        .iter()
        .map(|&u| {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::domain("u", u, "must be positive"));
            }
            let est = equalization_time(&r, &r, omega, omega / (2.0 * u))?;
            Ok((u, est.t_eq))
        })
        .collect()
}

/// `count` points spaced evenly in log u over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// The grid used when none is given: 0.05 ≤ u ≤ 10, 1024 points.
pub fn default_u_grid() -> Vec<f64> {
    log_grid(0.05, 10.0, 1024)
}

/// Writes the curve as `u,t_eq` under a comment line stating the units.
pub fn write_teq_curve<W: Write>(mut w: W, omega: f64, alpha: f64, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(
        w,
        "# two identical reservoirs, alpha = {alpha}, A = V = 1, omega = {omega}; t_eq in units of 1/Gamma"
    )?;
    writeln!(w, "u,t_eq")?;
    for (u, t) in curve {
        writeln!(w, "{u:.16e},{t:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::optimal_frequency_ratio;

    #[test]
    fn argmin_matches_optimal_ratio() {
        for alpha in [1.0, 3.0, 6.0] {
            let curve = emit_teq_curve(1.0, alpha, &default_u_grid()).unwrap();
            let (u_min, _) = curve
                .iter()
                .copied()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let expect = optimal_frequency_ratio(alpha) / 2.0;
            assert!((u_min / expect - 1.0).abs() < 1e-2, "{alpha}: {u_min} vs {expect}");
        }
    }

    #[test]
    fn single_interior_minimum() {
        let curve = emit_teq_curve(1.0, 3.0, &default_u_grid()).unwrap();
        let turns = curve
            .windows(3)
            .filter(|w| (w[1].1 - w[0].1).signum() != (w[2].1 - w[1].1).signum())
            .count();
        assert_eq!(turns, 1);
    }

    #[test]
    fn closed_form_point() {
        // t_eq(u) = C(T) sinh²(u) / u² with C = 4T³, T = 1/(2u)
        let u: f64 = 2.5;
        let t = 1.0 / (2.0 * u);
        let expect = 4.0 * t.powi(3) * u.sinh().powi(2) / (u * u);
        let got = emit_teq_curve(1.0, 3.0, &[u]).unwrap()[0].1;
        assert!((got / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_u() {
        assert!(emit_teq_curve(1.0, 3.0, &[0.5, 0.0]).is_err());
    }
}
