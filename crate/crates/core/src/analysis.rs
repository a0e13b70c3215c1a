//! Closed-form and root-finding analyses of the equalization process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{check_gamma, check_omega, occupancy, occupancy_of_ratio};
use crate::reservoir::ReservoirSpec;
use crate::roots;
use crate::scenario::Scenario;

/// Below this relative temperature difference the conductivity switches to
/// its equal-temperature form.
const NEAR_EQUAL: f64 = 1e-6;

/// Equalization-time estimate for a pair of reservoirs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizationEstimate {
    /// Reservoir indices (0-based).
    pub pair: (usize, usize),
    /// Temperature at which the estimate was evaluated.
    pub temperature: f64,
    /// `c_min / kappa`; infinite when either reservoir is decoupled.
    pub t_eq: f64,
    pub kappa: f64,
    pub c_min: f64,
}

impl EqualizationEstimate {
    pub fn is_finite(&self) -> bool {
        self.t_eq.is_finite()
    }
}

/// Harmonic combination `γ1 γ2 / (γ1 + γ2)`, zero if either rate is zero.
pub fn pair_coupling(gamma1: f64, gamma2: f64) -> f64 {
    if gamma1 == 0.0 || gamma2 == 0.0 {
        0.0
    } else {
        gamma1 * gamma2 / (gamma1 + gamma2)
    }
}

fn energy_residual<'a>(members: impl Iterator<Item = &'a ReservoirSpec> + Clone) -> impl Fn(f64) -> f64 {
    let target: f64 = members.clone().map(|r| r.energy_unchecked(r.t0)).sum();
    let specs: Vec<ReservoirSpec> = members.copied().collect();
    move |t| specs.iter().map(|r| r.energy_unchecked(t)).sum::<f64>() - target
}

/// Common temperature at which the given reservoirs hold the same total
/// energy as at their initial temperatures.
fn common_temperature(members: &[&ReservoirSpec]) -> f64 {
    let lo = members.iter().map(|r| r.t0).fold(f64::INFINITY, f64::min);
    let hi = members.iter().map(|r| r.t0).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return lo;
    }
    let alpha = members[0].alpha;
    if members.iter().all(|r| r.alpha == alpha) {
        let ext: f64 = members.iter().map(|r| r.extent()).sum();
        let e: f64 = members.iter().map(|r| r.energy_unchecked(r.t0)).sum();
        let closed = (e / ext).powf(1.0 / (alpha + 1.0));
        debug_assert!({
            let f = energy_residual(members.iter().copied());
            let root = roots::brent(f, lo, hi, 1e-15, 0.0).unwrap_or(closed);
            ((root - closed) / closed).abs() < 1e-10
        });
        return closed.clamp(lo, hi);
    }
    let f = energy_residual(members.iter().copied());
    roots::brent(f, lo, hi, 1e-15, 0.0)
        .expect("energy residual changes sign between min and max T0")
}

/// Final common temperature fixed by total energy conservation,
/// `Σ A_j V_j T0_j^(α_j+1) = Σ A_j V_j T_eq^(α_j+1)`.
pub fn equilibrium_temperature(reservoirs: &[ReservoirSpec]) -> Result<f64> {
    if reservoirs.is_empty() {
        return Err(Error::InvalidScenario(vec![
            "reservoir: at least one reservoir is required".into(),
        ]));
    }
    let members: Vec<&ReservoirSpec> = reservoirs.iter().collect();
    Ok(common_temperature(&members))
}

fn check_positive_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("T", t, "must be positive and finite"))
    }
}

/// Two-reservoir thermal conductivity κ(T1, T2), defined by `J = −κ ΔT`.
///
/// Equivalent to `−(2ωΓ/(T1−T2)) · sinh(ω/2T1 − ω/2T2) / (sinh(ω/2T1) sinh(ω/2T2))`;
/// evaluated as the difference quotient `ωΓ (n(T2) − n(T1)) / (T2 − T1)`,
/// which cannot overflow.
pub fn thermal_conductivity(omega: f64, coupling: f64, t1: f64, t2: f64) -> Result<f64> {
    check_omega(omega)?;
    check_gamma(coupling)?;
    check_positive_temperature(t1)?;
    check_positive_temperature(t2)?;
    if (t1 - t2).abs() < NEAR_EQUAL * t1.max(t2) {
        return kappa_limit(omega, coupling, 0.5 * (t1 + t2));
    }
    Ok(omega * coupling * (occupancy(omega, t2) - occupancy(omega, t1)) / (t2 - t1))
}

/// Equal-temperature conductivity `Γ (ω/2T)² / sinh²(ω/2T)`.
pub fn kappa_limit(omega: f64, coupling: f64, t: f64) -> Result<f64> {
    check_omega(omega)?;
    check_gamma(coupling)?;
    check_positive_temperature(t)?;
    Ok(coupling * kappa_factor(omega / t))
}

/// `(x/2)² / sinh²(x/2) = x² n (n+1)` with `n = 1/(eˣ − 1)`.
fn kappa_factor(x: f64) -> f64 {
    let n = occupancy_of_ratio(x);
    x * x * n * (n + 1.0)
}

/// `t_eq = C_min(T) / κ(T)` for two reservoirs near a common temperature T.
pub fn equalization_time(
    r1: &ReservoirSpec,
    r2: &ReservoirSpec,
    omega: f64,
    t: f64,
) -> Result<EqualizationEstimate> {
    check_positive_temperature(t)?;
    let coupling = pair_coupling(r1.gamma, r2.gamma);
    let kappa = kappa_limit(omega, coupling, t)?;
    let c_min = r1.capacity_unchecked(t).min(r2.capacity_unchecked(t));
    let t_eq = if kappa > 0.0 { c_min / kappa } else { f64::INFINITY };
    Ok(EqualizationEstimate {
        pair: (0, 1),
        temperature: t,
        t_eq,
        kappa,
        c_min,
    })
}

/// Exact small-ΔT decay rate `κ(T) (1/C1 + 1/C2)` of the temperature
/// difference of two reservoirs.
pub fn linearized_decay_rate(r1: &ReservoirSpec, r2: &ReservoirSpec, omega: f64, t: f64) -> Result<f64> {
    check_positive_temperature(t)?;
    let kappa = kappa_limit(omega, pair_coupling(r1.gamma, r2.gamma), t)?;
    Ok(kappa * (1.0 / r1.capacity_unchecked(t) + 1.0 / r2.capacity_unchecked(t)))
}

/// The ratio x = ω/T minimizing t_eq: positive root of `x/(α+2) = tanh(x/2)`.
///
/// Returns 0 for `alpha_min ≤ 0`, where only the trivial root exists.
pub fn optimal_frequency_ratio(alpha_min: f64) -> f64 {
    if !(alpha_min > 0.0) {
        return 0.0;
    }
    let slope = 1.0 / (alpha_min + 2.0);
    let g = |x: f64| (0.5 * x).tanh() - slope * x;
    let hi = alpha_min + 2.0;
    // g is concave with g(0) = 0 and g'(0) > 0, so it is positive on (0, root).
    let mut lo = 0.5 * hi;
    while g(lo) <= 0.0 {
        lo *= 0.5;
    }
    roots::bisect(g, lo, hi, 1e-12).unwrap_or(0.0)
}

/// Symmetric table of pairwise equalization estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeqMatrix {
    pub size: usize,
    /// Row-major `size × size`; the diagonal is `None`.
    pub entries: Vec<Option<EqualizationEstimate>>,
}

impl TeqMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<&EqualizationEstimate> {
        self.entries.get(i * self.size + j).and_then(Option::as_ref)
    }

    /// Upper-triangle estimates (i < j).
    pub fn estimates(&self) -> impl Iterator<Item = &EqualizationEstimate> {
        self.entries
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / self.size < k % self.size)
            .filter_map(|(_, e)| e.as_ref())
    }

    pub fn fastest(&self) -> Option<&EqualizationEstimate> {
        self.estimates().min_by(|a, b| a.t_eq.total_cmp(&b.t_eq))
    }

    pub fn slowest_finite(&self) -> Option<&EqualizationEstimate> {
        self.estimates()
            .filter(|e| e.is_finite())
            .max_by(|a, b| a.t_eq.total_cmp(&b.t_eq))
    }
}

/// Pairwise estimates evaluated at the mean of each pair's temperatures.
///
/// These are order-of-magnitude estimates: the underlying formula assumes
/// nearly equal temperatures.
pub fn pairwise_teq_matrix_at(reservoirs: &[ReservoirSpec], omega: f64, temps: &[f64]) -> TeqMatrix {
    let size = reservoirs.len();
    let mut entries = vec![None; size * size];
    for i in 0..size {
        for j in (i + 1)..size {
            let t = 0.5 * (temps[i] + temps[j]);
            if let Ok(mut e) = equalization_time(&reservoirs[i], &reservoirs[j], omega, t) {
                e.pair = (i, j);
                let mut mirror = e.clone();
                mirror.pair = (j, i);
                entries[i * size + j] = Some(e);
                entries[j * size + i] = Some(mirror);
            }
        }
    }
    TeqMatrix { size, entries }
}

/// Pairwise estimates at the scenario's initial temperatures.
pub fn pairwise_teq_matrix(scenario: &Scenario) -> TeqMatrix {
    pairwise_teq_matrix_at(
        &scenario.reservoirs,
        scenario.omega(),
        &scenario.initial_temperatures(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Members of the merged subset (0-based, sorted).
    pub subset: Vec<usize>,
    /// The two subsets joined at this step.
    pub parts: [Vec<usize>; 2],
    /// Equalization-time estimate between the two parts.
    pub predicted_time_scale: f64,
    /// Common temperature the merged subset settles at.
    pub plateau_temp: f64,
}

/// Predicted hierarchy of equalizations, fastest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub steps: Vec<MergeStep>,
}

impl MergePlan {
    /// Plateaus visited by the subset containing `reservoir`, in order.
    pub fn plateaus_of(&self, reservoir: usize) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.subset.contains(&reservoir))
            .map(|s| s.plateau_temp)
            .collect()
    }
}

/// Coupling of a co-thermal subset to the oscillator: flows into its
/// members add, so the rates do too.
fn merged_coupling(a: f64, b: f64) -> f64 {
    a + b
}

struct Cluster {
    members: Vec<usize>,
    temperature: f64,
    gamma: f64,
}

/// Greedy merge simulation: repeatedly join the two subsets with the
/// shortest estimated equalization time, treating each merged subset as a
/// single reservoir at its energy-conserving common temperature.
pub fn staged_equalization_plan(scenario: &Scenario) -> MergePlan {
    let omega = scenario.omega();
    let specs = &scenario.reservoirs;
    let mut clusters: Vec<Cluster> = specs
        .iter()
        .enumerate()
        .map(|(i, r)| Cluster {
            members: vec![i],
            temperature: r.t0,
            gamma: r.gamma,
        })
        .collect();
    let capacity = |c: &Cluster, t: f64| -> f64 {
        c.members.iter().map(|&m| specs[m].capacity_unchecked(t)).sum()
    };

    let mut steps = Vec::new();
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        let mut found = false;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let t = 0.5 * (clusters[a].temperature + clusters[b].temperature);
                let coupling = pair_coupling(clusters[a].gamma, clusters[b].gamma);
                let kappa = coupling * kappa_factor(omega / t);
                let c_min = capacity(&clusters[a], t).min(capacity(&clusters[b], t));
                let t_eq = if kappa > 0.0 { c_min / kappa } else { f64::INFINITY };
                if !found || t_eq < best.2 {
                    best = (a, b, t_eq);
                    found = true;
                }
            }
        }
        let (a, b, t_eq) = best;
        let second = clusters.remove(b);
        let first = clusters.remove(a);
        let mut members = [first.members.clone(), second.members.clone()].concat();
        members.sort_unstable();
        let refs: Vec<&ReservoirSpec> = members.iter().map(|&m| &specs[m]).collect();
        let plateau = common_temperature(&refs);
        steps.push(MergeStep {
            subset: members.clone(),
            parts: [first.members, second.members],
            predicted_time_scale: t_eq,
            plateau_temp: plateau,
        });
        clusters.insert(
            a,
            Cluster {
                members,
                temperature: plateau,
                gamma: merged_coupling(first.gamma, second.gamma),
            },
        );
    }
    MergePlan { steps }
}
