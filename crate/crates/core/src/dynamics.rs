//! Slow-timescale evolution of reservoir temperatures.
//!
//! The oscillator is slaved to its stationary state, so each reservoir obeys
//! `C_j(T_j) dT_j/dt = −J_j(T_1, …, T_n)`. The integrator advances the
//! reservoir energies `E_j` rather than the temperatures: the flows sum to
//! zero, so total energy is a linear invariant that every step preserves
//! up to rounding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::events::{detect_events, EventRecord};
use crate::physics::{flows_from_occupancies, occupancy, occupancy_slope};
use crate::reservoir::ReservoirSpec;
use crate::scenario::Scenario;
use crate::solver::{hermite, Node, OdeSystem, Outcome, Solver, SolverOptions, SolverStats};

/// One output sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub temps: Vec<f64>,
    /// Stationary energy flows out of each reservoir.
    pub flows: Vec<f64>,
    pub e_total: f64,
}

/// Why an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The spread of the coupled reservoirs fell below `spread_tol`.
    Equalized,
    /// `t_end` was reached first.
    EndTime,
    /// Nothing evolves: fewer than two coupled reservoirs, or they start equal.
    Static,
}

/// Maximal instantaneous temperature difference `max T − min T`.
pub fn max_spread(temps: &[f64]) -> f64 {
    if temps.is_empty() {
        return 0.0;
    }
    let hi = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = temps.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Spread restricted to reservoirs with nonzero coupling.
pub(crate) fn coupled_spread(specs: &[ReservoirSpec], temps: &[f64]) -> f64 {
    let coupled: Vec<f64> = specs
        .iter()
        .zip(temps)
        .filter(|(r, _)| r.gamma > 0.0)
        .map(|(_, &t)| t)
        .collect();
    max_spread(&coupled)
}

/// Energy-variable form of the temperature equations.
pub(crate) struct ReservoirSystem<'a> {
    omega: f64,
    specs: &'a [ReservoirSpec],
    gammas: Vec<f64>,
    rel_tol: f64,
    abs_tol: f64,
}

impl<'a> ReservoirSystem<'a> {
    pub(crate) fn new(scenario: &'a Scenario) -> Self {
        Self {
            omega: scenario.omega(),
            specs: &scenario.reservoirs,
            gammas: scenario.gammas(),
            rel_tol: scenario.integrator.rel_tol,
            abs_tol: scenario.integrator.abs_tol,
        }
    }

    fn temperatures(&self, energies: &[f64]) -> Vec<f64> {
        self.specs
            .iter()
            .zip(energies)
            .map(|(r, &e)| r.temperature_of_energy(e))
            .collect()
    }
}

impl OdeSystem for ReservoirSystem<'_> {
    fn dim(&self) -> usize {
        self.specs.len()
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let occ: Vec<f64> = self
            .temperatures(y)
            .iter()
            .map(|&t| occupancy(self.omega, t))
            .collect();
        flows_from_occupancies(self.omega, &self.gammas, &occ, dy);
        for v in dy.iter_mut() {
            *v = -*v;
        }
    }

    /// `∂(dE_j/dt)/∂E_m = −ω γ_j (δ_jm − p_m) n'(T_m) / C_m(T_m)`.
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let total: f64 = self.gammas.iter().sum();
        let temps = self.temperatures(y);
        let n = y.len();
        for m in 0..n {
            let w = self.omega * occupancy_slope(self.omega, temps[m]) / self.specs[m].capacity_unchecked(temps[m]);
            let p = self.gammas[m] / total;
            for j in 0..n {
                let delta = if j == m { 1.0 } else { 0.0 };
                jac[(j, m)] = -self.gammas[j] * (delta - p) * w;
            }
        }
    }

    /// Local errors are judged in temperature units: `δE_j ≈ C_j δT_j`.
    fn error_scale(&self, y: &[f64], scale: &mut [f64]) {
        for ((s, r), &e) in scale.iter_mut().zip(self.specs).zip(y) {
            let t = r.temperature_of_energy(e.max(0.0));
            *s = r.capacity_unchecked(t) * (self.abs_tol + self.rel_tol * t)
                + f64::MIN_POSITIVE;
        }
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y.iter().all(|&e| e.is_finite() && e > 0.0)
    }

    /// Gershgorin bound on the symmetrized Jacobian `W^½ L W^½`, where
    /// `L = diag(γ) − γγᵀ/Σγ` and `W = diag(ω n'/C)`; it is similar to the
    /// Jacobian, so the bound holds for the real spectrum of the latter.
    fn stiffness_bound(&self, y: &[f64]) -> f64 {
        let total: f64 = self.gammas.iter().sum();
        let temps = self.temperatures(y);
        let root_w: Vec<f64> = temps
            .iter()
            .zip(self.specs)
            .map(|(&t, r)| (self.omega * occupancy_slope(self.omega, t) / r.capacity_unchecked(t)).sqrt())
            .collect();
        let n = y.len();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|m| {
                        let delta = if j == m { self.gammas[j] } else { 0.0 };
                        root_w[j] * (delta - self.gammas[j] * self.gammas[m] / total).abs() * root_w[m]
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// `dT_j/dt = −J_j / C_j(T_j)` at the given temperatures.
pub fn temperature_rhs(scenario: &Scenario, temps: &[f64]) -> Result<Vec<f64>> {
    if temps.len() != scenario.len() {
        return Err(Error::LengthMismatch {
            left: "temps",
            left_len: temps.len(),
            right: "reservoirs",
            right_len: scenario.len(),
        });
    }
    for &t in temps {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::domain("T", t, "must be positive and finite"));
        }
    }
    let flows = flows_or_zero(scenario.omega(), &scenario.gammas(), temps);
    Ok(flows
        .iter()
        .zip(&scenario.reservoirs)
        .zip(temps)
        .map(|((j, r), &t)| -j / r.capacity_unchecked(t))
        .collect())
}

fn flows_or_zero(omega: f64, gammas: &[f64], temps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; temps.len()];
    if gammas.iter().any(|&g| g > 0.0) {
        let occ: Vec<f64> = temps.iter().map(|&t| occupancy(omega, t)).collect();
        flows_from_occupancies(omega, gammas, &occ, &mut out);
    }
    out
}

/// Accepted integrator nodes in energy variables with cubic Hermite
/// interpolation between them.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    omega: f64,
    specs: Vec<ReservoirSpec>,
    nodes: Vec<Node>,
}

impl DenseTrajectory {
    pub(crate) fn new(omega: f64, specs: Vec<ReservoirSpec>, nodes: Vec<Node>) -> Self {
        Self { omega, specs, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reservoirs(&self) -> &[ReservoirSpec] {
        &self.specs
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn node_time(&self, k: usize) -> f64 {
        self.nodes[k].t
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_final(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    pub fn node_temperatures(&self, k: usize) -> Vec<f64> {
        self.to_temperatures(&self.nodes[k].y)
    }

    /// Sign-carrying rate `dE_j/dt` at node k; shares its sign with `dT_j/dt`.
    pub fn node_energy_rate(&self, k: usize, j: usize) -> f64 {
        self.nodes[k].dy[j]
    }

    fn to_temperatures(&self, energies: &[f64]) -> Vec<f64> {
        self.specs
            .iter()
            .zip(energies)
            .map(|(r, &e)| r.temperature_of_energy(e))
            .collect()
    }

    /// Index k with `t_k ≤ t ≤ t_{k+1}` (clamped to the ends).
    fn segment(&self, t: f64) -> usize {
        let n = self.nodes.len();
        if n < 2 {
            return 0;
        }
        let idx = self.nodes.partition_point(|node| node.t <= t);
        idx.saturating_sub(1).min(n - 2)
    }

    pub fn energies_at(&self, t: f64) -> Vec<f64> {
        if self.nodes.len() == 1 {
            return self.nodes[0].y.clone();
        }
        let k = self.segment(t);
        let (a, b) = (&self.nodes[k], &self.nodes[k + 1]);
        (0..self.specs.len()).map(|i| hermite(a, b, t, i).0).collect()
    }

    pub fn temperatures_at(&self, t: f64) -> Vec<f64> {
        self.to_temperatures(&self.energies_at(t))
    }

    pub fn temperature_at(&self, t: f64, j: usize) -> f64 {
        if self.nodes.len() == 1 {
            return self.specs[j].temperature_of_energy(self.nodes[0].y[j]);
        }
        let k = self.segment(t);
        let e = hermite(&self.nodes[k], &self.nodes[k + 1], t, j).0;
        self.specs[j].temperature_of_energy(e)
    }

    /// Interpolated `dE_j/dt` at time t.
    pub fn energy_rate_at(&self, t: f64, j: usize) -> f64 {
        if self.nodes.len() == 1 {
            return self.nodes[0].dy[j];
        }
        let k = self.segment(t);
        hermite(&self.nodes[k], &self.nodes[k + 1], t, j).1
    }

    pub fn point_at(&self, t: f64) -> TrajectoryPoint {
        let energies = self.energies_at(t);
        let temps = self.to_temperatures(&energies);
        let gammas: Vec<f64> = self.specs.iter().map(|r| r.gamma).collect();
        TrajectoryPoint {
            t,
            flows: flows_or_zero(self.omega, &gammas, &temps),
            e_total: energies.iter().sum(),
            temps,
        }
    }
}

/// Result of one integration run.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Vec<TrajectoryPoint>,
    pub events: Vec<EventRecord>,
    pub dense: DenseTrajectory,
    pub stats: SolverStats,
    pub termination: Termination,
    /// Energy-conservation prediction of the final common temperature.
    pub equilibrium: f64,
    pub spread_tol: f64,
}

impl Run {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

/// Default stopping time: 100× the slowest finite pairwise estimate, taken
/// over the pair means and both ends of the initial temperature range.
pub fn default_t_end(scenario: &Scenario) -> Option<f64> {
    if scenario.len() < 2 {
        return None;
    }
    // t_eq(T) has a single minimum in T, so over the temperatures the
    // coupled reservoirs can visit its largest value sits at an end.
    let coupled: Vec<f64> = scenario
        .reservoirs
        .iter()
        .filter(|r| r.gamma > 0.0)
        .map(|r| r.t0)
        .collect();
    let lo = coupled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coupled.iter().copied().fold(0.0, f64::max);
    let n = scenario.len();
    let omega = scenario.omega();
    [
        analysis::pairwise_teq_matrix(scenario),
        analysis::pairwise_teq_matrix_at(&scenario.reservoirs, omega, &vec![lo; n]),
        analysis::pairwise_teq_matrix_at(&scenario.reservoirs, omega, &vec![hi; n]),
    ]
    .iter()
    .filter_map(|m| m.slowest_finite().map(|e| e.t_eq))
    .reduce(f64::max)
    .map(|t| 100.0 * t)
}

/// Integrates the temperature equations from `t = 0` until the coupled
/// reservoirs agree to within `spread_tol`, or until `t_end`.
pub fn integrate(scenario: &Scenario) -> Result<Run> {
    scenario.validate()?;
    let spread_tol = scenario.spread_tol();
    let specs = scenario.reservoirs.clone();
    let equilibrium = analysis::equilibrium_temperature(&specs)?;
    let temps0 = scenario.initial_temperatures();
    let energies0: Vec<f64> = specs.iter().map(|r| r.energy_unchecked(r.t0)).collect();
    let coupled = specs.iter().filter(|r| r.gamma > 0.0).count();
    let t_end = scenario.integrator.t_end.or_else(|| default_t_end(scenario));

    let sys = ReservoirSystem::new(scenario);
    let is_static = coupled < 2 || coupled_spread(&specs, &temps0) < spread_tol || t_end.is_none();
    if is_static {
        let mut dy = vec![0.0; specs.len()];
        sys.rhs(&energies0, &mut dy);
        let mut nodes = vec![Node {
            t: 0.0,
            y: energies0.clone(),
            dy: dy.clone(),
        }];
        if let Some(t) = scenario.integrator.t_end {
            nodes.push(Node { t, y: energies0, dy });
        }
        let dense = DenseTrajectory::new(scenario.omega(), specs, nodes);
        let trajectory = (0..dense.len()).map(|k| dense.point_at(dense.node_time(k))).collect();
        return Ok(Run {
            trajectory,
            events: Vec::new(),
            dense,
            stats: SolverStats::default(),
            termination: Termination::Static,
            equilibrium,
            spread_tol,
        });
    }

    let opts = SolverOptions {
        max_step_growth: scenario.integrator.max_step_growth,
        t_end: t_end.unwrap_or(f64::INFINITY),
        max_steps: scenario.integrator.max_steps,
    };
    let stop_specs = specs.clone();
    let (nodes, stats, outcome) = Solver::new(&sys, opts).run(energies0, |node| {
        let temps: Vec<f64> = stop_specs
            .iter()
            .zip(&node.y)
            .map(|(r, &e)| r.temperature_of_energy(e))
            .collect();
        coupled_spread(&stop_specs, &temps) < spread_tol
    })?;
    let termination = match outcome {
        Outcome::Stopped => Termination::Equalized,
        Outcome::ReachedEnd => Termination::EndTime,
    };

    let dense = DenseTrajectory::new(scenario.omega(), specs, nodes);
    let events = detect_events(&dense, spread_tol);
    let times = output_times(&dense, scenario.output.samples_per_decade, &events);
    let trajectory = times.into_iter().map(|t| dense.point_at(t)).collect();
    Ok(Run {
        trajectory,
        events,
        dense,
        stats,
        termination,
        equilibrium,
        spread_tol,
    })
}

/// `t = 0`, a log-uniform grid between the first step and the end, every
/// event time, and the final time; strictly increasing.
fn output_times(dense: &DenseTrajectory, per_decade: usize, events: &[EventRecord]) -> Vec<f64> {
    let mut times = vec![dense.t_start()];
    let t_final = dense.t_final();
    if dense.len() >= 2 {
        let first = dense.node_time(1);
        let per = per_decade.max(1) as f64;
        let lo = (first.log10() * per).ceil() as i64;
        let hi = (t_final.log10() * per).floor() as i64;
        for m in lo..=hi {
            times.push(10f64.powf(m as f64 / per));
        }
    }
    times.extend(events.iter().map(|e| e.time));
    times.push(t_final);
    times.retain(|&t| t >= 0.0 && t <= t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn three_bath() -> Scenario {
        Scenario::new(
            1.0,
            vec![
                ReservoirSpec::unit(3.0, 1e-4, 0.105),
                ReservoirSpec::unit(3.0, 2e-2, 0.085),
                ReservoirSpec::unit(3.0, 2e-2, 0.107),
            ],
        )
        .unwrap()
    }

    #[test]
    fn spread_examples() {
        assert_eq!(max_spread(&[0.1, 0.1]), 0.0);
        assert_relative_eq!(max_spread(&[0.105, 0.085, 0.107]), 0.022, max_relative = 1e-12);
        assert_eq!(max_spread(&[0.3]), 0.0);
    }

    #[test]
    fn rhs_fixed_point_and_signs() {
        let sc = three_bath();
        assert_eq!(temperature_rhs(&sc, &[0.1, 0.1, 0.1]).unwrap(), vec![0.0; 3]);
        let d = temperature_rhs(&sc, &[0.105, 0.085, 0.107]).unwrap();
        assert!(d[1] > 0.0 && d[2] < 0.0);
        assert!(temperature_rhs(&sc, &[0.1, 0.0, 0.1]).is_err());
    }

    #[test]
    fn rhs_conserves_energy() {
        let sc = three_bath();
        let temps = [0.105, 0.085, 0.107];
        let d = temperature_rhs(&sc, &temps).unwrap();
        let weighted: Vec<f64> = sc
            .reservoirs
            .iter()
            .zip(&temps)
            .zip(&d)
            .map(|((r, &t), &v)| r.capacity_unchecked(t) * v)
            .collect();
        let scale: f64 = weighted.iter().map(|v| v.abs()).sum();
        assert!(weighted.iter().sum::<f64>().abs() <= 1e-12 * scale);
    }

    #[test]
    fn rhs_linearization_matches_decay_rate() {
        // two reservoirs, small ΔT: d(ΔT)/dt ≈ −κ (1/C1 + 1/C2) ΔT
        let r1 = ReservoirSpec::new(3.0, 1.0, 1.0, 2e-2, 0.1).unwrap();
        let r2 = ReservoirSpec::new(2.0, 2.0, 0.5, 5e-2, 0.1).unwrap();
        let sc = Scenario::new(1.0, vec![r1, r2]).unwrap();
        let t = 0.1;
        let dt = 1e-9;
        let d = temperature_rhs(&sc, &[t + dt / 2.0, t - dt / 2.0]).unwrap();
        let rate = -(d[0] - d[1]) / dt;
        let lambda = analysis::linearized_decay_rate(&r1, &r2, 1.0, t).unwrap();
        assert_relative_eq!(rate, lambda, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sc = three_bath();
        let sys = ReservoirSystem::new(&sc);
        let e: Vec<f64> = sc.reservoirs.iter().map(|r| r.energy_unchecked(r.t0)).collect();
        let mut jac = DMatrix::zeros(3, 3);
        sys.jacobian(&e, &mut jac);
        for m in 0..3 {
            let h = 1e-6 * e[m];
            let mut up = e.clone();
            let mut dn = e.clone();
            up[m] += h;
            dn[m] -= h;
            let (mut fu, mut fd) = (vec![0.0; 3], vec![0.0; 3]);
            sys.rhs(&up, &mut fu);
            sys.rhs(&dn, &mut fd);
            for j in 0..3 {
                let fdv = (fu[j] - fd[j]) / (2.0 * h);
                assert!(
                    (jac[(j, m)] - fdv).abs() <= 1e-6 * jac.abs().max() ,
                    "({j},{m}): {} vs {fdv}",
                    jac[(j, m)]
                );
            }
        }
    }

    #[test]
    fn identical_reservoirs_stay_put() {
        let r = ReservoirSpec::unit(3.0, 1e-2, 0.1);
        let run = integrate(&Scenario::new(1.0, vec![r, r]).unwrap()).unwrap();
        assert_eq!(run.termination, Termination::Static);
        assert!(run.events.is_empty());
        assert!(run.trajectory.iter().all(|p| p.temps == vec![0.1, 0.1]));
    }

    #[test]
    fn single_reservoir_is_constant() {
        let sc = Scenario::new(1.0, vec![ReservoirSpec::unit(3.0, 1e-2, 0.1)]).unwrap();
        let run = integrate(&sc).unwrap();
        assert_eq!(run.termination, Termination::Static);
        assert_eq!(run.trajectory.len(), 1);
    }

    #[test]
    fn three_bath_reaches_equilibrium() {
        let run = integrate(&three_bath()).unwrap();
        assert_eq!(run.termination, Termination::Equalized);
        for &t in &run.final_point().temps {
            assert!((t - 0.100_401).abs() < 1e-5, "{t}");
        }
        let e0 = run.trajectory[0].e_total;
        for p in &run.trajectory {
            assert!((p.e_total - e0).abs() <= 1e-12 * e0);
        }
    }

    #[test]
    fn output_times_are_strictly_increasing() {
        let run = integrate(&three_bath()).unwrap();
        assert!(run.trajectory.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(run.trajectory[0].t, 0.0);
    }

    #[test]
    fn decoupled_spectator_does_not_block_equalization() {
        let sc = Scenario::new(
            1.0,
            vec![
                ReservoirSpec::unit(3.0, 1e-2, 0.1),
                ReservoirSpec::unit(3.0, 0.0, 0.5),
                ReservoirSpec::unit(3.0, 1e-2, 0.2),
            ],
        )
        .unwrap();
        let run = integrate(&sc).unwrap();
        assert_eq!(run.termination, Termination::Equalized);
        assert_eq!(run.final_point().temps[1], 0.5);
    }
}
