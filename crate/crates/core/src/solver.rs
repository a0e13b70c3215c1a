//! Adaptive integrator for autonomous systems with widely separated
//! timescales.
//!
//! Non-stiff stretches use the Dormand–Prince 5(4) pair with PI step-size
//! control. When the explicit step is limited by stability (detected from
//! the last two stages) or collapses relative to `t`, the solver switches to
//! variable-step BDF of order 1–2 with damped Newton iterations on the
//! analytic Jacobian, and switches back once the problem is no longer stiff.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>);
    /// Per-component error scale: a local error `δ_i` is acceptable when
    /// `δ_i / scale_i ≲ 1`.
    fn error_scale(&self, y: &[f64], scale: &mut [f64]);
    /// Whether `y` lies in the domain of the right-hand side.
    fn admissible(&self, y: &[f64]) -> bool;
    /// Upper bound on the spectral radius of the Jacobian at `y`.
    fn stiffness_bound(&self, y: &[f64]) -> f64;
}

/// An accepted state with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub implicit_steps: usize,
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
    pub newton_failures: usize,
    /// Explicit → implicit switches.
    pub implicit_switches: usize,
    /// Implicit → explicit switches.
    pub explicit_switches: usize,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_step_growth: f64,
    pub t_end: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The stop predicate fired.
    Stopped,
    ReachedEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Explicit,
    Implicit,
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_SHRINK: f64 = 0.2;
const PI_BETA: f64 = 0.04;
/// |hλ| beyond which an explicit step is taken to be stability-limited.
const STIFF_HLAMBDA: f64 = 3.25;
const STIFF_HITS: usize = 15;
/// h·ρ below which the explicit method is stable for the current step.
const NONSTIFF_HRHO: f64 = 1.0;
const NONSTIFF_HITS: usize = 20;
/// Explicit steps shorter than this fraction of t trigger the implicit method.
const COLLAPSE_RATIO: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-3;
const NEWTON_MAX_ITER: usize = 10;
const MAX_CONSECUTIVE_FAILURES: usize = 60;

fn rms(v: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(a, b)| (a / b) * (a / b)).sum();
    (s / v.len() as f64).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

enum Attempt {
    Accepted {
        y: Vec<f64>,
        dy: Vec<f64>,
        h_used: f64,
        h_next: f64,
    },
    Rejected { h_next: f64, invalid: bool },
}

pub struct Solver<'a, S: OdeSystem> {
    sys: &'a S,
    opts: SolverOptions,
    nodes: Vec<Node>,
    stats: SolverStats,
    mode: Mode,
    facold: f64,
    stiff_hits: usize,
    calm_hits: usize,
    nonstiff_hits: usize,
}

impl<'a, S: OdeSystem> Solver<'a, S> {
    pub fn new(sys: &'a S, opts: SolverOptions) -> Self {
        Self {
            sys,
            opts,
            nodes: Vec::new(),
            stats: SolverStats::default(),
            mode: Mode::Explicit,
            facold: 1e-4,
            stiff_hits: 0,
            calm_hits: 0,
            nonstiff_hits: 0,
        }
    }

    fn rhs(&mut self, y: &[f64]) -> Vec<f64> {
        let mut dy = vec![0.0; y.len()];
        self.sys.rhs(y, &mut dy);
        self.stats.rhs_evals += 1;
        dy
    }

    fn scale(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut sa = vec![0.0; n];
        let mut sb = vec![0.0; n];
        self.sys.error_scale(a, &mut sa);
        self.sys.error_scale(b, &mut sb);
        sa.iter().zip(&sb).map(|(x, y)| x.max(*y)).collect()
    }

    /// Scale-free initial step: a small fraction of the state's own
    /// timescale, capped by a curvature estimate.
    fn initial_step(&mut self, y: &[f64], dy: &[f64]) -> f64 {
        let mut sc = vec![0.0; y.len()];
        self.sys.error_scale(y, &mut sc);
        let d0 = rms(y, &sc);
        let d1 = rms(dy, &sc);
        let h0 = 1e-2 * d0 / d1;
        let y1: Vec<f64> = y.iter().zip(dy).map(|(a, b)| a + h0 * b).collect();
        if !self.sys.admissible(&y1) {
            return 1e-3 * h0;
        }
        let f1 = self.rhs(&y1);
        let diff: Vec<f64> = f1.iter().zip(dy).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff, &sc) / h0;
        let h1 = if d2 > 0.0 { (1e-2 / d2).sqrt() } else { 100.0 * h0 };
        h0.min(h1).min(100.0 * h0)
    }

    pub fn run<F>(mut self, y0: Vec<f64>, mut stop: F) -> Result<(Vec<Node>, SolverStats, Outcome)>
    where
        F: FnMut(&Node) -> bool,
    {
        let dy0 = self.rhs(&y0);
        if !all_finite(&dy0) {
            return Err(Error::NonFinite {
                t: 0.0,
                detail: "right-hand side is not finite at the initial state".into(),
            });
        }
        let mut h = self.initial_step(&y0, &dy0);
        self.nodes.push(Node { t: 0.0, y: y0, dy: dy0 });
        let mut failures = 0usize;

        loop {
            let last = self.nodes.last().expect("at least one node");
            let t = last.t;
            if t >= self.opts.t_end {
                return Ok((self.nodes, self.stats, Outcome::ReachedEnd));
            }
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::TooManySteps {
                    t,
                    limit: self.opts.max_steps,
                });
            }
            if !(h > 16.0 * f64::EPSILON * t.abs()) || h == 0.0 {
                return Err(Error::StepUnderflow { t, h });
            }
            let mut step = h;
            let mut hits_end = false;
            if t + step >= self.opts.t_end {
                step = self.opts.t_end - t;
                hits_end = true;
            }

            let attempt = match self.mode {
                Mode::Explicit => self.explicit_attempt(step),
                Mode::Implicit => self.implicit_attempt(step),
            };
            match attempt {
                Attempt::Accepted { y, dy, h_used, h_next } => {
                    failures = 0;
                    self.stats.accepted += 1;
                    if self.mode == Mode::Implicit {
                        self.stats.implicit_steps += 1;
                    }
                    let hits_end = hits_end && h_used == step;
                    let t_new = if hits_end { self.opts.t_end } else { t + h_used };
                    let node = Node { t: t_new, y, dy };
                    let done = stop(&node);
                    self.nodes.push(node);
                    if done {
                        return Ok((self.nodes, self.stats, Outcome::Stopped));
                    }
                    h = if hits_end { h } else { h_next };
                    self.maybe_switch(h_used, &mut h);
                }
                Attempt::Rejected { h_next, invalid } => {
                    self.stats.rejected += 1;
                    if invalid {
                        failures += 1;
                        if failures > MAX_CONSECUTIVE_FAILURES {
                            return Err(Error::NonFinite {
                                t,
                                detail: "every trial step leaves the admissible region".into(),
                            });
                        }
                    }
                    h = h_next;
                }
            }
        }
    }

    fn maybe_switch(&mut self, h_used: f64, h: &mut f64) {
        let last = self.nodes.last().unwrap();
        match self.mode {
            Mode::Explicit => {
                let collapsed = last.t > 0.0 && h_used < COLLAPSE_RATIO * last.t;
                if self.stiff_hits >= STIFF_HITS || collapsed {
                    self.mode = Mode::Implicit;
                    self.stats.implicit_switches += 1;
                    self.stiff_hits = 0;
                    self.nonstiff_hits = 0;
                    *h = h.min(self.opts.max_step_growth * h_used);
                }
            }
            Mode::Implicit => {
                let rho = self.sys.stiffness_bound(&last.y);
                if rho * h_used < NONSTIFF_HRHO {
                    self.nonstiff_hits += 1;
                } else {
                    self.nonstiff_hits = 0;
                }
                if self.nonstiff_hits >= NONSTIFF_HITS {
                    self.mode = Mode::Explicit;
                    self.stats.explicit_switches += 1;
                    self.nonstiff_hits = 0;
                    self.stiff_hits = 0;
                    self.facold = 1e-4;
                }
            }
        }
    }

    fn explicit_attempt(&mut self, h: f64) -> Attempt {
        let node = self.nodes.last().unwrap();
        let y = node.y.clone();
        let k1 = node.dy.clone();
        let n = y.len();
        let growth = self.opts.max_step_growth;

        let stage = |ks: &[&Vec<f64>], coeffs: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let s: f64 = ks.iter().zip(coeffs).map(|(k, c)| c * k[i]).sum();
                    y[i] + h * s
                })
                .collect()
        };
        let reject_invalid = Attempt::Rejected {
            h_next: 0.5 * h,
            invalid: true,
        };

        let mut ks: Vec<Vec<f64>> = vec![k1];
        for coeffs in [&A2[..], &A3[..], &A4[..], &A5[..], &A6[..]] {
            let refs: Vec<&Vec<f64>> = ks.iter().collect();
            let yi = stage(&refs, coeffs);
            if !self.sys.admissible(&yi) {
                return reject_invalid;
            }
            let k = self.rhs(&yi);
            if !all_finite(&k) {
                return reject_invalid;
            }
            ks.push(k);
        }
        let refs: Vec<&Vec<f64>> = ks.iter().collect();
        let y_stiff = stage(&refs[..5], &A6);
        let y_new = stage(&refs, &A7);
        if !self.sys.admissible(&y_new) {
            return reject_invalid;
        }
        let k7 = self.rhs(&y_new);
        if !all_finite(&k7) {
            return reject_invalid;
        }

        let sc = self.scale(&y, &y_new);
        let err_vec: Vec<f64> = (0..n)
            .map(|i| {
                h * (E[0] * ks[0][i]
                    + E[2] * ks[2][i]
                    + E[3] * ks[3][i]
                    + E[4] * ks[4][i]
                    + E[5] * ks[5][i]
                    + E[6] * k7[i])
            })
            .collect();
        let err = rms(&err_vec, &sc);
        if !err.is_finite() {
            return reject_invalid;
        }

        let expo = 0.2 - PI_BETA * 0.75;
        let fac11 = err.powf(expo);
        if err <= 1.0 {
            let fac = (fac11 / self.facold.powf(PI_BETA) / SAFETY).clamp(1.0 / growth, 1.0 / MIN_SHRINK);
            self.facold = err.max(1e-4);

            // stiffness detection from the last two stages at t + h
            let dk: Vec<f64> = k7.iter().zip(&ks[5]).map(|(a, b)| a - b).collect();
            let dyv: Vec<f64> = y_new.iter().zip(&y_stiff).map(|(a, b)| a - b).collect();
            let den = rms(&dyv, &sc);
            if den > 0.0 {
                let hlambda = h * rms(&dk, &sc) / den;
                if hlambda > STIFF_HLAMBDA {
                    self.calm_hits = 0;
                    self.stiff_hits += 1;
                } else {
                    self.calm_hits += 1;
                    if self.calm_hits == 6 {
                        self.stiff_hits = 0;
                    }
                }
            }
            Attempt::Accepted {
                y: y_new,
                dy: k7,
                h_used: h,
                h_next: h / fac,
            }
        } else {
            let shrink = (fac11 / SAFETY).min(1.0 / MIN_SHRINK);
            Attempt::Rejected {
                h_next: h / shrink,
                invalid: false,
            }
        }
    }

    fn implicit_attempt(&mut self, h_in: f64) -> Attempt {
        let len = self.nodes.len();
        let n = self.sys.dim();
        let growth = self.opts.max_step_growth;
        let cur = &self.nodes[len - 1];
        let t0 = cur.t;
        let y0 = cur.y.clone();
        let dy0 = cur.dy.clone();

        let order = if len >= 3 { 2 } else { 1 };
        let hp = if len >= 2 { t0 - self.nodes[len - 2].t } else { f64::INFINITY };
        let h = if len >= 2 { h_in.min(growth * hp) } else { h_in };
        let t1 = t0 + h;

        let (beta, psi): (f64, Vec<f64>) = if order == 2 {
            let w = h / hp;
            let a1 = (1.0 + w) * (1.0 + w) / (1.0 + 2.0 * w);
            let a2 = w * w / (1.0 + 2.0 * w);
            let yp = &self.nodes[len - 2].y;
            (
                (1.0 + w) / (1.0 + 2.0 * w),
                (0..n).map(|i| a1 * y0[i] - a2 * yp[i]).collect(),
            )
        } else {
            (1.0, y0.clone())
        };

        // predictor: extrapolating polynomial through the recent history
        let mut z: Vec<f64> = if len >= 3 {
            let (p2, p1) = (&self.nodes[len - 3], &self.nodes[len - 2]);
            (0..n)
                .map(|i| lagrange3([p2.t, p1.t, t0], [p2.y[i], p1.y[i], y0[i]], t1))
                .collect()
        } else {
            (0..n).map(|i| y0[i] + h * dy0[i]).collect()
        };
        if !self.sys.admissible(&z) {
            z = y0.clone();
        }

        let mut jac = DMatrix::zeros(n, n);
        self.sys.jacobian(&z, &mut jac);
        self.stats.jacobian_evals += 1;
        let iteration = DMatrix::identity(n, n) - jac * (h * beta);
        let lu = iteration.lu();

        let mut sc = vec![0.0; n];
        self.sys.error_scale(&y0, &mut sc);
        let residual = |s: &mut Self, z: &[f64]| -> Vec<f64> {
            let f = s.rhs(z);
            (0..n).map(|i| z[i] - h * beta * f[i] - psi[i]).collect()
        };

        let mut converged = false;
        let mut r = residual(self, &z);
        let mut prev_norm = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            if !all_finite(&r) {
                break;
            }
            let rhs = nalgebra::DVector::from_iterator(n, r.iter().map(|v| -v));
            let Some(delta) = lu.solve(&rhs) else { break };
            let mut lambda = 1.0;
            let mut trial: Vec<f64>;
            loop {
                trial = (0..n).map(|i| z[i] + lambda * delta[i]).collect();
                if self.sys.admissible(&trial) || lambda < 1e-3 {
                    break;
                }
                lambda *= 0.5;
            }
            if !self.sys.admissible(&trial) {
                break;
            }
            let dnorm = lambda * rms(delta.as_slice(), &sc);
            z = trial;
            r = residual(self, &z);
            if dnorm <= NEWTON_TOL {
                converged = true;
                break;
            }
            if dnorm > 2.0 * prev_norm {
                break;
            }
            prev_norm = dnorm;
        }
        if !converged {
            self.stats.newton_failures += 1;
            return Attempt::Rejected {
                h_next: 0.25 * h,
                invalid: !all_finite(&r),
            };
        }

        let lte: Vec<f64> = if order == 2 {
            let (p2, p1) = (&self.nodes[len - 3], &self.nodes[len - 2]);
            (0..n)
                .map(|i| {
                    let d3 = divided_difference4([p2.t, p1.t, t0, t1], [p2.y[i], p1.y[i], y0[i], z[i]]);
                    d3 * h * h * (h + hp) * (h + hp) / (2.0 * h + hp)
                })
                .collect()
        } else if len >= 2 {
            let p1 = &self.nodes[len - 2];
            (0..n)
                .map(|i| divided_difference3([p1.t, t0, t1], [p1.y[i], y0[i], z[i]]) * h * h)
                .collect()
        } else {
            (0..n).map(|i| 0.5 * (z[i] - y0[i] - h * dy0[i])).collect()
        };
        let sc = self.scale(&y0, &z);
        let err = rms(&lte, &sc);
        let p = order as f64;
        let fac = if err > 0.0 {
            SAFETY * err.powf(-1.0 / (p + 1.0))
        } else {
            growth
        };
        if err <= 1.0 {
            let dy = self.rhs(&z);
            if !all_finite(&dy) {
                return Attempt::Rejected {
                    h_next: 0.5 * h,
                    invalid: true,
                };
            }
            Attempt::Accepted {
                y: z,
                dy,
                h_used: h,
                h_next: h * fac.clamp(MIN_SHRINK, growth),
            }
        } else {
            Attempt::Rejected {
                h_next: h * fac.clamp(MIN_SHRINK, 0.9),
                invalid: false,
            }
        }
    }
}

fn lagrange3(t: [f64; 3], y: [f64; 3], x: f64) -> f64 {
    let l0 = (x - t[1]) * (x - t[2]) / ((t[0] - t[1]) * (t[0] - t[2]));
    let l1 = (x - t[0]) * (x - t[2]) / ((t[1] - t[0]) * (t[1] - t[2]));
    let l2 = (x - t[0]) * (x - t[1]) / ((t[2] - t[0]) * (t[2] - t[1]));
    l0 * y[0] + l1 * y[1] + l2 * y[2]
}

fn divided_difference3(t: [f64; 3], y: [f64; 3]) -> f64 {
    let d01 = (y[1] - y[0]) / (t[1] - t[0]);
    let d12 = (y[2] - y[1]) / (t[2] - t[1]);
    (d12 - d01) / (t[2] - t[0])
}

fn divided_difference4(t: [f64; 4], y: [f64; 4]) -> f64 {
    let a = divided_difference3([t[0], t[1], t[2]], [y[0], y[1], y[2]]);
    let b = divided_difference3([t[1], t[2], t[3]], [y[1], y[2], y[3]]);
    (b - a) / (t[3] - t[0])
}

/// Cubic Hermite interpolation between two nodes; returns value and slope.
pub fn hermite(a: &Node, b: &Node, t: f64, i: usize) -> (f64, f64) {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let value = (2.0 * s3 - 3.0 * s2 + 1.0) * a.y[i]
        + (s3 - 2.0 * s2 + s) * h * a.dy[i]
        + (-2.0 * s3 + 3.0 * s2) * b.y[i]
        + (s3 - s2) * h * b.dy[i];
    let slope = ((6.0 * s2 - 6.0 * s) * a.y[i]
        + (3.0 * s2 - 4.0 * s + 1.0) * h * a.dy[i]
        + (-6.0 * s2 + 6.0 * s) * b.y[i]
        + (3.0 * s2 - 2.0 * s) * h * b.dy[i])
        / h;
    (value, slope)
}
