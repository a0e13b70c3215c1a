//! Qualitative events along a temperature trajectory.

use serde::{Deserialize, Serialize};

use crate::dynamics::{coupled_spread, DenseTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A reservoir temperature reaches a local minimum or maximum.
    Extremum,
    /// Two reservoirs swap places in the temperature ordering.
    RankChange,
    /// Two reservoirs agree to within the spread tolerance from here on.
    PairEqualized,
    /// All coupled reservoirs agree to within the spread tolerance.
    GlobalEqualized,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Extremum => "extremum",
            EventKind::RankChange => "rank_change",
            EventKind::PairEqualized => "pair_equalized",
            EventKind::GlobalEqualized => "global_equalized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: f64,
    /// 0-based reservoir indices. For a rank change the first index is the
    /// reservoir that becomes the hotter of the two.
    pub reservoirs: Vec<usize>,
    pub detail: String,
}

const MAX_BISECTIONS: usize = 200;

/// Bisection on `[a, b]` for a sign change of `f`; `f(a)` and `f(b)` must
/// have opposite signs.
fn refine<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= 1e-12 * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Detects extrema, rank changes and equalizations on a dense trajectory.
///
/// Rank changes use hysteresis: a pair's ordering only counts once the two
/// temperatures differ by at least `spread_tol`, so numerical chatter
/// between nearly equal reservoirs is not reported.
pub fn detect_events(dense: &DenseTrajectory, spread_tol: f64) -> Vec<EventRecord> {
    let mut events = Vec::new();
    let nodes = dense.len();
    if nodes < 2 {
        return events;
    }
    let n = dense.reservoirs().len();
    let temps: Vec<Vec<f64>> = (0..nodes).map(|k| dense.node_temperatures(k)).collect();

    // extrema: sign changes of dT_j/dt
    for j in 0..n {
        if dense.reservoirs()[j].gamma == 0.0 {
            continue;
        }
        let mut last: Option<(usize, bool)> = None;
        for k in 0..nodes {
            let rate = dense.node_energy_rate(k, j);
            if rate == 0.0 {
                continue;
            }
            let rising = rate > 0.0;
            if let Some((k0, was_rising)) = last {
                if was_rising != rising {
                    let t = refine(
                        |t| dense.energy_rate_at(t, j),
                        dense.node_time(k0),
                        dense.node_time(k),
                    );
                    let value = dense.temperature_at(t, j);
                    let which = if was_rising { "maximum" } else { "minimum" };
                    events.push(EventRecord {
                        kind: EventKind::Extremum,
                        time: t,
                        reservoirs: vec![j],
                        detail: format!("{which} of T_{} = {value:.9e}", j + 1),
                    });
                }
            }
            last = Some((k, rising));
        }
    }

    // rank changes and pairwise equalization
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = |k: usize| temps[k][i] - temps[k][j];
            let mut definite: Option<(usize, bool)> = None;
            for k in 0..nodes {
                let d = diff(k);
                if d.abs() < spread_tol {
                    continue;
                }
                let i_hotter = d > 0.0;
                if let Some((k0, was)) = definite {
                    if was != i_hotter {
                        let t = refine(
                            |t| dense.temperature_at(t, i) - dense.temperature_at(t, j),
                            dense.node_time(k0),
                            dense.node_time(k),
                        );
                        let (hot, cold) = if i_hotter { (i, j) } else { (j, i) };
                        events.push(EventRecord {
                            kind: EventKind::RankChange,
                            time: t,
                            reservoirs: vec![hot, cold],
                            detail: format!("T_{} rises above T_{}", hot + 1, cold + 1),
                        });
                    }
                }
                definite = Some((k, i_hotter));
            }

            if diff(nodes - 1).abs() < spread_tol {
                if let Some(k) = (0..nodes).rev().find(|&k| diff(k).abs() >= spread_tol) {
                    let t = refine(
                        |t| (dense.temperature_at(t, i) - dense.temperature_at(t, j)).abs() - spread_tol,
                        dense.node_time(k),
                        dense.node_time(k + 1),
                    );
                    events.push(EventRecord {
                        kind: EventKind::PairEqualized,
                        time: t,
                        reservoirs: vec![i, j],
                        detail: format!("|T_{} - T_{}| < {spread_tol:e}", i + 1, j + 1),
                    });
                }
            }
        }
    }

    // global equalization of the coupled reservoirs
    let specs = dense.reservoirs();
    let spread = |k: usize| coupled_spread(specs, &temps[k]);
    if spread(nodes - 1) < spread_tol {
        if let Some(k) = (0..nodes).rev().find(|&k| spread(k) >= spread_tol) {
            let t = refine(
                |t| coupled_spread(specs, &dense.temperatures_at(t)) - spread_tol,
                dense.node_time(k),
                dense.node_time(k + 1),
            );
            let members: Vec<usize> = (0..n).filter(|&j| specs[j].gamma > 0.0).collect();
            events.push(EventRecord {
                kind: EventKind::GlobalEqualized,
                time: t,
                reservoirs: members,
                detail: format!("spread < {spread_tol:e}"),
            });
        }
    }

    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::ReservoirSpec;
    use crate::solver::Node;

    /// Dense trajectory from explicit temperature samples of α = 0 reservoirs
    /// (E = T), so node values can be written down directly.
    fn linear_dense(samples: &[(f64, Vec<f64>, Vec<f64>)]) -> DenseTrajectory {
        let n = samples[0].1.len();
        let specs = vec![
            ReservoirSpec {
                alpha: 0.0,
                a: 1.0,
                volume: 1.0,
                gamma: 1.0,
                t0: 1.0,
            };
            n
        ];
        let nodes = samples
            .iter()
            .map(|(t, y, dy)| Node {
                t: *t,
                y: y.clone(),
                dy: dy.clone(),
            })
            .collect();
        DenseTrajectory::new(1.0, specs, nodes)
    }

    #[test]
    fn constant_trajectory_has_no_events() {
        let d = linear_dense(&[
            (0.0, vec![1.0, 1.0], vec![0.0, 0.0]),
            (1.0, vec![1.0, 1.0], vec![0.0, 0.0]),
        ]);
        assert!(detect_events(&d, 1e-6).is_empty());
    }

    #[test]
    fn parabola_extremum_located() {
        // T = 1 + (t - 0.3)^2 sampled at 0 and 1: minimum at 0.3
        let f = |t: f64| 1.0 + (t - 0.3) * (t - 0.3);
        let df = |t: f64| 2.0 * (t - 0.3);
        let d = linear_dense(&[
            (0.0, vec![f(0.0), 5.0], vec![df(0.0), 0.0]),
            (1.0, vec![f(1.0), 5.0], vec![df(1.0), 0.0]),
        ]);
        let ev = detect_events(&d, 1e-9);
        let ext: Vec<_> = ev.iter().filter(|e| e.kind == EventKind::Extremum).collect();
        assert_eq!(ext.len(), 1);
        assert!((ext[0].time - 0.3).abs() < 1e-9);
        assert!(ext[0].detail.starts_with("minimum of T_1"));
    }

    #[test]
    fn crossing_reports_rank_change() {
        // T_1 = 1 + t, T_2 = 2 - t cross at t = 0.5
        let d = linear_dense(&[
            (0.0, vec![1.0, 2.0], vec![1.0, -1.0]),
            (1.0, vec![2.0, 1.0], vec![1.0, -1.0]),
        ]);
        let ev = detect_events(&d, 1e-6);
        let rc: Vec<_> = ev.iter().filter(|e| e.kind == EventKind::RankChange).collect();
        assert_eq!(rc.len(), 1);
        assert_eq!(rc[0].reservoirs, vec![0, 1]);
        assert!((rc[0].time - 0.5).abs() < 1e-9);
    }

    #[test]
    fn chatter_below_tolerance_is_ignored() {
        let d = linear_dense(&[
            (0.0, vec![1.0, 1.0 + 1e-9], vec![0.0, 0.0]),
            (1.0, vec![1.0 + 1e-9, 1.0], vec![0.0, 0.0]),
            (2.0, vec![1.0, 1.0 + 1e-9], vec![0.0, 0.0]),
        ]);
        let ev = detect_events(&d, 1e-6);
        assert!(ev.iter().all(|e| e.kind != EventKind::RankChange));
    }

    #[test]
    fn converging_pair_equalizes_once() {
        // T_1 = 1 + e^{-t}, T_2 = 1 - e^{-t}: |ΔT| = 2e^{-t} hits 1e-3 at ln 2000
        let samples: Vec<_> = (0..=20)
            .map(|k| {
                let t = 0.5 * k as f64;
                let x = (-t).exp();
                (t, vec![1.0 + x, 1.0 - x], vec![-x, x])
            })
            .collect();
        let ev = detect_events(&linear_dense(&samples), 1e-3);
        let kinds: Vec<_> = ev.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::PairEqualized, EventKind::GlobalEqualized]);
        assert!((ev[0].time - 2000f64.ln()).abs() < 1e-3);
        assert_eq!(ev[0].time, ev[1].time);
    }
}
