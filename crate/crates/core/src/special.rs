//! Riemann zeta for real s > 1 (Euler–Maclaurin).

/// B_2, B_4, ..., B_20.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

const CUTOFF: f64 = 12.0;

/// ζ(s) for s > 1. Returns NaN outside that range.
pub fn zeta(s: f64) -> f64 {
    if !(s > 1.0) {
        return f64::NAN;
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s);
    }
    let n = CUTOFF;
    let mut sum: f64 = (1..CUTOFF as usize).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);

    // Tail: Σ B_2j/(2j)! · s(s+1)…(s+2j−2) · N^{−s−2j+1}
    let mut rising = s; // s(s+1)…(s+2j−2)
    let mut factorial = 2.0; // (2j)!
    let mut power = n.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / factorial * rising * power;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        factorial *= (k + 3.0) * (k + 4.0);
        power /= n * n;
    }
    sum
}
