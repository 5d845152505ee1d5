//! Small numeric helpers shared across the crate: deterministic summation,
//! polynomial extrapolation and adaptive 1D quadrature.

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// accurate to O(log n) rounding growth, which keeps probe reports and
/// quadrature results bit-reproducible regardless of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Neville polynomial extrapolation of the samples `(h_i, y_i)` to `h = 0`.
///
/// Used for Richardson-style boundary limits: callers pass the last few
/// `(1 - r, value)` pairs of a ray profile.
pub fn neville_extrapolate(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    assert!(n >= 1, "need at least one sample");
    let mut p: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let h: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    for level in 1..n {
        for i in 0..n - level {
            let denom = h[i] - h[i + level];
            if denom == 0.0 {
                return p[i];
            }
            p[i] = ((0.0 - h[i + level]) * p[i] - (0.0 - h[i]) * p[i + 1]) / denom;
        }
    }
    p[0]
}

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(f, a, fa, m, fm, flm);
    let right = simpson(f, m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_rec(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
        + adaptive_rec(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with tolerance `tol`; recursion capped at depth 48.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(&f, a, fa, b, fb, fm);
    adaptive_rec(&f, a, fa, b, fb, fm, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        // y = 3 + 2h + 5h^2 -> limit 3
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| (h, 3.0 + 2.0 * h + 5.0 * h * h))
            .collect();
        assert!((neville_extrapolate(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_simpson_integrates_smooth() {
        let v = adaptive_simpson(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn adaptive_simpson_handles_boundary_spike() {
        // int_0^0.75 (1-t)^{-3/2} dt = 2((0.25)^{-1/2} - 1) = 2
        let v = adaptive_simpson(|t| (1.0 - t).powf(-1.5), 0.0, 0.75, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
    }
}
