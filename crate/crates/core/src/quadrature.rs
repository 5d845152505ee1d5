//! Radial and disk quadrature against the normalized area measure.
//!
//! The radial rule is composite Gauss-Legendre on panels that accumulate
//! geometrically toward `r_max`, matching the `(1-r)^((alpha+2)/2)` scale
//! length of the weighted integrands. All weighted integrands are evaluated
//! in log space with a per-integral max-exponent shift: `exp(-2/(1-r))`
//! underflows past `r ~ 0.9986` in double precision, long before the rule's
//! node range ends.

use crate::util::pairwise_sum;
use crate::weights::RadialWeight;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("all integrand exponents unrepresentable even after shifting (max exponent {max_exponent})")]
    QuadratureUnderflow { max_exponent: f64 },
    #[error("non-finite integrand at node z = {at}")]
    NonFiniteIntegrand { at: Complex64 },
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite rule for `int_0^{r_max} g(r) dr`. Radial integration against the
/// normalized area measure is `int g(r) * 2r dr`, with the `2r` factor left
/// in the integrand.
#[derive(Debug, Clone)]
pub struct RadialRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    r_max: f64,
    panels: usize,
    order: usize,
}

impl RadialRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .collect();
        pairwise_sum(&terms)
    }

    /// `log( sum_i w_i exp(log_f(r_i)) )` with a max-exponent shift.
    pub fn log_integrate<F: Fn(f64) -> f64>(&self, log_f: F) -> Result<f64, QuadError> {
        let exponents: Vec<f64> = self.nodes.iter().map(|&r| log_f(r)).collect();
        let shift = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(QuadError::QuadratureUnderflow { max_exponent: shift });
        }
        let terms: Vec<f64> = exponents
            .iter()
            .zip(&self.weights)
            .map(|(&g, &w)| w * (g - shift).exp())
            .collect();
        Ok(shift + pairwise_sum(&terms).ln())
    }
}

/// Builds the composite rule. Panel breakpoints are
/// `t_j = 1 - (1 - r_max)^(j / panels)`, so `1 - t_j` decreases by the
/// constant factor `(1 - r_max)^(1/panels)` per panel.
pub fn build_radial_rule(panels: usize, order: usize, r_max: f64) -> Result<RadialRule, QuadError> {
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(QuadError::InvalidRule(format!(
            "r_max must lie in (0, 1), got {r_max}"
        )));
    }
    if panels < 1 || order < 2 {
        return Err(QuadError::InvalidRule(format!(
            "need panels >= 1 and order >= 2, got panels={panels}, order={order}"
        )));
    }
    let (gl_nodes, gl_weights) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    let base = 1.0 - r_max;
    for j in 0..panels {
        let a = 1.0 - base.powf(j as f64 / panels as f64);
        let b = 1.0 - base.powf((j + 1) as f64 / panels as f64);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Ok(RadialRule {
        nodes,
        weights,
        r_max,
        panels,
        order,
    })
}

/// `log mu_n` where `mu_n = ||z^n||^2 = 2 int_0^1 r^(2n+1) exp(-2 eta(r)) dr`.
pub fn log_moment(w: &RadialWeight, n: u32, rule: &RadialRule) -> Result<f64, QuadError> {
    let two_np1 = (2 * n + 1) as f64;
    let log_int = rule.log_integrate(|r| two_np1 * r.ln() - 2.0 * w.eta(r))?;
    Ok(std::f64::consts::LN_2 + log_int)
}

/// Tensor rule: radial panels times a uniform angular trapezoid.
#[derive(Debug, Clone)]
pub struct DiskRule {
    pub radial: RadialRule,
    pub n_theta: usize,
}

impl DiskRule {
    pub fn new(radial: RadialRule, n_theta: usize) -> Result<Self, QuadError> {
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(QuadError::InvalidRule(format!(
                "n_theta must be even and >= 8, got {n_theta}"
            )));
        }
        Ok(DiskRule { radial, n_theta })
    }

    /// Angular nodes `theta_j = 2 pi j / n_theta`.
    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_theta;
        (0..n).map(move |j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
    }

    /// Area weight of one `(r_i, theta_j)` node so that
    /// `sum f(z_ij) * area_weight(i) ~ int f dA` (normalized measure).
    pub fn area_weight(&self, radial_index: usize) -> f64 {
        2.0 * self.radial.weights()[radial_index] * self.radial.nodes()[radial_index]
            / self.n_theta as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiskIntegral {
    pub value: Complex64,
    /// `|base - finer angular| + |base - finer radial|`.
    pub error_estimate: f64,
    /// Bound on the untouched mass beyond `r_max` for unit-bounded integrands:
    /// `1 - r_max^2`. Weighted integrands additionally carry `exp(-2 eta)`.
    pub tail_bound: f64,
}

fn disk_sum<F>(f: &F, radial: &RadialRule, n_theta: usize) -> Result<Complex64, QuadError>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut re_terms = Vec::with_capacity(radial.nodes().len());
    let mut im_terms = Vec::with_capacity(radial.nodes().len());
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
    for (i, (&r, &wr)) in radial.nodes().iter().zip(radial.weights()).enumerate() {
        let _ = i;
        let mut ring = Complex64::new(0.0, 0.0);
        for j in 0..n_theta {
            let theta = dtheta * j as f64;
            let z = Complex64::from_polar(r, theta);
            let v = f(z);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(QuadError::NonFiniteIntegrand { at: z });
            }
            ring += v;
        }
        let scale = 2.0 * wr * r / n_theta as f64;
        re_terms.push(scale * ring.re);
        im_terms.push(scale * ring.im);
    }
    Ok(Complex64::new(pairwise_sum(&re_terms), pairwise_sum(&im_terms)))
}

/// Integrates `f` over the truncated disk `|z| <= r_max` against the
/// normalized area measure, with an error estimate from one angular and one
/// radial refinement.
pub fn integrate_disk<F>(f: F, rule: &DiskRule) -> Result<DiskIntegral, QuadError>
where
    F: Fn(Complex64) -> Complex64,
{
    let base = disk_sum(&f, &rule.radial, rule.n_theta)?;
    let finer_theta = disk_sum(&f, &rule.radial, rule.n_theta * 2)?;
    let finer_radial_rule = build_radial_rule(
        rule.radial.panels() + 2,
        rule.radial.order(),
        rule.radial.r_max(),
    )?;
    let finer_radial = disk_sum(&f, &finer_radial_rule, rule.n_theta)?;
    let error_estimate = (base - finer_theta).norm() + (base - finer_radial).norm();
    Ok(DiskIntegral {
        value: base,
        error_estimate,
        tail_bound: 1.0 - rule.radial.r_max() * rule.radial.r_max(),
    })
}
