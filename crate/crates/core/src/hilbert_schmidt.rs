//! Hilbert-Schmidt quantities for weighted composition operators.
//!
//! The stored `value` follows the paper's displayed convention
//! `||T||_HS = sum_n ||T e_n||^2` (no square root); [`HsValue::norm`] exposes
//! the square root, which is what the triangle inequality and the path-
//! continuity criterion need.
//!
//! Divergent integrals are detected on a boundary-cutoff ladder: the domain
//! cutoff `1 - r_max` shrinks by two decades per step, and a value that grows
//! more than tenfold on two consecutive steps is declared `Infinite` (the
//! divergent cases here grow polynomially in the cutoff, so the ratios are
//! ~1e2 or more per step; convergent integrals saturate).
//!
//! Integrands are assembled in log space. Where the diagonal kernel series
//! does not resolve within the moment table (images too close to the
//! boundary), nodes fall back to the calibrated asymptotic band
//! `log K(s,s) ~ 2 eta(s) - 2 log tau(s) + C`; for the difference integrand
//! the fallback node value is `rho^2 (K_a + K_b) omega^2`. Fallback
//! contributions are tracked separately and folded, tripled, into the error
//! estimate since the equivalence constant behind them is not known.

use crate::holomap::MapExpr;
use crate::kernel::{DiagEstimate, KernelError, MomentTable};
use crate::metric::{Geometry, MetricError};
use crate::quadrature::{build_radial_rule, QuadError, RadialRule};
use crate::util::pairwise_sum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HsError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Map(#[from] crate::holomap::HolomapError),
    #[error("ratio indeterminate: {0}")]
    IndeterminateRatio(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HsMethod {
    Integral,
    BasisSum,
}

/// Paper-convention HS quantity (the sum of squared basis-image norms).
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HsValue {
    Finite { value: f64, error: f64 },
    Infinite { ladder: Vec<f64> },
}

impl HsValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, HsValue::Infinite { .. })
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            HsValue::Finite { value, .. } => Some(*value),
            HsValue::Infinite { .. } => None,
        }
    }

    /// The genuine norm: square root of the stored sum.
    pub fn norm(&self) -> Option<f64> {
        self.finite_value().map(f64::sqrt)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HsReport {
    pub quantity: HsValue,
    pub method: HsMethod,
    /// Values along the boundary-cutoff ladder (divergence evidence).
    pub ladder: Vec<f64>,
}

/// Quadrature configuration for the HS integrals.
#[derive(Debug, Clone, Serialize)]
pub struct HsQuadParams {
    pub order: usize,
    pub panels_per_decade: usize,
    pub n_theta: usize,
    /// Boundary cutoffs `1 - r_max`, finest last; two decades per step.
    pub ladder: Vec<f64>,
    /// Re-evaluate the finest step on a refined rule for the error estimate.
    pub refine_check: bool,
}

impl Default for HsQuadParams {
    fn default() -> Self {
        HsQuadParams {
            order: 20,
            panels_per_decade: 6,
            n_theta: 128,
            ladder: vec![1e-4, 1e-6, 1e-8],
            refine_check: true,
        }
    }
}

impl HsQuadParams {
    /// Coarser settings for scans where only the magnitude matters.
    pub fn coarse() -> Self {
        HsQuadParams {
            order: 12,
            panels_per_decade: 4,
            n_theta: 64,
            ladder: vec![1e-4, 1e-8],
            refine_check: false,
        }
    }

    fn rule_for(&self, cutoff: f64, extra_panels: usize) -> Result<RadialRule, QuadError> {
        let decades = -cutoff.log10();
        let panels = (self.panels_per_decade as f64 * decades).ceil() as usize + extra_panels;
        build_radial_rule(panels.max(4), self.order, 1.0 - cutoff)
    }
}

/// One integration pass: value plus separated error contributions.
#[derive(Debug, Clone, Copy, Default)]
struct PassResult {
    value: f64,
    /// Total contribution that came through the asymptotic fallback.
    fallback: f64,
    /// Extra uncertainty from the band half-widths.
    band_err: f64,
}

/// Integrates `node(z) -> (log-magnitude node integrand, fallback?, band)` over
/// the disk rule. The node callback returns the plain integrand value and
/// whether it came from a fallback path.
fn integrate_pass<F>(rule: &RadialRule, n_theta: usize, node: F) -> PassResult
where
    F: Fn(Complex64) -> (f64, bool, f64) + Sync,
{
    let per_ring: Vec<(f64, f64, f64)> = rule
        .nodes()
        .par_iter()
        .zip(rule.weights().par_iter())
        .map(|(&r, &wr)| {
            let mut v = 0.0;
            let mut fb = 0.0;
            let mut be = 0.0;
            for j in 0..n_theta {
                let theta = std::f64::consts::TAU * j as f64 / n_theta as f64;
                let z = Complex64::from_polar(r, theta);
                let (val, is_fb, band) = node(z);
                v += val;
                if is_fb {
                    fb += val;
                }
                be += band;
            }
            let scale = 2.0 * wr * r / n_theta as f64;
            (scale * v, scale * fb, scale * be)
        })
        .collect();
    let vals: Vec<f64> = per_ring.iter().map(|t| t.0).collect();
    let fbs: Vec<f64> = per_ring.iter().map(|t| t.1).collect();
    let bes: Vec<f64> = per_ring.iter().map(|t| t.2).collect();
    PassResult {
        value: pairwise_sum(&vals),
        fallback: pairwise_sum(&fbs),
        band_err: pairwise_sum(&bes),
    }
}

fn ladder_verdict(
    ladder: Vec<f64>,
    finest: PassResult,
    refine_delta: f64,
    method: HsMethod,
) -> HsReport {
    let n = ladder.len();
    if n >= 3 {
        let grew_twice =
            ladder[n - 1] > 10.0 * ladder[n - 2] && ladder[n - 2] > 10.0 * ladder[n - 3];
        if grew_twice {
            return HsReport {
                quantity: HsValue::Infinite { ladder },
                method,
                ladder: vec![],
            }
            .with_ladder();
        }
    }
    let saturation = if n >= 2 {
        (ladder[n - 1] - ladder[n - 2]).abs()
    } else {
        0.0
    };
    let error = saturation + refine_delta + 3.0 * finest.fallback + finest.band_err;
    HsReport {
        quantity: HsValue::Finite {
            value: finest.value,
            error,
        },
        method,
        ladder,
    }
}

impl HsReport {
    fn with_ladder(mut self) -> Self {
        if let HsValue::Infinite { ladder } = &self.quantity {
            self.ladder = ladder.clone();
        }
        self
    }
}

/// Per-node difference integrand `||K_a - K_b||^2 omega(z)^2`, with the
/// rho-based fallback when the series does not resolve.
fn diff_node(
    table: &MomentTable,
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    z: Complex64,
) -> (f64, bool, f64) {
    let a = match phi.eval(z) {
        Ok(v) => v,
        Err(_) => return (f64::NAN, false, 0.0),
    };
    let b = match psi.eval(z) {
        Ok(v) => v,
        Err(_) => return (f64::NAN, false, 0.0),
    };
    let eta2 = 2.0 * geom.weight().eta(z.norm());
    match table.log_kernel_diff_sq(a, b) {
        Ok(None) => (0.0, false, 0.0),
        Ok(Some(log_sq)) => ((log_sq - eta2).exp(), false, 0.0),
        Err(KernelError::TruncationInsufficient { .. }) => {
            let rho = match geom.rho(a, b) {
                Ok(r) => r.estimate,
                Err(_) => 1.0,
            };
            let (ka, wa) = diag_log(table, a.norm());
            let (kb, wb) = diag_log(table, b.norm());
            let m = ka.max(kb);
            let sum_k = ((ka - m).exp() + (kb - m).exp()) * (m - eta2).exp();
            let val = rho * rho * sum_k;
            let band = val * ((wa.max(wb)).exp_m1());
            (val, true, band)
        }
        Err(_) => (f64::NAN, false, 0.0),
    }
}

fn diag_log(table: &MomentTable, s: f64) -> (f64, f64) {
    match table.diag_estimate(s) {
        DiagEstimate::Exact { log_value, .. } => (log_value, 0.0),
        DiagEstimate::Asymptotic {
            log_value,
            half_width,
        } => (log_value, half_width),
    }
}

/// `||u C_phi||_HS (paper convention) = int |u|^2 K(phi(z), phi(z)) omega^2 dA`.
pub fn hs_weighted<U>(
    table: &MomentTable,
    geom: &Geometry,
    u: U,
    phi: &MapExpr,
    quad: &HsQuadParams,
) -> Result<HsReport, HsError>
where
    U: Fn(Complex64) -> f64 + Sync,
{
    let weight = *geom.weight();
    let node = |z: Complex64| {
        let uval = u(z).abs();
        if uval == 0.0 {
            return (0.0, false, 0.0);
        }
        let image = match phi.eval(z) {
            Ok(v) => v,
            Err(_) => return (f64::NAN, false, 0.0),
        };
        let (lk, half_band) = diag_log(table, image.norm().min(1.0 - 1e-15));
        let exponent = lk + 2.0 * uval.ln() - 2.0 * weight.eta(z.norm());
        let val = exponent.exp();
        if half_band > 0.0 {
            (val, true, val * half_band.exp_m1())
        } else {
            (val, false, 0.0)
        }
    };
    run_ladder(quad, HsMethod::Integral, node)
}

/// `||C_phi - C_psi||_HS (paper convention)
///  = int ||K_phi(z) - K_psi(z)||^2 omega^2 dA`,
/// through the term-by-term non-negative difference series.
pub fn hs_difference(
    table: &MomentTable,
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    quad: &HsQuadParams,
) -> Result<HsReport, HsError> {
    let node = |z: Complex64| diff_node(table, geom, phi, psi, z);
    run_ladder(quad, HsMethod::Integral, node)
}

fn run_ladder<F>(quad: &HsQuadParams, method: HsMethod, node: F) -> Result<HsReport, HsError>
where
    F: Fn(Complex64) -> (f64, bool, f64) + Sync,
{
    let mut ladder = Vec::with_capacity(quad.ladder.len());
    let mut finest = PassResult::default();
    for &cutoff in &quad.ladder {
        let rule = quad.rule_for(cutoff, 0)?;
        finest = integrate_pass(&rule, quad.n_theta, &node);
        if !finest.value.is_finite() {
            return Err(HsError::Quadrature(QuadError::NonFiniteIntegrand {
                at: Complex64::new(rule.r_max(), 0.0),
            }));
        }
        ladder.push(finest.value);
    }
    let refine_delta = if quad.refine_check {
        let cutoff = *quad.ladder.last().unwrap();
        let rule = quad.rule_for(cutoff, 4)?;
        let refined = integrate_pass(&rule, quad.n_theta * 3 / 2, &node);
        (refined.value - finest.value).abs()
    } else {
        0.0
    };
    Ok(ladder_verdict(ladder, finest, refine_delta, method))
}

#[derive(Debug, Clone, Serialize)]
pub struct HsBasisReport {
    pub value: f64,
    /// Geometric tail estimate from the last decade of terms.
    pub tail_estimate: f64,
    pub terms_used: usize,
    pub method: HsMethod,
}

/// Basis-sum route:
/// `sum_{n <= N} int |e_n(phi(z)) - e_n(psi(z))|^2 omega^2 dA` with
/// `e_n(z) = z^n / sqrt(mu_n)`. Monotone non-decreasing in N.
pub fn hs_difference_basis(
    table: &MomentTable,
    phi: &MapExpr,
    psi: &MapExpr,
    n_cap: usize,
    quad: &HsQuadParams,
) -> Result<HsBasisReport, HsError> {
    let n_cap = n_cap.min(table.n_max());
    let cutoff = *quad.ladder.last().unwrap();
    let rule = quad.rule_for(cutoff, 0)?;
    let weight = *table.weight();
    // collect nodes with non-vanishing weight factor
    struct Node {
        a: Complex64,
        b: Complex64,
        fac: f64,
    }
    let mut nodes = Vec::new();
    for (&r, &wr) in rule.nodes().iter().zip(rule.weights()) {
        let eta2 = 2.0 * weight.eta(r);
        if eta2 > 1490.0 {
            continue; // omega^2 underflows: exp(-1490) = 0 in f64
        }
        for j in 0..quad.n_theta {
            let theta = std::f64::consts::TAU * j as f64 / quad.n_theta as f64;
            let z = Complex64::from_polar(r, theta);
            let a = phi.eval(z)?;
            let b = psi.eval(z)?;
            nodes.push(Node {
                a,
                b,
                fac: 2.0 * wr * r / quad.n_theta as f64 * (-eta2).exp(),
            });
        }
    }
    let mut pow_a: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); nodes.len()];
    let mut pow_b = pow_a.clone();
    let mut terms: Vec<f64> = Vec::with_capacity(n_cap + 1);
    for n in 0..=n_cap {
        let neg_log_mu = -table.log_mu(n);
        if neg_log_mu > 700.0 {
            break; // 1/mu_n no longer representable; tail estimate covers it
        }
        let inv_mu = neg_log_mu.exp();
        let contribs: Vec<f64> = nodes
            .par_iter()
            .zip(pow_a.par_iter().zip(pow_b.par_iter()))
            .map(|(node, (pa, pb))| node.fac * (pa - pb).norm_sqr())
            .collect();
        terms.push(inv_mu * pairwise_sum(&contribs));
        pow_a
            .par_iter_mut()
            .zip(nodes.par_iter())
            .for_each(|(p, node)| *p *= node.a);
        pow_b
            .par_iter_mut()
            .zip(nodes.par_iter())
            .for_each(|(p, node)| *p *= node.b);
    }
    let value = pairwise_sum(&terms);
    // geometric tail estimate from the last decade of terms
    let n_used = terms.len();
    let tail_estimate = if n_used >= 20 {
        let last = terms[n_used - 1];
        let earlier = terms[n_used - 1 - n_used / 10].max(f64::MIN_POSITIVE);
        let ratio = (last / earlier).powf(1.0 / (n_used as f64 / 10.0));
        if ratio < 1.0 && last > 0.0 {
            last * ratio / (1.0 - ratio)
        } else if last == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(HsBasisReport {
        value,
        tail_estimate,
        terms_used: n_used,
        method: HsMethod::BasisSum,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HsRatioReport {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    /// Relative error bar combining both integrals' error estimates and the
    /// rho bracket width.
    pub rel_error: f64,
}

/// `hs_difference / int rho^2 (K(phi,phi) + K(psi,psi)) omega^2 dA`, the
/// empirical constant of the HS equivalence.
pub fn hs_equiv_ratio(
    table: &MomentTable,
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    quad: &HsQuadParams,
) -> Result<HsRatioReport, HsError> {
    let num = hs_difference(table, geom, phi, psi, quad)?;
    let weight = *geom.weight();
    let node = |z: Complex64| {
        let (a, b) = match (phi.eval(z), psi.eval(z)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return (f64::NAN, false, 0.0),
        };
        if a == b {
            return (0.0, false, 0.0);
        }
        let rho = match geom.rho(a, b) {
            Ok(r) => r,
            Err(_) => return (f64::NAN, false, 0.0),
        };
        let (ka, wa) = diag_log(table, a.norm());
        let (kb, wb) = diag_log(table, b.norm());
        let eta2 = 2.0 * weight.eta(z.norm());
        let m = ka.max(kb);
        let sum_k = ((ka - m).exp() + (kb - m).exp()) * (m - eta2).exp();
        let val = rho.estimate * rho.estimate * sum_k;
        let spread = (rho.upper * rho.upper - rho.lower * rho.lower).max(0.0) * sum_k;
        let band = val * (wa.max(wb)).exp_m1() + spread;
        (val, wa > 0.0 || wb > 0.0, band)
    };
    let den = run_ladder(quad, HsMethod::Integral, node)?;
    match (&num.quantity, &den.quantity) {
        (HsValue::Infinite { .. }, HsValue::Infinite { .. }) => Err(HsError::IndeterminateRatio(
            "both integrals are infinite".into(),
        )),
        (HsValue::Finite { value: nv, error: ne }, HsValue::Finite { value: dv, error: de }) => {
            if *nv <= 0.0 && *dv <= 0.0 {
                return Err(HsError::IndeterminateRatio(
                    "0/0: the maps agree on the grid".into(),
                ));
            }
            if *dv <= 0.0 {
                return Err(HsError::IndeterminateRatio("zero denominator".into()));
            }
            Ok(HsRatioReport {
                numerator: *nv,
                denominator: *dv,
                ratio: nv / dv,
                rel_error: ne / nv.max(f64::MIN_POSITIVE) + de / dv,
            })
        }
        _ => Err(HsError::IndeterminateRatio(
            "one side infinite, the other finite".into(),
        )),
    }
}

/// `d(C_phi, C_psi) = x / (1 + x)` with `x` the paper-convention HS quantity;
/// 1 when infinite.
pub fn hs_metric(
    table: &MomentTable,
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    quad: &HsQuadParams,
) -> Result<f64, HsError> {
    let report = hs_difference(table, geom, phi, psi, quad)?;
    Ok(match report.quantity {
        HsValue::Finite { value, .. } => value / (1.0 + value),
        HsValue::Infinite { .. } => 1.0,
    })
}

/// Convex-combination map `(1-s) phi + s psi` as an expression tree.
pub fn convex_combination(phi: &MapExpr, psi: &MapExpr, s: f64) -> MapExpr {
    if s == 0.0 {
        return phi.clone();
    }
    if s == 1.0 {
        return psi.clone();
    }
    MapExpr::Add(
        Box::new(MapExpr::Mul(
            Box::new(MapExpr::Const(Complex64::new(1.0 - s, 0.0))),
            Box::new(phi.clone()),
        )),
        Box::new(MapExpr::Mul(
            Box::new(MapExpr::Const(Complex64::new(s, 0.0))),
            Box::new(psi.clone()),
        )),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSegment {
    pub s: f64,
    pub t: f64,
    pub quantity: HsValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathScan {
    pub segments: Vec<PathSegment>,
    /// Max finite adjacent norm (square-root convention), if all finite.
    pub max_adjacent_norm: Option<f64>,
}

/// Pairwise HS quantities for `phi_s = (1-s) phi + s psi` on adjacent grid
/// points; continuity evidence for the linear path.
pub fn path_scan(
    table: &MomentTable,
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    s_grid: &[f64],
    quad: &HsQuadParams,
) -> Result<PathScan, HsError> {
    let mut segments = Vec::with_capacity(s_grid.len().saturating_sub(1));
    let mut max_norm: Option<f64> = Some(0.0);
    for pair in s_grid.windows(2) {
        let (s, t) = (pair[0], pair[1]);
        let map_s = convex_combination(phi, psi, s);
        let map_t = convex_combination(phi, psi, t);
        let rep = hs_difference(table, geom, &map_s, &map_t, quad)?;
        match (&rep.quantity, &mut max_norm) {
            (HsValue::Finite { value, .. }, Some(m)) => *m = m.max(value.sqrt()),
            _ => max_norm = None,
        }
        segments.push(PathSegment {
            s,
            t,
            quantity: rep.quantity,
        });
    }
    Ok(PathScan {
        segments,
        max_adjacent_norm: max_norm,
    })
}

/// `rho_tau(z_s, z_t) / rho_tau(z, w)` for `z_u = (1-u) z + u w`.
pub fn interp_rho_ratio(
    geom: &Geometry,
    z: Complex64,
    w: Complex64,
    s: f64,
    t: f64,
) -> Result<f64, HsError> {
    let zs = z + (w - z) * s;
    let zt = z + (w - z) * t;
    let num = geom.rho(zs, zt)?.estimate;
    let den = geom.rho(z, w)?.estimate;
    Ok(num / den)
}

/// Sup of the interpolation ratio over an `n x n` grid of `(s, t)`.
pub fn interp_rho_sup(
    geom: &Geometry,
    z: Complex64,
    w: Complex64,
    n: usize,
) -> Result<(f64, (f64, f64)), HsError> {
    let den = geom.rho(z, w)?.estimate;
    let mut sup = 0.0;
    let mut arg = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let t = j as f64 / (n - 1) as f64;
            let zs = z + (w - z) * s;
            let zt = z + (w - z) * t;
            let r = geom.rho(zs, zt)?.estimate / den;
            if r > sup {
                sup = r;
                arg = (s, t);
            }
        }
    }
    Ok((sup, arg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holomap::parse_map;
    use crate::metric::MetricParams;
    use crate::quadrature::build_radial_rule;
    use crate::weights::{make_weight, WeightSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup(n_max: usize) -> (MomentTable, Geometry) {
        let w = make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap();
        let rule = build_radial_rule(48, 24, 1.0 - 1e-8).unwrap();
        let table = crate::kernel::build_moments(&w, n_max, &rule).unwrap();
        (table, Geometry::new(w, MetricParams::default()))
    }

    #[test]
    fn weighted_constant_zero_map_is_one() {
        // int K(0,0) omega^2 dA = K(0,0) mu_0 = 1
        let (table, geom) = setup(64);
        let zero = parse_map("0*z").unwrap();
        let rep = hs_weighted(&table, &geom, |_| 1.0, &zero, &HsQuadParams::default()).unwrap();
        match rep.quantity {
            HsValue::Finite { value, .. } => {
                assert!((value - 1.0).abs() < 1e-10, "value = {value}")
            }
            HsValue::Infinite { .. } => panic!("finite"),
        }
    }

    #[test]
    fn weighted_zero_u_is_zero() {
        let (table, geom) = setup(64);
        let id = parse_map("z").unwrap();
        let rep = hs_weighted(&table, &geom, |_| 0.0, &id, &HsQuadParams::default()).unwrap();
        assert_eq!(rep.quantity.finite_value(), Some(0.0));
    }

    #[test]
    fn weighted_half_map_matches_basis_oracle() {
        // basis oracle: sum_n (1/mu_n) int |z/2|^{2n} omega^2 dA
        let (table, geom) = setup(400);
        let half = parse_map("z/2").unwrap();
        let rep = hs_weighted(&table, &geom, |_| 1.0, &half, &HsQuadParams::default()).unwrap();
        let rule = build_radial_rule(48, 24, 1.0 - 1e-8).unwrap();
        let w = *geom.weight();
        let mut oracle = 0.0;
        for n in 0..200usize {
            let int_n =
                rule.integrate(|r| 2.0 * r * (0.5 * r).powi(2 * n as i32) * (-2.0 * w.eta(r)).exp());
            oracle += (-table.log_mu(n)).exp() * int_n;
        }
        let value = rep.quantity.finite_value().unwrap();
        assert!(
            (value - oracle).abs() / oracle < 5e-3,
            "integral {value} vs basis {oracle}"
        );
    }

    #[test]
    fn difference_same_map_zero() {
        let (table, geom) = setup(64);
        let phi = parse_map("(1+z^2)/2").unwrap();
        let rep =
            hs_difference(&table, &geom, &phi, &phi.clone(), &HsQuadParams::default()).unwrap();
        assert_eq!(rep.quantity.finite_value(), Some(0.0));
    }

    #[test]
    fn difference_constant_maps_closed_form() {
        // hs = mu_0 (K(0.5, 0.5) - 1/mu_0); frozen reference 11.149135400305
        let (table, geom) = setup(400);
        let a = parse_map("0.5 + 0*z").unwrap();
        let b = parse_map("0*z").unwrap();
        let rep = hs_difference(&table, &geom, &a, &b, &HsQuadParams::default()).unwrap();
        let value = rep.quantity.finite_value().expect("finite");
        assert!(
            (value - 11.14913540030465).abs() < 1e-6,
            "hs difference = {value}"
        );
    }

    #[test]
    fn difference_identity_vs_zero_is_infinite() {
        let (table, geom) = setup(2000);
        let id = parse_map("z").unwrap();
        let zero = parse_map("0*z").unwrap();
        let rep = hs_difference(&table, &geom, &id, &zero, &HsQuadParams::default()).unwrap();
        assert!(rep.quantity.is_infinite(), "ladder: {:?}", rep.ladder);
        let d = hs_metric(&table, &geom, &id, &zero, &HsQuadParams::default()).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn basis_route_matches_integral_route_constant_maps() {
        let (table, geom) = setup(400);
        let a = parse_map("0.5 + 0*z").unwrap();
        let b = parse_map("0*z").unwrap();
        let quad = HsQuadParams::default();
        let integral = hs_difference(&table, &geom, &a, &b, &quad)
            .unwrap()
            .quantity
            .finite_value()
            .unwrap();
        let basis = hs_difference_basis(&table, &a, &b, 400, &quad).unwrap();
        assert!(basis.tail_estimate < 1e-3 * basis.value);
        let rel = (integral - basis.value).abs() / integral;
        assert!(rel < 1e-8, "routes differ by {rel}");
    }

    #[test]
    fn basis_route_monotone_in_n() {
        let (table, _) = setup(400);
        let a = parse_map("0.5 + 0*z").unwrap();
        let b = parse_map("0*z").unwrap();
        let quad = HsQuadParams::default();
        let mut last = 0.0;
        for n in [10, 50, 100, 200] {
            let v = hs_difference_basis(&table, &a, &b, n, &quad).unwrap().value;
            assert!(v >= last - 1e-15);
            last = v;
        }
    }

    #[test]
    fn metric_zero_for_same_map() {
        let (table, geom) = setup(64);
        let phi = parse_map("z/2").unwrap();
        let d = hs_metric(&table, &geom, &phi, &phi.clone(), &HsQuadParams::default()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn equiv_ratio_constant_maps() {
        let (table, geom) = setup(400);
        let a = parse_map("0.5 + 0*z").unwrap();
        let b = parse_map("0*z").unwrap();
        let rep = hs_equiv_ratio(&table, &geom, &a, &b, &HsQuadParams::default()).unwrap();
        assert!(rep.ratio.is_finite() && rep.ratio > 0.0, "ratio = {}", rep.ratio);
    }

    #[test]
    fn equiv_ratio_same_map_indeterminate() {
        let (table, geom) = setup(64);
        let phi = parse_map("z/2").unwrap();
        match hs_equiv_ratio(&table, &geom, &phi, &phi.clone(), &HsQuadParams::default()) {
            Err(HsError::IndeterminateRatio(_)) => {}
            other => panic!("expected indeterminate, got {other:?}"),
        }
    }

    #[test]
    fn path_scan_endpoints_reproduce_difference() {
        let (table, geom) = setup(400);
        let a = parse_map("0.5 + 0*z").unwrap();
        let b = parse_map("0*z").unwrap();
        let quad = HsQuadParams::default();
        let full = hs_difference(&table, &geom, &a, &b, &quad)
            .unwrap()
            .quantity
            .finite_value()
            .unwrap();
        let scan = path_scan(&table, &geom, &a, &b, &[0.0, 1.0], &quad).unwrap();
        assert_eq!(scan.segments.len(), 1);
        let v = scan.segments[0].quantity.finite_value().unwrap();
        assert!((v - full).abs() < 1e-10 * full.max(1.0));
        // phi = psi: all zeros
        let zeros = path_scan(&table, &geom, &a, &a.clone(), &[0.0, 0.5, 1.0], &quad).unwrap();
        assert_eq!(zeros.max_adjacent_norm, Some(0.0));
    }

    #[test]
    fn interp_rho_endpoints() {
        let (_, geom) = setup(64);
        let z = c(0.6, 0.0);
        let w = c(0.0, 0.6);
        let r = interp_rho_ratio(&geom, z, w, 0.0, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let same = interp_rho_ratio(&geom, z, w, 0.4, 0.4).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn interp_rho_sup_finite_and_stable() {
        let w = make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap();
        let geom = Geometry::new(w, MetricParams::default());
        let fine = Geometry::new(
            w,
            MetricParams {
                resolution: 32,
                ..MetricParams::default()
            },
        );
        let z = c(0.9, 0.0);
        let wp = c(0.0, 0.9);
        let (sup, _) = interp_rho_sup(&geom, z, wp, 16).unwrap();
        assert!(sup.is_finite() && sup >= 1.0 - 1e-9, "sup = {sup}");
        let (sup2, _) = interp_rho_sup(&fine, z, wp, 16).unwrap();
        assert!((sup - sup2).abs() / sup < 0.1, "sup drifted: {sup} vs {sup2}");
    }
}
