//! Composition-operator functionals: boundedness supremum, compactness ray
//! limits, the difference functional, operator-norm lower-bound proxies and
//! Carleson box ratios.
//!
//! Everything is assembled in log space: the weight ratio
//! `omega(z) / omega(phi(z))` is always `exp(eta(phi(z)) - eta(z))`, never a
//! quotient of underflowed exponentials. "limsup as |z| -> 1" is
//! operationalized as the max over boundary rays of a Richardson-extrapolated
//! ray limit, backed by a near-boundary annulus scan.

use crate::holomap::{self_map_check, HolomapError, MapExpr};
use crate::metric::{Geometry, MetricError};
use crate::util::neville_extrapolate;
use crate::weights::RadialWeight;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(transparent)]
    Map(#[from] HolomapError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Verdict tolerance: a ray limit below `COMPACT_TOL * (1 + sup)` counts as
/// vanishing. Separates the worked example's `e^(1/2)` plateau from genuine
/// decay by many orders of magnitude.
pub const COMPACT_TOL: f64 = 1e-6;

/// Boundary rays and radii used for limsup scans.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryGrid {
    pub rays: Vec<Complex64>,
    pub radii: Vec<f64>,
    /// Extra bulk radii for the supremum scan.
    pub bulk_radii: Vec<f64>,
}

impl Default for BoundaryGrid {
    fn default() -> Self {
        BoundaryGrid::new(16)
    }
}

impl BoundaryGrid {
    pub fn new(n_rays: usize) -> Self {
        BoundaryGrid {
            rays: default_rays(n_rays),
            radii: default_ray_radii(),
            bulk_radii: (0..16).map(|k| k as f64 / 16.0).collect(),
        }
    }
}

pub fn default_rays(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

/// Geometric radii `1 - 2^{-k}`, `k = 3..=20`. The cap keeps
/// `eta(phi(r)) - eta(r)` accurate in double precision (the error grows like
/// `1e-16 / (1-r)^2` for this weight family).
pub fn default_ray_radii() -> Vec<f64> {
    (3..=20).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupReport {
    /// `sup_z (eta(phi(z)) - eta(z))`, the log of the boundedness indicator.
    pub log_sup: f64,
    pub witness: Complex64,
    /// Finite sup means "bounded" evidence at the grid scale.
    pub bounded: bool,
}

/// Per-ray profile of a functional with its extrapolated boundary limit.
#[derive(Debug, Clone, Serialize)]
pub struct RayProfile {
    pub zeta: Complex64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated_limit: f64,
}

fn extrapolate_tail(radii: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .rev()
        .take(3)
        .map(|(&r, &v)| (1.0 - r, v))
        .collect();
    neville_extrapolate(&pts)
}

fn weight_log_ratio(w: &RadialWeight, phi: &MapExpr, z: Complex64) -> Result<f64, DiagError> {
    let image = phi.eval(z)?;
    let m = image.norm();
    if m >= 1.0 {
        return Err(DiagError::Map(HolomapError::BoundaryEscape {
            at: z,
            modulus: m,
        }));
    }
    Ok(w.eta(m) - w.eta(z.norm()))
}

/// `log sup_z omega(z)/omega(phi(z)) = sup_z (eta(phi(z)) - eta(z))` over the
/// grid, with the argmax witness.
pub fn boundedness_indicator(
    w: &RadialWeight,
    phi: &MapExpr,
    grid: &BoundaryGrid,
) -> Result<SupReport, DiagError> {
    self_map_check(phi, 128, 1e-9)?;
    let mut log_sup = f64::NEG_INFINITY;
    let mut witness = Complex64::new(0.0, 0.0);
    let mut consider = |z: Complex64, v: f64, sup: &mut f64, wit: &mut Complex64| {
        if v > *sup {
            *sup = v;
            *wit = z;
        }
    };
    for &zeta in &grid.rays {
        for &r in grid.radii.iter().chain(&grid.bulk_radii) {
            let z = zeta * r;
            let v = weight_log_ratio(w, phi, z)?;
            consider(z, v, &mut log_sup, &mut witness);
        }
    }
    Ok(SupReport {
        log_sup,
        witness,
        bounded: log_sup.is_finite(),
    })
}

/// Ray profile of `omega(z)/omega(phi(z))` along `z = r zeta` with the
/// extrapolated boundary limit.
pub fn compactness_profile(
    w: &RadialWeight,
    phi: &MapExpr,
    zeta: Complex64,
    radii: &[f64],
) -> Result<RayProfile, DiagError> {
    if radii.len() < 3 {
        return Err(DiagError::InvalidArgument("need at least 3 radii".into()));
    }
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        values.push(weight_log_ratio(w, phi, zeta * r)?.exp());
    }
    let extrapolated_limit = extrapolate_tail(radii, &values);
    Ok(RayProfile {
        zeta,
        radii: radii.to_vec(),
        values,
        extrapolated_limit,
    })
}

/// The difference functional
/// `rho_{tau,phi,psi}(z)^2 (omega(z)/omega(phi(z)) + omega(z)/omega(psi(z)))`.
pub fn difference_functional(
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    z: Complex64,
) -> Result<f64, DiagError> {
    let rho = geom.rho_maps(phi, psi, z)?;
    let a = weight_log_ratio(geom.weight(), phi, z)?;
    let b = weight_log_ratio(geom.weight(), psi, z)?;
    let m = a.max(b);
    Ok(rho.estimate * rho.estimate * ((a - m).exp() + (b - m).exp()) * m.exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDiagnostics {
    pub profiles: Vec<RayProfile>,
    pub sup: f64,
    pub sup_witness: Complex64,
    pub bounded_evidence: bool,
    pub compact_evidence: bool,
}

/// Difference functional along each ray plus a grid supremum; verdicts per
/// the ray limits.
pub fn difference_profile(
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    rays: &[Complex64],
    radii: &[f64],
) -> Result<PairDiagnostics, DiagError> {
    self_map_check(phi, 128, 1e-9)?;
    self_map_check(psi, 128, 1e-9)?;
    let mut profiles = Vec::with_capacity(rays.len());
    let mut sup = f64::NEG_INFINITY;
    let mut sup_witness = Complex64::new(0.0, 0.0);
    for &zeta in rays {
        let mut values = Vec::with_capacity(radii.len());
        for &r in radii {
            let v = difference_functional(geom, phi, psi, zeta * r)?;
            if v > sup {
                sup = v;
                sup_witness = zeta * r;
            }
            values.push(v);
        }
        let extrapolated_limit = extrapolate_tail(radii, &values);
        profiles.push(RayProfile {
            zeta,
            radii: radii.to_vec(),
            values,
            extrapolated_limit,
        });
    }
    // bulk points count toward the supremum only
    for k in 0..16 {
        let r = k as f64 / 16.0;
        for &zeta in rays {
            let v = difference_functional(geom, phi, psi, zeta * r)?;
            if v > sup {
                sup = v;
                sup_witness = zeta * r;
            }
        }
    }
    let tol = COMPACT_TOL * (1.0 + sup.max(0.0));
    let compact_evidence = profiles
        .iter()
        .all(|p| p.extrapolated_limit.abs() < tol);
    Ok(PairDiagnostics {
        profiles,
        sup,
        sup_witness,
        bounded_evidence: sup.is_finite(),
        compact_evidence,
    })
}

/// Lower-bound proxy for `||C_phi - C_psi||`: the largest weight-ratio sum
/// over samples whose `rho_{tau,phi,psi}` exceeds the threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum DiffNormLowerBound {
    Proxy { value: f64, witness: Complex64 },
    /// No sample had `rho` above the threshold.
    NotApplicable,
}

pub fn lower_bound_diff_norm(
    geom: &Geometry,
    phi: &MapExpr,
    psi: &MapExpr,
    samples: &[Complex64],
    rho_threshold: f64,
) -> Result<DiffNormLowerBound, DiagError> {
    let mut best: Option<(f64, Complex64)> = None;
    for &z in samples {
        let rho = geom.rho_maps(phi, psi, z)?;
        if rho.estimate <= rho_threshold {
            continue;
        }
        let a = weight_log_ratio(geom.weight(), phi, z)?;
        let b = weight_log_ratio(geom.weight(), psi, z)?;
        let v = a.exp() + b.exp();
        if best.map(|(bv, _)| v > bv).unwrap_or(true) {
            best = Some((v, z));
        }
    }
    Ok(match best {
        Some((value, witness)) => DiffNormLowerBound::Proxy { value, witness },
        None => DiffNormLowerBound::NotApplicable,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CarlesonEstimate {
    pub ratio: f64,
    pub std_error: f64,
    pub hits: u64,
    pub n_samples: u64,
}

/// Monte Carlo estimate of `mu_{u,phi,p}(D(xi, delta tau(xi))) / tau(xi)^2`
/// with a counter-based seeded generator (bit-reproducible for a fixed seed).
pub fn carleson_box_ratio<F: Fn(Complex64) -> f64>(
    w: &RadialWeight,
    u: F,
    phi: &MapExpr,
    p: f64,
    xi: Complex64,
    delta: f64,
    n_samples: u64,
    seed: u64,
) -> Result<CarlesonEstimate, DiagError> {
    if !(p > 0.0) {
        return Err(DiagError::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if !(delta > 0.0 && delta <= w.m_tau()) {
        return Err(DiagError::InvalidArgument(format!(
            "delta must lie in (0, m_tau = {}], got {delta}",
            w.m_tau()
        )));
    }
    let tau_xi = w.tau(xi.norm());
    let radius = delta * tau_xi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let a: f64 = rng.gen();
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = Complex64::from_polar(a.sqrt(), theta);
        let image = phi.eval(z)?;
        let x = if (image - xi).norm() < radius {
            hits += 1;
            let uval = u(z).abs();
            if uval == 0.0 {
                0.0
            } else {
                (p * (w.eta(image.norm().min(1.0 - 1e-15)) - w.eta(z.norm()))
                    + p * uval.ln())
                .exp()
            }
        } else {
            0.0
        };
        sum += x;
        sum_sq += x * x;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(CarlesonEstimate {
        ratio: mean / (tau_xi * tau_xi),
        std_error: (var / n).sqrt() / (tau_xi * tau_xi),
        hits,
        n_samples,
    })
}

/// One map's full diagnostics: boundedness sup plus per-ray compactness
/// profiles and the annulus backstop.
#[derive(Debug, Clone, Serialize)]
pub struct MapDiagnostics {
    pub expr: String,
    pub boundedness: SupReport,
    pub ray_profiles: Vec<RayProfile>,
    /// Max of the ratio on a dense angular ring at the deepest radius.
    pub annulus_sup: f64,
    pub compact_evidence: bool,
}

pub fn map_diagnostics(
    w: &RadialWeight,
    phi: &MapExpr,
    grid: &BoundaryGrid,
) -> Result<MapDiagnostics, DiagError> {
    let boundedness = boundedness_indicator(w, phi, grid)?;
    let mut ray_profiles = Vec::with_capacity(grid.rays.len());
    for &zeta in &grid.rays {
        ray_profiles.push(compactness_profile(w, phi, zeta, &grid.radii)?);
    }
    let deep = *grid.radii.last().unwrap();
    let mut annulus_sup = f64::NEG_INFINITY;
    for k in 0..256 {
        let z = Complex64::from_polar(deep, std::f64::consts::TAU * k as f64 / 256.0);
        annulus_sup = annulus_sup.max(weight_log_ratio(w, phi, z)?.exp());
    }
    let tol = COMPACT_TOL * (1.0 + boundedness.log_sup.exp().max(0.0));
    let compact_evidence = ray_profiles
        .iter()
        .all(|p| p.extrapolated_limit.abs() < tol)
        && annulus_sup < tol;
    Ok(MapDiagnostics {
        expr: phi.to_string(),
        boundedness,
        ray_profiles,
        annulus_sup,
        compact_evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holomap::parse_map;
    use crate::metric::MetricParams;
    use crate::weights::{make_weight, WeightSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn weight() -> RadialWeight {
        make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap()
    }

    fn geometry() -> Geometry {
        Geometry::new(weight(), MetricParams::default())
    }

    fn example_phi() -> MapExpr {
        parse_map("(1+z^2)/2").unwrap()
    }

    fn example_psi() -> MapExpr {
        parse_map("(1+z^2)/2 + 0.001953125*(1-z^2)^5").unwrap()
    }

    #[test]
    fn identity_boundedness_is_zero() {
        let w = weight();
        let id = parse_map("z").unwrap();
        let r = boundedness_indicator(&w, &id, &BoundaryGrid::default()).unwrap();
        assert_eq!(r.log_sup, 0.0);
        assert!(r.bounded);
    }

    #[test]
    fn constant_zero_map_boundedness() {
        // sup_z (eta(0) - eta(z)) = 0 at z = 0 since eta is increasing
        let w = weight();
        let zero = parse_map("0*z").unwrap();
        let r = boundedness_indicator(&w, &zero, &BoundaryGrid::default()).unwrap();
        assert!(r.log_sup.abs() < 1e-12, "sup = {}", r.log_sup);
    }

    #[test]
    fn example_phi_boundedness_closed_form() {
        // along the real axis eta(phi(r)) - eta(r) = 1/(1+r)
        let w = weight();
        let phi = example_phi();
        let r = boundedness_indicator(&w, &phi, &BoundaryGrid::default()).unwrap();
        assert!(r.bounded);
        // witness at z = 0 with value eta(1/2) - eta(0) = 1
        assert!((r.log_sup - 1.0).abs() < 1e-9, "sup = {}", r.log_sup);
        let deep = weight_log_ratio(&w, &phi, c(1.0 - 0.5f64.powi(20), 0.0)).unwrap();
        assert!((deep - 0.5).abs() < 1e-3, "ratio near 1 = {deep}");
    }

    #[test]
    fn compactness_profile_constant_map() {
        let w = weight();
        let zero = parse_map("0*z").unwrap();
        let p = compactness_profile(&w, &zero, c(1.0, 0.0), &default_ray_radii()).unwrap();
        assert!(p.extrapolated_limit.abs() < 1e-12);
    }

    #[test]
    fn compactness_profile_example_limits() {
        let w = weight();
        let phi = example_phi();
        let e_half = 0.5f64.exp();
        for zeta in [c(1.0, 0.0), c(-1.0, 0.0)] {
            let p = compactness_profile(&w, &phi, zeta, &default_ray_radii()).unwrap();
            assert!(
                (p.extrapolated_limit - e_half).abs() < 0.02 * e_half,
                "limit at {zeta} = {}",
                p.extrapolated_limit
            );
        }
        let p = compactness_profile(&w, &phi, c(0.0, 1.0), &default_ray_radii()).unwrap();
        assert!(p.extrapolated_limit.abs() < 1e-6, "limit at i = {}", p.extrapolated_limit);
    }

    #[test]
    fn example_pair_difference_compact() {
        let geom = geometry();
        let report = difference_profile(
            &geom,
            &example_phi(),
            &example_psi(),
            &default_rays(16),
            &default_ray_radii(),
        )
        .unwrap();
        assert!(report.bounded_evidence);
        assert!(report.compact_evidence, "sup = {}", report.sup);
    }

    #[test]
    fn same_map_difference_is_zero() {
        let geom = geometry();
        let phi = example_phi();
        for &r in &[0.0, 0.5, 0.9] {
            let v = difference_functional(&geom, &phi, &phi.clone(), c(r, 0.0)).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn example_pair_functional_decreasing_on_real_axis() {
        let geom = geometry();
        let phi = example_phi();
        let psi = example_psi();
        let mut values = Vec::new();
        for &r in &[0.9, 0.99, 0.999] {
            values.push(difference_functional(&geom, &phi, &psi, c(r, 0.0)).unwrap());
        }
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
        assert!(values[2] * 10.0 <= values[0], "{values:?}");
    }

    #[test]
    fn identity_vs_zero_functional_tends_to_one() {
        // rho -> 1 and the phi-ratio is exactly 1, so the functional -> 1
        let geom = geometry();
        let id = parse_map("z").unwrap();
        let zero = parse_map("0*z").unwrap();
        let v = difference_functional(&geom, &id, &zero, c(1.0 - 1e-5, 0.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-2, "functional = {v}");
        let report = difference_profile(&geom, &id, &zero, &default_rays(8), &default_ray_radii())
            .unwrap();
        assert!(!report.compact_evidence);
    }

    #[test]
    fn diff_norm_lower_bound_cases() {
        let geom = geometry();
        let id = parse_map("z").unwrap();
        let zero = parse_map("0*z").unwrap();
        let samples: Vec<Complex64> = (1..=40).map(|k| c(1.0 - 1.0 / (k as f64 + 1.0), 0.0)).collect();
        match lower_bound_diff_norm(&geom, &id, &zero, &samples, 0.9).unwrap() {
            DiffNormLowerBound::Proxy { value, .. } => assert!(value >= 1.0, "proxy = {value}"),
            DiffNormLowerBound::NotApplicable => panic!("rho approaches 1 here"),
        }
        // phi = z, psi = -z: both ratios are 1, proxy >= 2
        let neg = parse_map("-z").unwrap();
        match lower_bound_diff_norm(&geom, &id, &neg, &samples, 0.9).unwrap() {
            DiffNormLowerBound::Proxy { value, .. } => {
                assert!((value - 2.0).abs() < 1e-9, "proxy = {value}")
            }
            DiffNormLowerBound::NotApplicable => panic!("rho -> 1 for antipodal images"),
        }
        // the worked example's rho never gets near 1
        match lower_bound_diff_norm(&geom, &example_phi(), &example_psi(), &samples, 0.9).unwrap()
        {
            DiffNormLowerBound::NotApplicable => {}
            DiffNormLowerBound::Proxy { value, .. } => {
                panic!("expected NotApplicable, got proxy {value}")
            }
        }
    }

    #[test]
    fn carleson_identity_ratio_is_delta_squared() {
        let w = weight();
        let id = parse_map("z").unwrap();
        let delta = w.m_tau() / 2.0;
        for &xi in &[c(0.3, 0.2), c(0.0, 0.6)] {
            let est =
                carleson_box_ratio(&w, |_| 1.0, &id, 2.0, xi, delta, 400_000, 7).unwrap();
            let expected = delta * delta;
            assert!(
                (est.ratio - expected).abs() < 4.0 * est.std_error + 1e-9,
                "ratio {} vs {expected} (se {})",
                est.ratio,
                est.std_error
            );
        }
    }

    #[test]
    fn carleson_zero_u() {
        let w = weight();
        let id = parse_map("z").unwrap();
        let est =
            carleson_box_ratio(&w, |_| 0.0, &id, 2.0, c(0.3, 0.0), w.m_tau() / 2.0, 10_000, 1)
                .unwrap();
        assert_eq!(est.ratio, 0.0);
    }

    #[test]
    fn carleson_delta_validation() {
        let w = weight();
        let id = parse_map("z").unwrap();
        assert!(carleson_box_ratio(&w, |_| 1.0, &id, 2.0, c(0.0, 0.0), 1.0, 10, 1).is_err());
        assert!(carleson_box_ratio(&w, |_| 1.0, &id, 0.0, c(0.0, 0.0), 0.01, 10, 1).is_err());
    }

    #[test]
    fn carleson_deterministic() {
        let w = weight();
        let phi = example_phi();
        let a = carleson_box_ratio(&w, |_| 1.0, &phi, 2.0, c(0.5, 0.0), w.m_tau() / 2.0, 50_000, 99)
            .unwrap();
        let b = carleson_box_ratio(&w, |_| 1.0, &phi, 2.0, c(0.5, 0.0), w.m_tau() / 2.0, 50_000, 99)
            .unwrap();
        assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn map_diagnostics_example() {
        let w = weight();
        let grid = BoundaryGrid::default();
        let d = map_diagnostics(&w, &example_phi(), &grid).unwrap();
        assert!(d.boundedness.bounded);
        assert!(!d.compact_evidence);
        let zero = parse_map("0*z").unwrap();
        let d0 = map_diagnostics(&w, &zero, &grid).unwrap();
        assert!(d0.compact_evidence);
    }
}
