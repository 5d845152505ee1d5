//! The weight class: radial `eta`, `omega = exp(-eta)`, the associated radius
//! function `tau` and class-membership checks.
//!
//! The supported family is `eta(r) = A * (1 - r)^(-alpha)` with `A, alpha > 0`.
//! Its Laplacian grows like `(1 - r)^(-alpha - 2)` near the boundary, so the
//! canonical radius-function representative is
//! `tau(r) = tau_scale * (1 - r)^((alpha + 2) / 2)`,
//! which for `alpha = 1` is the familiar `(1 - r)^(3/2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("invalid weight spec: {0}")]
    InvalidSpec(String),
    #[error("radius {r} outside [0, 1)")]
    DomainError { r: f64 },
    #[error("weight not in class W: {condition}")]
    NotInClass { condition: String },
    #[error("check grid must reach a radius of at least 1 - 1e-6 (max was {max_r})")]
    InvalidGrid { max_r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    ExpInverse,
}

/// Parameters of a weight `omega = exp(-A (1-r)^(-alpha))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    #[serde(default = "default_tau_scale")]
    pub tau_scale: f64,
}

fn default_tau_scale() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn exp_inverse(a: f64, alpha: f64) -> Self {
        WeightSpec {
            family: WeightFamily::ExpInverse,
            a,
            alpha,
            tau_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<(), WeightError> {
        for (name, v) in [("A", self.a), ("alpha", self.alpha), ("tau_scale", self.tau_scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(WeightError::InvalidSpec(format!(
                    "{name} must be a positive finite real, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Point values of a weight at one radius.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightPoint {
    pub eta: f64,
    pub log_omega: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub delta_eta: f64,
}

/// A built weight with its tau representative and the empirical constants
/// `c1`, `c2`, `m_tau` estimated at construction time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialWeight {
    spec: WeightSpec,
    /// Exponent `p` in `tau(r) = tau_scale * (1-r)^p`. Defaults to
    /// `(alpha + 2) / 2`; overridable for negative-control experiments.
    tau_exponent: f64,
    m: u32,
    c1: f64,
    c2: f64,
    m_tau: f64,
}

impl RadialWeight {
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn eta(&self, r: f64) -> f64 {
        self.spec.a * (1.0 - r).powf(-self.spec.alpha)
    }

    pub fn eta_prime(&self, r: f64) -> f64 {
        self.spec.a * self.spec.alpha * (1.0 - r).powf(-self.spec.alpha - 1.0)
    }

    pub fn eta_second(&self, r: f64) -> f64 {
        let al = self.spec.alpha;
        self.spec.a * al * (al + 1.0) * (1.0 - r).powf(-al - 2.0)
    }

    pub fn log_omega(&self, r: f64) -> f64 {
        -self.eta(r)
    }

    pub fn tau(&self, r: f64) -> f64 {
        self.spec.tau_scale * (1.0 - r).powf(self.tau_exponent)
    }

    pub fn tau_prime(&self, r: f64) -> f64 {
        -self.spec.tau_scale * self.tau_exponent * (1.0 - r).powf(self.tau_exponent - 1.0)
    }

    /// Planar Laplacian of the radial function: `eta'' + eta'/r`, for `r > 0`.
    pub fn delta_eta(&self, r: f64) -> f64 {
        self.eta_second(r) + self.eta_prime(r) / r
    }

    pub fn tau_exponent(&self) -> f64 {
        self.tau_exponent
    }

    /// Smallest integer `m >= 1` with `tau(r) / (1-r)^m` bounded below near 1.
    pub fn contact_exponent(&self) -> u32 {
        self.m
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn m_tau(&self) -> f64 {
        self.m_tau
    }

    /// Point evaluation with domain checking.
    pub fn eval(&self, r: f64) -> Result<WeightPoint, WeightError> {
        if !(0.0..1.0).contains(&r) || !r.is_finite() {
            return Err(WeightError::DomainError { r });
        }
        Ok(WeightPoint {
            eta: self.eta(r),
            log_omega: self.log_omega(r),
            tau: self.tau(r),
            tau_prime: self.tau_prime(r),
            delta_eta: if r > 0.0 {
                self.delta_eta(r)
            } else {
                // The planar Laplacian of eta is singular at the origin for
                // this family; report the limit direction instead of NaN.
                f64::INFINITY
            },
        })
    }

    /// Replaces the tau exponent. Testing/negative-control hook: an exponent
    /// below 1 (or equal to 1) leaves the class W since `tau'` no longer
    /// vanishes at the boundary. Constants `c1`, `c2`, `m_tau` are
    /// re-estimated for the overridden representative.
    pub fn with_tau_exponent(mut self, exponent: f64) -> Self {
        self.tau_exponent = exponent;
        let (c1, c2) = estimate_lipschitz_constants(&self);
        self.c1 = c1;
        self.c2 = c2;
        self.m_tau = m_tau_from(c1, c2);
        self
    }
}

fn m_tau_from(c1: f64, c2: f64) -> f64 {
    (1f64.min(1.0 / c1).min(1.0 / c2)) / 4.0
}

/// Grid used for constant estimation: coarse cover of `[0, 1/2]` plus the
/// geometric boundary-approach grid.
fn estimation_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..32).map(|k| k as f64 / 64.0).collect();
    g.extend(default_check_grid());
    g
}

/// Default class-check grid `r = 1 - 2^{-k}`, `k = 1..=40`; a geometric
/// approach to the boundary matching the decay scale of tau.
pub fn default_check_grid() -> Vec<f64> {
    (1..=40).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

fn estimate_lipschitz_constants(w: &RadialWeight) -> (f64, f64) {
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for r in estimation_grid() {
        c1 = c1.max(w.tau(r) / (1.0 - r));
        c2 = c2.max(w.tau_prime(r).abs());
    }
    (c1, c2)
}

/// Builds a weight, estimating `c1`, `c2`, `m_tau` by sampling tau on a grid
/// accumulating toward `r = 1`.
pub fn make_weight(spec: WeightSpec) -> Result<RadialWeight, WeightError> {
    spec.validate()?;
    let tau_exponent = (spec.alpha + 2.0) / 2.0;
    let m = tau_exponent.ceil() as u32;
    let mut w = RadialWeight {
        spec,
        tau_exponent,
        m,
        c1: 0.0,
        c2: 0.0,
        m_tau: 0.0,
    };
    let (c1, c2) = estimate_lipschitz_constants(&w);
    w.c1 = c1;
    w.c2 = c2;
    w.m_tau = m_tau_from(c1, c2);
    Ok(w)
}

/// Outcome of the class-membership checks on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub tau_limit: f64,
    pub tau_prime_limit: f64,
    pub min_delta_eta: f64,
    pub c1: f64,
    pub c2: f64,
    pub m_tau: f64,
    pub contact_exponent: u32,
}

/// Tolerance below which tau and tau' at the far end of the grid count as
/// "vanishing at the boundary".
pub const CLASS_LIMIT_TOL: f64 = 1e-3;

/// Checks the defining conditions of the class W on a grid: `tau -> 0`,
/// `tau' -> 0` as `r -> 1`, and `Delta eta > 0` on `(0, 1)`.
pub fn class_membership_report(w: &RadialWeight, grid: &[f64]) -> Result<ClassReport, WeightError> {
    let max_r = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max_r >= 1.0 - 1e-6) {
        return Err(WeightError::InvalidGrid { max_r });
    }
    let far = max_r;
    let tau_limit = w.tau(far);
    let tau_prime_limit = w.tau_prime(far).abs();
    let mut min_delta_eta = f64::INFINITY;
    for &r in grid {
        if r > 0.0 && r < 1.0 {
            min_delta_eta = min_delta_eta.min(w.delta_eta(r));
        }
    }
    if !(min_delta_eta > 0.0) {
        return Err(WeightError::NotInClass {
            condition: format!("Delta eta must be positive on (0,1); min was {min_delta_eta}"),
        });
    }
    if !(tau_limit < CLASS_LIMIT_TOL) {
        return Err(WeightError::NotInClass {
            condition: format!("tau(r) does not vanish at the boundary: tau({far}) = {tau_limit}"),
        });
    }
    if !(tau_prime_limit < CLASS_LIMIT_TOL) {
        return Err(WeightError::NotInClass {
            condition: format!(
                "tau'(r) does not vanish at the boundary: |tau'({far})| = {tau_prime_limit}"
            ),
        });
    }
    Ok(ClassReport {
        tau_limit,
        tau_prime_limit,
        min_delta_eta,
        c1: w.c1,
        c2: w.c2,
        m_tau: w.m_tau,
        contact_exponent: w.contact_exponent(),
    })
}
