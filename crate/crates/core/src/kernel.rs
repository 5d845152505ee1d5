//! Reproducing-kernel evaluation for `A^2(omega)` with radial weights.
//!
//! For a radial weight the monomials are orthogonal, so
//! `K(z, w) = sum_n (z conj(w))^n / mu_n` with `mu_n = ||z^n||^2`. The moment
//! table stores `log mu_n`; all series are evaluated with a scaled-product
//! recurrence (term ratio `u * mu_n / mu_{n+1}`) so nothing overflows or
//! underflows even when `K(z, z)` is astronomically large near the boundary.
//!
//! Series terms rise and then fall because `mu_n` decays sub-geometrically;
//! a series is truncated once it is past its peak, the running term ratio is
//! below one, and the geometric tail bound drops under `TAIL_TOL` times the
//! partial sum. Reaching the end of the table first is an error carrying an
//! estimate of the required table size.

use crate::quadrature::{log_moment, DiskRule, QuadError, RadialRule};
use crate::util::pairwise_sum;
use crate::weights::RadialWeight;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Relative geometric-tail tolerance for series truncation.
const TAIL_TOL: f64 = 1e-14;

/// Rescaling step for the scaled-product recurrences (`exp(460) ~ 1e200`).
const RESCALE_LOG: f64 = 460.0;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("moment table invariant violated: {0}")]
    TableInvariantViolation(String),
    #[error("series for |u| = {radius} not converged within N_max = {n_max}; estimated required N = {required}")]
    TruncationInsufficient {
        radius: f64,
        n_max: usize,
        required: usize,
    },
    #[error("need N_max >= 16, got {0}")]
    TableTooSmall(usize),
}

/// A kernel value carried as `mantissa * exp(log_scale)` with
/// `|mantissa| <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledKernelValue {
    pub log_scale: f64,
    pub mantissa: Complex64,
}

impl ScaledKernelValue {
    /// The represented value when it fits in an `f64`.
    pub fn to_complex(self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogDiag {
    pub log_value: f64,
    /// Relative bound on the truncated tail.
    pub tail_bound: f64,
}

/// Diagonal kernel size, exact where the series is resolvable and through the
/// calibrated asymptotic band beyond.
#[derive(Debug, Clone, Copy)]
pub enum DiagEstimate {
    Exact { log_value: f64, tail_bound: f64 },
    /// `log K(s,s) ~ 2 eta(s) - 2 log tau(s) + mid`, with `half_width` the
    /// calibrated band half-width plus an extrapolation margin.
    Asymptotic { log_value: f64, half_width: f64 },
}

impl DiagEstimate {
    pub fn log_value(&self) -> f64 {
        match *self {
            DiagEstimate::Exact { log_value, .. } => log_value,
            DiagEstimate::Asymptotic { log_value, .. } => log_value,
        }
    }
}

/// Calibrated band for `log K(s,s) - (2 eta(s) - 2 log tau(s))`.
#[derive(Debug, Clone, Copy)]
struct DiagBand {
    lo: f64,
    hi: f64,
    /// Largest radius at which the diagonal series resolves within the table.
    max_exact_radius: f64,
}

/// Log-domain table of monomial norms `log mu_n`, the backbone of all kernel
/// evaluation.
#[derive(Debug, Clone)]
pub struct MomentTable {
    weight: RadialWeight,
    log_mu: Vec<f64>,
    /// `log mu_{n+1} - log mu_n` (negative, non-decreasing).
    ratio: Vec<f64>,
    /// `mu_n / mu_{n+1} = exp(-ratio[n])`, precomputed for the recurrences.
    exp_neg_ratio: Vec<f64>,
    /// Max quadrature delta (log domain) observed on a refinement subsample.
    quad_error: f64,
    band: DiagBand,
}

impl MomentTable {
    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn n_max(&self) -> usize {
        self.log_mu.len() - 1
    }

    pub fn log_mu(&self, n: usize) -> f64 {
        self.log_mu[n]
    }

    pub fn log_mus(&self) -> &[f64] {
        &self.log_mu
    }

    pub fn quad_error(&self) -> f64 {
        self.quad_error
    }

    /// Largest radius at which diagonal evaluation is exact for this table.
    pub fn max_exact_radius(&self) -> f64 {
        self.band.max_exact_radius
    }
}

/// Builds the table with `log mu_n` for `n = 0..=n_max`, verifying strict
/// decrease and log-convexity, and calibrates the diagonal asymptotic band.
pub fn build_moments(
    w: &RadialWeight,
    n_max: usize,
    rule: &RadialRule,
) -> Result<MomentTable, KernelError> {
    if n_max < 16 {
        return Err(KernelError::TableTooSmall(n_max));
    }
    let log_mu: Vec<f64> = (0..=n_max as u32)
        .into_par_iter()
        .map(|n| log_moment(w, n, rule))
        .collect::<Result<_, _>>()?;
    // Structural invariants. The rule is a positive discrete measure, so
    // Cauchy-Schwarz holds for the computed moments up to rounding.
    let mut ratio = Vec::with_capacity(n_max);
    for n in 0..n_max {
        let d = log_mu[n + 1] - log_mu[n];
        if !(d < 0.0) {
            return Err(KernelError::TableInvariantViolation(format!(
                "mu not strictly decreasing at n = {n} (log ratio {d})"
            )));
        }
        ratio.push(d);
    }
    for n in 1..n_max {
        if ratio[n] < ratio[n - 1] - 1e-12 {
            return Err(KernelError::TableInvariantViolation(format!(
                "log-convexity broken at n = {n}: {} < {}",
                ratio[n],
                ratio[n - 1]
            )));
        }
    }
    // Quadrature error estimate on a subsample against a refined rule.
    let refined = crate::quadrature::build_radial_rule(
        rule.panels() + 2,
        rule.order(),
        rule.r_max(),
    )?;
    let mut checks: Vec<u32> = (0..=n_max.min(16) as u32).collect();
    checks.extend((32..=n_max as u32).step_by(64.max(n_max / 32)));
    let quad_error = checks
        .par_iter()
        .map(|&n| {
            let fine = log_moment(w, n, &refined)?;
            Ok((fine - log_mu[n as usize]).abs())
        })
        .collect::<Result<Vec<f64>, QuadError>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let exp_neg_ratio: Vec<f64> = ratio.iter().map(|&d| (-d).exp()).collect();
    let mut table = MomentTable {
        weight: *w,
        log_mu,
        ratio,
        exp_neg_ratio,
        quad_error,
        band: DiagBand {
            lo: 0.0,
            hi: 0.0,
            max_exact_radius: 0.0,
        },
    };
    table.band = calibrate_band(&table);
    Ok(table)
}

/// Scaled-product sum of `sum_n c_n(u) / mu_n` driven by a per-term callback.
/// Returns `(log_scale, mantissa_sum, tail_rel, stop_index)` or the index at
/// which the table ran out.
struct SeriesState {
    log_scale: f64,
    sum: Complex64,
    tail_rel: f64,
}

impl MomentTable {
    /// Exact `log K(z, z)` via the diagonal series at radius `s = |z|`.
    pub fn log_kernel_diag_radius(&self, s: f64) -> Result<LogDiag, KernelError> {
        let q_base = s * s;
        let st = self.scalar_series(q_base)?;
        Ok(LogDiag {
            log_value: st.log_scale + st.sum.re.ln(),
            tail_bound: st.tail_rel,
        })
    }

    /// `log K(z, z)`; only `|z|` enters for a radial weight.
    pub fn log_kernel_diag(&self, z: Complex64) -> Result<LogDiag, KernelError> {
        self.log_kernel_diag_radius(z.norm())
    }

    /// `log ||K_z|| = log K(z,z) / 2`.
    pub fn log_kernel_norm(&self, z: Complex64) -> Result<f64, KernelError> {
        Ok(0.5 * self.log_kernel_diag(z)?.log_value)
    }

    /// Positive-term series `sum_n q^n / mu_n` (diagonal-type), `0 <= q < 1`.
    fn scalar_series(&self, q_base: f64) -> Result<SeriesState, KernelError> {
        let n_max = self.n_max();
        let mut log_scale = -self.log_mu[0];
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut peak = 1.0f64;
        for n in 0..n_max {
            let q = q_base * self.exp_neg_ratio[n];
            term *= q;
            sum += term;
            if term > peak {
                peak = term;
            }
            if sum > 1e250 {
                let down = (-RESCALE_LOG).exp();
                term *= down;
                sum *= down;
                peak *= down;
                log_scale += RESCALE_LOG;
            }
            if q < 1.0 && term < peak {
                let tail = term * q / (1.0 - q);
                if tail < TAIL_TOL * sum {
                    return Ok(SeriesState {
                        log_scale,
                        sum: Complex64::new(sum, 0.0),
                        tail_rel: tail / sum,
                    });
                }
            }
        }
        Err(self.truncation_error(q_base.sqrt()))
    }

    fn truncation_error(&self, radius: f64) -> KernelError {
        let n_max = self.n_max();
        let log_q = 2.0 * radius.ln();
        // Peak sits where ratio[n] crosses log q; extrapolate
        // ratio[n] ~ -a n^(-1/(alpha+1)) beyond the table if needed.
        let p = 1.0 / (self.weight.spec().alpha + 1.0);
        let a = -self.ratio[n_max - 1] * (n_max as f64).powf(p);
        let peak = if self.ratio[n_max - 1] >= log_q {
            // peak inside the table; tail just was not done decaying
            n_max as f64
        } else {
            (a / -log_q).powf(1.0 / p)
        };
        KernelError::TruncationInsufficient {
            radius,
            n_max,
            required: (2.0 * peak).ceil() as usize,
        }
    }

    /// Complex kernel series `K(z, w) = sum (z conj(w))^n / mu_n` in scaled
    /// form.
    fn kernel_series(&self, u: Complex64) -> Result<SeriesState, KernelError> {
        let n_max = self.n_max();
        let q_abs = u.norm();
        let mut log_scale = -self.log_mu[0];
        let mut term = Complex64::new(1.0, 0.0);
        let mut term_abs = 1.0f64;
        let mut sum = Complex64::new(1.0, 0.0);
        let mut abs_sum = 1.0f64;
        let mut peak = 1.0f64;
        for n in 0..n_max {
            let q = q_abs * self.exp_neg_ratio[n];
            term *= u * self.exp_neg_ratio[n];
            term_abs *= q;
            sum += term;
            abs_sum += term_abs;
            if term_abs > peak {
                peak = term_abs;
            }
            if term_abs > 1e250 || abs_sum > 1e250 {
                let down = (-RESCALE_LOG).exp();
                term *= down;
                term_abs *= down;
                sum *= down;
                abs_sum *= down;
                peak *= down;
                log_scale += RESCALE_LOG;
            }
            if q < 1.0 && term_abs < peak {
                let tail = term_abs * q / (1.0 - q);
                if tail < TAIL_TOL * abs_sum {
                    return Ok(SeriesState {
                        log_scale,
                        sum,
                        tail_rel: tail / abs_sum.max(sum.norm()),
                    });
                }
            }
        }
        Err(self.truncation_error(q_abs.sqrt()))
    }

    /// `K(z, w)` as a scaled value.
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Result<ScaledKernelValue, KernelError> {
        let st = self.kernel_series(z * w.conj())?;
        let norm = st.sum.norm();
        if norm == 0.0 {
            return Ok(ScaledKernelValue {
                log_scale: 0.0,
                mantissa: Complex64::new(0.0, 0.0),
            });
        }
        Ok(ScaledKernelValue {
            log_scale: st.log_scale + norm.ln(),
            mantissa: st.sum / norm,
        })
    }

    /// Normalized kernel `khat(z, w) = K(z, w) / (||K_z|| ||K_w||)`;
    /// `|khat| <= 1` by Cauchy-Schwarz.
    pub fn kernel_normalized(
        &self,
        z: Complex64,
        w: Complex64,
    ) -> Result<Complex64, KernelError> {
        let st = self.kernel_series(z * w.conj())?;
        let lkz = self.log_kernel_diag(z)?.log_value;
        let lkw = self.log_kernel_diag(w)?.log_value;
        let scale = (st.log_scale - 0.5 * lkz - 0.5 * lkw).exp();
        Ok(st.sum * scale)
    }

    /// Skwarczynski distance `S(z, w) = sqrt(1 - |khat(z, w)|)`, computed via
    /// `1 - |khat| = (2a - a^2 - b^2) / (1 + |khat|)` with `a = 1 - Re khat`,
    /// `b = Im khat`, which stays accurate when `|khat|` is close to one.
    pub fn skwarczynski(&self, z: Complex64, w: Complex64) -> Result<f64, KernelError> {
        let khat = self.kernel_normalized(z, w)?;
        let a = 1.0 - khat.re;
        let b = khat.im;
        let one_minus_sq = (2.0 * a - a * a - b * b).max(0.0);
        Ok((one_minus_sq / (1.0 + khat.norm().min(1.0))).sqrt())
    }

    /// `||K_z - K_w||^2 / (||K_z||^2 + ||K_w||^2)` via the term-by-term
    /// non-negative series `sum |z^n - w^n|^2 / mu_n`; no cancellation when
    /// `z ~ w`.
    pub fn kernel_diff_ratio(&self, z: Complex64, w: Complex64) -> Result<f64, KernelError> {
        let log_num = self.log_kernel_diff_sq(z, w)?;
        let lkz = self.log_kernel_diag(z)?.log_value;
        let lkw = self.log_kernel_diag(w)?.log_value;
        let m = lkz.max(lkw);
        let log_den = m + ((lkz - m).exp() + (lkw - m).exp()).ln();
        match log_num {
            None => Ok(0.0),
            Some(ln_num) => Ok((ln_num - log_den).exp()),
        }
    }

    /// `log ||K_z - K_w||^2`, or `None` for `z = w`.
    pub fn log_kernel_diff_sq(
        &self,
        z: Complex64,
        w: Complex64,
    ) -> Result<Option<f64>, KernelError> {
        if z == w {
            return Ok(None);
        }
        let n_max = self.n_max();
        let m = z.norm().max(w.norm());
        if m == 0.0 {
            return Ok(None);
        }
        let unit_z = z / m;
        let unit_w = w / m;
        let q_base = m * m;
        // zn, wn are powers of the unit-scaled points; g carries the shared
        // magnitude q_base^n / mu_n through the scaled recurrence.
        let mut zn = Complex64::new(1.0, 0.0);
        let mut wn = Complex64::new(1.0, 0.0);
        let mut g = 1.0f64;
        let mut log_scale = -self.log_mu[0];
        let mut sum = 0.0f64;
        let mut peak_g = 1.0f64;
        for n in 0..n_max {
            let q = q_base * self.exp_neg_ratio[n];
            g *= q;
            zn *= unit_z;
            wn *= unit_w;
            sum += (zn - wn).norm_sqr() * g;
            if g > peak_g {
                peak_g = g;
            }
            if g > 1e250 || sum > 1e250 {
                let down = (-RESCALE_LOG).exp();
                g *= down;
                sum *= down;
                peak_g *= down;
                log_scale += RESCALE_LOG;
            }
            // |zn - wn|^2 <= 4, so 4 g q/(1-q) bounds the remaining tail.
            if q < 1.0 && g < peak_g && n as f64 > 1.0 / (1.0 - q) {
                let tail = 4.0 * g * q / (1.0 - q);
                if tail < TAIL_TOL * sum && sum > 0.0 {
                    return Ok(Some(log_scale + sum.ln()));
                }
            }
        }
        Err(self.truncation_error(m))
    }

    /// Residual of the reproducing identity `<p, K_z> = p(z)` under the given
    /// disk rule, relative to `|p(z)| + 1`. `coeffs` are the polynomial's
    /// monomial coefficients.
    pub fn reproduce_residual(
        &self,
        coeffs: &[Complex64],
        z: Complex64,
        rule: &DiskRule,
    ) -> Result<f64, KernelError> {
        let radial = &rule.radial;
        let z_abs = z.norm();
        let theta_z = z.arg();
        let deg = coeffs.len();
        let ring_values: Vec<Complex64> = radial
            .nodes()
            .par_iter()
            .zip(radial.weights().par_iter())
            .map(|(&r, &wr)| {
                let eta2 = 2.0 * self.weight.eta(r);
                let a = z_abs * r;
                // shifted coefficients v_n = exp(n ln a - log mu_n - shift)
                let ln_a = a.ln();
                let mut shift = f64::NEG_INFINITY;
                for (n, &lm) in self.log_mu.iter().enumerate() {
                    // n = 0 handled separately: 0 * ln(0) would be NaN
                    let g = if n == 0 { -lm } else { n as f64 * ln_a - lm };
                    if g > shift {
                        shift = g;
                    }
                }
                if shift - eta2 < -745.0 {
                    // the weight kills this ring entirely
                    return Complex64::new(0.0, 0.0);
                }
                let mut v = Vec::with_capacity(self.log_mu.len());
                let mut n_eff = 0;
                let mut past_peak = false;
                for (n, &lm) in self.log_mu.iter().enumerate() {
                    let g = if n == 0 {
                        -lm - shift
                    } else {
                        n as f64 * ln_a - lm - shift
                    };
                    let val = g.exp();
                    v.push(val);
                    n_eff = n;
                    if val == 1.0 {
                        past_peak = true;
                    }
                    if past_peak && val < 1e-18 {
                        break;
                    }
                }
                // enough angles to push aliasing below the coefficient decay
                let needed = n_eff + deg + 8;
                let mut n_use = 32;
                while n_use < needed && n_use < rule.n_theta {
                    n_use *= 2;
                }
                let n_use = n_use.min(rule.n_theta);
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n_use {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / n_use as f64;
                    let xi = Complex64::from_polar(r, theta);
                    // K(z, xi) phase: e^{i n (theta_z - theta)}
                    let rot = Complex64::from_polar(1.0, theta_z - theta);
                    let mut kernel_sum = Complex64::new(0.0, 0.0);
                    for &vn in v.iter().rev() {
                        kernel_sum = kernel_sum * rot + vn;
                    }
                    let mut p = Complex64::new(0.0, 0.0);
                    for &c in coeffs.iter().rev() {
                        p = p * xi + c;
                    }
                    acc += p * kernel_sum;
                }
                acc * Complex64::new((shift - eta2).exp() * 2.0 * wr * r / n_use as f64, 0.0)
            })
            .collect();
        let re: Vec<f64> = ring_values.iter().map(|c| c.re).collect();
        let im: Vec<f64> = ring_values.iter().map(|c| c.im).collect();
        let integral = Complex64::new(pairwise_sum(&re), pairwise_sum(&im));
        let mut p_z = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            p_z = p_z * z + c;
        }
        Ok((integral - p_z).norm() / (p_z.norm() + 1.0))
    }

    /// Diagonal estimate with automatic fallback to the calibrated band when
    /// the series does not resolve within the table.
    pub fn diag_estimate(&self, s: f64) -> DiagEstimate {
        if s <= self.band.max_exact_radius {
            if let Ok(d) = self.log_kernel_diag_radius(s) {
                return DiagEstimate::Exact {
                    log_value: d.log_value,
                    tail_bound: d.tail_bound,
                };
            }
        }
        let base = 2.0 * self.weight.eta(s) - 2.0 * self.weight.tau(s).ln();
        let mid = 0.5 * (self.band.lo + self.band.hi);
        // half the calibrated width plus a margin for extrapolating past the
        // calibration range
        let half_width = 0.5 * (self.band.hi - self.band.lo) + 1.0;
        DiagEstimate::Asymptotic {
            log_value: base + mid,
            half_width,
        }
    }

    /// The calibrated `log K(s,s) - (2 eta - 2 log tau)` band `(lo, hi)`.
    pub fn diag_band(&self) -> (f64, f64) {
        (self.band.lo, self.band.hi)
    }
}

/// Scans for the largest exactly-resolvable radius and calibrates the
/// asymptotic band on the outer half of the resolvable range.
fn calibrate_band(table: &MomentTable) -> DiagBand {
    // bisect the resolvable radius
    let mut lo = 0.0;
    let mut hi = 1.0 - 1e-12;
    if table.log_kernel_diag_radius(hi).is_ok() {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if table.log_kernel_diag_radius(mid).is_ok() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let max_exact = (lo - (1.0 - lo) * 1e-3).max(0.0);
    // calibrate on radii from 0.9 * max_exact up to max_exact
    let mut band_lo = f64::INFINITY;
    let mut band_hi = f64::NEG_INFINITY;
    let start = 0.9 * max_exact;
    for k in 0..=32 {
        let s = start + (max_exact - start) * k as f64 / 32.0;
        if s <= 0.0 {
            continue;
        }
        if let Ok(d) = table.log_kernel_diag_radius(s) {
            let c = d.log_value - (2.0 * table.weight.eta(s) - 2.0 * table.weight.tau(s).ln());
            band_lo = band_lo.min(c);
            band_hi = band_hi.max(c);
        }
    }
    if !band_lo.is_finite() {
        band_lo = 0.0;
        band_hi = 0.0;
    }
    DiagBand {
        lo: band_lo,
        hi: band_hi,
        max_exact_radius: max_exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_radial_rule, DiskRule};
    use crate::weights::{make_weight, WeightSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn table(n_max: usize) -> MomentTable {
        let w = make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap();
        let rule = build_radial_rule(48, 24, 1.0 - 1e-8).unwrap();
        build_moments(&w, n_max, &rule).unwrap()
    }

    #[test]
    fn diag_at_origin_is_inverse_mu0() {
        let t = table(64);
        let d = t.log_kernel_diag(c(0.0, 0.0)).unwrap();
        assert!((d.log_value + t.log_mu(0)).abs() < 1e-13);
    }

    #[test]
    fn diag_reference_075() {
        // frozen from a 40-digit quadrature + series reference
        let t = table(400);
        let d = t.log_kernel_diag(c(0.75, 0.0)).unwrap();
        assert!(
            (d.log_value - 12.41533528613274).abs() < 1e-10,
            "log K(0.75, 0.75) = {}",
            d.log_value
        );
    }

    #[test]
    fn diag_dominates_inverse_mu0() {
        let t = table(700);
        for s in [0.1, 0.5, 0.9] {
            let d = t.log_kernel_diag_radius(s).unwrap();
            assert!(d.log_value >= -t.log_mu(0) - 1e-12);
        }
    }

    #[test]
    fn normalized_diagonal_is_one() {
        let t = table(400);
        for &z in &[c(0.3, 0.2), c(-0.7, 0.1), c(0.0, 0.85)] {
            let k = t.kernel_normalized(z, z).unwrap();
            assert!((k.re - 1.0).abs() < 1e-12 && k.im.abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_matches_reference_at_origin() {
        let t = table(400);
        // khat(0, 0.75) = exp(-log K(0.75,0.75)/2 - log mu_0 / 2)
        let k = t.kernel_normalized(c(0.0, 0.0), c(0.75, 0.0)).unwrap();
        assert!((k.re - 0.016553409495968746).abs() < 1e-12, "khat = {k}");
        assert!(k.im.abs() < 1e-15);
    }

    #[test]
    fn hermitian_symmetry() {
        let t = table(700);
        let pairs = [
            (c(0.5, 0.25), c(-0.3, 0.6)),
            (c(0.9, 0.0), c(0.0, 0.9)),
            (c(0.5, -0.5), c(-0.5, 0.5)),
        ];
        for &(z, w) in &pairs {
            let a = t.kernel(z, w).unwrap();
            let b = t.kernel(w, z).unwrap();
            assert!((a.log_scale - b.log_scale).abs() < 1e-12);
            assert!((a.mantissa - b.mantissa.conj()).norm() < 1e-12);
        }
        let k1 = t.kernel_normalized(c(0.5, 0.0), c(-0.5, 0.0)).unwrap();
        let k2 = t.kernel_normalized(c(-0.5, 0.0), c(0.5, 0.0)).unwrap();
        assert!(k1.im.abs() < 1e-14, "real on conjugate-symmetric data");
        assert!((k1 - k2.conj()).norm() < 1e-14);
    }

    #[test]
    fn cauchy_schwarz_bound() {
        let t = table(2000);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r1: f64 = rng.gen_range(0.0..0.95);
            let r2: f64 = rng.gen_range(0.0..0.95);
            let t1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let t2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = Complex64::from_polar(r1, t1);
            let w = Complex64::from_polar(r2, t2);
            let k = t.kernel_normalized(z, w).unwrap();
            assert!(k.norm() <= 1.0 + 1e-10, "|khat| = {} at {z}, {w}", k.norm());
        }
    }

    #[test]
    fn skwarczynski_reference_and_axioms() {
        let t = table(400);
        assert!(t.skwarczynski(c(0.3, 0.4), c(0.3, 0.4)).unwrap() < 1e-9);
        let s = t.skwarczynski(c(0.0, 0.0), c(0.75, 0.0)).unwrap();
        assert!((s - 0.9916887568708396).abs() < 1e-10, "S = {s}");
        let s_rev = t.skwarczynski(c(0.75, 0.0), c(0.0, 0.0)).unwrap();
        assert!((s - s_rev).abs() < 1e-14);
    }

    #[test]
    fn skwarczynski_triangle_inequality() {
        let t = table(2000);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut pts = [c(0.0, 0.0); 3];
            for p in pts.iter_mut() {
                let r: f64 = rng.gen_range(0.0..0.9);
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                *p = Complex64::from_polar(r, th);
            }
            let dab = t.skwarczynski(pts[0], pts[1]).unwrap();
            let dbc = t.skwarczynski(pts[1], pts[2]).unwrap();
            let dac = t.skwarczynski(pts[0], pts[2]).unwrap();
            assert!(dac <= dab + dbc + 1e-10);
        }
    }

    #[test]
    fn diff_ratio_reference_and_range() {
        let t = table(700);
        assert_eq!(t.kernel_diff_ratio(c(0.5, 0.1), c(0.5, 0.1)).unwrap(), 0.0);
        // closed reduction via K(z, 0) = 1/mu_0:
        // ratio = (K(z,z) + K(0,0) - 2/mu_0) / (K(z,z) + K(0,0))
        let r = t.kernel_diff_ratio(c(0.75, 0.0), c(0.0, 0.0)).unwrap();
        assert!((r - 0.9994521193958218).abs() < 1e-10, "ratio = {r}");
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let z = Complex64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.28));
            let w = Complex64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.28));
            let r = t.kernel_diff_ratio(z, w).unwrap();
            assert!((0.0..=2.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn truncation_insufficient_reports_estimate() {
        let t = table(64);
        match t.log_kernel_diag(c(0.99, 0.0)) {
            Err(KernelError::TruncationInsufficient { required, .. }) => {
                assert!(required > 64, "required = {required}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_stability_under_table_growth() {
        let t1 = table(400);
        let t2 = table(800);
        for &(z, w) in &[(c(0.6, 0.2), c(-0.4, 0.5)), (c(0.85, 0.0), c(0.8, 0.1))] {
            let a = t1.kernel_normalized(z, w).unwrap();
            let b = t2.kernel_normalized(z, w).unwrap();
            assert!((a - b).norm() < 1e-11, "doubling N_max moved khat by {}", (a - b).norm());
        }
    }

    #[test]
    fn diag_band_is_narrow() {
        let t = table(2000);
        let (lo, hi) = t.diag_band();
        assert!(hi - lo < 1.0, "band width = {}", hi - lo);
        assert!(t.max_exact_radius() > 0.94);
    }

    #[test]
    fn asymptotic_fallback_brackets_exact_value() {
        // calibrate on a small table, compare against a big table's exact value
        let small = table(400);
        let big = table(20000);
        let s = 0.985; // beyond the small table's exact radius
        assert!(s > small.max_exact_radius());
        let est = small.diag_estimate(s);
        let exact = big.log_kernel_diag_radius(s).unwrap().log_value;
        match est {
            DiagEstimate::Asymptotic {
                log_value,
                half_width,
            } => {
                assert!(
                    (log_value - exact).abs() <= half_width,
                    "asymptotic {log_value} vs exact {exact} (half width {half_width})"
                );
            }
            DiagEstimate::Exact { .. } => panic!("expected fallback"),
        }
    }

    #[test]
    fn reproducing_residuals() {
        let t = table(400);
        let radial = build_radial_rule(48, 24, 1.0 - 1e-8).unwrap();
        let rule = DiskRule::new(radial, 512).unwrap();
        // p == 1 at z = 0
        let r = t
            .reproduce_residual(&[c(1.0, 0.0)], c(0.0, 0.0), &rule)
            .unwrap();
        assert!(r < 1e-10, "residual {r}");
        // p(z) = z^3 at z = 0.5
        let mut coeffs = vec![c(0.0, 0.0); 4];
        coeffs[3] = c(1.0, 0.0);
        let r = t.reproduce_residual(&coeffs, c(0.5, 0.0), &rule).unwrap();
        assert!(r < 1e-8, "residual {r}");
        // p(z) = z^10 at z = 0.9
        let mut coeffs = vec![c(0.0, 0.0); 11];
        coeffs[10] = c(1.0, 0.0);
        let r = t.reproduce_residual(&coeffs, c(0.9, 0.0), &rule).unwrap();
        assert!(r < 1e-6, "residual {r}");
    }
}
