//! Truncated power-series (jet) arithmetic over `Complex64`.
//!
//! A `Jet` of order `k` holds coefficients `c_0..c_k` of the Taylor expansion
//! at a point, so `c_n = f^{(n)}(z0) / n!`. Arithmetic on jets agrees with
//! arithmetic on the functions they represent up to order `k`.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn constant(value: Complex64, order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
        coeffs[0] = value;
        Jet { coeffs }
    }

    /// The identity function expanded at `z0`: value `z0`, slope 1.
    pub fn variable(z0: Complex64, order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
        coeffs[0] = z0;
        if order >= 1 {
            coeffs[1] = Complex64::new(1.0, 0.0);
        }
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// `n!  * c_n`, the n-th derivative at the expansion point.
    pub fn derivative(&self, n: usize) -> Complex64 {
        let mut factorial = 1.0;
        for k in 2..=n {
            factorial *= k as f64;
        }
        self.coeffs[n] * factorial
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet { coeffs }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet { coeffs }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn mul(&self, rhs: &Jet) -> Jet {
        let k = self.order();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        for (n, c) in coeffs.iter_mut().enumerate() {
            for j in 0..=n {
                *c += self.coeffs[j] * rhs.coeffs[n - j];
            }
        }
        Jet { coeffs }
    }

    /// Division by a jet with non-zero constant term; returns `None` when the
    /// divisor has a (numerically) vanishing value at the expansion point.
    pub fn div(&self, rhs: &Jet) -> Option<Jet> {
        let k = self.order();
        let d0 = rhs.coeffs[0];
        if d0.norm() == 0.0 {
            return None;
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        for n in 0..=k {
            let mut acc = self.coeffs[n];
            for j in 0..n {
                acc -= coeffs[j] * rhs.coeffs[n - j];
            }
            coeffs[n] = acc / d0;
        }
        Some(Jet { coeffs })
    }

    pub fn powi(&self, e: u32) -> Jet {
        let mut acc = Jet::constant(Complex64::new(1.0, 0.0), self.order());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn geometric_series_coefficients() {
        // 1/(1-z) at 0: all coefficients 1
        let one = Jet::constant(c(1.0, 0.0), 5);
        let z = Jet::variable(c(0.0, 0.0), 5);
        let g = one.div(&one.sub(&z)).unwrap();
        for k in 0..=5 {
            assert!((g.coeffs()[k] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn square_at_one() {
        let z = Jet::variable(c(1.0, 0.0), 2);
        let sq = z.powi(2);
        assert!((sq.coeffs()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((sq.coeffs()[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((sq.coeffs()[2] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn division_by_zero_value_detected() {
        let z = Jet::variable(c(0.0, 0.0), 3);
        let one = Jet::constant(c(1.0, 0.0), 3);
        assert!(one.div(&z).is_none());
    }

    #[test]
    fn derivative_factorials() {
        // f(z) = z^3 at z0 = 2: f'''(2) = 6
        let z = Jet::variable(c(2.0, 0.0), 3);
        let f = z.powi(3);
        assert!((f.derivative(3) - c(6.0, 0.0)).norm() < 1e-12);
        assert!((f.derivative(1) - c(12.0, 0.0)).norm() < 1e-12);
    }
}
