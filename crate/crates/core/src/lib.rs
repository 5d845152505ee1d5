//! Numerical toolkit for Bergman spaces with rapidly decreasing radial
//! weights `omega = exp(-eta)`: reproducing-kernel evaluation from monomial
//! moment tables, the tau-induced geodesic distance and its bounded companion
//! `rho_tau`, composition-operator diagnostics, Hilbert-Schmidt quantities,
//! and a seeded probe suite for the comparability inequalities the theory
//! rests on.

pub mod diagnostics;
pub mod hilbert_schmidt;
pub mod holomap;
pub mod kernel;
pub mod metric;
pub mod probes;
pub mod quadrature;
pub mod util;
pub mod weights;

pub use num_complex::Complex64;
