//! Holomorphic self-maps of the disk: expression AST, jet (truncated Taylor)
//! evaluation, and boundary data: angular derivatives, order of contact and
//! same-order-data checks.

mod jet;
mod parser;

pub use jet::Jet;
pub use parser::ParseError;

use crate::util::neville_extrapolate;
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HolomapError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("pole at expansion point z = {at}")]
    PoleAtPoint { at: Complex64 },
    #[error("map is not a self-map: |phi({witness})| = {modulus} > 1 + tol")]
    NotSelfMap { witness: Complex64, modulus: f64 },
    #[error("map escapes the disk at interior node z = {at} (|phi| = {modulus})")]
    BoundaryEscape { at: Complex64, modulus: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// AST over one complex variable `z`.
///
/// The parser folds constant subtrees (except division by an exact zero), so
/// a parsed tree is in normalized form: printing and re-parsing is the
/// identity on normalized trees.
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr {
    Const(Complex64),
    Var,
    Add(Box<MapExpr>, Box<MapExpr>),
    Sub(Box<MapExpr>, Box<MapExpr>),
    Mul(Box<MapExpr>, Box<MapExpr>),
    Div(Box<MapExpr>, Box<MapExpr>),
    Neg(Box<MapExpr>),
    IntPow(Box<MapExpr>, u32),
}

/// Parses a map expression; see `parser` for the grammar.
pub fn parse_map(text: &str) -> Result<MapExpr, ParseError> {
    let expr = parser::Parser::new(text)?.parse_expr()?;
    Ok(fold_constants(expr))
}

fn fold_constants(e: MapExpr) -> MapExpr {
    use MapExpr::*;
    match e {
        Const(_) | Var => e,
        Add(a, b) => fold2(fold_constants(*a), fold_constants(*b), Add, |x, y| x + y),
        Sub(a, b) => fold2(fold_constants(*a), fold_constants(*b), Sub, |x, y| x - y),
        Mul(a, b) => fold2(fold_constants(*a), fold_constants(*b), Mul, |x, y| x * y),
        Div(a, b) => {
            let (a, b) = (fold_constants(*a), fold_constants(*b));
            if let (Const(x), Const(y)) = (&a, &b) {
                // Keep the node when the divisor is an exact zero so the
                // error surfaces at evaluation time with a position.
                if y.norm() != 0.0 {
                    return Const(x / y);
                }
            }
            Div(Box::new(a), Box::new(b))
        }
        Neg(a) => {
            let a = fold_constants(*a);
            if let Const(x) = &a {
                return Const(-x);
            }
            Neg(Box::new(a))
        }
        IntPow(a, e) => {
            let a = fold_constants(*a);
            if let Const(x) = &a {
                return Const(x.powu(e));
            }
            IntPow(Box::new(a), e)
        }
    }
}

fn fold2(
    a: MapExpr,
    b: MapExpr,
    node: fn(Box<MapExpr>, Box<MapExpr>) -> MapExpr,
    op: fn(Complex64, Complex64) -> Complex64,
) -> MapExpr {
    if let (MapExpr::Const(x), MapExpr::Const(y)) = (&a, &b) {
        return MapExpr::Const(op(*x, *y));
    }
    node(Box::new(a), Box::new(b))
}

impl MapExpr {
    fn precedence(&self) -> u8 {
        match self {
            MapExpr::Add(..) | MapExpr::Sub(..) => 1,
            MapExpr::Mul(..) | MapExpr::Div(..) => 2,
            MapExpr::Neg(..) => 3,
            MapExpr::IntPow(..) => 4,
            MapExpr::Const(_) | MapExpr::Var => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let needs_parens = self.precedence() < min_prec;
        if needs_parens {
            write!(f, "(")?;
        }
        match self {
            MapExpr::Const(c) => write_const(f, *c)?,
            MapExpr::Var => write!(f, "z")?,
            MapExpr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            MapExpr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            MapExpr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            MapExpr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            MapExpr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)?;
            }
            MapExpr::IntPow(a, e) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^{e}")?;
            }
        }
        if needs_parens {
            write!(f, ")")?;
        }
        Ok(())
    }

    /// Plain complex evaluation.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, HolomapError> {
        Ok(match self {
            MapExpr::Const(c) => *c,
            MapExpr::Var => z,
            MapExpr::Add(a, b) => a.eval(z)? + b.eval(z)?,
            MapExpr::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            MapExpr::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            MapExpr::Div(a, b) => {
                let d = b.eval(z)?;
                if d.norm() == 0.0 {
                    return Err(HolomapError::PoleAtPoint { at: z });
                }
                a.eval(z)? / d
            }
            MapExpr::Neg(a) => -a.eval(z)?,
            MapExpr::IntPow(a, e) => a.eval(z)?.powu(*e),
        })
    }

    /// Jet evaluation at `z0` up to order `k`: coefficient `n` of the result
    /// equals `f^{(n)}(z0) / n!`.
    pub fn eval_jet(&self, z0: Complex64, k: usize) -> Result<Jet, HolomapError> {
        Ok(match self {
            MapExpr::Const(c) => Jet::constant(*c, k),
            MapExpr::Var => Jet::variable(z0, k),
            MapExpr::Add(a, b) => a.eval_jet(z0, k)?.add(&b.eval_jet(z0, k)?),
            MapExpr::Sub(a, b) => a.eval_jet(z0, k)?.sub(&b.eval_jet(z0, k)?),
            MapExpr::Mul(a, b) => a.eval_jet(z0, k)?.mul(&b.eval_jet(z0, k)?),
            MapExpr::Div(a, b) => {
                let num = a.eval_jet(z0, k)?;
                let den = b.eval_jet(z0, k)?;
                num.div(&den)
                    .ok_or(HolomapError::PoleAtPoint { at: z0 })?
            }
            MapExpr::Neg(a) => a.eval_jet(z0, k)?.neg(),
            MapExpr::IntPow(a, e) => a.eval_jet(z0, k)?.powi(*e),
        })
    }

    /// True when the tree contains a division node; such maps get pole
    /// screening at evaluation time (no poles are allowed inside the disk).
    pub fn contains_division(&self) -> bool {
        match self {
            MapExpr::Const(_) | MapExpr::Var => false,
            MapExpr::Add(a, b) | MapExpr::Sub(a, b) | MapExpr::Mul(a, b) => {
                a.contains_division() || b.contains_division()
            }
            MapExpr::Div(..) => true,
            MapExpr::Neg(a) | MapExpr::IntPow(a, _) => a.contains_division(),
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    let re = if c.re == 0.0 { 0.0 } else { c.re };
    let im = if c.im == 0.0 { 0.0 } else { c.im };
    if im == 0.0 {
        write!(f, "{re}")
    } else if re == 0.0 {
        if im == 1.0 {
            write!(f, "i")
        } else {
            write!(f, "{im}i")
        }
    } else if im > 0.0 {
        write!(f, "({re} + {im}i)")
    } else {
        write!(f, "({re} - {}i)", -im)
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelfMapReport {
    pub max_modulus: f64,
    pub argmax: Complex64,
}

/// Checks `sup |phi| <= 1 + tol` on a polar grid with radii accumulating to
/// `1 - 1e-6`. The maximum principle makes a fine boundary-adjacent grid
/// sufficient at this scale.
pub fn self_map_check(
    m: &MapExpr,
    grid_size: usize,
    tol: f64,
) -> Result<SelfMapReport, HolomapError> {
    if grid_size < 64 {
        return Err(HolomapError::InvalidArgument(format!(
            "grid_size must be >= 64, got {grid_size}"
        )));
    }
    let mut max_modulus = f64::NEG_INFINITY;
    let mut argmax = Complex64::new(0.0, 0.0);
    let mut radii: Vec<f64> = (1..=grid_size)
        .map(|j| 1.0 - 1e-6f64.powf(j as f64 / grid_size as f64))
        .collect();
    radii.push(0.0);
    for &r in &radii {
        for j in 0..grid_size {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / grid_size as f64;
            let z = Complex64::from_polar(r, theta);
            let v = m.eval(z)?;
            let n = v.norm();
            if !n.is_finite() {
                return Err(HolomapError::NotSelfMap {
                    witness: z,
                    modulus: n,
                });
            }
            if n > max_modulus {
                max_modulus = n;
                argmax = z;
            }
        }
    }
    if max_modulus > 1.0 + tol {
        return Err(HolomapError::NotSelfMap {
            witness: argmax,
            modulus: max_modulus,
        });
    }
    Ok(SelfMapReport {
        max_modulus,
        argmax,
    })
}

#[derive(Debug, Clone)]
pub struct AngularDerivative {
    /// `(r, (1 - |phi(r zeta)|) / (1 - r))` per supplied radius.
    pub quotients: Vec<(f64, f64)>,
    /// Extrapolation of the quotient to `r -> 1` from the last three samples.
    pub extrapolated_liminf: f64,
}

/// Julia-Caratheodory quotient along the radius toward `zeta`:
/// `|phi'(zeta)| = liminf (1 - |phi(z)|) / (1 - |z|)`.
pub fn angular_derivative(
    m: &MapExpr,
    zeta: Complex64,
    radii: &[f64],
) -> Result<AngularDerivative, HolomapError> {
    check_unimodular(zeta)?;
    if radii.len() < 3 {
        return Err(HolomapError::InvalidArgument(
            "need at least three radii".into(),
        ));
    }
    let mut quotients = Vec::with_capacity(radii.len());
    for &r in radii {
        let z = zeta * r;
        let v = m.eval(z)?;
        let modulus = v.norm();
        if modulus >= 1.0 {
            return Err(HolomapError::BoundaryEscape { at: z, modulus });
        }
        quotients.push((r, (1.0 - modulus) / (1.0 - r)));
    }
    let tail: Vec<(f64, f64)> = quotients
        .iter()
        .rev()
        .take(3)
        .map(|&(r, q)| (1.0 - r, q))
        .collect();
    let extrapolated_liminf = neville_extrapolate(&tail);
    Ok(AngularDerivative {
        quotients,
        extrapolated_liminf,
    })
}

fn check_unimodular(zeta: Complex64) -> Result<(), HolomapError> {
    if (zeta.norm() - 1.0).abs() > 1e-12 {
        return Err(HolomapError::InvalidArgument(format!(
            "zeta must be unimodular, |zeta| = {}",
            zeta.norm()
        )));
    }
    Ok(())
}

/// Result of the same-order-data fit: the log-log slope of `|phi - psi|`
/// versus `|z - zeta|` along the radius.
#[derive(Debug, Clone, Copy)]
pub enum ContactOrderFit {
    Slope {
        slope: f64,
        residual: f64,
    },
    /// The maps agree on every sample (slope would be infinite).
    SameMap,
}

impl ContactOrderFit {
    /// Largest integer M with `phi - psi = o(|z - zeta|^M)` suggested by the
    /// fit: `floor(slope - 0.1)`, saturated at zero.
    pub fn same_order_data(&self) -> Option<u32> {
        match self {
            ContactOrderFit::Slope { slope, .. } => Some((slope - 0.1).floor().max(0.0) as u32),
            ContactOrderFit::SameMap => None,
        }
    }
}

/// Least-squares slope of `log |phi - psi|` against `log |z - zeta|` over
/// `z = r zeta`.
pub fn data_contact_order(
    phi: &MapExpr,
    psi: &MapExpr,
    zeta: Complex64,
    radii: &[f64],
) -> Result<ContactOrderFit, HolomapError> {
    check_unimodular(zeta)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in radii {
        let z = zeta * r;
        let d = (phi.eval(z)? - psi.eval(z)?).norm();
        if d > 1e-300 {
            xs.push((1.0 - r).ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 3 {
        return Ok(ContactOrderFit::SameMap);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = my + slope * (x - mx);
            (y - fit) * (y - fit)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ContactOrderFit::Slope { slope, residual })
}

#[derive(Debug, Clone, Copy)]
pub struct ContactInfimum {
    pub infimum: f64,
    pub witness: Complex64,
}

/// Scans `z = r zeta e^{i theta}` over a boundary sector and reports the
/// minimum of `(1 - |phi(z)|) / |phi(zeta) - phi(z)|^k`. A positive result
/// supports order of contact at most `k` at `zeta`. The angular offsets are
/// geometric (`+-0.4 * 2^-j` plus the radius itself) so near-tangential
/// approaches are resolved.
pub fn order_of_contact_check(
    m: &MapExpr,
    zeta: Complex64,
    k: f64,
    radii: &[f64],
) -> Result<ContactInfimum, HolomapError> {
    let mut thetas = vec![0.0];
    for j in 0..=12 {
        let t = 0.4 * 0.5f64.powi(j);
        thetas.push(t);
        thetas.push(-t);
    }
    order_of_contact_scan(m, zeta, k, radii, &thetas)
}

/// Radius-only variant: infimum of the contact quotient along `z = r zeta`.
pub fn order_of_contact_along_radius(
    m: &MapExpr,
    zeta: Complex64,
    k: f64,
    radii: &[f64],
) -> Result<ContactInfimum, HolomapError> {
    order_of_contact_scan(m, zeta, k, radii, &[0.0])
}

fn order_of_contact_scan(
    m: &MapExpr,
    zeta: Complex64,
    k: f64,
    radii: &[f64],
    thetas: &[f64],
) -> Result<ContactInfimum, HolomapError> {
    check_unimodular(zeta)?;
    if !(k > 0.0) {
        return Err(HolomapError::InvalidArgument(format!(
            "contact exponent k must be positive, got {k}"
        )));
    }
    let phi_zeta = m.eval(zeta)?;
    let mut infimum = f64::INFINITY;
    let mut witness = zeta;
    for &r in radii {
        for &theta in thetas {
            let z = zeta * Complex64::from_polar(r, theta);
            let v = m.eval(z)?;
            let gap = 1.0 - v.norm();
            let dist = (phi_zeta - v).norm();
            if dist == 0.0 {
                continue;
            }
            let q = (gap / dist.powf(k)).max(0.0);
            if q < infimum {
                infimum = q;
                witness = z;
            }
        }
    }
    if !infimum.is_finite() {
        infimum = 0.0;
    }
    Ok(ContactInfimum { infimum, witness })
}
