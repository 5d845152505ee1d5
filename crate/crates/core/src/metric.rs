//! The tau-induced geodesic distance `d_tau` with certified bracketing, and
//! its bounded companion `rho_tau = 1 - exp(-d_tau)`.
//!
//! For the radial metric `|dz| / tau(|z|)` every distance query gets
//!
//! * an upper bound from admissible paths: the straight segment, a
//!   radial-arc-radial composite path, and (when affordable) a smoothed
//!   Dijkstra polyline on a local polar graph, re-integrated exactly;
//! * a certified lower bound from the path profile: any path with minimum
//!   radius `rho` costs at least `max(A, B)` and `(A + B)/sqrt(2)` where
//!   `A(rho) = F(|z|) + F(|w|) - 2 F(rho)` is the forced radial travel
//!   (`F(r) = int_0^r dt/tau`) and `B(rho) = dtheta * rho / tau(rho)` the
//!   forced angular travel (`r/tau` is increasing). Minimizing over `rho`
//!   keeps the bound sound.
//!
//! The composite path and the `(A+B)/sqrt(2)` bound minimize the same
//! profile, so `upper / lower <= sqrt(2)` always; the graph only tightens
//! the upper estimate.

use crate::holomap::{HolomapError, MapExpr};
use crate::util::adaptive_simpson;
use crate::weights::RadialWeight;
use num_complex::Complex64;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("bracket too wide: upper/lower = {ratio} > {limit}")]
    ResolutionTooCoarse { ratio: f64, limit: f64 },
    #[error("point {at} outside the open disk")]
    OutsideDomain { at: Complex64 },
    #[error("map image escapes the working radius at z = {at} (|image| = {modulus})")]
    BoundaryEscape { at: Complex64, modulus: f64 },
    #[error(transparent)]
    Map(#[from] HolomapError),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricParams {
    /// Ring-density knob: radial ring spacing is `tau(r) * 8 / resolution`,
    /// so the default 16 gives the `0.5 tau` spacing and doubling halves it.
    pub resolution: u32,
    /// Short-distance threshold R for the set `E = {d_tau < R}`; consumed by
    /// probes and diagnostics, surfaced here so one knob reaches the CLI.
    pub big_r: f64,
    /// Run the graph refinement only when the composite upper bound is at
    /// most this; beyond it the rho-mapped bracket is already tight.
    pub graph_threshold: f64,
    /// Node budget for a local graph patch.
    pub node_cap: usize,
    /// Vertex-relaxation passes over the Dijkstra polyline.
    pub smooth_passes: u32,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            resolution: 16,
            big_r: 1.0,
            graph_threshold: 6.0,
            node_cap: 150_000,
            smooth_passes: 20,
        }
    }
}

/// Bracketed distance value with the polyline witnessing the upper bound.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicEstimate {
    pub lower: f64,
    pub estimate: f64,
    pub upper: f64,
    pub path: Vec<Complex64>,
}

/// `rho_tau` bracket mapped through `1 - exp(-d)` (order preserving).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoEstimate {
    pub lower: f64,
    pub estimate: f64,
    pub upper: f64,
}

/// Distance queries for one weight.
#[derive(Debug, Clone)]
pub struct Geometry {
    weight: RadialWeight,
    params: MetricParams,
}

impl Geometry {
    pub fn new(weight: RadialWeight, params: MetricParams) -> Self {
        Geometry { weight, params }
    }

    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    pub fn big_r(&self) -> f64 {
        self.params.big_r
    }

    /// `F(r) = int_0^r dt / tau(t)`, the radial potential (closed form for
    /// the power family).
    pub fn radial_potential(&self, r: f64) -> f64 {
        let p = self.weight.tau_exponent();
        let ts = self.weight.spec().tau_scale;
        if (p - 1.0).abs() < 1e-12 {
            -(1.0 - r).ln() / ts
        } else {
            ((1.0 - r).powf(1.0 - p) - 1.0) / (ts * (p - 1.0))
        }
    }

    /// Line integral of `1/tau` along the straight segment; an upper bound
    /// for `d_tau` from a single admissible curve. Adaptive quadrature with
    /// relative tolerance 1e-10.
    pub fn segment_distance(&self, z: Complex64, w: Complex64) -> f64 {
        if z == w {
            return 0.0;
        }
        let chord = (w - z).norm();
        let rough = chord
            * (1.0 / self.weight.tau(z.norm())
                + 1.0 / self.weight.tau(w.norm())
                + 1.0 / self.weight.tau((0.5 * (z + w)).norm()))
            / 3.0;
        let tol = 1e-10 * (1.0 + rough.abs());
        adaptive_simpson(
            |t| chord / self.weight.tau((z + (w - z) * t).norm()),
            0.0,
            1.0,
            tol,
        )
    }

    fn angular_gap(z: Complex64, w: Complex64) -> f64 {
        if z.norm() == 0.0 || w.norm() == 0.0 {
            return 0.0;
        }
        let d = (z.arg() - w.arg()).abs();
        d.min(std::f64::consts::TAU - d)
    }

    /// `(A(rho), B(rho))` of the path profile.
    fn profile(&self, f1: f64, f2: f64, dtheta: f64, rho: f64) -> (f64, f64) {
        let a = f1 + f2 - 2.0 * self.radial_potential(rho);
        let b = dtheta * rho / self.weight.tau(rho);
        (a, b)
    }

    /// Minimizes `A + B` and `max(A, B)` over `rho in [0, r1]`. Returns
    /// `(u_comp, argmin, l_max_form)`.
    fn composite_profile(&self, z: Complex64, w: Complex64) -> (f64, f64, f64) {
        let (r1, r2) = {
            let (a, b) = (z.norm(), w.norm());
            (a.min(b), a.max(b))
        };
        let f1 = self.radial_potential(r1);
        let f2 = self.radial_potential(r2);
        let dtheta = Self::angular_gap(z, w);
        let eval_sum = |rho: f64| {
            let (a, b) = self.profile(f1, f2, dtheta, rho);
            a + b
        };
        // coarse grid then golden-section refinement (the profile sum is
        // unimodal in rho for the power family)
        let n = 96;
        let mut best = f64::INFINITY;
        let mut best_k = 0usize;
        for k in 0..=n {
            let rho = r1 * k as f64 / n as f64;
            let v = eval_sum(rho);
            if v < best {
                best = v;
                best_k = k;
            }
        }
        let mut lo = r1 * best_k.saturating_sub(1) as f64 / n as f64;
        let mut hi = r1 * (best_k + 1).min(n) as f64 / n as f64;
        let inv_phi = 0.618_033_988_749_894_9;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut fx1 = eval_sum(x1);
        let mut fx2 = eval_sum(x2);
        for _ in 0..60 {
            if fx1 < fx2 {
                hi = x2;
                x2 = x1;
                fx2 = fx1;
                x1 = hi - inv_phi * (hi - lo);
                fx1 = eval_sum(x1);
            } else {
                lo = x1;
                x1 = x2;
                fx1 = fx2;
                x2 = lo + inv_phi * (hi - lo);
                fx2 = eval_sum(x2);
            }
        }
        let argmin = 0.5 * (lo + hi);
        let u_comp = best.min(fx1).min(fx2);
        // min over rho of max(A, B): A decreases, B increases in rho, so the
        // minimum sits at the crossing (or an endpoint).
        let eval_max = |rho: f64| {
            let (a, b) = self.profile(f1, f2, dtheta, rho);
            a.max(b)
        };
        let mut l_max = eval_max(r1).min(eval_max(0.0));
        let (mut lo, mut hi) = (0.0f64, r1);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let (a, b) = self.profile(f1, f2, dtheta, mid);
            l_max = l_max.min(a.max(b));
            if a > b {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (u_comp, argmin, l_max)
    }

    /// Bracketed geodesic distance.
    pub fn geodesic(&self, z: Complex64, w: Complex64) -> Result<GeodesicEstimate, MetricError> {
        self.geodesic_impl(z, w, f64::INFINITY, true)
    }

    /// Bracket from the analytic bounds only (segment and composite paths,
    /// no graph refinement). The certified ratio `upper/lower <= sqrt(2)`
    /// holds regardless; integrands that fold the bracket width into their
    /// error bars use this cheap route.
    pub fn geodesic_no_graph(
        &self,
        z: Complex64,
        w: Complex64,
    ) -> Result<GeodesicEstimate, MetricError> {
        self.geodesic_impl(z, w, f64::INFINITY, false)
    }

    /// `rho_tau` from the no-graph bracket.
    pub fn rho_fast(&self, z: Complex64, w: Complex64) -> Result<RhoEstimate, MetricError> {
        let g = self.geodesic_no_graph(z, w)?;
        Ok(RhoEstimate {
            lower: -(-g.lower).exp_m1(),
            estimate: -(-g.estimate).exp_m1(),
            upper: -(-g.upper).exp_m1(),
        })
    }

    /// Like [`Geometry::geodesic`] but errs with `ResolutionTooCoarse` when
    /// the bracket ratio exceeds `max_ratio` (the certified construction
    /// keeps it at or below sqrt(2)).
    pub fn geodesic_checked(
        &self,
        z: Complex64,
        w: Complex64,
        max_ratio: f64,
    ) -> Result<GeodesicEstimate, MetricError> {
        self.geodesic_impl(z, w, max_ratio, true)
    }

    fn geodesic_impl(
        &self,
        z: Complex64,
        w: Complex64,
        max_ratio: f64,
        use_graph: bool,
    ) -> Result<GeodesicEstimate, MetricError> {
        for &p in &[z, w] {
            if p.norm() >= 1.0 {
                return Err(MetricError::OutsideDomain { at: p });
            }
        }
        if z == w {
            return Ok(GeodesicEstimate {
                lower: 0.0,
                estimate: 0.0,
                upper: 0.0,
                path: vec![z, w],
            });
        }
        let (u_comp, rho_star, l_max) = self.composite_profile(z, w);
        let seg = self.segment_distance(z, w);
        let l_sum = u_comp / std::f64::consts::SQRT_2;
        let floor = (z - w).norm() / self.weight.tau(0.0);
        let lower = l_sum.max(l_max).max(floor);

        let mut upper = seg.min(u_comp);
        let mut path = if seg <= u_comp {
            vec![z, w]
        } else {
            self.composite_path(z, w, rho_star)
        };
        if use_graph && upper > 0.05 && upper <= self.params.graph_threshold {
            if let Some((graph_upper, graph_path)) = self.graph_upper(z, w, upper, rho_star) {
                if graph_upper < upper {
                    upper = graph_upper;
                    path = graph_path;
                }
            }
        }
        // quadrature slack: keep the invariant lower <= upper
        let lower = lower.min(upper);
        let ratio = if lower > 0.0 { upper / lower } else { 1.0 };
        if ratio > max_ratio {
            return Err(MetricError::ResolutionTooCoarse {
                ratio,
                limit: max_ratio,
            });
        }
        Ok(GeodesicEstimate {
            lower,
            estimate: upper,
            upper,
            path,
        })
    }

    /// Integrates `1/tau` along a polyline.
    pub fn polyline_length(&self, path: &[Complex64]) -> f64 {
        path.windows(2)
            .map(|seg| self.segment_distance(seg[0], seg[1]))
            .sum()
    }

    fn composite_path(&self, z: Complex64, w: Complex64, rho: f64) -> Vec<Complex64> {
        let mut path = vec![z];
        let (az, aw) = (z.arg(), w.arg());
        if rho > 1e-12 {
            path.push(Complex64::from_polar(rho, az));
            // arc sampled densely enough for per-segment quadrature
            let mut gap = aw - az;
            while gap > std::f64::consts::PI {
                gap -= std::f64::consts::TAU;
            }
            while gap < -std::f64::consts::PI {
                gap += std::f64::consts::TAU;
            }
            let steps = (gap.abs() / 0.05).ceil() as usize;
            for k in 1..steps {
                path.push(Complex64::from_polar(rho, az + gap * k as f64 / steps as f64));
            }
            path.push(Complex64::from_polar(rho, aw));
        } else {
            path.push(Complex64::new(0.0, 0.0));
        }
        path.push(w);
        path
    }

    fn ring_spacing(&self, r: f64) -> f64 {
        let factor = 8.0 / self.params.resolution as f64;
        factor * self.weight.tau(r).min(0.25)
    }

    /// Smoothed-Dijkstra upper bound on a local polar patch. Returns `None`
    /// when the patch would exceed the node budget.
    fn graph_upper(
        &self,
        z: Complex64,
        w: Complex64,
        upper0: f64,
        rho_star: f64,
    ) -> Option<(f64, Vec<Complex64>)> {
        let r1 = z.norm().min(w.norm());
        let r2 = z.norm().max(w.norm());
        let f1 = self.radial_potential(r1);
        let f2 = self.radial_potential(r2);
        let dtheta = Self::angular_gap(z, w);
        // confinement: the geodesic cannot dip below the smallest rho with
        // (A + B)/sqrt(2) <= upper0
        let mut rho_lo = rho_star;
        for k in (0..=128).rev() {
            let rho = rho_star * k as f64 / 128.0;
            let (a, b) = self.profile(f1, f2, dtheta, rho);
            if (a + b) / std::f64::consts::SQRT_2 <= upper0 * (1.0 + 1e-9) {
                rho_lo = rho;
            } else {
                break;
            }
        }
        rho_lo = (rho_lo - self.ring_spacing(rho_lo)).max(0.0);
        // ... nor rise above the smallest radius whose pure radial cost from
        // r2 exceeds the upper bound
        let mut r_hi = r2;
        while r_hi < 1.0 - 1e-9
            && self.radial_potential(r_hi) - f2 <= upper0
            && self.ring_spacing(r_hi) > 1e-12
        {
            r_hi += self.ring_spacing(r_hi);
        }
        r_hi = r_hi.min(1.0 - 1e-9);
        // angular confinement via the forced-angular-travel bound
        let g_lo = if rho_lo > 0.0 {
            rho_lo / self.weight.tau(rho_lo)
        } else {
            0.0
        };
        let full_circle = g_lo <= 0.0
            || std::f64::consts::SQRT_2 * upper0 / g_lo + dtheta >= std::f64::consts::TAU;
        let (theta_center, half_width) = if full_circle {
            (0.0, std::f64::consts::PI)
        } else {
            let mut gap = w.arg() - z.arg();
            while gap > std::f64::consts::PI {
                gap -= std::f64::consts::TAU;
            }
            while gap < -std::f64::consts::PI {
                gap += std::f64::consts::TAU;
            }
            let center = z.arg() + 0.5 * gap;
            let pad = (std::f64::consts::SQRT_2 * upper0 / g_lo - dtheta).max(0.0) * 0.5;
            let hw = (0.5 * dtheta + pad).min(std::f64::consts::PI);
            (center, hw)
        };

        let graph = PolarGraph::build(self, rho_lo, r_hi, theta_center, half_width)?;
        let start = graph.nearest(z);
        let goal = graph.nearest(w);
        let node_path = graph.dijkstra(start, goal)?;
        let mut pts: Vec<Complex64> = Vec::with_capacity(node_path.len() + 2);
        pts.push(z);
        pts.extend(node_path.iter().map(|&i| graph.pos[i]));
        pts.push(w);
        self.smooth(&mut pts);
        let cost = self.polyline_length(&pts);
        Some((cost, pts))
    }

    /// Iterative vertex relaxation: pull interior vertices toward the local
    /// cost minimizer between their neighbors.
    fn smooth(&self, pts: &mut [Complex64]) {
        if pts.len() < 3 {
            return;
        }
        let local = |a: Complex64, m: Complex64, b: Complex64| {
            self.quick_cost(a, m) + self.quick_cost(m, b)
        };
        for _ in 0..self.params.smooth_passes {
            for i in 1..pts.len() - 1 {
                let (a, b) = (pts[i - 1], pts[i + 1]);
                let mid = 0.5 * (a + b);
                let mut best = pts[i];
                let mut best_cost = local(a, best, b);
                for &t in &[0.25, 0.5, 0.75, 1.0] {
                    let cand = pts[i] + (mid - pts[i]) * t;
                    if cand.norm() >= 1.0 - 1e-9 {
                        continue;
                    }
                    let c = local(a, cand, b);
                    if c < best_cost {
                        best_cost = c;
                        best = cand;
                    }
                }
                pts[i] = best;
            }
        }
    }

    /// 4-point Gauss-Legendre segment cost, used only to steer smoothing.
    fn quick_cost(&self, a: Complex64, b: Complex64) -> f64 {
        const X: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const W: [f64; 4] = [
            0.347_854_845_137_453_86,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_86,
        ];
        let len = (b - a).norm();
        let mut acc = 0.0;
        for (&x, &wt) in X.iter().zip(&W) {
            let t = 0.5 * (x + 1.0);
            let p = a + (b - a) * t;
            acc += wt / self.weight.tau(p.norm());
        }
        0.5 * len * acc
    }

    /// `rho_tau(z, w) = 1 - exp(-d_tau(z, w))` with the bracket mapped
    /// through the same transform.
    pub fn rho(&self, z: Complex64, w: Complex64) -> Result<RhoEstimate, MetricError> {
        let g = self.geodesic(z, w)?;
        Ok(RhoEstimate {
            lower: -(-g.lower).exp_m1(),
            estimate: -(-g.estimate).exp_m1(),
            upper: -(-g.upper).exp_m1(),
        })
    }

    /// `rho_{tau,phi,psi}(z) = rho_tau(phi(z), psi(z))`.
    pub fn rho_maps(
        &self,
        phi: &MapExpr,
        psi: &MapExpr,
        z: Complex64,
    ) -> Result<RhoEstimate, MetricError> {
        let a = phi.eval(z)?;
        let b = psi.eval(z)?;
        for &p in &[a, b] {
            if p.norm() >= 1.0 {
                return Err(MetricError::BoundaryEscape {
                    at: z,
                    modulus: p.norm(),
                });
            }
        }
        self.rho(a, b)
    }
}

/// Polar graph patch: rings with tau-proportional spacing, angular nodes
/// proportional to `r / tau(r)`, 16-neighbor stencil, edge weight
/// `euclidean length / tau(midpoint)`.
pub struct PolarGraph {
    pub pos: Vec<Complex64>,
    rings: Vec<RingInfo>,
    adj: Vec<Vec<(u32, f64)>>,
}

struct RingInfo {
    start: usize,
    count: usize,
    theta0: f64,
    dtheta: f64,
}

impl PolarGraph {
    fn build(
        geom: &Geometry,
        r_lo: f64,
        r_hi: f64,
        theta_center: f64,
        half_width: f64,
    ) -> Option<PolarGraph> {
        let full = (half_width - std::f64::consts::PI).abs() < 1e-12;
        let mut radii = Vec::new();
        let mut r = r_lo.max(0.0);
        loop {
            radii.push(r);
            let step = geom.ring_spacing(r);
            if step <= 1e-12 {
                break;
            }
            r += step;
            if r >= r_hi {
                radii.push(r_hi);
                break;
            }
            if radii.len() > 4096 {
                return None;
            }
        }
        let mut rings = Vec::with_capacity(radii.len());
        let mut pos = Vec::new();
        for &r in &radii {
            let spacing = geom.ring_spacing(r).max(1e-12);
            let (count, theta0, dtheta) = if r < 1e-12 {
                (1, theta_center, 0.0)
            } else if full {
                let c = ((std::f64::consts::TAU * r / spacing).ceil() as usize).max(8);
                (c, 0.0, std::f64::consts::TAU / c as f64)
            } else {
                let c = ((2.0 * half_width * r / spacing).ceil() as usize).max(4) + 1;
                (
                    c,
                    theta_center - half_width,
                    2.0 * half_width / (c - 1) as f64,
                )
            };
            if pos.len() + count > geom.params.node_cap {
                return None;
            }
            rings.push(RingInfo {
                start: pos.len(),
                count,
                theta0,
                dtheta,
            });
            for j in 0..count {
                pos.push(Complex64::from_polar(r, theta0 + dtheta * j as f64));
            }
        }
        let n = pos.len();
        if n < 2 {
            return None;
        }
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(16); n];
        let tau_mid = |a: Complex64, b: Complex64| geom.weight.tau((0.5 * (a + b)).norm());
        let mut connect = |adj: &mut Vec<Vec<(u32, f64)>>, i: usize, j: usize| {
            if i == j {
                return;
            }
            let wgt = (pos[i] - pos[j]).norm() / tau_mid(pos[i], pos[j]);
            adj[i].push((j as u32, wgt));
        };
        for (k, ring) in rings.iter().enumerate() {
            for j in 0..ring.count {
                let i = ring.start + j;
                // same ring +-1, +-2
                for off in [-2i64, -1, 1, 2] {
                    if let Some(t) = ring_index(ring, full, j as i64 + off) {
                        connect(&mut adj, i, ring.start + t);
                    }
                }
                let theta_i = ring.theta0 + ring.dtheta * j as f64;
                // adjacent rings: nearest node plus +-1, +-2
                for (dk, offs) in [(1i64, 2i64), (2, 0)] {
                    for dir in [-dk, dk] {
                        let kk = k as i64 + dir;
                        if kk < 0 || kk as usize >= rings.len() {
                            continue;
                        }
                        let other = &rings[kk as usize];
                        let nearest = if other.count == 1 || other.dtheta == 0.0 {
                            0
                        } else {
                            ((theta_i - other.theta0) / other.dtheta).round() as i64
                        };
                        for off in -offs..=offs {
                            if let Some(t) = ring_index(other, full, nearest + off) {
                                connect(&mut adj, i, other.start + t);
                            }
                        }
                    }
                }
            }
        }
        Some(PolarGraph { pos, rings, adj })
    }

    fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        // rings are radius-sorted; a coarse scan is fine at patch scale
        for (i, &p) in self.pos.iter().enumerate() {
            let d = (p - z).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn dijkstra(&self, start: usize, goal: usize) -> Option<Vec<usize>> {
        #[derive(PartialEq)]
        struct State {
            cost: f64,
            node: usize,
        }
        impl Eq for State {}
        impl Ord for State {
            fn cmp(&self, other: &Self) -> Ordering {
                other
                    .cost
                    .partial_cmp(&self.cost)
                    .unwrap_or(Ordering::Equal)
            }
        }
        impl PartialOrd for State {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        let n = self.pos.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[start] = 0.0;
        heap.push(State {
            cost: 0.0,
            node: start,
        });
        while let Some(State { cost, node }) = heap.pop() {
            if node == goal {
                break;
            }
            if cost > dist[node] {
                continue;
            }
            for &(next, w) in &self.adj[node] {
                let next = next as usize;
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    prev[next] = node;
                    heap.push(State { cost: c, node: next });
                }
            }
        }
        if !dist[goal].is_finite() {
            return None;
        }
        let mut path = vec![goal];
        let mut cur = goal;
        while cur != start {
            cur = prev[cur];
            if cur == usize::MAX {
                return None;
            }
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    pub fn node_count(&self) -> usize {
        self.pos.len()
    }

    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }
}

fn ring_index(ring: &RingInfo, full: bool, j: i64) -> Option<usize> {
    let c = ring.count as i64;
    if c == 1 {
        return Some(0);
    }
    if full {
        Some(j.rem_euclid(c) as usize)
    } else if (0..c).contains(&j) {
        Some(j as usize)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_weight, WeightSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn geometry() -> Geometry {
        let w = make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap();
        Geometry::new(w, MetricParams::default())
    }

    #[test]
    fn segment_distance_radial_closed_form() {
        // int_0^0.75 (1-t)^{-3/2} dt = 2((0.25)^{-1/2} - 1) = 2
        let g = geometry();
        let d = g.segment_distance(c(0.0, 0.0), c(0.75, 0.0));
        assert!((d - 2.0).abs() < 1e-9, "d = {d}");
        assert_eq!(g.segment_distance(c(0.3, 0.3), c(0.3, 0.3)), 0.0);
        let fwd = g.segment_distance(c(0.1, 0.5), c(-0.4, 0.2));
        let back = g.segment_distance(c(-0.4, 0.2), c(0.1, 0.5));
        assert!((fwd - back).abs() < 1e-10);
    }

    #[test]
    fn radial_potential_closed_form() {
        let g = geometry();
        assert!((g.radial_potential(0.75) - 2.0).abs() < 1e-12);
        assert_eq!(g.radial_potential(0.0), 0.0);
    }

    #[test]
    fn geodesic_radial_pair_is_exact() {
        let g = geometry();
        let e = g.geodesic(c(0.0, 0.0), c(0.75, 0.0)).unwrap();
        assert!(e.lower <= 2.0 + 1e-9 && 2.0 - 1e-9 <= e.upper, "bracket [{}, {}]", e.lower, e.upper);
        assert!(e.upper - e.lower < 1e-3, "width = {}", e.upper - e.lower);
        assert!((e.estimate - 2.0).abs() < 1e-3);
    }

    #[test]
    fn geodesic_same_point_zero() {
        let g = geometry();
        let e = g.geodesic(c(0.5, 0.2), c(0.5, 0.2)).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.lower, 0.0);
    }

    #[test]
    fn geodesic_antipodal_through_origin() {
        // the through-origin segment is optimal: d = 2 * F(0.75) = 4
        let g = geometry();
        let e = g.geodesic(c(0.75, 0.0), c(-0.75, 0.0)).unwrap();
        assert!(e.upper >= 4.0 - 1e-6, "upper = {}", e.upper);
        assert!(e.lower <= 4.0, "lower = {}", e.lower);
        assert!((e.estimate - 4.0).abs() < 0.02, "estimate = {}", e.estimate);
    }

    #[test]
    fn bracket_ratio_within_sqrt2() {
        use rand::{Rng, SeedableRng};
        let g = geometry();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let z = Complex64::from_polar(rng.gen_range(0.0..0.97), rng.gen_range(0.0..6.28));
            let w = Complex64::from_polar(rng.gen_range(0.0..0.97), rng.gen_range(0.0..6.28));
            if z == w {
                continue;
            }
            let e = g.geodesic_checked(z, w, 1.5).expect("ratio exceeded 1.5");
            assert!(e.lower <= e.estimate && e.estimate <= e.upper + 1e-12);
        }
    }

    #[test]
    fn metric_axioms_on_samples() {
        use rand::{Rng, SeedableRng};
        let g = geometry();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..60 {
            let pts: Vec<Complex64> = (0..3)
                .map(|_| {
                    Complex64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.28))
                })
                .collect();
            let dab = g.geodesic(pts[0], pts[1]).unwrap();
            let dba = g.geodesic(pts[1], pts[0]).unwrap();
            // symmetry within bracket width
            assert!(dab.lower <= dba.upper + 1e-9 && dba.lower <= dab.upper + 1e-9);
            let dbc = g.geodesic(pts[1], pts[2]).unwrap();
            let dac = g.geodesic(pts[0], pts[2]).unwrap();
            // triangle inequality with bracket slack
            assert!(dac.lower <= dab.upper + dbc.upper + 1e-9);
        }
    }

    #[test]
    fn lemma_2_1_short_distance_constant() {
        // d_tau * min(tau) / |z - w| bounded below over short-distance pairs
        use rand::{Rng, SeedableRng};
        let g = geometry();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut min_c = f64::INFINITY;
        let mut found = 0;
        while found < 100 {
            let r: f64 = rng.gen_range(0.3..0.9);
            let th: f64 = rng.gen_range(0.0..6.28);
            let z = Complex64::from_polar(r, th);
            let tau = g.weight().tau(r);
            let dx: f64 = rng.gen_range(-0.4..0.4);
            let dy: f64 = rng.gen_range(-0.4..0.4);
            let w = z + c(dx * tau, dy * tau);
            if w.norm() >= 0.95 || (z - w).norm() < 1e-6 {
                continue;
            }
            let e = g.geodesic(z, w).unwrap();
            if e.estimate >= g.big_r() {
                continue;
            }
            found += 1;
            let mt = g.weight().tau(z.norm()).min(g.weight().tau(w.norm()));
            min_c = min_c.min(e.lower * mt / (z - w).norm());
        }
        assert!(min_c > 0.3, "empirical Lemma 2.1 constant = {min_c}");
    }

    #[test]
    fn refinement_tightens_nonradial_upper() {
        let w = make_weight(WeightSpec::exp_inverse(1.0, 1.0)).unwrap();
        let coarse = Geometry::new(
            w,
            MetricParams {
                resolution: 8,
                ..MetricParams::default()
            },
        );
        let fine = Geometry::new(
            w,
            MetricParams {
                resolution: 16,
                ..MetricParams::default()
            },
        );
        let z = c(0.85, 0.0);
        let wp = c(0.0, 0.85);
        let a = coarse.geodesic(z, wp).unwrap();
        let b = fine.geodesic(z, wp).unwrap();
        assert!(b.upper <= a.upper + 1e-9, "coarse {} fine {}", a.upper, b.upper);
    }

    #[test]
    fn rho_values_and_monotonicity() {
        let g = geometry();
        let r = g.rho(c(0.0, 0.0), c(0.75, 0.0)).unwrap();
        let expected = 0.8646647167633873; // 1 - e^{-2}
        assert!((r.estimate - expected).abs() < 1e-3, "rho = {}", r.estimate);
        assert!(r.lower <= r.estimate && r.estimate <= r.upper);
        assert!(r.upper < 1.0);
        let zero = g.rho(c(0.3, -0.2), c(0.3, -0.2)).unwrap();
        assert_eq!(zero.estimate, 0.0);
    }

    #[test]
    fn rho_maps_values() {
        use crate::holomap::parse_map;
        let g = geometry();
        let id = parse_map("z").unwrap();
        let half = parse_map("z/2").unwrap();
        // rho_tau(0.75, 0.375) from the radial closed form:
        // d = F(0.75) - F(0.375) = 2((0.25)^{-1/2} - (0.625)^{-1/2})
        let d_exact = 2.0 * (0.25f64.powf(-0.5) - 0.625f64.powf(-0.5));
        let r = g.rho_maps(&id, &half, c(0.75, 0.0)).unwrap();
        assert!((r.estimate - (1.0 - (-d_exact).exp())).abs() < 1e-6, "rho = {}", r.estimate);
        let same = g.rho_maps(&id, &id.clone(), c(0.5, 0.5)).unwrap();
        assert_eq!(same.estimate, 0.0);
    }

    #[test]
    fn rho_maps_example_pair_decreasing() {
        use crate::holomap::parse_map;
        let g = geometry();
        let phi = parse_map("(1+z^2)/2").unwrap();
        let psi = parse_map("(1+z^2)/2 + 0.001953125*(1-z^2)^5").unwrap();
        let mut last = f64::INFINITY;
        for &r in &[0.9, 0.95, 0.99] {
            let rho = g.rho_maps(&phi, &psi, c(r, 0.0)).unwrap();
            assert!(rho.estimate > 0.0);
            assert!(rho.estimate < last, "not decreasing at r = {r}");
            last = rho.estimate;
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let g = geometry();
        assert!(matches!(
            g.geodesic(c(1.0, 0.0), c(0.0, 0.0)),
            Err(MetricError::OutsideDomain { .. })
        ));
    }
}
