//! The discrete penalized energy on the radial constraint manifold, its
//! gradient, Hessian, strong-form residuals and 2-D consistency checks.
//!
//! With `A = b(r)∇θ` and `|∇θ| = 1/r`, the energy (2π dropped) reads
//!
//! ```text
//! J = ½∫(u')² r dr + ½∫(b')²/r dr + ½∫(k-b)² u²/r dr + (ε/2)∫b²/r dr + ∫W(u) r dr
//! ```
//!
//! Derivative terms use cell midpoints; the remaining terms are lumped on
//! nodes, so that the gradient divided by the node weight is the standard
//! conservative three-point discretization of the strong equations.

use crate::error::{Result, VortexError};
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::numerics::{BandMatrix, CubicSpline, LocalLagrange};
use serde::Serialize;

/// Radial field samples `(u_i, b_i)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl State {
    pub fn zeros(len: usize) -> Self {
        Self {
            u: vec![0.0; len],
            b: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn dot(&self, other: &State) -> f64 {
        dot(&self.u, &other.u) + dot(&self.b, &other.b)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self + t * dir`.
    pub fn axpy(&self, t: f64, dir: &State) -> State {
        State {
            u: self.u.iter().zip(&dir.u).map(|(a, d)| a + t * d).collect(),
            b: self.b.iter().zip(&dir.b).map(|(a, d)| a + t * d).collect(),
        }
    }

    pub fn scaled(&self, t: f64) -> State {
        State {
            u: self.u.iter().map(|v| t * v).collect(),
            b: self.b.iter().map(|v| t * v).collect(),
        }
    }

    pub fn sup_diff(&self, other: &State) -> (f64, f64) {
        let du = self
            .u
            .iter()
            .zip(&other.u)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let db = self
            .b
            .iter()
            .zip(&other.b)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        (du, db)
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Clamps negative matter amplitudes to zero.
    pub fn project_nonnegative(&mut self) {
        self.u.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// Zeroes the constrained nodes: `b[0]`, `u[n]`, and `u[0]` for `k ≠ 0`.
    pub fn enforce_constraints(&mut self, params: &ModelParams) {
        let n = self.u.len() - 1;
        self.b[0] = 0.0;
        self.u[n] = 0.0;
        if params.k != 0 {
            self.u[0] = 0.0;
        }
    }

    pub fn check(&self, params: &ModelParams, grid: &RadialGrid) -> Result<()> {
        grid.check_len(&self.u)?;
        grid.check_len(&self.b)?;
        if self.b[0] != 0.0 {
            return Err(VortexError::Constraint("b(0) must vanish".into()));
        }
        if params.k != 0 && self.u[0] != 0.0 {
            return Err(VortexError::Constraint(
                "u(0) must vanish for k != 0".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which node values are free unknowns.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FreeMask {
    pub u0: bool,
    pub n: usize,
}

impl FreeMask {
    pub fn new(params: &ModelParams, grid: &RadialGrid) -> Self {
        Self {
            u0: params.k == 0,
            n: grid.n,
        }
    }

    #[inline]
    pub fn u_free(&self, i: usize) -> bool {
        i < self.n && (i > 0 || self.u0)
    }

    #[inline]
    pub fn b_free(&self, i: usize) -> bool {
        i > 0
    }

    pub fn zero_constrained(&self, s: &mut State) {
        s.b[0] = 0.0;
        s.u[self.n] = 0.0;
        if !self.u0 {
            s.u[0] = 0.0;
        }
    }
}

/// The five terms of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub dirichlet_u: f64,
    pub curl_b: f64,
    pub coupling: f64,
    pub penalty: f64,
    pub potential: f64,
    pub total: f64,
}

pub fn energy(s: &State, params: &ModelParams, grid: &RadialGrid) -> Result<EnergyBreakdown> {
    s.check(params, grid)?;
    let e = energy_unchecked(s, params, grid);
    let terms = [
        ("dirichlet_u", e.dirichlet_u),
        ("curl_b", e.curl_b),
        ("coupling", e.coupling),
        ("penalty", e.penalty),
        ("potential", e.potential),
    ];
    for (name, v) in terms {
        if !v.is_finite() {
            return Err(VortexError::Evaluation { term: name });
        }
    }
    Ok(e)
}

pub(crate) fn energy_unchecked(s: &State, params: &ModelParams, g: &RadialGrid) -> EnergyBreakdown {
    let k = params.kf();
    let (u, b) = (&s.u, &s.b);
    let mut dirichlet = 0.0;
    let mut curl = 0.0;
    for i in 0..g.n {
        let du = u[i + 1] - u[i];
        let db = b[i + 1] - b[i];
        dirichlet += g.r_mid[i] * du * du / g.h[i];
        curl += db * db / (g.h[i] * g.r_mid[i]);
    }
    let mut coupling = 0.0;
    let mut penalty = 0.0;
    let mut potential = 0.0;
    for i in 0..=g.n {
        let nu = g.w_drr_node[i];
        let kb = k - b[i];
        coupling += nu * kb * kb * u[i] * u[i];
        penalty += nu * b[i] * b[i];
        potential += g.w_rdr[i] * params.w(u[i]);
    }
    let dirichlet_u = 0.5 * dirichlet;
    let curl_b = 0.5 * curl;
    let coupling = 0.5 * coupling;
    let penalty = 0.5 * params.eps * penalty;
    EnergyBreakdown {
        dirichlet_u,
        curl_b,
        coupling,
        penalty,
        potential,
        total: dirichlet_u + curl_b + coupling + penalty + potential,
    }
}

#[inline]
#[cfg(test)]
pub(crate) fn total_energy(s: &State, params: &ModelParams, g: &RadialGrid) -> f64 {
    energy_unchecked(s, params, g).total
}

/// Partial derivatives of the discrete energy with respect to every free
/// node value; constrained slots are zero.
pub fn gradient(s: &State, params: &ModelParams, grid: &RadialGrid) -> Result<State> {
    s.check(params, grid)?;
    let g = gradient_unchecked(s, params, grid);
    if g.u.iter().any(|v| !v.is_finite()) {
        return Err(VortexError::Evaluation {
            term: "gradient (u block)",
        });
    }
    if g.b.iter().any(|v| !v.is_finite()) {
        return Err(VortexError::Evaluation {
            term: "gradient (b block)",
        });
    }
    Ok(g)
}

pub(crate) fn gradient_unchecked(s: &State, params: &ModelParams, g: &RadialGrid) -> State {
    let k = params.kf();
    let n = g.n;
    let (u, b) = (&s.u, &s.b);
    let mut gu = vec![0.0; n + 1];
    let mut gb = vec![0.0; n + 1];
    for i in 0..n {
        let fu = g.r_mid[i] * (u[i + 1] - u[i]) / g.h[i];
        gu[i] -= fu;
        gu[i + 1] += fu;
        let fb = (b[i + 1] - b[i]) / (g.h[i] * g.r_mid[i]);
        gb[i] -= fb;
        gb[i + 1] += fb;
    }
    for i in 0..=n {
        let nu = g.w_drr_node[i];
        let kb = k - b[i];
        gu[i] += nu * kb * kb * u[i] + g.w_rdr[i] * params.w_prime(u[i]);
        gb[i] += nu * (params.eps * b[i] - kb * u[i] * u[i]);
    }
    let mut out = State { u: gu, b: gb };
    FreeMask::new(params, g).zero_constrained(&mut out);
    out
}

/// Interleaved unknown index: `2i` for `u_i`, `2i + 1` for `b_i`.
#[inline]
pub(crate) fn iu(i: usize) -> usize {
    2 * i
}
#[inline]
pub(crate) fn ib(i: usize) -> usize {
    2 * i + 1
}

/// Band Hessian of the discrete energy in interleaved ordering, with
/// identity rows/columns for constrained nodes.
pub(crate) fn hessian_band(s: &State, params: &ModelParams, g: &RadialGrid) -> BandMatrix {
    let k = params.kf();
    let n = g.n;
    let (u, b) = (&s.u, &s.b);
    let mut h = BandMatrix::zeros(2 * (n + 1), 2, 2);
    for i in 0..n {
        let cu = g.r_mid[i] / g.h[i];
        h.add(iu(i), iu(i), cu);
        h.add(iu(i + 1), iu(i + 1), cu);
        h.add(iu(i), iu(i + 1), -cu);
        h.add(iu(i + 1), iu(i), -cu);
        let cb = 1.0 / (g.h[i] * g.r_mid[i]);
        h.add(ib(i), ib(i), cb);
        h.add(ib(i + 1), ib(i + 1), cb);
        h.add(ib(i), ib(i + 1), -cb);
        h.add(ib(i + 1), ib(i), -cb);
    }
    for i in 0..=n {
        let nu = g.w_drr_node[i];
        let kb = k - b[i];
        h.add(
            iu(i),
            iu(i),
            nu * kb * kb + g.w_rdr[i] * params.w_second(u[i]),
        );
        h.add(ib(i), ib(i), nu * (params.eps + u[i] * u[i]));
        let cross = -2.0 * nu * kb * u[i];
        h.add(iu(i), ib(i), cross);
        h.add(ib(i), iu(i), cross);
    }
    let mask = FreeMask::new(params, g);
    for i in 0..=n {
        if !mask.u_free(i) {
            h.clear_column(iu(i));
            h.pin_row(iu(i));
        }
        if !mask.b_free(i) {
            h.clear_column(ib(i));
            h.pin_row(ib(i));
        }
    }
    h
}

pub(crate) fn interleave(s: &State) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * s.len());
    for (a, b) in s.u.iter().zip(&s.b) {
        v.push(*a);
        v.push(*b);
    }
    v
}

pub(crate) fn deinterleave(v: &[f64]) -> State {
    State {
        u: v.iter().step_by(2).cloned().collect(),
        b: v.iter().skip(1).step_by(2).cloned().collect(),
    }
}

/// Hessian-vector product: the derivative of [`gradient`] at `s` along `dir`.
/// Constrained slots of `dir` are ignored and of the result are zero.
pub fn hessian_vec(
    s: &State,
    dir: &State,
    params: &ModelParams,
    grid: &RadialGrid,
) -> Result<State> {
    s.check(params, grid)?;
    grid.check_len(&dir.u)?;
    grid.check_len(&dir.b)?;
    let mask = FreeMask::new(params, grid);
    let mut d = dir.clone();
    mask.zero_constrained(&mut d);
    let h = hessian_band(s, params, grid);
    let mut out = deinterleave(&h.matvec(&interleave(&d)));
    mask.zero_constrained(&mut out);
    if out.u.iter().chain(&out.b).any(|v| !v.is_finite()) {
        return Err(VortexError::Evaluation { term: "hessian" });
    }
    Ok(out)
}

/// Pointwise strong-form residuals at interior nodes `1..n`.
#[derive(Debug, Clone)]
pub struct StrongResidual {
    /// `-u'' - u'/r + (k-b)² u / r² + W'(u)` at nodes `1..n-1` (zero elsewhere).
    pub u: Vec<f64>,
    /// `-b'' + b'/r + εb - (k-b) u²` at nodes `1..n-1` (zero elsewhere).
    pub b: Vec<f64>,
}

impl StrongResidual {
    pub fn sup(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.b)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `sqrt(∫ (ru² + rb²) r dr)` with the trapezoidal node weights.
    pub fn weighted_l2(&self, grid: &RadialGrid) -> f64 {
        self.u
            .iter()
            .zip(&self.b)
            .zip(&grid.w_rdr)
            .map(|((a, b), w)| (a * a + b * b) * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Strong residuals by conservative second-order central differences on
/// the graded mesh:
/// `(1/r) d/dr (r du/dr) ≈ [r_{i+½}(u_{i+1}-u_i)/h_i - r_{i-½}(u_i-u_{i-1})/h_{i-1}] / (r_i h̄_i)`
/// and `r d/dr (b'/r)` likewise, with `h̄_i = (h_{i-1}+h_i)/2`.
pub fn el_residual(s: &State, params: &ModelParams, grid: &RadialGrid) -> Result<StrongResidual> {
    s.check(params, grid)?;
    let g = grid;
    let k = params.kf();
    let (u, b) = (&s.u, &s.b);
    let mut ru = vec![0.0; g.n + 1];
    let mut rb = vec![0.0; g.n + 1];
    for i in 1..g.n {
        let hbar = 0.5 * (g.h[i - 1] + g.h[i]);
        let r = g.r[i];
        let flux_r = g.r_mid[i] * (u[i + 1] - u[i]) / g.h[i];
        let flux_l = g.r_mid[i - 1] * (u[i] - u[i - 1]) / g.h[i - 1];
        let lap_u = (flux_r - flux_l) / (r * hbar);
        let kb = k - b[i];
        ru[i] = -lap_u + kb * kb * u[i] / (r * r) + params.w_prime(u[i]);

        let bf_r = (b[i + 1] - b[i]) / (g.h[i] * g.r_mid[i]);
        let bf_l = (b[i] - b[i - 1]) / (g.h[i - 1] * g.r_mid[i - 1]);
        let curl_term = r * (bf_r - bf_l) / hbar;
        rb[i] = -curl_term + params.eps * b[i] - kb * u[i] * u[i];
    }
    if ru.iter().any(|v| !v.is_finite()) {
        return Err(VortexError::Evaluation {
            term: "strong residual (u)",
        });
    }
    if rb.iter().any(|v| !v.is_finite()) {
        return Err(VortexError::Evaluation {
            term: "strong residual (b)",
        });
    }
    Ok(StrongResidual { u: ru, b: rb })
}

/// Radial profiles interpolated for evaluation off the grid.
#[derive(Debug, Clone)]
pub struct RadialInterpolant {
    u: LocalLagrange,
    b: LocalLagrange,
    rmax: f64,
}

impl RadialInterpolant {
    pub fn new(s: &State, grid: &RadialGrid) -> Result<Self> {
        grid.check_len(&s.u)?;
        grid.check_len(&s.b)?;
        Ok(Self {
            u: LocalLagrange::new(&grid.r, &s.u),
            b: LocalLagrange::new(&grid.r, &s.b),
            rmax: grid.rmax,
        })
    }

    pub fn u(&self, r: f64) -> f64 {
        self.u.eval(r)
    }

    pub fn b(&self, r: f64) -> f64 {
        self.b.eval(r)
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }
}

fn check_point(x: [f64; 2], rmax: f64, margin: f64) -> Result<f64> {
    let r = x[0].hypot(x[1]);
    if !r.is_finite() || r == 0.0 {
        return Err(VortexError::Range(format!(
            "point {x:?} sits at the origin"
        )));
    }
    if r + margin > rmax {
        return Err(VortexError::Range(format!(
            "point {x:?} has r = {r} beyond Rmax = {rmax}"
        )));
    }
    Ok(r)
}

/// `k∇θ - A` at a Cartesian point with `A = b(r)∇θ`.
fn gauge_defect(x: [f64; 2], k: f64, interp: &RadialInterpolant) -> [f64; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let c = (k - interp.b(r2.sqrt())) / r2;
    [c * x[1], -c * x[0]]
}

/// Maximum of `|-Δu + |k∇θ - A|² u + W'(u)|` over Cartesian sample points,
/// with `u(x) = u(|x|)` and `A = b(|x|)∇θ` reconstructed from the radial
/// profiles and `Δ` taken by the five-point stencil of width `2·step`.
pub fn residual_2d_spotcheck(
    s: &State,
    params: &ModelParams,
    grid: &RadialGrid,
    points: &[[f64; 2]],
) -> Result<f64> {
    let interp = RadialInterpolant::new(s, grid)?;
    let step = 1e-3;
    let k = params.kf();
    let ux = |x: f64, y: f64| interp.u(x.hypot(y));
    let mut worst = 0.0f64;
    for &x in points {
        check_point(x, grid.rmax, step)?;
        let [x0, y0] = x;
        let c = ux(x0, y0);
        let lap = (ux(x0 + step, y0) + ux(x0 - step, y0) + ux(x0, y0 + step) + ux(x0, y0 - step)
            - 4.0 * c)
            / (step * step);
        let d = gauge_defect(x, k, &interp);
        let res = -lap + (d[0] * d[0] + d[1] * d[1]) * c + params.w_prime(c);
        if !res.is_finite() {
            return Err(VortexError::Evaluation {
                term: "2-D residual",
            });
        }
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

/// `Σ |∇×(b∇θ)|² Δx Δy` over an `m × m` lattice of cell centres covering
/// `[-half_width, half_width]²`, with the curl taken by central differences
/// on the lattice itself. Compare with `2π · 2 · curl_b`.
pub fn curl_energy_cartesian(
    b: &[f64],
    grid: &RadialGrid,
    half_width: f64,
    m: usize,
) -> Result<f64> {
    grid.check_len(b)?;
    if half_width * std::f64::consts::SQRT_2 > grid.rmax {
        return Err(VortexError::Range(format!(
            "patch half width {half_width} exceeds the grid"
        )));
    }
    if m < 4 {
        return Err(VortexError::Config(
            "patch needs at least 4 cells per side".into(),
        ));
    }
    let spline = CubicSpline::natural(&grid.r, b);
    let dx = 2.0 * half_width / m as f64;
    let coord = |i: usize| -half_width + (i as f64 + 0.5) * dx;
    // A = b(r)/r² (x2, -x1) sampled on the lattice
    let mut ax = vec![0.0; m * m];
    let mut ay = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            let (x, y) = (coord(i), coord(j));
            let r2 = x * x + y * y;
            let f = spline.eval(r2.sqrt()) / r2;
            ax[j * m + i] = f * y;
            ay[j * m + i] = -f * x;
        }
    }
    let idx = |i: usize, j: usize| j * m + i;
    let mut total = 0.0;
    for j in 0..m {
        for i in 0..m {
            let day_dx = match i {
                0 => (ay[idx(1, j)] - ay[idx(0, j)]) / dx,
                _ if i == m - 1 => (ay[idx(i, j)] - ay[idx(i - 1, j)]) / dx,
                _ => (ay[idx(i + 1, j)] - ay[idx(i - 1, j)]) / (2.0 * dx),
            };
            let dax_dy = match j {
                0 => (ax[idx(i, 1)] - ax[idx(i, 0)]) / dx,
                _ if j == m - 1 => (ax[idx(i, j)] - ax[idx(i, j - 1)]) / dx,
                _ => (ax[idx(i, j + 1)] - ax[idx(i, j - 1)]) / (2.0 * dx),
            };
            let curl = day_dx - dax_dy;
            total += curl * curl * dx * dx;
        }
    }
    Ok(total)
}
