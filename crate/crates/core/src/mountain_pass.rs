//! Mountain-pass search: endpoint construction along a ray, the straight
//! initial path, and a climbing-node path deformation that converges to a
//! saddle point of the discrete energy.
//!
//! Interior path nodes descend along the preconditioned gradient with its
//! tangential part removed, which keeps the path near a minimum-energy
//! route. The highest node additionally maximizes along the path tangent,
//! so it converges to the pass itself rather than to a point on the path.
//! Steps are measured in the metric of the Hessian at the origin, which
//! makes the step size independent of the grid resolution.

use crate::error::{Result, VortexError};
use crate::functional::{energy_unchecked, gradient_unchecked, FreeMask, State};
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::numerics::solve_tridiagonal;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpaConfig {
    /// Number of path nodes including both endpoints.
    pub path_len: usize,
    pub max_iter: usize,
    /// Euclidean norm of the discrete gradient at the highest node.
    pub grad_tol: f64,
    /// Step shrink factor on Armijo failure.
    pub backtrack: f64,
    /// First trial step, in the preconditioned metric.
    pub initial_step: f64,
    /// Path re-spacing period in iterations.
    pub respace_every: usize,
}

impl Default for MpaConfig {
    fn default() -> Self {
        Self {
            path_len: 31,
            max_iter: 20_000,
            grad_tol: 1e-6,
            backtrack: 0.5,
            initial_step: 1.0,
            respace_every: 10,
        }
    }
}

impl MpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_len < 5 {
            return Err(VortexError::Config(format!(
                "path needs at least 5 nodes, got {}",
                self.path_len
            )));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(VortexError::Config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(VortexError::Config(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(VortexError::Config("initial step must be positive".into()));
        }
        if self.max_iter == 0 || self.respace_every == 0 {
            return Err(VortexError::Config(
                "iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete path from the zero state to the endpoint.
#[derive(Debug, Clone)]
pub struct Path {
    pub nodes: Vec<State>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn energies(&self, params: &ModelParams, grid: &RadialGrid) -> Vec<f64> {
        self.nodes
            .par_iter()
            .map(|s| energy_unchecked(s, params, grid).total)
            .collect()
    }
}

/// Default ray direction: `r^{|k|} exp(-r²/4)`, zero at constrained nodes.
pub fn default_seed(params: &ModelParams, grid: &RadialGrid) -> Vec<f64> {
    let m = params.k.unsigned_abs() as i32;
    let mut u: Vec<f64> = grid
        .r
        .iter()
        .map(|r| r.powi(m) * (-r * r / 4.0).exp())
        .collect();
    u[grid.n] = 0.0;
    u
}

/// Scales `seed` by successive doubling until `J₀(t·seed, 0) ≤ -1`.
pub fn find_endpoint(params: &ModelParams, grid: &RadialGrid, seed: &[f64]) -> Result<State> {
    grid.check_len(seed)?;
    if seed.iter().any(|v| !v.is_finite()) {
        return Err(VortexError::Domain(
            "seed profile has non-finite entries".into(),
        ));
    }
    let mut base = State {
        u: seed.to_vec(),
        b: vec![0.0; grid.len()],
    };
    base.enforce_constraints(params);
    if base.u.iter().all(|v| *v == 0.0) {
        return Err(VortexError::Geometry(
            "seed profile vanishes on the free nodes".into(),
        ));
    }
    let p0 = params.with_eps(0.0)?;
    let mut t = 1.0f64;
    while t <= 2f64.powi(60) {
        let s = base.scaled(t);
        let e = energy_unchecked(&s, &p0, grid).total;
        if e <= -1.0 {
            return Ok(s);
        }
        t *= 2.0;
    }
    Err(VortexError::Geometry(
        "energy along the seed ray never drops below -1".into(),
    ))
}

/// Straight path `(j/(P-1)) · endpoint`.
pub fn initial_path(endpoint: &State, path_len: usize) -> Result<Path> {
    if path_len < 5 {
        return Err(VortexError::Config(format!(
            "path needs at least 5 nodes, got {path_len}"
        )));
    }
    let last = (path_len - 1) as f64;
    Ok(Path {
        nodes: (0..path_len)
            .map(|j| endpoint.scaled(j as f64 / last))
            .collect(),
    })
}

/// `K = max_{t ∈ [0,1]} J₀(t·endpoint, 0)`.
pub fn ray_max(endpoint: &State, params: &ModelParams, grid: &RadialGrid) -> Result<f64> {
    let p0 = params.with_eps(0.0)?;
    let f = |t: f64| energy_unchecked(&endpoint.scaled(t), &p0, grid).total;
    let samples = 400;
    let (mut best_t, mut best) = (0.0, f(0.0));
    for i in 1..=samples {
        let t = i as f64 / samples as f64;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement around the best sample
    let h = 1.0 / samples as f64;
    let (mut lo, mut hi) = ((best_t - h).max(0.0), (best_t + h).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(best.max(f1).max(f2))
}

/// Block-diagonal tridiagonal metric: the `u` block is the Hessian of the
/// energy at the origin, the `b` block its curl-plus-penalty part. Rows of
/// constrained nodes are identity.
#[derive(Debug, Clone)]
pub(crate) struct Metric {
    u: [Vec<f64>; 3],
    b: [Vec<f64>; 3],
}

impl Metric {
    pub fn new(params: &ModelParams, g: &RadialGrid) -> Self {
        let n = g.n;
        let k2 = params.kf() * params.kf();
        let mut ul = vec![0.0; n + 1];
        let mut ud = vec![0.0; n + 1];
        let mut uu = vec![0.0; n + 1];
        let mut bl = vec![0.0; n + 1];
        let mut bd = vec![0.0; n + 1];
        let mut bu = vec![0.0; n + 1];
        for i in 0..n {
            let cu = g.r_mid[i] / g.h[i];
            ud[i] += cu;
            ud[i + 1] += cu;
            uu[i] = -cu;
            ul[i + 1] = -cu;
            let cb = 1.0 / (g.h[i] * g.r_mid[i]);
            bd[i] += cb;
            bd[i + 1] += cb;
            bu[i] = -cb;
            bl[i + 1] = -cb;
        }
        for i in 0..=n {
            ud[i] += g.w_drr_node[i] * k2 + g.w_rdr[i];
            bd[i] += g.w_drr_node[i] * params.eps;
        }
        let mask = FreeMask::new(params, g);
        let pin = |l: &mut Vec<f64>, d: &mut Vec<f64>, u: &mut Vec<f64>, i: usize| {
            d[i] = 1.0;
            l[i] = 0.0;
            u[i] = 0.0;
            if i > 0 {
                u[i - 1] = 0.0;
            }
            if i < n {
                l[i + 1] = 0.0;
            }
        };
        for i in 0..=n {
            if !mask.u_free(i) {
                pin(&mut ul, &mut ud, &mut uu, i);
            }
            if !mask.b_free(i) {
                pin(&mut bl, &mut bd, &mut bu, i);
            }
        }
        Self {
            u: [ul, ud, uu],
            b: [bl, bd, bu],
        }
    }

    pub fn solve(&self, g: &State) -> State {
        let mut u = g.u.clone();
        let mut b = g.b.clone();
        solve_tridiagonal(&self.u[0], &self.u[1], &self.u[2], &mut u);
        solve_tridiagonal(&self.b[0], &self.b[1], &self.b[2], &mut b);
        State { u, b }
    }

    fn apply_block(m: &[Vec<f64>; 3], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = m[1][i] * x[i];
                if i > 0 {
                    v += m[0][i] * x[i - 1];
                }
                if i + 1 < n {
                    v += m[2][i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    pub fn apply(&self, x: &State) -> State {
        State {
            u: Self::apply_block(&self.u, &x.u),
            b: Self::apply_block(&self.b, &x.b),
        }
    }

    pub fn inner(&self, x: &State, y: &State) -> f64 {
        self.apply(x).dot(y)
    }
}

/// Result of the path deformation.
#[derive(Debug, Clone)]
pub struct MpaOutcome {
    pub path: Path,
    /// The highest node at termination.
    pub candidate: State,
    /// Its energy, the estimate of the mountain-pass level.
    pub level: f64,
    /// Euclidean norm of the discrete gradient at the candidate.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Highest path energy after each iteration.
    pub level_history: Vec<f64>,
}

fn highest_interior(energies: &[f64]) -> usize {
    let p = energies.len();
    (1..p - 1)
        .max_by(|&i, &j| energies[i].total_cmp(&energies[j]))
        .unwrap()
}

fn project(s: &mut State, mask: &FreeMask) {
    s.project_nonnegative();
    mask.zero_constrained(s);
}

/// Armijo step along a descent direction `d` with slope `slope = g·d < 0`.
/// Returns the new state, its energy and the accepted step.
#[allow(clippy::too_many_arguments)]
fn armijo(
    x: &State,
    e0: f64,
    d: &State,
    slope: f64,
    mut alpha: f64,
    shrink: f64,
    params: &ModelParams,
    grid: &RadialGrid,
    mask: &FreeMask,
) -> Option<(State, f64, f64)> {
    if slope >= 0.0 {
        return None;
    }
    for _ in 0..60 {
        let mut y = x.axpy(alpha, d);
        project(&mut y, mask);
        let e = energy_unchecked(&y, params, grid).total;
        if e.is_finite() && e <= e0 + 1e-4 * alpha * slope {
            return Some((y, e, alpha));
        }
        alpha *= shrink;
    }
    None
}

/// Re-spaces interior nodes uniformly in metric arclength on each side of
/// the pinned node `fixed`, by piecewise-linear interpolation.
fn respace(path: &mut Path, fixed: usize, metric: &Metric) {
    let p = path.len();
    let seg: Vec<f64> = (0..p - 1)
        .map(|j| {
            let d = path.nodes[j + 1].axpy(-1.0, &path.nodes[j]);
            metric.inner(&d, &d).sqrt()
        })
        .collect();
    let mut s = vec![0.0; p];
    for j in 0..p - 1 {
        s[j + 1] = s[j] + seg[j];
    }
    let old = path.nodes.clone();
    let place = |target: f64| -> State {
        let j = s.partition_point(|v| *v <= target).clamp(1, p - 1) - 1;
        let len = s[j + 1] - s[j];
        let t = if len > 0.0 {
            (target - s[j]) / len
        } else {
            0.0
        };
        old[j].axpy(t, &old[j + 1].axpy(-1.0, &old[j]))
    };
    for j in 1..fixed {
        path.nodes[j] = place(s[fixed] * j as f64 / fixed as f64);
    }
    for j in fixed + 1..p - 1 {
        let frac = (j - fixed) as f64 / (p - 1 - fixed) as f64;
        path.nodes[j] = place(s[fixed] + frac * (s[p - 1] - s[fixed]));
    }
}

/// Deforms the path until the gradient at its highest node falls below
/// `cfg.grad_tol`. Both endpoints stay fixed.
pub fn mpa_iterate(
    path: Path,
    params: &ModelParams,
    grid: &RadialGrid,
    cfg: &MpaConfig,
) -> Result<MpaOutcome> {
    cfg.validate()?;
    if path.len() != cfg.path_len {
        return Err(VortexError::Config(format!(
            "path has {} nodes, configuration expects {}",
            path.len(),
            cfg.path_len
        )));
    }
    for s in &path.nodes {
        s.check(params, grid)?;
    }
    let mask = FreeMask::new(params, grid);
    let metric = Metric::new(params, grid);
    let mut path = path;
    let p = path.len();
    let mut energies = path.energies(params, grid);
    if energies[p - 1] > 0.0 {
        return Err(VortexError::Geometry(format!(
            "path endpoint has positive energy {}",
            energies[p - 1]
        )));
    }
    let mut steps = vec![cfg.initial_step; p];
    let mut history = Vec::new();

    for iter in 1..=cfg.max_iter {
        let top = highest_interior(&energies);
        let grads: Vec<State> = path
            .nodes
            .par_iter()
            .map(|s| gradient_unchecked(s, params, grid))
            .collect();
        let grad_norm = grads[top].norm();
        if grad_norm <= cfg.grad_tol {
            history.push(energies[top]);
            return Ok(MpaOutcome {
                candidate: path.nodes[top].clone(),
                level: energies[top],
                grad_norm,
                iterations: iter - 1,
                level_history: history,
                path,
            });
        }

        // metric-normalized central tangents
        let tangents: Vec<Option<State>> = (0..p)
            .map(|j| {
                if j == 0 || j == p - 1 {
                    return None;
                }
                let t = path.nodes[j + 1].axpy(-1.0, &path.nodes[j - 1]);
                let len = metric.inner(&t, &t).sqrt();
                (len > 0.0).then(|| t.scaled(1.0 / len))
            })
            .collect();

        let updates: Vec<(State, f64, f64)> = (1..p - 1)
            .into_par_iter()
            .map(|j| {
                let mut x = path.nodes[j].clone();
                let mut e = energies[j];
                if e < 0.0 {
                    // past the pass the energy is unbounded below; such
                    // nodes only carry the path to the endpoint
                    return (x, e, steps[j]);
                }
                let mut g = grads[j].clone();
                let mut alpha = steps[j];
                if j == top {
                    if let Some(tau) = &tangents[j] {
                        // maximize along the tangent by a secant step
                        let d1 = g.dot(tau);
                        let h = 1e-3 * alpha.min(1.0);
                        let gp = gradient_unchecked(&x.axpy(h, tau), params, grid);
                        let d2 = (gp.dot(tau) - d1) / h;
                        let s = if d2 < 0.0 {
                            -d1 / d2
                        } else {
                            alpha * d1.signum()
                        };
                        let s = s.clamp(-alpha, alpha);
                        let mut y = x.axpy(s, tau);
                        project(&mut y, &mask);
                        let ey = energy_unchecked(&y, params, grid).total;
                        if ey >= e {
                            x = y;
                            e = ey;
                            g = gradient_unchecked(&x, params, grid);
                        }
                    }
                }
                let mut d = metric.solve(&g).scaled(-1.0);
                if let Some(tau) = &tangents[j] {
                    // remove the metric-tangential part: -M⁻¹g + (g·τ)τ
                    let c = g.dot(tau);
                    d = d.axpy(c, tau);
                }
                mask.zero_constrained(&mut d);
                let slope = g.dot(&d);
                match armijo(&x, e, &d, slope, alpha, cfg.backtrack, params, grid, &mask) {
                    Some((y, ey, a)) => {
                        alpha = if a == alpha { (1.5 * a).min(1e3) } else { a };
                        (y, ey, alpha)
                    }
                    None => (x, e, (alpha * cfg.backtrack).max(1e-12)),
                }
            })
            .collect();
        for (j, (x, e, a)) in updates.into_iter().enumerate() {
            path.nodes[j + 1] = x;
            energies[j + 1] = e;
            steps[j + 1] = a;
        }
        if iter % cfg.respace_every == 0 {
            let top = highest_interior(&energies);
            respace(&mut path, top, &metric);
            energies = path.energies(params, grid);
        }
        history.push(energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    let top = highest_interior(&energies);
    let candidate = path.nodes[top].clone();
    let final_norm = gradient_unchecked(&candidate, params, grid).norm();
    if final_norm > 10.0 * cfg.grad_tol {
        return Err(VortexError::NonConvergence {
            iterations: cfg.max_iter,
            grad_norm: final_norm,
            best: Box::new(candidate),
        });
    }
    Ok(MpaOutcome {
        candidate,
        level: energies[top],
        grad_norm: final_norm,
        iterations: cfg.max_iter,
        level_history: history,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, RadialGrid) {
        (
            ModelParams::new(1, 4.0, 1.0, 0.1).unwrap(),
            RadialGrid::graded(20.0, 200, 2.0).unwrap(),
        )
    }

    #[test]
    fn endpoint_and_initial_path() {
        let (m, g) = setup();
        let seed: Vec<f64> = g.r.iter().map(|r| (-r * r).exp()).collect();
        let end = find_endpoint(&m, &g, &seed).unwrap();
        assert!(end.b.iter().all(|v| *v == 0.0));
        let p0 = m.with_eps(0.0).unwrap();
        let e1 = energy_unchecked(&end, &p0, &g).total;
        assert!(e1 <= -1.0);
        assert!(energy_unchecked(&end.scaled(2.0), &p0, &g).total < e1);

        let path = initial_path(&end, 31).unwrap();
        let e = path.energies(&m, &g);
        assert_eq!(e[0], 0.0);
        assert!(e[30] <= 0.0);
        assert!(e.iter().cloned().fold(f64::MIN, f64::max) > 0.0);
        assert!(initial_path(&end, 4).is_err());
    }

    #[test]
    fn zero_seed_is_a_geometry_failure() {
        let (m, g) = setup();
        let seed = vec![0.0; g.len()];
        assert!(matches!(
            find_endpoint(&m, &g, &seed),
            Err(VortexError::Geometry(_))
        ));
    }

    #[test]
    fn metric_solve_inverts_apply() {
        let (m, g) = setup();
        let metric = Metric::new(&m, &g);
        let mut x = State {
            u: g.r.iter().map(|r| r.sin()).collect(),
            b: g.r.iter().map(|r| r.cos()).collect(),
        };
        FreeMask::new(&m, &g).zero_constrained(&mut x);
        let y = metric.solve(&metric.apply(&x));
        let (du, db) = y.sup_diff(&x);
        assert!(du < 1e-10 && db < 1e-10);
    }

    #[test]
    fn converges_on_a_coarse_grid() {
        let (m, g) = setup();
        let end = find_endpoint(&m, &g, &default_seed(&m, &g)).unwrap();
        let k = ray_max(&end, &m, &g).unwrap();
        let cfg = MpaConfig::default();
        let out = mpa_iterate(initial_path(&end, cfg.path_len).unwrap(), &m, &g, &cfg).unwrap();
        assert!(out.grad_norm <= cfg.grad_tol);
        assert!(out.level > 0.0 && out.level <= k + cfg.grad_tol);
        assert!(out.candidate.min_u() >= 0.0);
        assert_eq!(out.path.nodes[0], State::zeros(g.len()));
        assert_eq!(out.path.nodes[30], end);
    }
}
