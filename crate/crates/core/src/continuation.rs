//! Newton refinement of critical points and the vanishing-penalty
//! continuation `ε → 0`.

use std::time::Instant;

use crate::error::{Result, VortexError};
use crate::functional::{
    deinterleave, el_residual, energy, gradient, hessian_band, interleave, EnergyBreakdown,
    FreeMask, State,
};
use crate::grid::{norm_h1, norm_h1r, norm_star, RadialGrid};
use crate::model::ModelParams;
use crate::mountain_pass::{
    default_seed, find_endpoint, initial_path, mpa_iterate, ray_max, MpaConfig, MpaOutcome,
};

/// Strictly decreasing penalty values.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsSchedule {
    pub eps_values: Vec<f64>,
}

impl EpsSchedule {
    pub fn new(eps_values: Vec<f64>) -> Result<Self> {
        if eps_values.is_empty() {
            return Err(VortexError::Config("empty eps schedule".into()));
        }
        if eps_values
            .iter()
            .any(|e| !(e.is_finite() && *e > 0.0 && *e < 1.0))
        {
            return Err(VortexError::Config("eps values must lie in (0, 1)".into()));
        }
        if eps_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(VortexError::Config(
                "eps schedule must be strictly decreasing".into(),
            ));
        }
        Ok(Self { eps_values })
    }

    /// `start, start·factor, ...` while above `end`, then `end` itself.
    pub fn geometric(start: f64, end: f64, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(VortexError::Config(format!(
                "eps factor must lie in (0, 1), got {factor}"
            )));
        }
        if !(end > 0.0 && end <= start) {
            return Err(VortexError::Config(format!(
                "eps range must satisfy 0 < end <= start, got {start} .. {end}"
            )));
        }
        let mut v = Vec::new();
        let mut e = start;
        while e > end * (1.0 + 1e-9) {
            v.push(e);
            e *= factor;
        }
        v.push(end);
        Self::new(v)
    }
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self::geometric(1e-1, 1e-6, 0.25).expect("default schedule is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Euclidean norm of the discrete gradient.
    pub grad_tol: f64,
    /// Sup norm of the strong residual.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            residual_tol: 1e-6,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: State,
    pub iterations: usize,
    pub grad_norm: f64,
    pub residual_sup: f64,
}

/// Damped Newton on the discrete gradient with a banded Jacobian. The
/// merit function is the Euclidean gradient norm; `u` is re-projected onto
/// `u ≥ 0` after every step.
pub fn newton_refine(
    seed: &State,
    params: &ModelParams,
    grid: &RadialGrid,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    if !(cfg.grad_tol > 0.0 && cfg.residual_tol > 0.0) {
        return Err(VortexError::Config(
            "Newton tolerances must be positive".into(),
        ));
    }
    seed.check(params, grid)?;
    let mask = FreeMask::new(params, grid);
    let mut x = seed.clone();
    let mut g = gradient(&x, params, grid)?;
    let mut gn = g.norm();
    for iter in 0..=cfg.max_iter {
        let res = el_residual(&x, params, grid)?.sup();
        if gn <= cfg.grad_tol && res <= cfg.residual_tol {
            return Ok(NewtonOutcome {
                state: x,
                iterations: iter,
                grad_norm: gn,
                residual_sup: res,
            });
        }
        if iter == cfg.max_iter {
            break;
        }
        let mut h = hessian_band(&x, params, grid);
        let scale = h.equilibrate_rows();
        let mut rhs: Vec<f64> = interleave(&g)
            .iter()
            .zip(&scale)
            .map(|(v, s)| -v * s)
            .collect();
        h.solve(&mut rhs)?;
        let mut d = deinterleave(&rhs);
        mask.zero_constrained(&mut d);

        let mut alpha = 1.0;
        loop {
            let mut y = x.axpy(alpha, &d);
            y.project_nonnegative();
            mask.zero_constrained(&mut y);
            if let Ok(gy) = gradient(&y, params, grid) {
                let gyn = gy.norm();
                if gyn <= (1.0 - 1e-4 * alpha) * gn {
                    x = y;
                    g = gy;
                    gn = gyn;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(VortexError::Stagnation {
                    iterations: iter,
                    grad_norm: gn,
                    best: Box::new(x),
                });
            }
        }
    }
    Err(VortexError::NonConvergence {
        iterations: cfg.max_iter,
        grad_norm: gn,
        best: Box::new(x),
    })
}

/// Mountain-pass search followed by Newton refinement at a single `ε`.
#[derive(Debug, Clone)]
pub struct SingleSolve {
    pub endpoint: State,
    /// `max_t J₀(t·endpoint, 0)`.
    pub k_bound: f64,
    pub mpa: MpaOutcome,
    pub newton: NewtonOutcome,
    pub mpa_seconds: f64,
    pub newton_seconds: f64,
}

pub fn solve_single(
    params: &ModelParams,
    grid: &RadialGrid,
    seed: Option<&[f64]>,
    mpa_cfg: &MpaConfig,
    newton_cfg: &NewtonConfig,
) -> Result<SingleSolve> {
    let default;
    let seed = match seed {
        Some(s) => s,
        None => {
            default = default_seed(params, grid);
            &default
        }
    };
    let endpoint = find_endpoint(params, grid, seed)?;
    let k_bound = ray_max(&endpoint, params, grid)?;
    let t0 = Instant::now();
    let path = initial_path(&endpoint, mpa_cfg.path_len)?;
    let mpa = mpa_iterate(path, params, grid, mpa_cfg)?;
    let mpa_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let newton = newton_refine(&mpa.candidate, params, grid, newton_cfg)?;
    Ok(SingleSolve {
        endpoint,
        k_bound,
        mpa,
        newton,
        mpa_seconds,
        newton_seconds: t1.elapsed().as_secs_f64(),
    })
}

/// Diagnostics of one converged solution.
#[derive(Debug, Clone)]
pub struct EpsRecord {
    pub eps: f64,
    pub state: State,
    pub energy: EnergyBreakdown,
    /// Critical value `J_ε` at the converged state.
    pub level: f64,
    pub grad_norm: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub norm_h1: f64,
    pub norm_h1r: f64,
    pub norm_star: f64,
    /// `2π b(Rmax)`.
    pub flux: f64,
    pub min_u: f64,
    pub newton_iterations: usize,
    pub seconds: f64,
}

impl EpsRecord {
    pub fn new(
        eps: f64,
        newton: &NewtonOutcome,
        params: &ModelParams,
        grid: &RadialGrid,
        seconds: f64,
    ) -> Result<Self> {
        let s = &newton.state;
        let e = energy(s, params, grid)?;
        let res = el_residual(s, params, grid)?;
        Ok(Self {
            eps,
            energy: e,
            level: e.total,
            grad_norm: newton.grad_norm,
            residual_sup: res.sup(),
            residual_l2: res.weighted_l2(grid),
            norm_h1: norm_h1(&s.u, grid)?,
            norm_h1r: norm_h1r(&s.u, grid)?,
            norm_star: norm_star(&s.b, grid)?,
            flux: 2.0 * std::f64::consts::PI * s.b[grid.n],
            min_u: s.min_u(),
            newton_iterations: newton.iterations,
            seconds,
            state: s.clone(),
        })
    }
}

/// Outcome of the mountain-pass stage at the first `ε`.
#[derive(Debug, Clone, Copy)]
pub struct MpaSummary {
    pub level: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub params: ModelParams,
    pub rmax: f64,
    pub n: usize,
    pub gamma: f64,
    /// `max_t J₀(t·ū, 0)` along the endpoint ray.
    pub k_bound: f64,
    /// Absent when the run started from a given state.
    pub mpa: Option<MpaSummary>,
    pub records: Vec<EpsRecord>,
    /// Linear extrapolation in `ε` of the last two profiles to `ε = 0`.
    pub extrapolated: State,
    /// Sup distance between the extrapolated and the last profile, `(u, b)`.
    pub extrapolation_gap: (f64, f64),
    /// Sup distance, `(u, b)`, between the last profile and the extrapolated
    /// profile Newton-refined at the last `ε`.
    pub proxy_gap: (f64, f64),
}

impl SolveReport {
    /// The solution reported as the `ε → 0` answer.
    pub fn last(&self) -> &EpsRecord {
        self.records
            .last()
            .expect("reports carry at least one record")
    }
}

/// Mountain pass and Newton at the first `ε`, then warm-started Newton
/// along the schedule.
pub fn run_continuation(
    schedule: &EpsSchedule,
    params: &ModelParams,
    grid: &RadialGrid,
    seed: Option<&[f64]>,
    mpa_cfg: &MpaConfig,
    newton_cfg: &NewtonConfig,
) -> Result<SolveReport> {
    let eps0 = schedule.eps_values[0];
    let p0 = params.with_eps(eps0)?;
    let first = solve_single(&p0, grid, seed, mpa_cfg, newton_cfg).map_err(|e| e.at_eps(eps0))?;
    let record = EpsRecord::new(
        eps0,
        &first.newton,
        &p0,
        grid,
        first.mpa_seconds + first.newton_seconds,
    )
    .map_err(|e| e.at_eps(eps0))?;
    let mpa = MpaSummary {
        level: first.mpa.level,
        iterations: first.mpa.iterations,
        grad_norm: first.mpa.grad_norm,
        seconds: first.mpa_seconds,
    };
    continue_from(
        record,
        &schedule.eps_values[1..],
        params,
        grid,
        first.k_bound,
        Some(mpa),
        newton_cfg,
    )
}

/// Warm-started Newton along the whole schedule from a given state. `K` is
/// still taken along the default endpoint ray.
pub fn run_newton_continuation(
    schedule: &EpsSchedule,
    params: &ModelParams,
    grid: &RadialGrid,
    seed: &State,
    newton_cfg: &NewtonConfig,
) -> Result<SolveReport> {
    let eps0 = schedule.eps_values[0];
    let p0 = params.with_eps(eps0)?;
    let endpoint = find_endpoint(&p0, grid, &default_seed(&p0, grid))?;
    let k_bound = ray_max(&endpoint, &p0, grid)?;
    let t = Instant::now();
    let out = newton_refine(seed, &p0, grid, newton_cfg).map_err(|e| e.at_eps(eps0))?;
    let record = EpsRecord::new(eps0, &out, &p0, grid, t.elapsed().as_secs_f64())
        .map_err(|e| e.at_eps(eps0))?;
    continue_from(
        record,
        &schedule.eps_values[1..],
        params,
        grid,
        k_bound,
        None,
        newton_cfg,
    )
}

fn continue_from(
    first: EpsRecord,
    rest: &[f64],
    params: &ModelParams,
    grid: &RadialGrid,
    k_bound: f64,
    mpa: Option<MpaSummary>,
    newton_cfg: &NewtonConfig,
) -> Result<SolveReport> {
    let mut records = vec![first];
    for &eps in rest {
        let p = params.with_eps(eps)?;
        let t = Instant::now();
        let prev = &records.last().unwrap().state;
        let out = newton_refine(prev, &p, grid, newton_cfg).map_err(|e| e.at_eps(eps))?;
        let rec = EpsRecord::new(eps, &out, &p, grid, t.elapsed().as_secs_f64())
            .map_err(|e| e.at_eps(eps))?;
        records.push(rec);
    }

    let (extrapolated, gap) = extrapolate(&records);
    let last = records.last().unwrap();
    let p_last = params.with_eps(last.eps)?;
    let proxy =
        newton_refine(&extrapolated, &p_last, grid, newton_cfg).map_err(|e| e.at_eps(last.eps))?;
    let proxy_gap = proxy.state.sup_diff(&last.state);
    Ok(SolveReport {
        params: *params,
        rmax: grid.rmax,
        n: grid.n,
        gamma: grid.gamma,
        k_bound,
        mpa,
        records,
        extrapolated,
        extrapolation_gap: gap,
        proxy_gap,
    })
}

fn extrapolate(records: &[EpsRecord]) -> (State, (f64, f64)) {
    let last = records.last().unwrap();
    if records.len() < 2 {
        return (last.state.clone(), (0.0, 0.0));
    }
    let prev = &records[records.len() - 2];
    // value at eps = 0 of the line through (eps_prev, prev) and (eps_last, last)
    let t = last.eps / (prev.eps - last.eps);
    let diff = last.state.axpy(-1.0, &prev.state);
    let mut ex = last.state.axpy(t, &diff);
    ex.project_nonnegative();
    let gap = ex.sup_diff(&last.state);
    (ex, gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_shape() {
        let s = EpsSchedule::default();
        assert_eq!(s.eps_values[0], 0.1);
        assert_eq!(*s.eps_values.last().unwrap(), 1e-6);
        assert_eq!(s.eps_values.len(), 10);
        assert!(s.eps_values.windows(2).all(|w| w[1] < w[0]));
        assert!(EpsSchedule::new(vec![0.1, 0.2]).is_err());
        assert!(EpsSchedule::new(vec![1.0]).is_err());
        assert!(EpsSchedule::geometric(0.1, 1e-3, 1.5).is_err());
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let m = ModelParams::new(1, 4.0, 1.0, 0.05).unwrap();
        let g = RadialGrid::graded(20.0, 200, 2.0).unwrap();
        let cfg = NewtonConfig::default();
        let s = solve_single(&m, &g, None, &MpaConfig::default(), &cfg).unwrap();
        let again = newton_refine(&s.newton.state, &m, &g, &cfg).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.state, s.newton.state);
        assert!(s.newton.state.min_u() >= 0.0);
        assert!(s.newton.grad_norm <= 1e-10);
    }

    #[test]
    fn newton_rejects_constraint_violations() {
        let m = ModelParams::new(1, 4.0, 1.0, 0.05).unwrap();
        let g = RadialGrid::graded(20.0, 64, 2.0).unwrap();
        let mut s = State::zeros(g.len());
        s.b[0] = 0.5;
        assert!(matches!(
            newton_refine(&s, &m, &g, &NewtonConfig::default()),
            Err(VortexError::Constraint(_))
        ));
    }
}
