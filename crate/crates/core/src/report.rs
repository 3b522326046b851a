//! Profile CSV and TOML run reports, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::continuation::{EpsRecord, SolveReport};
use crate::error::{Result, VortexError};
use crate::functional::{
    curl_energy_cartesian, energy, residual_2d_spotcheck, EnergyBreakdown, State,
};
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::numerics::LocalLagrange;
use crate::oracle::{OracleSolution, TailCondition};

pub const PROFILE_HEADER: &str = "r,u,b,du,db";

/// Writes `contents` to a temporary file next to `path` and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| VortexError::Io(e.error))?;
    Ok(())
}

/// Second-order derivative at the nodes of a non-uniform mesh: three-point
/// central differences inside, one-sided three-point formulas at the ends.
pub fn nodal_derivative(r: &[f64], y: &[f64]) -> Vec<f64> {
    let n = r.len();
    assert_eq!(n, y.len());
    assert!(n >= 3, "need at least three nodes");
    let three = |x: [f64; 3], f: [f64; 3], at: f64| {
        // derivative of the quadratic through the three points
        let l0 = (2.0 * at - x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
        let l1 = (2.0 * at - x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
        let l2 = (2.0 * at - x[0] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
        l0 * f[0] + l1 * f[1] + l2 * f[2]
    };
    (0..n)
        .map(|i| {
            let j = i.clamp(1, n - 2) - 1;
            three([r[j], r[j + 1], r[j + 2]], [y[j], y[j + 1], y[j + 2]], r[i])
        })
        .collect()
}

/// CSV text of a profile: header `r,u,b,du,db`, one row per node, every
/// value with 17 significant digits.
pub fn profile_csv(s: &State, grid: &RadialGrid) -> Result<String> {
    grid.check_len(&s.u)?;
    grid.check_len(&s.b)?;
    let du = nodal_derivative(&grid.r, &s.u);
    let db = nodal_derivative(&grid.r, &s.b);
    let mut out = String::with_capacity(grid.len() * 5 * 24 + 16);
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for i in 0..grid.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            grid.r[i], s.u[i], s.b[i], du[i], db[i]
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn write_profile(s: &State, grid: &RadialGrid, path: &Path) -> Result<()> {
    write_atomic(path, &profile_csv(s, grid)?)
}

/// Radial samples read back from a profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub r: Vec<f64>,
    pub state: State,
}

impl Profile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == PROFILE_HEADER => {}
            other => {
                return Err(VortexError::Parse(format!(
                    "expected header {PROFILE_HEADER:?}, found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let (mut r, mut u, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| VortexError::Parse(format!("row {}: {e}", ln + 1)))?;
            if fields.len() != 5 {
                return Err(VortexError::Parse(format!(
                    "row {}: expected 5 fields, got {}",
                    ln + 1,
                    fields.len()
                )));
            }
            r.push(fields[0]);
            u.push(fields[1]);
            b.push(fields[2]);
        }
        if r.len() < LocalLagrange::POINTS {
            return Err(VortexError::Parse(format!(
                "profile has {} rows, need at least {}",
                r.len(),
                LocalLagrange::POINTS
            )));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(VortexError::Parse(
                "radii must start at 0 and increase strictly".into(),
            ));
        }
        Ok(Self {
            r,
            state: State { u, b },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The profile on `grid`: copied when the nodes coincide, interpolated
    /// otherwise. Constraints of `params` are re-imposed.
    pub fn on_grid(&self, grid: &RadialGrid, params: &ModelParams) -> Result<State> {
        let mut s = if self.r == grid.r {
            self.state.clone()
        } else {
            let rmax = *self.r.last().unwrap();
            if grid.rmax > rmax * (1.0 + 1e-12) {
                return Err(VortexError::Range(format!(
                    "profile ends at r = {rmax}, grid needs {}",
                    grid.rmax
                )));
            }
            let iu = LocalLagrange::new(&self.r, &self.state.u);
            let ib = LocalLagrange::new(&self.r, &self.state.b);
            State {
                u: grid.r.iter().map(|&r| iu.eval(r)).collect(),
                b: grid.r.iter().map(|&r| ib.eval(r)).collect(),
            }
        };
        s.project_nonnegative();
        s.enforce_constraints(params);
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsSection {
    pub k: i32,
    pub p: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSection {
    pub rmax: f64,
    pub n: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MpaSection {
    pub level: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsSection {
    pub eps: f64,
    pub level: f64,
    pub level_le_k: bool,
    pub grad_norm: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub norm_h1: f64,
    pub norm_h1r: f64,
    pub norm_star: f64,
    pub flux: f64,
    pub min_u: f64,
    pub newton_iterations: usize,
    /// `‖u‖²_{Ĥ¹_r} ≤ (2p/(p−2))·K`.
    pub h1r_bound_ok: bool,
    /// `∫b'²/r ≤ (2p/(p−2))·K`.
    pub curl_bound_ok: bool,
    /// `max_{s≤r}|b(s)| ≤ r·√(2K)` at every node.
    pub local_b_bound_ok: bool,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSection {
    /// `max_t J₀(t·ū, 0)`.
    pub k_bound: f64,
    /// `(2p/(p−2))·K`.
    pub norm_bound: f64,
    pub level_le_k: bool,
    pub all_bounds_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSection {
    pub eps: f64,
    /// `2π b(Rmax)` of the last solution.
    pub flux: f64,
    /// Successive flux differences along the schedule.
    pub flux_gaps: Vec<f64>,
    pub extrapolation_gap_u: f64,
    pub extrapolation_gap_b: f64,
    pub proxy_gap_u: f64,
    pub proxy_gap_b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksSection {
    /// `2π·2·curl_b` from the radial energy.
    pub curl_radial: f64,
    pub curl_cartesian: f64,
    pub curl_relative_diff: f64,
    pub curl_patch_half_width: f64,
    /// Largest 2-D residual over the sample points.
    pub spot_residual: f64,
    pub spot_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSection {
    pub eps: f64,
    pub tail: String,
    pub a: f64,
    pub beta: f64,
    pub sweeps: usize,
    /// Comparison window `[0, radius]`; zero for shooting-only runs.
    pub radius: f64,
    pub sup_diff_u: f64,
    pub sup_diff_b: f64,
    pub energy_relative_diff: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub mpa: f64,
    pub continuation: f64,
    pub checks: f64,
    pub oracle: f64,
    pub total: f64,
}

/// Everything persisted by one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub method: String,
    pub converged: bool,
    pub min_u: f64,
    pub params: ParamsSection,
    pub grid: GridSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpa: Option<MpaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<EpsSection>,
}

impl RunReport {
    pub fn new(method: &str, params: &ModelParams, grid: &RadialGrid) -> Self {
        Self {
            method: method.to_string(),
            converged: false,
            min_u: f64::NAN,
            params: ParamsSection {
                k: params.k,
                p: params.p,
                lambda: params.lambda,
            },
            grid: GridSection {
                rmax: grid.rmax,
                n: grid.n,
                gamma: grid.gamma,
            },
            bounds: None,
            mpa: None,
            limit: None,
            checks: None,
            oracle: None,
            timings: Timings::default(),
            eps: Vec::new(),
        }
    }

    /// Fills the continuation sections from a finished solve.
    pub fn add_solve(&mut self, solve: &SolveReport, grid: &RadialGrid) {
        let k = solve.k_bound;
        let p = solve.params.p;
        let norm_bound = 2.0 * p / (p - 2.0) * k;
        self.eps = solve
            .records
            .iter()
            .map(|r| eps_section(r, grid, k, norm_bound))
            .collect();
        let level_le_k = self.eps.iter().all(|e| e.level_le_k);
        let all_bounds_ok = self
            .eps
            .iter()
            .all(|e| e.h1r_bound_ok && e.curl_bound_ok && e.local_b_bound_ok);
        self.bounds = Some(BoundsSection {
            k_bound: k,
            norm_bound,
            level_le_k,
            all_bounds_ok,
        });
        self.mpa = solve.mpa.map(|m| MpaSection {
            level: m.level,
            iterations: m.iterations,
            grad_norm: m.grad_norm,
        });
        let last = solve.last();
        self.limit = Some(LimitSection {
            eps: last.eps,
            flux: last.flux,
            flux_gaps: flux_gaps(&solve.records),
            extrapolation_gap_u: solve.extrapolation_gap.0,
            extrapolation_gap_b: solve.extrapolation_gap.1,
            proxy_gap_u: solve.proxy_gap.0,
            proxy_gap_b: solve.proxy_gap.1,
        });
        self.min_u = solve
            .records
            .iter()
            .map(|r| r.min_u)
            .fold(f64::INFINITY, f64::min);
        self.timings.mpa = solve.mpa.map_or(0.0, |m| m.seconds);
        self.timings.continuation = solve.records.iter().map(|r| r.seconds).sum();
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| VortexError::Parse(format!("report serialization: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_toml()?)
    }
}

fn eps_section(r: &EpsRecord, grid: &RadialGrid, k: f64, norm_bound: f64) -> EpsSection {
    let bmax_ok = {
        let lim = (2.0 * k).sqrt();
        let mut run = 0.0f64;
        r.state.b.iter().zip(&grid.r).all(|(b, &x)| {
            run = run.max(b.abs());
            run <= x * lim * (1.0 + 1e-12)
        })
    };
    EpsSection {
        eps: r.eps,
        level: r.level,
        level_le_k: r.level > 0.0 && r.level <= k,
        grad_norm: r.grad_norm,
        residual_sup: r.residual_sup,
        residual_l2: r.residual_l2,
        norm_h1: r.norm_h1,
        norm_h1r: r.norm_h1r,
        norm_star: r.norm_star,
        flux: r.flux,
        min_u: r.min_u,
        newton_iterations: r.newton_iterations,
        h1r_bound_ok: r.norm_h1r * r.norm_h1r <= norm_bound,
        curl_bound_ok: 2.0 * r.energy.curl_b <= norm_bound,
        local_b_bound_ok: bmax_ok,
        energy: r.energy,
    }
}

/// `|F_{j+1} − F_j|` for the fluxes along the schedule.
pub fn flux_gaps(records: &[EpsRecord]) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| (w[1].flux - w[0].flux).abs())
        .collect()
}

/// Deterministic points spread over the annulus `r_in ≤ |x| ≤ r_out`
/// (golden-angle spiral, uniform in area).
pub fn annulus_points(r_in: f64, r_out: f64, count: usize) -> Vec<[f64; 2]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let t = (i as f64 + 0.5) / count as f64;
            let r = (r_in * r_in + t * (r_out * r_out - r_in * r_in)).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Curl-identity and 2-D residual checks of a converged solution.
pub fn solution_checks(
    s: &State,
    params: &ModelParams,
    grid: &RadialGrid,
    points: &[[f64; 2]],
) -> Result<ChecksSection> {
    let e = energy(s, params, grid)?;
    let half_width = (grid.rmax / std::f64::consts::SQRT_2 * 0.99).min(15.0);
    let cart = curl_energy_cartesian(&s.b, grid, half_width, 400)?;
    let radial = 4.0 * std::f64::consts::PI * e.curl_b;
    let spot = residual_2d_spotcheck(s, params, grid, points)?;
    Ok(ChecksSection {
        curl_radial: radial,
        curl_cartesian: cart,
        curl_relative_diff: if radial > 0.0 {
            (cart - radial).abs() / radial
        } else {
            (cart - radial).abs()
        },
        curl_patch_half_width: half_width,
        spot_residual: spot,
        spot_points: points.len(),
    })
}

/// Agreement between a variational solution and the oracle on `[0, radius]`.
pub fn oracle_agreement(
    s: &State,
    params: &ModelParams,
    grid: &RadialGrid,
    sol: &OracleSolution,
    radius: f64,
) -> Result<OracleSection> {
    let (mut du, mut db) = (0.0f64, 0.0f64);
    for (i, &r) in grid.r.iter().enumerate() {
        if r > radius {
            break;
        }
        let (u, b) = sol.eval(r)?;
        du = du.max((u - s.u[i]).abs());
        db = db.max((b - s.b[i]).abs());
    }
    let e_var = energy(s, params, grid)?.total;
    let e_orc = energy(&sol.on_grid(grid)?, params, grid)?.total;
    Ok(OracleSection {
        eps: params.eps,
        tail: tail_name(sol.cfg.tail).into(),
        a: sol.a,
        beta: sol.beta,
        sweeps: sol.sweeps,
        radius,
        sup_diff_u: du,
        sup_diff_b: db,
        energy_relative_diff: (e_orc - e_var).abs() / e_var.abs().max(f64::MIN_POSITIVE),
    })
}

/// Oracle data without a variational comparison.
pub fn oracle_only(sol: &OracleSolution) -> OracleSection {
    OracleSection {
        eps: sol.params.eps,
        tail: tail_name(sol.cfg.tail).into(),
        a: sol.a,
        beta: sol.beta,
        sweeps: sol.sweeps,
        radius: 0.0,
        sup_diff_u: 0.0,
        sup_diff_b: 0.0,
        energy_relative_diff: 0.0,
    }
}

fn tail_name(t: TailCondition) -> &'static str {
    match t {
        TailCondition::Natural => "natural",
        TailCondition::Decay => "decay",
    }
}
