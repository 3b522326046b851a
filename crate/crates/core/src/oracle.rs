//! Shooting solver for the radial system, independent of the variational
//! discretization:
//!
//! ```text
//! u'' = -u'/r + (k-b)² u / r² + W'(u)
//! b'' =  b'/r + ε b - (k-b) u²
//! ```
//!
//! Integration starts at `r0 = 1e-4` from the Frobenius series
//! `u ≈ a r^m (1 + c r²)`, `b ≈ β r² + e r^{2m+2} + (εβ/8) r⁴` with `m = |k|`.
//!
//! Shooting on `(a, β)` jointly is badly conditioned: for a wrong `β` the
//! gauge field runs off like `r²` and masks the matter dichotomy. The solver
//! therefore alternates two well-posed problems. With `b` frozen, `a` is
//! bisected between trajectories that cross zero (too large) and ones that
//! turn back up while positive (too small); past the turning radius `u` is
//! set to zero. With `u` frozen, the gauge equation is linear and is solved
//! by superposition, with the tail condition imposed through the tail
//! solution of `b'' = b'/r + εb`.

use crate::error::{Result, VortexError};
use crate::functional::State;
use crate::grid::RadialGrid;
use crate::model::ModelParams;
use crate::ode::{integrate, Control, Finish, Tolerance};

/// Condition imposed on `b` beyond the matter core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailCondition {
    /// `b'(Rend) = 0`, the natural boundary condition of the truncated
    /// variational problem.
    Natural,
    /// `b` lies on the decaying solution `r K₁(√ε r)` of the tail equation
    /// (a constant when `ε = 0`), i.e. the problem on the whole half line.
    Decay,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootParams {
    pub a: f64,
    pub beta: f64,
    pub r0: f64,
    pub tol: Tolerance,
}

impl ShootParams {
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0 && beta.is_finite()) {
            return Err(VortexError::Config(format!(
                "shooting needs finite a >= 0 and beta, got a = {a}, beta = {beta}"
            )));
        }
        Ok(Self {
            a,
            beta,
            r0: 1e-4,
            tol: Tolerance::default(),
        })
    }
}

/// Terminal data of one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotEnd {
    /// `(u, u', b, b')` at the requested radius.
    Reached([f64; 4]),
    /// `|u|` exceeded `1e6` at this radius.
    Diverged { radius: f64 },
}

const BLOW_UP: f64 = 1e6;

fn rhs(params: &ModelParams, r: f64, y: &[f64; 4]) -> [f64; 4] {
    let k = params.kf();
    let (u, du, b, db) = (y[0], y[1], y[2], y[3]);
    let kb = k - b;
    [
        du,
        -du / r + kb * kb * u / (r * r) + params.w_prime(u),
        db,
        db / r + params.eps * b - kb * u * u,
    ]
}

/// Series data `(u, u', b, b')` at a small radius.
fn series(a: f64, beta: f64, params: &ModelParams, r: f64) -> [f64; 4] {
    let k = params.kf();
    let m = k.abs();
    if params.k == 0 {
        let c = (1.0 - params.r_prime(a) / a.max(f64::MIN_POSITIVE)) / 4.0;
        return [a * (1.0 + c * r * r), 2.0 * a * c * r, 0.0, 0.0];
    }
    let c = (1.0 - 2.0 * k * beta) / (4.0 * m + 4.0);
    let e = -k * a * a / (4.0 * m * (m + 1.0));
    let rm = r.powf(m);
    let u = a * rm * (1.0 + c * r * r);
    let du = a * (m * rm / r + c * (m + 2.0) * rm * r);
    let q = 2.0 * m + 2.0;
    let eb = params.eps * beta / 8.0;
    let b = beta * r * r + e * r.powf(q) + eb * r.powi(4);
    let db = 2.0 * beta * r + e * q * r.powf(q - 1.0) + 4.0 * eb * r.powi(3);
    [u, du, b, db]
}

/// Integrates the full system from the series start to `r_end`.
pub fn shoot_once(sp: &ShootParams, params: &ModelParams, r_end: f64) -> Result<ShotEnd> {
    if !(r_end.is_finite() && r_end > sp.r0) {
        return Err(VortexError::Config(format!(
            "shooting span must end beyond r0 = {}, got {r_end}",
            sp.r0
        )));
    }
    let y0 = series(sp.a, sp.beta, params, sp.r0);
    let out = integrate(
        |r, y| rhs(params, r, y),
        sp.r0,
        y0,
        r_end,
        sp.tol,
        &[],
        |_, y| {
            if y[0].abs() > BLOW_UP {
                Control::Stop
            } else {
                Control::Continue
            }
        },
    );
    match out.finish {
        Finish::Completed => Ok(ShotEnd::Reached(out.y)),
        Finish::Stopped(r) => Ok(ShotEnd::Diverged { radius: r }),
        Finish::StepUnderflow(r) | Finish::NonFinite(r) => Ok(ShotEnd::Diverged { radius: r }),
    }
}

/// How a `u` trajectory leaves the neighbourhood of the decaying solution.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    /// `u` crossed zero: amplitude too large.
    Over { r: f64 },
    /// `u` turned upward while positive (or blew up to `+∞`): too small.
    Under { r: f64 },
}

impl Fate {
    fn radius(&self) -> f64 {
        match *self {
            Fate::Over { r } | Fate::Under { r } => r,
        }
    }
}

/// Cubic Hermite table on the mesh `r0, h, 2h, ..., Rend`.
#[derive(Debug, Clone)]
struct Table {
    r: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
    h: f64,
}

impl Table {
    fn mesh(r0: f64, r_end: f64, spacing: f64) -> Vec<f64> {
        let n = (r_end / spacing).ceil() as usize;
        let h = r_end / n as f64;
        let mut r: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
        r[0] = r0;
        r[n] = r_end;
        r
    }

    fn zeros(r: &[f64]) -> Self {
        let h = r[2] - r[1];
        Self {
            r: r.to_vec(),
            v: vec![0.0; r.len()],
            dv: vec![0.0; r.len()],
            h,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.r.len() - 2;
        let j = ((x / self.h).floor() as usize).min(last);
        let (x0, x1) = (self.r[j], self.r[j + 1]);
        let d = x1 - x0;
        let t = ((x - x0) / d).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.v[j]
            + (t3 - 2.0 * t2 + t) * d * self.dv[j]
            + (-2.0 * t3 + 3.0 * t2) * self.v[j + 1]
            + (t3 - t2) * d * self.dv[j + 1]
    }

    fn sup_diff(&self, other: &Table) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Series start `(u, u')` for the matter equation with `b ≈ β r²`.
fn u_series(a: f64, beta: f64, params: &ModelParams, r: f64) -> [f64; 2] {
    let y = series(a, beta, params, r);
    [y[0], y[1]]
}

/// One matter trajectory in a frozen gauge profile `b`, stopped at the first
/// sign of departure from the decaying branch. `sink` sees every accepted
/// step (and every abscissa of `stops`) before departure.
#[allow(clippy::too_many_arguments)]
fn u_trajectory(
    a: f64,
    beta: f64,
    params: &ModelParams,
    b: &Table,
    r_end: f64,
    tol: Tolerance,
    stops: &[f64],
    mut sink: impl FnMut(f64, &[f64; 2]),
) -> Fate {
    let r0 = b.r[0];
    let k = params.kf();
    let mut descended = false;
    let mut fate = None;
    let out = integrate(
        |r, y: &[f64; 2]| {
            let kb = k - b.eval(r);
            [
                y[1],
                -y[1] / r + kb * kb * y[0] / (r * r) + params.w_prime(y[0]),
            ]
        },
        r0,
        u_series(a, beta, params, r0),
        r_end,
        tol,
        stops,
        |r, y| {
            if y[0] < 0.0 {
                fate = Some(Fate::Over { r });
                return Control::Stop;
            }
            if y[1] < 0.0 {
                descended = true;
            }
            if (descended && y[1] > 0.0) || y[0] > BLOW_UP {
                fate = Some(Fate::Under { r });
                return Control::Stop;
            }
            sink(r, y);
            Control::Continue
        },
    );
    fate.unwrap_or(match out.finish {
        Finish::NonFinite(r) | Finish::StepUnderflow(r) if out.y[0] < 0.0 => Fate::Over { r },
        _ => Fate::Under { r: out.x },
    })
}

/// Brackets the amplitude at which `u` switches from turning up to
/// crossing zero and bisects it down to adjacent floats. Returns the
/// lower end.
fn bisect_amplitude(
    beta: f64,
    params: &ModelParams,
    b: &Table,
    r_end: f64,
    tol: Tolerance,
    guess: Option<f64>,
) -> Result<f64> {
    let over = |a: f64| {
        matches!(
            u_trajectory(a, beta, params, b, r_end, tol, &[], |_, _| {}),
            Fate::Over { .. }
        )
    };
    let local = |g: f64| -> Option<(f64, f64)> {
        let mut step = 1.01;
        if over(g) {
            let mut hi = g;
            for _ in 0..60 {
                let a = hi / step;
                if !over(a) {
                    return Some((a, hi));
                }
                hi = a;
                step *= step;
            }
        } else {
            let mut lo = g;
            for _ in 0..60 {
                let a = lo * step;
                if over(a) {
                    return Some((lo, a));
                }
                lo = a;
                step *= step;
            }
        }
        None
    };
    let scan = || -> Option<(f64, f64)> {
        let (a_min, a_max, count) = (1e-3f64, 1e3f64, 600);
        let ratio = (a_max / a_min).powf(1.0 / count as f64);
        let mut a = a_min;
        for _ in 0..count {
            if over(a * ratio) {
                return Some((a, a * ratio));
            }
            a *= ratio;
        }
        None
    };
    let (mut lo, mut hi) = guess
        .filter(|g| g.is_finite() && *g > 0.0)
        .and_then(local)
        .or_else(scan)
        .ok_or_else(|| VortexError::Oracle("no amplitude bracket".into()))?;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(lo);
        }
        if over(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Samples the matter profile of amplitude `a` on the table mesh; zero
/// beyond the departure radius, which is returned alongside.
fn u_table(a: f64, beta: f64, params: &ModelParams, b: &Table, tol: Tolerance) -> (Table, f64) {
    let mut out = Table::zeros(&b.r);
    let y0 = u_series(a, beta, params, b.r[0]);
    out.v[0] = y0[0];
    out.dv[0] = y0[1];
    let r_end = *b.r.last().unwrap();
    let mut j = 1;
    let fate = u_trajectory(a, beta, params, b, r_end, tol, &b.r[1..], |r, y| {
        while j < out.r.len() && out.r[j] <= r {
            if out.r[j] == r {
                out.v[j] = y[0];
                out.dv[j] = y[1];
            }
            j += 1;
        }
    });
    (out, fate.radius())
}

/// `K₀(x)/K₁(x)` from `K_ν(x) = ∫₀^∞ exp(-x cosh t) cosh(νt) dt`, summed by
/// the trapezoidal rule (spectrally accurate for this integrand).
pub(crate) fn bessel_k_ratio(x: f64) -> f64 {
    let dt: f64 = 0.01;
    let mut k0 = 0.5;
    let mut k1 = 0.5;
    let mut t: f64 = dt;
    loop {
        let c = t.cosh();
        let w = (-x * (c - 1.0)).exp();
        k0 += w;
        k1 += w * c;
        if x * (c - 1.0) - t > 50.0 {
            break;
        }
        t += dt;
    }
    k0 / k1
}

/// Tail solution `T` of `T'' = T'/r + εT` on `[r_cut, Rend]` selected by the
/// tail condition, normalized to `T(r_cut) = 1`. Returns `-T'(r_cut)` and
/// `(T, T')` on the mesh nodes at or beyond `r_cut`.
fn tail_profile(
    params: &ModelParams,
    mesh: &[f64],
    r_cut: f64,
    cond: TailCondition,
    tol: Tolerance,
) -> (f64, Vec<(f64, f64)>) {
    let r_end = *mesh.last().unwrap();
    let eps = params.eps;
    let kappa_end = match cond {
        TailCondition::Decay if eps > 0.0 => {
            let s = eps.sqrt();
            s * bessel_k_ratio(s * r_end)
        }
        _ => 0.0,
    };
    let first = mesh.partition_point(|r| *r < r_cut);
    if r_cut >= r_end {
        return (kappa_end, vec![(1.0, -kappa_end); mesh.len() - first]);
    }
    // integrate backwards in x = -r, where the wanted solution grows
    let stops: Vec<f64> = mesh[first..].iter().rev().map(|r| -r).collect();
    let mut samples = vec![(1.0, -kappa_end)];
    let mut at_cut = (1.0, -kappa_end);
    integrate(
        |x, y: &[f64; 2]| [-y[1], -(y[1] / (-x) + eps * y[0])],
        -r_end,
        [1.0, -kappa_end],
        -r_cut,
        tol,
        &stops,
        |x, y| {
            if x != -r_end && stops.contains(&x) {
                samples.push((y[0], y[1]));
            }
            if x == -r_cut {
                at_cut = (y[0], y[1]);
            }
            Control::Continue
        },
    );
    samples.truncate(mesh.len() - first);
    samples.reverse();
    let norm = at_cut.0;
    let samples = samples
        .into_iter()
        .map(|(v, d)| (v / norm, d / norm))
        .collect();
    (-at_cut.1 / at_cut.0, samples)
}

/// Solves the linear gauge equation `b'' = b'/r + (ε + u²) b - k u²` for a
/// frozen matter profile by superposition on `[r0, r_cut]` and the tail
/// solution beyond. Returns the table and `β`.
fn b_solve(
    params: &ModelParams,
    u: &Table,
    r_cut: f64,
    cond: TailCondition,
    tol: Tolerance,
) -> (Table, f64) {
    let k = params.kf();
    let m = k.abs();
    let eps = params.eps;
    let mesh = &u.r;
    let r0 = mesh[0];
    let a = u.v[0] / r0.powf(m);
    let e = -k * a * a / (4.0 * m * (m + 1.0));
    let q0 = 2.0 * m + 2.0;
    let y0 = [
        r0 * r0,
        2.0 * r0,
        e * r0.powf(q0),
        e * q0 * r0.powf(q0 - 1.0),
    ];
    let first_tail = mesh.partition_point(|r| *r < r_cut);
    let core_end = r_cut.min(*mesh.last().unwrap());
    let stops: Vec<f64> = mesh[1..first_tail].to_vec();
    let mut hq = vec![y0; mesh.len()];
    let mut j = 1;
    let mut at_cut = y0;
    integrate(
        |r, y: &[f64; 4]| {
            let uu = u.eval(r);
            let w = eps + uu * uu;
            [
                y[1],
                y[1] / r + w * y[0],
                y[3],
                y[3] / r + w * y[2] - k * uu * uu,
            ]
        },
        r0,
        y0,
        core_end,
        tol,
        &stops,
        |r, y| {
            while j < first_tail && mesh[j] <= r {
                if mesh[j] == r {
                    hq[j] = *y;
                }
                j += 1;
            }
            if r == core_end {
                at_cut = *y;
            }
            Control::Continue
        },
    );
    let (kappa, tail) = tail_profile(params, mesh, r_cut, cond, tol);
    let [h, dh, q, dq] = at_cut;
    let beta = -(dq + kappa * q) / (dh + kappa * h);
    let mut out = Table::zeros(mesh);
    for i in 0..first_tail {
        let y = hq[i];
        out.v[i] = y[2] + beta * y[0];
        out.dv[i] = y[3] + beta * y[1];
    }
    let b_cut = q + beta * h;
    for (i, (v, d)) in tail.into_iter().enumerate() {
        out.v[first_tail + i] = b_cut * v;
        out.dv[first_tail + i] = b_cut * d;
    }
    (out, beta)
}

#[derive(Debug, Clone, Copy)]
pub struct ShootConfig {
    /// End of the shooting interval.
    pub r_end: f64,
    pub tail: TailCondition,
    pub tol: Tolerance,
    /// Spacing of the sampling mesh that carries the frozen profiles.
    pub spacing: f64,
    /// Bound on the alternations between the matter and gauge equations.
    pub max_sweeps: usize,
    /// Stop when successive gauge profiles differ by less than this.
    pub sweep_tol: f64,
}

impl ShootConfig {
    pub fn new(r_end: f64, tail: TailCondition) -> Self {
        Self {
            r_end,
            tail,
            tol: Tolerance::default(),
            spacing: 0.01,
            max_sweeps: 400,
            sweep_tol: 1e-11,
        }
    }
}

/// Converged shooting solution with its sampled profiles.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub params: ModelParams,
    pub cfg: ShootConfig,
    /// `u ≈ a r^{|k|}` at the origin.
    pub a: f64,
    /// `b ≈ β r²` at the origin.
    pub beta: f64,
    /// Radius beyond which `u` is set to zero.
    pub r_cut: f64,
    /// Alternating sweeps used.
    pub sweeps: usize,
    /// Last change of the gauge profile between sweeps.
    pub sweep_change: f64,
    u: Table,
    b: Table,
}

/// Solves the radial system on `[0, r_end]`. For fixed `b` the matter
/// equation is solved by shooting on `a`; for fixed `u` the gauge equation
/// is linear and solved by superposition. The two are alternated (with
/// damping when the change grows) until the gauge profile settles. For
/// `k = 0` the gauge field vanishes identically and one matter solve is
/// enough.
pub fn shoot_solve(params: &ModelParams, cfg: &ShootConfig) -> Result<OracleSolution> {
    if !(cfg.r_end.is_finite() && cfg.r_end > 1.0) {
        return Err(VortexError::Config(format!(
            "shooting interval end must exceed 1, got {}",
            cfg.r_end
        )));
    }
    if !(cfg.spacing > 0.0 && cfg.spacing < 0.1 * cfg.r_end) {
        return Err(VortexError::Config(format!(
            "sampling spacing {} is not usable",
            cfg.spacing
        )));
    }
    let tol = cfg.tol;
    let mesh = Table::mesh(1e-4, cfg.r_end, cfg.spacing);
    let mut b = Table::zeros(&mesh);
    let mut beta = 0.0;
    let mut a = None;
    let mut omega: f64 = 1.0;
    let mut change = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let a_new = bisect_amplitude(beta, params, &b, cfg.r_end, tol, a)?;
        let (u, r_cut) = u_table(a_new, beta, params, &b, tol);
        if params.k == 0 {
            return Ok(OracleSolution {
                params: *params,
                cfg: *cfg,
                a: a_new,
                beta: 0.0,
                r_cut,
                sweeps: 1,
                sweep_change: 0.0,
                u,
                b,
            });
        }
        let (b_new, beta_new) = b_solve(params, &u, r_cut, cfg.tail, tol);
        let diff = b_new.sup_diff(&b);
        if diff > change {
            omega = (0.5 * omega).max(0.05);
        }
        change = diff;
        a = Some(a_new);
        if diff <= cfg.sweep_tol {
            return Ok(OracleSolution {
                params: *params,
                cfg: *cfg,
                a: a_new,
                beta: beta_new,
                r_cut,
                sweeps: sweep,
                sweep_change: diff,
                u,
                b: b_new,
            });
        }
        for i in 0..b.v.len() {
            b.v[i] += omega * (b_new.v[i] - b.v[i]);
            b.dv[i] += omega * (b_new.dv[i] - b.dv[i]);
        }
        beta += omega * (beta_new - beta);
    }
    Err(VortexError::Oracle(format!(
        "matter/gauge alternation did not settle in {} sweeps (last change {change:.3e})",
        cfg.max_sweeps
    )))
}

impl OracleSolution {
    /// `(u, b)` at a radius in `[0, r_end]`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        if !(r >= 0.0 && r <= self.cfg.r_end) {
            return Err(VortexError::Range(format!(
                "radius {r} outside the shooting interval [0, {}]",
                self.cfg.r_end
            )));
        }
        let r0 = self.u.r[0];
        if r < r0 {
            let y = series(self.a, self.beta, &self.params, r);
            return Ok((y[0], y[2]));
        }
        let u = if r >= self.r_cut { 0.0 } else { self.u.eval(r) };
        Ok((u, self.b.eval(r)))
    }

    /// Samples `(u, b)` at the given radii.
    pub fn sample(&self, radii: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut u = Vec::with_capacity(radii.len());
        let mut b = Vec::with_capacity(radii.len());
        for &r in radii {
            let (x, y) = self.eval(r)?;
            u.push(x);
            b.push(y);
        }
        Ok((u, b))
    }

    /// The oracle profile on the nodes of a variational grid, with the
    /// grid's constrained nodes zeroed.
    pub fn on_grid(&self, grid: &RadialGrid) -> Result<State> {
        let (u, b) = self.sample(&grid.r)?;
        let mut s = State { u, b };
        s.enforce_constraints(&self.params);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_stays_zero() {
        let m = ModelParams::new(1, 4.0, 1.0, 0.01).unwrap();
        let sp = ShootParams::new(0.0, 0.0).unwrap();
        assert_eq!(
            shoot_once(&sp, &m, 10.0).unwrap(),
            ShotEnd::Reached([0.0; 4])
        );
    }

    #[test]
    fn bessel_ratio_limits() {
        // K₀/K₁ → 1 - 1/(2x) for large x and → x ln(2/x) - γx for small x
        let x = 50.0;
        assert!((bessel_k_ratio(x) - (1.0 - 0.5 / x + 0.375 / (x * x))).abs() < 1e-5);
        // K₀(1) = 0.42102443824070834, K₁(1) = 0.6019072301972346
        assert!(
            (bessel_k_ratio(1.0) - 0.421_024_438_240_708_34 / 0.601_907_230_197_234_6).abs()
                < 1e-13
        );
    }

    #[test]
    fn scalar_dichotomy() {
        let m = ModelParams::oracle_mode(0, 4.0, 1.0, 0.0).unwrap();
        let b = Table::zeros(&Table::mesh(1e-4, 30.0, 0.01));
        let run = |a| u_trajectory(a, 0.0, &m, &b, 30.0, Tolerance::default(), &[], |_, _| {});
        assert!(matches!(run(3.0), Fate::Over { .. }));
        assert!(matches!(run(1.5), Fate::Under { .. }));
        let sp = ShootParams::new(3.0, 0.0).unwrap();
        assert!(matches!(
            shoot_once(&sp, &m, 30.0).unwrap(),
            ShotEnd::Diverged { .. }
        ));
    }
}
