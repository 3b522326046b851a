//! Command-line front end: argument parsing, validation and the run driver.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use vortex::continuation::{run_continuation, run_newton_continuation, EpsSchedule, NewtonConfig};
use vortex::mountain_pass::MpaConfig;
use vortex::oracle::{shoot_solve, ShootConfig, TailCondition};
use vortex::report::{
    annulus_points, oracle_agreement, oracle_only, solution_checks, write_profile, Profile,
    RunReport,
};
use vortex::{ModelParams, RadialGrid, VortexError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Mountain pass at the first eps, then Newton continuation.
    #[value(name = "mpa+newton")]
    MpaNewton,
    /// Newton continuation from --seed-profile.
    #[value(name = "newton-only")]
    NewtonOnly,
    /// Shooting oracle at --eps-end only.
    Shooting,
    /// mpa+newton followed by an oracle comparison at the last eps.
    #[value(name = "cross-check")]
    CrossCheck,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MpaNewton => "mpa+newton",
            Method::NewtonOnly => "newton-only",
            Method::Shooting => "shooting",
            Method::CrossCheck => "cross-check",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "vortex",
    about = "Radial vortex profiles by mountain pass, Newton continuation in the penalty and shooting"
)]
pub struct Args {
    /// Vorticity (nonzero unless --method shooting).
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub k: i32,
    /// Growth exponent of the nonlinearity, > 2.
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    /// Coupling of the nonlinearity, > 0.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-1)]
    pub eps_start: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_end: f64,
    #[arg(long, default_value_t = 0.25)]
    pub eps_factor: f64,
    /// Truncation radius.
    #[arg(long, default_value_t = 40.0)]
    pub rmax: f64,
    /// Number of grid cells.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Grading exponent of the nodes r_i = rmax (i/n)^gamma.
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Method::MpaNewton)]
    pub method: Method,
    /// CSV profile of the final solution.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// TOML report.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// CSV profile (r,u,b,du,db) used as the starting state.
    #[arg(long)]
    pub seed_profile: Option<PathBuf>,
}

/// Validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: RadialGrid,
    pub schedule: EpsSchedule,
    pub mpa: MpaConfig,
    pub newton: NewtonConfig,
    pub method: Method,
    pub profile_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub seed_profile: Option<PathBuf>,
}

/// A failure with the flag it concerns and the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(flag: &str, err: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: format!("{flag}: {err}"),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<VortexError> for CliError {
    fn from(e: VortexError) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

/// Stable exit code per error class.
pub fn exit_code(e: &VortexError) -> i32 {
    match e.root() {
        VortexError::Domain(_)
        | VortexError::Config(_)
        | VortexError::Shape { .. }
        | VortexError::Constraint(_)
        | VortexError::Range(_) => EXIT_CONFIG,
        VortexError::Io(_) | VortexError::Parse(_) => EXIT_IO,
        _ => EXIT_NONCONVERGENCE,
    }
}

impl RunConfig {
    pub fn from_args(a: Args) -> Result<Self, CliError> {
        if a.k == 0 && a.method != Method::Shooting {
            return Err(CliError::config(
                "--k",
                "k = 0 is only allowed with --method shooting",
            ));
        }
        check(a.p.is_finite() && a.p > 2.0, "--p", "p must exceed 2")?;
        check(
            a.lambda.is_finite() && a.lambda > 0.0,
            "--lambda",
            "lambda must be positive",
        )?;
        for (flag, v) in [("--eps-start", a.eps_start), ("--eps-end", a.eps_end)] {
            check(v > 0.0 && v < 1.0, flag, "eps must lie in (0, 1)")?;
        }
        check(
            a.eps_end <= a.eps_start,
            "--eps-end",
            "must not exceed --eps-start",
        )?;
        check(
            a.eps_factor > 0.0 && a.eps_factor < 1.0,
            "--eps-factor",
            "factor must lie in (0, 1)",
        )?;
        check(
            a.rmax.is_finite() && a.rmax > 0.0,
            "--rmax",
            "rmax must be positive",
        )?;
        check(a.n >= 16, "--n", "at least 16 cells")?;
        check(
            a.gamma.is_finite() && a.gamma >= 1.0,
            "--gamma",
            "gamma must be at least 1",
        )?;
        if a.method == Method::NewtonOnly && a.seed_profile.is_none() {
            return Err(CliError::config(
                "--seed-profile",
                "required by --method newton-only",
            ));
        }
        let params = if a.k == 0 {
            ModelParams::oracle_mode(a.k, a.p, a.lambda, a.eps_end)
        } else {
            ModelParams::new(a.k, a.p, a.lambda, a.eps_end)
        }
        .map_err(|e| CliError::config("--k/--p/--lambda", e))?;
        let grid = RadialGrid::graded(a.rmax, a.n, a.gamma)
            .map_err(|e| CliError::config("--rmax/--n/--gamma", e))?;
        let schedule = EpsSchedule::geometric(a.eps_start, a.eps_end, a.eps_factor)
            .map_err(|e| CliError::config("--eps-start/--eps-end/--eps-factor", e))?;
        Ok(Self {
            params,
            grid,
            schedule,
            mpa: MpaConfig::default(),
            newton: NewtonConfig::default(),
            method: a.method,
            profile_out: a.profile_out,
            report_out: a.report_out,
            seed_profile: a.seed_profile,
        })
    }
}

fn check(ok: bool, flag: &str, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(flag, what))
    }
}

/// Parses `argv` (including the program name). Usage errors and
/// `--help`/`--version` come back as clap errors.
pub fn parse_args<I, T>(argv: I) -> Result<Result<RunConfig, CliError>, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Ok(RunConfig::from_args(Args::try_parse_from(argv)?))
}

/// Runs the configured pipeline and writes the requested outputs. The
/// report is written even when a stage fails to converge.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let t_total = Instant::now();
    let mut report = RunReport::new(cfg.method.name(), &cfg.params, &cfg.grid);
    let outcome = execute(cfg, &mut report);
    report.timings.total = t_total.elapsed().as_secs_f64();
    report.converged = outcome.is_ok();
    if let Some(path) = &cfg.report_out {
        report.write(path)?;
    }
    let final_state = outcome?;
    if let Some(path) = &cfg.profile_out {
        write_profile(&final_state, &cfg.grid, path)?;
    }
    Ok(report)
}

fn execute(cfg: &RunConfig, report: &mut RunReport) -> Result<vortex::State, CliError> {
    let seed = match &cfg.seed_profile {
        Some(path) => Some(Profile::read(path)?.on_grid(&cfg.grid, &cfg.params)?),
        None => None,
    };
    if cfg.method == Method::Shooting {
        let t = Instant::now();
        let sol = shoot_solve(
            &cfg.params,
            &ShootConfig::new(cfg.grid.rmax, TailCondition::Natural),
        )?;
        report.timings.oracle = t.elapsed().as_secs_f64();
        report.oracle = Some(oracle_only(&sol));
        let state = sol.on_grid(&cfg.grid)?;
        report.min_u = state.min_u();
        return Ok(state);
    }

    let solve = match cfg.method {
        Method::NewtonOnly => run_newton_continuation(
            &cfg.schedule,
            &cfg.params,
            &cfg.grid,
            seed.as_ref().expect("validated"),
            &cfg.newton,
        )?,
        _ => run_continuation(
            &cfg.schedule,
            &cfg.params,
            &cfg.grid,
            seed.as_ref().map(|s| s.u.as_slice()),
            &cfg.mpa,
            &cfg.newton,
        )?,
    };
    report.add_solve(&solve, &cfg.grid);
    let last = solve.last();
    let p_last = cfg.params.with_eps(last.eps)?;

    let t = Instant::now();
    let r_out = (cfg.grid.rmax / 4.0).clamp(1.0 + 1e-9, 10.0);
    report.checks = Some(solution_checks(
        &last.state,
        &p_last,
        &cfg.grid,
        &annulus_points(1.0, r_out, 100),
    )?);
    report.timings.checks = t.elapsed().as_secs_f64();

    if cfg.method == Method::CrossCheck {
        let t = Instant::now();
        let sol = shoot_solve(
            &p_last,
            &ShootConfig::new(cfg.grid.rmax, TailCondition::Natural),
        )?;
        report.oracle = Some(oracle_agreement(
            &last.state,
            &p_last,
            &cfg.grid,
            &sol,
            cfg.grid.rmax / 2.0,
        )?);
        report.timings.oracle = t.elapsed().as_secs_f64();
    }
    Ok(last.state.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&VortexError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&VortexError::Parse("x".into())), EXIT_IO);
        let stalled = VortexError::NonConvergence {
            iterations: 3,
            grad_norm: 1.0,
            best: Box::new(vortex::State::zeros(4)),
        };
        assert_eq!(exit_code(&stalled), EXIT_NONCONVERGENCE);
        let nested = VortexError::AtEps {
            eps: 0.1,
            source: Box::new(VortexError::Singular(3)),
        };
        assert_eq!(exit_code(&nested), EXIT_NONCONVERGENCE);
        assert_eq!(exit_code(&VortexError::Range("x".into())), EXIT_CONFIG);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::MpaNewton,
            Method::NewtonOnly,
            Method::Shooting,
            Method::CrossCheck,
        ] {
            assert_eq!(Method::from_str(m.name(), false).unwrap(), m);
        }
    }
}
