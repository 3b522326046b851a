use std::sync::OnceLock;

use vortex::continuation::{run_continuation, EpsSchedule, NewtonConfig, SolveReport};
use vortex::functional::energy;
use vortex::mountain_pass::{
    default_seed, find_endpoint, initial_path, mpa_iterate, ray_max, MpaConfig,
};
use vortex::report::{profile_csv, write_profile, Profile, RunReport};
use vortex::{ModelParams, RadialGrid};

fn setup() -> (ModelParams, RadialGrid) {
    (
        ModelParams::new(1, 4.0, 1.0, 1e-6).unwrap(),
        RadialGrid::graded(20.0, 400, 2.0).unwrap(),
    )
}

fn solve() -> &'static SolveReport {
    static CELL: OnceLock<SolveReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let (m, g) = setup();
        run_continuation(
            &EpsSchedule::default(),
            &m,
            &g,
            None,
            &MpaConfig::default(),
            &NewtonConfig::default(),
        )
        .unwrap()
    })
}

#[test]
fn mountain_pass_keeps_endpoints_and_positivity() {
    let (m, g) = setup();
    let m = m.with_eps(0.1).unwrap();
    let end = find_endpoint(&m, &g, &default_seed(&m, &g)).unwrap();
    let k = ray_max(&end, &m, &g).unwrap();
    let path = initial_path(&end, 31).unwrap();
    let first = path.nodes[0].clone();
    let out = mpa_iterate(path, &m, &g, &MpaConfig::default()).unwrap();
    assert_eq!(out.path.nodes[0], first);
    assert_eq!(out.path.nodes[30], end);
    assert!(out.candidate.min_u() >= -1e-10);
    assert!(out.level > 0.0 && out.level <= k);
    assert!(out.grad_norm <= 1e-5);
    assert!(*out.level_history.last().unwrap() <= k);
}

#[test]
fn continuation_records_are_converged() {
    let rep = solve();
    let cfg = NewtonConfig::default();
    assert_eq!(rep.records.len(), EpsSchedule::default().eps_values.len());
    for r in &rep.records {
        assert!(r.residual_sup <= cfg.residual_tol);
        assert!(r.grad_norm <= cfg.grad_tol);
        assert!(r.min_u >= 0.0);
        assert!(r.level > 0.0 && r.level <= rep.k_bound, "level {}", r.level);
    }
    for r in &rep.records[1..] {
        assert!(
            r.newton_iterations <= 20,
            "{} warm iterations",
            r.newton_iterations
        );
    }
}

#[test]
fn continuation_bounds_and_vanishing_penalty() {
    let rep = solve();
    let (_, g) = setup();
    let bound = 2.0 * 4.0 / (4.0 - 2.0) * rep.k_bound;
    for r in &rep.records {
        assert!(r.norm_h1r * r.norm_h1r <= bound);
        assert!(2.0 * r.energy.curl_b <= bound);
        assert!(r.norm_h1 >= 1.0);
        let lim = (2.0 * rep.k_bound).sqrt();
        let mut run = 0.0f64;
        for (b, x) in r.state.b.iter().zip(&g.r) {
            run = run.max(b.abs());
            assert!(run <= x * lim * (1.0 + 1e-12));
        }
    }
    assert!(rep
        .records
        .windows(2)
        .all(|w| w[1].energy.penalty < w[0].energy.penalty));
    assert!(rep.last().energy.penalty <= 1e-4);
    assert!(rep.proxy_gap.0 <= 1e-8 && rep.proxy_gap.1 <= 1e-8);
}

#[test]
fn report_sections_are_consistent() {
    let rep = solve();
    let (m, g) = setup();
    let mut run = RunReport::new("mpa+newton", &m, &g);
    run.add_solve(rep, &g);
    let text = run.to_toml().unwrap();
    let v: toml::Table = text.parse().unwrap();
    assert_eq!(v["bounds"]["level_le_k"].as_bool(), Some(true));
    assert!(v["min_u"].as_float().unwrap() >= 0.0);
    for e in v["eps"].as_array().unwrap() {
        let t = &e["energy"];
        let sum: f64 = ["dirichlet_u", "curl_b", "coupling", "penalty", "potential"]
            .iter()
            .map(|k| t[*k].as_float().unwrap())
            .sum();
        let total = t["total"].as_float().unwrap();
        assert!((sum - total).abs() <= 1e-12 * total.abs());
    }
}

#[test]
fn profile_round_trip_preserves_energy() {
    let rep = solve();
    let (m, g) = setup();
    let last = rep.last();
    let p = m.with_eps(last.eps).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    write_profile(&last.state, &g, &path).unwrap();
    let back = Profile::read(&path).unwrap();
    assert_eq!(back.r, g.r);
    let s = back.on_grid(&g, &p).unwrap();
    let e0 = energy(&last.state, &p, &g).unwrap().total;
    let e1 = energy(&s, &p, &g).unwrap().total;
    assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        profile_csv(&last.state, &g).unwrap()
    );
    let text = std::fs::read_to_string(&path).unwrap();
    let row0: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert_eq!((row0[0], row0[2]), (0.0, 0.0));
}

#[test]
fn seeded_profile_on_a_finer_grid() {
    let rep = solve();
    let (m, g) = setup();
    let fine = RadialGrid::graded(20.0, 800, 2.0).unwrap();
    let prof = Profile::parse(&profile_csv(&rep.last().state, &g).unwrap()).unwrap();
    let s = prof.on_grid(&fine, &m).unwrap();
    s.check(&m, &fine).unwrap();
    let out = vortex::continuation::newton_refine(&s, &m, &fine, &NewtonConfig::default()).unwrap();
    assert!(out.iterations <= 5);
    let wider = RadialGrid::graded(30.0, 400, 2.0).unwrap();
    assert!(prof.on_grid(&wider, &m).is_err());
}
