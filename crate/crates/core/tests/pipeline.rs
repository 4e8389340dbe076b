use std::fs;

use gbq::bounds::{check_trajectory_envelope, existence_time, uniqueness_compare};
use gbq::config::RunConfig;
use gbq::evolution::{
    linear_flow, ode_reference_solve, ode_reference_solve_linear, picard_iterates, picard_run,
    picard_solve, time_derivative_at_zero, PicardOptions, TimeGrid,
};
use gbq::io::read_trajectory;
use gbq::run::{gen_init, run, solve, Timings};
use gbq::synthesis::{evaluate_u, spectral_residual};
use gbq::{CoefficientField, DecayEnvelope, Error, FrequencySystem, MultiIndex, C64};

fn cfg(overrides: &[&str]) -> RunConfig {
    RunConfig::from_json_with_overrides("", overrides).unwrap()
}

#[test]
fn picard_limit_matches_rk4_on_the_desk_configuration() {
    let c = cfg(&[]);
    let (c0, c0p) = gen_init(&c).unwrap();
    let fs = c.frequency_system().unwrap();
    let grid = c.grid().unwrap();
    let (p, diag) = picard_solve(&c0, &c0p, grid, &fs, &c.picard_options().unwrap()).unwrap();
    assert!(diag.converged);
    let r = ode_reference_solve(&c0, &c0p, grid, &fs, 4).unwrap();
    let rep = uniqueness_compare(&p, &r, grid.t_end(), 1e-9).unwrap();
    assert!(rep.pass, "{rep:?}");
}

/// With zero nonlinearity the RK4 reference must reproduce the closed-form
/// linear flow to RK4 accuracy over a long window.
#[test]
fn linear_rk4_tracks_the_closed_form_flow() {
    let fs = FrequencySystem::new(vec![1.0], 3).unwrap();
    let c0 = CoefficientField::from_entries(1, 3, [(MultiIndex::from([2]), C64::new(0.3, -0.1))])
        .unwrap();
    let c0p = CoefficientField::from_entries(1, 3, [(MultiIndex::from([1]), C64::new(0.0, 0.4))])
        .unwrap();
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let r = ode_reference_solve_linear(&c0, &c0p, grid, &fs, 8).unwrap();
    for (j, t) in grid.nodes().enumerate() {
        let exact = linear_flow(&c0, &c0p, t, &fs).unwrap();
        assert!(r.snapshot(j).sup_distance(&exact) < 1e-9, "t={t}");
    }
}

#[test]
fn picard_iterates_stay_inside_the_doubled_envelope() {
    let c = cfg(&["kappa=0.5", "B=0.5", "seed=3"]);
    let (c0, c0p) = gen_init(&c).unwrap();
    let fs = c.frequency_system().unwrap();
    let env = DecayEnvelope::new(0.5, 0.5).unwrap();
    for it in picard_iterates(&c0, &c0p, c.grid().unwrap(), &fs, 6).unwrap() {
        assert!(check_trajectory_envelope(&it, &env, 2.0, 4.0).unwrap().pass);
    }
}

#[test]
fn initial_velocity_is_recovered_by_one_sided_difference() {
    let c = cfg(&["J=256"]);
    let sol = solve(&c, &mut Timings::default()).unwrap();
    let d = time_derivative_at_zero(&sol.picard);
    assert!(d.sup_distance(&sol.c0p) < 1e-6 * (1.0 + sol.c0p.max_abs()));
}

#[test]
fn synthesized_field_is_real_for_real_data() {
    let c = cfg(&["nu=2", "omega=[1,1.4142135623730951]", "N=3"]);
    let sol = solve(&c, &mut Timings::default()).unwrap();
    for j in [0, 64, 128] {
        for x in [0.0, 0.7, -3.1] {
            let u = evaluate_u(&sol.picard.snapshot(j), x, &sol.fs);
            assert!(u.im.abs() < 1e-12 * (1.0 + u.re.abs()), "{u}");
        }
    }
}

#[test]
fn zero_data_stays_zero() {
    let fs = FrequencySystem::new(vec![1.0], 4).unwrap();
    let z = CoefficientField::zeros(1, 4);
    let grid = TimeGrid::new(1e-3, 16).unwrap();
    let (p, diag) = picard_run(&z, &z, grid, &fs, &PicardOptions::default()).unwrap();
    assert_eq!(diag.deltas, vec![0.0]);
    assert!(p.snapshots().iter().all(CoefficientField::is_empty));
    let r = spectral_residual(&p).unwrap();
    assert_eq!(r.max(), 0.0);
}

#[test]
fn run_writes_a_reproducible_artifact_set() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = cfg(&["J=32", "N=4"]);
    let (m1, _) = run(&c, a.path()).unwrap();
    let (m2, _) = run(&c, b.path()).unwrap();
    assert!(m1.pass, "{:?}", m1.reports);
    assert_eq!(m1, m2);
    for f in &m1.files {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        fs::read(a.path().join("manifest.json")).unwrap(),
        fs::read(b.path().join("manifest.json")).unwrap()
    );
    let (traj, manifest) = read_trajectory(&a.path().join("trajectory")).unwrap();
    assert_eq!(manifest.intervals, 32);
    assert_eq!(manifest.deltas, m1.picard.deltas);
    let sol = solve(&c, &mut Timings::default()).unwrap();
    assert_eq!(traj.snapshots(), sol.picard.snapshots());
}

#[test]
fn manifest_echoes_the_resolved_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(&["J=16"]);
    let (m, _) = run(&c, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["t_end"].as_f64().unwrap(), m.t_end);
    assert_eq!(v["config_hash"].as_str().unwrap(), c.hash().unwrap());
    let env = c.envelope().unwrap();
    assert_eq!(
        m.t_end,
        existence_time(&env, &c.frequency_system().unwrap())
    );
    assert!(dir.path().join("timings.json").exists());
    let replay = RunConfig::from_json(&serde_json::to_string(&v["config"]).unwrap()).unwrap();
    assert_eq!(replay.hash().unwrap(), m.config_hash);
}

#[test]
fn single_iterate_is_reported_as_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = run(&cfg(&["kmax=1", "J=16"]), dir.path()).unwrap();
    assert!(!m.picard.converged);
    assert!(!m.pass);
    let r = m
        .reports
        .iter()
        .find(|r| r.name == "picard_converged")
        .unwrap();
    assert!(!r.pass);
}

#[test]
fn weaker_threshold_lengthens_the_window_and_records_the_contraction_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let base = cfg(&[]).resolved_t_end().unwrap();
    let (m, _) = run(&cfg(&["threshold_divisor=24"]), dir.path()).unwrap();
    assert!((m.t_end / base - 8.0).abs() < 1e-12);
    let r = m.reports.iter().find(|r| r.name == "contraction").unwrap();
    assert_eq!(r.pass, m.contraction_rate < 1.0 && r.margin >= 0.0);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn errors_carry_their_phase() {
    let beyond = cfg(&["t_end=0.01"]);
    match solve(&beyond, &mut Timings::default()) {
        Err(Error::Phase { phase, source }) => {
            assert_eq!(phase, "picard");
            assert!(matches!(*source, Error::BeyondExistence { .. }));
        }
        other => panic!("unexpected {:?}", other.map(|s| s.pass())),
    }
    let coarse = cfg(&["t_end=1", "J=2", "allow_beyond_existence=true"]);
    match solve(&coarse, &mut Timings::default()) {
        Err(Error::Phase { phase, source }) => {
            assert_eq!(phase, "picard");
            assert!(matches!(*source, Error::UnderResolved { .. }));
        }
        other => panic!("unexpected {:?}", other.map(|s| s.pass())),
    }
    assert!(matches!(
        solve(&cfg(&["B=0"]), &mut Timings::default()),
        Err(Error::Phase { phase: "setup", .. })
    ));
}
