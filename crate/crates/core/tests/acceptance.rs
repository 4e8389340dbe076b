//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! budget. Exits non-zero when any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gbq::bounds::{check_contraction, check_trajectory_envelope, uniqueness_compare};
use gbq::combinatorics::{
    composition_bound, enumerate_labels, factorial_comp_sum, label_weight_sum, lattice_exp_sum,
    majorant_counted_bound_holds, majorant_sides, tree_expand_evaluate, weights,
};
use gbq::config::RunConfig;
use gbq::evolution::{ode_reference_solve, picard_iterates, picard_run, TimeGrid};
use gbq::lattice::ball;
use gbq::run::{gen_init, run, solve, Timings};
use gbq::MultiIndex;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg(overrides: &[&str]) -> RunConfig {
    RunConfig::from_json_with_overrides("", overrides).expect("valid config")
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn tree_counts() -> Outcome {
    let counts: Vec<usize> = (1..=4)
        .map(|k| enumerate_labels(k).unwrap().len())
        .collect();
    outcome(counts == [2, 6, 38, 1446], format!("|D^(k)| = {counts:?}"))
}

fn weight_identity() -> Outcome {
    let labels = enumerate_labels(4).unwrap();
    let bad: Vec<String> = labels
        .iter()
        .filter(|g| {
            let w = weights(g);
            !(w.sigma == w.ell + 1 && w.hbar <= w.sigma && w.frak_f >= 1)
        })
        .map(ToString::to_string)
        .collect();
    outcome(
        bad.is_empty(),
        format!("{} labels checked, {} violations", labels.len(), bad.len()),
    )
}

fn label_weight_sums() -> Outcome {
    let two = rat(2, 1);
    let mut failures = Vec::new();
    let mut worst = rat(0, 1);
    for k in 1..=3 {
        for i in 1..=16 {
            let t = rat(i, 256);
            let v = label_weight_sum(k, &t).unwrap();
            let expected = match k {
                1 => Some(rat(1, 1)),
                2 => Some(rat(1, 1) + rat(2, 1) * &t),
                _ => None,
            };
            if v > two || expected.as_ref().is_some_and(|e| *e != v) {
                failures.push(format!("k={k} t={t}: {v}"));
            }
            if v > worst {
                worst = v;
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("max value {worst}")
    } else {
        format!(
            "{} of 48 points off; e.g. {}; max value {worst}",
            failures.len(),
            failures[..failures.len().min(3)].join(", ")
        )
    };
    outcome(failures.is_empty(), detail)
}

fn factorial_compositions() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 1..=8 {
        for l in 1..=n {
            checked += 1;
            if factorial_comp_sum(n, l).unwrap() >= composition_bound(n, l) {
                bad.push((n, l));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} (N,l) pairs, violations {bad:?}"),
    )
}

fn majorant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let labels = enumerate_labels(3).unwrap();
    let mut tested = 0;
    let mut violations = 0;
    let mut counted_ok = true;
    let mut example = None;
    for g in &labels {
        for _ in 0..200 {
            let a: Vec<MultiIndex> = (0..g.sigma())
                .map(|_| MultiIndex::new(vec![rng.random_range(-5..=5)]))
                .collect();
            let (lhs, rhs) = majorant_sides(g, &a).unwrap();
            tested += 1;
            if lhs > rhs {
                violations += 1;
                if example.is_none() {
                    let m: Vec<i32> = a.iter().map(|x| x.components()[0]).collect();
                    example = Some(format!("γ={g}, m={m:?}: P={lhs} > {rhs}"));
                }
            }
            counted_ok &= majorant_counted_bound_holds(g, &a).unwrap();
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations}/{tested} violations{}; multiplicity-counted form holds on all: {counted_ok}",
            example.map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    )
}

fn lattice_sums() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for i in 1..=50 {
        let kappa = i as f64 / 50.0;
        let s = lattice_exp_sum(kappa, 1).unwrap();
        let direct = 1.0 + 2.0 * (-kappa / 4.0).exp() / (1.0 - (-kappa / 4.0).exp());
        ok &= (s.value - direct).abs() <= 1e-12 * direct;
        ok &= direct + 1e-12 < 24.0 / kappa;
        worst = worst.min(24.0 / kappa - direct);
    }
    outcome(ok, format!("50 κ values, smallest gap {worst:.6}"))
}

fn tree_expansion() -> Outcome {
    let c = cfg(&["N=2"]);
    let (c0, c0p) = gen_init(&c).unwrap();
    let fs = c.frequency_system().unwrap();
    let t = c.existence_time().unwrap() / 2.0;
    let grid = TimeGrid::new(t, 64).unwrap();
    let iterates = picard_iterates(&c0, &c0p, grid, &fs, 3).unwrap();
    let mut errs = [0.0f64; 3];
    for k in 1..=3 {
        for n in ball(1, 2) {
            let tree = tree_expand_evaluate(k, &n, t, &c0, &c0p, &fs, 12).unwrap();
            let pic = iterates[k - 1].value(grid.intervals(), &n);
            errs[k - 1] = errs[k - 1].max((tree - pic).norm());
        }
    }
    let pass = errs[0] <= 1e-12 && errs[1] <= 1e-6 && errs[2] <= 1e-6;
    outcome(
        pass,
        format!("max |tree − Picard| for k=1,2,3: {}", sci(&errs)),
    )
}

fn envelope() -> Outcome {
    let c = cfg(&[]);
    let (c0, c0p) = gen_init(&c).unwrap();
    let fs = c.frequency_system().unwrap();
    let env = c.envelope().unwrap();
    let its = picard_iterates(&c0, &c0p, c.grid().unwrap(), &fs, 20).unwrap();
    let mut worst = f64::INFINITY;
    let mut direct_ok = true;
    for it in &its {
        let r = check_trajectory_envelope(it, &env, 2.0, 4.0).unwrap();
        worst = worst.min(r.margin);
        direct_ok &= r.pass;
        for j in 0..it.grid().len() {
            for (n, v) in it.snapshot(j).iter() {
                direct_ok &= v.norm() <= 2.0 * (-(n.l1_norm() as f64) / 4.0).exp() + 1e-12;
            }
        }
    }
    outcome(
        direct_ok,
        format!("{} iterates, smallest margin {worst:.4}", its.len()),
    )
}

fn contraction() -> Outcome {
    let c = cfg(&[]);
    let (c0, c0p) = gen_init(&c).unwrap();
    let fs = c.frequency_system().unwrap();
    let env = c.envelope().unwrap();
    let grid = c.grid().unwrap();
    let t = grid.t_end();
    let (b, kappa, nu) = (env.b(), env.kappa(), fs.nu() as i32);
    let rate = 8.0 * std::f64::consts::E * 96f64.powi(nu) * kappa.powi(-nu) * fs.omega_l1() * t * b;
    let its = picard_iterates(&c0, &c0p, grid, &fs, 21).unwrap();
    let deltas: Vec<f64> = its
        .windows(2)
        .map(|w| w[1].sup_distance(&w[0]).unwrap())
        .collect();
    let mut ok = rate < 1.0;
    for (i, &d) in deltas.iter().enumerate() {
        let k = (i + 1) as i32;
        let bound = b.powi(k + 1)
            * (8.0 * std::f64::consts::E).powi(k)
            * 96f64.powi(k * nu)
            * (kappa.powi(-nu) * fs.omega_l1() * t).powi(k);
        ok &= d <= bound;
    }
    let floor = 1e-13 * b;
    let mut max_ratio = 0.0f64;
    for w in deltas.windows(2) {
        if w[0] > floor {
            max_ratio = max_ratio.max(w[1] / w[0]);
        }
    }
    ok &= max_ratio <= rate;
    let (_, diag) = picard_run(&c0, &c0p, grid, &fs, &c.picard_options().unwrap()).unwrap();
    let report = check_contraction(&diag, &env, &fs, &grid);
    ok &= report.pass;
    outcome(
        ok,
        format!(
            "r = {rate:.4}, δ_1..δ_3 = {}, max ratio above floor {max_ratio:.3e}",
            sci(&deltas[..3])
        ),
    )
}

fn existence_uniqueness() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for over in [
        vec!["J=128"],
        vec!["J=128", "nu=2", "omega=[1,1.4142135623730951]", "N=4"],
    ] {
        let c = cfg(&over);
        let (c0, c0p) = gen_init(&c).unwrap();
        let fs = c.frequency_system().unwrap();
        let grid = c.grid().unwrap();
        let (p, diag) = picard_run(&c0, &c0p, grid, &fs, &c.picard_options().unwrap()).unwrap();
        let r = ode_reference_solve(&c0, &c0p, grid, &fs, c.rk4_substeps).unwrap();
        let rep = uniqueness_compare(&p, &r, grid.t_end(), 1e-6).unwrap();
        let zero = MultiIndex::zero(fs.nu());
        let (a, b) = (c0.get(&zero), c0p.get(&zero));
        let zero_exact = grid
            .nodes()
            .enumerate()
            .all(|(j, t)| p.value(j, &zero) == a + b * t);
        ok &= diag.converged && rep.pass && zero_exact;
        parts.push(format!(
            "ν={}: sup|Picard − RK4| = {:.2e}, zero mode exact: {zero_exact}",
            fs.nu(),
            1e-6 - rep.margin
        ));
    }
    outcome(ok, parts.join("; "))
}

fn residual() -> Outcome {
    let r: Vec<f64> = [128usize, 256, 512]
        .iter()
        .map(|j| {
            let c = cfg(&[&format!("J={j}")]);
            solve(&c, &mut Timings::default()).unwrap().residual.max()
        })
        .collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let ok = ratios.iter().all(|q| (3.5..=4.5).contains(q)) && r[2] <= 1e-5;
    outcome(
        ok,
        format!(
            "max residual J=128,256,512: {}; ratios {ratios:.4?}",
            sci(&r)
        ),
    )
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = cfg(&[]);
    let (m1, _) = run(&c, a.path()).unwrap();
    let (m2, _) = run(&c, b.path()).unwrap();
    let mut names = m1.files.clone();
    names.push("manifest.json".into());
    let identical = m1 == m2
        && names
            .iter()
            .all(|f| fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap());
    outcome(
        identical,
        format!("{} files compared byte for byte", names.len()),
    )
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "tree label counts", 1, tree_counts),
    (2, "weight identity on level 4", 1, weight_identity),
    (3, "label weight sums ≤ 2 (exact)", 30, label_weight_sums),
    (
        4,
        "factorial composition sums < (2N)^l",
        30,
        factorial_compositions,
    ),
    (5, "majorant on level 3 × 200 assignments", 60, majorant),
    (6, "geometric lattice sum ≤ 24/κ", 1, lattice_sums),
    (
        7,
        "tree expansion equals Picard iterates",
        300,
        tree_expansion,
    ),
    (8, "iterate envelope 2·e^{−|n|/4}", 30, envelope),
    (9, "Picard contraction", 30, contraction),
    (
        10,
        "Picard/RK4 agreement and zero mode",
        300,
        existence_uniqueness,
    ),
    (11, "residual second order, ≤ 1e−5 at J=512", 120, residual),
    (12, "bitwise determinism", 30, determinism),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (id, name, budget, f) in CRITERIA {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_budget, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id:>2}. {name}: {detail} ({:.2}s / {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        CRITERIA.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
