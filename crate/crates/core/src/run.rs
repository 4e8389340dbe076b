//! Reproducible run orchestration: data generation, the solve-and-verify
//! pipeline, the tree-label report and the convolution benchmark.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{
    check_contraction, check_envelope, check_trajectory_envelope, contraction_ratio,
    uniqueness_compare, BoundReport,
};
use crate::combinatorics::{
    composition_bound, enumerate_labels, factorial_comp_sum, label_weight_sum, weights,
    MAX_COMPOSITION_PARTS, MAX_WEIGHT_SUM_LEVEL,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{
    ode_reference_solve, picard_fixed_point, picard_run, PicardDiagnostics, TimeGrid, Trajectory,
};
use crate::io::{field_to_csv, sidecar_to_json, write_trajectory, FieldSidecar};
use crate::lattice::{
    ball, CoefficientField, DecayEnvelope, FrequencySystem, ModeTable, MultiIndex, C64,
};
use crate::synthesis::{
    residual_richardson, residual_roundoff_floor, spectral_residual, ResidualProfile,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stream id for mode `n`: a SplitMix64 fold of its components, so every mode
/// owns an independent ChaCha stream under the run seed.
fn mode_stream(n: &MultiIndex) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    n.components()
        .iter()
        .fold(mix(n.nu() as u64), |h, &c| mix(h ^ (c as u32 as u64)))
}

/// Draws `(ρ, θ, ρ′, θ′)` for mode `n`.
fn draws(seed: u64, n: &MultiIndex) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode_stream(n));
    [
        rng.random::<f64>(),
        rng.random::<f64>() * TAU,
        rng.random::<f64>(),
        rng.random::<f64>() * TAU,
    ]
}

/// Random initial data obeying `|c(n)| ≤ B·e^{−κ|n|/2}` and
/// `|c′(n)| ≤ B|ω|·e^{−κ|n|/2}`, keyed per mode by `(seed, n)`.
///
/// With `real_data`, only lexicographically positive modes are drawn, the
/// negative ones are their conjugates and the zero mode is real.
pub fn gen_init(config: &RunConfig) -> Result<(CoefficientField, CoefficientField)> {
    config.validate()?;
    let (nu, radius) = (config.nu, config.radius);
    let omega_l1: f64 = config.omega.iter().map(|w| w.abs()).sum();
    let mut c = CoefficientField::zeros(nu, radius);
    let mut cp = CoefficientField::zeros(nu, radius);
    if config.b == 0.0 {
        return Ok((c, cp));
    }
    for n in ball(nu, radius) {
        let amp = config.b * (-config.kappa * n.l1_norm() as f64 / 2.0).exp();
        if config.real_data {
            if n.is_zero() {
                let [r, th, rp, thp] = draws(config.seed, &n);
                c.set(n.clone(), C64::new(amp * r * th.cos(), 0.0))?;
                cp.set(n, C64::new(amp * omega_l1 * rp * thp.cos(), 0.0))?;
                continue;
            }
            if !n.is_lex_positive() {
                continue;
            }
            let [r, th, rp, thp] = draws(config.seed, &n);
            let v = C64::from_polar(amp * r, th);
            let vp = C64::from_polar(amp * omega_l1 * rp, thp);
            c.set(n.neg(), v.conj())?;
            cp.set(n.neg(), vp.conj())?;
            c.set(n.clone(), v)?;
            cp.set(n, vp)?;
        } else {
            let [r, th, rp, thp] = draws(config.seed, &n);
            c.set(n.clone(), C64::from_polar(amp * r, th))?;
            cp.set(n, C64::from_polar(amp * omega_l1 * rp, thp))?;
        }
    }
    Ok((c, cp))
}

/// Writes `c0.csv`, `c0p.csv` and `field.json` into `dir`.
pub fn write_init(
    dir: &Path,
    config: &RunConfig,
    c: &CoefficientField,
    cp: &CoefficientField,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let sidecar = FieldSidecar {
        nu: config.nu,
        omega: config.omega.clone(),
        radius: config.radius,
    };
    let files = [
        ("c0.csv", field_to_csv(c)?),
        ("c0p.csv", field_to_csv(cp)?),
        ("field.json", sidecar_to_json(&sidecar)?),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text)?;
        out.push(p);
    }
    Ok(out)
}

/// Everything a run reports, except wall-clock timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub config_hash: String,
    pub t_end: f64,
    pub resonance_floor: f64,
    pub contraction_rate: f64,
    pub picard: PicardDiagnostics,
    pub residual_max: f64,
    pub reports: Vec<BoundReport>,
    pub files: Vec<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub phases: Vec<(String, f64)>,
}

impl Timings {
    fn record<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.phases
            .push((phase.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// In-memory products of the solve pipeline.
pub struct Solution {
    pub config: RunConfig,
    pub fs: FrequencySystem,
    pub env: DecayEnvelope,
    pub grid: TimeGrid,
    pub c0: CoefficientField,
    pub c0p: CoefficientField,
    pub picard: Trajectory,
    pub diagnostics: PicardDiagnostics,
    pub reference: Trajectory,
    pub residual: ResidualProfile,
    pub reports: Vec<BoundReport>,
}

impl Solution {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

fn flag_report(name: &str, ok: bool, detail: Option<String>) -> BoundReport {
    BoundReport {
        name: name.into(),
        threshold: 0.0,
        worst: detail,
        margin: if ok { 0.0 } else { -1.0 },
        pass: ok,
    }
}

/// Largest deviation of the zero mode from `c(0) + t·c′(0)`.
fn zero_mode_report(
    traj: &Trajectory,
    c0: &CoefficientField,
    c0p: &CoefficientField,
) -> BoundReport {
    let zero = MultiIndex::zero(c0.nu());
    let (a, b) = (c0.get(&zero), c0p.get(&zero));
    let mut dev = 0.0f64;
    for (j, t) in traj.grid().nodes().enumerate() {
        dev = dev.max((traj.value(j, &zero) - (a + b * t)).norm());
    }
    let tol = 1e-14 * (1.0 + a.norm() + b.norm());
    BoundReport {
        name: "zero_mode_linear".into(),
        threshold: tol,
        worst: Some(format!("max deviation {dev:e}")),
        margin: tol - dev,
        pass: dev <= tol,
    }
}

fn initial_condition_report(traj: &Trajectory, c0: &CoefficientField) -> BoundReport {
    let ok = traj.snapshot(0) == *c0;
    flag_report("initial_condition", ok, None)
}

/// gen_init → Picard → RK4 → bound checks → residual, all in memory.
pub fn solve(config: &RunConfig, timings: &mut Timings) -> Result<Solution> {
    config.validate()?;
    let fs = config.frequency_system().map_err(|e| e.in_phase("setup"))?;
    let env = config.envelope().map_err(|e| e.in_phase("setup"))?;
    let grid = config.grid().map_err(|e| e.in_phase("setup"))?;
    let opts = config.picard_options().map_err(|e| e.in_phase("setup"))?;
    let (c0, c0p) = timings
        .record("gen_init", || gen_init(config))
        .map_err(|e| e.in_phase("gen_init"))?;
    let (picard, diagnostics) = timings
        .record("picard", || picard_run(&c0, &c0p, grid, &fs, &opts))
        .map_err(|e| e.in_phase("picard"))?;
    let reference = timings
        .record("rk4", || {
            ode_reference_solve(&c0, &c0p, grid, &fs, config.rk4_substeps)
        })
        .map_err(|e| e.in_phase("rk4"))?;

    let mut reports = Vec::new();
    let checks = || -> Result<()> {
        let mut r = check_envelope(&c0, &env, 1.0, 2.0)?;
        r.name = format!("initial_{}", r.name);
        reports.push(r);
        let env_p = DecayEnvelope::new(env.b() * fs.omega_l1(), env.kappa())?;
        let mut r = check_envelope(&c0p, &env_p, 1.0, 2.0)?;
        r.name = format!("initial_velocity_{}", r.name);
        reports.push(r);
        reports.push(flag_report(
            "picard_converged",
            diagnostics.converged,
            Some(format!(
                "{} iterations, last δ = {:e}",
                diagnostics.iterations,
                diagnostics.last_delta()
            )),
        ));
        reports.push(initial_condition_report(&picard, &c0));
        reports.push(zero_mode_report(&picard, &c0, &c0p));
        reports.push(check_trajectory_envelope(&picard, &env, 2.0, 4.0)?);
        reports.push(check_contraction(&diagnostics, &env, &fs, &grid));
        reports.push(uniqueness_compare(
            &picard,
            &reference,
            grid.t_end(),
            config.agreement_tol,
        )?);
        Ok(())
    };
    timings
        .record("bounds", checks)
        .map_err(|e| e.in_phase("bounds"))?;

    // The residual is measured on the discrete fixed point so that the Picard
    // stopping tolerance does not set a floor under the O(h²) term.
    let residual = timings
        .record("residual", || {
            let (fixed, _) = picard_fixed_point(&c0, &c0p, grid, &fs, config.kmax)?;
            let fine = spectral_residual(&fixed)?;
            if grid.intervals() % 4 == 0 && grid.intervals() >= 8 {
                let coarse_grid = TimeGrid::new(grid.t_end(), grid.intervals() / 2)?;
                let (coarse, _) = picard_fixed_point(&c0, &c0p, coarse_grid, &fs, config.kmax)?;
                let coarse = spectral_residual(&coarse)?;
                reports.push(residual_richardson(
                    &coarse,
                    &fine,
                    residual_roundoff_floor(&fine),
                )?);
            } else {
                reports.push(flag_report(
                    "residual_second_order",
                    true,
                    Some("skipped: J/2 is not an even grid with at least 4 intervals".into()),
                ));
            }
            Ok(fine)
        })
        .map_err(|e| e.in_phase("residual"))?;

    Ok(Solution {
        config: config.clone(),
        fs,
        env,
        grid,
        c0,
        c0p,
        picard,
        diagnostics,
        reference,
        residual,
        reports,
    })
}

fn relative(out: &Path, p: &Path) -> String {
    p.strip_prefix(out)
        .unwrap_or(p)
        .to_string_lossy()
        .replace('\\', "/")
}

pub fn residual_csv(profile: &ResidualProfile) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "max_residual"])?;
    for (t, r) in profile.times.iter().zip(&profile.max_abs) {
        w.write_record([format!("{t:e}"), format!("{r:e}")])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Runs [`solve`] and writes every artifact plus `manifest.json` and
/// `timings.json` under `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<(RunManifest, Timings)> {
    let mut timings = Timings::default();
    let sol = solve(config, &mut timings)?;
    let write = || -> Result<Vec<PathBuf>> {
        let mut files = write_init(out, config, &sol.c0, &sol.c0p)?;
        files.extend(write_trajectory(
            &out.join("trajectory"),
            &sol.picard,
            &sol.diagnostics,
            config.tol,
            config.kmax,
        )?);
        let rpath = out.join("residual.csv");
        fs::write(&rpath, residual_csv(&sol.residual)?)?;
        files.push(rpath);
        let rep = out.join("reports.json");
        fs::write(&rep, serde_json::to_string_pretty(&sol.reports)?)?;
        files.push(rep);
        Ok(files)
    };
    let files = timings
        .record("export", write)
        .map_err(|e| e.in_phase("export"))?;
    let manifest = RunManifest {
        config: config.resolved()?,
        version: VERSION.to_string(),
        config_hash: config.hash()?,
        t_end: sol.grid.t_end(),
        resonance_floor: sol.fs.resonance_floor(),
        contraction_rate: contraction_ratio(&sol.env, &sol.fs, sol.grid.t_end()),
        picard: sol.diagnostics.clone(),
        residual_max: sol.residual.max(),
        pass: sol.pass(),
        reports: sol.reports,
        files: files.iter().map(|p| relative(out, p)).collect(),
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    fs::write(
        out.join("timings.json"),
        serde_json::to_string_pretty(&timings)?,
    )?;
    Ok((manifest, timings))
}

/// Label counts, the weight table of `𝒟^(3)`, exact label weight sums on a
/// 16-point grid in `(0, 1/16]` and the factorial composition sums.
pub fn trees_report() -> Result<Value> {
    let counts: Vec<Value> = (1..=4)
        .map(|k| Ok(json!({ "k": k, "count": enumerate_labels(k)?.len() })))
        .collect::<Result<_>>()?;
    let table: Vec<Value> = enumerate_labels(3)?
        .iter()
        .map(|g| {
            let w = weights(g);
            json!({ "label": g.to_string(), "sigma": w.sigma, "ell": w.ell, "hbar": w.hbar, "frak_f": w.frak_f })
        })
        .collect();
    let mut weight_sums = Vec::new();
    let mut weight_pass = true;
    let two = BigRational::from_integer(BigInt::from(2));
    for k in 1..=MAX_WEIGHT_SUM_LEVEL {
        for i in 1..=16i64 {
            let t = BigRational::new(BigInt::from(i), BigInt::from(256));
            let v = label_weight_sum(k, &t)?;
            let ok = v <= two;
            weight_pass &= ok;
            weight_sums
                .push(json!({ "k": k, "t": t.to_string(), "value": v.to_string(), "le_2": ok }));
        }
    }
    let mut comps = Vec::new();
    let mut comp_pass = true;
    for n in 1..=MAX_COMPOSITION_PARTS {
        for l in 1..=n {
            let v = factorial_comp_sum(n, l)?;
            let bound = composition_bound(n, l);
            let ok = v < bound;
            comp_pass &= ok;
            comps.push(json!({ "N": n, "l": l, "value": v.to_string(), "bound": bound.to_string(), "lt_bound": ok }));
        }
    }
    Ok(json!({
        "counts": counts,
        "weights_level3": table,
        "label_weight_sums": { "pass": weight_pass, "values": weight_sums },
        "factorial_composition_sums": { "pass": comp_pass, "values": comps },
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    #[serde(rename = "N")]
    pub radius: u32,
    pub modes: usize,
    pub ns_per_op: f64,
}

pub const BENCH_RADII: [u32; 5] = [4, 6, 8, 10, 12];

/// Times the dense weighted self-convolution for each radius, using the
/// frequency vector and seed of `config`. Each point runs for at least
/// `min_seconds`.
pub fn bench(config: &RunConfig, radii: &[u32], min_seconds: f64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &radius in radii {
        let mut cfg = config.clone();
        cfg.radius = radius;
        cfg.validate()?;
        let fs = cfg.frequency_system()?;
        let modes = ModeTable::new(&fs);
        let (c, _) = gen_init(&cfg)?;
        let dense = modes.ball.dense(&c)?;
        let mut out = vec![C64::default(); dense.len()];
        let mut reps = 0u64;
        let start = Instant::now();
        loop {
            modes
                .ball
                .weighted_self_convolve(&modes.dots, &dense, &mut out);
            reps += 1;
            if start.elapsed().as_secs_f64() >= min_seconds {
                break;
            }
        }
        std::hint::black_box(&out);
        rows.push(BenchRow {
            radius,
            modes: dense.len(),
            ns_per_op: start.elapsed().as_nanos() as f64 / reps as f64,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "modes", "ns_per_op"])?;
    for r in rows {
        w.write_record([
            r.radius.to_string(),
            r.modes.to_string(),
            format!("{:.1}", r.ns_per_op),
        ])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))
}
