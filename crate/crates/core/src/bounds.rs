//! Quantitative estimates as executable checks: existence and uniqueness
//! times, decay envelopes and the geometric contraction of Picard deltas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{PicardDiagnostics, TimeGrid, Trajectory};
use crate::lattice::{ball, CoefficientField, DecayEnvelope, FrequencySystem};

/// Absolute slack added to every analytic bound to absorb round-off.
pub const ABS_TOL: f64 = 1e-12;

/// A ratio `δ_{k+1}/δ_k` is checked only when `δ_k` exceeds this multiple of
/// `B`; below it the denominator is round-off.
const RATIO_FLOOR: f64 = 1e-13;

/// Verdict of one check. `margin` is the smallest `bound − value` seen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub threshold: f64,
    pub worst: Option<String>,
    pub margin: f64,
    pub pass: bool,
}

impl BoundReport {
    fn from_margin(name: &str, threshold: f64, margin: f64, worst: Option<String>) -> Self {
        BoundReport {
            name: name.to_string(),
            threshold,
            worst,
            margin,
            pass: margin >= -ABS_TOL,
        }
    }
}

pub const THRESHOLD_DIVISORS: [u32; 4] = [24, 48, 96, 192];
pub const DEFAULT_THRESHOLD_DIVISOR: u32 = 192;

pub fn check_divisor(divisor: u32) -> Result<()> {
    if THRESHOLD_DIVISORS.contains(&divisor) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "threshold_divisor",
            detail: format!("{divisor} not in {THRESHOLD_DIVISORS:?}"),
        })
    }
}

/// `t₀ = κ^ν / (32·B·192^ν·|ω|)`.
pub fn existence_time(env: &DecayEnvelope, fs: &FrequencySystem) -> f64 {
    existence_time_with_divisor(env, fs, DEFAULT_THRESHOLD_DIVISOR)
        .expect("default divisor is valid")
}

/// `κ^ν / (32·B·d^ν·|ω|)` for `d ∈ {24, 48, 96, 192}`.
pub fn existence_time_with_divisor(
    env: &DecayEnvelope,
    fs: &FrequencySystem,
    divisor: u32,
) -> Result<f64> {
    check_divisor(divisor)?;
    let nu = fs.nu() as i32;
    Ok(env.kappa().powi(nu) / (32.0 * env.b() * (divisor as f64).powi(nu) * fs.omega_l1()))
}

/// `t₁ = min(t₀, ρ^ν / (C₁·2^{ν+1}·288^ν·|ω|))`.
pub fn uniqueness_time(t0: f64, c1: f64, rho: f64, fs: &FrequencySystem) -> Result<f64> {
    for (what, v) in [("t0", t0), ("C1", c1), ("ρ", rho)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange {
                what,
                detail: format!("{v} is not positive"),
            });
        }
    }
    let nu = fs.nu() as i32;
    let second = rho.powi(nu) / (c1 * 2f64.powi(nu + 1) * 288f64.powi(nu) * fs.omega_l1());
    Ok(t0.min(second))
}

/// Geometric rate `r = 8e·96^ν·κ^{−ν}·|ω|·t_end·B`.
pub fn contraction_ratio(env: &DecayEnvelope, fs: &FrequencySystem, t_end: f64) -> f64 {
    let nu = fs.nu() as i32;
    8.0 * std::f64::consts::E
        * 96f64.powi(nu)
        * env.kappa().powi(-nu)
        * fs.omega_l1()
        * t_end
        * env.b()
}

fn envelope_bound(env: &DecayEnvelope, scale: f64, divisor: f64, norm: u32) -> f64 {
    scale * env.b() * (-env.kappa() * norm as f64 / divisor).exp()
}

fn check_params(scale: f64, divisor: f64) -> Result<()> {
    if !(scale > 0.0 && divisor > 0.0) {
        return Err(Error::OutOfRange {
            what: "envelope parameters",
            detail: format!("scale = {scale}, divisor = {divisor} must be positive"),
        });
    }
    Ok(())
}

/// `|c(n)| ≤ scale·B·exp(−κ|n|/divisor)` over the whole ball of the field.
pub fn check_envelope(
    field: &CoefficientField,
    env: &DecayEnvelope,
    scale: f64,
    divisor: f64,
) -> Result<BoundReport> {
    check_params(scale, divisor)?;
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for n in ball(field.nu(), field.radius()) {
        let m = envelope_bound(env, scale, divisor, n.l1_norm()) - field.get(&n).norm();
        if m < margin {
            margin = m;
            worst = Some(format!("n={:?}", n.components()));
        }
    }
    Ok(BoundReport::from_margin(
        &format!("envelope(scale={scale}, divisor={divisor})"),
        scale * env.b(),
        margin,
        worst,
    ))
}

/// [`check_envelope`] at every node of a trajectory.
pub fn check_trajectory_envelope(
    traj: &Trajectory,
    env: &DecayEnvelope,
    scale: f64,
    divisor: f64,
) -> Result<BoundReport> {
    check_params(scale, divisor)?;
    let modes = traj.modes();
    let bounds: Vec<f64> = modes
        .ball
        .points()
        .iter()
        .map(|n| envelope_bound(env, scale, divisor, n.l1_norm()))
        .collect();
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for j in 0..traj.grid().len() {
        for (i, v) in traj.dense(j).iter().enumerate() {
            let m = bounds[i] - v.norm();
            if m < margin {
                margin = m;
                worst = Some(format!(
                    "t={:e}, n={:?}",
                    traj.grid().node(j),
                    modes.ball.points()[i].components()
                ));
            }
        }
    }
    Ok(BoundReport::from_margin(
        &format!("trajectory_envelope(scale={scale}, divisor={divisor})"),
        scale * env.b(),
        margin,
        worst,
    ))
}

/// Checks `δ_k ≤ B·r^k` for every recorded delta and `δ_{k+1}/δ_k ≤ r < 1`
/// whenever `δ_k` is above round-off.
pub fn check_contraction(
    diag: &PicardDiagnostics,
    env: &DecayEnvelope,
    fs: &FrequencySystem,
    grid: &TimeGrid,
) -> BoundReport {
    let r = contraction_ratio(env, fs, grid.t_end());
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (i, &delta) in diag.deltas.iter().enumerate() {
        let k = (i + 1) as i32;
        let bound = env.b() * r.powi(k);
        let m = bound - delta;
        if m < margin {
            margin = m;
            worst = Some(format!("δ_{k} = {delta:e} vs bound {bound:e}"));
        }
    }
    let floor = RATIO_FLOOR * env.b();
    for (i, w) in diag.deltas.windows(2).enumerate() {
        if w[0] <= floor {
            continue;
        }
        let ratio = w[1] / w[0];
        let m = r - ratio;
        if m < margin {
            margin = m;
            worst = Some(format!("δ_{}/δ_{} = {ratio:e} vs r = {r:e}", i + 2, i + 1));
        }
    }
    if diag.deltas.is_empty() {
        margin = 0.0;
    }
    let mut report = BoundReport::from_margin("contraction", r, margin, worst);
    if r >= 1.0 {
        report.pass = false;
        report.worst = Some(format!("rate r = {r:e} is not below 1"));
    }
    report
}

/// `sup |a − b|` over nodes `t_j ≤ t1` and all modes, against `tol`.
pub fn uniqueness_compare(
    a: &Trajectory,
    b: &Trajectory,
    t1: f64,
    tol: f64,
) -> Result<BoundReport> {
    a.check_compatible(b)?;
    let grid = a.grid();
    let mut sup = 0.0f64;
    let mut worst = None;
    for j in 0..grid.len() {
        if grid.node(j) > t1 * (1.0 + 1e-12) {
            break;
        }
        for (i, (x, y)) in a.dense(j).iter().zip(b.dense(j)).enumerate() {
            let d = (x - y).norm();
            if d > sup {
                sup = d;
                worst = Some(format!(
                    "t={:e}, n={:?}",
                    grid.node(j),
                    a.modes().ball.points()[i].components()
                ));
            }
        }
    }
    let mut report = BoundReport::from_margin("uniqueness", tol, tol - sup, worst);
    report.pass = sup <= tol;
    Ok(report)
}
