//! Time evolution of the mode system `c'' + λ²c = A(c)`.
//!
//! The Picard solver works on a uniform grid and evaluates the Duhamel
//! integral with a fixed-weight rule on the stored nodes. The RK4 reference
//! integrates the same system directly and shares nothing with it beyond the
//! convolution kernel.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    lambda_of_dot, CoefficientField, FrequencySystem, ModeTable, MultiIndex, C64,
};

/// Uniform grid `t_j = j·t_end/J`, `j = 0..=J`, with `J` even.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, intervals: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Grid(format!(
                "t_end = {t_end} must be positive and finite"
            )));
        }
        if intervals < 2 || !intervals.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "J = {intervals} must be even and at least 2"
            )));
        }
        Ok(TimeGrid { t_end, intervals })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.t_end * j as f64 / self.intervals as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(|j| self.node(j))
    }
}

/// One coefficient snapshot per grid node.
///
/// Picard trajectories also keep the Duhamel (forced) part of every snapshot
/// and the convolutions it was integrated from, which lets the residual form
/// second differences without the cancellation error of differencing sampled
/// values.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub(crate) fs: FrequencySystem,
    pub(crate) grid: TimeGrid,
    pub(crate) modes: Arc<ModeTable>,
    pub(crate) values: Vec<Vec<C64>>,
    pub(crate) forced: Option<Vec<Vec<C64>>>,
    /// Unweighted self-convolutions of the previous iterate; `None` with
    /// `forced` present means zero forcing.
    pub(crate) sources: Option<Vec<Vec<C64>>>,
}

impl Trajectory {
    /// Builds a trajectory from explicit snapshots, one per grid node.
    pub fn from_snapshots(
        grid: TimeGrid,
        fs: &FrequencySystem,
        snapshots: &[CoefficientField],
    ) -> Result<Self> {
        if snapshots.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} snapshots, got {}",
                grid.len(),
                snapshots.len()
            )));
        }
        let modes = Arc::new(ModeTable::new(fs));
        let values = snapshots
            .iter()
            .map(|s| modes.ball.dense(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            fs: fs.clone(),
            grid,
            modes,
            values,
            forced: None,
            sources: None,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn frequency_system(&self) -> &FrequencySystem {
        &self.fs
    }

    pub fn snapshot(&self, j: usize) -> CoefficientField {
        self.modes.ball.field(&self.values[j])
    }

    pub fn snapshots(&self) -> Vec<CoefficientField> {
        (0..self.values.len()).map(|j| self.snapshot(j)).collect()
    }

    /// `c(t_j, n)`; zero for `n` outside the truncation ball.
    pub fn value(&self, j: usize, n: &MultiIndex) -> C64 {
        self.modes
            .ball
            .position(n)
            .map_or(C64::default(), |i| self.values[j][i])
    }

    /// Dense values at node `j`, ordered as [`crate::lattice::ball`].
    pub fn dense(&self, j: usize) -> &[C64] {
        &self.values[j]
    }

    pub fn modes(&self) -> &ModeTable {
        &self.modes
    }

    /// `max_{j,n} |self − other|`.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(sup_diff(&self.values, &other.values))
    }

    pub(crate) fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Grid("trajectories live on different grids".into()));
        }
        if self.fs != other.fs {
            return Err(Error::Grid(
                "trajectories use different frequency systems".into(),
            ));
        }
        Ok(())
    }

    /// `max_{j,n} |c(t_j,n)|`.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.norm()))
    }
}

fn sup_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Convergence record of a Picard run.
///
/// `deltas[i]` is `sup_{j,n} |d_{i+2} − d_{i+1}|`, the change produced by
/// the `(i+1)`-th step starting from the linear flow `d₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub deltas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardDiagnostics {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(0.0)
    }
}

/// Stopping rule and existence-time guard for [`picard_solve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub kmax: usize,
    /// When set, grids reaching past this time are rejected.
    pub time_limit: Option<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            kmax: 20,
            time_limit: None,
        }
    }
}

/// `λ(n) = √((n·ω)² + (n·ω)⁴)`.
pub fn dispersion_lambda(n: &MultiIndex, fs: &FrequencySystem) -> f64 {
    lambda_of_dot(fs.dot(n))
}

/// `sin(λt)/λ`, continued by `t` at `λ = 0`.
fn sinc_t(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        (lambda * t).sin() / lambda
    }
}

fn check_field(c: &CoefficientField, fs: &FrequencySystem) -> Result<()> {
    if c.nu() != fs.nu() {
        return Err(Error::Dimension {
            expected: fs.nu(),
            found: c.nu(),
        });
    }
    if c.radius() > fs.radius() {
        return Err(Error::Radius {
            field: c.radius(),
            limit: fs.radius(),
        });
    }
    Ok(())
}

/// `c(n)cos(λt) + c′(n)sin(λt)/λ` per mode.
pub fn linear_flow(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    t: f64,
    fs: &FrequencySystem,
) -> Result<CoefficientField> {
    check_field(c0, fs)?;
    check_field(c0p, fs)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::OutOfRange {
            what: "t",
            detail: format!("{t} is negative"),
        });
    }
    let mut out = CoefficientField::zeros(fs.nu(), fs.radius());
    let keys: std::collections::BTreeSet<&MultiIndex> =
        c0.iter().chain(c0p.iter()).map(|(n, _)| n).collect();
    for n in keys {
        let lam = dispersion_lambda(n, fs);
        let v = c0.get(n) * (lam * t).cos() + c0p.get(n) * sinc_t(lam, t);
        out.set(n.clone(), v)?;
    }
    Ok(out)
}

/// Precomputed pieces of one Picard step on a fixed grid.
struct Propagator {
    modes: Arc<ModeTable>,
    grid: TimeGrid,
    /// Linear flow at every node.
    linear: Vec<Vec<C64>>,
    /// `sin(λ_i·h·m)` for `m = 0..=J`, row per mode.
    sines: Vec<Vec<f64>>,
    /// `−(n·ω)²/λ`, zero when `n·ω = 0`.
    scale: Vec<f64>,
    /// Quadrature `(node, weight)` pairs for `∫₀^{t_j}`.
    rules: Vec<Vec<(usize, f64)>>,
}

impl Propagator {
    fn new(
        c0: &CoefficientField,
        c0p: &CoefficientField,
        grid: TimeGrid,
        fs: &FrequencySystem,
    ) -> Result<Self> {
        check_field(c0, fs)?;
        check_field(c0p, fs)?;
        let modes = Arc::new(ModeTable::new(fs));
        let h = grid.step();
        let h_lambda = h * modes.lambda_max();
        if h_lambda > FRAC_PI_4 {
            return Err(Error::UnderResolved { h_lambda });
        }
        let a = modes.ball.dense(c0)?;
        let b = modes.ball.dense(c0p)?;
        let linear = (0..grid.len())
            .map(|j| {
                let t = grid.node(j);
                modes
                    .lambdas
                    .iter()
                    .enumerate()
                    .map(|(i, &lam)| a[i] * (lam * t).cos() + b[i] * sinc_t(lam, t))
                    .collect()
            })
            .collect();
        let sines = modes
            .lambdas
            .iter()
            .map(|&lam| {
                (0..grid.len())
                    .map(|m| (lam * h * m as f64).sin())
                    .collect()
            })
            .collect();
        let scale = modes
            .dots
            .iter()
            .map(|&d| {
                if d == 0.0 {
                    0.0
                } else {
                    -d.abs() / (1.0 + d * d).sqrt()
                }
            })
            .collect();
        let rules = (0..grid.len()).map(|j| quadrature_rule(j, h)).collect();
        Ok(Propagator {
            modes,
            grid,
            linear,
            sines,
            scale,
            rules,
        })
    }

    fn trajectory(&self, fs: &FrequencySystem, step: Step) -> Trajectory {
        Trajectory {
            fs: fs.clone(),
            grid: self.grid,
            modes: Arc::clone(&self.modes),
            values: step.values,
            forced: Some(step.forced),
            sources: step.sources,
        }
    }

    fn linear_step(&self) -> Step {
        Step {
            values: self.linear.clone(),
            forced: vec![vec![C64::default(); self.modes.ball.len()]; self.grid.len()],
            sources: None,
        }
    }

    fn step(&self, prev: &[Vec<C64>]) -> Step {
        let m = self.modes.ball.len();
        let q: Vec<Vec<C64>> = prev
            .iter()
            .map(|c| {
                let mut out = vec![C64::default(); m];
                self.modes.ball.self_convolve(c, &mut out);
                out
            })
            .collect();
        let mut forced = vec![vec![C64::default(); m]; self.grid.len()];
        for i in 0..m {
            let s = self.scale[i];
            if s == 0.0 {
                continue;
            }
            let sines = &self.sines[i];
            for (j, rule) in self.rules.iter().enumerate() {
                let mut acc = C64::default();
                for &(d, w) in rule {
                    let k = if d <= j { sines[j - d] } else { -sines[d - j] };
                    acc += q[d][i] * (w * k);
                }
                forced[j][i] = acc * s;
            }
        }
        let values = forced
            .iter()
            .zip(&self.linear)
            .map(|(f, l)| f.iter().zip(l).map(|(a, b)| a + b).collect())
            .collect();
        Step {
            values,
            forced,
            sources: Some(q),
        }
    }
}

struct Step {
    values: Vec<Vec<C64>>,
    forced: Vec<Vec<C64>>,
    sources: Option<Vec<Vec<C64>>>,
}

/// `(F_{j+1} − 2F_j + F_{j−1})/h²` of the forced part at interior nodes
/// `1..J`, assembled from the quadrature sums. Wherever the three rules share
/// a weight, `sin(a+x) − 2sin(a) + sin(a−x) = −4sin²(x/2)·sin(a)` is applied
/// before summing, so no large terms cancel.
pub(crate) fn forced_second_difference(
    modes: &ModeTable,
    grid: TimeGrid,
    sources: &[Vec<C64>],
) -> Vec<Vec<C64>> {
    let h = grid.step();
    let m = modes.ball.len();
    let j_max = grid.intervals();
    let dense_rule = |j: usize| {
        let mut w = vec![0.0; j_max + 1];
        for (d, x) in quadrature_rule(j, h) {
            w[d] = x;
        }
        w
    };
    let rules: Vec<Vec<f64>> = (0..=j_max).map(dense_rule).collect();
    let mut out = vec![vec![C64::default(); m]; j_max.saturating_sub(1)];
    for i in 0..m {
        let dot = modes.dots[i];
        if dot == 0.0 {
            continue;
        }
        let lam = modes.lambdas[i];
        let s = -dot.abs() / (1.0 + dot * dot).sqrt();
        let sin_at = |k: i64| (lam * h * k as f64).sin();
        let curvature = -4.0 * (0.5 * lam * h).sin().powi(2);
        for j in 1..j_max {
            let (wp, w0, wm) = (&rules[j + 1], &rules[j], &rules[j - 1]);
            let mut acc = C64::default();
            for d in 0..=j + 1 {
                let k = j as i64 - d as i64;
                let coef = if wp[d] == w0[d] && w0[d] == wm[d] {
                    w0[d] * curvature * sin_at(k)
                } else {
                    wp[d] * sin_at(k + 1) - 2.0 * w0[d] * sin_at(k) + wm[d] * sin_at(k - 1)
                };
                if coef != 0.0 {
                    acc += sources[d][i] * coef;
                }
            }
            out[j - 1][i] = acc * (s / (h * h));
        }
    }
    out
}

/// Weights for `∫₀^{t_j} g(τ)dτ` from samples at the grid nodes.
///
/// Even `j`: composite Simpson. Odd `j ≥ 3`: Simpson up to `j−3` and the 3/8
/// rule on the last three intervals. `j = 1`: the three-point rule
/// `h/12·(5g₀ + 8g₁ − g₂)`, which reads one node past `t₁`. Every case is
/// fourth order locally.
fn quadrature_rule(j: usize, h: f64) -> Vec<(usize, f64)> {
    let mut w = vec![0.0; (j + 1).max(3)];
    match j {
        0 => return Vec::new(),
        1 => {
            w[0] = 5.0 * h / 12.0;
            w[1] = 8.0 * h / 12.0;
            w[2] = -h / 12.0;
        }
        _ => {
            let simpson_end = if j.is_multiple_of(2) { j } else { j - 3 };
            for p in (0..simpson_end).step_by(2) {
                w[p] += h / 3.0;
                w[p + 1] += 4.0 * h / 3.0;
                w[p + 2] += h / 3.0;
            }
            if j % 2 == 1 {
                let e = j - 3;
                w[e] += 3.0 * h / 8.0;
                w[e + 1] += 9.0 * h / 8.0;
                w[e + 2] += 9.0 * h / 8.0;
                w[e + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w.into_iter()
        .enumerate()
        .filter(|(_, x)| *x != 0.0)
        .collect()
}

/// The linear flow sampled on every node (the first Picard iterate).
pub fn linear_trajectory(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
) -> Result<Trajectory> {
    let p = Propagator::new(c0, c0p, grid, fs)?;
    Ok(p.trajectory(fs, p.linear_step()))
}

/// One Picard step: linear flow plus the Duhamel integral of `prev`.
pub fn picard_step(
    prev: &Trajectory,
    c0: &CoefficientField,
    c0p: &CoefficientField,
) -> Result<Trajectory> {
    let p = Propagator::new(c0, c0p, prev.grid, &prev.fs)?;
    Ok(p.trajectory(&prev.fs, p.step(&prev.values)))
}

/// Iterates `d₁, …, d_count` starting from the linear flow.
pub fn picard_iterates(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    count: usize,
) -> Result<Vec<Trajectory>> {
    let p = Propagator::new(c0, c0p, grid, fs)?;
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(p.trajectory(fs, p.linear_step()));
    while out.len() < count {
        let next = p.step(&out[out.len() - 1].values);
        out.push(p.trajectory(fs, next));
    }
    Ok(out)
}

/// Picard iteration that always returns the last admissible iterate along
/// with its diagnostics, converged or not.
///
/// The returned iterate never has index above `kmax`; with `kmax = 1` it is
/// the linear flow.
pub fn picard_run(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardDiagnostics)> {
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange {
            what: "tol",
            detail: format!("{} is not positive", opts.tol),
        });
    }
    if opts.kmax == 0 {
        return Err(Error::OutOfRange {
            what: "kmax",
            detail: "must be at least 1".into(),
        });
    }
    if let Some(limit) = opts.time_limit {
        if grid.t_end() > limit * (1.0 + 1e-12) {
            return Err(Error::BeyondExistence {
                t_end: grid.t_end(),
                limit,
            });
        }
    }
    let p = Propagator::new(c0, c0p, grid, fs)?;
    let mut cur = p.linear_step();
    let mut deltas = Vec::new();
    for k in 1..=opts.kmax {
        let next = p.step(&cur.values);
        let delta = sup_diff(&next.values, &cur.values);
        deltas.push(delta);
        let converged = delta < opts.tol;
        if k < opts.kmax {
            cur = next;
        }
        if converged || k == opts.kmax {
            let diag = PicardDiagnostics {
                deltas,
                iterations: k,
                converged,
            };
            return Ok((p.trajectory(fs, cur), diag));
        }
    }
    unreachable!("loop returns at k = kmax")
}

/// Iterates past any tolerance until the update stops shrinking (or vanishes),
/// approximating the fixed point of the discrete scheme to roundoff. Returns
/// the newest iterate; `converged` reports stagnation within `kmax` steps.
pub fn picard_fixed_point(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    kmax: usize,
) -> Result<(Trajectory, PicardDiagnostics)> {
    if kmax == 0 {
        return Err(Error::OutOfRange {
            what: "kmax",
            detail: "must be at least 1".into(),
        });
    }
    let p = Propagator::new(c0, c0p, grid, fs)?;
    let mut cur = p.linear_step();
    let mut deltas: Vec<f64> = Vec::new();
    let mut stagnated = false;
    for _ in 0..kmax {
        let next = p.step(&cur.values);
        let delta = sup_diff(&next.values, &cur.values);
        stagnated = delta == 0.0 || deltas.last().is_some_and(|&prev| delta >= prev);
        deltas.push(delta);
        cur = next;
        if stagnated {
            break;
        }
    }
    let diag = PicardDiagnostics {
        iterations: deltas.len(),
        deltas,
        converged: stagnated,
    };
    Ok((p.trajectory(fs, cur), diag))
}

/// Picard iteration to tolerance; fails with [`Error::NotConverged`] when
/// `kmax` iterates do not reach it.
pub fn picard_solve(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardDiagnostics)> {
    let (traj, diag) = picard_run(c0, c0p, grid, fs, opts)?;
    if !diag.converged {
        return Err(Error::NotConverged {
            kmax: opts.kmax,
            last_delta: diag.last_delta(),
        });
    }
    Ok((traj, diag))
}

/// Classical RK4 on `(c, ċ)` with `A` recomputed at every stage.
pub fn ode_reference_solve(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    substeps: usize,
) -> Result<Trajectory> {
    rk4(c0, c0p, grid, fs, substeps, true)
}

/// [`ode_reference_solve`] with the nonlinearity switched off.
pub fn ode_reference_solve_linear(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    substeps: usize,
) -> Result<Trajectory> {
    rk4(c0, c0p, grid, fs, substeps, false)
}

fn rk4(
    c0: &CoefficientField,
    c0p: &CoefficientField,
    grid: TimeGrid,
    fs: &FrequencySystem,
    substeps: usize,
    nonlinear: bool,
) -> Result<Trajectory> {
    if substeps == 0 {
        return Err(Error::OutOfRange {
            what: "substeps",
            detail: "must be at least 1".into(),
        });
    }
    check_field(c0, fs)?;
    check_field(c0p, fs)?;
    let modes = Arc::new(ModeTable::new(fs));
    let m = modes.ball.len();
    let lam2: Vec<f64> = modes.lambdas.iter().map(|l| l * l).collect();
    let rhs = |c: &[C64], v: &[C64], dc: &mut [C64], dv: &mut [C64], a: &mut [C64]| {
        if nonlinear {
            modes.ball.weighted_self_convolve(&modes.dots, c, a);
        }
        for i in 0..m {
            dc[i] = v[i];
            dv[i] = -c[i] * lam2[i] + if nonlinear { a[i] } else { C64::default() };
        }
    };
    let mut c = modes.ball.dense(c0)?;
    let mut v = modes.ball.dense(c0p)?;
    let big_h = grid.step() / substeps as f64;
    let mut a = vec![C64::default(); m];
    let mut k = [(); 4].map(|_| (vec![C64::default(); m], vec![C64::default(); m]));
    let mut tc = vec![C64::default(); m];
    let mut tv = vec![C64::default(); m];
    let mut values = Vec::with_capacity(grid.len());
    values.push(c.clone());
    for _ in 0..grid.intervals() {
        for _ in 0..substeps {
            let (k0, rest) = k.split_first_mut().unwrap();
            rhs(&c, &v, &mut k0.0, &mut k0.1, &mut a);
            let stages = [0.5 * big_h, 0.5 * big_h, big_h];
            let mut prev = &*k0;
            for (ks, &dt) in rest.iter_mut().zip(&stages) {
                for i in 0..m {
                    tc[i] = c[i] + prev.0[i] * dt;
                    tv[i] = v[i] + prev.1[i] * dt;
                }
                rhs(&tc, &tv, &mut ks.0, &mut ks.1, &mut a);
                prev = ks;
            }
            for i in 0..m {
                c[i] += (k[0].0[i] + (k[1].0[i] + k[2].0[i]) * 2.0 + k[3].0[i]) * (big_h / 6.0);
                v[i] += (k[0].1[i] + (k[1].1[i] + k[2].1[i]) * 2.0 + k[3].1[i]) * (big_h / 6.0);
            }
        }
        values.push(c.clone());
    }
    Ok(Trajectory {
        fs: fs.clone(),
        grid,
        modes,
        values,
        forced: None,
        sources: None,
    })
}

/// `(−3f₀ + 4f₁ − f₂)/(2h)` per mode.
pub fn time_derivative_at_zero(traj: &Trajectory) -> CoefficientField {
    let h = traj.grid.step();
    let f = &traj.values;
    let d: Vec<C64> = (0..f[0].len())
        .map(|i| (f[0][i] * -3.0 + f[1][i] * 4.0 - f[2][i]) / (2.0 * h))
        .collect();
    traj.modes.ball.field(&d)
}
