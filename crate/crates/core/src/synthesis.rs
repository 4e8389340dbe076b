//! Point evaluation of `u(t,x)` and the a-posteriori residual of the mode
//! system `c̈ + λ²c − A(c) = 0`.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::evolution::{forced_second_difference, Trajectory};
use crate::lattice::{CoefficientField, FrequencySystem, C64};

/// `Σ_n c(n)·exp(i·x·(n·ω))` in lexicographic order.
pub fn evaluate_u(field: &CoefficientField, x: f64, fs: &FrequencySystem) -> C64 {
    field.iter().fold(C64::default(), |acc, (n, c)| {
        acc + c * C64::from_polar(1.0, x * fs.dot(n))
    })
}

/// Multiplies every mode by `(i·n·ω)^order`.
pub fn derivative_field(
    field: &CoefficientField,
    order: u32,
    fs: &FrequencySystem,
) -> Result<CoefficientField> {
    if !(1..=4).contains(&order) {
        return Err(Error::OutOfRange {
            what: "derivative order",
            detail: format!("{order} not in 1..=4"),
        });
    }
    let mut out = CoefficientField::zeros(field.nu(), field.radius());
    for (n, c) in field.iter() {
        let factor = C64::new(0.0, fs.dot(n)).powu(order);
        out.set(n.clone(), c * factor)?;
    }
    Ok(out)
}

/// Per-node maximum of the mode residual on interior nodes `1..J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualProfile {
    pub step: f64,
    pub times: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// Largest `|A(c)|` over the interior nodes; sets the roundoff scale.
    pub forcing_max: f64,
}

impl ResidualProfile {
    pub fn max(&self) -> f64 {
        self.max_abs.iter().fold(0.0, |m, &v| m.max(v))
    }
}

fn residual_rows(traj: &Trajectory, nonlinear: bool) -> Result<(Vec<Vec<C64>>, f64)> {
    let grid = traj.grid();
    if grid.intervals() < 4 {
        return Err(Error::Grid(format!(
            "residual needs J ≥ 4, got {}",
            grid.intervals()
        )));
    }
    let modes = traj.modes();
    let m = modes.ball.len();
    let h2 = grid.step() * grid.step();
    let lam2: Vec<f64> = modes.lambdas.iter().map(|l| l * l).collect();
    // Linear-flow parts satisfy c̈ + λ²c = 0 exactly, so only the forced
    // part needs differencing when it is available.
    let source = traj.forced.as_ref().unwrap_or(&traj.values);
    let accel = match (&traj.forced, &traj.sources) {
        (Some(_), Some(q)) => Some(forced_second_difference(modes, *grid, q)),
        _ => None,
    };
    let mut a = vec![C64::default(); m];
    let mut forcing_max = 0.0f64;
    let mut rows = Vec::with_capacity(grid.intervals() - 1);
    for j in 1..grid.intervals() {
        if nonlinear {
            modes
                .ball
                .weighted_self_convolve(&modes.dots, traj.dense(j), &mut a);
            forcing_max = a.iter().fold(forcing_max, |mx, v| mx.max(v.norm()));
        }
        let row = (0..m)
            .map(|i| {
                let f = &source;
                let acc = match (&accel, &traj.forced) {
                    (Some(acc), _) => acc[j - 1][i],
                    (None, Some(_)) => C64::default(),
                    (None, None) => (f[j + 1][i] - f[j][i] * 2.0 + f[j - 1][i]) / h2,
                };
                acc + f[j][i] * lam2[i] - if nonlinear { a[i] } else { C64::default() }
            })
            .collect();
        rows.push(row);
    }
    Ok((rows, forcing_max))
}

fn profile(traj: &Trajectory, nonlinear: bool) -> Result<ResidualProfile> {
    let (rows, forcing_max) = residual_rows(traj, nonlinear)?;
    let grid = traj.grid();
    Ok(ResidualProfile {
        step: grid.step(),
        times: (1..grid.intervals()).map(|j| grid.node(j)).collect(),
        max_abs: rows
            .iter()
            .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.norm())))
            .collect(),
        forcing_max,
    })
}

/// `r(t_j,n) = c̈ + λ²c − A(c)` with `c̈` from second central differences.
pub fn spectral_residual(traj: &Trajectory) -> Result<ResidualProfile> {
    profile(traj, true)
}

/// [`spectral_residual`] for the linear system `c̈ + λ²c = 0`.
pub fn spectral_residual_linear(traj: &Trajectory) -> Result<ResidualProfile> {
    profile(traj, false)
}

/// The residual at interior node `j` as a coefficient field.
pub fn residual_field(traj: &Trajectory, j: usize) -> Result<CoefficientField> {
    if j == 0 || j >= traj.grid().intervals() {
        return Err(Error::Grid(format!("node {j} is not interior")));
    }
    let (rows, _) = residual_rows(traj, true)?;
    Ok(traj.modes().ball.field(&rows[j - 1]))
}

/// Absolute allowance for [`residual_richardson`]: `64ε·max|A|`, the level at
/// which the residual is pure roundoff.
pub fn residual_roundoff_floor(profile: &ResidualProfile) -> f64 {
    64.0 * f64::EPSILON * profile.forcing_max
}

/// Second-order check from two grids: with `C = r_coarse/h_coarse²`, the
/// fine residual must satisfy `r_fine ≤ 1.25·C·h_fine² + abs_tol`.
pub fn residual_richardson(
    coarse: &ResidualProfile,
    fine: &ResidualProfile,
    abs_tol: f64,
) -> Result<BoundReport> {
    if !(fine.step < coarse.step) {
        return Err(Error::Grid("fine grid must have the smaller step".into()));
    }
    let c = coarse.max() / (coarse.step * coarse.step);
    let bound = 1.25 * c * fine.step * fine.step + abs_tol;
    let value = fine.max();
    let ratio = coarse.max() / value;
    Ok(BoundReport {
        name: "residual_second_order".into(),
        threshold: bound,
        worst: Some(format!("r_coarse/r_fine = {ratio:.4}")),
        margin: bound - value,
        pass: value <= bound,
    })
}
