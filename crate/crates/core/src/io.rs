//! CSV and JSON formats for coefficient fields and trajectories.
//!
//! Field CSV: header `n1,…,nV,re,im`, one row per nonzero mode in
//! lexicographic order, floats in shortest round-trip exponent form. The ball
//! radius and frequency vector travel in a JSON sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{PicardDiagnostics, TimeGrid, Trajectory};
use crate::lattice::{CoefficientField, FrequencySystem, MultiIndex, C64};

/// Metadata stored next to every field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub nu: usize,
    pub omega: Vec<f64>,
    pub radius: u32,
}

impl FieldSidecar {
    pub fn for_system(fs: &FrequencySystem) -> Self {
        FieldSidecar {
            nu: fs.nu(),
            omega: fs.omega().to_vec(),
            radius: fs.radius(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::Parse("sidecar ν must be at least 1".into()));
        }
        if self.omega.len() != self.nu {
            return Err(Error::Dimension {
                expected: self.nu,
                found: self.omega.len(),
            });
        }
        Ok(())
    }
}

pub fn parse_sidecar(text: &str) -> Result<FieldSidecar> {
    let s: FieldSidecar = serde_json::from_str(text)?;
    s.validate()?;
    Ok(s)
}

pub fn sidecar_to_json(s: &FieldSidecar) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)?)
}

fn header(nu: usize) -> Vec<String> {
    (1..=nu)
        .map(|i| format!("n{i}"))
        .chain(["re".to_string(), "im".to_string()])
        .collect()
}

pub fn write_field_csv<W: Write>(field: &CoefficientField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(field.nu()))?;
    for (n, v) in field.iter() {
        let mut row: Vec<String> = n.components().iter().map(i32::to_string).collect();
        row.push(format!("{:e}", v.re));
        row.push(format!("{:e}", v.im));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn field_to_csv(field: &CoefficientField) -> Result<String> {
    let mut buf = Vec::new();
    write_field_csv(field, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

fn parse_float(s: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value {s:?}")));
    }
    Ok(v)
}

/// Reads a field CSV against its sidecar. Rows must be unique and inside the
/// ball; order is not enforced.
pub fn read_field_csv<R: Read>(input: R, sidecar: &FieldSidecar) -> Result<CoefficientField> {
    sidecar.validate()?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let expected = header(sidecar.nu);
    let got: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "header {got:?} does not match {expected:?}"
        )));
    }
    let mut field = CoefficientField::zeros(sidecar.nu, sidecar.radius);
    let mut seen = std::collections::BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != sidecar.nu + 2 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} columns",
                sidecar.nu + 2
            )));
        }
        let comps = (0..sidecar.nu)
            .map(|i| {
                rec[i]
                    .trim()
                    .parse::<i32>()
                    .map_err(|_| Error::Parse(format!("line {line}: bad index {:?}", &rec[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        if comps.iter().any(|c| c.unsigned_abs() > sidecar.radius) {
            return Err(Error::Radius {
                field: comps.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0),
                limit: sidecar.radius,
            });
        }
        let n = MultiIndex::new(comps);
        let re = parse_float(&rec[sidecar.nu], line)?;
        let im = parse_float(&rec[sidecar.nu + 1], line)?;
        if !seen.insert(n.clone()) {
            return Err(Error::Parse(format!("line {line}: duplicate mode {n:?}")));
        }
        field.set(n, C64::new(re, im))?;
    }
    Ok(field)
}

pub fn parse_field_csv(text: &str, sidecar: &FieldSidecar) -> Result<CoefficientField> {
    read_field_csv(text.as_bytes(), sidecar)
}

/// Summary written beside the per-node CSVs of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    pub t_end: f64,
    #[serde(rename = "J")]
    pub intervals: usize,
    pub tol: f64,
    pub kmax: usize,
    pub converged: bool,
    pub deltas: Vec<f64>,
}

pub fn parse_trajectory_manifest(text: &str) -> Result<TrajectoryManifest> {
    let m: TrajectoryManifest = serde_json::from_str(text)?;
    TimeGrid::new(m.t_end, m.intervals)?;
    Ok(m)
}

pub fn node_file_name(j: usize) -> String {
    format!("node_{j:05}.csv")
}

/// Writes `field.json`, `manifest.json` and one CSV per node into `dir`.
/// Returns the written paths in write order.
pub fn write_trajectory(
    dir: &Path,
    traj: &Trajectory,
    diag: &PicardDiagnostics,
    tol: f64,
    kmax: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let sidecar = dir.join("field.json");
    fs::write(
        &sidecar,
        sidecar_to_json(&FieldSidecar::for_system(traj.frequency_system()))?,
    )?;
    paths.push(sidecar);
    let manifest = TrajectoryManifest {
        t_end: traj.grid().t_end(),
        intervals: traj.grid().intervals(),
        tol,
        kmax,
        converged: diag.converged,
        deltas: diag.deltas.clone(),
    };
    let mpath = dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    paths.push(mpath);
    for j in 0..traj.grid().len() {
        let p = dir.join(node_file_name(j));
        fs::write(&p, field_to_csv(&traj.snapshot(j))?)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Reads a directory produced by [`write_trajectory`].
pub fn read_trajectory(dir: &Path) -> Result<(Trajectory, TrajectoryManifest)> {
    let sidecar = parse_sidecar(&fs::read_to_string(dir.join("field.json"))?)?;
    let manifest = parse_trajectory_manifest(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let fs_ = FrequencySystem::new(sidecar.omega.clone(), sidecar.radius)?;
    let grid = TimeGrid::new(manifest.t_end, manifest.intervals)?;
    let snaps = (0..grid.len())
        .map(|j| {
            let text = fs::read_to_string(dir.join(node_file_name(j)))?;
            parse_field_csv(&text, &sidecar)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::from_snapshots(grid, &fs_, &snaps)?, manifest))
}
