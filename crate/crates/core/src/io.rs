//! Artifact writers and readers: grid fields as a plain text format that
//! round-trips every bit, meshes and trajectories as CSV, diagnostics time
//! series as CSV, and the run manifest as JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::DiagnosticsReport;
use crate::characteristics::CharTrajectory;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::interface::InterfaceMesh;
use crate::Vec3;

const FIELD_MAGIC: &str = "# levext field v1";

/// Serialize a grid field. Values are written with enough digits to
/// reproduce the exact binary doubles on read.
pub fn field_to_string(field: &ScalarField) -> String {
    let g = &field.grid;
    let mut out = String::new();
    let _ = writeln!(out, "{FIELD_MAGIC}");
    let _ = writeln!(out, "dim {}", g.dim);
    let _ = writeln!(out, "n {} {} {}", g.n[0], g.n[1], g.n[2]);
    let _ = writeln!(out, "origin {:.17e} {:.17e} {:.17e}", g.origin.x, g.origin.y, g.origin.z);
    let _ = writeln!(out, "h {:.17e}", g.h);
    let _ = writeln!(out, "t {:.17e}", field.t);
    for k in 0..g.n[2] {
        for j in 0..g.n[1] {
            for (i, val) in (0..g.n[0]).zip(field.data[g.idx(0, j, k)..].iter()) {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{val:.17e}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, field_to_string(field))?;
    Ok(())
}

fn parse_err(line: usize, why: impl Into<String>) -> Error {
    Error::Parse { line, why: why.into() }
}

fn expect_key<'a>(line: Option<(usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, text) = line.ok_or_else(|| parse_err(0, format!("missing '{key}' line")))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(no, format!("expected '{key}'")));
    }
    Ok((no, parts.collect()))
}

fn parse_f64(no: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| parse_err(no, format!("bad number '{s}'")))
}

pub fn field_from_string(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (no, first) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
    if first.trim() != FIELD_MAGIC {
        return Err(parse_err(no, "not a field file"));
    }
    let (no, dim) = expect_key(lines.next(), "dim")?;
    let dim: usize =
        dim.first().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err(no, "bad dim"))?;
    let (no, nparts) = expect_key(lines.next(), "n")?;
    if nparts.len() != 3 {
        return Err(parse_err(no, "n needs three extents"));
    }
    let mut n = [0usize; 3];
    for (slot, s) in n.iter_mut().zip(&nparts) {
        *slot = s.parse().map_err(|_| parse_err(no, format!("bad extent '{s}'")))?;
    }
    let (no, oparts) = expect_key(lines.next(), "origin")?;
    if oparts.len() != 3 {
        return Err(parse_err(no, "origin needs three coordinates"));
    }
    let origin = Vec3::new(
        parse_f64(no, oparts[0])?,
        parse_f64(no, oparts[1])?,
        parse_f64(no, oparts[2])?,
    );
    let (no, hparts) = expect_key(lines.next(), "h")?;
    let h = parse_f64(no, hparts.first().copied().unwrap_or(""))?;
    let (no, tparts) = expect_key(lines.next(), "t")?;
    let t = parse_f64(no, tparts.first().copied().unwrap_or(""))?;
    let grid = Grid::new(dim, origin, h, n)?;
    let mut data = Vec::with_capacity(grid.len());
    let mut last_no = no;
    for (no, line) in lines {
        last_no = no;
        for tok in line.split_whitespace() {
            data.push(parse_f64(no, tok)?);
        }
    }
    if data.len() != grid.len() {
        return Err(parse_err(
            last_no,
            format!("expected {} values, got {}", grid.len(), data.len()),
        ));
    }
    Ok(ScalarField { grid, t, data })
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    field_from_string(&fs::read_to_string(path)?)
}

/// Mesh CSV: one row per vertex with its normal and curvature. The third
/// coordinate is emitted only for 3D meshes.
pub fn mesh_to_csv(mesh: &InterfaceMesh, dim: usize) -> String {
    let mut out = String::new();
    out.push_str(if dim == 3 {
        "t,x,y,z,nx,ny,nz,kappa\n"
    } else {
        "t,x,y,nx,ny,kappa\n"
    });
    for ((p, nrm), kappa) in mesh.points.iter().zip(&mesh.normals).zip(&mesh.curvatures) {
        if dim == 3 {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                mesh.t, p.x, p.y, p.z, nrm.x, nrm.y, nrm.z, kappa
            );
        } else {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                mesh.t, p.x, p.y, nrm.x, nrm.y, kappa
            );
        }
    }
    out
}

pub fn write_mesh_csv(path: &Path, mesh: &InterfaceMesh, dim: usize) -> Result<()> {
    fs::write(path, mesh_to_csv(mesh, dim))?;
    Ok(())
}

/// Trajectory CSV: every recorded sample of every trajectory, with the
/// per-trajectory `|p|^2` drift repeated on each row.
pub fn trajectories_to_csv(trajectories: &[CharTrajectory]) -> String {
    let mut out = String::from("seed_id,s,x,y,z,px,py,pz,phi,p2_drift\n");
    for (id, traj) in trajectories.iter().enumerate() {
        for sample in &traj.samples {
            let st = &sample.state;
            let _ = writeln!(
                out,
                "{id},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e}",
                sample.s,
                st.x.x,
                st.x.y,
                st.x.z,
                st.p.x,
                st.p.y,
                st.p.z,
                st.phi,
                traj.p2_drift
            );
        }
    }
    out
}

pub fn write_trajectories_csv(path: &Path, trajectories: &[CharTrajectory]) -> Result<()> {
    fs::write(path, trajectories_to_csv(trajectories))?;
    Ok(())
}

/// Diagnostics time series, one row per output time.
pub fn series_to_csv(report: &DiagnosticsReport) -> String {
    let mut out =
        String::from("time,grad_norm_dev,interface_hausdorff,sandwich_lower,sandwich_upper\n");
    for i in 0..report.times.len() {
        let _ = writeln!(
            out,
            "{:.17e},{:.6e},{:.6e},{:.6e},{:.6e}",
            report.times[i],
            report.grad_norm_dev[i],
            report.interface_hausdorff[i],
            report.sandwich_lower[i],
            report.sandwich_upper[i]
        );
    }
    out
}

pub fn write_series_csv(path: &Path, report: &DiagnosticsReport) -> Result<()> {
    report.validate()?;
    fs::write(path, series_to_csv(report))?;
    Ok(())
}

/// Result of one named check inside a run manifest.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Machine-readable record of a batch run: the configuration it ran from,
/// component versions, and per-check outcomes.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct Manifest {
    pub config: String,
    pub versions: std::collections::BTreeMap<String, String>,
    pub checks: Vec<CheckOutcome>,
}

impl Manifest {
    pub fn new(config: impl Into<String>) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("levext-core".into(), env!("CARGO_PKG_VERSION").into());
        Manifest { config: config.into(), versions, checks: Vec::new() }
    }

    pub fn record(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome { name: name.into(), pass, detail: detail.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    fs::write(path, manifest.to_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{integrate_characteristic, CharState, IntegrateOptions};
    use crate::velocity::{AnalyticField, FieldKind, FieldSpec};

    fn sample_field(dim: usize) -> ScalarField {
        let grid = if dim == 2 {
            Grid::new_2d([-1.0, 0.5], 0.25, 9, 5).unwrap()
        } else {
            Grid::new_3d([-1.0, 0.5, 0.25], 0.25, [5, 4, 4]).unwrap()
        };
        let mut f = ScalarField::from_fn(grid, 0.375, |x| (x.norm() - 0.7) * 1.1e-3);
        let hole = f.grid.idx(2, 1, 0);
        f.data[hole] = f64::NAN;
        let spike = f.grid.idx(1, 2, 0);
        f.data[spike] = -1.2345678901234567e-301;
        f
    }

    #[test]
    fn field_round_trip_is_bitwise() {
        for dim in [2, 3] {
            let f = sample_field(dim);
            let back = field_from_string(&field_to_string(&f)).unwrap();
            assert_eq!(back.grid.dim, f.grid.dim);
            assert_eq!(back.grid.n, f.grid.n);
            assert_eq!(back.grid.h.to_bits(), f.grid.h.to_bits());
            assert_eq!(back.t.to_bits(), f.t.to_bits());
            assert_eq!(back.data.len(), f.data.len());
            for (a, b) in back.data.iter().zip(&f.data) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn field_parser_reports_line_numbers() {
        let f = sample_field(2);
        let text = field_to_string(&f);
        let broken = text.replace("dim 2", "dim x");
        match field_from_string(&broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let truncated: String =
            text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(field_from_string(&truncated), Err(Error::Parse { .. })));
        assert!(matches!(field_from_string("hello"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn mesh_csv_has_one_row_per_vertex() {
        let g = Grid::new_2d([-1.0, -1.0], 0.125, 17, 17).unwrap();
        let f = ScalarField::from_fn(g, 0.25, |x| x.norm() - 0.6);
        let mesh = crate::interface::extract_interface(&f).unwrap();
        let csv = mesh_to_csv(&mesh, 2);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x,y,nx,ny,kappa"));
        assert_eq!(lines.count(), mesh.points.len());
        let row = csv.lines().nth(1).unwrap();
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 6);
        assert_eq!(cols[0], 0.25);
        assert!((Vec3::new(cols[1], cols[2], 0.0).norm() - 0.6).abs() < 0.05);
    }

    #[test]
    fn trajectory_csv_shape_and_determinism() {
        let v = AnalyticField::build(
            &FieldSpec { kind: FieldKind::RigidRotation { omega: 1.0 }, taper_margin: None },
            &Grid::new_2d([-2.0, -2.0], 0.25, 17, 17).unwrap().bounds(),
            2,
            1.0,
            3,
        )
        .unwrap();
        let mut opts = IntegrateOptions::new(1e-2);
        opts.record_every = 10;
        opts.dim = 2;
        let seed = CharState::interface_seed(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let traj = integrate_characteristic(&v, seed, 0.0, 0.5, &opts).unwrap();
        let csv = trajectories_to_csv(std::slice::from_ref(&traj));
        assert_eq!(csv.lines().count(), 1 + traj.samples.len());
        assert!(csv.lines().nth(1).unwrap().starts_with("0,0"));
        assert_eq!(csv, trajectories_to_csv(std::slice::from_ref(&traj)));
    }

    #[test]
    fn series_requires_consistent_report() {
        let rep = DiagnosticsReport {
            times: vec![0.0, 0.5],
            grad_norm_dev: vec![1e-9, 2e-9],
            interface_hausdorff: vec![0.0, 1e-3],
            sandwich_lower: vec![0.0, 0.0],
            sandwich_upper: vec![0.0, 1e-4],
            ..DiagnosticsReport::default()
        };
        let csv = series_to_csv(&rep);
        assert_eq!(csv.lines().count(), 3);
        let dir = std::env::temp_dir().join("levext-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        write_series_csv(&path, &rep).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), csv);
        let mut bad = rep.clone();
        bad.times.push(1.0);
        assert!(write_series_csv(&path, &bad).is_err());
    }

    #[test]
    fn manifest_records_checks_as_json() {
        let mut m = Manifest::new("scenario = rotation");
        m.record("grad-norm", true, "max dev 3.2e-9");
        m.record("sandwich", false, "upper excess 0.3");
        assert!(!m.all_pass());
        let parsed: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(parsed["config"], "scenario = rotation");
        assert_eq!(parsed["checks"][0]["pass"], true);
        assert_eq!(parsed["checks"][1]["name"], "sandwich");
        assert!(parsed["versions"]["levext-core"].is_string());
        assert_eq!(m.to_json(), m.to_json());
    }
}
