//! Run one scenario end to end: build the velocity field and initial data,
//! march every selected solver, export fields, interface meshes, and
//! diagnostic series, and record the acceptance checks in the manifest.
//!
//! Artifacts are deterministic: reruns of the same configuration produce
//! byte-identical files, so nothing time- or machine-dependent is written.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use levext_core::analysis::{compute_envelopes, check_sandwich, g_monotonicity_margin};
use levext_core::baselines::{flow_between, linear_transport_exact, reinitialize, solve_nmm};
use levext_core::characteristics::{integrate_characteristic, CharTrajectory, IntegrateOptions};
use levext_core::hj::{solve_viscosity, ViscosityOptions};
use levext_core::interface::extract_interface;
use levext_core::io::{self, Manifest};
use levext_core::velocity::VelocityField;
use levext_core::{
    solve_tube, AnalyticField, AnalyticSurface, CharState, DiagnosticsReport, InterfaceMesh,
    LevelSetData, Regularizer, ScalarField, TubeOptions, Vec3,
};

use crate::config::{ScenarioConfig, Setting, Solver};

/// Initial data as the solvers see it: surface values scaled by the profile
/// factor and optionally clamped far from the interface. Clamped regions
/// report a zero gradient, consistent with the flat plateau.
struct InitialData<'a> {
    surface: &'a AnalyticSurface,
    factor: f64,
    cap: Option<f64>,
}

impl LevelSetData for InitialData<'_> {
    fn value(&self, x: &Vec3) -> f64 {
        let value = self.surface.value(x) * self.factor;
        match self.cap {
            Some(cap) => value.clamp(-cap, cap),
            None => value,
        }
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        if let Some(cap) = self.cap {
            if (self.surface.value(x) * self.factor).abs() >= cap {
                return Vec3::zeros();
            }
        }
        self.surface.gradient(x) * self.factor
    }
}

/// Settings resolved from `auto` values once the data scale is known.
struct Resolved {
    reg: Regularizer,
    clamp: Option<f64>,
    reinit_s: f64,
    tol_interface: f64,
    tol_sandwich: f64,
    /// Step for reference flows: markers, envelopes, exact transport.
    flow_dt: f64,
}

fn resolve(cfg: &ScenarioConfig) -> Result<Resolved> {
    let reg = match cfg.gsolve.r_star {
        Setting::Auto => Regularizer::from_grad_floor(cfg.maxgrad),
        Setting::At(r) => Regularizer::new(r),
    }
    .map_err(|e| anyhow!("grid_solver.r_star: {e}"))?;
    let clamp = cfg.gsolve.clamp.map(|c| c.or(0.25 * cfg.maxgrad));
    Ok(Resolved {
        reg,
        clamp,
        reinit_s: cfg.reinit_s.or(8.0 * cfg.grid.h),
        tol_interface: cfg.checks.interface.or(2.0 * cfg.grid.h),
        tol_sandwich: cfg.checks.sandwich.or(2.0 * cfg.grid.h * cfg.maxgrad),
        flow_dt: cfg.horizon / 128.0,
    })
}

/// Per-solver worst-case diagnostics for the summary table.
pub struct SummaryRow {
    pub solver: &'static str,
    pub grad_dev: f64,
    pub hausdorff: f64,
    pub sandwich: [f64; 2],
    pub steps: usize,
}

pub struct RunOutcome {
    pub manifest: Manifest,
    pub rows: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

struct SolverRun {
    row: SummaryRow,
    report: DiagnosticsReport,
}

/// Everything the per-solver runners share.
struct Stage<'a> {
    cfg: &'a ScenarioConfig,
    v: AnalyticField,
    raw: InitialData<'a>,
    clamped: InitialData<'a>,
    phi0: ScalarField,
    times: Vec<f64>,
    /// Reference interface per output time: the initial interface advected
    /// by the plain particle flow, which the transported zero set follows.
    markers: Vec<Vec<Vec3>>,
    res: Resolved,
    g_margin: f64,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let stage = prepare(cfg)?;
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;

    let mut manifest = Manifest::new(cfg.echo.clone());
    manifest.versions.insert("levext-cli".into(), env!("CARGO_PKG_VERSION").into());

    let mut runs = Vec::new();
    for solver in &cfg.solvers {
        let run = match solver {
            Solver::Moc => run_moc(&stage)?,
            Solver::Grid => run_grid(&stage)?,
            Solver::LinearTransport => run_transport(&stage, false)?,
            Solver::Nmm => run_nmm(&stage, None)?,
            Solver::NmmBeta => run_nmm(&stage, Some(cfg.beta))?,
            Solver::Reinit => run_transport(&stage, true)?,
        };
        runs.push(run);
    }

    record_checks(&stage, &runs, &mut manifest);
    let mut summary =
        String::from("solver,grad_norm_dev,interface_hausdorff,sandwich_lower,sandwich_upper,steps\n");
    for run in &runs {
        let r = &run.row;
        summary.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.solver, r.grad_dev, r.hausdorff, r.sandwich[0], r.sandwich[1], r.steps
        ));
    }
    fs::write(cfg.out.join("summary.csv"), summary).context("writing summary.csv")?;
    io::write_manifest(&cfg.out.join("manifest.json"), &manifest)
        .context("writing manifest.json")?;

    Ok(RunOutcome {
        manifest,
        rows: runs.into_iter().map(|r| r.row).collect(),
        out_dir: cfg.out.clone(),
    })
}

fn prepare(cfg: &ScenarioConfig) -> Result<Stage<'_>> {
    let res = resolve(cfg)?;
    let v = AnalyticField::build(&cfg.field, &cfg.grid.bounds(), cfg.dim(), cfg.horizon, cfg.seed)
        .map_err(|e| anyhow!("velocity field: {e}"))?;
    let raw = InitialData { surface: &cfg.surface, factor: cfg.factor(), cap: None };
    let clamped = InitialData { surface: &cfg.surface, factor: cfg.factor(), cap: res.clamp };
    let phi0 = ScalarField::from_fn(cfg.grid.clone(), 0.0, |x| clamped.value(&x));

    let mut times = vec![0.0];
    times.extend(cfg.record.iter().copied());
    times.push(cfg.horizon);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let seed_mesh = extract_interface(&phi0)
        .map_err(|e| anyhow!("sampling the initial interface: {e}"))?;
    let markers = times
        .iter()
        .map(|t| advect_markers(&v, &seed_mesh.points, *t, res.flow_dt))
        .collect::<Result<Vec<_>>>()?;

    let g_margin = g_monotonicity_margin(
        &v,
        &res.reg,
        v.lipschitz(),
        cfg.horizon,
        &cfg.grid.bounds(),
        cfg.dim(),
        20_000,
        cfg.seed,
    );

    Ok(Stage { cfg, v, raw, clamped, phi0, times, markers, res, g_margin })
}

fn advect_markers(v: &AnalyticField, seeds: &[Vec3], t: f64, dt: f64) -> Result<Vec<Vec3>> {
    if t == 0.0 {
        return Ok(seeds.to_vec());
    }
    seeds
        .iter()
        .map(|x| flow_between(v, 0.0, t, x, dt).map_err(|e| anyhow!("marker flow: {e}")))
        .collect()
}

/// Two-sided distance between a mesh and a reference point cloud.
fn mesh_marker_hausdorff(mesh: &InterfaceMesh, markers: &[Vec3]) -> f64 {
    let mut to_mesh = 0.0f64;
    for m in markers {
        to_mesh = to_mesh.max(mesh.distance(m));
    }
    let mut to_markers = 0.0f64;
    for p in &mesh.points {
        let mut best = f64::INFINITY;
        for m in markers {
            best = best.min((p - m).norm());
        }
        to_markers = to_markers.max(best);
    }
    to_mesh.max(to_markers)
}

/// Worst deviation of the sampled gradient magnitude from `expected` over
/// interior nodes within four cells of the interface.
fn sampled_grad_dev(field: &ScalarField, expected: f64) -> f64 {
    let g = &field.grid;
    let band = 4.0 * g.h * expected;
    let mut dev = 0.0f64;
    let k_range = if g.dim == 3 { 1..g.n[2] - 1 } else { 0..1 };
    for k in k_range {
        for j in 1..g.n[1] - 1 {
            for i in 1..g.n[0] - 1 {
                let u = field.data[g.idx(i, j, k)];
                if !u.is_finite() || u.abs() > band {
                    continue;
                }
                let mut sq = 0.0;
                let mut finite = true;
                for ax in 0..g.dim {
                    let mut up = [i, j, k];
                    let mut dn = [i, j, k];
                    up[ax] += 1;
                    dn[ax] -= 1;
                    let d = field.data[g.idx(up[0], up[1], up[2])]
                        - field.data[g.idx(dn[0], dn[1], dn[2])];
                    if !d.is_finite() {
                        finite = false;
                        break;
                    }
                    sq += (d / (2.0 * g.h)).powi(2);
                }
                if finite {
                    dev = dev.max((sq.sqrt() - expected).abs());
                }
            }
        }
    }
    dev
}

fn solver_dir(cfg: &ScenarioConfig, solver: Solver) -> Result<PathBuf> {
    let dir = cfg.out.join(solver.name());
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating solver directory {}", dir.display()))?;
    Ok(dir)
}

fn write_outputs(dir: &Path, idx: usize, field: &ScalarField, mesh: &InterfaceMesh, dim: usize) -> Result<()> {
    io::write_field(&dir.join(format!("field_{idx}.field")), field)
        .with_context(|| format!("writing field_{idx}.field"))?;
    io::write_mesh_csv(&dir.join(format!("mesh_{idx}.csv")), mesh, dim)
        .with_context(|| format!("writing mesh_{idx}.csv"))?;
    Ok(())
}

fn base_report(stage: &Stage, solver: Solver) -> DiagnosticsReport {
    let n = stage.times.len();
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("solver".to_string(), solver.name().to_string());
    meta.insert("expected gradient magnitude".to_string(), format!("{:.17e}", stage.cfg.maxgrad));
    DiagnosticsReport {
        times: stage.times.clone(),
        grad_norm_dev: Vec::with_capacity(n),
        interface_hausdorff: Vec::with_capacity(n),
        sandwich_lower: vec![0.0; n],
        sandwich_upper: vec![0.0; n],
        sandwich_violations: 0,
        p2_drift: 0.0,
        g_margin: stage.g_margin,
        meta,
    }
}

fn finish(
    solver: Solver,
    dir: &Path,
    report: DiagnosticsReport,
    sandwich: [f64; 2],
    steps: usize,
) -> Result<SolverRun> {
    io::write_series_csv(&dir.join("series.csv"), &report).context("writing series.csv")?;
    let grad_dev = report.grad_norm_dev.iter().cloned().fold(0.0f64, f64::max);
    let hausdorff = report.interface_hausdorff.iter().cloned().fold(0.0f64, f64::max);
    Ok(SolverRun {
        row: SummaryRow { solver: solver.name(), grad_dev, hausdorff, sandwich, steps },
        report,
    })
}

fn run_moc(stage: &Stage) -> Result<SolverRun> {
    let cfg = stage.cfg;
    let dir = solver_dir(cfg, Solver::Moc)?;
    let mut topts = TubeOptions::new(&cfg.grid, cfg.horizon, cfg.moc.dt);
    topts.record_every = cfg.moc.record_every;
    topts.band_halfwidth = cfg.moc.band;
    let tube = solve_tube(&stage.v, &stage.raw, &topts).map_err(|e| anyhow!("moc solver: {e}"))?;

    let mut report = base_report(stage, Solver::Moc);
    report.p2_drift = tube.p2_drift;
    for (ti, t) in stage.times.iter().enumerate() {
        let field = tube.to_grid_field(*t).map_err(|e| anyhow!("moc grid sampling: {e}"))?;
        let mesh = tube.interface_at(*t).map_err(|e| anyhow!("moc interface: {e}"))?;
        write_outputs(&dir, ti, &field, &mesh, cfg.dim())?;

        // stored levels snap to the record lattice, so compare the mesh
        // against markers advected to its actual time
        let markers = advect_markers(&stage.v, &stage.markers[0], mesh.t, stage.res.flow_dt)?;
        report.interface_hausdorff.push(mesh_marker_hausdorff(&mesh, &markers));

        let store = tube
            .store_near(*t)
            .ok_or_else(|| anyhow!("moc solver: no stored level near t = {t}"))?;
        let mut dev = 0.0f64;
        for (idx, (state, alive)) in store.states.iter().zip(&store.alive).enumerate() {
            if !alive {
                continue;
            }
            let expected = if cfg.maxgrad_exact {
                cfg.maxgrad
            } else {
                tube.seed_states[idx].p.norm()
            };
            dev = dev.max((state.p.norm() - expected).abs());
        }
        report.grad_norm_dev.push(dev);
    }

    // a few characteristic trajectories for inspection, seeded on the
    // initial interface
    let stride = (stage.markers[0].len() / 16).max(1);
    let mut iopts = IntegrateOptions::new(cfg.moc.dt);
    iopts.record_every = cfg.moc.record_every;
    iopts.dim = cfg.dim();
    let mut trajectories: Vec<CharTrajectory> = Vec::new();
    for x in stage.markers[0].iter().step_by(stride).take(16) {
        let seed = CharState::interface_seed(*x, stage.raw.gradient(x));
        trajectories.push(
            integrate_characteristic(&stage.v, seed, 0.0, cfg.horizon, &iopts)
                .map_err(|e| anyhow!("characteristic trajectory: {e}"))?,
        );
    }
    io::write_trajectories_csv(&dir.join("trajectories.csv"), &trajectories)
        .context("writing trajectories.csv")?;

    let steps = (cfg.horizon / tube.dt).round() as usize;
    finish(Solver::Moc, &dir, report, [0.0, 0.0], steps)
}

fn run_grid(stage: &Stage) -> Result<SolverRun> {
    let cfg = stage.cfg;
    let dir = solver_dir(cfg, Solver::Grid)?;
    let mut vopts = ViscosityOptions::new(cfg.horizon);
    vopts.cfl = cfg.gsolve.cfl;
    vopts.record = stage.times[1..stage.times.len() - 1].to_vec();
    let sol = solve_viscosity(&stage.v, &stage.phi0, &stage.res.reg, &vopts)
        .map_err(|e| anyhow!("grid solver: {e}"))?;
    if sol.snapshots.len() + 1 != stage.times.len() {
        return Err(anyhow!("grid solver: snapshot count does not match the output times"));
    }

    let mut report = base_report(stage, Solver::Grid);
    let mut sandwich = [0.0f64; 2];
    for (ti, t) in stage.times.iter().enumerate() {
        let field = if ti == 0 { &stage.phi0 } else { &sol.snapshots[ti - 1] };
        let mesh = extract_interface(field).map_err(|e| anyhow!("grid interface: {e}"))?;
        write_outputs(&dir, ti, field, &mesh, cfg.dim())?;
        report.interface_hausdorff.push(mesh_marker_hausdorff(&mesh, &stage.markers[ti]));
        report
            .grad_norm_dev
            .push(if cfg.maxgrad_exact { sampled_grad_dev(field, cfg.maxgrad) } else { 0.0 });
        if ti > 0 {
            let env = compute_envelopes(&stage.v, &stage.clamped, &cfg.grid, *t, stage.res.flow_dt)
                .map_err(|e| anyhow!("envelopes: {e}"))?;
            let rep = check_sandwich(field, &env).map_err(|e| anyhow!("sandwich check: {e}"))?;
            report.sandwich_lower[ti] = rep.lower_excess;
            report.sandwich_upper[ti] = rep.upper_excess;
            if rep.max_excess() > 0.0 {
                report.sandwich_violations += 1;
            }
            sandwich[0] = sandwich[0].max(rep.lower_excess);
            sandwich[1] = sandwich[1].max(rep.upper_excess);
        }
    }
    finish(Solver::Grid, &dir, report, sandwich, sol.steps)
}

/// Exact linear transport of the initial data, optionally followed by the
/// distance corrector. The plain variant shows the gradient drift the
/// velocity extension avoids; the corrected variant shows the interface
/// displacement the corrector introduces.
fn run_transport(stage: &Stage, correct: bool) -> Result<SolverRun> {
    let cfg = stage.cfg;
    let solver = if correct { Solver::Reinit } else { Solver::LinearTransport };
    let dir = solver_dir(cfg, solver)?;
    let g = &cfg.grid;

    let mut report = base_report(stage, solver);
    for (ti, t) in stage.times.iter().enumerate() {
        let mut values = vec![0.0f64; g.len()];
        let mut dev = 0.0f64;
        let band = 4.0 * g.h * cfg.maxgrad;
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            let sample =
                linear_transport_exact(&stage.v, &stage.clamped, *t, &g.node(i, j, k), stage.res.flow_dt)
                    .map_err(|e| anyhow!("transport sampling: {e}"))?;
            values[idx] = sample.value;
            if cfg.maxgrad_exact && !correct && sample.value.abs() < band {
                dev = dev.max((sample.gradient.norm() - cfg.maxgrad).abs());
            }
        }
        let mut field = ScalarField { grid: g.clone(), t: *t, data: values };
        if correct {
            field = reinitialize(&field, stage.res.reinit_s)
                .map_err(|e| anyhow!("distance corrector: {e}"))?;
            // the corrector drives the magnitude toward one whatever the
            // initial scale was
            dev = sampled_grad_dev(&field, 1.0);
        }
        let mesh = extract_interface(&field).map_err(|e| anyhow!("transport interface: {e}"))?;
        write_outputs(&dir, ti, &field, &mesh, cfg.dim())?;
        report.interface_hausdorff.push(mesh_marker_hausdorff(&mesh, &stage.markers[ti]));
        report.grad_norm_dev.push(dev);
    }
    finish(solver, &dir, report, [0.0, 0.0], 0)
}

fn run_nmm(stage: &Stage, beta: Option<f64>) -> Result<SolverRun> {
    let cfg = stage.cfg;
    let solver = if beta.is_some() { Solver::NmmBeta } else { Solver::Nmm };
    let dir = solver_dir(cfg, solver)?;

    let mut report = base_report(stage, solver);
    let mut phi = stage.phi0.clone();
    let mut steps = 0usize;
    for (ti, t) in stage.times.iter().enumerate() {
        if ti > 0 {
            let sol = solve_nmm(&stage.v, &phi, beta, *t, cfg.gsolve.cfl)
                .map_err(|e| anyhow!("{} solver: {e}", solver.name()))?;
            steps += sol.steps;
            phi = sol
                .snapshots
                .into_iter()
                .next_back()
                .ok_or_else(|| anyhow!("{} solver: no final snapshot", solver.name()))?;
        }
        let mesh = extract_interface(&phi).map_err(|e| anyhow!("{} interface: {e}", solver.name()))?;
        write_outputs(&dir, ti, &phi, &mesh, cfg.dim())?;
        report.interface_hausdorff.push(mesh_marker_hausdorff(&mesh, &stage.markers[ti]));
        report
            .grad_norm_dev
            .push(if cfg.maxgrad_exact { sampled_grad_dev(&phi, cfg.maxgrad) } else { 0.0 });
    }
    finish(solver, &dir, report, [0.0, 0.0], steps)
}

fn record_checks(stage: &Stage, runs: &[SolverRun], manifest: &mut Manifest) {
    let cfg = stage.cfg;
    let res = &stage.res;
    let find = |s: Solver| runs.iter().find(|r| r.row.solver == s.name());

    if let Some(moc) = find(Solver::Moc) {
        if cfg.maxgrad_exact {
            manifest.record(
                "tube gradient magnitude",
                moc.row.grad_dev <= cfg.checks.grad_dev,
                format!(
                    "max deviation {:.3e} against tolerance {:.3e}",
                    moc.row.grad_dev, cfg.checks.grad_dev
                ),
            );
        }
        manifest.record(
            "tube interface tracking",
            moc.row.hausdorff <= res.tol_interface,
            format!(
                "max distance to advected markers {:.3e} against tolerance {:.3e}",
                moc.row.hausdorff, res.tol_interface
            ),
        );
        manifest.record(
            "tube costate conservation",
            moc.report.p2_drift <= 1e-10,
            format!("max |p|^2 drift {:.3e} against tolerance 1.0e-10", moc.report.p2_drift),
        );
    }
    if let Some(grid) = find(Solver::Grid) {
        manifest.record(
            "grid interface tracking",
            grid.row.hausdorff <= res.tol_interface,
            format!(
                "max distance to advected markers {:.3e} against tolerance {:.3e}",
                grid.row.hausdorff, res.tol_interface
            ),
        );
        manifest.record(
            "grid solution sandwich",
            grid.row.sandwich[0] <= res.tol_sandwich && grid.row.sandwich[1] <= res.tol_sandwich,
            format!(
                "lower excess {:.3e}, upper excess {:.3e} against tolerance {:.3e}",
                grid.row.sandwich[0], grid.row.sandwich[1], res.tol_sandwich
            ),
        );
    }
    manifest.record(
        "level monotonicity",
        stage.g_margin >= -1e-12,
        format!("worst sampled margin {:.3e} against tolerance -1.0e-12", stage.g_margin),
    );
    if let (Some(moc), Some(lin)) = (find(Solver::Moc), find(Solver::LinearTransport)) {
        if cfg.maxgrad_exact {
            let bound = (0.1 * lin.row.grad_dev).max(cfg.checks.grad_dev);
            manifest.record(
                "extension beats plain transport",
                moc.row.grad_dev <= bound,
                format!(
                    "extension drift {:.3e}, plain transport drift {:.3e}",
                    moc.row.grad_dev, lin.row.grad_dev
                ),
            );
        }
    }
}
