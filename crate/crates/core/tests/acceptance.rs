//! Acceptance suite: one test per advertised guarantee of the library, each
//! printing a single PASS line with the measured numbers and the pinned
//! tolerance so the batch log doubles as a certification table.
//!
//! Tolerances are fixed here on purpose; loosening one is a contract change,
//! not a test fix.

use std::f64::consts::TAU;
use std::time::Instant;

use levext_core::analysis::{check_sandwich, compute_envelopes, monotonized_g, tube_error_norms};
use levext_core::baselines::{linear_transport_exact, nmm_step};
use levext_core::characteristics::{char_rhs, integrate_characteristic, IntegrateOptions};
use levext_core::geometry::angle_between_lines_deg;
use levext_core::hj::{dissipation, llf_step, max_stable_dt, solve_viscosity, ViscosityOptions};
use levext_core::velocity::{lipschitz_extend, DomainSample};
use levext_core::{
    solve_tube, AnalyticField, AnalyticSurface, Box3, CharState, Error, FieldKind, FieldSpec,
    Grid, LevelSetData, Regularizer, ScalarField, TubeOptions, Vec3, VelocityField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn sym_box(half: f64) -> Box3 {
    Box3::new(Vec3::new(-half, -half, 0.0), Vec3::new(half, half, 0.0))
}

fn square_grid(half: f64, h: f64) -> Grid {
    let n = (2.0 * half / h).round() as usize + 1;
    Grid::new_2d([-half, -half], h, n, n).expect("grid")
}

fn build_field(kind: FieldKind, taper: Option<f64>, domain: &Box3, horizon: f64) -> AnalyticField {
    AnalyticField::build(&FieldSpec { kind, taper_margin: taper }, domain, 2, horizon, 9)
        .expect("catalog field")
}

fn circle(cx: f64, cy: f64, r: f64) -> AnalyticSurface {
    AnalyticSurface::Sphere { center: Vec3::new(cx, cy, 0.0), radius: r }
}

/// Level data given by a plain closure; the gradient is differenced, which
/// is fine for the checks that only read values or smooth regions.
struct FnData<F: Fn(&Vec3) -> f64 + Sync>(F);

impl<F: Fn(&Vec3) -> f64 + Sync> LevelSetData for FnData<F> {
    fn value(&self, x: &Vec3) -> f64 {
        (self.0)(x)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let d = 1e-6;
        let mut g = Vec3::zeros();
        for ax in 0..3 {
            let (mut xp, mut xm) = (*x, *x);
            xp[ax] += d;
            xm[ax] -= d;
            g[ax] = ((self.0)(&xp) - (self.0)(&xm)) / (2.0 * d);
        }
        g
    }
}

/// Initial data scaled by a constant factor, so the gradient magnitude is
/// the factor instead of 1.
struct Scaled<D> {
    data: D,
    factor: f64,
}

impl<D: LevelSetData> LevelSetData for Scaled<D> {
    fn value(&self, x: &Vec3) -> f64 {
        self.factor * self.data.value(x)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        self.data.gradient(x) * self.factor
    }
}

#[test]
fn c01_characteristic_invariants_hold_along_random_trajectories() {
    let clock = Instant::now();
    let domain = sym_box(2.0);
    let fields = [
        build_field(FieldKind::RigidRotation { omega: 1.0 }, None, &domain, 1.0),
        build_field(FieldKind::Shear { sigma: 1.0 }, None, &domain, 1.0),
    ];
    let mut opts = IntegrateOptions::new(1e-3);
    opts.dim = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_p2 = 0.0f64;
    let mut worst_level = 0.0f64;
    let mut worst_orth = 0.0f64;
    for v in &fields {
        for k in 0..100 {
            let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            let ang = rng.random_range(0.0..TAU);
            let mag = rng.random_range(0.5..2.0);
            let p = Vec3::new(ang.cos(), ang.sin(), 0.0) * mag;
            let on_interface = k % 2 == 0;
            let seed = if on_interface {
                CharState::interface_seed(x, p)
            } else {
                CharState::new(x, p, rng.random_range(-0.2..0.2))
            };
            let traj = integrate_characteristic(v, seed, 0.0, 1.0, &opts).expect("trajectory");
            let p2_0 = seed.p.norm_squared();
            worst_p2 = worst_p2.max(traj.p2_drift);
            for s in &traj.samples {
                worst_p2 = worst_p2.max((s.state.p.norm_squared() - p2_0).abs());
                if on_interface {
                    worst_level = worst_level.max(s.state.phi.abs());
                }
                // the costate turns without changing length, so its velocity
                // must stay orthogonal to it
                let d = char_rhs(v, s.s, &s.state);
                let denom = s.state.p.norm() * d.p.norm() + 1e-30;
                worst_orth = worst_orth.max(d.p.dot(&s.state.p).abs() / denom);
            }
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let pass =
        worst_p2 <= 1e-10 && worst_level <= 1e-10 && worst_orth <= 1e-12 && elapsed < 10.0;
    verdict(
        "criterion 01, conservation along characteristics",
        pass,
        &format!(
            "|p|^2 drift {worst_p2:.2e} <= 1e-10, interface level {worst_level:.2e} <= 1e-10, \
             costate orthogonality {worst_orth:.2e} <= 1e-12, {elapsed:.1}s < 10s"
        ),
    );
}

/// Solve one rigid-motion tube and return the worst level error against the
/// moving analytic distance, the worst costate-magnitude deviation from 1,
/// and the leg count.
fn rigid_sdf_case(
    v: &AnalyticField,
    start: &AnalyticSurface,
    center_at: impl Fn(f64) -> Vec3,
    radius: f64,
    grid: &Grid,
) -> (f64, f64, usize) {
    let mut opts = TubeOptions::new(grid, 2.0, 1e-3);
    opts.record_every = 20;
    let sol = solve_tube(v, start, &opts).expect("tube");
    let mut worst_phi = 0.0f64;
    let mut worst_grad = 0.0f64;
    for store in &sol.stores {
        let c = center_at(store.s);
        for (st, &alive) in store.states.iter().zip(&store.alive) {
            if !alive {
                continue;
            }
            worst_grad = worst_grad.max((st.p.norm() - 1.0).abs());
            let sdf = (st.x - c).norm() - radius;
            worst_phi = worst_phi.max((st.phi - sdf).abs());
        }
    }
    (worst_phi, worst_grad, sol.legs.len())
}

#[test]
fn c02_rigid_motion_keeps_the_signed_distance_exact() {
    let clock = Instant::now();
    let domain = sym_box(2.0);
    let grid = square_grid(2.0, 1.0 / 64.0);
    let start = circle(0.5, 0.0, 0.6);

    let rot = build_field(FieldKind::RigidRotation { omega: 1.0 }, None, &domain, 2.0);
    let (rot_phi, rot_grad, rot_legs) = rigid_sdf_case(
        &rot,
        &start,
        |s| Vec3::new(0.5 * s.cos(), 0.5 * s.sin(), 0.0),
        0.6,
        &grid,
    );

    let trn = build_field(FieldKind::Translation { c: [0.3, -0.2, 0.0] }, None, &domain, 2.0);
    let (trn_phi, trn_grad, trn_legs) = rigid_sdf_case(
        &trn,
        &start,
        |s| Vec3::new(0.5 + 0.3 * s, -0.2 * s, 0.0),
        0.6,
        &grid,
    );

    let elapsed = clock.elapsed().as_secs_f64();
    let worst_phi = rot_phi.max(trn_phi);
    let worst_grad = rot_grad.max(trn_grad);
    let pass = worst_phi <= 1e-6
        && worst_grad <= 1e-6
        && rot_legs >= 2
        && trn_legs >= 2
        && elapsed < 30.0;
    verdict(
        "criterion 02, signed distance under rigid motion",
        pass,
        &format!(
            "level error {worst_phi:.2e} <= 1e-6, |grad|-1 {worst_grad:.2e} <= 1e-6, \
             legs {rot_legs}/{trn_legs} >= 2, {elapsed:.1}s < 30s"
        ),
    );
}

#[test]
fn c03_scaled_profile_keeps_its_gradient_magnitude() {
    let domain = sym_box(2.0);
    let grid = square_grid(2.0, 1.0 / 64.0);
    let v = build_field(FieldKind::Shear { sigma: 1.0 }, None, &domain, 1.0);
    let data = Scaled { data: circle(0.0, 0.0, 0.5), factor: 2.0 };
    let mut opts = TubeOptions::new(&grid, 1.0, 1e-3);
    opts.record_every = 20;
    let sol = solve_tube(&v, &data, &opts).expect("tube");
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for store in &sol.stores {
        for (st, &alive) in store.states.iter().zip(&store.alive) {
            if alive {
                worst = worst.max((st.p.norm() - 2.0).abs());
                samples += 1;
            }
        }
    }
    let pass = worst <= 1e-6 && samples > 0;
    verdict(
        "criterion 03, gradient magnitude away from the unit case",
        pass,
        &format!("||grad|-2| {worst:.2e} <= 1e-6 over {samples} samples"),
    );
}

/// Transport a circle by a rotation, then probe the projection formula
/// `x - phi grad(phi)` at random tube points: distance to the transported
/// interface mesh and alignment with the mesh normal at the landing point.
fn projection_case(h: f64, samples: usize, seed: u64) -> (f64, f64) {
    let domain = sym_box(2.0);
    let grid = square_grid(2.0, h);
    let v = build_field(FieldKind::RigidRotation { omega: 1.0 }, None, &domain, 0.5);
    let data = circle(0.5, 0.0, 0.6);
    let t = 0.5;
    let mut opts = TubeOptions::new(&grid, t, 1e-3);
    opts.record_every = 25;
    let sol = solve_tube(&v, &data, &opts).expect("tube");
    let mesh = sol.interface_at(t).expect("interface");
    let center = Vec3::new(0.5 * t.cos(), 0.5 * t.sin(), 0.0);
    let band_half = sol.band_final as f64 * 0.5 * sol.h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_dist = 0.0f64;
    let mut worst_ang = 0.0f64;
    let mut hits = 0usize;
    while hits < samples {
        let ang = rng.random_range(0.0..TAU);
        let off = rng.random_range(-0.6 * band_half..0.6 * band_half);
        let x = center + Vec3::new(ang.cos(), ang.sin(), 0.0) * (0.6 + off);
        let Some((phi, grad)) = sol.eval(t, &x) else {
            continue;
        };
        let proj = x - grad * phi;
        worst_dist = worst_dist.max(mesh.distance(&proj));
        let (vi, _) = mesh.nearest_vertex(&proj);
        worst_ang = worst_ang.max(angle_between_lines_deg(&(x - proj), &mesh.normals[vi]));
        hits += 1;
    }
    (worst_dist, worst_ang)
}

#[test]
fn c04_projection_lands_on_the_interface_along_its_normal() {
    let (d64, a64) = projection_case(1.0 / 64.0, 1000, 404);
    let (d128, a128) = projection_case(1.0 / 128.0, 1000, 405);
    let pass = d64 <= 2.0 / 64.0 && a64 <= 2.0 && d128 <= 1.0 / 64.0 && a128 <= 1.0;
    verdict(
        "criterion 04, projection formula accuracy",
        pass,
        &format!(
            "distance {d64:.2e} <= {:.2e} then {d128:.2e} <= {:.2e}, \
             angle {a64:.2}deg <= 2 then {a128:.2}deg <= 1",
            2.0 / 64.0,
            1.0 / 64.0
        ),
    );
}

#[test]
fn c05_grid_solver_tracks_the_tube_solution_at_first_order() {
    let t_end = 0.5;
    let domain = sym_box(1.5);
    let v = build_field(FieldKind::RigidRotation { omega: 1.0 }, Some(0.3), &domain, t_end);
    let data = circle(0.5, 0.0, 0.6);

    // one fixed fine tube reference for both grid resolutions
    let tgrid = square_grid(1.5, 1.0 / 128.0);
    let mut topts = TubeOptions::new(&tgrid, t_end, 1e-3);
    topts.record_every = 50;
    let tube = solve_tube(&v, &data, &topts).expect("tube");

    let reg = Regularizer::from_grad_floor(1.0).expect("regularizer");
    let mut errs = [0.0f64; 2];
    let mut secs = [0.0f64; 2];
    for (slot, k) in [64usize, 128].into_iter().enumerate() {
        let clock = Instant::now();
        let g = square_grid(1.5, 1.0 / k as f64);
        // clamp the far field so the plateau, not the domain corners, sets
        // the stable step; the comparison happens inside the tube where the
        // data is untouched
        let phi0 = ScalarField::from_fn(g, 0.0, |x| data.value(&x).clamp(-0.25, 0.25));
        let sol =
            solve_viscosity(&v, &phi0, &reg, &ViscosityOptions::new(t_end)).expect("grid solve");
        let snap = sol.snapshots.last().expect("final snapshot");
        errs[slot] = tube_error_norms(snap, &tube, t_end).expect("norms").max_abs;
        secs[slot] = clock.elapsed().as_secs_f64();
    }
    let ratio = errs[0] / errs[1];
    let rate_constant = errs[0] * 64.0;
    let pass = rate_constant <= 2.0
        && (1.5..=3.0).contains(&ratio)
        && secs[0] < 120.0
        && secs[1] < 120.0;
    verdict(
        "criterion 05, grid versus tube agreement",
        pass,
        &format!(
            "error {:.2e} then {:.2e}, C = err/h {rate_constant:.2} <= 2.0, \
             refinement ratio {ratio:.2} in [1.5, 3.0], {:.0}s/{:.0}s < 120s",
            errs[0], errs[1], secs[0], secs[1]
        ),
    );
}

#[test]
fn c06_grid_solutions_respect_the_comparison_envelopes() {
    let h = 1.0 / 64.0;
    let t_end = 0.5;
    let reg = Regularizer::from_grad_floor(1.0).expect("regularizer");
    let unit_box = Box3::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0));
    let cases: [(&str, AnalyticField, AnalyticSurface, Grid, f64); 4] = [
        (
            "rotation",
            build_field(FieldKind::RigidRotation { omega: 1.0 }, Some(0.3), &sym_box(1.5), t_end),
            circle(0.5, 0.0, 0.6),
            square_grid(1.5, h),
            t_end,
        ),
        (
            "translation",
            build_field(
                FieldKind::Translation { c: [0.4, 0.2, 0.0] },
                Some(0.3),
                &sym_box(1.5),
                t_end,
            ),
            circle(-0.3, -0.2, 0.5),
            square_grid(1.5, h),
            t_end,
        ),
        (
            "shear",
            build_field(FieldKind::Shear { sigma: 1.0 }, Some(0.3), &sym_box(1.5), t_end),
            circle(0.0, 0.0, 0.5),
            square_grid(1.5, h),
            t_end,
        ),
        (
            "vortex",
            build_field(FieldKind::SingleVortex { period: 1.0 }, None, &unit_box, 0.25),
            circle(0.5, 0.75, 0.15),
            Grid::new_2d([0.0, 0.0], h, 65, 65).expect("unit grid"),
            0.25,
        ),
    ];

    // clamped data has gradient magnitude at most 1, so the tolerance is 2h
    let tol = 2.0 * h;
    let mut detail = String::new();
    let mut pass = true;
    for (name, v, surf, grid, horizon) in &cases {
        let phi0 = ScalarField::from_fn(grid.clone(), 0.0, |x| surf.value(&x).clamp(-0.25, 0.25));
        let mut vopts = ViscosityOptions::new(*horizon);
        vopts.record = vec![0.5 * horizon];
        let sol = solve_viscosity(v, &phi0, &reg, &vopts).expect("grid solve");
        let clamped = FnData(|x: &Vec3| surf.value(x).clamp(-0.25, 0.25));
        let mut worst = 0.0f64;
        for snap in &sol.snapshots {
            let env =
                compute_envelopes(v, &clamped, grid, snap.t, 1.0 / 128.0).expect("envelopes");
            let rep = check_sandwich(snap, &env).expect("sandwich");
            worst = worst.max(rep.max_excess());
        }
        pass = pass && worst <= tol;
        detail.push_str(&format!("{name} {worst:.2e} "));
    }
    detail.push_str(&format!("all <= {tol:.2e}"));
    verdict("criterion 06, envelope sandwich on the catalog", pass, &detail);
}

#[test]
fn c07_stabilized_hamiltonian_is_monotone_in_the_level_value() {
    let reg = Regularizer::new(0.225).expect("regularizer");
    let shear = build_field(FieldKind::Shear { sigma: 1.0 }, None, &sym_box(1.0), 1.0);
    let rot = build_field(FieldKind::RigidRotation { omega: 1.0 }, Some(0.25), &sym_box(1.0), 1.0);
    let cases = [&shear, &rot];
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = f64::INFINITY;
    for v in cases {
        let v0 = v.lipschitz();
        for _ in 0..50_000 {
            let t = rng.random_range(0.0..1.0);
            let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            let ang = rng.random_range(0.0..TAU);
            let mag = rng.random_range(1e-3..3.0);
            let p = Vec3::new(ang.cos(), ang.sin(), 0.0) * mag;
            let u = rng.random_range(-0.5..0.5);
            let eps = rng.random_range(1e-6..0.5);
            let lo = monotonized_g(v, &reg, v0, t, &x, &p, u);
            let hi = monotonized_g(v, &reg, v0, t, &x, &p, u + eps);
            worst = worst.min((hi - lo) / eps);
        }
    }
    let pass = worst >= -1e-12;
    verdict(
        "criterion 07, stabilized update is monotone",
        pass,
        &format!("min difference quotient {worst:.3e} >= -1e-12 over 100000 samples"),
    );
}

#[test]
fn c08_inf_convolution_extension_is_tight_and_exact_on_samples() {
    let omega = sym_box(1.0);
    let v = build_field(FieldKind::Shear { sigma: 1.0 }, None, &omega, 1.0);
    let lambda = v.lipschitz();
    let samples = DomainSample::from_box(&omega, 2, 0.05).expect("domain sample");
    let t = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst_ratio = 0.0f64;
    let mut pairs = 0usize;
    while pairs < 10_000 {
        let x = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0);
        let y = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0);
        let sep = (x - y).norm();
        if sep < 1e-3 {
            continue;
        }
        let ex = lipschitz_extend(&v, lambda, &samples, t, &x).expect("extension");
        let ey = lipschitz_extend(&v, lambda, &samples, t, &y).expect("extension");
        for c in 0..3 {
            worst_ratio = worst_ratio.max((ex[c] - ey[c]).abs() / sep);
        }
        pairs += 1;
    }
    let mut worst_exact = 0.0f64;
    for z in samples.points.iter().step_by(8) {
        let e = lipschitz_extend(&v, lambda, &samples, t, z).expect("extension");
        let direct = v.eval(t, z);
        worst_exact = worst_exact.max((e - direct).abs().max());
    }
    let pass = worst_ratio <= lambda + 1e-9 && worst_exact <= 1e-12;
    verdict(
        "criterion 08, inf-convolution extension",
        pass,
        &format!(
            "difference ratio {worst_ratio:.12} <= lambda + 1e-9 = {:.9}, \
             on-sample deviation {worst_exact:.2e} <= 1e-12",
            lambda + 1e-9
        ),
    );
}

#[test]
fn c09_plain_transport_drifts_while_extension_transport_does_not() {
    let domain = sym_box(2.0);
    let grid = square_grid(2.0, 1.0 / 64.0);
    let v = build_field(FieldKind::Shear { sigma: 1.0 }, None, &domain, 1.0);
    let data = circle(0.0, 0.0, 0.5);
    let t = 1.0;
    let mut opts = TubeOptions::new(&grid, t, 1e-3);
    opts.record_every = 25;
    let sol = solve_tube(&v, &data, &opts).expect("tube");

    let mut ext_dev = 0.0f64;
    for store in &sol.stores {
        for (st, &alive) in store.states.iter().zip(&store.alive) {
            if alive {
                ext_dev = ext_dev.max((st.p.norm() - 1.0).abs());
            }
        }
    }

    // plain transport of the same data, gradient read at the same tube
    // points; under a unit shear its norm peaks near the golden ratio
    let store = sol.store_near(t).expect("final store");
    let mut plain_dev = 0.0f64;
    for (st, &alive) in store.states.iter().zip(&store.alive) {
        if !alive {
            continue;
        }
        let smp = linear_transport_exact(&v, &data, t, &st.x, 1e-2).expect("transport sample");
        plain_dev = plain_dev.max((smp.gradient.norm() - 1.0).abs());
    }
    let ratio = plain_dev / ext_dev.max(1e-300);
    let pass = plain_dev >= 0.5 && ext_dev <= 1e-6 && ratio >= 1e4;
    verdict(
        "criterion 09, drift of plain transport versus extension transport",
        pass,
        &format!(
            "plain ||grad|-1| {plain_dev:.3} >= 0.5 (analytic ceiling 0.618), \
             extension {ext_dev:.2e} <= 1e-6, ratio {ratio:.1e} >= 1e4"
        ),
    );
}

#[test]
fn c10_grid_schemes_are_monotone_keep_zero_boundaries_and_fix_constants() {
    let grid = Grid::new_2d([0.0, 0.0], 0.025, 41, 41).expect("grid");
    let unit_box = Box3::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0));
    let vortex = build_field(FieldKind::SingleVortex { period: 2.0 }, None, &unit_box, 1.0);
    let rot = build_field(FieldKind::RigidRotation { omega: 1.0 }, None, &unit_box, 1.0);
    let reg = Regularizer::new(0.225).expect("regularizer");
    let mut rng = ChaCha8Rng::seed_from_u64(1010);

    // randomized monotonicity probe: with the dissipation coefficients and
    // step frozen, raising one input never lowers any output of the update
    let coef: Vec<f64> = (0..6).map(|_| rng.random_range(-0.3..0.3)).collect();
    let rough = ScalarField::from_fn(grid.clone(), 0.0, |x| {
        coef[0] * (TAU * x.x).sin()
            + coef[1] * (TAU * x.y).cos()
            + coef[2] * (2.0 * TAU * x.x + 1.0).cos()
            + coef[3] * (2.0 * TAU * x.y).sin()
            + coef[4] * (TAU * (x.x + x.y)).sin()
            + coef[5]
    });
    let diss = dissipation(&rough, &vortex, &reg);
    let dt = 0.5 * max_stable_dt(&rough, &vortex, &diss, 0.4);
    let base = llf_step(&rough, &vortex, &reg, dt, &diss).expect("base step");
    let mut worst_drop = 0.0f64;
    for _ in 0..40 {
        let idx = rng.random_range(0..grid.len());
        let mut bumped = rough.clone();
        bumped.data[idx] += 1e-6;
        let out = llf_step(&bumped, &vortex, &reg, dt, &diss).expect("bumped step");
        for (a, b) in out.data.iter().zip(&base.data) {
            worst_drop = worst_drop.min(a - b);
        }
    }
    let monotone = worst_drop >= -1e-15;

    // data that vanishes on the boundary keeps exact zeros there
    let surf = circle(0.5, 0.5, 0.3);
    let edge_weight = |x: &Vec3| {
        let mut w = 1.0;
        for ax in 0..2 {
            let d = (x[ax].min(1.0 - x[ax])).max(0.0);
            let s = (d / 0.15).min(1.0);
            w *= s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        }
        w
    };
    let phi0 =
        ScalarField::from_fn(grid.clone(), 0.0, |x| surf.value(&x).clamp(-0.2, 0.2) * edge_weight(&x));
    let sol =
        solve_viscosity(&vortex, &phi0, &reg, &ViscosityOptions::new(0.1)).expect("grid solve");
    let last = sol.snapshots.last().expect("snapshot");
    let mut boundary_zero = true;
    let mut interior_moved = false;
    for idx in 0..grid.len() {
        let [i, j, k] = grid.coords(idx);
        if grid.on_boundary(i, j, k) {
            boundary_zero = boundary_zero && last.data[idx] == 0.0;
        } else if (last.data[idx] - phi0.data[idx]).abs() > 1e-6 {
            interior_moved = true;
        }
    }

    // constants are fixed points of both grid updates, bit for bit, and the
    // tube solver refuses them outright for want of an interface; the
    // corrector and the relaxed source are excluded by design, since they
    // prescribe a gradient magnitude and therefore must move constants
    let flat = ScalarField::from_fn(grid.clone(), 0.0, |_| 0.7);
    let mut constants_fixed = true;
    for v in [&vortex, &rot] {
        let a = llf_step(&flat, v, &reg, 1e-3, &dissipation(&flat, v, &reg))
            .expect("constant step");
        let b = nmm_step(&flat, v, None, 1e-3).expect("constant source step");
        constants_fixed = constants_fixed && a.data == flat.data && b.data == flat.data;
    }
    let end = solve_viscosity(&vortex, &flat, &reg, &ViscosityOptions::new(0.05))
        .expect("constant solve");
    constants_fixed =
        constants_fixed && end.snapshots.last().expect("snapshot").data == flat.data;
    let refused = matches!(
        solve_tube(&vortex, &FnData(|_: &Vec3| 0.7), &TubeOptions::new(&grid, 0.1, 1e-3)),
        Err(Error::EmptyInterface)
    );

    let pass = monotone && boundary_zero && interior_moved && constants_fixed && refused;
    verdict(
        "criterion 10, scheme sanity",
        pass,
        &format!(
            "monotone drop {worst_drop:.1e} >= -1e-15 over 40 probes x 1681 nodes, \
             boundary zeros {boundary_zero}, interior moved {interior_moved}, \
             constants fixed {constants_fixed}, tube refuses constants {refused}"
        ),
    );
}
