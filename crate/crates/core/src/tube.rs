//! Tube solver: transports a level function in a band around its zero set by
//! integrating the characteristic system of the projection Hamiltonian.
//!
//! Seeding places points on the initial interface (mesh vertices, Newton
//! projected onto the exact zero set) and along their normals at offsets
//! `m h/2` for `|m| <= band_halfwidth`. Each seed carries its exact initial
//! level value and gradient; both ride the characteristics unchanged in the
//! sense that the level value is conserved and the costate is the
//! transported gradient.
//!
//! Trajectories are integrated once over the whole time range. Legs are
//! bookkeeping on top of that lattice: at most `max_leg_time` long (from the
//! a priori bounds), each leg checks that the seed map stayed injective
//! (collision test at mid and end of leg, band shrink on failure) and that
//! the interface seed-map Jacobians kept positive determinant, then restarts
//! the variational state. Cutting the band never touches surviving
//! trajectories, it only narrows the reconstructed tube.
//!
//! Reconstruction evaluates the level function at a recorded time level by
//! blending first-order Taylor extrapolations from nearby seeds.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::characteristics::{
    char_rhs, rk4_step, var_rhs, CharState, CharacteristicBounds, VarState,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{self, LevelSetData};
use crate::grid::{Box3, Grid};
use crate::interface::{extract_interface, Elements, InterfaceMesh};
use crate::velocity::VelocityField;
use crate::Vec3;

#[derive(Debug, Clone)]
pub struct TubeOptions {
    /// Working domain and default resolution.
    pub grid: Grid,
    pub t_end: f64,
    /// Upper bound on the characteristic step; the actual step divides
    /// `t_end` evenly.
    pub dt: f64,
    /// Store cadence in steps.
    pub record_every: usize,
    /// Tube resolution: seeds sit at offsets `m h/2`, the reconstruction
    /// kernel and the collision thresholds scale with it.
    pub h: f64,
    /// Seeds span offsets `-band_halfwidth..=band_halfwidth`; clamped at
    /// seeding when the interface curvature cannot support the full band.
    pub band_halfwidth: usize,
    /// Spacing of the interface point sample.
    pub seed_spacing: f64,
    /// The guard box is the grid bounds inflated by this factor.
    pub guard_inflation: f64,
    /// Step used by the a priori bounds pass.
    pub bounds_dt: f64,
    /// Band halvings allowed per injectivity check before giving up.
    pub max_shrinks: usize,
}

impl TubeOptions {
    pub fn new(grid: &Grid, t_end: f64, dt: f64) -> Self {
        TubeOptions {
            grid: grid.clone(),
            t_end,
            dt,
            record_every: 10,
            h: grid.h,
            band_halfwidth: 10,
            seed_spacing: grid.h,
            guard_inflation: 1.1,
            bounds_dt: (t_end / 128.0).max(dt),
            max_shrinks: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("tube horizon", self.t_end),
            ("tube step", self.dt),
            ("tube resolution", self.h),
            ("seed spacing", self.seed_spacing),
            ("bounds step", self.bounds_dt),
        ] {
            if !(value > 0.0) {
                return Err(Error::NotPositive { what, value });
            }
        }
        if self.band_halfwidth == 0 {
            return Err(Error::invalid("band halfwidth", "at least one offset pair is needed"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record cadence", "must be at least 1"));
        }
        if self.guard_inflation < 1.0 {
            return Err(Error::invalid("guard inflation", "must not deflate the domain"));
        }
        if self.max_shrinks == 0 {
            return Err(Error::invalid("shrink budget", "must be at least 1"));
        }
        Ok(())
    }
}

/// Identity of one seed: the interface vertex it hangs off and its offset
/// index along the normal.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SeedInfo {
    pub parent: u32,
    pub offset: i32,
    pub on_interface: bool,
}

/// One recorded time level: every seed's state and liveness.
#[derive(Debug, Clone)]
pub struct TubeStore {
    pub s: f64,
    pub states: Vec<CharState>,
    pub alive: Vec<bool>,
    hash: SpatialHash,
}

/// Bookkeeping summary of one leg.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Leg {
    pub t_start: f64,
    pub t_end: f64,
    /// Band halfwidth in force when the leg closed.
    pub band: usize,
    pub shrinks: usize,
    /// Smallest interface seed-map determinant at the leg end.
    pub min_det: f64,
    /// Seeds lost to the guard box or degeneracy during the leg.
    pub deaths: usize,
}

#[derive(Debug, Clone)]
pub struct TubeSolution {
    pub grid: Grid,
    pub h: f64,
    pub t_end: f64,
    /// Actual characteristic step used.
    pub dt: f64,
    pub seeds: Vec<SeedInfo>,
    pub seed_states: Vec<CharState>,
    pub stores: Vec<TubeStore>,
    pub legs: Vec<Leg>,
    pub bounds: CharacteristicBounds,
    /// Leg length actually scheduled (steps times `dt`).
    pub leg_time: f64,
    pub band_initial: usize,
    pub band_final: usize,
    /// Max drift of `|p|^2` over all seeds, an integration-error probe.
    pub p2_drift: f64,
    /// Interface topology from seeding; vertex `i` is seed `vertex_seed[i]`.
    pub elements: Elements,
    pub vertex_seed: Vec<u32>,
    store_gap: f64,
}

#[derive(Debug, Clone)]
struct SpatialHash {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SpatialHash {
    fn key(cell: f64, x: &Vec3) -> (i64, i64, i64) {
        (
            (x.x / cell).floor() as i64,
            (x.y / cell).floor() as i64,
            (x.z / cell).floor() as i64,
        )
    }

    fn build(points: impl Iterator<Item = (u32, Vec3)>, cell: f64) -> Self {
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (id, x) in points {
            map.entry(Self::key(cell, &x)).or_default().push(id);
        }
        SpatialHash { cell, map }
    }

    /// Visit ids in all cells overlapping the ball of `radius` around `x`;
    /// the caller rechecks exact distances.
    fn near(&self, x: &Vec3, radius: f64, mut f: impl FnMut(u32)) {
        let lo = Self::key(self.cell, &(x - Vec3::new(radius, radius, radius)));
        let hi = Self::key(self.cell, &(x + Vec3::new(radius, radius, radius)));
        for kz in lo.2..=hi.2 {
            for ky in lo.1..=hi.1 {
                for kx in lo.0..=hi.0 {
                    if let Some(ids) = self.map.get(&(kx, ky, kz)) {
                        for &id in ids {
                            f(id);
                        }
                    }
                }
            }
        }
    }
}

/// Injectivity probe: a pair of live seeds is flagged when their images sit
/// closer than `h/2` while their seeding positions are more than four times
/// the image distance apart. Uniform compression is tolerated; folds, where
/// far-apart seeds land on top of each other, are not. Pairs come back
/// sorted, coincident duplicates are never flagged.
pub fn detect_collisions(
    images: &[Vec3],
    seed_positions: &[Vec3],
    alive: &[bool],
    h: f64,
) -> Vec<(u32, u32)> {
    let threshold = 0.5 * h;
    let hash = SpatialHash::build(
        images
            .iter()
            .enumerate()
            .filter(|(i, _)| alive[*i])
            .map(|(i, x)| (i as u32, *x)),
        threshold.max(1e-300),
    );
    let mut pairs = Vec::new();
    for (i, xi) in images.iter().enumerate() {
        if !alive[i] {
            continue;
        }
        hash.near(xi, threshold, |j| {
            let j = j as usize;
            if j <= i {
                return;
            }
            let image_dist = (images[j] - xi).norm();
            if image_dist < threshold {
                let seed_dist = (seed_positions[j] - seed_positions[i]).norm();
                if seed_dist > 4.0 * image_dist {
                    pairs.push((i as u32, j as u32));
                }
            }
        });
    }
    pairs.sort_unstable();
    pairs
}

struct Seeding {
    infos: Vec<SeedInfo>,
    states: Vec<CharState>,
    elements: Elements,
    vertex_seed: Vec<u32>,
    band: usize,
}

fn seed_tube<D: LevelSetData + ?Sized>(data: &D, opts: &TubeOptions) -> Result<Seeding> {
    // sample the data on a grid at seed spacing, inside the working bounds
    let bounds = opts.grid.bounds();
    let w = bounds.widths();
    let mut n = [1usize; 3];
    for ax in 0..opts.grid.dim {
        n[ax] = (w[ax] / opts.seed_spacing).floor() as usize + 1;
    }
    let ex_grid = Grid::new(opts.grid.dim, opts.grid.origin, opts.seed_spacing, n)?;
    let sampled = ScalarField::from_fn(ex_grid, 0.0, |x| data.value(&x));
    let mesh = extract_interface(&sampled)?;

    // project vertices onto the exact zero set
    let mut points = Vec::with_capacity(mesh.len());
    for x0 in &mesh.points {
        let p = geometry::project_to_surface(data, x0, 8)?;
        if data.value(&p).abs() > 1e-8 {
            return Err(Error::invalid(
                "seeding",
                format!("projection stalled at residual {}", data.value(&p)),
            ));
        }
        points.push(p);
    }

    // curvature limits how far offset surfaces stay embedded
    let band = {
        let kappa = mesh
            .curvatures
            .iter()
            .filter(|k| k.is_finite())
            .fold(0.0f64, |m, k| m.max(k.abs()));
        if kappa > 0.0 {
            let fit = (0.9 / (kappa * 0.5 * opts.h)).floor() as usize;
            opts.band_halfwidth.min(fit.max(1))
        } else {
            opts.band_halfwidth
        }
    };

    let per_vertex = 2 * band + 1;
    let mut infos = Vec::with_capacity(points.len() * per_vertex);
    let mut states = Vec::with_capacity(points.len() * per_vertex);
    let mut vertex_seed = Vec::with_capacity(points.len());
    for (vi, sigma) in points.iter().enumerate() {
        let g = data.gradient(sigma);
        let mag = g.norm();
        if !(mag >= geometry::GRAD_FLOOR) {
            return Err(Error::DegenerateGradient { mag, min: geometry::GRAD_FLOOR, x: *sigma });
        }
        let n_hat = g / mag;
        for m in -(band as i32)..=(band as i32) {
            if m == 0 {
                vertex_seed.push(states.len() as u32);
                infos.push(SeedInfo { parent: vi as u32, offset: 0, on_interface: true });
                states.push(CharState::interface_seed(*sigma, g));
                continue;
            }
            let x = sigma + n_hat * (m as f64 * 0.5 * opts.h);
            let value = data.value(&x);
            let grad = data.gradient(&x);
            if !value.is_finite() || !grad.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite { what: "seed data".into(), t: 0.0 });
            }
            infos.push(SeedInfo { parent: vi as u32, offset: m, on_interface: false });
            states.push(CharState::new(x, grad, value));
        }
    }
    Ok(Seeding { infos, states, elements: mesh.elements, vertex_seed, band })
}

#[derive(Clone, Copy, PartialEq)]
enum StepFlag {
    Fine,
    Exited,
    NonFinite,
    Degenerate,
}

/// Advance every live seed by one RK4 step; interface seeds carry their
/// variational state along.
fn advance<V: VelocityField + ?Sized>(
    v: &V,
    t: f64,
    dt: f64,
    states: &mut [CharState],
    var: &mut [Option<VarState>],
    alive: &[bool],
    guard: &Box3,
    dim: usize,
) -> Vec<StepFlag> {
    states
        .par_iter_mut()
        .zip(var.par_iter_mut())
        .zip(alive.par_iter())
        .map(|((st, vs), &live)| {
            if !live {
                return StepFlag::Fine;
            }
            let next = match vs {
                Some(vstate) => {
                    let y = rk4_step(
                        &mut |s, y: &[f64; 19]| var_rhs(v, s, &VarState::unpack(y)).pack(),
                        t,
                        &vstate.pack(),
                        dt,
                    );
                    let nv = VarState::unpack(&y);
                    if !nv.jac.iter().all(|c| c.is_finite())
                        || !nv.level_grad.iter().all(|c| c.is_finite())
                    {
                        return StepFlag::NonFinite;
                    }
                    *vstate = nv;
                    nv.core
                }
                None => {
                    let y = rk4_step(
                        &mut |s, y: &[f64; 7]| char_rhs(v, s, &CharState::unpack(y)).pack(),
                        t,
                        &st.pack(),
                        dt,
                    );
                    CharState::unpack(&y)
                }
            };
            if !next.is_finite() {
                return StepFlag::NonFinite;
            }
            *st = next;
            if next.p.norm() < geometry::GRAD_FLOOR {
                return StepFlag::Degenerate;
            }
            if !guard.contains(&next.x, dim) {
                return StepFlag::Exited;
            }
            StepFlag::Fine
        })
        .collect()
}

/// Transport the zero set of `data` under `v` over `[0, opts.t_end]`.
pub fn solve_tube<V, D>(v: &V, data: &D, opts: &TubeOptions) -> Result<TubeSolution>
where
    V: VelocityField + ?Sized,
    D: LevelSetData + ?Sized,
{
    opts.validate()?;
    let dim = opts.grid.dim;
    let guard = opts.grid.bounds().inflate(opts.guard_inflation, dim);
    let seeding = seed_tube(data, opts)?;
    let n_seeds = seeding.states.len();

    // a priori bounds from a thinned interface sample
    let bounds = {
        let stride = (seeding.vertex_seed.len() / 48).max(1);
        let sample: Vec<CharState> = seeding
            .vertex_seed
            .iter()
            .step_by(stride)
            .map(|&i| seeding.states[i as usize])
            .collect();
        CharacteristicBounds::estimate(v, &sample, (0.0, opts.t_end), opts.bounds_dt)?
    };
    let t_star = bounds.max_leg_time();

    let n_total = ((opts.t_end / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.t_end / n_total as f64;
    // legs align to the step lattice; a cadence coarser than the leg budget
    // degrades to one step per leg
    let leg_steps = ((t_star / dt + 1e-9).floor() as usize).clamp(1, n_total);

    let mut states = seeding.states.clone();
    let mut var: Vec<Option<VarState>> = seeding
        .infos
        .iter()
        .zip(&states)
        .map(|(info, st)| info.on_interface.then(|| VarState::fresh(*st)))
        .collect();
    let mut alive = vec![true; n_seeds];
    let seed_positions: Vec<Vec3> = states.iter().map(|s| s.x).collect();
    let p2_ref: Vec<f64> = states.iter().map(|s| s.p.norm_squared()).collect();

    // seeds born outside the guard die immediately; a confined interface is
    // a precondition
    for (i, st) in states.iter().enumerate() {
        if !guard.contains(&st.x, dim) {
            if seeding.infos[i].on_interface {
                return Err(Error::BlowUp { s: 0.0 });
            }
            alive[i] = false;
        }
    }

    let mut stores: Vec<TubeStore> = Vec::new();
    let empty_hash = SpatialHash { cell: 1.0, map: HashMap::new() };
    let push_store = |stores: &mut Vec<TubeStore>,
                          s: f64,
                          states: &[CharState],
                          alive: &[bool]| {
        stores.push(TubeStore {
            s,
            states: states.to_vec(),
            alive: alive.to_vec(),
            hash: empty_hash.clone(),
        });
    };
    push_store(&mut stores, 0.0, &states, &alive);

    let mut band = seeding.band;
    let mut legs: Vec<Leg> = Vec::new();
    let mut p2_drift = 0.0f64;
    let mut leg_start_step = 0usize;
    let mut stores_since_leg: Vec<usize> = vec![0];
    let mut shrinks_in_leg = 0usize;
    let mut deaths_in_leg = 0usize;

    // returns the shrink count consumed to clear all collisions
    let run_injectivity_check = |states: &[CharState],
                                 alive: &mut [bool],
                                 stores: &mut [TubeStore],
                                 since: &[usize],
                                 band: &mut usize,
                                 shrinks: &mut usize,
                                 leg_ix: usize,
                                 budget: usize|
     -> Result<()> {
        loop {
            let images: Vec<Vec3> = states.iter().map(|s| s.x).collect();
            let pairs = detect_collisions(&images, &seed_positions, alive, opts.h);
            if pairs.is_empty() {
                return Ok(());
            }
            if *shrinks >= budget || *band <= 1 {
                return Err(Error::InjectivityLost { leg: leg_ix, retries: *shrinks as u32 });
            }
            *band = (*band / 2).max(1);
            *shrinks += 1;
            for (i, info) in seeding.infos.iter().enumerate() {
                if info.offset.unsigned_abs() as usize > *band && alive[i] {
                    alive[i] = false;
                    for &sx in since {
                        stores[sx].alive[i] = false;
                    }
                }
            }
        }
    };

    // seeding itself must be injective
    run_injectivity_check(
        &states,
        &mut alive,
        &mut stores,
        &stores_since_leg,
        &mut band,
        &mut shrinks_in_leg,
        0,
        opts.max_shrinks,
    )?;

    for step in 1..=n_total {
        let s_prev = dt * (step - 1) as f64;
        let s = dt * step as f64;
        let flags = advance(v, s_prev, dt, &mut states, &mut var, &alive, &guard, dim);
        for (i, flag) in flags.iter().enumerate() {
            if *flag == StepFlag::Fine {
                continue;
            }
            if seeding.infos[i].on_interface {
                return Err(match flag {
                    StepFlag::Exited => Error::BlowUp { s },
                    StepFlag::Degenerate => Error::DegenerateGradient {
                        mag: states[i].p.norm(),
                        min: geometry::GRAD_FLOOR,
                        x: states[i].x,
                    },
                    _ => Error::NonFinite { what: "interface characteristic".into(), t: s },
                });
            }
            alive[i] = false;
            deaths_in_leg += 1;
        }
        for (i, st) in states.iter().enumerate() {
            if alive[i] {
                p2_drift = p2_drift.max((st.p.norm_squared() - p2_ref[i]).abs());
            }
        }
        if step % opts.record_every == 0 || step == n_total {
            push_store(&mut stores, s, &states, &alive);
            stores_since_leg.push(stores.len() - 1);
        }

        let leg_len = leg_steps.min(n_total - leg_start_step);
        let in_leg = step - leg_start_step;
        let mid = leg_len.div_ceil(2);
        if in_leg == mid && mid < leg_len {
            run_injectivity_check(
                &states,
                &mut alive,
                &mut stores,
                &stores_since_leg,
                &mut band,
                &mut shrinks_in_leg,
                legs.len(),
                opts.max_shrinks,
            )?;
        }
        if in_leg == leg_len {
            run_injectivity_check(
                &states,
                &mut alive,
                &mut stores,
                &stores_since_leg,
                &mut band,
                &mut shrinks_in_leg,
                legs.len(),
                opts.max_shrinks,
            )?;
            // the interface seed map must preserve orientation over the leg
            let mut min_det = f64::INFINITY;
            for (i, vs) in var.iter_mut().enumerate() {
                if let Some(vstate) = vs {
                    if alive[i] {
                        let det = vstate.jac.determinant();
                        if det <= 0.0 {
                            return Err(Error::JacobianSign { det, leg: legs.len() });
                        }
                        min_det = min_det.min(det);
                    }
                    *vstate = VarState::fresh(states[i]);
                }
            }
            legs.push(Leg {
                t_start: dt * leg_start_step as f64,
                t_end: s,
                band,
                shrinks: shrinks_in_leg,
                min_det,
                deaths: deaths_in_leg,
            });
            leg_start_step = step;
            stores_since_leg.clear();
            shrinks_in_leg = 0;
            deaths_in_leg = 0;
        }
    }

    // reconstruction queries go through per-store spatial hashes, built once
    // the liveness masks are final
    for store in &mut stores {
        store.hash = SpatialHash::build(
            store
                .states
                .iter()
                .enumerate()
                .filter(|(i, _)| store.alive[*i])
                .map(|(i, st)| (i as u32, st.x)),
            2.0 * opts.h,
        );
    }
    let store_gap = stores
        .windows(2)
        .map(|w| w[1].s - w[0].s)
        .fold(0.0f64, f64::max)
        .max(dt);

    Ok(TubeSolution {
        grid: opts.grid.clone(),
        h: opts.h,
        t_end: opts.t_end,
        dt,
        seeds: seeding.infos,
        seed_states: seeding.states,
        stores,
        legs,
        bounds,
        leg_time: leg_steps as f64 * dt,
        band_initial: seeding.band,
        band_final: band,
        p2_drift,
        elements: seeding.elements,
        vertex_seed: seeding.vertex_seed,
        store_gap,
    })
}

impl TubeSolution {
    /// Recorded time level nearest to `t`, if `t` lies within half a store
    /// gap of one.
    pub fn store_near(&self, t: f64) -> Option<&TubeStore> {
        let best = self
            .stores
            .iter()
            .min_by(|a, b| (a.s - t).abs().total_cmp(&(b.s - t).abs()))?;
        ((best.s - t).abs() <= 0.5 * self.store_gap + 1e-9).then_some(best)
    }

    /// Level value and gradient at `(t, x)` blended from seeds within `2h`,
    /// or `None` outside the tube or away from any recorded time level.
    ///
    /// Each seed contributes its exact transported Taylor polynomial
    /// `phi_i + p_i . (x - x_i)` with Gaussian weights in the distance, so
    /// affine level functions are reproduced exactly and smooth ones to
    /// second order in `h`.
    pub fn eval(&self, t: f64, x: &Vec3) -> Option<(f64, Vec3)> {
        let store = self.store_near(t)?;
        let radius = 2.0 * self.h;
        let sigma = 0.75 * self.h;
        let mut den = 0.0;
        let mut num = 0.0;
        let mut grad = Vec3::zeros();
        store.hash.near(x, radius, |i| {
            let i = i as usize;
            let st = &store.states[i];
            let d = (x - st.x).norm();
            if d <= radius {
                let w = (-(d / sigma) * (d / sigma)).exp();
                num += w * (st.phi + st.p.dot(&(x - st.x)));
                grad += st.p * w;
                den += w;
            }
        });
        (den > 0.0).then(|| (num / den, grad / den))
    }

    /// Interface at the recorded time level nearest `t`: transported seed
    /// positions with the seeding topology. Normals point toward the
    /// negative phase; curvatures are differenced from the reconstruction
    /// and may be non-finite at poorly covered vertices.
    pub fn interface_at(&self, t: f64) -> Result<InterfaceMesh> {
        let store = self
            .store_near(t)
            .ok_or_else(|| Error::invalid("interface query", "time not near a recorded level"))?;
        let mut points = Vec::with_capacity(self.vertex_seed.len());
        let mut normals = Vec::with_capacity(self.vertex_seed.len());
        let mut curvatures = Vec::with_capacity(self.vertex_seed.len());
        for &si in &self.vertex_seed {
            let st = &store.states[si as usize];
            points.push(st.x);
            normals.push(-st.p / st.p.norm());
            curvatures.push(self.curvature_from_eval(store.s, &st.x));
        }
        Ok(InterfaceMesh {
            t: store.s,
            points,
            normals,
            curvatures,
            elements: self.elements.clone(),
        })
    }

    /// `-div(grad/|grad|)` differenced from the reconstruction.
    fn curvature_from_eval(&self, t: f64, x: &Vec3) -> f64 {
        let delta = 0.5 * self.h;
        let mut div = 0.0;
        for ax in 0..self.grid.dim {
            let (mut xp, mut xm) = (*x, *x);
            xp[ax] += delta;
            xm[ax] -= delta;
            let (gp, gm) = match (self.eval(t, &xp), self.eval(t, &xm)) {
                (Some((_, gp)), Some((_, gm))) => (gp, gm),
                _ => return f64::NAN,
            };
            let (np, nm) = (gp.norm(), gm.norm());
            if np < geometry::GRAD_FLOOR || nm < geometry::GRAD_FLOOR {
                return f64::NAN;
            }
            div += (gp[ax] / np - gm[ax] / nm) / (2.0 * delta);
        }
        -div
    }

    /// Sample the reconstruction on the working grid at the recorded level
    /// nearest `t`; nodes outside the tube hold NaN.
    pub fn to_grid_field(&self, t: f64) -> Result<ScalarField> {
        let store = self
            .store_near(t)
            .ok_or_else(|| Error::invalid("grid sampling", "time not near a recorded level"))?;
        let s = store.s;
        Ok(ScalarField::from_fn(self.grid.clone(), s, |x| {
            self.eval(s, &x).map(|(v, _)| v).unwrap_or(f64::NAN)
        }))
    }

    /// Live seed count at the last recorded level.
    pub fn final_alive(&self) -> usize {
        self.stores
            .last()
            .map(|s| s.alive.iter().filter(|a| **a).count())
            .unwrap_or(0)
    }
}
