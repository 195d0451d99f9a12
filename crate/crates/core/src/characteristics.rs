//! Characteristic system of the projection Hamiltonian
//! `H(t, x, p, u) = v(t, x - u p / |p|^2) . p` and its variational
//! (seed-derivative) extension.
//!
//! States carry position `x`, costate `p` (the transported level-set
//! gradient) and the level value `phi`. Writing `y = x - phi p / |p|^2`,
//! `G = grad v(s, y)`, `gp = G^T p` and `a = (|p|^2 I - 2 p p^T) gp`, the
//! system `x' = H_p`, `p' = -H_x - H_u p`, `phi' = p . H_p - H` reduces to
//!
//! ```text
//! x'   = v(s, y) - (phi / |p|^4) a
//! p'   = -gp + ((gp . p) / |p|^2) p
//! phi' = -(phi / |p|^4) (a . p)
//! ```
//!
//! Two exact invariants fall out: `p' . p = 0`, so `|p|` is conserved, and
//! `phi' ~ phi`, so interface seeds (`phi = 0`) stay on the moving
//! interface. Both are asserted by the integration tests; the RK4 drift on
//! `|p|^2` is tracked per trajectory.

use crate::error::{Error, Result};
use crate::grid::Box3;
use crate::velocity::VelocityField;
use crate::{Mat3, Vec3};

/// Costates weaker than this are treated as degenerate.
const P_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState {
    pub x: Vec3,
    pub p: Vec3,
    pub phi: f64,
}

impl CharState {
    pub fn new(x: Vec3, p: Vec3, phi: f64) -> Self {
        CharState { x, p, phi }
    }

    /// Seed on the interface itself: level value zero, costate the level
    /// gradient there.
    pub fn interface_seed(x: Vec3, grad: Vec3) -> Self {
        CharState { x, p: grad, phi: 0.0 }
    }

    pub(crate) fn pack(&self) -> [f64; 7] {
        [self.x.x, self.x.y, self.x.z, self.p.x, self.p.y, self.p.z, self.phi]
    }

    pub(crate) fn unpack(y: &[f64; 7]) -> Self {
        CharState {
            x: Vec3::new(y[0], y[1], y[2]),
            p: Vec3::new(y[3], y[4], y[5]),
            phi: y[6],
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.p.iter().all(|v| v.is_finite())
            && self.phi.is_finite()
    }
}

/// `|p|^2 I - 2 p p^T`: scaled reflection across the plane normal to `p`.
pub fn reflection_matrix(p: &Vec3) -> Mat3 {
    Mat3::identity() * p.norm_squared() - p * p.transpose() * 2.0
}

/// Shared geometry of one right-hand-side evaluation.
struct RhsTerms {
    vel: Vec3,
    gp: Vec3,
    a: Vec3,
    grad: Mat3,
    p2: f64,
}

fn rhs_terms<V: VelocityField + ?Sized>(v: &V, s: f64, st: &CharState) -> RhsTerms {
    let p2 = st.p.norm_squared();
    let y = st.x - st.p * (st.phi / p2);
    let vel = v.eval(s, &y);
    let grad = v.grad(s, &y);
    let gp = grad.transpose() * st.p;
    let a = gp * p2 - st.p * (2.0 * st.p.dot(&gp));
    RhsTerms { vel, gp, a, grad, p2 }
}

/// Hamiltonian value at an arbitrary state.
pub fn hamiltonian<V: VelocityField + ?Sized>(
    v: &V,
    t: f64,
    x: &Vec3,
    p: &Vec3,
    phi: f64,
) -> f64 {
    let y = x - p * (phi / p.norm_squared());
    v.eval(t, &y).dot(p)
}

/// Time derivative of a characteristic state.
pub fn char_rhs<V: VelocityField + ?Sized>(v: &V, s: f64, st: &CharState) -> CharState {
    let t = rhs_terms(v, s, st);
    let p4 = t.p2 * t.p2;
    CharState {
        x: t.vel - t.a * (st.phi / p4),
        p: -t.gp + st.p * (t.gp.dot(&st.p) / t.p2),
        phi: -(st.phi / p4) * t.a.dot(&st.p),
    }
}

/// Characteristic state with the derivative of the seed map attached:
/// `jac = dx/dseed` and `level_grad = dphi/dseed`.
///
/// Valid along interface trajectories only. There `phi` vanishes
/// identically, which kills every term involving `dp/dseed` and second
/// velocity derivatives, so the costate derivative need not be carried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarState {
    pub core: CharState,
    pub jac: Mat3,
    pub level_grad: Vec3,
}

impl VarState {
    /// Start (or restart) the seed derivative at the current state: identity
    /// Jacobian, level gradient equal to the current costate.
    pub fn fresh(core: CharState) -> Self {
        VarState { core, jac: Mat3::identity(), level_grad: core.p }
    }

    pub(crate) fn pack(&self) -> [f64; 19] {
        let mut out = [0.0; 19];
        out[..7].copy_from_slice(&self.core.pack());
        out[7..16].copy_from_slice(self.jac.as_slice());
        out[16] = self.level_grad.x;
        out[17] = self.level_grad.y;
        out[18] = self.level_grad.z;
        out
    }

    pub(crate) fn unpack(y: &[f64; 19]) -> Self {
        let mut head = [0.0; 7];
        head.copy_from_slice(&y[..7]);
        VarState {
            core: CharState::unpack(&head),
            jac: Mat3::from_column_slice(&y[7..16]),
            level_grad: Vec3::new(y[16], y[17], y[18]),
        }
    }
}

/// Time derivative of a variational state.
pub fn var_rhs<V: VelocityField + ?Sized>(v: &V, s: f64, st: &VarState) -> VarState {
    let t = rhs_terms(v, s, &st.core);
    let p4 = t.p2 * t.p2;
    let level_rate = -t.a.dot(&st.core.p) / p4;
    let bracket = t.grad * st.core.p / t.p2 + t.a / p4;
    VarState {
        core: CharState {
            x: t.vel - t.a * (st.core.phi / p4),
            p: -t.gp + st.core.p * (t.gp.dot(&st.core.p) / t.p2),
            phi: st.core.phi * level_rate,
        },
        jac: t.grad * st.jac - bracket * st.level_grad.transpose(),
        level_grad: st.level_grad * level_rate,
    }
}

/// One classical fourth-order step; sign of `dt` selects the direction.
pub(crate) fn rk4_step<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> [f64; N] {
    let k1 = rhs(t, y);
    let mut y2 = *y;
    for i in 0..N {
        y2[i] += 0.5 * dt * k1[i];
    }
    let k2 = rhs(t + 0.5 * dt, &y2);
    let mut y3 = *y;
    for i in 0..N {
        y3[i] += 0.5 * dt * k2[i];
    }
    let k3 = rhs(t + 0.5 * dt, &y3);
    let mut y4 = *y;
    for i in 0..N {
        y4[i] += dt * k3[i];
    }
    let k4 = rhs(t + dt, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Upper bound on the step; the actual step divides the span evenly.
    pub dt: f64,
    /// Sample cadence in steps; the first and last states are always kept.
    pub record_every: usize,
    /// Leaving this box ends the trajectory early instead of failing.
    pub bounds: Option<Box3>,
    /// Active axes for the bounds test.
    pub dim: usize,
}

impl IntegrateOptions {
    pub fn new(dt: f64) -> Self {
        IntegrateOptions { dt, record_every: 1, bounds: None, dim: 3 }
    }

    fn steps(&self, span: f64) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) {
            return Err(Error::NotPositive { what: "characteristic step", value: self.dt });
        }
        if span < 0.0 {
            return Err(Error::invalid("time range", "end precedes start"));
        }
        if span == 0.0 {
            return Ok((0, self.dt));
        }
        let n = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
        Ok((n, span / n as f64))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub s: f64,
    pub state: CharState,
}

#[derive(Debug, Clone)]
pub struct CharTrajectory {
    pub samples: Vec<Sample>,
    /// Time at which the state left the guard box, if it did.
    pub exit_s: Option<f64>,
    /// Max drift of `|p|^2` from its seed value, an integration-error probe.
    pub p2_drift: f64,
}

impl CharTrajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory holds at least the seed")
    }
}

/// Integrate one characteristic from `t0` to `t1`.
pub fn integrate_characteristic<V: VelocityField + ?Sized>(
    v: &V,
    seed: CharState,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<CharTrajectory> {
    let (n, dt) = opts.steps(t1 - t0)?;
    check_costate(&seed)?;
    let mut y = seed.pack();
    let p2_0 = seed.p.norm_squared();
    let mut traj = CharTrajectory {
        samples: vec![Sample { s: t0, state: seed }],
        exit_s: None,
        p2_drift: 0.0,
    };
    let mut rhs = |s: f64, y: &[f64; 7]| char_rhs(v, s, &CharState::unpack(y)).pack();
    for step in 1..=n {
        let s = t0 + dt * step as f64;
        y = rk4_step(&mut rhs, t0 + dt * (step - 1) as f64, &y, dt);
        let state = CharState::unpack(&y);
        if !state.is_finite() {
            return Err(Error::NonFinite { what: "characteristic state".into(), t: s });
        }
        check_costate(&state)?;
        traj.p2_drift = traj.p2_drift.max((state.p.norm_squared() - p2_0).abs());
        let exited = match &opts.bounds {
            Some(b) => !b.contains(&state.x, opts.dim),
            None => false,
        };
        if exited {
            traj.samples.push(Sample { s, state });
            traj.exit_s = Some(s);
            return Ok(traj);
        }
        if step % opts.record_every.max(1) == 0 || step == n {
            traj.samples.push(Sample { s, state });
        }
    }
    Ok(traj)
}

fn check_costate(st: &CharState) -> Result<()> {
    let mag = st.p.norm();
    if mag < P_FLOOR {
        return Err(Error::DegenerateGradient { mag, min: P_FLOOR, x: st.x });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct VarSample {
    pub s: f64,
    pub state: VarState,
}

#[derive(Debug, Clone)]
pub struct VarTrajectory {
    pub samples: Vec<VarSample>,
    pub exit_s: Option<f64>,
    /// Smallest seed-map Jacobian determinant seen at any step.
    pub min_det: f64,
}

impl VarTrajectory {
    pub fn last(&self) -> &VarSample {
        self.samples.last().expect("trajectory holds at least the seed")
    }
}

/// Integrate one characteristic together with its seed derivative. The seed
/// must lie on the interface (`phi = 0`); see [`VarState`].
pub fn integrate_variational<V: VelocityField + ?Sized>(
    v: &V,
    seed: VarState,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<VarTrajectory> {
    if seed.core.phi.abs() > 1e-12 {
        return Err(Error::invalid(
            "variational seed",
            "level value must vanish on the interface",
        ));
    }
    let (n, dt) = opts.steps(t1 - t0)?;
    check_costate(&seed.core)?;
    let mut y = seed.pack();
    let mut traj = VarTrajectory {
        samples: vec![VarSample { s: t0, state: seed }],
        exit_s: None,
        min_det: seed.jac.determinant(),
    };
    let mut rhs = |s: f64, y: &[f64; 19]| var_rhs(v, s, &VarState::unpack(y)).pack();
    for step in 1..=n {
        let s = t0 + dt * step as f64;
        y = rk4_step(&mut rhs, t0 + dt * (step - 1) as f64, &y, dt);
        let state = VarState::unpack(&y);
        if !state.core.is_finite() || !state.jac.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "variational state".into(), t: s });
        }
        check_costate(&state.core)?;
        traj.min_det = traj.min_det.min(state.jac.determinant());
        let exited = match &opts.bounds {
            Some(b) => !b.contains(&state.core.x, opts.dim),
            None => false,
        };
        if exited {
            traj.samples.push(VarSample { s, state });
            traj.exit_s = Some(s);
            return Ok(traj);
        }
        if step % opts.record_every.max(1) == 0 || step == n {
            traj.samples.push(VarSample { s, state });
        }
    }
    Ok(traj)
}

/// Root of `3a + 6a^2 + 6a^3 = 1`, the contraction threshold of the
/// reseeding fixed-point argument. Leg lengths keep `2 U7 t` under this.
pub fn injectivity_threshold() -> f64 {
    let g = |a: f64| 3.0 * a + 6.0 * a * a + 6.0 * a * a * a - 1.0;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    debug_assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Suprema of the velocity-gradient functionals that control seed-map
/// distortion, sampled along interface characteristics and inflated by 10%,
/// plus the derived Jacobian envelopes.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CharacteristicBounds {
    /// `sup ||G||_2`
    pub grad_norm: f64,
    /// `sup ||(G + G^T)/2||_2`
    pub quad_form_norm: f64,
    /// `sup |G p| / |p|^2`
    pub normal_drift: f64,
    /// `sup |a| / |p|^4`
    pub reflection_drift: f64,
    /// `sup |a . p| / |p|^4`
    pub level_rate: f64,
    /// `max |grad phi0|` over the seeds, exact
    pub seed_grad_sup: f64,
    /// Gronwall envelope for `||dx/dseed||`
    pub jacobian_sup: f64,
    /// Envelope for the time derivative of the seed map's distortion
    pub jacobian_rate: f64,
}

/// `int_0^1 exp(c tau) dtau` with the small-`c` limit handled.
fn unit_exp_integral(c: f64) -> f64 {
    if c.abs() < 1e-9 {
        1.0 + 0.5 * c
    } else {
        (c.exp() - 1.0) / c
    }
}

impl CharacteristicBounds {
    /// Sample the functionals along the characteristics of the given
    /// interface seeds over `t_range`, then close the Jacobian envelopes.
    pub fn estimate<V: VelocityField + ?Sized>(
        v: &V,
        seeds: &[CharState],
        t_range: (f64, f64),
        dt: f64,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::EmptyInterface);
        }
        let opts = IntegrateOptions { dt, record_every: 1, bounds: None, dim: 3 };
        let mut grad_norm = 0.0f64;
        let mut quad_form_norm = 0.0f64;
        let mut normal_drift = 0.0f64;
        let mut reflection_drift = 0.0f64;
        let mut level_rate = 0.0f64;
        let mut seed_grad_sup = 0.0f64;
        for seed in seeds {
            seed_grad_sup = seed_grad_sup.max(seed.p.norm());
            let traj = integrate_characteristic(v, *seed, t_range.0, t_range.1, &opts)?;
            for sample in &traj.samples {
                let st = &sample.state;
                let t = rhs_terms(v, sample.s, st);
                let p4 = t.p2 * t.p2;
                grad_norm = grad_norm.max(t.grad.singular_values().max());
                let sym = (t.grad + t.grad.transpose()) * 0.5;
                quad_form_norm = quad_form_norm.max(sym.singular_values().max());
                normal_drift = normal_drift.max((t.grad * st.p).norm() / t.p2);
                reflection_drift = reflection_drift.max(t.a.norm() / p4);
                level_rate = level_rate.max(t.a.dot(&st.p).abs() / p4);
            }
        }
        let inflate = 1.1;
        Ok(Self::close(
            grad_norm * inflate,
            quad_form_norm * inflate,
            normal_drift * inflate,
            reflection_drift * inflate,
            level_rate * inflate,
            seed_grad_sup,
        ))
    }

    /// Close the envelopes from already-fixed suprema.
    pub fn close(
        grad_norm: f64,
        quad_form_norm: f64,
        normal_drift: f64,
        reflection_drift: f64,
        level_rate: f64,
        seed_grad_sup: f64,
    ) -> Self {
        let c = 2.0 * level_rate - 2.0 - 2.0 * quad_form_norm;
        let drift2 = normal_drift * normal_drift + reflection_drift * reflection_drift;
        let jac_sup2 = (2.0 * (1.0 + quad_form_norm)).exp()
            * (1.0 + drift2 * seed_grad_sup * seed_grad_sup * unit_exp_integral(c));
        let jacobian_sup = jac_sup2.sqrt();
        let jacobian_rate = grad_norm * jacobian_sup
            + (normal_drift + reflection_drift) * seed_grad_sup * level_rate.exp();
        CharacteristicBounds {
            grad_norm,
            quad_form_norm,
            normal_drift,
            reflection_drift,
            level_rate,
            seed_grad_sup,
            jacobian_sup,
            jacobian_rate,
        }
    }

    /// Longest leg over which the reseeding argument stays contractive,
    /// capped at 1. Asserts the cubic margin it is built to guarantee.
    pub fn max_leg_time(&self) -> f64 {
        let a_star = injectivity_threshold();
        let t = if self.jacobian_rate < 1e-12 {
            1.0
        } else {
            (0.9 * a_star / (2.0 * self.jacobian_rate)).min(1.0)
        };
        let z = 2.0 * self.jacobian_rate * t;
        let margin = 1.0 - (3.0 * z + 6.0 * z * z + 6.0 * z * z * z);
        assert!(margin > 0.0, "leg length {t} violates the contraction margin");
        t
    }

    /// Half-width of the seed band that reseeding is allowed to consume.
    pub fn reseed_margin(&self) -> f64 {
        let a_star = injectivity_threshold();
        if self.jacobian_rate < 1e-12 {
            1.0
        } else {
            (0.05 * a_star / (2.0 * self.jacobian_rate)).min(1.0)
        }
    }
}
