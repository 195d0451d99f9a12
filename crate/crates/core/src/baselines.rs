//! Reference schemes the tube solver is compared against: exact linear
//! transport through the backward flow map, the gradient-correcting
//! advection PDEs that act only on the interface, and the redistancing
//! corrector iteration.

use rayon::prelude::*;

use crate::characteristics::rk4_step;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::LevelSetData;
use crate::velocity::VelocityField;
use crate::{hj, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    LinearTransport,
    NmmFull,
    NmmBeta(f64),
    ReinitCorrector,
}

/// Integrate `dX/ds = v(s, X)` from `s_from` to `s_to` (either direction)
/// with RK4 substeps no longer than `dt`.
pub fn flow_between<V: VelocityField + ?Sized>(
    v: &V,
    s_from: f64,
    s_to: f64,
    x: &Vec3,
    dt: f64,
) -> Result<Vec3> {
    if !(dt > 0.0) {
        return Err(Error::NotPositive { what: "flow step", value: dt });
    }
    let span = s_to - s_from;
    if span == 0.0 {
        return Ok(*x);
    }
    let n = (span.abs() / dt).ceil().max(1.0) as usize;
    let ds = span / n as f64;
    let mut y = [x.x, x.y, x.z];
    let mut rhs = |s: f64, state: &[f64; 3]| {
        let vel = v.eval(s, &Vec3::new(state[0], state[1], state[2]));
        [vel.x, vel.y, vel.z]
    };
    for k in 0..n {
        y = rk4_step(&mut rhs, s_from + k as f64 * ds, &y, ds);
    }
    if y.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "flow map".into(), t: s_to });
    }
    Ok(Vec3::new(y[0], y[1], y[2]))
}

/// Backward flow map `X(0; t, x)`: where the material point now at `x` was
/// at time zero.
pub fn flow_map<V: VelocityField + ?Sized>(v: &V, t: f64, x: &Vec3, dt: f64) -> Result<Vec3> {
    flow_between(v, t, 0.0, x, dt)
}

#[derive(Debug, Clone, Copy)]
pub struct TransportSample {
    pub value: f64,
    pub gradient: Vec3,
    /// Foot of the backward characteristic at time zero.
    pub foot: Vec3,
}

/// Exact solution of the passive transport equation
/// `f_t + v . grad(f) = 0`: the initial profile pulled back along
/// characteristics, with the gradient obtained from the co-integrated
/// flow-map Jacobian `M(s)`, so that `grad f(t,x) = M(0)^T grad phi0(foot)`.
pub fn linear_transport_exact<V, D>(
    v: &V,
    data: &D,
    t: f64,
    x: &Vec3,
    dt: f64,
) -> Result<TransportSample>
where
    V: VelocityField + ?Sized,
    D: LevelSetData + ?Sized,
{
    if t < 0.0 {
        return Err(Error::invalid("transport query", "time must be nonnegative"));
    }
    if !(dt > 0.0) {
        return Err(Error::NotPositive { what: "flow step", value: dt });
    }
    // state layout: position, then the Jacobian M column-major
    let mut y = [0.0f64; 12];
    y[0] = x.x;
    y[1] = x.y;
    y[2] = x.z;
    y[3] = 1.0;
    y[7] = 1.0;
    y[11] = 1.0;
    let mut rhs = |s: f64, state: &[f64; 12]| {
        let pos = Vec3::new(state[0], state[1], state[2]);
        let vel = v.eval(s, &pos);
        let g = v.grad(s, &pos);
        let m = crate::Mat3::from_column_slice(&state[3..12]);
        let dm = g * m;
        let mut out = [0.0f64; 12];
        out[0] = vel.x;
        out[1] = vel.y;
        out[2] = vel.z;
        out[3..12].copy_from_slice(dm.as_slice());
        out
    };
    let n = if t == 0.0 { 0 } else { (t / dt).ceil().max(1.0) as usize };
    let ds = if n == 0 { 0.0 } else { -t / n as f64 };
    for k in 0..n {
        y = rk4_step(&mut rhs, t + k as f64 * ds, &y, ds);
    }
    if y.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "transport characteristic".into(), t });
    }
    let foot = Vec3::new(y[0], y[1], y[2]);
    let m0 = crate::Mat3::from_column_slice(&y[3..12]);
    Ok(TransportSample {
        value: data.value(&foot),
        gradient: m0.transpose() * data.gradient(&foot),
        foot,
    })
}

const NMM_GRAD_FLOOR: f64 = 1e-10;

/// Source term of the interface-preserving modification:
/// `phi <grad(v) n, n>` with `n` the unit gradient. Errors where the
/// gradient degenerates.
pub fn nmm_rhs<V: VelocityField + ?Sized>(
    v: &V,
    t: f64,
    x: &Vec3,
    u: f64,
    p: &Vec3,
) -> Result<f64> {
    let mag = p.norm();
    if mag <= NMM_GRAD_FLOOR {
        return Err(Error::DegenerateGradient { mag, min: NMM_GRAD_FLOOR, x: *x });
    }
    let n = p / mag;
    Ok(u * (v.grad(t, x) * n).dot(&n))
}

/// Source term of the relaxed variant: `phi (beta - |grad(phi)|)`.
pub fn nmm_beta_rhs(u: f64, p: &Vec3, beta: f64) -> f64 {
    u * (beta - p.norm())
}

/// One explicit step of the modified advection PDE: Lax-Friedrichs for the
/// linear advection part plus the explicit source. `beta = None` selects
/// the full interface-preserving source, `Some(beta)` the relaxed one.
/// Plateau nodes (degenerate gradient) carry no source.
pub fn nmm_step<V: VelocityField + ?Sized>(
    phi: &ScalarField,
    v: &V,
    beta: Option<f64>,
    dt: f64,
) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::NotPositive { what: "grid step", value: dt });
    }
    if let Some(b) = beta {
        if !(b > 0.0) {
            return Err(Error::NotPositive { what: "beta", value: b });
        }
    }
    let g = &phi.grid;
    let h = g.h;
    let data: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = g.coords(idx);
            if g.on_boundary(i, j, k) {
                return phi.data[idx];
            }
            let u = phi.data[idx];
            let x = g.node(i, j, k);
            let vel = v.eval(phi.t, &x);
            let node = [i, j, k];
            let mut advect = 0.0;
            let mut p_central = Vec3::zeros();
            for ax in 0..g.dim {
                let mut up = node;
                let mut dn = node;
                up[ax] += 1;
                dn[ax] -= 1;
                let plus = phi.at(up[0], up[1], up[2]);
                let minus = phi.at(dn[0], dn[1], dn[2]);
                let dp = (plus - u) / h;
                let dm = (u - minus) / h;
                p_central[ax] = (plus - minus) / (2.0 * h);
                advect += vel[ax] * p_central[ax] - 0.5 * vel[ax].abs() * (dp - dm);
            }
            let src = match beta {
                Some(b) => nmm_beta_rhs(u, &p_central, b),
                None => nmm_rhs(v, phi.t, &x, u, &p_central).unwrap_or(0.0),
            };
            u - dt * advect + dt * src
        })
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "modified advection".into(), t: phi.t + dt });
    }
    Ok(ScalarField { grid: g.clone(), t: phi.t + dt, data })
}

/// March the modified advection PDE to `t_end` with adaptive stable steps.
pub fn solve_nmm<V: VelocityField + ?Sized>(
    v: &V,
    phi0: &ScalarField,
    beta: Option<f64>,
    t_end: f64,
    cfl: f64,
) -> Result<hj::ViscositySolution> {
    if !(t_end > 0.0) {
        return Err(Error::NotPositive { what: "grid horizon", value: t_end });
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::invalid("cfl number", "need 0 < cfl <= 1"));
    }
    let gamma = v.lipschitz();
    let g = &phi0.grid;
    let mut phi = phi0.clone();
    let mut steps = 0usize;
    let mut dt_min = f64::INFINITY;
    let mut dt_max = 0.0f64;
    while phi.t < t_end - 1e-12 {
        let rate = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let [i, j, k] = g.coords(idx);
                if g.on_boundary(i, j, k) {
                    return 0.0;
                }
                let x = g.node(i, j, k);
                let vel = v.eval(phi.t, &x);
                let mut speed = 0.0;
                for ax in 0..g.dim {
                    speed += vel[ax].abs() / g.h;
                }
                let node = [i, j, k];
                let mut grad = 0.0f64;
                for ax in 0..g.dim {
                    let mut up = node;
                    let mut dn = node;
                    up[ax] += 1;
                    dn[ax] -= 1;
                    let d = (phi.at(up[0], up[1], up[2]) - phi.at(dn[0], dn[1], dn[2]))
                        / (2.0 * g.h);
                    grad += d * d;
                }
                let src_rate = match beta {
                    Some(b) => b + grad.sqrt(),
                    None => gamma,
                };
                speed + src_rate
            })
            .reduce(|| 0.0, f64::max);
        let stable = if rate > 0.0 { cfl / rate } else { f64::INFINITY };
        let dt = stable.min(t_end - phi.t);
        if !(dt > 1e-14 * t_end.max(1.0)) {
            return Err(Error::invalid("grid march", "stable step collapsed"));
        }
        phi = nmm_step(&phi, v, beta, dt)?;
        steps += 1;
        dt_min = dt_min.min(dt);
        dt_max = dt_max.max(dt);
    }
    phi.t = t_end;
    Ok(hj::ViscositySolution { snapshots: vec![phi], steps, dt_min, dt_max })
}

/// One explicit step of the redistancing corrector
/// `psi_s = sign(psi) (1 - |grad(psi)|)` with the Godunov upwind gradient
/// and the sign smoothed over one cell, `psi / sqrt(psi^2 + h^2)`.
pub fn reinit_corrector_step(psi: &ScalarField, dtau: f64) -> Result<ScalarField> {
    let g = &psi.grid;
    let h = g.h;
    if !(dtau > 0.0) {
        return Err(Error::NotPositive { what: "corrector step", value: dtau });
    }
    if dtau > 0.5 * h * (1.0 + 1e-12) {
        return Err(Error::invalid("corrector step", "pseudo-time step must stay below h/2"));
    }
    let data: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = g.coords(idx);
            if g.on_boundary(i, j, k) {
                return psi.data[idx];
            }
            let u = psi.data[idx];
            let s = u / (u * u + h * h).sqrt();
            let node = [i, j, k];
            let mut grad2 = 0.0f64;
            for ax in 0..g.dim {
                let mut up = node;
                let mut dn = node;
                up[ax] += 1;
                dn[ax] -= 1;
                let a = (u - psi.at(dn[0], dn[1], dn[2])) / h;
                let b = (psi.at(up[0], up[1], up[2]) - u) / h;
                let pick = if s >= 0.0 {
                    a.max(0.0).powi(2).max(b.min(0.0).powi(2))
                } else {
                    a.min(0.0).powi(2).max(b.max(0.0).powi(2))
                };
                grad2 += pick;
            }
            u + dtau * s * (1.0 - grad2.sqrt())
        })
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "corrector".into(), t: psi.t });
    }
    Ok(ScalarField { grid: g.clone(), t: psi.t, data })
}

/// Iterate the corrector to pseudo-time `s_end` with steps of at most `h/2`.
pub fn reinitialize(psi: &ScalarField, s_end: f64) -> Result<ScalarField> {
    if !(s_end > 0.0) {
        return Err(Error::NotPositive { what: "corrector horizon", value: s_end });
    }
    let n = (s_end / (0.5 * psi.grid.h)).ceil().max(1.0) as usize;
    let dtau = s_end / n as f64;
    let mut out = psi.clone();
    for _ in 0..n {
        out = reinit_corrector_step(&out, dtau)?;
    }
    Ok(out)
}
