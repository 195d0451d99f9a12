//! Velocity fields: the trait solvers consume, an analytic catalog, and the
//! two extension devices that make an interface-bound velocity usable on a
//! whole domain.
//!
//! * [`extended_velocity`] composes the field with the metric projection
//!   onto the zero set of a level function, the extension the transport
//!   equation is built on.
//! * [`lipschitz_extend`] is the inf-convolution extension
//!   `v_i(x) = inf_z { v_i(z) + lambda |x - z| }` over a sampled closure of
//!   the domain; it reproduces the field on the samples and is globally
//!   `lambda`-Lipschitz, which is what whole-space arguments need.
//!
//! Fields are only required at nonnegative times; the provided `eval`/`grad`
//! reflect negative times through `v(t) = 2 v(0) - v(-t)`, keeping value and
//! first time derivative continuous at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{self};
use crate::grid::{Box3, Grid};
use crate::{Mat3, Vec3};

pub trait VelocityField: Sync {
    /// Velocity at `t >= 0`.
    fn eval_raw(&self, t: f64, x: &Vec3) -> Vec3;

    /// Spatial Jacobian at `t >= 0`; entry `(i, j)` is `d v_i / d x_j`.
    fn grad_raw(&self, t: f64, x: &Vec3) -> Mat3;

    /// Upper bound on the spatial Lipschitz constant over the working domain
    /// and time range.
    fn lipschitz(&self) -> f64;

    /// Caller-supplied assertion that the field (with both signs) does not
    /// point out of the domain anywhere on its boundary.
    fn subtangential_certified(&self) -> bool {
        false
    }

    /// Evaluation for all times, reflecting `t < 0` as `2 v(0) - v(-t)`.
    fn eval(&self, t: f64, x: &Vec3) -> Vec3 {
        if t >= 0.0 {
            self.eval_raw(t, x)
        } else {
            self.eval_raw(0.0, x) * 2.0 - self.eval_raw(-t, x)
        }
    }

    /// Jacobian for all times, reflected like `eval`.
    fn grad(&self, t: f64, x: &Vec3) -> Mat3 {
        if t >= 0.0 {
            self.grad_raw(t, x)
        } else {
            self.grad_raw(0.0, x) * 2.0 - self.grad_raw(-t, x)
        }
    }
}

impl<V: VelocityField + ?Sized> VelocityField for &V {
    fn eval_raw(&self, t: f64, x: &Vec3) -> Vec3 {
        (**self).eval_raw(t, x)
    }
    fn grad_raw(&self, t: f64, x: &Vec3) -> Mat3 {
        (**self).grad_raw(t, x)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn subtangential_certified(&self) -> bool {
        (**self).subtangential_certified()
    }
}

/// Closed-form members of the catalog plus a runtime-parsed expression kind.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum FieldKind {
    /// `omega * (-y, x, 0)`: rigid rotation about the `z` axis.
    RigidRotation { omega: f64 },
    /// Constant translation.
    Translation { c: [f64; 3] },
    /// `(sigma * y, 0, 0)`: simple shear.
    Shear { sigma: f64 },
    /// Divergence-free swirl on the unit square, time-modulated by
    /// `cos(pi t / period)` so it reverses at half a period; vanishes on the
    /// square's boundary.
    SingleVortex { period: f64 },
    /// Components given as expressions in `t, x, y, z`.
    Expression { vx: String, vy: String, vz: String },
}

/// Declarative description of an analytic field; `build` turns it into a
/// usable [`AnalyticField`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// Width of the boundary taper band; `None` leaves the field untouched.
    pub taper_margin: Option<f64>,
}

#[derive(Debug, Clone)]
struct Taper {
    bounds: Box3,
    margin: f64,
    dim: usize,
}

/// C^2 ramp from 0 to 1.
#[inline]
fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

#[inline]
fn smoothstep5_deriv(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (s - 1.0) * (s - 1.0)
}

impl Taper {
    /// Product of per-axis ramps of the distance to the box faces. Vanishes
    /// on the boundary, is identically 1 once every face is `margin` away.
    fn weight(&self, x: &Vec3) -> f64 {
        let mut w = 1.0;
        for ax in 0..self.dim {
            let d = (x[ax] - self.bounds.min[ax]).min(self.bounds.max[ax] - x[ax]);
            w *= smoothstep5(d / self.margin);
        }
        w
    }

    fn weight_grad(&self, x: &Vec3) -> Vec3 {
        let mut factors = [1.0f64; 3];
        let mut derivs = [0.0f64; 3];
        for ax in 0..self.dim {
            let lo = x[ax] - self.bounds.min[ax];
            let hi = self.bounds.max[ax] - x[ax];
            let (d, sign) = if lo <= hi { (lo, 1.0) } else { (hi, -1.0) };
            factors[ax] = smoothstep5(d / self.margin);
            derivs[ax] = sign * smoothstep5_deriv(d / self.margin) / self.margin;
        }
        let mut g = Vec3::zeros();
        for ax in 0..self.dim {
            let mut d = derivs[ax];
            for other in 0..self.dim {
                if other != ax {
                    d *= factors[other];
                }
            }
            g[ax] = d;
        }
        g
    }
}

enum Motion {
    Rotation { omega: f64 },
    Translation { c: Vec3 },
    Shear { sigma: f64 },
    Vortex { period: f64 },
    Expr { parts: [meval::Expr; 3] },
}

/// Catalog field bound to a domain: optional boundary taper, a certified
/// Lipschitz bound, and a subtangentiality assertion.
pub struct AnalyticField {
    motion: Motion,
    taper: Option<Taper>,
    lipschitz: f64,
    subtangential: bool,
}

/// Step used for expression-field Jacobians (central differences; closed
/// forms are not available for parsed expressions).
const EXPR_FD_STEP: f64 = 1e-5;

impl Motion {
    fn eval(&self, t: f64, x: &Vec3) -> Vec3 {
        match self {
            Motion::Rotation { omega } => Vec3::new(-omega * x.y, omega * x.x, 0.0),
            Motion::Translation { c } => *c,
            Motion::Shear { sigma } => Vec3::new(sigma * x.y, 0.0, 0.0),
            Motion::Vortex { period } => {
                use std::f64::consts::PI;
                let m = (PI * t / period).cos();
                let sx = (PI * x.x).sin();
                let sy = (PI * x.y).sin();
                Vec3::new(
                    sx * sx * (2.0 * PI * x.y).sin() * m,
                    -(2.0 * PI * x.x).sin() * sy * sy * m,
                    0.0,
                )
            }
            Motion::Expr { parts } => {
                let mut out = Vec3::zeros();
                for (i, e) in parts.iter().enumerate() {
                    let ctx = meval::Context::new();
                    let mut ctx = ctx;
                    ctx.var("t", t).var("x", x.x).var("y", x.y).var("z", x.z);
                    out[i] = e.eval_with_context(&ctx).unwrap_or(f64::NAN);
                }
                out
            }
        }
    }

    fn grad(&self, t: f64, x: &Vec3) -> Mat3 {
        match self {
            Motion::Rotation { omega } => {
                Mat3::new(0.0, -omega, 0.0, *omega, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
            Motion::Translation { .. } => Mat3::zeros(),
            Motion::Shear { sigma } => Mat3::new(0.0, *sigma, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Motion::Vortex { period } => {
                use std::f64::consts::PI;
                let m = (PI * t / period).cos();
                let sx = (PI * x.x).sin();
                let sy = (PI * x.y).sin();
                let s2x = (2.0 * PI * x.x).sin();
                let s2y = (2.0 * PI * x.y).sin();
                let c2x = (2.0 * PI * x.x).cos();
                let c2y = (2.0 * PI * x.y).cos();
                let du_dx = PI * s2x * s2y * m;
                let du_dy = 2.0 * PI * sx * sx * c2y * m;
                let dv_dx = -2.0 * PI * c2x * sy * sy * m;
                let dv_dy = -PI * s2x * s2y * m;
                Mat3::new(du_dx, du_dy, 0.0, dv_dx, dv_dy, 0.0, 0.0, 0.0, 0.0)
            }
            Motion::Expr { .. } => {
                let mut g = Mat3::zeros();
                for ax in 0..3 {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[ax] += EXPR_FD_STEP;
                    xm[ax] -= EXPR_FD_STEP;
                    let d = (self.eval(t, &xp) - self.eval(t, &xm)) / (2.0 * EXPR_FD_STEP);
                    g.set_column(ax, &d);
                }
                g
            }
        }
    }
}

impl AnalyticField {
    /// Bind a spec to a domain. The Lipschitz bound is exact for the
    /// constant-Jacobian kinds without taper and sampled (seeded, times in
    /// `[0, horizon]`, inflated by 5%) otherwise. Tapered fields vanish on
    /// the domain boundary and are therefore certified subtangential; the
    /// vortex is certified when the domain sits inside the unit square.
    pub fn build(spec: &FieldSpec, domain: &Box3, dim: usize, horizon: f64, seed: u64) -> Result<Self> {
        let motion = match &spec.kind {
            FieldKind::RigidRotation { omega } => Motion::Rotation { omega: *omega },
            FieldKind::Translation { c } => {
                Motion::Translation { c: Vec3::new(c[0], c[1], c[2]) }
            }
            FieldKind::Shear { sigma } => Motion::Shear { sigma: *sigma },
            FieldKind::SingleVortex { period } => {
                if !(*period > 0.0) {
                    return Err(Error::NotPositive { what: "vortex period", value: *period });
                }
                Motion::Vortex { period: *period }
            }
            FieldKind::Expression { vx, vy, vz } => {
                let parse = |src: &str| -> Result<meval::Expr> {
                    src.parse::<meval::Expr>()
                        .map_err(|e| Error::Expression(format!("{src:?}: {e}")))
                };
                Motion::Expr { parts: [parse(vx)?, parse(vy)?, parse(vz)?] }
            }
        };
        let taper = match spec.taper_margin {
            Some(m) => {
                if !(m > 0.0) {
                    return Err(Error::NotPositive { what: "taper margin", value: m });
                }
                let w = domain.widths();
                let min_w = (0..dim).map(|ax| w[ax]).fold(f64::INFINITY, f64::min);
                if 2.0 * m >= min_w {
                    return Err(Error::invalid(
                        "taper margin",
                        format!("band {m} does not fit in domain width {min_w}"),
                    ));
                }
                Some(Taper { bounds: *domain, margin: m, dim })
            }
            None => None,
        };
        let mut field = AnalyticField { motion, taper, lipschitz: 0.0, subtangential: false };
        field.lipschitz = match (&field.motion, &field.taper) {
            (Motion::Rotation { omega }, None) => omega.abs(),
            (Motion::Translation { .. }, None) => 0.0,
            (Motion::Shear { sigma }, None) => sigma.abs(),
            _ => lipschitz_estimate(&field, domain, dim, (0.0, horizon.max(0.0)), 2000, seed),
        };
        field.subtangential = field.taper.is_some()
            || matches!(field.motion, Motion::Vortex { .. })
                && domain.min.x >= -1e-12
                && domain.min.y >= -1e-12
                && domain.max.x <= 1.0 + 1e-12
                && domain.max.y <= 1.0 + 1e-12;
        Ok(field)
    }
}

impl VelocityField for AnalyticField {
    fn eval_raw(&self, t: f64, x: &Vec3) -> Vec3 {
        let v = self.motion.eval(t, x);
        match &self.taper {
            Some(tp) => v * tp.weight(x),
            None => v,
        }
    }

    fn grad_raw(&self, t: f64, x: &Vec3) -> Mat3 {
        let g = self.motion.grad(t, x);
        match &self.taper {
            Some(tp) => {
                let v = self.motion.eval(t, x);
                g * tp.weight(x) + v * tp.weight_grad(x).transpose()
            }
            None => g,
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn subtangential_certified(&self) -> bool {
        self.subtangential
    }
}

/// Sampled bound on `sup ||grad v||_2`: the largest singular value over a
/// seeded cloud of space-time samples, inflated by 5%.
pub fn lipschitz_estimate<V: VelocityField + ?Sized>(
    v: &V,
    domain: &Box3,
    dim: usize,
    t_range: (f64, f64),
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut x = Vec3::zeros();
        for ax in 0..dim {
            x[ax] = rng.random_range(domain.min[ax]..=domain.max[ax]);
        }
        let t = if t_range.1 > t_range.0 {
            rng.random_range(t_range.0..=t_range.1)
        } else {
            t_range.0
        };
        let g = v.grad(t, &x);
        let s = g.singular_values();
        worst = worst.max(s.max());
    }
    worst * 1.05
}

/// Point cloud standing in for the closure of the domain in inf-convolution
/// queries. Spacing must not exceed the level-set grid spacing for the
/// extension error to stay curvature-bounded.
#[derive(Debug, Clone)]
pub struct DomainSample {
    pub points: Vec<Vec3>,
}

impl DomainSample {
    pub fn from_grid(grid: &Grid) -> Self {
        let mut points = Vec::with_capacity(grid.len());
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    points.push(grid.node(i, j, k));
                }
            }
        }
        DomainSample { points }
    }

    pub fn from_box(bounds: &Box3, dim: usize, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::NotPositive { what: "sample spacing", value: spacing });
        }
        let w = bounds.widths();
        let mut counts = [1usize; 3];
        for ax in 0..dim {
            counts[ax] = (w[ax] / spacing).ceil() as usize + 1;
        }
        let mut points = Vec::new();
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let f = [i, j, k];
                    let mut p = bounds.min;
                    for ax in 0..dim {
                        let steps = (counts[ax] - 1).max(1) as f64;
                        p[ax] = bounds.min[ax] + w[ax] * (f[ax] as f64 / steps);
                    }
                    points.push(p);
                }
            }
        }
        Ok(DomainSample { points })
    }
}

/// Componentwise inf-convolution extension of `v` beyond the sampled domain:
/// `v_i(t, x) = min_z { v_i(t, z) + lambda |x - z| }`.
///
/// Requires `lambda` at least the field's Lipschitz bound, which makes the
/// extension agree with the field on the samples.
pub fn lipschitz_extend<V: VelocityField + ?Sized>(
    v: &V,
    lambda: f64,
    samples: &DomainSample,
    t: f64,
    x: &Vec3,
) -> Result<Vec3> {
    if lambda + 1e-12 < v.lipschitz() {
        return Err(Error::invalid(
            "extension constant",
            format!("lambda {lambda} is below the field bound {}", v.lipschitz()),
        ));
    }
    let mut out = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for z in &samples.points {
        let dist = (x - z).norm();
        let val = v.eval(t, z);
        for c in 0..3 {
            out[c] = out[c].min(val[c] + lambda * dist);
        }
    }
    Ok(out)
}

/// The projection-based extension: evaluate `v` at the metric projection of
/// `x` onto the zero set of `level`. This is the velocity the transport
/// Hamiltonian sees away from the interface.
pub fn extended_velocity<V: VelocityField + ?Sized>(
    level: &ScalarField,
    v: &V,
    t: f64,
    x: &Vec3,
    gate: (f64, f64),
) -> Result<Vec3> {
    let proj = geometry::metric_projection(level, x, gate)?;
    Ok(v.eval(t, &proj))
}
