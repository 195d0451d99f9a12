//! Pointwise geometry of a level function: normals, curvature, and the
//! metric projection onto its zero set.
//!
//! Sign conventions live here and nowhere else:
//!
//! * the *interface normal* `normal_at` points toward the negative phase,
//!   `nu = -grad(phi) / |grad(phi)|`;
//! * the *curvature* is taken with respect to the normal pointing toward the
//!   positive phase, `kappa = -div(grad(phi) / |grad(phi)|)`, so a circle or
//!   sphere profile that is negative inside has `kappa = -(d-1)/R`; for a
//!   signed distance this is `-laplacian(phi)`, twice the mean curvature in
//!   3D up to that sign.

use crate::error::{Error, Result};
use crate::field::{ScalarField, Scheme};
use crate::Vec3;

/// Gradient magnitudes accepted by the metric projection. Within this gate
/// the field behaves like a signed distance to first order, which is what
/// makes `x - phi * grad(phi)` a projection onto the zero set.
pub const DISTANCE_GATE: (f64, f64) = (0.9, 1.1);

/// Below this magnitude a gradient is considered degenerate.
pub const GRAD_FLOOR: f64 = 1e-10;

/// Nearest-point projection of `x` onto the zero set of `field`, valid in
/// the near-distance regime. Errors when `|grad(phi)|` leaves `gate`.
///
/// Accuracy is limited by the interpolation of `phi` and its gradient, so
/// expect an `O(h^2)` offset scaling with `|phi(x)|`.
pub fn metric_projection(field: &ScalarField, x: &Vec3, gate: (f64, f64)) -> Result<Vec3> {
    let phi = field.value(x)?;
    let g = field.gradient(x, Scheme::Central)?;
    let mag = g.norm();
    if !(mag >= gate.0 && mag <= gate.1) {
        return Err(Error::OutsideDistanceGate { mag, lo: gate.0, hi: gate.1, x: *x });
    }
    Ok(x - g * phi)
}

/// Unit normal of the level set through `x`, oriented toward the negative
/// phase.
pub fn normal_at(field: &ScalarField, x: &Vec3) -> Result<Vec3> {
    let g = field.gradient(x, Scheme::Central)?;
    let mag = g.norm();
    if mag < GRAD_FLOOR {
        return Err(Error::DegenerateGradient { mag, min: GRAD_FLOOR, x: *x });
    }
    Ok(-g / mag)
}

fn unit_gradient_node(field: &ScalarField, i: usize, j: usize, k: usize) -> Result<Vec3> {
    let g = field.gradient_node(i, j, k, Scheme::Central);
    let mag = g.norm();
    if mag < GRAD_FLOOR {
        return Err(Error::DegenerateGradient {
            mag,
            min: GRAD_FLOOR,
            x: field.grid.node(i, j, k),
        });
    }
    Ok(g / mag)
}

/// Divergence of the normalized gradient at a node, by central differences
/// of the unit gradient field (ghost-extended at domain boundaries).
fn unit_gradient_divergence(field: &ScalarField, i: usize, j: usize, k: usize) -> Result<f64> {
    let g = &field.grid;
    let mut div = 0.0;
    let c = [i, j, k];
    for ax in 0..g.dim {
        let hi = {
            let mut q = c;
            if q[ax] + 1 < g.n[ax] {
                q[ax] += 1;
            }
            q
        };
        let lo = {
            let mut q = c;
            if q[ax] > 0 {
                q[ax] -= 1;
            }
            q
        };
        let span = (hi[ax] - lo[ax]) as f64 * g.h;
        let n_hi = unit_gradient_node(field, hi[0], hi[1], hi[2])?[ax];
        let n_lo = unit_gradient_node(field, lo[0], lo[1], lo[2])?[ax];
        div += (n_hi - n_lo) / span;
    }
    Ok(div)
}

/// Curvature of the level set through `x`; see the module docs for the sign.
pub fn curvature_at(field: &ScalarField, x: &Vec3) -> Result<f64> {
    let (base, frac) = field.grid.cell_of(x)?;
    // interpolate node curvatures over the containing cell
    let [i, j, k] = base;
    let kz = if field.grid.dim == 2 { 0 } else { 1 };
    let mut vals = [[[0.0f64; 2]; 2]; 2];
    for dk in 0..=kz {
        for dj in 0..2 {
            for di in 0..2 {
                vals[dk][dj][di] = -unit_gradient_divergence(field, i + di, j + dj, k + dk)?;
            }
        }
    }
    let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s;
    let c0 = lerp(
        lerp(vals[0][0][0], vals[0][0][1], frac[0]),
        lerp(vals[0][1][0], vals[0][1][1], frac[0]),
        frac[1],
    );
    if field.grid.dim == 2 {
        return Ok(c0);
    }
    let c1 = lerp(
        lerp(vals[1][0][0], vals[1][0][1], frac[0]),
        lerp(vals[1][1][0], vals[1][1][1], frac[0]),
        frac[1],
    );
    Ok(lerp(c0, c1, frac[2]))
}

/// Acute angle in degrees between the lines spanned by `u` and `v`
/// (orientation-blind, so antiparallel vectors give 0).
pub fn angle_between_lines_deg(u: &Vec3, v: &Vec3) -> f64 {
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let c = (u.dot(v).abs() / (nu * nv)).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Initial level-set data: a level function with a gradient, queried
/// pointwise. Outside a sampled implementation's domain the values may be
/// non-finite; callers gate queries by the domain they work on.
pub trait LevelSetData: Sync {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
}

impl LevelSetData for ScalarField {
    fn value(&self, x: &Vec3) -> f64 {
        ScalarField::value(self, x).unwrap_or(f64::NAN)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        ScalarField::gradient(self, x, Scheme::Central)
            .unwrap_or_else(|_| Vec3::new(f64::NAN, f64::NAN, f64::NAN))
    }
}

impl<D: LevelSetData + ?Sized> LevelSetData for &D {
    fn value(&self, x: &Vec3) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        (**self).gradient(x)
    }
}

/// Closed-form initial data. `Sphere` is the signed distance in any
/// dimension; `Ellipse` is the normalized algebraic level
/// `r (|A(x - c)| - 1)` with `A = diag(1/radii)` and `r` the geometric mean
/// of the active radii, a non-distance function with a known zero set;
/// `Plane` is the affine level `n . x - offset` with `n` not necessarily
/// unit, so gradient magnitudes other than 1 can be prescribed exactly;
/// `Expression` parses a formula in `x, y, z` and differentiates it by
/// central differences.
pub enum AnalyticSurface {
    Sphere { center: Vec3, radius: f64 },
    Ellipse { center: Vec3, radii: [f64; 3] },
    Plane { normal: Vec3, offset: f64 },
    Expression { value: meval::Expr },
}

impl AnalyticSurface {
    pub fn expression(src: &str) -> Result<Self> {
        let value = src
            .parse::<meval::Expr>()
            .map_err(|e| Error::Expression(format!("{src:?}: {e}")))?;
        Ok(AnalyticSurface::Expression { value })
    }

    fn ellipse_parts(center: &Vec3, radii: &[f64; 3], x: &Vec3) -> (Vec3, f64, f64) {
        let mut scaled = Vec3::zeros();
        let mut r_geo = 1.0;
        let mut active = 0;
        for ax in 0..3 {
            if radii[ax] > 0.0 {
                scaled[ax] = (x[ax] - center[ax]) / radii[ax];
                r_geo *= radii[ax];
                active += 1;
            }
        }
        (scaled, r_geo.powf(1.0 / active.max(1) as f64), scaled.norm())
    }
}

impl LevelSetData for AnalyticSurface {
    fn value(&self, x: &Vec3) -> f64 {
        match self {
            AnalyticSurface::Sphere { center, radius } => (x - center).norm() - radius,
            AnalyticSurface::Ellipse { center, radii } => {
                let (_, r_geo, mag) = Self::ellipse_parts(center, radii, x);
                r_geo * (mag - 1.0)
            }
            AnalyticSurface::Plane { normal, offset } => normal.dot(x) - offset,
            AnalyticSurface::Expression { value } => {
                let mut ctx = meval::Context::new();
                ctx.var("x", x.x).var("y", x.y).var("z", x.z);
                value.eval_with_context(&ctx).unwrap_or(f64::NAN)
            }
        }
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            AnalyticSurface::Sphere { center, .. } => {
                let d = x - center;
                let mag = d.norm();
                if mag < GRAD_FLOOR {
                    return Vec3::zeros();
                }
                d / mag
            }
            AnalyticSurface::Ellipse { center, radii } => {
                let (scaled, r_geo, mag) = Self::ellipse_parts(center, radii, x);
                if mag < GRAD_FLOOR {
                    return Vec3::zeros();
                }
                let mut g = Vec3::zeros();
                for ax in 0..3 {
                    if radii[ax] > 0.0 {
                        g[ax] = r_geo * scaled[ax] / (radii[ax] * mag);
                    }
                }
                g
            }
            AnalyticSurface::Plane { normal, .. } => *normal,
            AnalyticSurface::Expression { .. } => {
                let step = 1e-6;
                let mut g = Vec3::zeros();
                for ax in 0..3 {
                    let (mut xp, mut xm) = (*x, *x);
                    xp[ax] += step;
                    xm[ax] -= step;
                    g[ax] = (self.value(&xp) - self.value(&xm)) / (2.0 * step);
                }
                g
            }
        }
    }
}

/// Newton projection of `x0` onto the zero set of `data`:
/// `x <- x - value * grad / |grad|^2`. Quadratic near the surface; the
/// caller should check the residual when `x0` starts far away.
pub fn project_to_surface<D: LevelSetData + ?Sized>(
    data: &D,
    x0: &Vec3,
    max_iters: usize,
) -> Result<Vec3> {
    let mut x = *x0;
    for _ in 0..max_iters {
        let v = data.value(&x);
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "level value under projection".into(), t: 0.0 });
        }
        if v.abs() <= 1e-14 * (1.0 + x.norm()) {
            return Ok(x);
        }
        let g = data.gradient(&x);
        let g2 = g.norm_squared();
        if g2 < GRAD_FLOOR * GRAD_FLOOR {
            return Err(Error::DegenerateGradient { mag: g2.sqrt(), min: GRAD_FLOOR, x });
        }
        x -= g * (v / g2);
    }
    Ok(x)
}
