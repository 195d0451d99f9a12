//! Verification machinery: transported sub/supersolution envelopes that
//! sandwich any admissible solution, the monotonized Hamiltonian with its
//! monotonicity and regularity margins, tube error norms, and the
//! diagnostics report the batch runner serializes.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::baselines::flow_map;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Scheme};
use crate::geometry::LevelSetData;
use crate::grid::{Box3, Grid};
use crate::hj::Regularizer;
use crate::tube::TubeSolution;
use crate::velocity::VelocityField;
use crate::Vec3;

/// Transported envelopes: `rho` is a subsolution and `rho_tilde` a
/// supersolution of the regularized transport PDE, built from the initial
/// profile pulled back along the flow and decayed or amplified at the
/// velocity's Lipschitz rate. Any admissible solution sits between them.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub rho: ScalarField,
    pub rho_tilde: ScalarField,
    pub v0: f64,
}

/// Build the envelopes at time `t` on `grid`. The phase of a node is read
/// off the sign of the pulled-back initial value, which is exact because
/// material points never cross the interface.
pub fn compute_envelopes<V, D>(
    v: &V,
    phi0: &D,
    grid: &Grid,
    t: f64,
    flow_dt: f64,
) -> Result<EnvelopePair>
where
    V: VelocityField + ?Sized,
    D: LevelSetData + ?Sized,
{
    if t < 0.0 {
        return Err(Error::invalid("envelope time", "time must be nonnegative"));
    }
    let v0 = v.lipschitz();
    let pairs: Vec<Result<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.coords(idx);
            let x = grid.node(i, j, k);
            let a = phi0.value(&flow_map(v, t, &x, flow_dt)?);
            let (decay, grow) = ((-v0 * t).exp(), (v0 * t).exp());
            // sign decides which exponent shrinks toward the interface
            Ok(if a >= 0.0 { (a * decay, a * grow) } else { (a * grow, a * decay) })
        })
        .collect();
    let mut rho = Vec::with_capacity(grid.len());
    let mut rho_tilde = Vec::with_capacity(grid.len());
    for p in pairs {
        let (lo, hi) = p?;
        rho.push(lo);
        rho_tilde.push(hi);
    }
    Ok(EnvelopePair {
        rho: ScalarField { grid: grid.clone(), t, data: rho },
        rho_tilde: ScalarField { grid: grid.clone(), t, data: rho_tilde },
        v0,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SandwichReport {
    /// Largest amount by which the solution dips below the lower envelope.
    pub lower_excess: f64,
    /// Largest amount by which the solution exceeds the upper envelope.
    pub upper_excess: f64,
    pub nodes: usize,
}

impl SandwichReport {
    pub fn max_excess(&self) -> f64 {
        self.lower_excess.max(self.upper_excess)
    }
}

/// Measure how far `phi` escapes the envelope ordering. Nodes where `phi`
/// is not finite (outside a tube restriction) are skipped.
pub fn check_sandwich(phi: &ScalarField, env: &EnvelopePair) -> Result<SandwichReport> {
    let same = phi.grid.dim == env.rho.grid.dim
        && phi.grid.n == env.rho.grid.n
        && phi.grid.h == env.rho.grid.h
        && (phi.grid.origin - env.rho.grid.origin).norm() == 0.0;
    if !same {
        return Err(Error::GridMismatch("sandwich fields live on different grids".into()));
    }
    if (phi.t - env.rho.t).abs() > 1e-9 {
        return Err(Error::invalid("sandwich check", "field and envelope times differ"));
    }
    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    let mut nodes = 0usize;
    for idx in 0..phi.grid.len() {
        let u = phi.data[idx];
        if !u.is_finite() {
            continue;
        }
        nodes += 1;
        lower = lower.max(env.rho.data[idx] - u);
        upper = upper.max(u - env.rho_tilde.data[idx]);
    }
    Ok(SandwichReport { lower_excess: lower, upper_excess: upper, nodes })
}

/// Scale factor `e^{2 V0 t}` and the regularized denominator it feeds.
fn scaled_denominator(reg: &Regularizer, v0: f64, t: f64, p: &Vec3) -> (f64, f64) {
    let theta2 = (2.0 * v0 * t).exp();
    let d = theta2 * p.norm_squared();
    (theta2, d + reg.eta(d))
}

/// The comparison-ready Hamiltonian after the `w = e^{-V0 t} phi` change of
/// variable: nondecreasing in `u` for every `(t, x, p)`.
pub fn monotonized_g<V: VelocityField + ?Sized>(
    v: &V,
    reg: &Regularizer,
    v0: f64,
    t: f64,
    x: &Vec3,
    p: &Vec3,
    u: f64,
) -> f64 {
    let (theta2, den) = scaled_denominator(reg, v0, t, p);
    v.eval(t, &(x - p * (theta2 * u / den))).dot(p) + v0 * u
}

/// The projection kernel `R(t, p)` whose increments the regularity margins
/// bound.
fn projection_kernel(reg: &Regularizer, v0: f64, t: f64, p: &Vec3) -> Vec3 {
    let (theta2, den) = scaled_denominator(reg, v0, t, p);
    p * (theta2 / den)
}

fn sample_box(rng: &mut impl Rng, b: &Box3, dim: usize) -> Vec3 {
    let mut x = Vec3::zeros();
    for ax in 0..dim {
        x[ax] = rng.random_range(b.min[ax]..=b.max[ax]);
    }
    x
}

fn sample_vec(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Vec3 {
    let mut p = Vec3::zeros();
    for ax in 0..dim {
        let mag = rng.random_range(lo..=hi);
        p[ax] = if rng.random_range(0.0..=1.0) < 0.5 { -mag } else { mag };
    }
    p
}

/// Smallest observed increment `G(u + eps) - G(u)` over random samples.
/// Nonnegative up to roundoff when the monotonization is correct.
pub fn g_monotonicity_margin<V: VelocityField + ?Sized>(
    v: &V,
    reg: &Regularizer,
    v0: f64,
    t_max: f64,
    domain: &Box3,
    dim: usize,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut margin = f64::INFINITY;
    for _ in 0..samples {
        let t = rng.random_range(0.0..=t_max);
        let x = sample_box(&mut rng, domain, dim);
        let p = sample_vec(&mut rng, dim, 0.0, 3.0);
        let u = rng.random_range(-1.0..=1.0);
        let eps = rng.random_range(0.0..=0.5);
        let diff = monotonized_g(v, reg, v0, t, &x, &p, u + eps)
            - monotonized_g(v, reg, v0, t, &x, &p, u);
        margin = margin.min(diff);
    }
    margin
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GRegularityMargins {
    /// Empirical constant in `|(i) - v.q| <= c1 |u| |q|`.
    pub c1: f64,
    /// Empirical constant in `|(ii)| <= c2 |u| |p| |q|`.
    pub c2: f64,
    pub samples: usize,
}

/// Fit the two regularity constants of the monotonized Hamiltonian as the
/// largest observed ratios over random samples. The split underneath is
/// `G(t,x,p+q,u) - G(t,x,p,u) = (i) + (ii)` with `(i)` the advective part
/// against `q` and `(ii)` the projection-shift part against `p`.
pub fn check_g_regularity<V: VelocityField + ?Sized>(
    v: &V,
    reg: &Regularizer,
    v0: f64,
    t_max: f64,
    domain: &Box3,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<GRegularityMargins> {
    if samples < 10_000 {
        return Err(Error::invalid("regularity fit", "need at least 1e4 samples"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for _ in 0..samples {
        let t = rng.random_range(0.0..=t_max);
        let x = sample_box(&mut rng, domain, dim);
        let p = sample_vec(&mut rng, dim, 0.0, 3.0);
        let q = sample_vec(&mut rng, dim, 0.0, 3.0);
        let u = rng.random_range(-1.0f64..=1.0);
        let uq = u.abs() * q.norm();
        if uq < 1e-12 {
            continue;
        }
        let r_pq = projection_kernel(reg, v0, t, &(p + q));
        let r_p = projection_kernel(reg, v0, t, &p);
        let part_i = v.eval(t, &(x - r_pq * u)).dot(&q);
        c1 = c1.max((part_i - v.eval(t, &x).dot(&q)).abs() / uq);
        let upq = uq * p.norm();
        if upq < 1e-12 {
            continue;
        }
        let part_ii = (v.eval(t, &(x - r_pq * u)) - v.eval(t, &(x - r_p * u))).dot(&p);
        c2 = c2.max(part_ii.abs() / upq);
    }
    if !(c1.is_finite() && c2.is_finite()) {
        return Err(Error::NonFinite { what: "regularity margins".into(), t: t_max });
    }
    Ok(GRegularityMargins { c1, c2, samples })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TubeErrorNorms {
    pub max_abs: f64,
    pub l2: f64,
    /// Largest deviation of the grid field's gradient norm from 1 over
    /// tube nodes with a finite central stencil.
    pub grad_max_dev: f64,
    pub nodes: usize,
}

/// Compare a grid field against the characteristic tube reconstruction at
/// time `t`, over the grid nodes the tube covers.
pub fn tube_error_norms(phi: &ScalarField, tube: &TubeSolution, t: f64) -> Result<TubeErrorNorms> {
    let g = &phi.grid;
    let mut max_abs = 0.0f64;
    let mut sum2 = 0.0f64;
    let mut grad_dev = 0.0f64;
    let mut nodes = 0usize;
    for idx in 0..g.len() {
        let [i, j, k] = g.coords(idx);
        let x = g.node(i, j, k);
        let Some((reference, _)) = tube.eval(t, &x) else { continue };
        let u = phi.data[idx];
        if !u.is_finite() {
            continue;
        }
        nodes += 1;
        let err = (u - reference).abs();
        max_abs = max_abs.max(err);
        sum2 += err * err;
        if !g.on_boundary(i, j, k) {
            let grad = phi.gradient_node(i, j, k, Scheme::Central);
            if grad.iter().all(|c| c.is_finite()) {
                grad_dev = grad_dev.max((grad.norm() - 1.0).abs());
            }
        }
    }
    if nodes == 0 {
        let c = g.node(g.n[0] / 2, g.n[1] / 2, g.n[2] / 2);
        return Err(Error::OutOfTube { t, x: c });
    }
    Ok(TubeErrorNorms { max_abs, l2: (sum2 / nodes as f64).sqrt(), grad_max_dev: grad_dev, nodes })
}

/// Everything a batch run reports over time, serialized alongside the
/// field exports.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct DiagnosticsReport {
    pub times: Vec<f64>,
    /// Tube-wide max of the gradient-norm deviation from 1 per output time.
    pub grad_norm_dev: Vec<f64>,
    /// Interface distance against the reference mesh per output time.
    pub interface_hausdorff: Vec<f64>,
    pub sandwich_lower: Vec<f64>,
    pub sandwich_upper: Vec<f64>,
    pub sandwich_violations: usize,
    pub p2_drift: f64,
    pub g_margin: f64,
    pub meta: BTreeMap<String, String>,
}

impl DiagnosticsReport {
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        let lens = [
            self.grad_norm_dev.len(),
            self.interface_hausdorff.len(),
            self.sandwich_lower.len(),
            self.sandwich_upper.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::invalid("diagnostics", "series lengths differ"));
        }
        let finite = self
            .times
            .iter()
            .chain(&self.grad_norm_dev)
            .chain(&self.interface_hausdorff)
            .chain(&self.sandwich_lower)
            .chain(&self.sandwich_upper)
            .all(|v| v.is_finite())
            && self.p2_drift.is_finite()
            && self.g_margin.is_finite();
        if !finite {
            return Err(Error::invalid("diagnostics", "non-finite entry"));
        }
        Ok(())
    }
}
