//! Two-point geodesic problems by shooting.
//!
//! `F(v) = exp_x(v) − y` is driven to zero by damped Newton. The Jacobian
//! `D exp_x` comes from the linearised flow (or, optionally, from central
//! differences of `F`). Trial velocities are capped by the metric length of
//! the chart segment from `x` to `y`, which bounds the distance from above.
//! If plain Newton stalls, multiple shooting over short segments of the
//! chart segment is tried, and as a last resort the target is moved
//! continuously from `x` to `y` with each intermediate problem warm-started.

use serde::{Deserialize, Serialize};

use super::{geodesic_ivp, integrate_flow, GeodesicPath};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm, scale, sub, Matrix};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::ode::StepControl;
use crate::scalar::{unit_scale, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Integrate the linearised geodesic flow alongside the geodesic.
    Variational,
    /// Central differences of the endpoint map.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvpOptions<T> {
    pub step: StepControl<T>,
    /// Required chart residual `‖exp_x(v) − y‖ ≤ tol·max(1, ‖y‖)`; the
    /// metric residual at `y` must be below `tol` as well.
    pub tol: T,
    pub max_iter: usize,
    pub jacobian: JacobianMode,
}

impl<T: Real> Default for BvpOptions<T> {
    fn default() -> Self {
        Self { step: StepControl::default(), tol: T::lit(1e-8), max_iter: 60, jacobian: JacobianMode::Variational }
    }
}

impl<T: Real> BvpOptions<T> {
    pub fn with_step(step: StepControl<T>) -> Self {
        Self { step, ..Self::default() }
    }
}

/// Solution of a two-point problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvpSolution<T> {
    /// Initial velocity `v` at `x` with `exp_x(v) = y`.
    pub velocity: TangentVec<T>,
    /// Velocity of the connecting geodesic on arrival at `y`.
    pub end_velocity: Vec<T>,
    /// `|v|_g`, the length of the connecting geodesic.
    pub length: T,
    /// Final chart residual `‖exp_x(v) − y‖`.
    pub residual: T,
    pub iterations: usize,
}

struct Shot<T> {
    end: Vec<T>,
    end_v: Vec<T>,
    jac: Matrix<T>,
}

fn shoot<T: Real>(model: &Model<T>, x: &[T], v: &[T], opts: &BvpOptions<T>) -> Result<Shot<T>> {
    let n = x.len();
    match opts.jacobian {
        JacobianMode::Variational => {
            let mut y0 = Vec::with_capacity(2 * n + 2 * n * n);
            y0.extend_from_slice(x);
            y0.extend_from_slice(v);
            for j in 0..n {
                y0.extend(std::iter::repeat(T::zero()).take(n));
                y0.extend((0..n).map(|i| if i == j { T::one() } else { T::zero() }));
            }
            let out = integrate_flow(model, y0, 0, n, T::zero(), &[T::one()], &opts.step)?;
            let y = &out[0];
            let mut jac = Matrix::zeros(n, n);
            for j in 0..n {
                let off = 2 * n + 2 * n * j;
                for i in 0..n {
                    jac[(i, j)] = y[off + i];
                }
            }
            Ok(Shot { end: y[..n].to_vec(), end_v: y[n..2 * n].to_vec(), jac })
        }
        JacobianMode::FiniteDifference => {
            let (end, end_v) = super::exp_state(model, x, v, &opts.step)?;
            let h = T::lit(1e-5) * unit_scale(norm(v));
            let mut jac = Matrix::zeros(n, n);
            for j in 0..n {
                let mut vp = v.to_vec();
                let mut vm = v.to_vec();
                vp[j] = vp[j] + h;
                vm[j] = vm[j] - h;
                let (ep, _) = super::exp_state(model, x, &vp, &opts.step)?;
                let (em, _) = super::exp_state(model, x, &vm, &opts.step)?;
                for i in 0..n {
                    jac[(i, j)] = (ep[i] - em[i]) / (T::lit(2.0) * h);
                }
            }
            Ok(Shot { end, end_v, jac })
        }
    }
}

struct Newton<T> {
    v: Vec<T>,
    shot: Shot<T>,
    residual: T,
}

fn cap<T: Real>(model: &Model<T>, x: &[T], v: Vec<T>, bound: T) -> Vec<T> {
    let nv = model.norm(x, &v);
    if nv > bound {
        scale(&v, bound / nv)
    } else {
        v
    }
}

/// Damped Newton for `exp_x(v) = target` from `v`. `count` accumulates the
/// number of Newton steps taken.
fn newton<T: Real>(
    model: &Model<T>,
    x: &[T],
    target: &[T],
    v: Vec<T>,
    bound: T,
    opts: &BvpOptions<T>,
    max_iter: usize,
    count: &mut usize,
) -> std::result::Result<Newton<T>, T> {
    let merit = |end: &[T]| -> (T, T) {
        let r = sub(end, target);
        let chart = norm(&r);
        let g = if model.in_domain(target) { model.norm(target, &r) } else { chart };
        (chart, g.max(T::zero()))
    };
    let tol_chart = opts.tol * unit_scale(norm(target));
    let mut v = cap(model, x, v, bound);
    let mut shot = match shoot(model, x, &v, opts) {
        Ok(s) => s,
        Err(_) => return Err(T::infinity()),
    };
    let (mut cres, mut gres) = merit(&shot.end);
    let mut converged_at: Option<usize> = None;
    for it in 0..max_iter + 4 {
        let converged = cres <= tol_chart && gres <= opts.tol;
        if converged && converged_at.is_none() {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            // a few polishing steps drive the residual to the integrator floor
            if it >= c + 3 {
                break;
            }
        } else if it >= max_iter {
            return Err(cres);
        }
        let r = sub(&shot.end, target);
        let dv = match shot.jac.solve(&scale(&r, -T::one())) {
            Some(d) => d,
            None => {
                if converged_at.is_some() {
                    break;
                }
                return Err(cres);
            }
        };
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let mut vt = v.clone();
            axpy(&mut vt, lambda, &dv);
            let vt = cap(model, x, vt, bound);
            if let Ok(st) = shoot(model, x, &vt, opts) {
                let (c2, g2) = merit(&st.end);
                let decrease = if converged_at.is_some() { g2 < gres * T::lit(0.5) } else { g2 < gres * (T::one() - T::lit(1e-4) * lambda) };
                if decrease {
                    v = vt;
                    shot = st;
                    cres = c2;
                    gres = g2;
                    accepted = true;
                    break;
                }
            }
            if converged_at.is_some() {
                break;
            }
            lambda = lambda * T::lit(0.5);
        }
        *count += 1;
        if !accepted {
            if converged_at.is_some() {
                break;
            }
            return Err(cres);
        }
    }
    if converged_at.is_some() {
        Ok(Newton { v, shot, residual: cres })
    } else {
        Err(cres)
    }
}

/// Unit-time flow from `(p, v)` with its full state transition matrix.
/// Returns `(P, V, Φ)` with `Φ` of size `2n × 2n` acting on `(δp, δv)`.
fn flow_stm<T: Real>(model: &Model<T>, p: &[T], v: &[T], opts: &BvpOptions<T>) -> Result<(Vec<T>, Vec<T>, Matrix<T>)> {
    let n = p.len();
    let mut y0 = Vec::with_capacity(2 * n + 4 * n * n);
    y0.extend_from_slice(p);
    y0.extend_from_slice(v);
    for j in 0..2 * n {
        y0.extend((0..2 * n).map(|i| if i == j { T::one() } else { T::zero() }));
    }
    let out = integrate_flow(model, y0, 0, 2 * n, T::zero(), &[T::one()], &opts.step)?;
    let y = &out[0];
    let mut phi = Matrix::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let off = 2 * n + 2 * n * j;
        for i in 0..2 * n {
            phi[(i, j)] = y[off + i];
        }
    }
    Ok((y[..n].to_vec(), y[n..2 * n].to_vec(), phi))
}

/// Residuals and Jacobian of the multiple-shooting system. Unknowns are
/// `[v₀, p₁, v₁, …, p_{K−1}, v_{K−1}]`; residual rows are
/// `[P₀ − p₁, V₀ − v₁, …, P_{K−1} − y]`. The merit is the sum of squared
/// g-norms of the residual blocks.
fn ms_system<T: Real>(
    model: &Model<T>,
    x: &[T],
    y: &[T],
    z: &[T],
    k: usize,
    opts: &BvpOptions<T>,
    with_jac: bool,
) -> Result<(Vec<T>, T, Option<Matrix<T>>)> {
    let n = x.len();
    let size = (2 * k - 1) * n;
    let point = |i: usize| -> &[T] { if i == 0 { x } else { &z[n + (i - 1) * 2 * n..n + (i - 1) * 2 * n + n] } };
    let vel = |i: usize| -> &[T] { if i == 0 { &z[..n] } else { &z[n + (i - 1) * 2 * n + n..n + i * 2 * n] } };
    let mut res = vec![T::zero(); size];
    let mut merit = T::zero();
    let mut jac = if with_jac { Some(Matrix::zeros(size, size)) } else { None };
    for i in 0..k {
        let p = point(i);
        if !model.in_domain(p) {
            return Err(Error::degenerate("multiple-shooting node left the chart"));
        }
        let (pe, ve, phi) = flow_stm(model, p, vel(i), opts)?;
        let row = 2 * n * i;
        let (next_p, next_v) = if i + 1 < k { (point(i + 1), Some(vel(i + 1))) } else { (y, None) };
        let rp = sub(&pe, next_p);
        merit = merit + model.inner(next_p, &rp, &rp);
        res[row..row + n].copy_from_slice(&rp);
        if let Some(nv) = next_v {
            let rv = sub(&ve, nv);
            merit = merit + model.inner(next_p, &rv, &rv);
            res[row + n..row + 2 * n].copy_from_slice(&rv);
        }
        if let Some(jm) = jac.as_mut() {
            let rows = if i + 1 < k { 2 * n } else { n };
            let (pc, vc) = if i == 0 { (None, 0) } else { (Some(n + (i - 1) * 2 * n), n + (i - 1) * 2 * n + n) };
            for r in 0..rows {
                for c in 0..n {
                    if let Some(pc) = pc {
                        jm[(row + r, pc + c)] = phi[(r, c)];
                    }
                    jm[(row + r, vc + c)] = phi[(r, n + c)];
                }
            }
            if i + 1 < k {
                let npc = n + i * 2 * n;
                for c in 0..n {
                    jm[(row + c, npc + c)] = -T::one();
                    jm[(row + n + c, npc + n + c)] = -T::one();
                }
            }
        }
    }
    Ok((res, merit, jac))
}

/// Damped Newton on the multiple-shooting system with `k` segments,
/// initialised on the model's geodesic guess. Returns the unit-time initial velocity
/// of the whole geodesic.
pub(super) fn multiple_shooting<T: Real>(model: &Model<T>, x: &[T], y: &[T], k: usize, opts: &BvpOptions<T>, count: &mut usize) -> Option<Vec<T>> {
    let n = x.len();
    let kf = T::from_usize_lossy(k);
    let nodes: Vec<Vec<T>> = (0..=k).map(|i| model.geodesic_guess(x, y, T::from_usize_lossy(i) / kf)).collect();
    let mut z = sub(&nodes[1], &nodes[0]);
    for i in 1..k {
        z.extend_from_slice(&nodes[i]);
        z.extend(sub(&nodes[i + 1], &nodes[i]));
    }
    let (mut res, mut merit, mut jac) = ms_system(model, x, y, &z, k, opts, true).ok()?;
    let tol = opts.tol * opts.tol;
    for _ in 0..opts.max_iter {
        if merit <= tol {
            return Some(scale(&z[..n], kf));
        }
        let dz = jac.as_ref()?.solve(&scale(&res, -T::one()))?;
        *count += 1;
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let mut zt = z.clone();
            axpy(&mut zt, lambda, &dz);
            if let Ok((r2, m2, j2)) = ms_system(model, x, y, &zt, k, opts, true) {
                if m2 < merit * (T::one() - T::lit(1e-4) * lambda) {
                    z = zt;
                    res = r2;
                    merit = m2;
                    jac = j2;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            return None;
        }
    }
    (merit <= tol).then(|| scale(&z[..n], kf))
}

/// Metric length of the chart segment `s ↦ x + s(y − x)`, an upper bound
/// for `d(x, y)`. Adaptive Simpson quadrature.
pub fn chart_segment_length<T: Real>(model: &Model<T>, x: &[T], y: &[T]) -> T {
    let d = sub(y, x);
    let f = |s: T| -> T {
        let mut p = x.to_vec();
        axpy(&mut p, s, &d);
        model.norm(&p, &d)
    };
    let (a, b) = (T::zero(), T::one());
    let m = T::lit(0.5);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (fa + T::lit(4.0) * fm + fb) / T::lit(6.0);
    simpson(&f, a, b, fa, fm, fb, whole, T::lit(1e-10) * unit_scale(whole), 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, eps: T, depth: usize) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) * (fa + T::lit(4.0) * flm + fm) / T::lit(6.0);
    let right = (b - m) * (fm + T::lit(4.0) * frm + fb) / T::lit(6.0);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * eps {
        return left + right + delta / T::lit(15.0);
    }
    simpson(f, a, m, fa, flm, fm, left, eps / two, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / two, depth - 1)
}

/// Initial velocity of the model's geodesic guess (one-sided difference).
fn guess_velocity<T: Real>(model: &Model<T>, x: &[T], y: &[T]) -> Vec<T> {
    // fourth-order one-sided stencil; guesses over long spans (heights
    // ranging over many e-folds) need the accuracy
    let h = T::lit(1e-4);
    let p: Vec<Vec<T>> = (1..=4).map(|k| model.geodesic_guess(x, y, h * T::from_usize_lossy(k))).collect();
    (0..x.len())
        .map(|i| {
            (T::lit(-25.0) * x[i] + T::lit(48.0) * p[0][i] - T::lit(36.0) * p[1][i] + T::lit(16.0) * p[2][i] - T::lit(3.0) * p[3][i])
                / (T::lit(12.0) * h)
        })
        .collect()
}

/// Metric length of the geodesic guess by the midpoint rule on 64 chords.
fn guess_length<T: Real>(model: &Model<T>, x: &[T], y: &[T]) -> T {
    let m = 64;
    let at = |k: usize| model.geodesic_guess(x, y, T::from_usize_lossy(k) / T::from_usize_lossy(2 * m));
    let mut total = T::zero();
    for i in 0..m {
        let (a, mid, b) = (at(2 * i), at(2 * i + 1), at(2 * i + 2));
        if !model.in_domain(&mid) {
            return T::infinity();
        }
        total = total + model.norm(&mid, &sub(&b, &a));
    }
    total
}

/// Newton iterations of single shooting before switching to multiple shooting.
const MULTI_SHOOT_AFTER: usize = 15;

/// Solves `exp_x(v) = y` seeded by the chart direction `y − x`.
pub fn geodesic_bvp<T: Real>(model: &Model<T>, x: &ChartPoint<T>, y: &ChartPoint<T>, opts: &BvpOptions<T>) -> Result<BvpSolution<T>> {
    geodesic_bvp_seeded(model, x, y, None, opts)
}

/// As [`geodesic_bvp`], with an optional initial guess for `v` (chart
/// components at `x`), typically the solution of a nearby problem.
pub fn geodesic_bvp_seeded<T: Real>(
    model: &Model<T>,
    x: &ChartPoint<T>,
    y: &ChartPoint<T>,
    seed: Option<&[T]>,
    opts: &BvpOptions<T>,
) -> Result<BvpSolution<T>> {
    model.check_point(x)?;
    model.check_point(y)?;
    let (xc, yc) = (&x.coords, &y.coords);
    let n = xc.len();
    if xc == yc {
        return Ok(BvpSolution {
            velocity: TangentVec::zero(x.clone()),
            end_velocity: vec![T::zero(); n],
            length: T::zero(),
            residual: T::zero(),
            iterations: 0,
        });
    }
    let guess_len = guess_length(model, xc, yc);
    let bound = (chart_segment_length(model, xc, yc) * (T::one() + T::lit(1e-6))).min(guess_len * T::lit(1.01) + T::lit(1e-12));
    let mut count = 0usize;
    let straight = guess_velocity(model, xc, yc);
    let first = seed.map(|s| s.to_vec()).unwrap_or_else(|| straight.clone());
    let direct = newton(model, xc, yc, first, bound, opts, MULTI_SHOOT_AFTER.min(opts.max_iter), &mut count);
    let mut last_res = T::infinity();
    let sol = match direct {
        Ok(s) => Some(s),
        Err(r) => {
            last_res = r;
            let retry = if seed.is_some() {
                newton(model, xc, yc, straight.clone(), bound, opts, MULTI_SHOOT_AFTER, &mut count).ok()
            } else {
                None
            };
            retry
                .or_else(|| {
                    let k = (bound.to_f64_lossy() / 1.5).ceil().clamp(4.0, 48.0) as usize;
                    let v = multiple_shooting(model, xc, yc, k, opts, &mut count)?;
                    newton(model, xc, yc, v, bound, opts, opts.max_iter, &mut count).ok()
                })
                .or_else(|| continuation(model, xc, yc, bound, opts, &mut count).ok())
        }
    };
    match sol {
        Some(s) => Ok(BvpSolution {
            length: model.norm(xc, &s.v),
            velocity: TangentVec { base: x.clone(), components: s.v },
            end_velocity: s.shot.end_v,
            residual: s.residual,
            iterations: count,
        }),
        None => Err(Error::Bvp { iterations: count, residual: last_res.to_f64_lossy() }),
    }
}

/// Homotopy in the target: `y(s) = x + s(y − x)` from `s = 0` to `1`, with a
/// tangent predictor `v ← v + J⁻¹ Δy` and Newton correction at each stage.
fn continuation<T: Real>(model: &Model<T>, x: &[T], y: &[T], bound: T, opts: &BvpOptions<T>, count: &mut usize) -> std::result::Result<Newton<T>, T> {
    let d = sub(y, x);
    let n = x.len();
    let mut v = vec![T::zero(); n];
    let mut jac = Matrix::identity(n);
    let mut s = T::zero();
    let mut ds = T::lit(0.125);
    let budget = opts.max_iter * 20;
    let mut best: Option<Newton<T>> = None;
    while s < T::one() {
        if *count > budget || ds < T::lit(1e-5) {
            return Err(T::infinity());
        }
        let s_new = (s + ds).min(T::one());
        let mut target = x.to_vec();
        axpy(&mut target, s_new, &d);
        let pred = match jac.solve(&scale(&d, s_new - s)) {
            Some(dv) => {
                let mut p = v.clone();
                axpy(&mut p, T::one(), &dv);
                p
            }
            None => v.clone(),
        };
        let stage_bound = chart_segment_length(model, x, &target) * (T::one() + T::lit(1e-6));
        let stage_bound = stage_bound.min(bound);
        match newton(model, x, &target, pred, stage_bound, opts, 12, count) {
            Ok(sol) => {
                s = s_new;
                v = sol.v.clone();
                jac = sol.shot.jac.clone();
                best = Some(sol);
                ds = (ds * T::lit(1.5)).min(T::lit(0.5));
            }
            Err(_) => ds = ds * T::lit(0.5),
        }
    }
    best.ok_or(T::infinity())
}

/// `log_x(y)`: the initial velocity of the unit-time geodesic from `x` to `y`.
pub fn log_map<T: Real>(model: &Model<T>, x: &ChartPoint<T>, y: &ChartPoint<T>, opts: &BvpOptions<T>) -> Result<TangentVec<T>> {
    Ok(geodesic_bvp(model, x, y, opts)?.velocity)
}

/// Riemannian distance, the length of the connecting geodesic.
pub fn distance<T: Real>(model: &Model<T>, x: &ChartPoint<T>, y: &ChartPoint<T>, opts: &BvpOptions<T>) -> Result<T> {
    Ok(geodesic_bvp(model, x, y, opts)?.length)
}

/// The geodesic from `x` to `y` parametrised on `[0, 1]`.
pub fn geodesic_segment<T: Real>(model: &Model<T>, x: &ChartPoint<T>, y: &ChartPoint<T>, opts: &BvpOptions<T>) -> Result<GeodesicPath<T>> {
    let sol = geodesic_bvp(model, x, y, opts)?;
    if sol.length == T::zero() {
        return Err(Error::degenerate("segment endpoints coincide"));
    }
    geodesic_ivp(model, &sol.velocity, T::one(), &opts.step)
}
