//! Geodesics, parallel transport, Jacobi fields, distances and projections.
//!
//! Everything is integrated in the model chart. A single first-order flow
//! carries the geodesic state `(x, ẋ)` together with any number of
//! transported vectors and linearised perturbations `(δx, δẋ)`, so one
//! integration yields a geodesic, a parallel frame along it and the
//! derivative of the exponential map at once.

mod bvp;
mod flow;
mod projection;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{axpy, scale};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::ode::StepControl;
use crate::scalar::Real;

pub use bvp::{chart_segment_length, distance, geodesic_bvp, geodesic_bvp_seeded, geodesic_segment, log_map, BvpOptions, BvpSolution, JacobianMode};
pub(crate) use flow::integrate_flow;
pub use projection::{project_to_geodesic, Projection, ProjectionOptions};

/// Default spacing (in units of arclength) between stored path samples.
const SAMPLE_SPACING: f64 = 0.05;

/// One stored sample of a geodesic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample<T> {
    pub t: T,
    pub point: ChartPoint<T>,
    pub velocity: Vec<T>,
}

/// A sampled constant-speed geodesic on a parameter window `[t_min, t_max]`.
///
/// Samples are exact outputs of the integrator on a uniform grid; values in
/// between come either from cubic Hermite interpolation ([`Self::interpolate`])
/// or from a short re-integration off the nearest sample ([`Self::state_at`]).
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPath<T> {
    pub model_id: String,
    pub samples: Vec<PathSample<T>>,
    pub speed: T,
    #[serde(skip)]
    step: StepControl<T>,
}

impl<T: Real> GeodesicPath<T> {
    pub fn t_min(&self) -> T {
        self.samples[0].t
    }

    pub fn t_max(&self) -> T {
        self.samples[self.samples.len() - 1].t
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step_control(&self) -> &StepControl<T> {
        &self.step
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn tangent(&self, i: usize) -> TangentVec<T> {
        let s = &self.samples[i];
        TangentVec { base: s.point.clone(), components: s.velocity.clone() }
    }

    pub fn start(&self) -> TangentVec<T> {
        self.tangent(0)
    }

    /// Index of the last sample with `t_i <= t` (clamped to the window).
    fn locate(&self, t: T) -> usize {
        let i = self.samples.partition_point(|s| s.t <= t);
        i.saturating_sub(1).min(self.samples.len() - 2)
    }

    /// Cubic Hermite interpolation of position and velocity.
    pub fn interpolate(&self, t: T) -> (Vec<T>, Vec<T>) {
        if self.samples.len() == 1 {
            let s = &self.samples[0];
            return (s.point.coords.clone(), s.velocity.clone());
        }
        let i = self.locate(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let six = T::lit(6.0);
        let d00 = (six * s2 - six * s) / h;
        let d10 = three * s2 - T::lit(4.0) * s + T::one();
        let d01 = (-six * s2 + six * s) / h;
        let d11 = three * s2 - two * s;
        let n = a.velocity.len();
        let mut x = vec![T::zero(); n];
        let mut v = vec![T::zero(); n];
        for k in 0..n {
            let (p0, p1, m0, m1) = (a.point.coords[k], b.point.coords[k], a.velocity[k], b.velocity[k]);
            x[k] = h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
            v[k] = d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1;
        }
        (x, v)
    }

    /// Exact state `(γ(t), γ̇(t))`, integrated from the nearest sample. `t`
    /// may lie outside the window.
    pub fn state_at(&self, model: &Model<T>, t: T) -> Result<(Vec<T>, Vec<T>)> {
        let i = if t <= self.t_min() {
            0
        } else if t >= self.t_max() {
            self.samples.len() - 1
        } else {
            let i = self.locate(t);
            if (t - self.samples[i].t) <= (self.samples[i + 1].t - t) {
                i
            } else {
                i + 1
            }
        };
        let s = &self.samples[i];
        if s.t == t {
            return Ok((s.point.coords.clone(), s.velocity.clone()));
        }
        let n = model.dim();
        let mut y0 = s.point.coords.clone();
        y0.extend_from_slice(&s.velocity);
        let out = integrate_flow(model, y0, 0, 0, s.t, &[t], &self.step)?;
        let y = &out[0];
        Ok((y[..n].to_vec(), y[n..2 * n].to_vec()))
    }

    pub fn point_at(&self, model: &Model<T>, t: T) -> Result<ChartPoint<T>> {
        Ok(ChartPoint::new(self.state_at(model, t)?.0))
    }

    /// The same curve traversed backwards on the same window:
    /// `t ↦ γ(t_min + t_max − t)`.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.t_min(), self.t_max());
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| PathSample { t: a + b - s.t, point: s.point.clone(), velocity: scale(&s.velocity, -T::one()) })
            .collect();
        Self { model_id: self.model_id.clone(), samples, speed: self.speed, step: self.step }
    }

    /// Affine reparametrisation `t ↦ a·t + b` (with `a > 0`), keeping the
    /// same sample points.
    pub fn reparametrized(&self, a: T, b: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::usage("reparametrisation factor must be positive"));
        }
        let samples = self
            .samples
            .iter()
            .map(|s| PathSample { t: a * s.t + b, point: s.point.clone(), velocity: scale(&s.velocity, T::one() / a) })
            .collect();
        Ok(Self { model_id: self.model_id.clone(), samples, speed: self.speed / a, step: self.step })
    }

    /// Extends the window to (at least) `[t_min, t_max]` by integrating off
    /// the current end samples with the same grid spacing.
    pub fn extended(&self, model: &Model<T>, t_min: T, t_max: T) -> Result<Self> {
        let h = if self.samples.len() > 1 { self.samples[1].t - self.samples[0].t } else { T::lit(SAMPLE_SPACING) };
        let n = model.dim();
        let mut samples = Vec::new();
        if t_min < self.t_min() {
            let first = &self.samples[0];
            let k = ((self.t_min() - t_min) / h).ceil().to_usize().unwrap_or(1).max(1);
            let times: Vec<T> = (1..=k).map(|j| first.t - h * T::from_usize_lossy(j)).collect();
            let mut y0 = first.point.coords.clone();
            y0.extend_from_slice(&first.velocity);
            let out = integrate_flow(model, y0, 0, 0, first.t, &times, &self.step)?;
            for (t, y) in times.iter().zip(out).rev() {
                samples.push(PathSample { t: *t, point: ChartPoint::new(y[..n].to_vec()), velocity: y[n..2 * n].to_vec() });
            }
        }
        samples.extend(self.samples.iter().cloned());
        if t_max > self.t_max() {
            let last = &self.samples[self.samples.len() - 1];
            let k = ((t_max - self.t_max()) / h).ceil().to_usize().unwrap_or(1).max(1);
            let times: Vec<T> = (1..=k).map(|j| last.t + h * T::from_usize_lossy(j)).collect();
            let mut y0 = last.point.coords.clone();
            y0.extend_from_slice(&last.velocity);
            let out = integrate_flow(model, y0, 0, 0, last.t, &times, &self.step)?;
            for (t, y) in times.iter().zip(out) {
                samples.push(PathSample { t: *t, point: ChartPoint::new(y[..n].to_vec()), velocity: y[n..2 * n].to_vec() });
            }
        }
        Ok(Self { model_id: self.model_id.clone(), samples, speed: self.speed, step: self.step })
    }

    /// Largest relative deviation of the sampled g-speed from `speed`.
    pub fn speed_defect(&self, model: &Model<T>) -> T {
        self.samples
            .iter()
            .map(|s| ((model.norm(&s.point.coords, &s.velocity) - self.speed) / self.speed).abs())
            .fold(T::zero(), T::max)
    }
}

fn uniform_grid<T: Real>(a: T, b: T, spacing: T) -> Vec<T> {
    let k = ((b - a) / spacing).ceil().to_usize().unwrap_or(1).max(1);
    (0..=k).map(|j| if j == k { b } else { a + (b - a) * T::from_usize_lossy(j) / T::from_usize_lossy(k) }).collect()
}

/// Integrates the geodesic with initial velocity `v0` on `[0, t_end]`.
pub fn geodesic_ivp<T: Real>(model: &Model<T>, v0: &TangentVec<T>, t_end: T, step: &StepControl<T>) -> Result<GeodesicPath<T>> {
    geodesic_window(model, v0, T::zero(), t_end, step)
}

/// Integrates the geodesic with `γ(0) = v0.base`, `γ̇(0) = v0` on the window
/// `[t_min, t_max]` (which must contain 0).
pub fn geodesic_window<T: Real>(
    model: &Model<T>,
    v0: &TangentVec<T>,
    t_min: T,
    t_max: T,
    step: &StepControl<T>,
) -> Result<GeodesicPath<T>> {
    model.check_vector(v0)?;
    if !(t_min <= T::zero() && t_max >= T::zero() && t_max > t_min) {
        return Err(Error::usage("geodesic window must be non-empty and contain t = 0"));
    }
    let speed = model.norm(&v0.base.coords, &v0.components);
    if !(speed > T::zero()) {
        return Err(Error::degenerate("geodesic initial velocity is zero"));
    }
    let n = model.dim();
    let spacing = T::lit(SAMPLE_SPACING) / speed;
    let mut y0 = v0.base.coords.clone();
    y0.extend_from_slice(&v0.components);
    let mut samples = Vec::new();
    if t_min < T::zero() {
        let back: Vec<T> = uniform_grid(t_min, T::zero(), spacing).into_iter().rev().skip(1).collect();
        let out = integrate_flow(model, y0.clone(), 0, 0, T::zero(), &back, step)?;
        for (t, y) in back.iter().zip(out).rev() {
            samples.push(PathSample { t: *t, point: ChartPoint::new(y[..n].to_vec()), velocity: y[n..].to_vec() });
        }
    }
    samples.push(PathSample { t: T::zero(), point: v0.base.clone(), velocity: v0.components.clone() });
    if t_max > T::zero() {
        let fwd: Vec<T> = uniform_grid(T::zero(), t_max, spacing).into_iter().skip(1).collect();
        let out = integrate_flow(model, y0, 0, 0, T::zero(), &fwd, step)?;
        for (t, y) in fwd.iter().zip(out) {
            samples.push(PathSample { t: *t, point: ChartPoint::new(y[..n].to_vec()), velocity: y[n..].to_vec() });
        }
    }
    Ok(GeodesicPath { model_id: model.to_string(), samples, speed, step: *step })
}

/// `exp_x(v)`.
pub fn exp_map<T: Real>(model: &Model<T>, v: &TangentVec<T>, step: &StepControl<T>) -> Result<ChartPoint<T>> {
    Ok(ChartPoint::new(exp_state(model, &v.base.coords, &v.components, step)?.0))
}

/// Position and velocity at time 1 of the geodesic with initial state `(x, v)`.
pub(crate) fn exp_state<T: Real>(model: &Model<T>, x: &[T], v: &[T], step: &StepControl<T>) -> Result<(Vec<T>, Vec<T>)> {
    let n = x.len();
    let mut y0 = x.to_vec();
    y0.extend_from_slice(v);
    let out = integrate_flow(model, y0, 0, 0, T::zero(), &[T::one()], step)?;
    Ok((out[0][..n].to_vec(), out[0][n..].to_vec()))
}

/// Parallel transport of several vectors along the geodesic with initial
/// state `(x, v)` from time 0 to each of `times`. Returns, per time, the
/// geodesic state and the transported vectors.
pub(crate) fn transport_along<T: Real>(
    model: &Model<T>,
    x: &[T],
    v: &[T],
    vectors: &[Vec<T>],
    times: &[T],
    step: &StepControl<T>,
) -> Result<Vec<(Vec<T>, Vec<T>, Vec<Vec<T>>)>> {
    let n = x.len();
    let mut y0 = x.to_vec();
    y0.extend_from_slice(v);
    for w in vectors {
        y0.extend_from_slice(w);
    }
    let out = integrate_flow(model, y0, vectors.len(), 0, T::zero(), times, step)?;
    Ok(out
        .into_iter()
        .map(|y| {
            let ws = (0..vectors.len()).map(|j| y[2 * n + j * n..2 * n + (j + 1) * n].to_vec()).collect();
            (y[..n].to_vec(), y[n..2 * n].to_vec(), ws)
        })
        .collect())
}

/// Integrates several vectors in parallel along the path, starting at its
/// first sample. Result is indexed `[sample][vector]`.
fn transport_on_path<T: Real>(model: &Model<T>, path: &GeodesicPath<T>, vectors: &[Vec<T>]) -> Result<Vec<Vec<Vec<T>>>> {
    let s0 = &path.samples[0];
    let rel: Vec<T> = path.samples.iter().map(|s| s.t - s0.t).collect();
    let out = transport_along(model, &s0.point.coords, &s0.velocity, vectors, &rel, &path.step)?;
    Ok(out.into_iter().map(|(_, _, ws)| ws).collect())
}

/// Parallel transport of `v` (based at the first sample) to every sample.
pub fn parallel_transport<T: Real>(model: &Model<T>, path: &GeodesicPath<T>, v: &TangentVec<T>) -> Result<Vec<TangentVec<T>>> {
    model.check_vector(v)?;
    if v.base != path.samples[0].point {
        return Err(Error::usage("vector to transport must be based at the start of the path"));
    }
    let out = transport_on_path(model, path, std::slice::from_ref(&v.components))?;
    Ok(out
        .into_iter()
        .zip(&path.samples)
        .map(|(mut ws, s)| TangentVec { base: s.point.clone(), components: ws.remove(0) })
        .collect())
}

/// A parallel orthonormal frame along a path; `frames[k][0]` is the unit
/// tangent and `frames[k][1..]` span the normal space.
#[derive(Debug, Clone, Serialize)]
pub struct FramePath<T> {
    pub times: Vec<T>,
    pub points: Vec<ChartPoint<T>>,
    pub velocities: Vec<Vec<T>>,
    pub frames: Vec<Vec<Vec<T>>>,
}

impl<T: Real> FramePath<T> {
    /// Largest deviation of the Gram matrix from the identity over samples.
    pub fn orthonormality_defect(&self, model: &Model<T>) -> T {
        let mut worst = T::zero();
        for (p, frame) in self.points.iter().zip(&self.frames) {
            for (i, ei) in frame.iter().enumerate() {
                for (j, ej) in frame.iter().enumerate() {
                    let target = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((model.inner(&p.coords, ei, ej) - target).abs());
                }
            }
        }
        worst
    }

    /// Largest deviation of `E_1` from the unit tangent.
    pub fn tangent_defect(&self, model: &Model<T>) -> T {
        let mut worst = T::zero();
        for ((p, v), frame) in self.points.iter().zip(&self.velocities).zip(&self.frames) {
            let sp = model.norm(&p.coords, v);
            let mut d = frame[0].clone();
            axpy(&mut d, -T::one() / sp, v);
            worst = worst.max(model.norm(&p.coords, &d));
        }
        worst
    }

    /// `Σ c_i E_{i+1}` at sample `k`, i.e. the normal field with coefficients `c`.
    pub fn normal_field(&self, k: usize, c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.frames[k][0].len()];
        for (ci, e) in c.iter().zip(&self.frames[k][1..]) {
            axpy(&mut out, *ci, e);
        }
        out
    }
}

/// g-orthonormal basis at `x` whose first vector is `u/|u|`, by Gram–Schmidt
/// on `u` followed by the coordinate vectors.
pub fn orthonormal_basis<T: Real>(model: &Model<T>, x: &[T], u: &[T]) -> Result<Vec<Vec<T>>> {
    let n = x.len();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut candidates = vec![u.to_vec()];
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        candidates.push(e);
    }
    for c in candidates {
        if basis.len() == n {
            break;
        }
        let mut w = c;
        for _ in 0..2 {
            for b in &basis {
                let p = model.inner(x, &w, b);
                axpy(&mut w, -p, b);
            }
        }
        let nw = model.norm(x, &w);
        let scale_ref = model.norm(x, &basis.first().cloned().unwrap_or_else(|| w.clone())).max(T::min_positive_value());
        if basis.is_empty() {
            if !(nw > T::zero()) {
                return Err(Error::degenerate("frame direction is zero"));
            }
        } else if nw <= T::lit(1e-8) * scale_ref.max(T::one()) {
            continue;
        }
        basis.push(scale(&w, T::one() / nw));
    }
    if basis.len() != n {
        return Err(Error::degenerate("could not complete an orthonormal frame"));
    }
    Ok(basis)
}

/// Parallel orthonormal frame along the path, seeded at the first sample.
pub fn parallel_frame<T: Real>(model: &Model<T>, path: &GeodesicPath<T>) -> Result<FramePath<T>> {
    let s0 = &path.samples[0];
    let basis = orthonormal_basis(model, &s0.point.coords, &s0.velocity)?;
    let out = transport_on_path(model, path, &basis)?;
    Ok(FramePath {
        times: path.times(),
        points: path.samples.iter().map(|s| s.point.clone()).collect(),
        velocities: path.samples.iter().map(|s| s.velocity.clone()).collect(),
        frames: out,
    })
}

/// One sample of a Jacobi field: `J(t)` and its covariant derivative `J'(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiSample<T> {
    pub t: T,
    pub point: ChartPoint<T>,
    pub j: Vec<T>,
    pub jp: Vec<T>,
}

/// A Jacobi field along a geodesic path, sampled on the path's grid.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiField<T> {
    pub samples: Vec<JacobiSample<T>>,
}

impl<T: Real> JacobiField<T> {
    pub fn norms(&self, model: &Model<T>) -> Vec<T> {
        self.samples.iter().map(|s| model.norm(&s.point.coords, &s.j)).collect()
    }

    pub fn derivative_norms(&self, model: &Model<T>) -> Vec<T> {
        self.samples.iter().map(|s| model.norm(&s.point.coords, &s.jp)).collect()
    }
}

/// Jacobi field with `J(t_0) = j0`, `J'(t_0) = j0p` at the first sample.
///
/// The field is obtained from the linearised geodesic flow: a variation
/// `δx = J` of the geodesic has `δẋ = J' − Γ(γ̇, J)`. This never evaluates
/// the curvature tensor, which makes it an independent check on anything
/// computed from `R`.
pub fn jacobi_ivp<T: Real>(
    model: &Model<T>,
    path: &GeodesicPath<T>,
    j0: &TangentVec<T>,
    j0p: &TangentVec<T>,
) -> Result<JacobiField<T>> {
    model.check_vector(j0)?;
    model.check_vector(j0p)?;
    if j0.base != path.samples[0].point || j0p.base != path.samples[0].point {
        return Err(Error::usage("Jacobi initial data must be based at the start of the path"));
    }
    jacobi_on_samples(model, &path.samples, &path.step, &j0.components, &j0p.components)
}

/// Jacobi field along a run of consecutive path samples, with initial data
/// (chart components) at the first of them.
pub(crate) fn jacobi_on_samples<T: Real>(
    model: &Model<T>,
    samples: &[PathSample<T>],
    step: &StepControl<T>,
    j0: &[T],
    j0p: &[T],
) -> Result<JacobiField<T>> {
    let n = model.dim();
    let s0 = &samples[0];
    let (x0, v0) = (&s0.point.coords, &s0.velocity);
    let mut g = vec![T::zero(); n];
    model.gamma_contract(x0, v0, j0, &mut g);
    let dv0: Vec<T> = j0p.iter().zip(&g).map(|(a, b)| *a - *b).collect();
    let mut y0 = x0.clone();
    y0.extend_from_slice(v0);
    y0.extend_from_slice(j0);
    y0.extend_from_slice(&dv0);
    let times: Vec<T> = samples.iter().map(|s| s.t).collect();
    let out = integrate_flow(model, y0, 0, 1, s0.t, &times, step)?;
    let samples = out
        .into_iter()
        .zip(samples)
        .map(|(y, s)| {
            let (x, v) = (&y[..n], &y[n..2 * n]);
            let dx = y[2 * n..3 * n].to_vec();
            let mut jp = y[3 * n..4 * n].to_vec();
            let mut g = vec![T::zero(); n];
            model.gamma_contract(x, v, &dx, &mut g);
            axpy(&mut jp, T::one(), &g);
            JacobiSample { t: s.t, point: s.point.clone(), j: dx, jp }
        })
        .collect();
    Ok(JacobiField { samples })
}

/// Largest relative defect of `t ↦ |J(t)|²` being convex: the most negative
/// discrete second difference divided by the largest value.
pub fn squared_norm_convexity_defect<T: Real>(model: &Model<T>, field: &JacobiField<T>) -> T {
    let sq: Vec<T> = field.norms(model).into_iter().map(|x| x * x).collect();
    let mut worst = T::zero();
    for w in sq.windows(3) {
        worst = worst.min(w[0] - T::lit(2.0) * w[1] + w[2]);
    }
    worst
}

#[cfg(test)]
mod tests;
