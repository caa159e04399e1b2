//! Chart-based Riemannian models.
//!
//! Each model is a single global chart with closed-form metric, Christoffel
//! symbols and Christoffel derivatives. Curvature is assembled from those,
//! with the convention `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, so that
//! `⟨R(u,v)v,u⟩ = K(u∧v)(|u|²|v|² − ⟨u,v⟩²)` and the Jacobi equation reads
//! `J'' + R(J,γ')γ' = 0`.
//!
//! The conformally flat models (Euclidean, half-space, stereographic sphere)
//! share the formulas for `g = e^{2φ}δ`:
//! `Γ^k_ij = δ_ik ∂_jφ + δ_jk ∂_iφ − δ_ij ∂_kφ`.

mod point;
mod profile;

use std::fmt;

use serde::Serialize;

pub use point::{ChartPoint, TangentVec};
pub use profile::Profile;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Catalog of models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Model<T> {
    /// Flat ℝⁿ.
    Euclidean { dim: usize },
    /// Upper half-space `x_n > 0` with `g = (a·x_n)^{-2} δ`, curvature `−a²`.
    HalfSpace { dim: usize, a: T },
    /// Round sphere of the given radius in the stereographic chart from the
    /// north pole. Positively curved; only used as a failing fixture.
    Sphere { dim: usize, radius: T },
    /// `dr² + f(r)² dθ²` on the `(r, θ)` plane (θ unwrapped, so the chart is
    /// the universal cover).
    Revolution { profile: Profile<T> },
    /// Riemannian product, coordinates of the first factor first.
    Product(Box<Model<T>>, Box<Model<T>>),
}

/// Christoffel symbols `Γ^k_ij` at a point, stored `k`-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Christoffel<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^k_ij`
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        let n = self.dim;
        self.data[k * n * n + i * n + j]
    }

    /// `Γ(u, w)^k = Γ^k_ij u^i w^j`
    pub fn contract(&self, u: &[T], w: &[T]) -> Vec<T> {
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc = acc + self.get(k, i, j) * u[i] * w[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Largest `|Γ^k_ij − Γ^k_ji|`.
    pub fn lower_asymmetry(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Real> Model<T> {
    pub fn euclidean(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Model::Euclidean { dim }
    }

    /// Half-space hyperbolic model of curvature `−a²`.
    pub fn half_space(dim: usize, a: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::usage("half-space model needs dimension >= 2"));
        }
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::usage("half-space parameter a must be positive"));
        }
        Ok(Model::HalfSpace { dim, a })
    }

    /// Curvature −1 hyperbolic plane, the most used fixture.
    pub fn hyperbolic_plane() -> Self {
        Model::HalfSpace { dim: 2, a: T::one() }
    }

    pub fn sphere(dim: usize, radius: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::usage("sphere needs dimension >= 2"));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::usage("sphere radius must be positive"));
        }
        Ok(Model::Sphere { dim, radius })
    }

    pub fn revolution(profile: Profile<T>) -> Self {
        Model::Revolution { profile }
    }

    pub fn product(first: Model<T>, second: Model<T>) -> Self {
        Model::Product(Box::new(first), Box::new(second))
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Euclidean { dim } | Model::HalfSpace { dim, .. } | Model::Sphere { dim, .. } => *dim,
            Model::Revolution { .. } => 2,
            Model::Product(a, b) => a.dim() + b.dim(),
        }
    }

    /// True iff sectional curvature is ≤ 0 everywhere.
    pub fn is_npc(&self) -> bool {
        match self {
            Model::Sphere { .. } => false,
            Model::Product(a, b) => a.is_npc() && b.is_npc(),
            _ => true,
        }
    }

    /// A convenient interior point (origin, or height 1 for the half-space).
    pub fn reference_point(&self) -> ChartPoint<T> {
        ChartPoint::new(self.reference_coords())
    }

    fn reference_coords(&self) -> Vec<T> {
        match self {
            Model::HalfSpace { dim, .. } => {
                let mut c = vec![T::zero(); *dim];
                c[*dim - 1] = T::one();
                c
            }
            Model::Product(a, b) => {
                let mut c = a.reference_coords();
                c.extend(b.reference_coords());
                c
            }
            _ => vec![T::zero(); self.dim()],
        }
    }

    /// Whether raw chart coordinates are admissible.
    pub fn in_domain(&self, x: &[T]) -> bool {
        if x.len() != self.dim() || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            Model::HalfSpace { dim, .. } => x[*dim - 1] > T::zero(),
            Model::Revolution { profile } => profile.eval(x[0]).0 > T::zero(),
            Model::Product(a, b) => {
                let n1 = a.dim();
                a.in_domain(&x[..n1]) && b.in_domain(&x[n1..])
            }
            _ => true,
        }
    }

    pub(crate) fn check_point(&self, x: &ChartPoint<T>) -> Result<()> {
        if self.in_domain(&x.coords) {
            Ok(())
        } else {
            Err(Error::Domain { model: self.to_string(), coords: x.to_f64() })
        }
    }

    pub(crate) fn check_vector(&self, v: &TangentVec<T>) -> Result<()> {
        self.check_point(&v.base)?;
        if v.components.len() != self.dim() {
            return Err(Error::usage("tangent vector dimension does not match the model"));
        }
        Ok(())
    }

    // ---------------------------------------------------------------------
    // conformal factor helpers (Euclidean, HalfSpace, Sphere)

    fn conformal_log_factor(&self, x: &[T]) -> T {
        match self {
            Model::Euclidean { .. } => T::zero(),
            Model::HalfSpace { dim, a } => -(*a * x[*dim - 1]).ln(),
            Model::Sphere { radius, .. } => {
                let r2 = *radius * *radius;
                (T::lit(2.0) * r2).ln() - (r2 + dot(x, x)).ln()
            }
            _ => unreachable!("not a conformal model"),
        }
    }

    fn conformal_grad(&self, x: &[T], g: &mut [T]) {
        match self {
            Model::Euclidean { .. } => g.iter_mut().for_each(|gi| *gi = T::zero()),
            Model::HalfSpace { dim, .. } => {
                g.iter_mut().for_each(|gi| *gi = T::zero());
                g[*dim - 1] = -T::one() / x[*dim - 1];
            }
            Model::Sphere { radius, .. } => {
                let s = *radius * *radius + dot(x, x);
                for (gi, &xi) in g.iter_mut().zip(x) {
                    *gi = T::lit(-2.0) * xi / s;
                }
            }
            _ => unreachable!("not a conformal model"),
        }
    }

    /// `out = Hess(φ) · d`
    fn conformal_hess_apply(&self, x: &[T], d: &[T], out: &mut [T]) {
        match self {
            Model::Euclidean { .. } => out.iter_mut().for_each(|o| *o = T::zero()),
            Model::HalfSpace { dim, .. } => {
                out.iter_mut().for_each(|o| *o = T::zero());
                let y = x[*dim - 1];
                out[*dim - 1] = d[*dim - 1] / (y * y);
            }
            Model::Sphere { radius, .. } => {
                let s = *radius * *radius + dot(x, x);
                let xd = dot(x, d);
                for i in 0..x.len() {
                    out[i] = T::lit(-2.0) * d[i] / s + T::lit(4.0) * x[i] * xd / (s * s);
                }
            }
            _ => unreachable!("not a conformal model"),
        }
    }

    // ---------------------------------------------------------------------
    // raw geometry on coordinate slices (no domain checks)

    /// Metric matrix at raw coordinates.
    pub fn metric_raw(&self, x: &[T]) -> Matrix<T> {
        match self {
            Model::Euclidean { .. } | Model::HalfSpace { .. } | Model::Sphere { .. } => {
                let e2 = (T::lit(2.0) * self.conformal_log_factor(x)).exp();
                Matrix::diagonal(&vec![e2; self.dim()])
            }
            Model::Revolution { profile } => {
                let (f, _, _) = profile.eval(x[0]);
                Matrix::diagonal(&[T::one(), f * f])
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let n = self.dim();
                let (ga, gb) = (a.metric_raw(&x[..n1]), b.metric_raw(&x[n1..]));
                let mut g = Matrix::zeros(n, n);
                for i in 0..n1 {
                    for j in 0..n1 {
                        g[(i, j)] = ga[(i, j)];
                    }
                }
                for i in n1..n {
                    for j in n1..n {
                        g[(i, j)] = gb[(i - n1, j - n1)];
                    }
                }
                g
            }
        }
    }

    /// A point at fraction `s` of an initial guess for the geodesic from `x`
    /// to `y`. Exact for the half-space and for the hyperbolic revolution
    /// profiles (through their half-plane charts), factorwise on products, and
    /// the chart segment otherwise.
    pub(crate) fn geodesic_guess(&self, x: &[T], y: &[T], s: T) -> Vec<T> {
        let chord = || x.iter().zip(y).map(|(&a, &b)| a + s * (b - a)).collect();
        match self {
            Model::HalfSpace { .. } => half_space_guess(x, y, s),
            Model::Revolution { profile: Profile::Exp } => {
                let to = |p: &[T]| vec![p[1], (-p[0]).exp()];
                let q = half_space_guess(&to(x), &to(y), s);
                vec![-q[1].ln(), q[0]]
            }
            Model::Revolution { profile: Profile::Cosh } => {
                let to = |p: &[T]| {
                    let e = p[1].exp();
                    vec![e * p[0].tanh(), e / p[0].cosh()]
                };
                let q = half_space_guess(&to(x), &to(y), s);
                vec![(q[0] / q[1]).asinh(), q[0].hypot(q[1]).ln()]
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let mut out = a.geodesic_guess(&x[..n1], &y[..n1], s);
                out.extend(b.geodesic_guess(&x[n1..], &y[n1..], s));
                out
            }
            _ => chord(),
        }
    }

    /// `1/sqrt(g_kk)` per coordinate: the chart length of a unit-length step
    /// along each coordinate axis (every catalog metric is diagonal).
    pub fn coordinate_scales(&self, x: &[T], out: &mut [T]) {
        match self {
            Model::Euclidean { .. } | Model::HalfSpace { .. } | Model::Sphere { .. } => {
                let s = (-self.conformal_log_factor(x)).exp();
                out.iter_mut().for_each(|o| *o = s);
            }
            Model::Revolution { profile } => {
                out[0] = T::one();
                out[1] = T::one() / profile.eval(x[0]).0;
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let (o1, o2) = out.split_at_mut(n1);
                a.coordinate_scales(&x[..n1], o1);
                b.coordinate_scales(&x[n1..], o2);
            }
        }
    }

    /// `g_x(u, w)`
    pub fn inner(&self, x: &[T], u: &[T], w: &[T]) -> T {
        match self {
            Model::Euclidean { .. } | Model::HalfSpace { .. } | Model::Sphere { .. } => {
                (T::lit(2.0) * self.conformal_log_factor(x)).exp() * dot(u, w)
            }
            Model::Revolution { profile } => {
                let (f, _, _) = profile.eval(x[0]);
                u[0] * w[0] + f * f * u[1] * w[1]
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                a.inner(&x[..n1], &u[..n1], &w[..n1]) + b.inner(&x[n1..], &u[n1..], &w[n1..])
            }
        }
    }

    pub fn norm(&self, x: &[T], u: &[T]) -> T {
        self.inner(x, u, u).max(T::zero()).sqrt()
    }

    /// `out = Γ_x(u, w)`, i.e. `out^k = Γ^k_ij u^i w^j`.
    pub fn gamma_contract(&self, x: &[T], u: &[T], w: &[T], out: &mut [T]) {
        match self {
            Model::Euclidean { .. } => out.iter_mut().for_each(|o| *o = T::zero()),
            Model::HalfSpace { dim, .. } => {
                // ∇φ = −e_n / y
                let n = *dim;
                let inv_y = T::one() / x[n - 1];
                let (gu, gw) = (-u[n - 1] * inv_y, -w[n - 1] * inv_y);
                let uw = dot(u, w);
                for k in 0..n {
                    out[k] = u[k] * gw + w[k] * gu;
                }
                out[n - 1] = out[n - 1] + uw * inv_y;
            }
            Model::Sphere { .. } => {
                let n = x.len();
                let mut g = vec![T::zero(); n];
                self.conformal_grad(x, &mut g);
                let (gu, gw, uw) = (dot(&g, u), dot(&g, w), dot(u, w));
                for k in 0..n {
                    out[k] = u[k] * gw + w[k] * gu - uw * g[k];
                }
            }
            Model::Revolution { profile } => {
                let (f, f1, _) = profile.eval(x[0]);
                out[0] = -f * f1 * u[1] * w[1];
                out[1] = f1 / f * (u[0] * w[1] + u[1] * w[0]);
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let (o1, o2) = out.split_at_mut(n1);
                a.gamma_contract(&x[..n1], &u[..n1], &w[..n1], o1);
                b.gamma_contract(&x[n1..], &u[n1..], &w[n1..], o2);
            }
        }
    }

    /// Geodesic acceleration `ẍ = −Γ(ẋ, ẋ)`.
    #[inline]
    pub fn geodesic_accel(&self, x: &[T], v: &[T], out: &mut [T]) {
        self.gamma_contract(x, v, v, out);
        out.iter_mut().for_each(|o| *o = -*o);
    }

    /// Linearisation of the geodesic acceleration:
    /// `out = −(∂_m Γ)(v,v) dx^m − 2 Γ(v, dv)`.
    pub fn accel_jvp(&self, x: &[T], v: &[T], dx: &[T], dv: &[T], out: &mut [T]) {
        match self {
            Model::Euclidean { .. } => out.iter_mut().for_each(|o| *o = T::zero()),
            Model::HalfSpace { dim, .. } => {
                let n = *dim;
                let y = x[n - 1];
                let inv_y = T::one() / y;
                // ∇φ = −e_n/y, Hess φ · dx = e_n dx_n / y²
                let hdx_n = dx[n - 1] * inv_y * inv_y;
                let vv = dot(v, v);
                let g_dv = -dv[n - 1] * inv_y;
                let g_v = -v[n - 1] * inv_y;
                let v_dv = dot(v, dv);
                let two = T::lit(2.0);
                for k in 0..n {
                    out[k] = -two * hdx_n * v[n - 1] * v[k] - two * (g_dv * v[k] + g_v * dv[k]);
                }
                out[n - 1] = out[n - 1] + vv * hdx_n - two * v_dv * inv_y;
            }
            Model::Sphere { .. } => {
                let n = x.len();
                let mut g = vec![T::zero(); n];
                let mut hdx = vec![T::zero(); n];
                self.conformal_grad(x, &mut g);
                self.conformal_hess_apply(x, dx, &mut hdx);
                let two = T::lit(2.0);
                let (hv, vv, g_dv, g_v, v_dv) = (dot(&hdx, v), dot(v, v), dot(&g, dv), dot(&g, v), dot(v, dv));
                for k in 0..n {
                    out[k] = -two * hv * v[k] + vv * hdx[k] - two * (g_dv * v[k] + g_v * dv[k] - v_dv * g[k]);
                }
            }
            Model::Revolution { profile } => {
                let (f, f1, f2) = profile.eval(x[0]);
                let two = T::lit(2.0);
                let (vr, vt) = (v[0], v[1]);
                out[0] = (f1 * f1 + f * f2) * vt * vt * dx[0] + two * f * f1 * vt * dv[1];
                out[1] = -two * ((f * f2 - f1 * f1) / (f * f)) * vr * vt * dx[0]
                    - two * (f1 / f) * (dv[0] * vt + vr * dv[1]);
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let (o1, o2) = out.split_at_mut(n1);
                a.accel_jvp(&x[..n1], &v[..n1], &dx[..n1], &dv[..n1], o1);
                b.accel_jvp(&x[n1..], &v[n1..], &dx[n1..], &dv[n1..], o2);
            }
        }
    }

    /// Full `Γ^k_ij` array (`k`-major) at raw coordinates.
    pub fn christoffel_raw(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n * n * n];
        let idx = |k: usize, i: usize, j: usize| k * n * n + i * n + j;
        match self {
            Model::Euclidean { .. } | Model::HalfSpace { .. } | Model::Sphere { .. } => {
                let mut g = vec![T::zero(); n];
                self.conformal_grad(x, &mut g);
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = T::zero();
                            if i == k {
                                v = v + g[j];
                            }
                            if j == k {
                                v = v + g[i];
                            }
                            if i == j {
                                v = v - g[k];
                            }
                            out[idx(k, i, j)] = v;
                        }
                    }
                }
            }
            Model::Revolution { profile } => {
                let (f, f1, _) = profile.eval(x[0]);
                out[idx(0, 1, 1)] = -f * f1;
                out[idx(1, 0, 1)] = f1 / f;
                out[idx(1, 1, 0)] = f1 / f;
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let (ca, cb) = (a.christoffel_raw(&x[..n1]), b.christoffel_raw(&x[n1..]));
                embed3(&mut out, n, &ca, n1, 0);
                embed3(&mut out, n, &cb, n - n1, n1);
            }
        }
        out
    }

    /// `∂_m Γ^k_ij`, stored `m`-major then as in [`Model::christoffel_raw`].
    pub fn christoffel_derivative_raw(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let n3 = n * n * n;
        let mut out = vec![T::zero(); n * n3];
        let idx = |m: usize, k: usize, i: usize, j: usize| m * n3 + k * n * n + i * n + j;
        match self {
            Model::Euclidean { .. } | Model::HalfSpace { .. } | Model::Sphere { .. } => {
                // Hessian of φ, column by column
                let mut hess = Matrix::zeros(n, n);
                let mut e = vec![T::zero(); n];
                let mut col = vec![T::zero(); n];
                for m in 0..n {
                    e.iter_mut().for_each(|c| *c = T::zero());
                    e[m] = T::one();
                    self.conformal_hess_apply(x, &e, &mut col);
                    for r in 0..n {
                        hess[(r, m)] = col[r];
                    }
                }
                for m in 0..n {
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = T::zero();
                                if i == k {
                                    v = v + hess[(j, m)];
                                }
                                if j == k {
                                    v = v + hess[(i, m)];
                                }
                                if i == j {
                                    v = v - hess[(k, m)];
                                }
                                out[idx(m, k, i, j)] = v;
                            }
                        }
                    }
                }
            }
            Model::Revolution { profile } => {
                let (f, f1, f2) = profile.eval(x[0]);
                out[idx(0, 0, 1, 1)] = -(f1 * f1 + f * f2);
                let d = (f * f2 - f1 * f1) / (f * f);
                out[idx(0, 1, 0, 1)] = d;
                out[idx(0, 1, 1, 0)] = d;
            }
            Model::Product(a, b) => {
                let n1 = a.dim();
                let n2 = n - n1;
                let (da, db) = (a.christoffel_derivative_raw(&x[..n1]), b.christoffel_derivative_raw(&x[n1..]));
                for m in 0..n1 {
                    embed3(&mut out[m * n3..(m + 1) * n3], n, &da[m * n1 * n1 * n1..(m + 1) * n1 * n1 * n1], n1, 0);
                }
                for m in 0..n2 {
                    let mm = m + n1;
                    embed3(&mut out[mm * n3..(mm + 1) * n3], n, &db[m * n2 * n2 * n2..(m + 1) * n2 * n2 * n2], n2, n1);
                }
            }
        }
        out
    }

    /// `R(u,v)w` at raw coordinates:
    /// `(D_uΓ)(v,w) − (D_vΓ)(u,w) + Γ(u, Γ(v,w)) − Γ(v, Γ(u,w))`.
    pub fn curvature_raw(&self, x: &[T], u: &[T], v: &[T], w: &[T]) -> Vec<T> {
        let n = self.dim();
        let n3 = n * n * n;
        let dg = self.christoffel_derivative_raw(x);
        let directional = |dir: &[T], a: &[T], b: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); n];
            for (m, &dm) in dir.iter().enumerate() {
                if dm == T::zero() {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    let base = m * n3 + k * n * n;
                    let mut acc = T::zero();
                    for i in 0..n {
                        for j in 0..n {
                            acc = acc + dg[base + i * n + j] * a[i] * b[j];
                        }
                    }
                    *o = *o + dm * acc;
                }
            }
            out
        };
        let t1 = directional(u, v, w);
        let t2 = directional(v, u, w);
        let mut gvw = vec![T::zero(); n];
        let mut guw = vec![T::zero(); n];
        self.gamma_contract(x, v, w, &mut gvw);
        self.gamma_contract(x, u, w, &mut guw);
        let mut t3 = vec![T::zero(); n];
        let mut t4 = vec![T::zero(); n];
        self.gamma_contract(x, u, &gvw, &mut t3);
        self.gamma_contract(x, v, &guw, &mut t4);
        (0..n).map(|l| t1[l] - t2[l] + t3[l] - t4[l]).collect()
    }

    /// Sectional curvature of span{u, v} at raw coordinates; `None` when the
    /// vectors are (numerically) dependent.
    pub fn sectional_raw(&self, x: &[T], u: &[T], v: &[T]) -> Option<T> {
        let uu = self.inner(x, u, u);
        let vv = self.inner(x, v, v);
        let uv = self.inner(x, u, v);
        let area2 = uu * vv - uv * uv;
        if !(area2 > T::lit(1e-24) * uu * vv) || area2 <= T::zero() {
            return None;
        }
        let r = self.curvature_raw(x, u, v, v);
        Some(self.inner(x, &r, u) / area2)
    }

    // ---------------------------------------------------------------------
    // checked public operations

    /// Metric matrix `g_ij` at `x`.
    pub fn metric_at(&self, x: &ChartPoint<T>) -> Result<Matrix<T>> {
        self.check_point(x)?;
        Ok(self.metric_raw(&x.coords))
    }

    /// Christoffel symbols at `x`.
    pub fn christoffel_at(&self, x: &ChartPoint<T>) -> Result<Christoffel<T>> {
        self.check_point(x)?;
        Ok(Christoffel { dim: self.dim(), data: self.christoffel_raw(&x.coords) })
    }

    /// `R(u,v)w`; all three vectors must share their base point.
    pub fn curvature_op(&self, u: &TangentVec<T>, v: &TangentVec<T>, w: &TangentVec<T>) -> Result<TangentVec<T>> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        self.check_vector(w)?;
        if !u.same_base(v) || !u.same_base(w) {
            return Err(Error::usage("curvature operator needs vectors based at the same point"));
        }
        let r = self.curvature_raw(&u.base.coords, &u.components, &v.components, &w.components);
        TangentVec::new(u.base.clone(), r)
    }

    /// Sectional curvature `⟨R(u,v)v,u⟩ / (|u|²|v|² − ⟨u,v⟩²)`.
    pub fn sectional_curvature(&self, u: &TangentVec<T>, v: &TangentVec<T>) -> Result<T> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        if !u.same_base(v) {
            return Err(Error::usage("sectional curvature needs vectors based at the same point"));
        }
        self.sectional_raw(&u.base.coords, &u.components, &v.components)
            .ok_or(Error::DegeneratePlane)
    }

    /// Metric inner product of two vectors at the same point.
    pub fn inner_at(&self, u: &TangentVec<T>, v: &TangentVec<T>) -> Result<T> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        if !u.same_base(v) {
            return Err(Error::usage("inner product needs vectors based at the same point"));
        }
        Ok(self.inner(&u.base.coords, &u.components, &v.components))
    }

    pub fn norm_of(&self, v: &TangentVec<T>) -> Result<T> {
        self.check_vector(v)?;
        Ok(self.norm(&v.base.coords, &v.components))
    }

    /// Rescales `v` to unit length.
    pub fn normalize(&self, v: &TangentVec<T>) -> Result<TangentVec<T>> {
        let n = self.norm_of(v)?;
        if !(n > T::zero()) {
            return Err(Error::degenerate("cannot normalise a zero vector"));
        }
        Ok(v.scaled(T::one() / n))
    }
}

/// Copies an `m`-dimensional `k`-major 3-tensor into the block of an
/// `n`-dimensional one starting at `offset`.
fn embed3<T: Real>(out: &mut [T], n: usize, block: &[T], m: usize, offset: usize) {
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                out[(k + offset) * n * n + (i + offset) * n + (j + offset)] = block[k * m * m + i * m + j];
            }
        }
    }
}

/// Christoffel symbols from central finite differences of the metric with
/// step `h`, via `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
/// Independent of the closed forms; used to cross-check them.
pub fn christoffel_finite_difference<T: Real>(model: &Model<T>, x: &ChartPoint<T>, h: T) -> Result<Christoffel<T>> {
    model.check_point(x)?;
    let n = model.dim();
    let mut dg: Vec<Matrix<T>> = Vec::with_capacity(n);
    for m in 0..n {
        let mut xp = x.coords.clone();
        let mut xm = x.coords.clone();
        xp[m] = xp[m] + h;
        xm[m] = xm[m] - h;
        if !model.in_domain(&xp) || !model.in_domain(&xm) {
            return Err(Error::Domain { model: model.to_string(), coords: x.to_f64() });
        }
        let (gp, gm) = (model.metric_raw(&xp), model.metric_raw(&xm));
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] = (gp[(i, j)] - gm[(i, j)]) / (h + h);
            }
        }
        dg.push(d);
    }
    let g = model.metric_raw(&x.coords);
    let mut data = vec![T::zero(); n * n * n];
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..n {
            // lowered symbols Γ_{l,ij}
            let lowered: Vec<T> = (0..n)
                .map(|l| half * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                .collect();
            let raised = g.solve(&lowered).ok_or_else(|| Error::degenerate("singular metric"))?;
            for k in 0..n {
                data[k * n * n + i * n + j] = raised[k];
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

impl<T: Real> fmt::Display for Model<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Euclidean { dim } => write!(f, "euclidean({dim})"),
            Model::HalfSpace { dim, a } => write!(f, "halfspace({dim},{a})"),
            Model::Sphere { dim, radius } => write!(f, "sphere({dim},{radius})"),
            Model::Revolution { profile } => write!(f, "revolution({profile})"),
            Model::Product(a, b) => write!(f, "product({a},{b})"),
        }
    }
}

#[cfg(test)]
mod tests;

/// Half-space geodesic from `x` to `y` at fraction `s` of its arclength: a
/// vertical line or a semicircle orthogonal to the boundary, in the vertical
/// 2-plane through both points.
fn half_space_guess<T: Real>(x: &[T], y: &[T], s: T) -> Vec<T> {
    let n = x.len();
    let (hx, hy) = (x[n - 1], y[n - 1]);
    let dir: Vec<T> = (0..n - 1).map(|i| y[i] - x[i]).collect();
    let h = crate::linalg::norm(&dir);
    let mut out = x.to_vec();
    if h <= T::lit(1e-12) * hx.max(hy) {
        for i in 0..n - 1 {
            out[i] = x[i] + s * dir[i];
        }
        out[n - 1] = (hx.ln() + s * (hy.ln() - hx.ln())).exp();
        return out;
    }
    // circle centred at (c, 0) in the (ξ, η) plane with x at ξ = 0, y at ξ = h
    let c = (h * h + hy * hy - hx * hx) / (T::lit(2.0) * h);
    let radius = c.hypot(hx);
    // arclength parameter τ with ξ = c + R tanh τ, η = R sech τ
    let tau = |xi: T, eta: T| ((xi - c) / eta).asinh();
    let (t0, t1) = (tau(T::zero(), hx), tau(h, hy));
    let t = t0 + s * (t1 - t0);
    let xi = c + radius * t.tanh();
    let eta = radius / t.cosh();
    for i in 0..n - 1 {
        out[i] = x[i] + xi / h * dir[i];
    }
    out[n - 1] = eta;
    out
}
