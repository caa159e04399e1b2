//! Good 4-tuples, their distortion against the unit square, flattening
//! probes across scales, and first/second variation scans.

mod facts;
mod probe;
mod variation;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{exp_state, geodesic_bvp, transport_along, BvpOptions, GeodesicPath};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::scalar::Real;

pub use facts::{fact_suite, FactCheck, FactReport};
pub use probe::{flattening_probe, normal_frame_at, ProbeEntry, ProbeOptions, FlatteningReport, Verdict};
pub use variation::{variation_scan, VariationOptions, VariationScan};

/// The 4-point metric space □: a unit square with vertices in cyclic order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SquareTemplate;

impl SquareTemplate {
    /// Distance between square vertices `i` and `j` (indices mod 4).
    pub fn distance<T: Real>(&self, i: usize, j: usize) -> T {
        match (4 + j - i) % 4 {
            0 => T::zero(),
            2 => T::SQRT_2(),
            _ => T::one(),
        }
    }
}

/// An ordered 4-tuple `A, B, C, D` with its six pairwise distances.
#[derive(Debug, Clone, Serialize)]
pub struct QuadTuple<T> {
    pub points: [ChartPoint<T>; 4],
    /// `d(A,B), d(B,C), d(C,D), d(D,A)`
    pub sides: [T; 4],
    /// `d(A,C), d(B,D)`
    pub diagonals: [T; 2],
    pub distortion: T,
}

impl<T: Real> QuadTuple<T> {
    /// Builds the tuple from its points and distances, computing δ.
    pub fn from_distances(points: [ChartPoint<T>; 4], sides: [T; 4], diagonals: [T; 2]) -> Result<Self> {
        let mut q = Self { points, sides, diagonals, distortion: T::zero() };
        q.distortion = distortion(&q)?;
        Ok(q)
    }

    /// Measures all six distances with the geodesic solver.
    pub fn measure(model: &Model<T>, points: [ChartPoint<T>; 4], opts: &BvpOptions<T>) -> Result<Self> {
        let d = |i: usize, j: usize| geodesic_bvp(model, &points[i], &points[j], opts).map(|s| s.length);
        let sides = [d(0, 1)?, d(1, 2)?, d(2, 3)?, d(3, 0)?];
        let diagonals = [d(0, 2)?, d(1, 3)?];
        Self::from_distances(points, sides, diagonals)
    }

    /// Symmetric distance table indexed by vertex.
    pub fn table(&self) -> [[T; 4]; 4] {
        let mut m = [[T::zero(); 4]; 4];
        for i in 0..4 {
            let j = (i + 1) % 4;
            m[i][j] = self.sides[i];
            m[j][i] = self.sides[i];
        }
        m[0][2] = self.diagonals[0];
        m[2][0] = self.diagonals[0];
        m[1][3] = self.diagonals[1];
        m[3][1] = self.diagonals[1];
        m
    }
}

/// Distortion of the vertex map `□ → {A,B,C,D}`:
/// `max |d(φx,φy)/d(φy,φz) − d□(x,y)/d□(y,z)|` over the 24 ordered triples of
/// distinct vertices.
pub fn distortion<T: Real>(quad: &QuadTuple<T>) -> Result<T> {
    distortion_of_table(&quad.table())
}

pub(crate) fn distortion_of_table<T: Real>(d: &[[T; 4]; 4]) -> Result<T> {
    for i in 0..4 {
        for j in i + 1..4 {
            if !(d[i][j] > T::zero()) || !d[i][j].is_finite() {
                return Err(Error::degenerate("4-tuple has a vanishing or non-finite pairwise distance"));
            }
        }
    }
    let sq = SquareTemplate;
    let mut worst = T::zero();
    for x in 0..4 {
        for y in 0..4 {
            for z in 0..4 {
                if x == y || y == z || x == z {
                    continue;
                }
                let image = d[x][y] / d[y][z];
                let model = sq.distance::<T>(x, y) / sq.distance::<T>(y, z);
                worst = worst.max((image - model).abs());
            }
        }
    }
    Ok(worst)
}

/// Choice of the unit normal at the far vertex `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NormalMode<T> {
    /// Parallel transport of `u` along `γ` from `P` to `B`.
    Parallel,
    /// A supplied unit normal based at `B`.
    Explicit(TangentVec<T>),
}

/// A good 4-tuple `{A = P, B, C, D}` relative to a geodesic `γ`: `A, B` on
/// `γ` at distance `T`, `D = exp_A(T u)`, `C = exp_B(T w)` with `u, w` unit
/// normals to `γ`.
#[derive(Debug, Clone, Serialize)]
pub struct GoodTuple<T> {
    pub quad: QuadTuple<T>,
    pub scale: T,
    /// Parameter of `A` on the geodesic.
    pub p0: T,
    pub u: TangentVec<T>,
    pub w: TangentVec<T>,
    /// Unit tangents of `γ` at `A` and `B`.
    pub tangent_a: Vec<T>,
    pub tangent_b: Vec<T>,
    /// `|⟨u, γ̇⟩|` and `|⟨w, γ̇⟩|` for the unit tangent (perpendicularity check).
    pub perpendicularity: T,
}

impl<T: Real> GoodTuple<T> {
    /// `ρ = d(C, D) / T`.
    pub fn ratio(&self) -> T {
        self.quad.sides[2] / self.scale
    }
}

const ORTHO_TOL: f64 = 1e-8;

/// Checks that `u` is a unit normal to `γ` at `P`, returning `(P, γ̇(p0))`.
fn check_normal<T: Real>(model: &Model<T>, geod: &GeodesicPath<T>, p0: T, u: &TangentVec<T>) -> Result<(Vec<T>, Vec<T>)> {
    model.check_vector(u)?;
    let (p, v) = geod.state_at(model, p0)?;
    let base_err = crate::linalg::norm(&crate::linalg::sub(&p, &u.base.coords));
    if base_err > T::lit(1e-9) * crate::scalar::unit_scale(crate::linalg::norm(&p)) {
        return Err(Error::usage("normal direction must be based at γ(p0)"));
    }
    let nu = model.norm(&p, &u.components);
    let speed = model.norm(&p, &v);
    let cos = model.inner(&p, &u.components, &v) / speed;
    if (nu - T::one()).abs() > T::lit(ORTHO_TOL) || cos.abs() > T::lit(ORTHO_TOL) {
        return Err(Error::usage("u must be a unit vector orthogonal to the geodesic"));
    }
    Ok((p, v))
}

/// Constructs the good tuple at scale `t_scale` from `P = γ(p0)` with normal `u`.
/// Only the vertices are computed; distances are left to the caller.
pub(crate) fn good_vertices<T: Real>(
    model: &Model<T>,
    p: &[T],
    v: &[T],
    speed: T,
    t_scale: T,
    u: &[T],
    w_mode: &NormalMode<T>,
    opts: &BvpOptions<T>,
) -> Result<([ChartPoint<T>; 4], Vec<T>, Vec<T>)> {
    let states = transport_along(model, p, v, std::slice::from_ref(&u.to_vec()), &[t_scale / speed], &opts.step)?;
    let (b, vb, mut ws) = states.into_iter().next().expect("one output");
    let w = match w_mode {
        NormalMode::Parallel => ws.remove(0),
        NormalMode::Explicit(w) => w.components.clone(),
    };
    let d = exp_state(model, p, &crate::linalg::scale(u, t_scale), &opts.step)?.0;
    let c = exp_state(model, &b, &crate::linalg::scale(&w, t_scale), &opts.step)?.0;
    Ok(([ChartPoint::new(p.to_vec()), ChartPoint::new(b), ChartPoint::new(c), ChartPoint::new(d)], vb, w))
}

/// Builds the good 4-tuple at `P = γ(p0)` of side `t_scale` with normal `u`
/// and measures all six distances.
pub fn build_good_tuple<T: Real>(
    model: &Model<T>,
    geod: &GeodesicPath<T>,
    p0: T,
    t_scale: T,
    u: &TangentVec<T>,
    w_mode: &NormalMode<T>,
    opts: &BvpOptions<T>,
) -> Result<GoodTuple<T>> {
    if !(t_scale > T::zero()) {
        return Err(Error::usage("tuple scale must be positive"));
    }
    let (p, v) = check_normal(model, geod, p0, u)?;
    let speed = model.norm(&p, &v);
    let (points, vb, w) = good_vertices(model, &p, &v, speed, t_scale, &u.components, w_mode, opts)?;
    let b = points[1].clone();
    let speed_b = model.norm(&b.coords, &vb);
    if let NormalMode::Explicit(wx) = w_mode {
        model.check_vector(wx)?;
        let base_err = crate::linalg::norm(&crate::linalg::sub(&wx.base.coords, &b.coords));
        let nw = model.norm(&b.coords, &wx.components);
        let cos = model.inner(&b.coords, &wx.components, &vb) / speed_b;
        if base_err > T::lit(1e-8) * crate::scalar::unit_scale(crate::linalg::norm(&b.coords))
            || (nw - T::one()).abs() > T::lit(ORTHO_TOL)
            || cos.abs() > T::lit(ORTHO_TOL)
        {
            return Err(Error::usage("explicit w must be a unit normal to the geodesic at B"));
        }
    }
    let perp_b = (model.inner(&b.coords, &w, &vb) / speed_b).abs();
    let perp_a = (model.inner(&p, &u.components, &v) / speed).abs();
    let quad = QuadTuple::measure(model, points, opts)?;
    Ok(GoodTuple {
        quad,
        scale: t_scale,
        p0,
        u: u.clone(),
        w: TangentVec { base: b.clone(), components: w },
        tangent_a: crate::linalg::scale(&v, T::one() / speed),
        tangent_b: crate::linalg::scale(&vb, T::one() / speed_b),
        perpendicularity: perp_a.max(perp_b),
    })
}

/// Diagonal ratios of a good tuple and the two bounds they must satisfy.
#[derive(Debug, Clone, Serialize)]
pub struct DiagonalBounds<T> {
    pub r1: T,
    pub r2: T,
    /// `ε = d(C,D)/T − 1`.
    pub epsilon: T,
    /// `3 + (1+ε)² − (r1² + r2²)`, non-negative on NPC models.
    pub slack: T,
    /// Each `r_i ≥ √2 − tol`.
    pub lower_ok: bool,
    /// `r1² + r2² ≤ 3 + (1+ε)² + tol`.
    pub upper_ok: bool,
    /// Individual upper bound `√(1 + (1+|ε|)²)` implied by the two.
    pub individual_upper: T,
}

/// Checks the diagonals of a good tuple against `r_i ≥ √2` and
/// `r1² + r2² ≤ 3 + (1+ε)²`.
pub fn diagonal_bounds_check<T: Real>(model: &Model<T>, tuple: &GoodTuple<T>, tol: T) -> Result<DiagonalBounds<T>> {
    if !model.is_npc() {
        return Err(Error::usage("diagonal bounds hold on non-positively curved models only"));
    }
    let t = tuple.scale;
    let q = &tuple.quad;
    for &s in &[q.sides[0], q.sides[1], q.sides[3]] {
        if (s - t).abs() > T::lit(1e-6) * t.max(T::one()) {
            return Err(Error::usage("tuple does not have three sides equal to T"));
        }
    }
    let r1 = q.diagonals[0] / t;
    let r2 = q.diagonals[1] / t;
    let epsilon = q.sides[2] / t - T::one();
    let one_eps = T::one() + epsilon;
    let slack = T::lit(3.0) + one_eps * one_eps - (r1 * r1 + r2 * r2);
    let e = T::one() + epsilon.abs();
    Ok(DiagonalBounds {
        r1,
        r2,
        epsilon,
        slack,
        lower_ok: r1 >= T::SQRT_2() - tol && r2 >= T::SQRT_2() - tol,
        upper_ok: slack >= -tol,
        individual_upper: (T::one() + e * e).sqrt(),
    })
}
