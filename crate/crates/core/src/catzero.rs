//! Comparison-geometry checkers. Every check goes through the distance
//! function only, so it applies unchanged to any model.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, exp_map, geodesic_segment, BvpOptions, GeodesicPath};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::sampling::{random_unit_normal, random_unit_vector, rng_for, uniform, SampleRng};
use crate::scalar::Real;

/// Four points with their pairwise distances.
#[derive(Debug, Clone, Serialize)]
pub struct FourPointConfig<T> {
    pub points: [ChartPoint<T>; 4],
    pub distances: [[T; 4]; 4],
}

impl<T: Real> FourPointConfig<T> {
    pub fn measure(model: &Model<T>, points: [ChartPoint<T>; 4], opts: &BvpOptions<T>) -> Result<Self> {
        let mut distances = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in i + 1..4 {
                let d = distance(model, &points[i], &points[j], opts)?;
                distances[i][j] = d;
                distances[j][i] = d;
            }
        }
        Ok(Self { points, distances })
    }

    /// Largest pairwise distance.
    pub fn scale(&self) -> T {
        self.distances.iter().flatten().copied().fold(T::zero(), T::max)
    }

    /// `d(A,B)² + d(B,C)² + d(C,D)² + d(D,A)² − d(A,C)² − d(B,D)²`.
    pub fn slack(&self) -> T {
        let d = &self.distances;
        let sq = |x: T| x * x;
        sq(d[0][1]) + sq(d[1][2]) + sq(d[2][3]) + sq(d[3][0]) - sq(d[0][2]) - sq(d[1][3])
    }

    /// `(d(A,C)² + d(B,D)² − d(C,D)² − d(A,B)²) / (2 d(A,D) d(B,C))`.
    pub fn parallelogram_ratio(&self) -> Result<T> {
        let d = &self.distances;
        let den = T::lit(2.0) * d[0][3] * d[1][2];
        if !(den > T::zero()) {
            return Err(Error::degenerate("parallelogram ratio needs d(A,D), d(B,C) > 0"));
        }
        let sq = |x: T| x * x;
        Ok((sq(d[0][2]) + sq(d[1][3]) - sq(d[2][3]) - sq(d[0][1])) / den)
    }
}

/// Four-point slack (right side minus left side of the quadrilateral
/// inequality). Non-negative on CAT(0) spaces.
pub fn four_point_slack<T: Real>(model: &Model<T>, points: &[ChartPoint<T>; 4], opts: &BvpOptions<T>) -> Result<T> {
    Ok(FourPointConfig::measure(model, points.clone(), opts)?.slack())
}

/// Berg–Nikolaev quadrilateral ratio: at most 1 on CAT(0) spaces, with
/// equality iff the points are the vertices of a flat parallelogram.
pub fn parallelogram_ratio<T: Real>(model: &Model<T>, points: &[ChartPoint<T>; 4], opts: &BvpOptions<T>) -> Result<T> {
    FourPointConfig::measure(model, points.clone(), opts)?.parallelogram_ratio()
}

fn check_unit_interval<T: Real>(path: &GeodesicPath<T>) -> Result<()> {
    if path.t_min() != T::zero() || path.t_max() != T::one() {
        return Err(Error::usage("segments must be parametrised on [0, 1]"));
    }
    Ok(())
}

/// `(1−t)·d(α(0),β(0)) + t·d(α(1),β(1)) − d(α(t),β(t))` for two geodesic
/// segments on `[0, 1]`. Non-negative on CAT(0) spaces.
pub fn convexity_slack<T: Real>(
    model: &Model<T>,
    seg1: &GeodesicPath<T>,
    seg2: &GeodesicPath<T>,
    t: T,
    opts: &BvpOptions<T>,
) -> Result<T> {
    check_unit_interval(seg1)?;
    check_unit_interval(seg2)?;
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::usage("convexity parameter must lie in [0, 1]"));
    }
    let at = |s: &GeodesicPath<T>, t: T| s.point_at(model, t);
    let d0 = distance(model, &at(seg1, T::zero())?, &at(seg2, T::zero())?, opts)?;
    let d1 = distance(model, &at(seg1, T::one())?, &at(seg2, T::one())?, opts)?;
    let dt = distance(model, &at(seg1, t)?, &at(seg2, t)?, opts)?;
    Ok((T::one() - t) * d0 + t * d1 - dt)
}

/// Spread of a right-angled isosceles hinge at `apex` and the non-degeneracy
/// of the triangle `exp(λu), exp(−λu), exp(λv)`.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadReport<T> {
    /// `d(exp(λu), exp(λv)) / λ`.
    pub ratio: T,
    pub lambda: T,
    /// `p₁ = exp(λu)`, `p₂ = exp(−λu)`, `p₃ = exp(λv)`.
    pub points: [ChartPoint<T>; 3],
    /// `(d(p_j,p_{j+1}) + d(p_{j+1},p_{j+2}) − d(p_j,p_{j+2})) / λ` for
    /// `j = 1, 2, 3` (indices mod 3).
    pub triangle_margins: [T; 3],
    /// Every margin exceeds `1e-6`: no additive degeneracy.
    pub strict: bool,
}

/// Margin under which a triangle counts as additively degenerate.
pub const STRICT_TRIANGLE_MARGIN: f64 = 1e-6;

pub fn right_angle_spread<T: Real>(
    model: &Model<T>,
    u: &TangentVec<T>,
    v: &TangentVec<T>,
    lambda: T,
    opts: &BvpOptions<T>,
) -> Result<SpreadReport<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::usage("spread scale must be positive"));
    }
    if u.base != v.base {
        return Err(Error::usage("u and v must share the apex"));
    }
    let x = &u.base.coords;
    let tol = T::lit(1e-8);
    let (nu, nv) = (model.norm(x, &u.components), model.norm(x, &v.components));
    if (nu - T::one()).abs() > tol || (nv - T::one()).abs() > tol || model.inner(x, &u.components, &v.components).abs() > tol {
        return Err(Error::usage("u and v must be orthonormal at the apex"));
    }
    let step = &opts.step;
    let p1 = exp_map(model, &u.scaled(lambda), step)?;
    let p2 = exp_map(model, &u.scaled(-lambda), step)?;
    let p3 = exp_map(model, &v.scaled(lambda), step)?;
    let pts = [p1, p2, p3];
    let mut d = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            d[i][j] = distance(model, &pts[i], &pts[j], opts)? / lambda;
            d[j][i] = d[i][j];
        }
    }
    let margins = [0, 1, 2].map(|j| d[j][(j + 1) % 3] + d[(j + 1) % 3][(j + 2) % 3] - d[j][(j + 2) % 3]);
    Ok(SpreadReport {
        ratio: d[0][2],
        lambda,
        strict: margins.iter().all(|&m| m > T::lit(STRICT_TRIANGLE_MARGIN)),
        triangle_margins: margins,
        points: pts,
    })
}

/// `exp_center(r·e)` with `e` a random unit vector and `r` uniform in
/// `[0, radius]`: a point of the metric ball of that radius.
pub fn random_ball_point<T: Real>(model: &Model<T>, center: &ChartPoint<T>, radius: f64, rng: &mut SampleRng, opts: &BvpOptions<T>) -> Result<ChartPoint<T>> {
    let e = random_unit_vector(model, center, rng);
    let r: T = uniform(rng, 0.0, radius);
    exp_map(model, &e.scaled(r), &opts.step)
}

/// Four-point configurations in the ball of `radius` about the reference
/// point, sample `i` drawn from stream `i` of `seed`.
pub fn four_point_batch<T: Real>(model: &Model<T>, n: usize, seed: u64, radius: f64, opts: &BvpOptions<T>) -> Result<Vec<FourPointConfig<T>>> {
    let center = model.reference_point();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mut pts = Vec::with_capacity(4);
            for _ in 0..4 {
                pts.push(random_ball_point(model, &center, radius, &mut rng, opts)?);
            }
            let pts: [ChartPoint<T>; 4] = pts.try_into().expect("four points");
            FourPointConfig::measure(model, pts, opts)
        })
        .collect()
}

/// Worst convexity slack of one random pair of segments over a `t` grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexitySample<T> {
    pub min_slack: T,
    pub t_at_min: T,
    /// Largest endpoint distance, the natural scale of the slack.
    pub scale: T,
}

pub fn convexity_batch<T: Real>(
    model: &Model<T>,
    n: usize,
    seed: u64,
    radius: f64,
    ts: &[T],
    opts: &BvpOptions<T>,
) -> Result<Vec<ConvexitySample<T>>> {
    let center = model.reference_point();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mut pts = Vec::with_capacity(4);
            for _ in 0..4 {
                pts.push(random_ball_point(model, &center, radius, &mut rng, opts)?);
            }
            let s1 = geodesic_segment(model, &pts[0], &pts[1], opts)?;
            let s2 = geodesic_segment(model, &pts[2], &pts[3], opts)?;
            let d0 = distance(model, &pts[0], &pts[2], opts)?;
            let d1 = distance(model, &pts[1], &pts[3], opts)?;
            let mut best = ConvexitySample { min_slack: T::infinity(), t_at_min: T::zero(), scale: d0.max(d1) };
            for &t in ts {
                let dt = distance(model, &s1.point_at(model, t)?, &s2.point_at(model, t)?, opts)?;
                let slack = (T::one() - t) * d0 + t * d1 - dt;
                if slack < best.min_slack {
                    best.min_slack = slack;
                    best.t_at_min = t;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Right-angle spreads at random apexes in the ball of `radius`, with random
/// orthonormal `u, v` and `λ` uniform in `lambda_range`.
pub fn spread_batch<T: Real>(
    model: &Model<T>,
    n: usize,
    seed: u64,
    radius: f64,
    lambda_range: (f64, f64),
    opts: &BvpOptions<T>,
) -> Result<Vec<SpreadReport<T>>> {
    let center = model.reference_point();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let apex = random_ball_point(model, &center, radius, &mut rng, opts)?;
            let u = random_unit_vector(model, &apex, &mut rng);
            let v = random_unit_normal(model, &apex, &u.components, &mut rng);
            let lambda: T = uniform(&mut rng, lambda_range.0, lambda_range.1);
            right_angle_spread(model, &u, &v, lambda, opts)
        })
        .collect()
}
