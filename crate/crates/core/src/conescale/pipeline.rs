use serde::Serialize;

use super::{projection_scan, FlatProbeGrid, ProbeStats};
use crate::error::{Error, Result};
use crate::geometry::{distance, geodesic_segment, project_to_geodesic, GeodesicPath, ProjectionOptions};
use crate::models::{ChartPoint, Model};
use crate::quadprobe::QuadTuple;
use crate::scalar::Real;

/// `A, B` on the base geodesic, the feet of `P, Q` respectively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawTuple<T> {
    pub a: ChartPoint<T>,
    pub b: ChartPoint<T>,
    pub q: ChartPoint<T>,
    pub p: ChartPoint<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport<T> {
    pub c: T,
    pub d_ap: T,
    pub d_bq: T,
    pub d_pq: T,
    pub d_ab: T,
    /// `P′, Q′`: the longer perpendicular cut to the shorter one's length.
    pub p1: ChartPoint<T>,
    pub q1: ChartPoint<T>,
    pub d_p1q1: T,
    /// `3C`.
    pub step1_bound: T,
    pub step1_ok: bool,
    /// `j = min(d(A,P), d(B,Q)) · C`.
    pub depth: T,
    /// `A, B, Q″, P″` with `d(A,P″) = d(A,B) = d(B,Q″)`.
    pub tuple: QuadTuple<T>,
    /// `d(P″,Q″) / d(A,B)`.
    pub ratio: T,
    /// `1 + 6C⁴/j`.
    pub ratio_bound: T,
    pub ratio_ok: bool,
    /// `ratio ≥ 1 − 1e-6` (the projection does not increase distances).
    pub lower_ok: bool,
    /// Largest relative deviation of `d(A,P″)`, `d(B,Q″)` from `d(A,B)`.
    pub side_defect: T,
    /// Largest distance between `A, B` and the re-projected feet of `P″, Q″`.
    pub foot_defect: T,
    /// Three equal sides within `1e-6` and feet within `1e-5`.
    pub good: bool,
}

/// Tolerance on the foot conditions.
pub const FOOT_TOL: f64 = 1e-5;
const SIDE_TOL: f64 = 1e-6;

fn foot_gap<T: Real>(model: &Model<T>, base: &GeodesicPath<T>, x: &ChartPoint<T>, foot: &ChartPoint<T>, opts: &ProjectionOptions<T>) -> Result<T> {
    let proj = project_to_geodesic(model, base, x, opts)?;
    distance(model, &proj.foot, foot, &opts.bvp)
}

/// Point at distance `len` from the start of the segment `from → to`.
fn cut<T: Real>(model: &Model<T>, from: &ChartPoint<T>, to: &ChartPoint<T>, len: T, total: T, opts: &ProjectionOptions<T>) -> Result<ChartPoint<T>> {
    if len >= total {
        return Ok(to.clone());
    }
    let seg = geodesic_segment(model, from, to, &opts.bvp)?;
    seg.point_at(model, len / total)
}

/// Truncates the longer perpendicular to the shorter one's length, then cuts
/// both to length `d(A,B)`, and checks the outcome against `3C` and
/// `1 + 6C⁴/j`.
pub fn modify_tuple_pipeline<T: Real>(
    model: &Model<T>,
    base: &GeodesicPath<T>,
    raw: &RawTuple<T>,
    c: T,
    opts: &ProjectionOptions<T>,
) -> Result<PipelineReport<T>> {
    if !(c >= T::one()) {
        return Err(Error::usage("bi-Lipschitz constant must be >= 1"));
    }
    let ftol = T::lit(FOOT_TOL);
    let gp = foot_gap(model, base, &raw.p, &raw.a, opts)?;
    let gq = foot_gap(model, base, &raw.q, &raw.b, opts)?;
    if gp > ftol || gq > ftol {
        return Err(Error::usage(format!(
            "A, B are not the feet of P, Q (gaps {:e}, {:e})",
            gp.to_f64_lossy(),
            gq.to_f64_lossy()
        )));
    }
    let bvp = &opts.bvp;
    let d_ap = distance(model, &raw.a, &raw.p, bvp)?;
    let d_bq = distance(model, &raw.b, &raw.q, bvp)?;
    let d_pq = distance(model, &raw.p, &raw.q, bvp)?;
    let d_ab = distance(model, &raw.a, &raw.b, bvp)?;
    if !(d_ab > T::zero()) {
        return Err(Error::degenerate("feet A and B coincide"));
    }

    let short = d_ap.min(d_bq);
    let (p1, q1) = if d_ap <= d_bq {
        (raw.p.clone(), cut(model, &raw.b, &raw.q, short, d_bq, opts)?)
    } else {
        (cut(model, &raw.a, &raw.p, short, d_ap, opts)?, raw.q.clone())
    };
    let d_p1q1 = distance(model, &p1, &q1, bvp)?;
    let step1_bound = T::lit(3.0) * c;

    if d_ab > short {
        return Err(Error::usage("perpendiculars are shorter than d(A,B); the tuple is too shallow"));
    }
    let p2 = cut(model, &raw.a, &p1, d_ab, short, opts)?;
    let q2 = cut(model, &raw.b, &q1, d_ab, short, opts)?;
    let tuple = QuadTuple::measure(model, [raw.a.clone(), raw.b.clone(), q2.clone(), p2.clone()], bvp)?;
    let ab = tuple.sides[0];
    let ratio = tuple.sides[2] / ab;
    let depth = short * c;
    let ratio_bound = T::one() + T::lit(6.0) * c.powi(4) / depth;
    let side_defect = ((tuple.sides[1] - ab).abs() / ab).max((tuple.sides[3] - ab).abs() / ab);
    let foot_defect = foot_gap(model, base, &p2, &raw.a, opts)?.max(foot_gap(model, base, &q2, &raw.b, opts)?);

    Ok(PipelineReport {
        c,
        d_ap,
        d_bq,
        d_pq,
        d_ab,
        p1,
        q1,
        d_p1q1,
        step1_bound,
        step1_ok: d_p1q1 <= step1_bound,
        depth,
        ratio,
        ratio_bound,
        ratio_ok: ratio <= ratio_bound,
        lower_ok: ratio >= T::one() - T::lit(SIDE_TOL),
        side_defect,
        foot_defect,
        good: side_defect <= T::lit(SIDE_TOL) && foot_defect <= ftol,
        tuple,
    })
}

/// The raw tuple at depth `j`: `P, Q = φ(p), φ(q)` for the qualifying pair on
/// `L_j`, and `A, B` their feet on the base geodesic.
pub fn raw_tuple_at_depth<T: Real>(
    model: &Model<T>,
    grid: &FlatProbeGrid<T>,
    j: T,
    unit_step: T,
    opts: &ProjectionOptions<T>,
) -> Result<(RawTuple<T>, ProbeStats<T>)> {
    let stats = projection_scan(model, grid, j, unit_step, opts)?;
    let k = stats
        .pair_index
        .ok_or_else(|| Error::Consistency(format!("no qualifying pair on row {}", j.to_f64_lossy())))?;
    let (cp, cq) = (stats.column(k).expect("pair column"), stats.column(k + 1).expect("pair column"));
    let row = grid.row_of(j).expect("scanned row");
    let col = |x: T| grid.column_of(x).expect("scanned column");
    let raw = RawTuple {
        a: cp.foot.clone(),
        b: cq.foot.clone(),
        q: grid.point(col(cq.x), row).clone(),
        p: grid.point(col(cp.x), row).clone(),
    };
    Ok((raw, stats))
}
