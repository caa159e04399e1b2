//! Nearest-point projection onto a geodesic.
//!
//! On an NPC model `t ↦ d(x, γ(t))` is convex, so golden-section search
//! brackets the minimiser, after which a safeguarded secant (Illinois)
//! iteration solves the first-order condition `⟨log_{γ(t)} x, γ̇(t)⟩ = 0`.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{geodesic_bvp_seeded, BvpOptions, GeodesicPath};
use crate::error::Result;
use crate::models::{ChartPoint, Model};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions<T> {
    pub bvp: BvpOptions<T>,
    /// Stop when the bracket is narrower than `t_tol · max(1, window)`.
    pub t_tol: T,
    /// Double the window (on the side where the minimiser sits) until the
    /// minimiser is interior.
    pub auto_expand: bool,
    pub max_doublings: usize,
}

impl<T: Real> Default for ProjectionOptions<T> {
    fn default() -> Self {
        Self { bvp: BvpOptions::default(), t_tol: T::lit(1e-13), auto_expand: false, max_doublings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection<T> {
    pub t: T,
    pub foot: ChartPoint<T>,
    pub distance: T,
    /// The minimiser sits at an end of the (final) window.
    pub at_boundary: bool,
    /// `|⟨log_foot(x), γ̇(t)⟩| / |γ̇|` at the returned parameter.
    pub optimality: T,
    pub window: (T, T),
}

struct Eval<T> {
    f: T,
    g: T,
    foot: Vec<T>,
}

struct Objective<'a, T: Real> {
    model: &'a Model<T>,
    path: &'a GeodesicPath<T>,
    x: &'a ChartPoint<T>,
    opts: &'a BvpOptions<T>,
    seeds: Vec<(T, Vec<T>)>,
}

impl<T: Real> Objective<'_, T> {
    fn eval(&mut self, t: T) -> Result<Eval<T>> {
        let (p, v) = self.path.state_at(self.model, t)?;
        let seed = self
            .seeds
            .iter()
            .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap_or(std::cmp::Ordering::Equal))
            .map(|s| s.1.clone());
        let base = ChartPoint::new(p.clone());
        let sol = geodesic_bvp_seeded(self.model, &base, self.x, seed.as_deref(), self.opts)?;
        let g = self.model.inner(&p, &sol.velocity.components, &v);
        self.seeds.push((t, sol.velocity.components));
        if self.seeds.len() > 8 {
            self.seeds.remove(0);
        }
        Ok(Eval { f: sol.length, g, foot: p })
    }
}

/// Projects `x` onto the geodesic `path`, minimising `d(x, γ(t))` over the
/// path's window (optionally expanding it).
pub fn project_to_geodesic<T: Real>(
    model: &Model<T>,
    path: &GeodesicPath<T>,
    x: &ChartPoint<T>,
    opts: &ProjectionOptions<T>,
) -> Result<Projection<T>> {
    model.check_point(x)?;
    let mut current: Cow<GeodesicPath<T>> = Cow::Borrowed(path);
    let mut doublings = 0;
    loop {
        let p = project_window(model, &current, x, opts)?;
        if !p.at_boundary || !opts.auto_expand || doublings >= opts.max_doublings {
            return Ok(p);
        }
        let (a, b) = (current.t_min(), current.t_max());
        let w = b - a;
        let left = (p.t - a).abs() <= (b - p.t).abs();
        let extended = if left { current.extended(model, a - w, b)? } else { current.extended(model, a, b + w)? };
        current = Cow::Owned(extended);
        doublings += 1;
    }
}

fn project_window<T: Real>(model: &Model<T>, path: &GeodesicPath<T>, x: &ChartPoint<T>, opts: &ProjectionOptions<T>) -> Result<Projection<T>> {
    let mut obj = Objective { model, path, x, opts: &opts.bvp, seeds: Vec::new() };
    let (wa, wb) = (path.t_min(), path.t_max());
    let width = wb - wa;
    let tol_t = opts.t_tol * width.max(T::one());

    // golden section on f
    let ratio = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let (mut a, mut b) = (wa, wb);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = obj.eval(c)?;
    let mut fd = obj.eval(d)?;
    while b - a > T::lit(1e-3) * width {
        if fc.f <= fd.f {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = obj.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = obj.eval(d)?;
        }
    }

    // the bracket [a, b] contains the minimiser of a convex f; g decreases
    // through zero there unless the minimiser is a window end
    let mut ea = obj.eval(a)?;
    let mut eb = obj.eval(b)?;
    let speed = path.speed;
    let finish = |t: T, e: Eval<T>, boundary: bool| Projection {
        t,
        foot: ChartPoint::new(e.foot),
        distance: e.f,
        at_boundary: boundary,
        optimality: e.g.abs() / speed,
        window: (wa, wb),
    };
    if ea.g <= T::zero() {
        let at_end = a == wa;
        return Ok(finish(a, ea, at_end));
    }
    if eb.g >= T::zero() {
        let at_end = b == wb;
        return Ok(finish(b, eb, at_end));
    }

    // Illinois iteration on g
    let mut side = 0i8;
    let mut best = if ea.g.abs() < eb.g.abs() { (a, ea.g) } else { (b, eb.g) };
    for _ in 0..100 {
        if b - a <= tol_t {
            break;
        }
        let mut t = (a * eb.g - b * ea.g) / (eb.g - ea.g);
        if !(t > a && t < b) {
            t = (a + b) * T::lit(0.5);
        }
        let e = obj.eval(t)?;
        if e.g.abs() < best.1.abs() {
            best = (t, e.g);
        }
        if e.g == T::zero() {
            return Ok(finish(t, e, false));
        }
        if e.g > T::zero() {
            a = t;
            ea = e;
            if side == 1 {
                eb.g = eb.g * T::lit(0.5);
            }
            side = 1;
        } else {
            b = t;
            eb = e;
            if side == -1 {
                ea.g = ea.g * T::lit(0.5);
            }
            side = -1;
        }
    }
    let e = obj.eval(best.0)?;
    Ok(finish(best.0, e, false))
}
