use serde::Serialize;

use super::{good_vertices, GoodTuple, NormalMode, QuadTuple};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_bvp, orthonormal_basis, transport_along, BvpOptions, GeodesicPath};
use crate::linalg::{axpy, dot, norm, scale};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::scalar::Real;

/// Settings of a flattening probe. Thresholds are recorded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeOptions<T> {
    pub bvp: BvpOptions<T>,
    /// Search over unit normals at `P` instead of using the supplied `u` only.
    pub search: bool,
    pub delta_flat: T,
    pub delta_min: T,
    /// Absolute slack in the monotone-trend rules (numerical noise floor).
    pub trend_slack: T,
    /// Objective evaluations allowed for local refinement per scale.
    pub refine_evals: usize,
}

impl<T: Real> Default for ProbeOptions<T> {
    fn default() -> Self {
        Self {
            bvp: BvpOptions::default(),
            search: true,
            delta_flat: T::lit(1e-3),
            delta_min: T::lit(0.1),
            trend_slack: T::lit(1e-6),
            refine_evals: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Flattening,
    NonFlattening,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Flattening => "flattening",
            Verdict::NonFlattening => "non-flattening",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Result at one scale. `tuple` is `None` when the solver failed; the
/// error message is kept in `error`.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeEntry<T> {
    pub scale: T,
    /// Coefficients of `u` in the normal frame at `P`.
    pub direction: Vec<T>,
    pub evaluations: usize,
    pub tuple: Option<GoodTuple<T>>,
    pub error: Option<String>,
}

impl<T: Real> ProbeEntry<T> {
    pub fn ratio(&self) -> Option<T> {
        self.tuple.as_ref().map(|t| t.ratio())
    }

    pub fn distortion(&self) -> Option<T> {
        self.tuple.as_ref().map(|t| t.quad.distortion)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatteningReport<T> {
    pub p0: T,
    pub entries: Vec<ProbeEntry<T>>,
    pub verdict: Verdict,
    pub delta_flat: T,
    pub delta_min: T,
    pub searched: bool,
}

impl<T: Real> FlatteningReport<T> {
    pub fn scales(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.scale).collect()
    }

    /// `ρ_i`, NaN where the scale failed.
    pub fn ratios(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.ratio().unwrap_or_else(T::nan)).collect()
    }

    /// `δ_i`, NaN where the scale failed.
    pub fn distortions(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.distortion().unwrap_or_else(T::nan)).collect()
    }
}

/// g-orthonormal basis of the normal space of `γ` at `γ(p0)`, with the
/// point and velocity there.
pub fn normal_frame_at<T: Real>(model: &Model<T>, geod: &GeodesicPath<T>, p0: T) -> Result<(Vec<T>, Vec<T>, Vec<Vec<T>>)> {
    let (p, v) = geod.state_at(model, p0)?;
    let mut basis = orthonormal_basis(model, &p, &v)?;
    basis.remove(0);
    Ok((p, v, basis))
}

/// Applies the verdict rule to a distortion sequence.
pub(crate) fn verdict_of<T: Real>(deltas: &[T], delta_flat: T, delta_min: T, slack: T) -> Verdict {
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Verdict::Indeterminate;
    }
    let n = deltas.len();
    let last_half = &deltas[n / 2..];
    let non_increasing = last_half.windows(2).all(|w| w[1] <= w[0] + slack);
    if deltas[n - 1] <= delta_flat && non_increasing {
        return Verdict::Flattening;
    }
    let non_decreasing = deltas.windows(2).all(|w| w[1] + slack >= w[0]);
    if deltas.iter().all(|&d| d >= delta_min) && non_decreasing {
        return Verdict::NonFlattening;
    }
    Verdict::Indeterminate
}

/// Geometry shared by all candidate directions at one scale.
struct ScaleFrame<T> {
    p: Vec<T>,
    b: Vec<T>,
    normals_p: Vec<Vec<T>>,
    normals_b: Vec<Vec<T>>,
    scale: T,
}

impl<T: Real> ScaleFrame<T> {
    fn vector(basis: &[Vec<T>], c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); basis[0].len()];
        for (ci, bi) in c.iter().zip(basis) {
            axpy(&mut out, *ci, bi);
        }
        out
    }

    /// `ρ − 1` for the tuple in direction `c`; this is non-negative on NPC
    /// models and vanishes exactly when `C, D` span a flat rectangle with `A, B`.
    fn excess(&self, model: &Model<T>, c: &[T], opts: &BvpOptions<T>) -> Result<T> {
        let (d, cc) = self.far_side(model, c, opts)?;
        let len = geodesic_bvp(model, &ChartPoint::new(cc), &ChartPoint::new(d), opts)?.length;
        Ok(len / self.scale - T::one())
    }

    fn far_side(&self, model: &Model<T>, c: &[T], opts: &BvpOptions<T>) -> Result<(Vec<T>, Vec<T>)> {
        let u = Self::vector(&self.normals_p, c);
        let w = Self::vector(&self.normals_b, c);
        let d = crate::geometry::exp_state(model, &self.p, &scale(&u, self.scale), &opts.step)?.0;
        let cc = crate::geometry::exp_state(model, &self.b, &scale(&w, self.scale), &opts.step)?.0;
        Ok((d, cc))
    }
}

fn normalized<T: Real>(c: &[T]) -> Vec<T> {
    let n = norm(c);
    scale(c, T::one() / n)
}

/// Coarse candidate directions on `S^{k-1}`.
fn coarse_directions<T: Real>(k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    match k {
        0 => {}
        1 => {
            out.push(vec![T::one()]);
            out.push(vec![-T::one()]);
        }
        2 => {
            for i in 0..16 {
                let a = T::TAU() * T::from_usize_lossy(i) / T::lit(16.0);
                out.push(vec![a.cos(), a.sin()]);
            }
        }
        _ => {
            for i in 0..k {
                for s in [T::one(), -T::one()] {
                    let mut e = vec![T::zero(); k];
                    e[i] = s;
                    out.push(e);
                }
            }
            let h = T::FRAC_1_SQRT_2();
            for i in 0..k {
                for j in i + 1..k {
                    for (si, sj) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                        let mut e = vec![T::zero(); k];
                        e[i] = si;
                        e[j] = sj;
                        out.push(e);
                    }
                }
            }
        }
    }
    out
}

/// Orthonormal basis of the complement of the unit vector `c` in `R^k`.
fn complement<T: Real>(c: &[T]) -> Vec<Vec<T>> {
    let k = c.len();
    let mut basis: Vec<Vec<T>> = vec![c.to_vec()];
    for i in 0..k {
        let mut e = vec![T::zero(); k];
        e[i] = T::one();
        for b in &basis {
            let p = dot(&e, b);
            axpy(&mut e, -p, b);
        }
        let n = norm(&e);
        if n > T::lit(1e-6) && basis.len() < k {
            basis.push(scale(&e, T::one() / n));
        }
    }
    basis.remove(0);
    basis
}

/// Nelder–Mead minimisation of `f` over `R^m` from `x0` with initial step `h`.
/// Returns the best point, its value and the number of evaluations.
pub(crate) fn nelder_mead<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    h: T,
    max_evals: usize,
    x_tol: T,
) -> (Vec<T>, T, usize) {
    let m = x0.len();
    // failed evaluations rank last
    let mut f = |x: &[T]| {
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(m + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..m {
        let mut x = x0.to_vec();
        x[i] = x[i] + h;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = m + 1;
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let order = |s: &mut Vec<(Vec<T>, T)>| s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    while evals < max_evals {
        order(&mut simplex);
        let diam = simplex[1..]
            .iter()
            .map(|(x, _)| norm(&crate::linalg::sub(x, &simplex[0].0)))
            .fold(T::zero(), T::max);
        if diam < x_tol {
            break;
        }
        let mut centroid = vec![T::zero(); m];
        for (x, _) in &simplex[..m] {
            axpy(&mut centroid, T::one() / T::from_usize_lossy(m), x);
        }
        let worst = simplex[m].clone();
        let along = |t: T| -> Vec<T> {
            centroid.iter().zip(&worst.0).map(|(&c, &w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = f(&xe);
            evals += 1;
            simplex[m] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (xr, fr);
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            evals += 1;
            if fc < worst.1 {
                simplex[m] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = best.iter().zip(&item.0).map(|(&b, &xi)| b + sigma * (xi - b)).collect();
                    let fx = f(&x);
                    *item = (x, fx);
                }
                evals += m;
            }
        }
    }
    order(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}

/// Probes a schedule of scales for pointed flattening 4-tuples at `P = γ(p0)`.
///
/// With `search`, each scale minimises `ρ − 1` over unit normals (coarse
/// sampling on the first scale, Nelder–Mead refinement on every scale,
/// warm-started from the previous optimum); the distortion is then measured at
/// the chosen direction. Solver failures are recorded per entry.
pub fn flattening_probe<T: Real>(
    model: &Model<T>,
    geod: &GeodesicPath<T>,
    p0: T,
    scales: &[T],
    u: &TangentVec<T>,
    opts: &ProbeOptions<T>,
) -> Result<FlatteningReport<T>> {
    if scales.is_empty() || scales.iter().any(|&s| !(s > T::zero())) || scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("scales must be positive and strictly increasing"));
    }
    super::check_normal(model, geod, p0, u)?;
    let (p, v, normals) = normal_frame_at(model, geod, p0)?;
    let speed = model.norm(&p, &v);
    let k = normals.len();
    if k == 0 {
        return Err(Error::usage("one-dimensional model has no normal directions"));
    }
    let mut best: Vec<T> = normals.iter().map(|n| model.inner(&p, &u.components, n)).collect();
    best = normalized(&best);

    let mut entries = Vec::with_capacity(scales.len());
    let mut need_coarse = true;
    for &t_scale in scales {
        let mut evaluations = 0;
        let result = (|| -> Result<(Vec<T>, GoodTuple<T>)> {
            let states = transport_along(model, &p, &v, &normals, &[t_scale / speed], &opts.bvp.step)?;
            let (b, _, normals_b) = states.into_iter().next().expect("one output");
            let frame = ScaleFrame { p: p.clone(), b, normals_p: normals.clone(), normals_b, scale: t_scale };
            let mut c = best.clone();
            if opts.search {
                let mut eval = |c: &[T]| -> T {
                    evaluations += 1;
                    frame.excess(model, c, &opts.bvp).unwrap_or_else(|_| T::nan())
                };
                let mut fc = eval(&c);
                if need_coarse {
                    for cand in coarse_directions::<T>(k) {
                        let f = eval(&cand);
                        if f < fc || fc.is_nan() {
                            fc = f;
                            c = cand;
                        }
                    }
                }
                if k > 1 {
                    let tangents = complement(&c);
                    let to_sphere = |a: &[T]| {
                        let mut x = c.clone();
                        for (ai, ti) in a.iter().zip(&tangents) {
                            axpy(&mut x, *ai, ti);
                        }
                        normalized(&x)
                    };
                    let h = if need_coarse { T::lit(0.2) } else { T::lit(0.05) };
                    let (a, fa, _) = nelder_mead(
                        |a| {
                            let x = to_sphere(a);
                            eval(&x)
                        },
                        &vec![T::zero(); k - 1],
                        h,
                        opts.refine_evals,
                        T::lit(1e-9),
                    );
                    if fa <= fc || fc.is_nan() {
                        c = to_sphere(&a);
                    }
                }
            }
            let u_vec = ScaleFrame::vector(&frame.normals_p, &c);
            let (points, vb2, w) = good_vertices(model, &p, &v, speed, t_scale, &u_vec, &NormalMode::Parallel, &opts.bvp)?;
            let quad = QuadTuple::measure(model, points, &opts.bvp)?;
            let speed_b = model.norm(&quad.points[1].coords, &vb2);
            let perp = (model.inner(&quad.points[1].coords, &w, &vb2) / speed_b)
                .abs()
                .max((model.inner(&p, &u_vec, &v) / speed).abs());
            let tuple = GoodTuple {
                scale: t_scale,
                p0,
                u: TangentVec { base: ChartPoint::new(p.clone()), components: u_vec },
                w: TangentVec { base: quad.points[1].clone(), components: w },
                tangent_a: scale(&v, T::one() / speed),
                tangent_b: scale(&vb2, T::one() / speed_b),
                perpendicularity: perp,
                quad,
            };
            Ok((c, tuple))
        })();
        match result {
            Ok((c, tuple)) => {
                best = c.clone();
                need_coarse = false;
                entries.push(ProbeEntry { scale: t_scale, direction: c, evaluations, tuple: Some(tuple), error: None });
            }
            Err(e) => {
                entries.push(ProbeEntry {
                    scale: t_scale,
                    direction: best.clone(),
                    evaluations,
                    tuple: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let deltas: Vec<T> = entries.iter().map(|e| e.distortion().unwrap_or_else(T::nan)).collect();
    Ok(FlatteningReport {
        p0,
        verdict: verdict_of(&deltas, opts.delta_flat, opts.delta_min, opts.trend_slack),
        entries,
        delta_flat: opts.delta_flat,
        delta_min: opts.delta_min,
        searched: opts.search,
    })
}
