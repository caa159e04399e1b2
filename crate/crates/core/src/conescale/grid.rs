use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, exp_state, geodesic_window, project_to_geodesic, transport_along, BvpOptions, GeodesicPath, ProjectionOptions};
use crate::linalg::scale;
use crate::models::{ChartPoint, Model, TangentVec};
use crate::sampling::{rng_for, uniform};
use crate::scalar::Real;

/// Rectangle `[x_min, x_max] × [0, height]` sampled every `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridExtent<T> {
    pub x_min: T,
    pub x_max: T,
    pub height: T,
    pub spacing: T,
}

fn steps<T: Real>(len: T, h: T) -> Option<usize> {
    let k = (len / h).round();
    ((len / h - k).abs() <= T::lit(1e-9) * k.max(T::one())).then(|| k.to_usize()).flatten()
}

impl<T: Real> GridExtent<T> {
    fn validate(&self) -> Result<(usize, usize)> {
        if !(self.spacing > T::zero() && self.x_max > self.x_min && self.height >= T::zero()) {
            return Err(Error::usage("grid extent needs spacing > 0, x_max > x_min and height >= 0"));
        }
        let cols = steps(self.x_max - self.x_min, self.spacing).ok_or_else(|| Error::usage("x range is not a multiple of the spacing"))?;
        let rows = steps(self.height, self.spacing).ok_or_else(|| Error::usage("height is not a multiple of the spacing"))?;
        Ok((cols + 1, rows + 1))
    }
}

/// A Gaussian bump `exp(−|p − center|² / 2σ²)` with displacement weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump<T> {
    pub center: [T; 2],
    pub weight: [T; 2],
}

/// A smooth displacement `P(p) = p + a·D(p)` of the parameter plane that
/// keeps the x-axis on itself: the vertical part of `D` carries the factor
/// `1 − exp(−y²/σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation<T> {
    pub amplitude: T,
    pub width: T,
    pub seed: u64,
    pub bumps: Vec<Bump<T>>,
}

/// Bump width used by `flat_grid_embed`.
pub const BUMP_WIDTH: f64 = 1.5;

impl<T: Real> Perturbation<T> {
    /// Bumps on a jittered lattice of pitch `3σ` covering the extent (plus a
    /// margin of `3σ`), with weights uniform in `[−1, 1]`.
    pub fn generate(amplitude: T, width: T, seed: u64, extent: &GridExtent<T>) -> Result<Self> {
        if !(amplitude >= T::zero() && amplitude <= T::lit(0.5)) || !(width > T::zero()) {
            return Err(Error::usage("perturbation amplitude must lie in [0, 0.5] and width be positive"));
        }
        let w = width.to_f64_lossy();
        let pitch = 3.0 * w;
        let (x0, x1) = (extent.x_min.to_f64_lossy() - pitch, extent.x_max.to_f64_lossy() + pitch);
        let y1 = extent.height.to_f64_lossy() + pitch;
        let mut rng = rng_for(seed, 0);
        let mut bumps = Vec::new();
        let mut y = -pitch;
        while y <= y1 {
            let mut x = x0;
            while x <= x1 {
                let jx: f64 = rng.gen_range(-0.5..0.5) * w;
                let jy: f64 = rng.gen_range(-0.5..0.5) * w;
                bumps.push(Bump {
                    center: [T::lit(x + jx), T::lit(y + jy)],
                    weight: [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)],
                });
                x += pitch;
            }
            y += pitch;
        }
        Ok(Self { amplitude, width, seed, bumps })
    }

    pub fn displace(&self, x: T, y: T) -> (T, T) {
        let two_s2 = T::lit(2.0) * self.width * self.width;
        let cutoff = T::lit(64.0) * self.width * self.width;
        let (mut dx, mut dy) = (T::zero(), T::zero());
        for b in &self.bumps {
            let r2 = (x - b.center[0]).powi(2) + (y - b.center[1]).powi(2);
            if r2 > cutoff {
                continue;
            }
            let e = (-r2 / two_s2).exp();
            dx = dx + b.weight[0] * e;
            dy = dy + b.weight[1] * e;
        }
        let damp = T::one() - (-(y * y) / (self.width * self.width)).exp();
        (x + self.amplitude * dx, y + self.amplitude * damp * dy)
    }
}

/// The map `φ` to embed: `φ(x, y) = exp_{γ(x)}(y V(x))` with `V` the parallel
/// transport of `direction` along `γ`, optionally precomposed with a
/// [`Perturbation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlatGridSpec<T> {
    ProductFlat { geodesic: TangentVec<T>, direction: TangentVec<T> },
    Perturbed { geodesic: TangentVec<T>, direction: TangentVec<T>, amplitude: T, seed: u64 },
}

impl<T: Real> FlatGridSpec<T> {
    fn frame(&self) -> (&TangentVec<T>, &TangentVec<T>) {
        match self {
            Self::ProductFlat { geodesic, direction } | Self::Perturbed { geodesic, direction, .. } => (geodesic, direction),
        }
    }
}

/// Evaluated grid `φ(x_k, y_l)` with its measured bi-Lipschitz constant.
#[derive(Debug, Clone, Serialize)]
pub struct FlatProbeGrid<T> {
    pub extent: GridExtent<T>,
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    /// Row-major: `points[l * xs.len() + k] = φ(x_k, y_l)`.
    pub points: Vec<ChartPoint<T>>,
    /// Arclength parameter along `γ` of `φ(x_k, 0)`, strictly increasing.
    pub base_params: Vec<T>,
    #[serde(skip)]
    pub base_path: GeodesicPath<T>,
    pub perturbation: Option<Perturbation<T>>,
    /// `max(sup ratio, sup 1/ratio)` over the measured pairs, where ratio is
    /// `d(φp, φq) / ‖p − q‖`.
    pub c: T,
    pub ratio_min: T,
    pub ratio_max: T,
    pub pairs_measured: usize,
    /// All pairs were measured (otherwise neighbours plus random pairs).
    pub exhaustive: bool,
}

impl<T: Real> FlatProbeGrid<T> {
    pub fn cols(&self) -> usize {
        self.xs.len()
    }

    pub fn rows(&self) -> usize {
        self.ys.len()
    }

    pub fn point(&self, col: usize, row: usize) -> &ChartPoint<T> {
        &self.points[row * self.cols() + col]
    }

    fn index_of(&self, start: T, v: T) -> Option<usize> {
        let h = self.extent.spacing;
        let k = ((v - start) / h).round();
        if (v - start - k * h).abs() > T::lit(1e-9) * h || k < T::zero() {
            return None;
        }
        k.to_usize()
    }

    pub fn column_of(&self, x: T) -> Option<usize> {
        self.index_of(self.extent.x_min, x).filter(|&k| k < self.cols())
    }

    pub fn row_of(&self, y: T) -> Option<usize> {
        self.index_of(T::zero(), y).filter(|&l| l < self.rows())
    }

    /// `φ⁻¹` on the base row: the `x` whose image sits at arclength `s`
    /// along `γ`, by linear interpolation.
    pub fn invert_base(&self, s: T) -> Option<T> {
        let p = &self.base_params;
        if s < p[0] || s > p[p.len() - 1] {
            return None;
        }
        let i = p.partition_point(|&v| v <= s).clamp(1, p.len() - 1);
        let w = (s - p[i - 1]) / (p[i] - p[i - 1]);
        Some(self.xs[i - 1] + w * (self.xs[i] - self.xs[i - 1]))
    }

    /// Allowance for the linear interpolation in `invert_base` plus solver
    /// noise: `h²/4 + 1e-6·(1 + r)`.
    pub fn grid_tolerance(&self, r: T) -> T {
        let h = self.extent.spacing;
        if self.perturbation.is_none() {
            T::lit(1e-6) * (T::one() + r)
        } else {
            h * h / T::lit(4.0) + T::lit(1e-6) * (T::one() + r)
        }
    }
}

/// Largest `‖R(V, γ̇)γ̇‖` tolerated along the base geodesic.
const KERNEL_TOL: f64 = 1e-8;

/// Position, velocity and transported direction along `γ` at each parameter.
fn frame_along<T: Real>(
    model: &Model<T>,
    geod: &TangentVec<T>,
    dir: &[T],
    params: &[T],
    opts: &BvpOptions<T>,
) -> Result<Vec<(Vec<T>, Vec<T>, Vec<T>)>> {
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| params[a].partial_cmp(&params[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<Option<(Vec<T>, Vec<T>, Vec<T>)>> = vec![None; params.len()];
    let x = &geod.base.coords;
    let u = &geod.components;
    let fwd: Vec<usize> = order.iter().copied().filter(|&i| params[i] >= T::zero()).collect();
    let back: Vec<usize> = order.iter().rev().copied().filter(|&i| params[i] < T::zero()).collect();
    for (idx, sign) in [(fwd, T::one()), (back, -T::one())] {
        // distinct times only; equal parameters share a state
        let mut groups: Vec<(T, Vec<usize>)> = Vec::new();
        for &i in &idx {
            let t = params[i] * sign;
            match groups.last_mut() {
                Some((last, members)) if *last == t => members.push(i),
                _ => groups.push((t, vec![i])),
            }
        }
        if groups.is_empty() {
            continue;
        }
        let times: Vec<T> = groups.iter().map(|g| g.0).collect();
        let states = transport_along(model, x, &scale(u, sign), &[dir.to_vec()], &times, &opts.step)?;
        for ((_, members), (p, v, ws)) in groups.iter().zip(states) {
            let v = scale(&v, sign);
            for &i in members {
                out[i] = Some((p.clone(), v.clone(), ws[0].clone()));
            }
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every parameter is covered")).collect())
}

/// Evaluates `φ` on the grid, checks that the flat direction is a parallel
/// Jacobi direction along the base geodesic, and measures `C`.
///
/// `C` is measured over all pairs when there are at most `pair_budget` of
/// them; otherwise over the horizontal, vertical and diagonal neighbour pairs
/// plus random pairs, `pair_budget` in total.
pub fn flat_grid_embed<T: Real>(
    model: &Model<T>,
    spec: &FlatGridSpec<T>,
    extent: GridExtent<T>,
    pair_budget: usize,
    opts: &BvpOptions<T>,
) -> Result<FlatProbeGrid<T>> {
    let (cols, rows) = extent.validate()?;
    let (geod, dir) = spec.frame();
    model.check_vector(geod)?;
    model.check_vector(dir)?;
    if geod.base != dir.base {
        return Err(Error::usage("geodesic and flat direction must share a base point"));
    }
    let x0 = &geod.base.coords;
    let tol = T::lit(1e-8);
    if (model.norm(x0, &geod.components) - T::one()).abs() > tol
        || (model.norm(x0, &dir.components) - T::one()).abs() > tol
        || model.inner(x0, &geod.components, &dir.components).abs() > tol
    {
        return Err(Error::usage("geodesic and flat direction must be orthonormal"));
    }
    let perturbation = match spec {
        FlatGridSpec::ProductFlat { .. } => None,
        FlatGridSpec::Perturbed { amplitude, seed, .. } => Some(Perturbation::generate(*amplitude, T::lit(BUMP_WIDTH), *seed, &extent)?),
    };
    let h = extent.spacing;
    let xs: Vec<T> = (0..cols).map(|k| extent.x_min + h * T::from_usize_lossy(k)).collect();
    let ys: Vec<T> = (0..rows).map(|l| h * T::from_usize_lossy(l)).collect();
    let params: Vec<(T, T)> = (0..rows * cols)
        .map(|i| {
            let (x, y) = (xs[i % cols], ys[i / cols]);
            perturbation.as_ref().map_or((x, y), |p| p.displace(x, y))
        })
        .collect();

    let along: Vec<T> = params.iter().map(|p| p.0).collect();
    let frames = frame_along(model, geod, &dir.components, &along, opts)?;
    for (p, v, w) in &frames {
        let r = model.curvature_raw(p, w, v, v);
        if model.norm(p, &r) > T::lit(KERNEL_TOL) {
            return Err(Error::usage("flat direction is not a parallel Jacobi direction along the geodesic"));
        }
    }
    let points: Vec<ChartPoint<T>> = frames
        .par_iter()
        .zip(params.par_iter())
        .map(|((p, _, w), &(_, y))| {
            if y == T::zero() {
                Ok(ChartPoint::new(p.clone()))
            } else {
                Ok(ChartPoint::new(exp_state(model, p, &scale(w, y), &opts.step)?.0))
            }
        })
        .collect::<Result<_>>()?;

    let base_params: Vec<T> = params[..cols].iter().map(|p| p.0).collect();
    if base_params.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::degenerate("base row does not map monotonically onto the geodesic"));
    }
    let t_min = base_params[0].min(T::zero());
    let t_max = base_params[cols - 1].max(T::zero());
    let base_path = geodesic_window(model, geod, t_min, t_max, &opts.step)?;

    let n = rows * cols;
    let total = n * n.saturating_sub(1) / 2;
    let exhaustive = total <= pair_budget;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut nb = Vec::new();
        for l in 0..rows {
            for k in 0..cols {
                let i = l * cols + k;
                if k + 1 < cols {
                    nb.push((i, i + 1));
                }
                if l + 1 < rows {
                    nb.push((i, i + cols));
                    if k + 1 < cols {
                        nb.push((i, i + cols + 1));
                    }
                    if k > 0 {
                        nb.push((i, i + cols - 1));
                    }
                }
            }
        }
        let keep = (pair_budget / 2).max(1);
        if nb.len() > keep {
            let stride = nb.len() as f64 / keep as f64;
            nb = (0..keep).map(|i| nb[(i as f64 * stride) as usize]).collect();
        }
        let mut rng = rng_for(0x00c0_ffee, 1);
        while nb.len() < pair_budget {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if i != j {
                nb.push((i.min(j), i.max(j)));
            }
        }
        nb
    };
    let ratios: Vec<T> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let dp = ((xs[i % cols] - xs[j % cols]).powi(2) + (ys[i / cols] - ys[j / cols]).powi(2)).sqrt();
            Ok(distance(model, &points[i], &points[j], opts)? / dp)
        })
        .collect::<Result<_>>()?;
    let (ratio_min, ratio_max) = ratios.iter().fold((T::infinity(), T::zero()), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let c = if ratios.is_empty() { T::one() } else { ratio_max.max(T::one() / ratio_min).max(T::one()) };

    Ok(FlatProbeGrid {
        extent,
        xs,
        ys,
        points,
        base_params,
        base_path,
        perturbation,
        c,
        ratio_min,
        ratio_max,
        pairs_measured: pairs.len(),
        exhaustive,
    })
}

/// One scanned point `x ∈ L_r`.
#[derive(Debug, Clone, Serialize)]
pub struct ScanColumn<T> {
    pub x: T,
    /// Arclength parameter of `π(φ(x))` on `γ`.
    pub foot_t: T,
    pub foot: ChartPoint<T>,
    /// `ψ_r(x)`, the x-coordinate of `φ⁻¹(π(φ(x)))` on `L_0`.
    pub psi: T,
    /// `‖x − ψ_r(x)‖` in the parameter plane.
    pub disp: T,
}

/// Projection statistics of one row `L_r`.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeStats<T> {
    pub r: T,
    pub unit_step: T,
    pub c: T,
    pub tolerance: T,
    /// `C² r + tolerance`.
    pub bound: T,
    pub max_disp: T,
    pub bound_holds: bool,
    pub columns: Vec<ScanColumn<T>>,
    /// Columns whose foot falls outside the image of the base row (edge
    /// effect of a finite grid); excluded from the bound.
    pub clipped: Vec<T>,
    pub failures: Vec<(T, String)>,
    /// First `k ≥ 0` with `|ψ_r(x_{k+1}) − ψ_r(x_k)| > unit_step/2`, where
    /// `x_k = (k·unit_step, r)`.
    pub pair_index: Option<usize>,
    pub pair: Option<(T, T)>,
    pub pair_step_disp: Option<T>,
    /// Smallest `k` with `k·u/2 − r√(C⁴−1) > C² r`: some pair of index
    /// below it must qualify.
    pub k_bound: usize,
    pub within_k_bound: bool,
    /// `2C(r√(C⁴−1) + C r)`.
    pub required_length: T,
    /// The row reaches `max(required_length, k_bound·u)`; otherwise a
    /// missing pair is not evidence against the bound.
    pub conclusive: bool,
}

impl<T: Real> ProbeStats<T> {
    /// The column of `x_k` in `columns`.
    pub fn column(&self, k: usize) -> Option<&ScanColumn<T>> {
        let x = self.unit_step * T::from_usize_lossy(k);
        self.columns.iter().find(|c| (c.x - x).abs() <= T::lit(1e-9) * self.unit_step)
    }
}

/// Scans `x_k = (k·u, r)` for `k = 0, 1, …` up to the length the pair argument
/// needs (or the grid's end): projects each `φ(x_k)` onto `γ`, pulls the foot
/// back to `L_0`, checks `‖x − ψ_r(x)‖ ≤ C² r + tol`, and looks for the first
/// pair `x_k, x_{k+1}` whose images are more than `u/2` apart.
pub fn projection_scan<T: Real>(
    model: &Model<T>,
    grid: &FlatProbeGrid<T>,
    r: T,
    unit_step: T,
    opts: &ProjectionOptions<T>,
) -> Result<ProbeStats<T>> {
    let row = grid.row_of(r).ok_or_else(|| Error::usage("row L_r is not a grid row"))?;
    let h = grid.extent.spacing;
    let stride = steps(unit_step, h).filter(|&s| s > 0).ok_or_else(|| Error::usage("unit step must be a positive multiple of the spacing"))?;
    let origin = grid.column_of(T::zero()).ok_or_else(|| Error::usage("grid has no column at x = 0"))?;

    let c = grid.c;
    let c4 = (c.powi(4) - T::one()).max(T::zero()).sqrt();
    let k_real = T::lit(2.0) * (r * c4 + c * c * r) / unit_step;
    let k_bound = k_real.floor().to_usize().unwrap_or(0) + 1;
    let required_length = T::lit(2.0) * c * (r * c4 + c * r);
    let reach = (required_length / unit_step).ceil().to_usize().unwrap_or(0).max(k_bound) + 1;
    // the sweep x_k = (k·u, r), k = 0..=reach, as far as the grid goes
    let cols: Vec<usize> = (0..=reach).map(|k| origin + k * stride).take_while(|&i| i < grid.cols()).collect();

    let results: Vec<(T, Result<Option<ScanColumn<T>>>)> = cols
        .par_iter()
        .map(|&k| {
            let x = grid.xs[k];
            let res = project_to_geodesic(model, &grid.base_path, grid.point(k, row), opts).map(|p| {
                // a window end is a genuine foot only where the first-order
                // condition holds there too
                if p.at_boundary && p.optimality > T::lit(1e-6) * p.distance.max(T::one()) {
                    return None;
                }
                let psi = grid.invert_base(p.t)?;
                let disp = ((x - psi).powi(2) + r * r).sqrt();
                Some(ScanColumn { x, foot_t: p.t, foot: p.foot, psi, disp })
            });
            (x, res)
        })
        .collect();
    let mut columns = Vec::new();
    let mut clipped = Vec::new();
    let mut failures = Vec::new();
    for (x, res) in results {
        match res {
            Ok(Some(c)) => columns.push(c),
            Ok(None) => clipped.push(x),
            Err(e) => failures.push((x, e.to_string())),
        }
    }

    let tolerance = grid.grid_tolerance(r);
    let bound = c * c * r + tolerance;
    let max_disp = columns.iter().map(|c| c.disp).fold(T::zero(), T::max);

    let mut pair_index = None;
    let mut pair = None;
    let mut pair_step_disp = None;
    let stats_col = |k: usize| {
        let x = unit_step * T::from_usize_lossy(k);
        columns.iter().find(|c| (c.x - x).abs() <= T::lit(1e-9) * unit_step)
    };
    let mut k = 0;
    while let (Some(p), Some(q)) = (stats_col(k), stats_col(k + 1)) {
        let step = (q.psi - p.psi).abs();
        if step > unit_step / T::lit(2.0) {
            pair_index = Some(k);
            pair = Some((p.x, q.x));
            pair_step_disp = Some(step);
            break;
        }
        k += 1;
    }
    let grid_reach = grid.extent.x_max;
    Ok(ProbeStats {
        r,
        unit_step,
        c,
        tolerance,
        bound,
        max_disp,
        bound_holds: failures.is_empty() && max_disp <= bound,
        columns,
        clipped,
        failures,
        pair_index,
        pair,
        pair_step_disp,
        k_bound,
        within_k_bound: pair_index.is_some_and(|i| i + 1 <= k_bound),
        required_length,
        conclusive: grid_reach >= required_length && grid_reach >= unit_step * T::from_usize_lossy(k_bound),
    })
}

/// `projection_scan` for several rows, in the given order.
pub fn projection_scan_rows<T: Real>(
    model: &Model<T>,
    grid: &FlatProbeGrid<T>,
    rs: &[T],
    unit_step: T,
    opts: &ProjectionOptions<T>,
) -> Result<Vec<ProbeStats<T>>> {
    rs.par_iter().map(|&r| projection_scan(model, grid, r, unit_step, opts)).collect()
}
