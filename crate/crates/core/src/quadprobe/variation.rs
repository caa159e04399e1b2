use serde::Serialize;

use super::GoodTuple;
use crate::error::{Error, Result};
use crate::geometry::{geodesic_bvp_seeded, transport_along, BvpOptions};
use crate::linalg::{axpy, scale};
use crate::models::{ChartPoint, Model};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct VariationOptions<T> {
    pub bvp: BvpOptions<T>,
    /// Number of `t` intervals on `[0, T]`; rounded up to a multiple of 4.
    pub n_t: usize,
    /// Number of `s` intervals on `[0, 1]`; rounded up to even.
    pub n_s: usize,
}

impl<T: Real> Default for VariationOptions<T> {
    fn default() -> Self {
        Self { bvp: BvpOptions::default(), n_t: 16, n_s: 32 }
    }
}

/// The geodesic variation `σ(s, t)` spanned by a good tuple: lateral
/// geodesics `α(t) = exp_A(t u)`, `β(t) = exp_B(t w)` and, for each grid `t`,
/// the connecting geodesic `σ(·, t)` from `α(t)` to `β(t)` on `s ∈ [0, 1]`.
///
/// Row vectors are indexed by the `t` grid `t_k = k T / n_t`, `k = 0..=n_t`.
/// Quantities that need a missing neighbour row are NaN; the failing rows
/// are listed in `failures`.
#[derive(Debug, Clone, Serialize)]
pub struct VariationScan<T> {
    pub scale: T,
    pub t: Vec<T>,
    pub s: Vec<T>,
    pub lengths: Vec<T>,
    /// `L'(0)` by a fourth-order central difference of `L`.
    pub dl0: T,
    /// `L'(0)` from the first-variation formula `(⟨S,X⟩(1) − ⟨S,X⟩(0)) / L`.
    pub dl0_formula: T,
    /// `L''(t)` by a fourth-order finite difference of `L`.
    pub d2l_fd: Vec<T>,
    /// `L''(t)` from the second-variation integral.
    pub d2l_int: Vec<T>,
    /// `max_s ‖X(s, t)‖` per row.
    pub x_norm_max: Vec<T>,
    /// Fields on the grid, indexed `[k][j]` for `t_k`, `s_j`.
    pub points: Vec<Vec<Vec<T>>>,
    pub s_field: Vec<Vec<Vec<T>>>,
    pub x_field: Vec<Vec<Vec<T>>>,
    pub x_hat: Vec<Vec<Vec<T>>>,
    /// Grid index `k` (from −2 to `n_t + 2`) and error of each failed row.
    pub failures: Vec<(isize, String)>,
}

impl<T: Real> VariationScan<T> {
    pub fn interval(&self) -> T {
        self.t[1] - self.t[0]
    }

    /// Rows `k` with finite `d2l_fd` and `d2l_int`, excluding the two ends.
    pub fn interior_rows(&self) -> Vec<usize> {
        (1..self.t.len() - 1).filter(|&k| self.d2l_fd[k].is_finite() && self.d2l_int[k].is_finite()).collect()
    }
}

struct Row<T> {
    points: Vec<Vec<T>>,
    velocities: Vec<Vec<T>>,
    length: T,
}

fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Samples of a lateral geodesic at `t_k = k h` for `k = -2..=n+2`.
fn lateral<T: Real>(model: &Model<T>, x: &[T], u: &[T], h: T, n: usize, opts: &BvpOptions<T>) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    let fwd: Vec<T> = (0..=n + 2).map(|k| h * T::from_usize_lossy(k)).collect();
    let back: Vec<T> = (1..=2).map(|k| h * T::from_usize_lossy(k)).collect();
    let f = transport_along(model, x, u, &[], &fwd, &opts.step)?;
    let neg_u = scale(u, -T::one());
    let b = transport_along(model, x, &neg_u, &[], &back, &opts.step)?;
    let mut out: Vec<(Vec<T>, Vec<T>)> = b.into_iter().rev().map(|(p, v, _)| (p, scale(&v, -T::one()))).collect();
    out.extend(f.into_iter().map(|(p, v, _)| (p, v)));
    Ok(out)
}

fn connecting_row<T: Real>(
    model: &Model<T>,
    from: &[T],
    to: &[T],
    seed: Option<&[T]>,
    s: &[T],
    opts: &BvpOptions<T>,
) -> Result<Row<T>> {
    let sol = geodesic_bvp_seeded(model, &ChartPoint::new(from.to_vec()), &ChartPoint::new(to.to_vec()), seed, opts)?;
    let states = transport_along(model, from, &sol.velocity.components, &[], s, &opts.step)?;
    let (points, velocities) = states.into_iter().map(|(p, v, _)| (p, v)).unzip();
    Ok(Row { points, velocities, length: sol.length })
}

fn simpson<T: Real>(f: &[T], h: T) -> T {
    let n = f.len() - 1;
    debug_assert!(n % 2 == 0);
    let mut acc = f[0] + f[n];
    for (i, &v) in f.iter().enumerate().take(n).skip(1) {
        acc = acc + if i % 2 == 1 { T::lit(4.0) * v } else { T::lit(2.0) * v };
    }
    acc * h / T::lit(3.0)
}

/// Scans the first and second variation of length across the good tuple.
///
/// `X` is the fourth-order central difference of `σ` in `t`, and `∇_S X` is
/// obtained as `∇_X S = ∂_t S + Γ(X, S)` with the same stencil, so no
/// derivatives along `s` are needed. The second-variation integral is
/// `(1/L) ∫₀¹ ‖(∇_S X)^⊥‖² − ⟨R(X̂, S)S, X̂⟩ ds` by Simpson's rule.
pub fn variation_scan<T: Real>(model: &Model<T>, tuple: &GoodTuple<T>, opts: &VariationOptions<T>) -> Result<VariationScan<T>> {
    if opts.n_t < 8 || opts.n_s < 8 {
        return Err(Error::usage("variation grid needs n_t, n_s >= 8"));
    }
    let n_t = round_up(opts.n_t, 4);
    let n_s = round_up(opts.n_s, 2);
    let big_t = tuple.scale;
    let h = big_t / T::from_usize_lossy(n_t);
    let dim = model.dim();
    let a = &tuple.quad.points[0].coords;
    let b = &tuple.quad.points[1].coords;
    let alpha = lateral(model, a, &tuple.u.components, h, n_t, &opts.bvp)?;
    let beta = lateral(model, b, &tuple.w.components, h, n_t, &opts.bvp)?;
    let s: Vec<T> = (0..=n_s).map(|j| T::from_usize_lossy(j) / T::from_usize_lossy(n_s)).collect();

    // rows k = -2..=n_t+2 stored at index k+2, solved outward from t = 0
    let n_rows = n_t + 5;
    let mut rows: Vec<Option<Row<T>>> = (0..n_rows).map(|_| None).collect();
    let mut failures = Vec::new();
    let order: Vec<usize> = (2..n_rows).chain([1, 0]).collect();
    let mut seed: Option<Vec<T>> = None;
    for &idx in &order {
        if idx == 1 {
            seed = rows[2].as_ref().map(|r| r.velocities[0].clone());
        }
        match connecting_row(model, &alpha[idx].0, &beta[idx].0, seed.as_deref(), &s, &opts.bvp) {
            Ok(row) => {
                seed = Some(row.velocities[0].clone());
                rows[idx] = Some(row);
            }
            Err(e) => {
                failures.push((idx as isize - 2, e.to_string()));
                seed = None;
            }
        }
    }

    let nan = T::nan();
    let twelve = T::lit(12.0);
    let len = |idx: usize| rows[idx].as_ref().map(|r| r.length).unwrap_or(nan);
    let lengths: Vec<T> = (0..=n_t).map(|k| len(k + 2)).collect();
    let d2l_fd: Vec<T> = (0..=n_t)
        .map(|k| {
            let i = k + 2;
            (-len(i + 2) + T::lit(16.0) * len(i + 1) - T::lit(30.0) * len(i) + T::lit(16.0) * len(i - 1) - len(i - 2)) / (twelve * h * h)
        })
        .collect();
    let dl0 = (-len(4) + T::lit(8.0) * len(3) - T::lit(8.0) * len(1) + len(0)) / (twelve * h);

    let stencil = |f: &dyn Fn(usize) -> Option<Vec<T>>, i: usize| -> Option<Vec<T>> {
        let (m2, m1, p1, p2) = (f(i - 2)?, f(i - 1)?, f(i + 1)?, f(i + 2)?);
        Some(
            (0..dim)
                .map(|c| (-p2[c] + T::lit(8.0) * p1[c] - T::lit(8.0) * m1[c] + m2[c]) / (twelve * h))
                .collect(),
        )
    };

    let mut points = Vec::with_capacity(n_t + 1);
    let mut s_field = Vec::with_capacity(n_t + 1);
    let mut x_field = Vec::with_capacity(n_t + 1);
    let mut x_hat = Vec::with_capacity(n_t + 1);
    let mut d2l_int = Vec::with_capacity(n_t + 1);
    let mut x_norm_max = Vec::with_capacity(n_t + 1);
    let mut dl0_formula = nan;
    let mut gam = vec![T::zero(); dim];
    for k in 0..=n_t {
        let i = k + 2;
        let Some(row) = rows[i].as_ref() else {
            points.push(Vec::new());
            s_field.push(Vec::new());
            x_field.push(Vec::new());
            x_hat.push(Vec::new());
            d2l_int.push(nan);
            x_norm_max.push(nan);
            continue;
        };
        points.push(row.points.clone());
        s_field.push(row.velocities.clone());
        let mut xs = Vec::with_capacity(n_s + 1);
        let mut xh = Vec::with_capacity(n_s + 1);
        let mut integrand = Vec::with_capacity(n_s + 1);
        let mut complete = true;
        let mut xmax = T::zero();
        for j in 0..=n_s {
            let pos = |r: usize| rows[r].as_ref().map(|row| row.points[j].clone());
            let vel = |r: usize| rows[r].as_ref().map(|row| row.velocities[j].clone());
            let (Some(mut x), Some(dts)) = (stencil(&pos, i), stencil(&vel, i)) else {
                complete = false;
                break;
            };
            // the lateral velocities are known exactly at the ends
            if j == 0 {
                x = alpha[i].1.clone();
            } else if j == n_s {
                x = beta[i].1.clone();
            }
            let p = &row.points[j];
            let sv = &row.velocities[j];
            let ss = model.inner(p, sv, sv);
            let mut hat = x.clone();
            axpy(&mut hat, -model.inner(p, &x, sv) / ss, sv);
            model.gamma_contract(p, &x, sv, &mut gam);
            let mut cov = dts;
            axpy(&mut cov, T::one(), &gam);
            let mut cov_perp = cov.clone();
            axpy(&mut cov_perp, -model.inner(p, &cov, sv) / ss, sv);
            let r = model.curvature_raw(p, &hat, sv, sv);
            integrand.push(model.inner(p, &cov_perp, &cov_perp) - model.inner(p, &r, &hat));
            xmax = xmax.max(model.norm(p, &x));
            xs.push(x);
            xh.push(hat);
        }
        if k == 0 && complete {
            let (p0, s0) = (&row.points[0], &row.velocities[0]);
            let (p1, s1) = (&row.points[n_s], &row.velocities[n_s]);
            dl0_formula = (model.inner(p1, s1, &xs[n_s]) - model.inner(p0, s0, &xs[0])) / row.length;
        }
        if complete {
            d2l_int.push(simpson(&integrand, T::one() / T::from_usize_lossy(n_s)) / row.length);
            x_norm_max.push(xmax);
        } else {
            d2l_int.push(nan);
            x_norm_max.push(nan);
        }
        x_field.push(xs);
        x_hat.push(xh);
    }
    Ok(VariationScan {
        scale: big_t,
        t: (0..=n_t).map(|k| h * T::from_usize_lossy(k)).collect(),
        s,
        lengths,
        dl0,
        dl0_formula,
        d2l_fd,
        d2l_int,
        x_norm_max,
        points,
        s_field,
        x_field,
        x_hat,
        failures,
    })
}
