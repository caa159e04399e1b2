//! Rank of a geodesic window: the number of independent parallel Jacobi
//! fields.
//!
//! A parallel normal field `Σ c_i E_i` is Jacobi iff `A(t) c = 0` for every
//! `t`, where `A_ij(t) = ⟨R(E_i, γ̇)γ̇, E_j⟩` in a parallel orthonormal frame.
//! The common kernel over a sampled window is read off the singular values of
//! the stacked matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{geodesic_ivp, jacobi_on_samples, orthonormal_basis, parallel_frame, transport_along, GeodesicPath};
use crate::linalg::{axpy, svd, symmetric_eigen, Matrix};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::ode::StepControl;
use crate::scalar::Real;

pub const DEFAULT_WINDOW: f64 = 20.0;
pub const DEFAULT_SAMPLES: usize = 201;
pub const DEFAULT_TOL: f64 = 1e-7;
/// Minimum ratio between the smallest kept and the largest discarded
/// singular value for a decision to count as determined.
pub const REQUIRED_GAP: f64 = 1e3;
/// Arclength of the restart segments used by [`verify_rank_by_jacobi`].
const JACOBI_SEGMENT: f64 = 4.0;

/// `A(t_k)` over the normal part of a parallel frame.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureProfile<T> {
    pub model_id: String,
    pub times: Vec<T>,
    pub matrices: Vec<Matrix<T>>,
    pub points: Vec<ChartPoint<T>>,
    /// Parallel frame at each time; `frames[k][0]` is the unit tangent.
    pub frames: Vec<Vec<Vec<T>>>,
    pub speed: T,
}

impl<T: Real> CurvatureProfile<T> {
    pub fn normal_dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.rows())
    }

    pub fn max_asymmetry(&self) -> T {
        self.matrices.iter().filter_map(|m| m.asymmetry()).fold(T::zero(), T::max)
    }

    /// Largest eigenvalue over all samples (≤ 0 on NPC models).
    pub fn max_eigenvalue(&self) -> T {
        let mut worst = T::neg_infinity();
        for m in &self.matrices {
            if m.rows() == 0 {
                continue;
            }
            let sym = symmetrized(m);
            let (ev, _) = symmetric_eigen(&sym);
            worst = worst.max(ev[ev.len() - 1]);
        }
        worst
    }

    /// `max_k ‖A(t_k) c‖`.
    pub fn residual(&self, c: &[T]) -> T {
        self.matrices.iter().map(|m| crate::linalg::norm(&m.mul_vec(c))).fold(T::zero(), T::max)
    }
}

fn symmetrized<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let n = m.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (m[(i, j)] + m[(j, i)]) * T::lit(0.5);
        }
    }
    s
}

/// Samples `A(t)` at `n_samples` equally spaced times across the window of
/// `geod`, in the parallel frame seeded at its first sample.
pub fn curvature_profile<T: Real>(model: &Model<T>, geod: &GeodesicPath<T>, n_samples: usize) -> Result<CurvatureProfile<T>> {
    if n_samples < 2 {
        return Err(Error::usage("curvature profile needs at least two samples"));
    }
    let (a, b) = (geod.t_min(), geod.t_max());
    if !(b > a) {
        return Err(Error::usage("curvature profile needs a window of positive length"));
    }
    let s0 = &geod.samples[0];
    let basis = orthonormal_basis(model, &s0.point.coords, &s0.velocity)?;
    let rel: Vec<T> = (0..n_samples)
        .map(|k| (b - a) * T::from_usize_lossy(k) / T::from_usize_lossy(n_samples - 1))
        .collect();
    let states = transport_along(model, &s0.point.coords, &s0.velocity, &basis, &rel, geod.step_control())?;
    let n = model.dim();
    let mut matrices = Vec::with_capacity(n_samples);
    let mut points = Vec::with_capacity(n_samples);
    let mut frames = Vec::with_capacity(n_samples);
    for (x, v, frame) in states {
        let mut m = Matrix::zeros(n - 1, n - 1);
        for i in 1..n {
            let r = model.curvature_raw(&x, &frame[i], &v, &v);
            for j in 1..n {
                m[(i - 1, j - 1)] = model.inner(&x, &r, &frame[j]);
            }
        }
        matrices.push(m);
        points.push(ChartPoint::new(x));
        frames.push(frame);
    }
    Ok(CurvatureProfile {
        model_id: geod.model_id.clone(),
        times: rel.iter().map(|&t| a + t).collect(),
        matrices,
        points,
        frames,
        speed: geod.speed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankStatus {
    Determined,
    /// No clear spectral gap around the threshold.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport<T> {
    pub rank: usize,
    pub status: RankStatus,
    /// Coefficients (in the normal frame `E_2..E_n`) spanning the common kernel.
    pub kernel_basis: Vec<Vec<T>>,
    /// Right singular vectors of the kept (curved) directions.
    pub curved_basis: Vec<Vec<T>>,
    /// Singular values of the stacked profile, descending.
    pub singular_values: Vec<T>,
    pub tol_used: T,
    /// Smallest kept over largest discarded singular value (infinite when
    /// nothing small was discarded, `None` when one side is empty).
    pub gap: Option<T>,
}

/// Rank from a curvature profile by singular-value thresholding at
/// `tol · σ_max`. All of `A` vanishing (relative to the curvature scale
/// `|γ̇|²`) gives full rank.
pub fn parallel_rank<T: Real>(profile: &CurvatureProfile<T>, tol: T) -> Result<RankReport<T>> {
    if !(tol > T::zero() && tol < T::one()) {
        return Err(Error::usage("rank tolerance must lie in (0, 1)"));
    }
    let k = profile.normal_dim();
    if k == 0 {
        return Ok(RankReport {
            rank: 1,
            status: RankStatus::Determined,
            kernel_basis: vec![],
            curved_basis: vec![],
            singular_values: vec![],
            tol_used: tol,
            gap: None,
        });
    }
    let m = profile.matrices.len();
    let mut stacked = Matrix::zeros(m * k, k);
    for (b, a) in profile.matrices.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                stacked[(b * k + i, j)] = a[(i, j)];
            }
        }
    }
    let s = svd(&stacked);
    let sigma_max = s.singular_values[0];
    let flat_scale = tol * profile.speed * profile.speed * T::from_usize_lossy(m).sqrt();
    let (kept, cut): (Vec<usize>, Vec<usize>) = if sigma_max <= flat_scale {
        (vec![], (0..k).collect())
    } else {
        (0..k).partition(|&i| s.singular_values[i] > tol * sigma_max)
    };
    let gap = match (kept.last(), cut.first()) {
        (Some(&lo), Some(&hi)) => {
            let (a, b) = (s.singular_values[lo], s.singular_values[hi]);
            Some(if b == T::zero() { T::infinity() } else { a / b })
        }
        _ => None,
    };
    let determined = match gap {
        Some(g) => g >= T::lit(REQUIRED_GAP),
        None => true,
    };
    Ok(RankReport {
        rank: 1 + cut.len(),
        status: if determined { RankStatus::Determined } else { RankStatus::Indeterminate },
        kernel_basis: cut.iter().map(|&i| s.right_vectors[i].clone()).collect(),
        curved_basis: kept.iter().map(|&i| s.right_vectors[i].clone()).collect(),
        singular_values: s.singular_values,
        tol_used: tol,
        gap,
    })
}

/// Window rank of the geodesic with initial velocity `v0` on `[0, window]`.
pub fn geodesic_rank<T: Real>(
    model: &Model<T>,
    v0: &TangentVec<T>,
    window: T,
    n_samples: usize,
    tol: T,
    step: &StepControl<T>,
) -> Result<(GeodesicPath<T>, CurvatureProfile<T>, RankReport<T>)> {
    let path = geodesic_ivp(model, v0, window, step)?;
    let profile = curvature_profile(model, &path, n_samples)?;
    let report = parallel_rank(&profile, tol)?;
    Ok((path, profile, report))
}

/// Window ranks for a sequence of window lengths (the monotonicity
/// diagnostic: ranks can only drop as the window grows).
pub fn rank_trend<T: Real>(
    model: &Model<T>,
    v0: &TangentVec<T>,
    windows: &[T],
    n_samples: usize,
    tol: T,
    step: &StepControl<T>,
) -> Result<Vec<usize>> {
    windows
        .iter()
        .map(|&w| geodesic_rank(model, v0, w, n_samples, tol, step).map(|r| r.2.rank))
        .collect()
}

/// Outcome of integrating the Jacobi equation from one frame direction.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionCheck<T> {
    pub coefficients: Vec<T>,
    /// `max_t |J'(t)|`
    pub max_derivative: T,
    /// `max_t |J(t) − Σ c_i E_i(t)|`
    pub max_deviation: T,
    pub parallel: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiVerification<T> {
    pub kernel: Vec<DirectionCheck<T>>,
    /// The most curved direction, which must not behave like a parallel field.
    pub curved: Option<DirectionCheck<T>>,
    pub derivative_tol: T,
    pub deviation_tol: T,
    pub consistent: bool,
}

impl<T: Real> JacobiVerification<T> {
    pub fn ensure_consistent(&self) -> Result<()> {
        if self.consistent {
            Ok(())
        } else {
            Err(Error::Consistency("parallel-frame kernel and Jacobi integration disagree".into()))
        }
    }
}

/// Cross-checks a rank decision through the Jacobi equation: each kernel
/// direction must give a parallel Jacobi field (`J' ≈ 0`, `J ≈ Σ c_i E_i`),
/// while the most curved direction must fail both tests.
pub fn verify_rank_by_jacobi<T: Real>(
    model: &Model<T>,
    geod: &GeodesicPath<T>,
    report: &RankReport<T>,
) -> Result<JacobiVerification<T>> {
    let frame = parallel_frame(model, geod)?;
    let window = geod.t_max() - geod.t_min();
    let derivative_tol = T::lit(1e-6);
    let deviation_tol = T::lit(1e-6) * window.max(T::one());
    // The Jacobi equation amplifies integration error along curved normal
    // directions exponentially, so the window is covered by segments of
    // bounded arclength, each restarted from the frame. By uniqueness of
    // Jacobi fields this checks the same statement as a single integration.
    let seg_len = T::lit(JACOBI_SEGMENT) / geod.speed;
    let mut starts = vec![0usize];
    for (k, s) in geod.samples.iter().enumerate() {
        if s.t - geod.samples[*starts.last().unwrap()].t >= seg_len {
            starts.push(k);
        }
    }
    let last = geod.samples.len() - 1;
    let check = |c: &[T]| -> Result<DirectionCheck<T>> {
        let mut max_derivative = T::zero();
        let mut max_deviation = T::zero();
        for (i, &k0) in starts.iter().enumerate() {
            let k1 = starts.get(i + 1).copied().unwrap_or(last);
            if k1 <= k0 {
                continue;
            }
            let j0 = frame.normal_field(k0, c);
            let zero = vec![T::zero(); j0.len()];
            let field = jacobi_on_samples(model, &geod.samples[k0..=k1], geod.step_control(), &j0, &zero)?;
            for (off, s) in field.samples.iter().enumerate() {
                max_derivative = max_derivative.max(model.norm(&s.point.coords, &s.jp));
                let mut d = s.j.clone();
                axpy(&mut d, -T::one(), &frame.normal_field(k0 + off, c));
                max_deviation = max_deviation.max(model.norm(&s.point.coords, &d));
            }
        }
        Ok(DirectionCheck {
            coefficients: c.to_vec(),
            max_derivative,
            max_deviation,
            parallel: max_derivative <= derivative_tol && max_deviation <= deviation_tol,
        })
    };
    let kernel: Vec<DirectionCheck<T>> = report.kernel_basis.iter().map(|c| check(c)).collect::<Result<_>>()?;
    let curved = report.curved_basis.first().map(|c| check(c)).transpose()?;
    let consistent = kernel.iter().all(|k| k.parallel)
        && curved
            .as_ref()
            .map_or(true, |c| c.max_derivative > derivative_tol && c.max_deviation > deviation_tol);
    Ok(JacobiVerification { kernel, curved, derivative_tol, deviation_tol, consistent })
}
