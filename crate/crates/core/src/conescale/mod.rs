//! Finite-scale shadows of asymptotic-cone arguments: rescaled distances,
//! bi-Lipschitz flat grids with the nearest-point projection onto their base
//! geodesic, and the two-step modification turning a raw perpendicular
//! 4-tuple into a good tuple.

mod grid;
mod pipeline;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, BvpOptions};
use crate::models::{ChartPoint, Model};
use crate::scalar::Real;

pub use grid::{
    flat_grid_embed, projection_scan, projection_scan_rows, Bump, FlatGridSpec, FlatProbeGrid, GridExtent, Perturbation, ProbeStats,
    ScanColumn,
};
pub use pipeline::{modify_tuple_pipeline, raw_tuple_at_depth, PipelineReport, RawTuple};

/// Strictly increasing scales `λ₁ < λ₂ < …` with `λ₁ ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSchedule<T> {
    lambdas: Vec<T>,
}

impl<T: Real> ScaleSchedule<T> {
    pub fn new(lambdas: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::degenerate("scale schedule is empty"));
        }
        if !lambdas.iter().all(|l| l.is_finite()) || lambdas[0] < T::one() {
            return Err(Error::usage("scale schedule must start at a finite scale >= 1"));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("scale schedule must be strictly increasing"));
        }
        Ok(Self { lambdas })
    }

    /// `first · ratioᵏ` for `k = 0..n`.
    pub fn geometric(first: T, ratio: T, n: usize) -> Result<Self> {
        if !(ratio > T::one()) {
            return Err(Error::usage("geometric schedule needs ratio > 1"));
        }
        let mut l = Vec::with_capacity(n);
        let mut x = first;
        for _ in 0..n {
            l.push(x);
            x = x * ratio;
        }
        Self::new(l)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `d(x, y) / λ`.
pub fn rescaled_distance<T: Real>(model: &Model<T>, x: &ChartPoint<T>, y: &ChartPoint<T>, lambda: T, opts: &BvpOptions<T>) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::usage("rescaling factor must be positive"));
    }
    Ok(distance(model, x, y, opts)? / lambda)
}

/// `d(x, y) / λᵢ` along a schedule (one distance solve).
pub fn rescaled_profile<T: Real>(
    model: &Model<T>,
    x: &ChartPoint<T>,
    y: &ChartPoint<T>,
    schedule: &ScaleSchedule<T>,
    opts: &BvpOptions<T>,
) -> Result<Vec<T>> {
    let d = distance(model, x, y, opts)?;
    Ok(schedule.as_slice().iter().map(|&l| d / l).collect())
}
