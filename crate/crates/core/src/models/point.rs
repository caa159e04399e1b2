use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point of a model, in its (single) chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint<T> {
    pub coords: Vec<T>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Self { coords: coords.iter().map(|&x| T::lit(x)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean distance between chart coordinates (not the Riemannian one).
    pub fn chart_distance(&self, other: &ChartPoint<T>) -> T {
        crate::linalg::norm(&crate::linalg::sub(&self.coords, &other.coords))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|x| x.to_f64_lossy()).collect()
    }
}

/// A tangent vector in chart components, together with its base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVec<T> {
    pub base: ChartPoint<T>,
    pub components: Vec<T>,
}

impl<T: Real> TangentVec<T> {
    pub fn new(base: ChartPoint<T>, components: Vec<T>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(Error::usage(format!(
                "tangent vector has {} components but its base point has dimension {}",
                components.len(),
                base.dim()
            )));
        }
        Ok(Self { base, components })
    }

    pub fn zero(base: ChartPoint<T>) -> Self {
        let n = base.dim();
        Self { base, components: vec![T::zero(); n] }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { base: self.base.clone(), components: crate::linalg::scale(&self.components, s) }
    }

    pub(crate) fn same_base(&self, other: &TangentVec<T>) -> bool {
        self.base == other.base
    }
}
