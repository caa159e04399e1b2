//! Numerical laboratory for non-positively curved Riemannian models.

pub mod catzero;
pub mod cli;
pub mod conescale;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod quadprobe;
pub mod ode;
pub mod rank;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Model64 = models::Model<f64>;
pub type ChartPoint64 = models::ChartPoint<f64>;
pub type TangentVec64 = models::TangentVec<f64>;
pub type GeodesicPath64 = geometry::GeodesicPath<f64>;
pub type RankReport64 = rank::RankReport<f64>;
pub type FlatteningReport64 = quadprobe::FlatteningReport<f64>;
pub type QuadTuple64 = quadprobe::QuadTuple<f64>;
pub type FlatProbeGrid64 = conescale::FlatProbeGrid<f64>;
pub type ProbeStats64 = conescale::ProbeStats<f64>;
