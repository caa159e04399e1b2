//! Experiment configuration (TOML).
//!
//! ```toml
//! operation = "flatten"            # rank | flatten | variation | catzero | spread | cone
//! model = "product(halfspace(2,1),euclidean(1))"
//! seed = 7
//! output = "results/flat-strip"    # optional; --out overrides
//!
//! [geodesic]
//! start = [0.0, 1.0, 0.0]
//! direction = [0.0, 1.0, 0.0]      # normalised in the metric
//! window = 20.0
//!
//! [schedule]
//! scales = [1.0, 2.0, 4.0, 8.0]
//!
//! [tolerances]
//! integrator = 1e-10
//! bvp = 1e-8
//! rank = 1e-7
//! delta_flat = 1e-3
//! delta_min = 0.1
//! ```
//!
//! Operation-specific tables are `[rank]`, `[flatten]`, `[variation]`,
//! `[sampling]` (catzero and spread) and `[cone]`; see the README for keys.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::modelspec::parse_model;
use crate::conescale::ScaleSchedule;
use crate::error::{Error, Result};
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Rank,
    Flatten,
    Variation,
    Catzero,
    Spread,
    Cone,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Rank => "rank",
            Operation::Flatten => "flatten",
            Operation::Variation => "variation",
            Operation::Catzero => "catzero",
            Operation::Spread => "spread",
            Operation::Cone => "cone",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: Operation,
    pub model: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub flatten: FlattenConfig,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    crate::rank::DEFAULT_WINDOW
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub integrator: f64,
    pub bvp: f64,
    pub rank: f64,
    pub delta_flat: f64,
    pub delta_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { integrator: 1e-10, bvp: 1e-8, rank: crate::rank::DEFAULT_TOL, delta_flat: 1e-3, delta_min: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankConfig {
    pub samples: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { samples: crate::rank::DEFAULT_SAMPLES }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlattenConfig {
    /// Unit normal at the start point; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<f64>>,
    pub search: bool,
    pub refine_evals: usize,
}

impl Default for FlattenConfig {
    fn default() -> Self {
        Self { normal: None, search: true, refine_evals: 60 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationConfig {
    pub n_t: usize,
    pub n_s: usize,
    /// Search over normals before scanning (as in the flatten operation).
    pub search: bool,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self { n_t: 16, n_s: 32, search: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Four-point and parallelogram configurations (catzero) or spread
    /// configurations (spread).
    pub count: usize,
    pub convexity_count: usize,
    pub radius: f64,
    pub convexity_t: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { count: 200, convexity_count: 100, radius: 3.0, convexity_t: vec![0.25, 0.5, 0.75], lambda_min: 0.5, lambda_max: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlatKind {
    ProductFlat,
    Perturbed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub kind: FlatKind,
    /// Flat direction at the geodesic start (parallel, curvature-free).
    pub direction: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    pub x_min: f64,
    pub x_max: f64,
    pub height: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_unit_step")]
    pub unit_step: f64,
    pub rows: Vec<f64>,
    #[serde(default)]
    pub depths: Vec<f64>,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
}

fn default_amplitude() -> f64 {
    0.3
}
fn default_spacing() -> f64 {
    0.5
}
fn default_unit_step() -> f64 {
    1.0
}
fn default_pair_budget() -> usize {
    20_000
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Errors carry the line, column
    /// and key reported by the TOML parser.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parsed_model(&self) -> Result<Model<f64>> {
        parse_model(&self.model).map_err(|e| Error::usage(format!("config key `model`: {e}")))
    }

    pub fn geodesic(&self) -> Result<&GeodesicConfig> {
        self.geodesic
            .as_ref()
            .ok_or_else(|| Error::usage(format!("operation `{}` needs a [geodesic] table", self.operation.name())))
    }

    pub fn scales(&self) -> Result<Vec<f64>> {
        let s = self
            .schedule
            .as_ref()
            .ok_or_else(|| Error::usage(format!("operation `{}` needs a [schedule] table", self.operation.name())))?;
        ScaleSchedule::new(s.scales.clone()).map_err(|e| Error::usage(format!("config key `schedule.scales`: {e}")))?;
        Ok(s.scales.clone())
    }

    pub fn cone(&self) -> Result<&ConeConfig> {
        self.cone.as_ref().ok_or_else(|| Error::usage("operation `cone` needs a [cone] table"))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.parsed_model()?;
        let t = &self.tolerances;
        positive("tolerances.integrator", t.integrator)?;
        positive("tolerances.bvp", t.bvp)?;
        positive("tolerances.rank", t.rank)?;
        positive("tolerances.delta_flat", t.delta_flat)?;
        positive("tolerances.delta_min", t.delta_min)?;
        if t.rank >= 1.0 {
            return Err(Error::usage("tolerances.rank must be < 1"));
        }
        if t.delta_flat >= t.delta_min {
            return Err(Error::usage("tolerances.delta_flat must be below tolerances.delta_min"));
        }
        if let Some(g) = &self.geodesic {
            if g.start.len() != model.dim() || g.direction.len() != model.dim() {
                return Err(Error::usage(format!("geodesic.start and geodesic.direction need {} components", model.dim())));
            }
            positive("geodesic.window", g.window)?;
            if !model.in_domain(&g.start) {
                return Err(Error::usage("geodesic.start lies outside the model's chart"));
            }
        }
        match self.operation {
            Operation::Rank => {
                self.geodesic()?;
                if self.rank.samples < 3 {
                    return Err(Error::usage("rank.samples must be at least 3"));
                }
            }
            Operation::Flatten | Operation::Variation => {
                self.geodesic()?;
                self.scales()?;
                if let Some(n) = &self.flatten.normal {
                    if n.len() != model.dim() {
                        return Err(Error::usage(format!("flatten.normal needs {} components", model.dim())));
                    }
                }
                if self.variation.n_t < 4 || self.variation.n_s < 2 {
                    return Err(Error::usage("variation.n_t must be >= 4 and variation.n_s >= 2"));
                }
            }
            Operation::Catzero | Operation::Spread => {
                let s = &self.sampling;
                positive("sampling.radius", s.radius)?;
                if s.count == 0 {
                    return Err(Error::usage("sampling.count must be positive"));
                }
                if s.convexity_t.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(Error::usage("sampling.convexity_t entries must lie in [0, 1]"));
                }
                positive("sampling.lambda_min", s.lambda_min)?;
                if !(s.lambda_max >= s.lambda_min) {
                    return Err(Error::usage("sampling.lambda_max must be >= sampling.lambda_min"));
                }
            }
            Operation::Cone => {
                self.geodesic()?;
                let c = self.cone()?;
                if c.direction.len() != model.dim() {
                    return Err(Error::usage(format!("cone.direction needs {} components", model.dim())));
                }
                positive("cone.unit_step", c.unit_step)?;
                if c.rows.is_empty() {
                    return Err(Error::usage("cone.rows must list at least one row"));
                }
                if c.rows.iter().chain(&c.depths).any(|r| !(*r > 0.0 && *r <= c.height)) {
                    return Err(Error::usage("cone.rows and cone.depths must lie in (0, cone.height]"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANK: &str = r#"
operation = "rank"
model = "product(halfspace(2,1),euclidean(1))"
seed = 3
[geodesic]
start = [0.0, 1.0, 0.0]
direction = [1.0, 0.0, 0.0]
"#;

    #[test]
    fn minimal_rank_config() {
        let c = ExperimentConfig::from_toml(RANK).unwrap();
        assert_eq!(c.operation, Operation::Rank);
        assert_eq!(c.geodesic().unwrap().window, 20.0);
        assert_eq!(c.tolerances.rank, 1e-7);
        assert_eq!(c.rank.samples, 201);
    }

    #[test]
    fn diagnostics_name_the_key() {
        let missing = RANK.replace("model = \"product(halfspace(2,1),euclidean(1))\"\n", "");
        let e = ExperimentConfig::from_toml(&missing).unwrap_err().to_string();
        assert!(e.contains("model"), "{e}");

        let unknown = format!("{RANK}bogus = 1\n");
        let e = ExperimentConfig::from_toml(&unknown).unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line"), "{e}");

        let neg = format!("{RANK}[tolerances]\nrank = -1.0\n");
        let e = ExperimentConfig::from_toml(&neg).unwrap_err().to_string();
        assert!(e.contains("tolerances.rank"), "{e}");
    }

    #[test]
    fn schedule_must_increase() {
        let cfg = RANK.replace("\"rank\"", "\"flatten\"") + "[schedule]\nscales = [2.0, 1.0]\n";
        let e = ExperimentConfig::from_toml(&cfg).unwrap_err().to_string();
        assert!(e.contains("schedule"), "{e}");
    }
}
