//! `report`: consolidated key/value table and plot-ready curves from a bundle.

use std::path::Path;

use serde_json::Value;

use super::output::{read_csv, Bundle, Cell, Table};
use crate::error::{Error, Result};

fn missing(dir: &Path, what: &str) -> Error {
    Error::usage(format!("{}: not a result bundle ({what})", dir.display()))
}

/// Flattens a JSON tree to `a.b.0`-style keys, scalars only.
fn flatten_json(prefix: &str, v: &Value, out: &mut Vec<(String, Cell)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten_json(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten_json(&key(&i.to_string()), v, out)),
        Value::Number(n) => out.push((prefix.into(), n.as_f64().map_or(Cell::Missing, Cell::Num))),
        Value::String(s) => out.push((prefix.into(), Cell::Text(s.clone()))),
        Value::Bool(b) => out.push((prefix.into(), Cell::Bool(*b))),
        Value::Null => out.push((prefix.into(), Cell::Missing)),
    }
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn load(dir: &Path, name: &str) -> Result<Self> {
        let (_, header, rows) = read_csv(&dir.join(name)).map_err(|e| missing(dir, &format!("{name}: {e}")))?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::usage(format!("column `{name}` missing")))?;
        Ok(self.rows.iter().map(|r| r[i].parse::<f64>().ok()).collect())
    }

    /// `(x, y)` pairs with both present, sorted by `x` (stable).
    fn curve(&self, x: &str, y: &str) -> Result<Table> {
        let mut pts: Vec<(f64, f64)> = self
            .col(x)?
            .into_iter()
            .zip(self.col(y)?)
            .filter_map(|(a, b)| Some((a?, b?)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut t = Table::new(&[x, y]);
        for (a, b) in pts {
            t.push(vec![a.into(), b.into()]);
        }
        Ok(t)
    }
}

/// Builds the report files for the bundle in `dir`.
pub fn build_report(dir: &Path) -> Result<Bundle> {
    if !dir.is_dir() {
        return Err(missing(dir, "directory does not exist"));
    }
    let text = std::fs::read_to_string(dir.join("summary.json")).map_err(|_| missing(dir, "no summary.json"))?;
    let summary: Value = serde_json::from_str(&text).map_err(|e| missing(dir, &format!("summary.json: {e}")))?;
    let hash = summary["config_hash"].as_str().ok_or_else(|| missing(dir, "summary.json has no config_hash"))?.to_string();
    let op = summary["operation"].as_str().unwrap_or_default().to_string();

    let mut kv = Vec::new();
    for key in ["operation", "model", "seed", "status"] {
        flatten_json(key, &summary[key], &mut kv);
    }
    flatten_json("results", &summary["results"], &mut kv);
    let mut table = Table::new(&["key", "value"]);
    for (k, v) in kv {
        table.push(vec![k.into(), v]);
    }

    let mut bundle = Bundle::default();
    bundle.add_table("report.csv", &table, &hash);
    match op.as_str() {
        "flatten" => {
            let csv = Csv::load(dir, "flatten.csv")?;
            bundle.add_table("ratio_vs_scale.csv", &csv.curve("scale", "ratio")?, &hash);
            bundle.add_table("delta_vs_scale.csv", &csv.curve("scale", "distortion")?, &hash);
        }
        "variation" => {
            let csv = Csv::load(dir, "variation.csv")?;
            let (scale, t, fd, int) = (csv.col("scale")?, csv.col("t")?, csv.col("d2L_fd")?, csv.col("d2L_int")?);
            let mut rows: Vec<_> = (0..csv.rows.len()).filter_map(|k| Some((scale[k]?, t[k]?, fd[k], int[k]))).collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut out = Table::new(&["scale", "t", "d2L_fd", "d2L_int"]);
            for (s, t, fd, int) in rows {
                out.push(vec![s.into(), t.into(), fd.into(), int.into()]);
            }
            bundle.add_table("d2L_vs_t.csv", &out, &hash);
        }
        "rank" => {
            let csv = Csv::load(dir, "singular_values.csv")?;
            bundle.add_table("sigma_vs_index.csv", &csv.curve("index", "sigma")?, &hash);
        }
        "catzero" => {
            let csv = Csv::load(dir, "four_point.csv")?;
            bundle.add_table("slack_vs_scale.csv", &csv.curve("scale", "slack")?, &hash);
            let csv = Csv::load(dir, "convexity.csv")?;
            bundle.add_table("convexity_vs_scale.csv", &csv.curve("scale", "min_slack")?, &hash);
        }
        "spread" => {
            let csv = Csv::load(dir, "spread.csv")?;
            bundle.add_table("ratio_vs_lambda.csv", &csv.curve("lambda", "ratio")?, &hash);
        }
        "cone" => {
            let csv = Csv::load(dir, "probe_stats.csv")?;
            bundle.add_table("disp_vs_r.csv", &csv.curve("r", "max_disp")?, &hash);
            bundle.add_table("bound_vs_r.csv", &csv.curve("r", "bound")?, &hash);
            if dir.join("pipeline.csv").exists() {
                let csv = Csv::load(dir, "pipeline.csv")?;
                bundle.add_table("ratio_vs_depth.csv", &csv.curve("depth", "ratio")?, &hash);
            }
        }
        other => return Err(missing(dir, &format!("unknown operation `{other}`"))),
    }
    Ok(bundle)
}
