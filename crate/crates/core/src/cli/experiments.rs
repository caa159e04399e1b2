//! The six experiment kinds behind `run`.

use serde_json::{json, Value};

use super::config::{ExperimentConfig, FlatKind, Operation};
use super::output::{fmt_num, round_sig, Table};
use crate::catzero::{convexity_batch, four_point_batch, spread_batch};
use crate::conescale::{
    flat_grid_embed, modify_tuple_pipeline, projection_scan_rows, raw_tuple_at_depth, FlatGridSpec, GridExtent,
};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_window, BvpOptions, ProjectionOptions};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::ode::StepControl;
use crate::quadprobe::{fact_suite, flattening_probe, variation_scan, ProbeOptions, VariationOptions};
use crate::rank::{geodesic_rank, verify_rank_by_jacobi};
use crate::sampling::{rng_for, random_unit_normal};

/// How a run ended once its outputs exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    Consistency(String),
    Solver(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Consistency(_) => "consistency-failure",
            Status::Solver(_) => "solver-failure",
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Status::Ok => None,
            Status::Consistency(m) | Status::Solver(m) => Some(m),
        }
    }

    /// Keeps the first problem; consistency failures outrank solver failures.
    fn merge(&mut self, other: Status) {
        match (&*self, &other) {
            (Status::Ok, _) | (Status::Solver(_), Status::Consistency(_)) => *self = other,
            _ => {}
        }
    }
}

pub struct Outcome {
    pub tables: Vec<(&'static str, Table)>,
    pub results: Value,
    pub status: Status,
}

/// JSON number at the printed precision; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::String(fmt_num(x))
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

struct Settings {
    step: StepControl<f64>,
    bvp: BvpOptions<f64>,
}

impl Settings {
    fn new(cfg: &ExperimentConfig) -> Self {
        let step = StepControl::with_tolerance(cfg.tolerances.integrator);
        Self { step, bvp: BvpOptions { tol: cfg.tolerances.bvp, ..BvpOptions::with_step(step) } }
    }
}

fn start_vector(model: &Model<f64>, cfg: &ExperimentConfig) -> Result<TangentVec<f64>> {
    let g = cfg.geodesic()?;
    let v = TangentVec::new(ChartPoint::new(g.start.clone()), g.direction.clone())?;
    model.normalize(&v).map_err(|e| Error::usage(format!("geodesic.direction: {e}")))
}

/// Component of `c` orthogonal to `v`, normalised.
fn unit_normal(model: &Model<f64>, v: &TangentVec<f64>, c: &[f64], key: &str) -> Result<TangentVec<f64>> {
    let x = &v.base.coords;
    let proj = model.inner(x, c, &v.components) / model.inner(x, &v.components, &v.components);
    let w: Vec<f64> = c.iter().zip(&v.components).map(|(a, b)| a - proj * b).collect();
    let n = model.norm(x, &w);
    if !(n > 1e-9) {
        return Err(Error::usage(format!("{key} is parallel to the geodesic")));
    }
    TangentVec::new(v.base.clone(), w.iter().map(|a| a / n).collect())
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.parsed_model()?;
    let s = Settings::new(cfg);
    match cfg.operation {
        Operation::Rank => rank(&model, cfg, &s),
        Operation::Flatten => flatten(&model, cfg, &s),
        Operation::Variation => variation(&model, cfg, &s),
        Operation::Catzero => catzero(&model, cfg, &s),
        Operation::Spread => spread(&model, cfg, &s),
        Operation::Cone => cone(&model, cfg, &s),
    }
}

fn rank(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let v0 = start_vector(model, cfg)?;
    let window = cfg.geodesic()?.window;
    let (path, _, report) = geodesic_rank(model, &v0, window, cfg.rank.samples, cfg.tolerances.rank, &s.step)?;
    let check = verify_rank_by_jacobi(model, &path, &report)?;

    let threshold = report.tol_used * report.singular_values.first().copied().unwrap_or(0.0);
    let mut t = Table::new(&["index", "sigma", "kept"]);
    for (i, &sv) in report.singular_values.iter().enumerate() {
        t.push(vec![i.into(), sv.into(), (sv > threshold).into()]);
    }
    let status = match check.ensure_consistent() {
        Ok(()) => Status::Ok,
        Err(e) => Status::Consistency(e.to_string()),
    };
    let results = json!({
        "rank": report.rank,
        "rank_status": report.status,
        "window": num(window),
        "samples": cfg.rank.samples,
        "tol": num(report.tol_used),
        "gap": report.gap.map(num),
        "kernel_basis": report.kernel_basis.iter().map(|k| nums(k)).collect::<Vec<_>>(),
        "singular_values": nums(&report.singular_values),
        "jacobi_consistent": check.consistent,
        "speed_defect": num(path.speed_defect(model)),
    });
    Ok(Outcome { tables: vec![("singular_values.csv", t)], results, status })
}

fn probe(
    model: &Model<f64>,
    cfg: &ExperimentConfig,
    s: &Settings,
    search: bool,
) -> Result<(crate::geometry::GeodesicPath<f64>, crate::quadprobe::FlatteningReport<f64>)> {
    let v0 = start_vector(model, cfg)?;
    let scales = cfg.scales()?;
    let window = cfg.geodesic()?.window.max(*scales.last().expect("validated schedule"));
    let path = geodesic_window(model, &v0, 0.0, window, &s.step)?;
    let u = match &cfg.flatten.normal {
        Some(c) => unit_normal(model, &v0, c, "flatten.normal")?,
        None => random_unit_normal(model, &v0.base, &v0.components, &mut rng_for(cfg.seed, 0)),
    };
    let opts = ProbeOptions {
        bvp: s.bvp,
        search,
        delta_flat: cfg.tolerances.delta_flat,
        delta_min: cfg.tolerances.delta_min,
        refine_evals: cfg.flatten.refine_evals,
        ..ProbeOptions::default()
    };
    let report = flattening_probe(model, &path, 0.0, &scales, &u, &opts)?;
    Ok((path, report))
}

fn entry_status(report: &crate::quadprobe::FlatteningReport<f64>) -> Status {
    match report.entries.iter().find_map(|e| e.error.as_ref().map(|m| (e.scale, m))) {
        Some((scale, m)) => Status::Solver(format!("scale {scale}: {m}")),
        None => Status::Ok,
    }
}

fn flatten(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let (_, report) = probe(model, cfg, s, cfg.flatten.search)?;
    let mut t = Table::new(&["index", "scale", "ratio", "distortion", "evaluations", "error"]);
    for (i, e) in report.entries.iter().enumerate() {
        t.push(vec![i.into(), e.scale.into(), e.ratio().into(), e.distortion().into(), e.evaluations.into(), e.error.clone().into()]);
    }
    let results = json!({
        "verdict": report.verdict,
        "searched": report.searched,
        "delta_flat": num(report.delta_flat),
        "delta_min": num(report.delta_min),
        "scales": nums(&report.scales()),
        "ratios": nums(&report.ratios()),
        "distortions": nums(&report.distortions()),
    });
    Ok(Outcome { tables: vec![("flatten.csv", t)], results, status: entry_status(&report) })
}

fn variation(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let (_, report) = probe(model, cfg, s, cfg.variation.search)?;
    let mut status = entry_status(&report);
    let vopts = VariationOptions { bvp: s.bvp, n_t: cfg.variation.n_t, n_s: cfg.variation.n_s };
    let mut scans = Vec::new();
    for e in &report.entries {
        if let Some(tuple) = &e.tuple {
            match variation_scan(model, tuple, &vopts) {
                Ok(scan) => scans.push(scan),
                Err(err) if err.is_solver_failure() => status.merge(Status::Solver(format!("scale {}: {err}", e.scale))),
                Err(err) => return Err(err),
            }
        }
    }

    let mut t = Table::new(&["scale", "t", "length", "d2L_fd", "d2L_int", "x_norm_max"]);
    let mut per_scale = Vec::new();
    for sc in &scans {
        for k in 0..sc.t.len() {
            t.push(vec![sc.scale.into(), sc.t[k].into(), sc.lengths[k].into(), sc.d2l_fd[k].into(), sc.d2l_int[k].into(), sc.x_norm_max[k].into()]);
        }
        let rel = sc
            .interior_rows()
            .iter()
            .map(|&k| (sc.d2l_fd[k] - sc.d2l_int[k]).abs() / sc.d2l_fd[k].abs().max(sc.d2l_int[k].abs()).max(1e-8))
            .fold(0.0, f64::max);
        let second_diff = sc.lengths.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min);
        per_scale.push(json!({
            "scale": num(sc.scale),
            "dl0": num(sc.dl0),
            "dl0_formula": num(sc.dl0_formula),
            "d2l_max_relative_gap": num(rel),
            "min_length_second_difference": num(second_diff),
            "failed_rows": sc.failures.len(),
        }));
        if !sc.failures.is_empty() {
            status.merge(Status::Solver(format!("scale {}: {} connecting geodesics failed", sc.scale, sc.failures.len())));
        }
    }

    let facts = if report.verdict == crate::quadprobe::Verdict::Flattening && scans.len() == report.entries.len() {
        let f = fact_suite(&report, &scans)?;
        if !f.all_passed() {
            let failed: Vec<_> = f.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            status.merge(Status::Consistency(format!("fact checks failed on a flattening probe: {}", failed.join(", "))));
        }
        Value::Array(
            f.checks
                .iter()
                .map(|c| json!({"name": c.name, "passed": c.passed, "values": nums(&c.values), "threshold": num(c.threshold)}))
                .collect(),
        )
    } else {
        Value::Null
    };
    let results = json!({
        "verdict": report.verdict,
        "ratios": nums(&report.ratios()),
        "scans": per_scale,
        "facts": facts,
    });
    Ok(Outcome { tables: vec![("variation.csv", t)], results, status })
}

/// Pass thresholds for the CAT(0) checkers.
const SLACK_FLOOR: f64 = -1e-8;
const RATIO_CEIL: f64 = 1.0 + 1e-6;

fn catzero(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let sm = &cfg.sampling;
    let fours = four_point_batch(model, sm.count, cfg.seed, sm.radius, &s.bvp)?;
    let convex = convexity_batch(model, sm.convexity_count, cfg.seed ^ 0x5eed, sm.radius, &sm.convexity_t, &s.bvp)?;

    let mut t4 = Table::new(&["index", "slack", "parallelogram_ratio", "scale"]);
    let (mut min_slack, mut max_ratio, mut bad4, mut badp) = (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0usize);
    for (i, f) in fours.iter().enumerate() {
        let slack = f.slack();
        let ratio = f.parallelogram_ratio().ok();
        min_slack = min_slack.min(slack);
        bad4 += usize::from(slack < SLACK_FLOOR);
        if let Some(r) = ratio {
            max_ratio = max_ratio.max(r);
            badp += usize::from(r > RATIO_CEIL);
        }
        t4.push(vec![i.into(), slack.into(), ratio.into(), f.scale().into()]);
    }
    let mut tc = Table::new(&["index", "min_slack", "t_at_min", "scale"]);
    let (mut min_conv, mut badc) = (f64::INFINITY, 0usize);
    for (i, c) in convex.iter().enumerate() {
        min_conv = min_conv.min(c.min_slack);
        badc += usize::from(c.min_slack < SLACK_FLOOR);
        tc.push(vec![i.into(), c.min_slack.into(), c.t_at_min.into(), c.scale.into()]);
    }
    let violations = bad4 + badp + badc;
    let status = if model.is_npc() && violations > 0 {
        Status::Consistency(format!("{violations} CAT(0) inequality violations on a non-positively curved model"))
    } else {
        Status::Ok
    };
    let results = json!({
        "npc": model.is_npc(),
        "min_four_point_slack": num(min_slack),
        "max_parallelogram_ratio": num(max_ratio),
        "min_convexity_slack": num(min_conv),
        "four_point_violations": bad4,
        "parallelogram_violations": badp,
        "convexity_violations": badc,
    });
    Ok(Outcome { tables: vec![("four_point.csv", t4), ("convexity.csv", tc)], results, status })
}

fn spread(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let sm = &cfg.sampling;
    let reps = spread_batch(model, sm.count, cfg.seed, sm.radius, (sm.lambda_min, sm.lambda_max), &s.bvp)?;
    let floor = std::f64::consts::SQRT_2 - 1e-6;
    let mut t = Table::new(&["index", "lambda", "ratio", "margin_1", "margin_2", "margin_3", "strict"]);
    let (mut min_ratio, mut bad, mut degenerate) = (f64::INFINITY, 0usize, 0usize);
    for (i, r) in reps.iter().enumerate() {
        min_ratio = min_ratio.min(r.ratio);
        bad += usize::from(r.ratio < floor);
        degenerate += usize::from(!r.strict);
        let m = r.triangle_margins;
        t.push(vec![i.into(), r.lambda.into(), r.ratio.into(), m[0].into(), m[1].into(), m[2].into(), r.strict.into()]);
    }
    let status = if model.is_npc() && bad > 0 {
        Status::Consistency(format!("{bad} spreads below sqrt(2) on a non-positively curved model"))
    } else {
        Status::Ok
    };
    let results = json!({
        "npc": model.is_npc(),
        "min_ratio": num(min_ratio),
        "violations": bad,
        "degenerate_triangles": degenerate,
    });
    Ok(Outcome { tables: vec![("spread.csv", t)], results, status })
}

fn cone(model: &Model<f64>, cfg: &ExperimentConfig, s: &Settings) -> Result<Outcome> {
    let c = cfg.cone()?;
    let v0 = start_vector(model, cfg)?;
    let dir = unit_normal(model, &v0, &c.direction, "cone.direction")?;
    let spec = match c.kind {
        FlatKind::ProductFlat => FlatGridSpec::ProductFlat { geodesic: v0, direction: dir },
        FlatKind::Perturbed => FlatGridSpec::Perturbed {
            geodesic: v0,
            direction: dir,
            amplitude: c.amplitude,
            seed: c.perturbation_seed.unwrap_or(cfg.seed),
        },
    };
    let extent = GridExtent { x_min: c.x_min, x_max: c.x_max, height: c.height, spacing: c.spacing };
    let grid = flat_grid_embed(model, &spec, extent, c.pair_budget, &s.bvp)?;
    let popts = ProjectionOptions { bvp: s.bvp, ..ProjectionOptions::default() };
    let stats = projection_scan_rows(model, &grid, &c.rows, c.unit_step, &popts)?;

    let mut status = Status::Ok;
    let mut t = Table::new(&["r", "max_disp", "bound", "pair_index", "pair_step_disp"]);
    let mut rows = Vec::new();
    for st in &stats {
        t.push(vec![st.r.into(), st.max_disp.into(), st.bound.into(), st.pair_index.into(), st.pair_step_disp.into()]);
        rows.push(json!({
            "r": num(st.r),
            "bound_holds": st.bound_holds,
            "k_bound": st.k_bound,
            "within_k_bound": st.within_k_bound,
            "conclusive": st.conclusive,
            "required_length": num(st.required_length),
            "clipped_columns": st.clipped.len(),
            "failed_columns": st.failures.len(),
        }));
        if !st.bound_holds {
            status.merge(Status::Consistency(format!("displacement bound violated on row {}", st.r)));
        }
        if st.conclusive && !st.within_k_bound {
            status.merge(Status::Consistency(format!("no qualifying pair within the k-bound on row {}", st.r)));
        }
        if let Some((x, m)) = st.failures.first() {
            status.merge(Status::Solver(format!("projection failed at x = {x} on row {}: {m}", st.r)));
        }
    }

    let mut tp = Table::new(&["j", "depth", "d_ab", "d_p1q1", "step1_bound", "ratio", "ratio_bound", "ratio_ok", "good"]);
    let mut prev: Option<f64> = None;
    let mut monotone = true;
    for &j in &c.depths {
        let (raw, _) = raw_tuple_at_depth(model, &grid, j, c.unit_step, &popts)?;
        let p = modify_tuple_pipeline(model, &grid.base_path, &raw, grid.c, &popts)?;
        tp.push(vec![
            j.into(),
            p.depth.into(),
            p.d_ab.into(),
            p.d_p1q1.into(),
            p.step1_bound.into(),
            p.ratio.into(),
            p.ratio_bound.into(),
            p.ratio_ok.into(),
            p.good.into(),
        ]);
        let dev = (p.ratio - 1.0).abs();
        if prev.is_some_and(|d| dev > d + 1e-6) {
            monotone = false;
        }
        prev = Some(dev);
        if !(p.ratio_ok && p.step1_ok && p.lower_ok && p.good) {
            status.merge(Status::Consistency(format!("modified tuple at depth {j} violates the pipeline bounds")));
        }
    }
    if !monotone {
        status.merge(Status::Consistency("pipeline ratios are not monotone toward 1".into()));
    }
    let results = json!({
        "c": num(grid.c),
        "pairs_measured": grid.pairs_measured,
        "exhaustive": grid.exhaustive,
        "rows": rows,
        "pipeline_monotone": monotone,
    });
    let mut tables = vec![("probe_stats.csv", t)];
    if !c.depths.is_empty() {
        tables.push(("pipeline.csv", tp));
    }
    Ok(Outcome { tables, results, status })
}
