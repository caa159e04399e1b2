use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flatrank"))
}

fn run_config(dir: &Path, name: &str, toml: &str, extra: &[&str]) -> (Output, std::path::PathBuf) {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, toml).unwrap();
    let out = dir.join(name);
    let o = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap();
    (o, out)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const RANK_H2XR: &str = r#"
operation = "rank"
model = "product(halfspace(2,1),euclidean(1))"
seed = 11
[geodesic]
start = [0.0, 1.0, 0.0]
direction = [1.0, 0.0, 0.0]
"#;

const FLATTEN_H2: &str = r#"
operation = "flatten"
model = "halfspace(2,1)"
seed = 5
[geodesic]
start = [0.0, 1.0]
direction = [0.3, 1.0]
window = 4.0
[schedule]
scales = [1.0, 2.0, 4.0]
[flatten]
search = false
"#;

#[test]
fn rank_run_reports_rank_two_and_hashes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run_config(tmp.path(), "rank", RANK_H2XR, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["results"]["rank"], 2);
    assert_eq!(s["results"]["jacobi_consistent"], true);
    assert_eq!(s["seed"], 11);
    let hash = s["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let csv = fs::read_to_string(out.join("singular_values.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert_eq!(csv.lines().nth(1).unwrap(), "index,sigma,kept");
    // kernel along the R factor: the normal frame is (E_2, E_3) = (y∂_y, ∂_z)
    let k = &s["results"]["kernel_basis"][0];
    assert!(k[0].as_f64().unwrap().abs() < 1e-8 && (k[1].as_f64().unwrap().abs() - 1.0).abs() < 1e-8, "{k}");
}

#[test]
fn flatten_on_hyperbolic_plane_is_non_flattening_and_reports_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run_config(tmp.path(), "flat", FLATTEN_H2, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["results"]["verdict"], "non-flattening");

    let r = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let curve = fs::read_to_string(out.join("ratio_vs_scale.csv")).unwrap();
    let mut lines = curve.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "scale,ratio");
    let xs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs, [1.0, 2.0, 4.0]);
    assert!(out.join("delta_vs_scale.csv").exists() && out.join("report.csv").exists());
}

#[test]
fn variation_report_puts_both_second_derivatives_side_by_side() {
    let cfg = r#"
operation = "variation"
model = "product(halfspace(2,1),euclidean(1))"
[geodesic]
start = [0.0, 1.0, 0.0]
direction = [0.0, 1.0, 0.0]
[schedule]
scales = [1.0, 2.0]
[flatten]
normal = [0.0, 0.0, 1.0]
"#;
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run_config(tmp.path(), "var", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["results"]["verdict"], "flattening");
    assert!(s["results"]["facts"].as_array().unwrap().iter().all(|f| f["passed"] == true));
    assert_eq!(bin().arg("report").arg(&out).status().unwrap().code(), Some(0));
    let text = fs::read_to_string(out.join("d2L_vs_t.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "scale,t,d2L_fd,d2L_int");
}

#[test]
fn malformed_config_exits_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = RANK_H2XR.replace("model = \"product(halfspace(2,1),euclidean(1))\"\n", "");
    let (o, out) = run_config(tmp.path(), "bad", &bad, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model"));
    assert!(!out.exists());

    let typo = RANK_H2XR.replace("seed", "sead");
    let (o, out) = run_config(tmp.path(), "typo", &typo, &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sead") && err.contains("line"), "{err}");
    assert!(!out.exists());

    let (o, _) = run_config(tmp.path(), "badmodel", &RANK_H2XR.replace("euclidean(1)", "torus(1)"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_rejects_missing_and_empty_bundles() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bin().arg("report").arg(tmp.path()).status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("report").arg(tmp.path().join("nope")).status().unwrap().code(), Some(1));
}

#[test]
fn reruns_are_byte_identical_and_overrides_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
operation = "catzero"
model = "halfspace(2,1)"
seed = 1
[sampling]
count = 12
convexity_count = 6
"#;
    let (a, out_a) = run_config(tmp.path(), "a", cfg, &[]);
    let (b, out_b) = run_config(tmp.path(), "b", cfg, &[]);
    assert_eq!((a.status.code(), b.status.code()), (Some(0), Some(0)));
    for f in ["four_point.csv", "convexity.csv", "summary.json"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap(), "{f}");
    }
    let (c, out_c) = run_config(tmp.path(), "c", cfg, &["--seed", "9", "--tol", "1e-9", "--threads", "1"]);
    assert_eq!(c.status.code(), Some(0));
    let s = summary(&out_c);
    assert_eq!(s["seed"], 9);
    assert_eq!(s["config"]["tolerances"]["integrator"], 1e-9);
    assert_ne!(s["config_hash"], summary(&out_a)["config_hash"]);
}

#[test]
fn sphere_catzero_is_not_a_consistency_failure_but_flags_violations() {
    let cfg = r#"
operation = "catzero"
model = "sphere(2,1)"
[sampling]
count = 200
convexity_count = 50
radius = 1.4
"#;
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run_config(tmp.path(), "s2", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["results"]["npc"], false);
    for k in ["four_point_violations", "parallelogram_violations", "convexity_violations"] {
        assert!(s["results"][k].as_u64().unwrap() > 0, "{k}");
    }
}

#[test]
fn spread_and_cone_runs_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let spread = "operation = \"spread\"\nmodel = \"hyperbolic(2)\"\n[sampling]\ncount = 8\n";
    let (o, out) = run_config(tmp.path(), "spread", spread, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(summary(&out)["results"]["min_ratio"].as_f64().unwrap() >= 2f64.sqrt() - 1e-6);

    let cone = r#"
operation = "cone"
model = "euclidean(2)"
[geodesic]
start = [0.0, 0.0]
direction = [1.0, 0.0]
[cone]
kind = "perturbed"
direction = [0.0, 1.0]
x_min = -4.0
x_max = 24.0
height = 4.0
rows = [1.0, 2.0, 3.0]
depths = [2.0, 4.0]
"#;
    let (o, out) = run_config(tmp.path(), "cone", cone, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("probe_stats.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "r,max_disp,bound,pair_index,pair_step_disp");
    assert_eq!(text.lines().count(), 5);
    assert!(out.join("pipeline.csv").exists());
    assert_eq!(bin().arg("report").arg(&out).status().unwrap().code(), Some(0));
    assert!(out.join("ratio_vs_depth.csv").exists());
}

#[test]
fn list_models_and_self_test() {
    let o = bin().arg("list-models").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("polynomial-convex"));

    let tmp = tempfile::tempdir().unwrap();
    let o = bin().args(["self-test", "--seed", "3", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(fs::read(tmp.path().join("self_test.csv")).unwrap(), o.stdout);
}

#[test]
fn run_without_config_or_output_is_a_usage_error() {
    assert_eq!(bin().arg("run").status().unwrap().code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, RANK_H2XR).unwrap();
    assert_eq!(bin().arg("run").arg("--config").arg(&cfg).status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("frobnicate").status().unwrap().code(), Some(1));
}
