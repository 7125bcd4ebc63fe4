use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cascade_node::io::read_table;
use cascade_node_cli::plot::{contour_segments, encloses, SweepSlice};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cascade-node"));
    cmd.env_remove("CASCADE_NODE_WORKERS");
    cmd
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn optimal_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/optimal_node.json")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn transfer_with_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimal_config();
    let o = run(dir.path(), &["transfer", "--config", cfg.to_str().unwrap(), "--delay", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("transfer.json"));
    let f = report["F"].as_f64().unwrap();
    assert!((f - 0.993).abs() <= 0.003, "{f}");
    assert!((f - report["beta"].as_f64().unwrap()).abs() < 0.005);
    let combined = read_table(fs::read(dir.path().join("combined.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(
        combined.headers,
        ["t", "sender_tls", "sender_rings", "pulse_intensity", "receiver_tls", "receiver_rings"]
    );
    let sender = fs::read_to_string(dir.path().join("sender.csv")).unwrap();
    assert!(sender.starts_with("t,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3,re_e,im_e,p_tls,p_waveguide_cum\n"));
}

#[test]
fn manifest_lists_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimal_config();
    let o = run(dir.path(), &["transfer", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let manifest = json(&dir.path().join("manifest.json"));
    let listed: BTreeSet<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let on_disk: BTreeSet<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest["command"], "transfer");
    assert_eq!(manifest["tolerances"]["rtol"].as_f64(), Some(1e-10));
    assert_eq!(manifest["config"]["sender"]["kappa"].as_f64(), Some(7.92));
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimal_config();
    let o = run(dir.path(), &["eigen", "--config", cfg.to_str().unwrap(), "--kappa", "6"]);
    assert_eq!(code(&o), 0);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["node"]["kappa"].as_f64(), Some(6.0));
    assert_eq!(manifest["config"]["node"]["j_rates"][1].as_f64(), Some(2.94));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = optimal_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(code(&run(dir.path(), &["transfer", "--config", cfg.to_str().unwrap()])), 0);
        let combined = dir.path().join("combined.csv");
        assert_eq!(
            code(&run(dir.path(), &["plot", "transfer", "--input", combined.to_str().unwrap()])),
            0
        );
    }
    for name in ["transfer.json", "sender.csv", "receiver.csv", "combined.csv", "transfer.svg"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn gaussian_beta_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["beta", "--pulse", "gaussian", "--width", "1"]);
    assert_eq!(code(&o), 0);
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((stdout["beta"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(stdout, json(&dir.path().join("beta.json")));
    let keys: Vec<&str> = stdout.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["beta", "pulse_norm", "t0_star"]);
}

#[test]
fn beta_of_an_emitted_pulse_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimal_config();
    assert_eq!(code(&run(dir.path(), &["emit", "--config", cfg.to_str().unwrap()])), 0);
    let emitted = json(&dir.path().join("emit.json"))["beta"].as_f64().unwrap();
    let pulse = dir.path().join("pulse.csv");
    let o = run(&dir.path().join("b"), &["beta", "--pulse", pulse.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let beta = json(&dir.path().join("b/beta.json"))["beta"].as_f64().unwrap();
    assert!((beta - 0.993).abs() <= 0.002);
    // the file carries the closed-form pulse, emit.json the integrated one
    assert!((beta - emitted).abs() < 1e-6);
}

#[test]
fn self_reversed_drive_is_absorbed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimal_config();
    let o = run(
        dir.path(),
        &["receive", "--config", cfg.to_str().unwrap(), "--self-reversed", "--window", "25", "--samples", "5120"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&dir.path().join("receive.json"))["F"].as_f64().unwrap() >= 0.999);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&run(d, &["emit", "--no-such-flag"])), 1);
    assert_eq!(code(&run(d, &["frobnicate"])), 1);
    // invalid values
    assert_eq!(code(&run(d, &["eigen", "--j", "1,1", "--kappa", "-2"])), 1);
    assert_eq!(code(&run(d, &["eigen", "--j", "1,1"])), 1);
    assert_eq!(code(&run(d, &["sweep", "--n", "2", "--grid", "4", "--ranges", "1:2"])), 1);
    // missing and malformed files
    assert_eq!(code(&run(d, &["eigen", "--config", "/nonexistent/node.json"])), 3);
    let bad = d.join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&run(d, &["eigen", "--config", bad.to_str().unwrap()])), 3);
    // numerical: a pulse with zero norm
    let zero = d.join("zero.csv");
    fs::write(&zero, "t,re_e,im_e\n0,0,0\n1,0,0\n2,0,0\n").unwrap();
    assert_eq!(code(&run(d, &["beta", "--pulse", zero.to_str().unwrap()])), 2);
}

#[test]
fn plots_reject_empty_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let headers_only = dir.path().join("headers.csv");
    fs::write(&headers_only, "t,sender_tls,sender_rings,pulse_intensity,receiver_tls,receiver_rings\n").unwrap();
    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "a,b\n1,2\n3,4\n").unwrap();
    for (kind, file) in [
        ("transfer", &empty),
        ("transfer", &headers_only),
        ("transfer", &wrong),
        ("pulse", &empty),
        ("contour", &wrong),
    ] {
        let o = run(&dir.path().join("out"), &["plot", kind, "--input", file.to_str().unwrap()]);
        assert_eq!(code(&o), 3, "{kind} {}", file.display());
    }
    assert!(!dir.path().join("out/transfer.svg").exists());
}

#[test]
fn contour_at_099_encircles_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["sweep", "--n", "3", "--grid", "21x21x1", "--ranges", "1.5:2.3,2.5:3.4,7.92:7.92"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("sweep.csv");
    let table = read_table(fs::read(&csv).unwrap().as_slice()).unwrap();
    assert_eq!(table.headers, ["J12", "J23", "kappa", "beta"]);
    assert_eq!(table.rows.len(), 441);
    let slice = SweepSlice::from_table(&table, 7.92).unwrap();
    let segments = contour_segments(&slice, 0.99);
    assert!(encloses(&segments, (1.88, 2.94)));
    assert!(!encloses(&segments, (1.55, 3.3)));
    let o = run(dir.path(), &["plot", "contour", "--input", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(dir.path().join("contour.svg")).unwrap();
    assert!(svg.contains(r#"class="level-0.99""#));
}

#[test]
fn coarse_sweep_then_refine() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("CASCADE_NODE_WORKERS", "1")
        .arg("--out")
        .arg(dir.path())
        .args(["sweep", "--n", "3", "--grid", "10x10x10", "--ranges", "0.5:5,0.5:5,2:14"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("manifest.json"))["config"]["workers"].as_u64(), Some(1));
    let summary = json(&dir.path().join("sweep.json"));
    let best: Vec<String> = summary["best_params"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap().to_string())
        .collect();
    let grid_best = summary["best_beta"].as_f64().unwrap();
    let o = run(&dir.path().join("opt"), &["optimize", "--n", "3", "--start", &best.join(",")]);
    assert_eq!(code(&o), 0);
    let report = json(&dir.path().join("opt/optimum.json"));
    let refined = report["best_beta"].as_f64().unwrap();
    assert!(refined >= grid_best - 1e-9);
    assert!((refined - 0.993).abs() <= 0.002, "{refined}");
    let trace = fs::read_to_string(dir.path().join("opt/trace.csv")).unwrap();
    assert!(trace.starts_with("evaluation,J12,J23,kappa,beta,best_beta\n"));
}

#[test]
fn design_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["design-g", "--lambda-nm", "785", "--linewidth-hz", "30e6", "--n-index", "1.8", "--v-eff-um3", "12"],
    );
    assert_eq!(code(&o), 0);
    let g = json(&dir.path().join("design_g.json"))["g"].as_f64().unwrap();
    assert!((g / 7.706760922185897e9 - 1.0).abs() < 1e-9, "{g}");

    let rr = dir.path().join("rr.csv");
    fs::write(&rr, "gap_nm,rate_ghz\n100,40\n200,8\n300,1.5\n400,0.3\n").unwrap();
    let rw = dir.path().join("rw.csv");
    fs::write(&rw, "gap_nm,rate_ghz\n50,200\n150,40\n250,8\n").unwrap();
    let o = run(
        &dir.path().join("gap"),
        &[
            "design-gap",
            "--g",
            &g.to_string(),
            "--ring-ring",
            rr.to_str().unwrap(),
            "--ring-waveguide",
            rw.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = json(&dir.path().join("gap/plan.json"));
    for key in ["j12", "j23", "kappa"] {
        let gap = plan["gaps"][key].as_f64().unwrap();
        let rows = &plan["table_rows_used"][key];
        assert!(rows["lower"]["gap_nm"].as_f64().unwrap() <= gap && gap <= rows["upper"]["gap_nm"].as_f64().unwrap());
    }
    // target beyond the table
    let o = run(
        &dir.path().join("gap2"),
        &["design-gap", "--g-ghz", "50", "--ring-ring", rr.to_str().unwrap(), "--ring-waveguide", rw.to_str().unwrap()],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_passes_on_reference_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = json(&dir.path().join("validate.json"));
    assert_eq!(summary["passed"], true);
    assert!(summary["results"].as_array().unwrap().len() > 30);
}
