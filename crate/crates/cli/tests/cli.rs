use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn krylov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krylov")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    krylov(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn syk(t_max: f64, count: usize) -> Value {
    json!({
        "sequence": {"kind": "syk_like", "alpha": 1, "eta": 1},
        "evolve": {"t_max": t_max, "samples": {"kind": "uniform", "count": count}}
    })
}

#[test]
fn evolve_writes_the_csv_layout() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &syk(3.0, 30));
    let out = tmp.path().join("out");
    let o = run("evolve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("run.csv")).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,c_k,s_k,phi0,norm_error,active_size");
    assert_eq!(lines.len(), 31);
    let last: Vec<f64> = lines[30].split(',').take(5).map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 3.0);
    // C_K = sinh^2(t) for this family
    assert!((last[1] - 3f64.sinh().powi(2)).abs() < 1e-8 * last[1]);
    assert!(!out.join("run.json").exists());
}

#[test]
fn output_does_not_depend_on_jobs_or_repetition() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = syk(4.0, 41);
    cfg["sweep"] = json!([{"path": "/sequence/eta", "values": [0.5, 1, 2, 4]}]);
    cfg["fit"] = json!({"c_min": 5, "c_max": 1000});
    let cfg = write_config(tmp.path(), "c.json", &cfg);
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, jobs) in dirs.iter().zip(["1", "4", "4"]) {
        let o = run("evolve", &cfg, dir, &["--jobs", jobs, "--format", "both"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let listing = |d: &Path| {
        let mut v: Vec<String> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        v.sort();
        v
    };
    let names = listing(&dirs[0]);
    assert_eq!(names.len(), 4 * 4 + 1);
    for d in &dirs[1..] {
        assert_eq!(listing(d), names);
        for n in names.iter().filter(|n| *n != "manifest.json") {
            assert_eq!(fs::read(dirs[0].join(n)).unwrap(), fs::read(d.join(n)).unwrap(), "{n}");
        }
        assert_eq!(read_json(&dirs[0].join("manifest.json"))["files"], read_json(&d.join("manifest.json"))["files"]);
    }
}

#[test]
fn manifest_checksums_match_the_files() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = syk(4.5, 91);
    cfg["fit"] = json!({"c_min": 10});
    let cfg = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    assert_eq!(code(&run("evolve", &cfg, &out, &["--format", "both"])), 0);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "evolve");
    assert!(manifest["created_unix_seconds"].as_u64().is_some());
    let files = manifest["files"].as_array().unwrap();
    let paths: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(paths, ["run.csv", "run.fit.json", "run.json", "run.svg"]);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"], digest.as_str());
        assert_eq!(f["bytes"], bytes.len());
    }
    // timestamps appear only in the manifest
    for p in ["run.json", "run.fit.json"] {
        let text = fs::read_to_string(out.join(p)).unwrap();
        assert!(!text.contains("unix"), "{p}");
    }
}

#[test]
fn fit_report_and_plot() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = syk(4.5, 91);
    cfg["fit"] = json!({"c_min": 10, "c_max": 2000});
    let cfg = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    assert_eq!(code(&run("evolve", &cfg, &out, &[])), 0);
    let fit = read_json(&out.join("run.fit.json"));
    for key in ["eta_tilde", "intercept", "lnln_coefficient", "window", "rms_residual", "samples"] {
        assert!(fit.get(key).is_some(), "{key}");
    }
    assert!((fit["eta_tilde"].as_f64().unwrap() - 1.0).abs() < 0.03, "{fit}");
    assert!(fit["lnln_coefficient"].is_null());
    let svg = fs::read_to_string(out.join("run.svg")).unwrap();
    assert!(svg.contains(">ln C_K<"));
    assert!(svg.contains(">S_K<"));
    assert!(svg.contains("stroke-dasharray"));

    // refitting the written series reproduces the report
    let refit_cfg = write_config(
        &out,
        "refit.json",
        &json!({"series": ["run.csv"], "fit": {"c_min": 10, "c_max": 2000}}),
    );
    let again = tmp.path().join("again");
    let o = run("fit", &refit_cfg, &again, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&again.join("run.fit.json")), fit);
}

fn synthetic_csv(dir: &Path, slope: f64, cs: impl Iterator<Item = f64>) -> PathBuf {
    let mut text = String::from("t,c_k,s_k,phi0,norm_error,active_size\n");
    for (i, c) in cs.enumerate() {
        text.push_str(&format!("{},{},{},0.0,0.0,64\n", i as f64, c, slope * f64::ln(c) + 0.3));
    }
    let p = dir.join("synthetic.csv");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn bound_violation_exits_3() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 1.5, (0..40).map(|i| 60.0 * 1.3f64.powi(i)));
    let cfg = write_config(tmp.path(), "c.json", &json!({"series": ["synthetic.csv"], "fit": {}}));
    let out = tmp.path().join("out");
    let o = run("fit", &cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let fit = read_json(&out.join("synthetic.fit.json"));
    assert_eq!(fit["bound"]["verdict"], "violates_bound");
}

#[test]
fn empty_fit_window_exits_2() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 0.5, (0..40).map(|i| 1.0 + i as f64));
    let cfg = write_config(tmp.path(), "c.json", &json!({"series": ["synthetic.csv"], "fit": {"c_min": 50}}));
    let o = run("fit", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("window"), "{}", stderr(&o));
}

#[test]
fn resource_limit_exits_5_with_partial_output() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = syk(20.0, 201);
    cfg["evolve"]["max_active_size"] = json!(256);
    let cfg = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    let o = run("evolve", &cfg, &out, &["--format", "json"]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let doc = read_json(&out.join("run.json"));
    assert_eq!(doc["status"]["state"], "resource_limit");
    let n = doc["columns"]["t"].as_array().unwrap().len();
    assert!(n > 1 && n < 201, "{n}");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn schema_errors_carry_json_pointers() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        (json!({"sequence": {"kind": "syk_like", "alpha": 1, "eta": 1}, "evolve": {"t_mx": 3}}), "/evolve"),
        (json!({"sequence": {"kind": "syk_like", "alpha": 1, "eta": -1}}), "/sequence/eta"),
        (json!({"sequence": {"kind": "linear", "alpha": 1, "gamma": 0}, "sweep": []}), "/sweep"),
        (json!({"sequence": {"kind": "linear", "alpha": 1, "gamma": 0}, "sweep": [{"path": "/sequence/alpha", "values": []}]}), "/sweep/0/values"),
        (json!({"sequence": {"kind": "linear", "alpha": 1, "gamma": 0}, "colour": "red"}), "(root)"),
        (json!({"sequence": {"kind": "linear", "alpha": 1, "gamma": 0}, "sweep": [{"path": "/sequence/alpha", "values": [1, -2]}]}), "point-001"),
    ];
    for (doc, pointer) in cases {
        let cfg = write_config(tmp.path(), "c.json", &doc);
        let o = run("evolve", &cfg, &out, &[]);
        assert_eq!(code(&o), 2, "{doc}");
        assert!(stderr(&o).contains(pointer), "{doc}: {}", stderr(&o));
    }
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&krylov(&[])), 2);
    assert_eq!(code(&krylov(&["evolve"])), 2);
    assert_eq!(code(&krylov(&["evolve", "--config", "x.json", "--format", "xml"])), 2);
    assert_eq!(code(&krylov(&["evolve", "--config", "x.json", "--jobs", "0"])), 2);
    assert_eq!(code(&krylov(&["frobnicate", "--config", "x.json"])), 2);
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&run("evolve", &missing, &tmp.path().join("o"), &[])), 2);
}

#[test]
fn moments_round_trip_and_invalid_input() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"moments": {"direction": "to_lanczos", "values": [1, 1, 2, 5, 14]}}),
    );
    assert_eq!(code(&run("moments", &cfg, &out, &[])), 0);
    let doc = read_json(&out.join("run.moments.json"));
    assert_eq!(doc["lanczos_squares"], json!(["1", "1", "1", "1"]));
    assert_eq!(doc["arithmetic"], "exact");

    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"moments": {"direction": "to_moments", "values": [1], "arithmetic": {"mode": "float", "bits": 128}}}),
    );
    assert_eq!(code(&run("moments", &cfg, &out, &[])), 0);
    let doc = read_json(&out.join("run.moments.json"));
    assert_eq!(doc["moments_f64"], json!([1.0, 1.0, 1.0]));
    assert_eq!(doc["arithmetic"], "float128");

    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"moments": {"direction": "to_lanczos", "values": [1, 1, 0.5]}}),
    );
    let o = run("moments", &cfg, &out, &[]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("order 2"), "{}", stderr(&o));
}

#[test]
fn modes_of_finite_and_infinite_chains() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &json!({"sequence": {"kind": "explicit", "coefficients": [1, 1]}}));
    assert_eq!(code(&run("modes", &cfg, &out, &[])), 0);
    let doc = read_json(&out.join("run.modes.json"));
    // K = 3 sites, b = (1, 1): phi0 = 1/2 + cos(sqrt(2) t)/2
    let d = &doc["decomposition"];
    assert!((d["zero_mode_weight"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((d["modes"][0]["omega"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);

    let cfg = write_config(tmp.path(), "c.json", &json!({"sequence": {"kind": "linear", "alpha": 1, "gamma": 0}}));
    let o = run("modes", &cfg, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("finite"));
}

#[test]
fn wnumber_verdicts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({
            "sequence": {"kind": "explicit", "coefficients": [1, 1]},
            "sweep": [{"path": "/sequence/coefficients", "values": [[1, 1], [1, 1, 1]]}],
            "wnumber": {"depth": 64}
        }),
    );
    assert_eq!(code(&run("wnumber", &cfg, &out, &[])), 0);
    // a zero mode (odd site count) makes W infinite; an even chain gives zero
    assert_eq!(read_json(&out.join("point-000.w.json"))["verdict"]["verdict"], "infinite");
    assert_eq!(read_json(&out.join("point-001.w.json"))["verdict"]["verdict"], "zero");
}

#[test]
fn documented_examples_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs");
    let schema: Value = read_json(&root.join("config.schema.json"));
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(root.join("examples")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let doc = read_json(&path);
            if let Err(errors) = compiled.validate(&doc) {
                let msgs: Vec<String> = errors.map(|e| format!("{}: {e}", e.instance_path)).collect();
                panic!("{}: {msgs:?}", path.display());
            }
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
