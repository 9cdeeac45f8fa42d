use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ricci-boundary");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("RICCI_BOUNDARY_PRESETS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{name}.report.json"))).expect("report written");
    serde_json::from_str(&text).expect("valid json")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).expect("csv written").lines().next().unwrap_or_default().to_string()
}

#[test]
fn flow_example_writes_trace_and_einstein_diagnostics() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["flow", "--preset", "sphere-band-n3", "--t-end", "0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "flow");
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["pass"], true);
    assert!(r["tolerance"].as_f64().is_some());
    assert!(r["einstein_rescale"]["relative_error"].as_f64().unwrap() < 1e-3);
    assert!(r["max_bc_mc_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(header(&dir.path().join("flow.trace.csv")), "t,step,node,r,phi,psi,g_rr,g_sphere");
    assert_eq!(
        header(&dir.path().join("flow.diagnostics.csv")),
        "t,ricci_residual,bc_conformal_residual,bc_mc_residual,deturck_norm,h_inner,h_outer,lambda,newton_iterations"
    );
    // the report is also printed
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, r);
}

#[test]
fn complementarity_example_passes_and_duplicated_row_fails() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["complementarity", "--n", "3", "--metric", "euclidean"]);
    assert_eq!(code(&out), 0);
    let r = report(dir.path(), "complementarity");
    assert_eq!(r["pass"], true);
    assert_eq!(r["tolerance"], 1e-6);
    assert!(r["min_sv"].as_f64().unwrap() > 1e-6);

    let out = run_in(
        dir.path(),
        &["complementarity", "--n", "3", "--variant", "duplicated-row", "--name", "dup"],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(report(dir.path(), "dup")["pass"], false);
}

#[test]
fn lambda_of_the_flat_annulus_is_zero() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["lambda", "--preset", "flat-annulus"]);
    assert_eq!(code(&out), 0);
    let r = report(dir.path(), "lambda");
    let tol = r["tolerance"].as_f64().unwrap();
    assert!(r["lambda"].as_f64().unwrap().abs() <= tol);
    assert_eq!(r["expected"], 0.0);
    assert_eq!(r["pass"], true);
    assert_eq!(header(&dir.path().join("lambda.eigenfunction.csv")), "node,r,theta,eigenfunction,minimizer");
}

#[test]
fn identical_specs_give_identical_bytes() {
    let args = [
        "variation-check",
        "--preset",
        "perturbed-band-n3",
        "--seed",
        "7",
        "--count",
        "3",
        "--emit-plot-data",
    ];
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    assert_eq!(code(&run_in(b.path(), &args)), 0);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
    // a different seed changes the data
    let c = TempDir::new().unwrap();
    let mut other = args;
    other[4] = "8";
    run_in(c.path(), &other);
    let csv = "variation-check.variations.csv";
    assert_ne!(fs::read(a.path().join(csv)).unwrap(), fs::read(c.path().join(csv)).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        r#"
command = "flow"
name = "short"

[geometry]
preset = "hyperbolic-band-n3"
nodes = 50

[numerics]
t-end = 0.01
dt = 1e-3
stride = 5
"#,
    )
    .unwrap();
    let args = ["flow", "--config", config.to_str().unwrap(), "--dt", "5e-4"];
    let out = run_in(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "short");
    assert_eq!(r["numerics"]["dt"], 5e-4);
    assert_eq!(r["numerics"]["t-end"], 0.01);
    assert_eq!(r["geometry"]["nodes"], 50);
    assert_eq!(r["steps"], 20);
    // a config for another command is rejected
    let out = run_in(dir.path(), &["lambda", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config is for `flow`"));
    // so are misspelt keys
    fs::write(&config, "[numerics]\ntend = 0.1\n").unwrap();
    assert_eq!(code(&run_in(dir.path(), &["flow", "--config", config.to_str().unwrap()])), 1);
}

#[test]
fn presets_are_found_in_extra_directories() {
    let dir = TempDir::new().unwrap();
    let presets = dir.path().join("presets");
    fs::create_dir(&presets).unwrap();
    let spec = "family = \"sphere\"\ndim = 4\nr_min = 0.5\nr_max = 1.0\nnodes = 80\n";
    fs::write(presets.join("wide-sphere.toml"), spec).unwrap();
    let with_env = |args: &[&str]| {
        Command::new(BIN)
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .env("RICCI_BOUNDARY_PRESETS", std::env::join_paths([dir.path(), &presets]).unwrap())
            .output()
            .unwrap()
    };
    let out = with_env(&["curvature", "--preset", "wide-sphere"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "curvature");
    assert_eq!(r["geometry"]["dim"], 4);
    assert!((r["scalar_exact"].as_f64().unwrap() - 12.0).abs() < 1e-12);
    assert_eq!(r["pass"], true);
    let out = with_env(&["curvature", "--preset", "no-such-preset"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
    // the same file also works directly
    let file = presets.join("wide-sphere.toml");
    let out = run_in(dir.path(), &["curvature", "--geometry-file", file.to_str().unwrap(), "--name", "file"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(dir.path(), "file")["geometry"], r["geometry"]);
}

#[test]
fn plot_data_is_tidy_long_format() {
    let dir = TempDir::new().unwrap();
    let args = ["flow", "--preset", "sphere-band-n3", "--nodes", "40", "--t-end", "0.01", "--emit-plot-data"];
    assert_eq!(code(&run_in(dir.path(), &args)), 0);
    let text = fs::read_to_string(dir.path().join("flow.plot.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "experiment,series,t,r,theta,index,value");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 7 && r[0] == "flow"));
    assert!(rows.iter().all(|r| r[6].parse::<f64>().is_ok()));
    // 101 time levels of five diagnostics, then the final profiles
    assert_eq!(rows.iter().filter(|r| r[1] == "h_outer").count(), 101);
    assert_eq!(rows.iter().filter(|r| r[1] == "psi").count(), 40);
    let plain = TempDir::new().unwrap();
    run_in(plain.path(), &args[..args.len() - 1]);
    assert!(!plain.path().join("flow.plot.csv").exists());
}

#[test]
fn conformal_outputs_carry_the_angle() {
    let dir = TempDir::new().unwrap();
    let args = ["curvature", "--preset", "flat-annulus-2d", "--nodes", "9", "--angular", "8", "--amplitude", "0.3"];
    assert_eq!(code(&run_in(dir.path(), &args)), 0);
    let path = dir.path().join("curvature.curvature.csv");
    assert_eq!(header(&path), "node,r,theta,u,ric_rr,ric_rt,ric_tt,scal");
    assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 1 + 9 * 8);
    // not Einstein once perturbed, so nothing to check
    assert_eq!(report(dir.path(), "curvature")["pass"], Value::Null);
}

#[test]
fn batch_runs_experiments_in_parallel_with_combined_exit_code() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("batch.toml");
    fs::write(
        &file,
        r#"
[[experiment]]
command = "complementarity"

[[experiment]]
command = "complementarity"
name = "dup"
numerics = { variant = "duplicated-row", samples = 20 }

[[experiment]]
command = "lambda"
geometry = { preset = "sphere-band-n3", nodes = 80 }

[[experiment]]
command = "boundary"
geometry = { preset = "flat-annulus-2d", nodes = 9, angular = 8 }
"#,
    )
    .unwrap();
    let parallel = TempDir::new().unwrap();
    let out = run_in(parallel.path(), &["batch", file.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(code(&out), 2);
    let summary = String::from_utf8_lossy(&out.stdout);
    assert_eq!(summary, "PASS complementarity-0\nFAIL dup\nPASS lambda-2\nDONE boundary-3\n");
    let serial = TempDir::new().unwrap();
    run_in(serial.path(), &["batch", file.to_str().unwrap()]);
    for name in ["complementarity-0.report.json", "dup.samples.csv", "lambda-2.eigenfunction.csv", "boundary-3.boundary.csv"] {
        assert_eq!(fs::read(parallel.path().join(name)).unwrap(), fs::read(serial.path().join(name)).unwrap());
    }
    // an erroring experiment dominates
    fs::write(&file, "[[experiment]]\ncommand = \"flow\"\ngeometry = { preset = \"flat-annulus-2d\" }\n").unwrap();
    let out = run_in(dir.path(), &["batch", file.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ERROR flow-0"));
}

#[test]
fn errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cases: [&[&str]; 7] = [
        &["flow", "--preset", "flat-annulus-2d"],
        &["einstein-test", "--preset", "perturbed-band-n3"],
        &["lambda"],
        &["lambda", "--preset", "sphere-band-n3", "--tolerance=-1"],
        &["lambda", "--preset", "sphere-band-n3", "--no-such-flag"],
        &["compat-check", "--preset", "sphere-band-n3", "--order", "2"],
        &["complementarity", "--n", "2", "--metric", "1,2,3,4"],
    ];
    for args in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error"), "{args:?}");
    }
    assert_eq!(code(&run_in(dir.path(), &["lambda", "--preset", "sphere-band-n3", "--name", "../up"])), 1);
}

#[test]
fn check_commands_report_pass_and_tolerance() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, &[&str]); 5] = [
        ("einstein-test", &["einstein-test", "--preset", "sphere-band-n3", "--nodes", "100", "--t-end", "0.02"]),
        ("rescaling-check", &["rescaling-check", "--preset", "perturbed-band-n3", "--nodes", "100", "--t-end", "0.02"]),
        ("compat-check", &["compat-check", "--preset", "hyperbolic-band-n3", "--order", "1"]),
        ("variation-check", &["variation-check", "--preset", "sphere-band-n3", "--count", "2"]),
        ("curvature", &["curvature", "--preset", "hyperbolic-band-n3"]),
    ];
    for (name, args) in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let r = report(dir.path(), name);
        assert_eq!(r["pass"], true, "{name}");
        assert!(r["tolerance"].as_f64().unwrap() > 0.0, "{name}");
        assert_eq!(r["command"], name);
    }
    // a tolerance nobody can meet turns the same run into a check failure
    let out = run_in(dir.path(), &["compat-check", "--preset", "hyperbolic-band-n3", "--order", "1", "--tolerance", "1e-12"]);
    assert_eq!(code(&out), 2);
}
