use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn periwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_periwave")).args(args).env_remove("PERIWAVE_THREADS").output().unwrap()
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    periwave(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn assert_metadata(v: &Value) {
    assert_eq!(v["tool"], "periwave");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn odd_node_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--preset", "kdv-cnoidal", "--override", "grid.N=255"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid.N"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_and_bad_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), &["certify"])), 1);
    assert_eq!(code(&run_in(dir.path(), &["solve", "--preset", "no-such-preset"])), 1);
    let o = run_in(dir.path(), &["solve", "--preset", "ilw", "--override", "solve.gues.k=0.5"]);
    assert_eq!(code(&o), 1);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&run_in(dir.path(), &["solve", "--config", cfg.to_str().unwrap()])), 1);
    // a closed-form guess that does not match the equation
    let o = run_in(dir.path(), &["solve", "--preset", "bo", "--override", "solve.guess={\"kind\":\"cnoidal\",\"k\":0.5}"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--preset", "kdv-cnoidal", "--override", "solve.max_iter=1",
        "--override", "solve.guess={\"kind\":\"cosine\",\"omega\":0.5,\"base\":0.0,\"amplitude\":2.0}"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("Newton"));
}

#[test]
fn cnoidal_solve_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--preset", "kdv-cnoidal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let residual = num(stdout(&o).split_whitespace().nth(1).unwrap());
    assert!(residual < 1e-9);
    let sidecar = json(&dir.path().join("wave.json"));
    assert_metadata(&sidecar);
    assert_eq!(sidecar["N"], 256);
    let report = json(&dir.path().join("solve.json"));
    assert_metadata(&report);
    assert!(report["wave"]["residual_norm"].as_f64().unwrap() < 1e-9);
}

#[test]
fn ilw_wave_file_is_even() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--preset", "ilw"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("wave.csv"));
    assert_eq!(header, ["x", "u"]);
    let u: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    let n = u.len();
    for j in 1..n {
        assert!((u[j] - u[n - j]).abs() < 1e-12);
    }
}

#[test]
fn cnoidal_certify_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["certify", "--preset", "kdv-cnoidal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("orbitally_stable"));
    let c = json(&dir.path().join("certify.json"));
    assert_metadata(&c);
    let cert = &c["certification"];
    assert_eq!(cert["verdict"]["conclusion"], "orbitally_stable");
    assert!(cert["verdict"]["fired_criterion"].is_string());
    assert_eq!(cert["spectral"]["n_neg"], 1);
    assert_eq!(cert["spectral"]["h0_pass"], true);
    assert!(cert["h2"]["c3"].as_f64().unwrap() > 0.0);
    assert_eq!(cert["hamiltonian"]["k_r"], 0);
    let (header, rows) = csv_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(header, ["index", "eigenvalue"]);
    assert_eq!(rows.len(), 256);
}

#[test]
fn ilw_and_regularized_certify_stable() {
    for preset in ["ilw", "regularized-bbm-like", "bo", "gkdv-p"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_in(dir.path(), &["certify", "--preset", preset]);
        assert_eq!(code(&o), 0, "{preset}: {}", stderr(&o));
        let c = json(&dir.path().join("certify.json"));
        assert_eq!(c["certification"]["verdict"]["conclusion"], "orbitally_stable", "{preset}");
    }
}

#[test]
fn constant_state_input_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--preset", "kdv-cnoidal", "--override", "grid.N=32"]);
    assert_eq!(code(&o), 0);
    // replace the profile by a constant that solves the profile equation
    let c = 0.2;
    let omega = 1.0;
    let mut sidecar = json(&dir.path().join("wave.json"));
    sidecar["omega"] = omega.into();
    sidecar["A"] = (c * c / 2.0 - omega * c).into();
    std::fs::write(dir.path().join("flat.json"), sidecar.to_string()).unwrap();
    let (_, rows) = csv_rows(&dir.path().join("wave.csv"));
    let mut csv = String::from("x,u\n");
    for r in rows {
        csv.push_str(&format!("{},{c}\n", r[0]));
    }
    std::fs::write(dir.path().join("flat.csv"), csv).unwrap();

    let out = dir.path().join("certify");
    let wave = dir.path().join("flat.json");
    let o = run_in(&out, &["certify", "--wave", wave.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let v = json(&out.join("certify.json"));
    assert_eq!(v["certification"]["spectral"]["h0_pass"], false);
    assert_eq!(v["certification"]["verdict"]["conclusion"], "inconclusive");
}

#[test]
fn certify_from_wave_file_matches_certify_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(code(&run_in(&a, &["certify", "--preset", "ilw", "--override", "grid.N=64"])), 0);
    let b = dir.path().join("b");
    let wave = a.join("wave.csv");
    assert_eq!(code(&run_in(&b, &["certify", "--wave", wave.to_str().unwrap()])), 0);
    let (va, vb) = (json(&a.join("certify.json")), json(&b.join("certify.json")));
    assert_eq!(va["certification"]["verdict"], vb["certification"]["verdict"]);
    assert_ne!(va["config_hash"], vb["config_hash"]);
}

#[test]
fn cnoidal_sweep_is_stable_with_negative_curve_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sweep", "--preset", "kdv-cnoidal", "--override", "grid.N=128"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("family.csv"));
    assert_eq!(header, ["xi", "omega", "A", "M", "F", "verdict", "curve_value"]);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[5] == "orbitally_stable"));
    let f: Vec<f64> = rows.iter().map(|r| num(&r[4])).collect();
    assert!(f.windows(2).all(|w| w[1] > w[0]), "F not increasing: {f:?}");
    let curve: Vec<f64> = rows.iter().filter(|r| !r[6].is_empty()).map(|r| num(&r[6])).collect();
    assert_eq!(curve.len(), 8);
    assert!(curve.iter().all(|&c| c < 0.0));
    let s = json(&dir.path().join("sweep.json"));
    assert_metadata(&s);
    assert_eq!(s["completed"], 10);
    assert!(s["failure"].is_null());
    assert!(dir.path().join("family/member_009.json").exists());
}

#[test]
fn single_point_sweep_matches_certify() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("sweep"), dir.path().join("certify"));
    let common = ["--preset", "ilw", "--override", "grid.N=64", "--override", "sweep.count=1"];
    let mut sweep_args = vec!["sweep"];
    sweep_args.extend(common);
    let mut certify_args = vec!["certify"];
    certify_args.extend(common);
    assert_eq!(code(&run_in(&a, &sweep_args)), 0);
    assert_eq!(code(&run_in(&b, &certify_args)), 0);
    let s = json(&a.join("sweep.json"));
    let c = json(&b.join("certify.json"));
    assert_eq!(s["members"].as_array().unwrap().len(), 1);
    let (vs, vc) = (&s["members"][0]["verdict"], &c["certification"]["verdict"]);
    // the sweep skips the Hamiltonian spectrum, so k_r is not filled in there
    for key in ["conclusion", "fired_criterion", "criteria", "delta_witness", "mu_nu", "prerequisites"] {
        assert_eq!(vs[key], vc[key], "{key}");
    }
}

#[test]
fn failing_sweep_flushes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sweep", "--preset", "bo", "--override", "sweep.range=[0, 0.2]"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let s = json(&dir.path().join("sweep.json"));
    assert_eq!(s["requested"], 5);
    let done = s["completed"].as_u64().unwrap();
    assert!(done < 5);
    assert!(s["failure"].is_string());
    let (_, rows) = csv_rows(&dir.path().join("family.csv"));
    assert_eq!(rows.len() as u64, done);
}

#[test]
fn zero_amplitude_stays_on_the_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["evolve", "--preset", "kdv-cnoidal", "--override", "grid.N=128",
        "--override", "evolve.T=5", "--override", "evolve.amplitudes=[0]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("trace_00.csv"));
    assert_eq!(header, ["t", "d_orbit", "r_star", "P", "F", "M", "V"]);
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| num(&r[1]) < 1e-6));
    let e = json(&dir.path().join("evolve.json"));
    assert!(e["results"][0]["sup_ratio"].is_null());
}

#[test]
fn stable_evolution_conserves_and_logs_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["evolve", "--preset", "kdv-cnoidal", "--override", "evolve.T=10",
        "--override", "evolve.convergence_check=true"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("dt-halving error ratio"));
    let e = json(&dir.path().join("evolve.json"));
    assert_metadata(&e);
    let r = &e["results"][0];
    for key in ["drift_p", "drift_f", "drift_m"] {
        assert!(r[key].as_f64().unwrap() < 1e-7, "{key}: {}", r[key]);
    }
    assert!(r["drift_v"].as_f64().unwrap() < 1e-8);
    assert!(r["sup_ratio"].as_f64().unwrap() < 2.0);
    let ratio = e["convergence"]["ratio"].as_f64().unwrap();
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
    assert!(e["lyapunov"]["sigma"].as_f64().unwrap() >= 0.0);
}

#[test]
fn blowup_exits_with_five_and_records_the_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["evolve", "--preset", "gkdv-p", "--override", "grid.N=64", "--override", "evolve.T=2",
        "--override", "evolve.dt=0.01", "--override", "evolve.amplitudes=[10]"]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let e = json(&dir.path().join("evolve.json"));
    let t = e["results"][0]["blowup_time"].as_f64().unwrap();
    assert!(t > 0.0 && t < 2.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset", "regularized-bbm-like", "--override", "grid.N=64", "--override", "evolve.T=2"];
    for cmd in ["certify", "evolve", "sweep"] {
        let mut all = vec![cmd];
        all.extend(args);
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        assert_eq!(code(&run_in(&a, &all)), 0);
        assert_eq!(code(&run_in(&b, &all)), 0);
        for entry in std::fs::read_dir(&a).unwrap() {
            let entry = entry.unwrap();
            if entry.file_type().unwrap().is_file() {
                let name = entry.file_name();
                assert_eq!(std::fs::read(entry.path()).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
            }
        }
    }
}

#[test]
fn config_file_layers_over_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "grid": { "N": 64 }, "output": { "formats": ["json"] } }"#).unwrap();
    let out = dir.path().join("out");
    let o = run_in(&out, &["certify", "--preset", "ilw", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out.join("certify.json"))["wave"]["N"], 64);
    assert!(!out.join("spectrum.csv").exists());
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_periwave"))
            .args(["sweep", "--preset", "ilw", "--override", "grid.N=32", "--out", dir.path().to_str().unwrap()])
            .env("PERIWAVE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0")), 1);
    assert_eq!(code(&run("many")), 1);
    assert_eq!(code(&run("2")), 0);
}

#[test]
fn schema_command_prints_json() {
    let o = periwave(&["schema"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["type"], "object");
}
