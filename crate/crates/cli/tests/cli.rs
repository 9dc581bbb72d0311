use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn nsoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsoc"))
        .args(args)
        .output()
        .expect("run nsoc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const RAMP_HEADER: &str =
    "t,w_g,w_t,dtheta_m,f1,P_inp,P_1elec,V_ref,E_qcmd,E_q,I_plv,x_aux,V,u,P_mech,omega";

#[test]
fn ramp_solve_writes_artifacts_and_converges() {
    let out = tempfile::tempdir().unwrap();
    let o = nsoc(&["solve", config("ramp.toml").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), RAMP_HEADER);
    assert!(out.path().join("pitch_power.csv").exists());
    assert!(out.path().join("history.csv").exists());
    let s = json(&out.path().join("summary.json"));
    assert_eq!(s["status"], "converged");
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    for key in ["phi", "iterations", "grad_norm", "branch_switches"] {
        assert!(!s[key].is_null(), "{key}");
    }
    let t = json(&out.path().join("timing.json"));
    assert!(t["wall_time_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = nsoc(&["solve", config("gaussian.toml").to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for f in ["trajectory.csv", "pitch_power.csv", "history.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn reversed_horizon_is_a_config_error() {
    let o = nsoc(&["solve", config("ramp.toml").to_str().unwrap(), "--override", "horizon.tf=17"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", "problem = \"block\"\nn_s = 4\ncolour = \"red\"\n");
    let o = nsoc(&["solve", c.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn unknown_method_is_a_config_error() {
    let o = nsoc(&[
        "compare",
        config("block_compare.toml").to_str().unwrap(),
        "--override",
        "compare.methods=[\"ld\", \"newton\"]",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn non_monotone_wind_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wind.csv", "t_seconds,v_mps\n0,10\n1,11\n0.5,12\n2,10\n");
    let c = write(
        dir.path(),
        "c.toml",
        "problem = \"wtps\"\nn_s = 2\n[horizon]\nt0 = 0.0\ntf = 2.0\n[wind]\nkind = \"data\"\npath = \"wind.csv\"\n",
    );
    let o = nsoc(&["solve", c.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_wind_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "c.toml",
        "problem = \"wtps\"\nn_s = 2\n[horizon]\nt0 = 0.0\ntf = 2.0\n[wind]\nkind = \"data\"\npath = \"nowhere.csv\"\n",
    );
    assert_eq!(code(&nsoc(&["check", c.to_str().unwrap()])), 3);
}

#[test]
fn zero_reactance_is_a_model_error() {
    let o = nsoc(&["check", config("ramp.toml").to_str().unwrap(), "--override", "params.X_eq=0.0"]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn smooth_region_check_passes() {
    let o = nsoc(&["check", config("gaussian.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("gradient vs central FD") && !text.contains("FAIL"));
}

#[test]
fn zero_length_horizon_check_passes_trivially() {
    let o = nsoc(&["check", config("ramp.toml").to_str().unwrap(), "--override", "horizon.tf=18.0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("phi = 0"));
}

#[test]
fn block_compare_orders_smoothing_errors() {
    let out = tempfile::tempdir().unwrap();
    let o = nsoc(&[
        "compare",
        config("block_compare.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--override",
        "n_s=20",
        "--override",
        "compare.methods=[\"ld\", \"smoothed:5\", \"smoothed:1\"]",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.path().join("report.json"));
    let entries = r["report"]["entries"].as_array().unwrap();
    let err = |m: &str| {
        entries.iter().find(|e| e["method"] == m).unwrap()["smoothing_error"]
            .as_f64()
            .unwrap()
    };
    assert!(err("smoothed:1") < err("smoothed:5"));
    let table = std::fs::read_to_string(out.path().join("smoothing_error.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("param,error"));
    assert_eq!(table.lines().count(), 4);
    for m in ["ld", "smoothed_5", "smoothed_1"] {
        assert!(out.path().join(format!("samples_{m}.csv")).exists(), "{m}");
    }
}

#[test]
fn overrides_change_the_config_hash() {
    let run = |extra: &[&str]| {
        let out = tempfile::tempdir().unwrap();
        let mut args = vec!["solve".to_string(), config("gaussian.toml").to_str().unwrap().to_string()];
        args.extend(["--out".to_string(), out.path().to_str().unwrap().to_string()]);
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(code(&nsoc(&refs)), 0);
        json(&out.path().join("summary.json"))["config_hash"].clone()
    };
    let base = run(&[]);
    assert_eq!(base, run(&[]));
    assert_ne!(base, run(&["--override", "solver.max_iter=400"]));
}
