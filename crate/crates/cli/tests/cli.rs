use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dftfunclab")).args(args).env_remove("DFTFUNCLAB_THREADS").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn write_density(path: &Path, values: &[f64]) {
    let mut text = String::from("x,rho\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{},{v:?}\n", i as f64 + 0.5));
    }
    std::fs::write(path, text).unwrap();
}

fn normalized(raw: &[f64], mass: f64) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r * mass / total).collect()
}

#[test]
fn constants_table() {
    let out = run(&["constants"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let rows = doc["outputs"].as_array().unwrap();
    let tf1 = rows.iter().find(|r| r["name"] == "c_TF(1)").unwrap();
    assert!((tf1["value"].as_f64().unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
    assert!(rows.iter().all(|r| r["formula"].is_string() && r["anchor"].is_string()));
}

#[test]
fn bcc_zeta_at_one() {
    let out = run(&["zeta", "--lattice", "BCC", "--s", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out)["outputs"]["value"].as_f64().unwrap();
    assert!((v + 1.4442).abs() < 2e-3, "{v}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_4() {
    let out = run(&["zeta", "--no-such-flag", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(4));
}

#[test]
fn mass_mismatch_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.csv");
    write_density(&path, &normalized(&[1.0, 2.0, 1.5, 1.0], 1.7));
    let out = run(&["sce", "solve", "--density", path.to_str().unwrap(), "--n", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn plan_emission_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let rho = dir.path().join("rho.csv");
    let plan = dir.path().join("plan.json");
    let manifest = dir.path().join("run.json");
    write_density(&rho, &normalized(&[1.0, 2.0, 1.5, 1.0, 0.7], 2.0));
    let out = run(&[
        "sce", "solve", "--density", rho.to_str().unwrap(), "--n", "2", "--kernel", "riesz:1", "--solver", "lp",
        "--emit", plan.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    let plan_doc: Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(plan_doc["tuples"].as_array().unwrap().len(), plan_doc["masses"].as_array().unwrap().len());
    assert_eq!(plan_doc["value"], doc["outputs"]["value"]);
    assert!(doc["meta"]["gap"].as_f64().unwrap() <= 1e-9);

    let replay = run(&["--replay", manifest.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(replay.stdout, out.stdout);

    write_density(&rho, &normalized(&[1.0, 2.0, 1.5, 1.0, 0.8], 2.0));
    assert_eq!(run(&["--replay", manifest.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn crystal_sweep_as_csv() {
    let out = run(&["crystal", "--mode", "floating", "--lattice", "Z1", "--s", "0.5", "--L", "4,8,16", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# L,value,error_estimate"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 3);
    let mantissa = row[1].trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn config_sections_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.conf");
    std::fs::write(&cfg, "[zeta]\nlattice = Z1\ns = 2\n").unwrap();
    let from_config = json(&run(&["--config", cfg.to_str().unwrap(), "zeta"]));
    let z2 = from_config["outputs"]["value"].as_f64().unwrap();
    assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
    let overridden = json(&run(&["--config", cfg.to_str().unwrap(), "zeta", "--s", "4"]));
    assert_eq!(overridden["inputs"]["s"], "4");
    assert!((overridden["outputs"]["value"].as_f64().unwrap() - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-10);
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = ["crystal", "--mode", "clamped", "--lattice", "Z3", "--s", "1", "--L", "3,4"];
    let one = run(&[&["--threads", "1"][..], &args[..]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_dftfunclab")).args(args).env("DFTFUNCLAB_THREADS", "3").output().unwrap();
    let all = run(&args);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, all.stdout);
    assert_eq!(env.stdout, all.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_dftfunclab")).arg("constants").env("DFTFUNCLAB_THREADS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn kinetic_and_fock_commands_report_slacks() {
    let dir = tempfile::tempdir().unwrap();
    let bump = dir.path().join("bump.csv");
    let raw: Vec<f64> = (0..32)
        .map(|i| {
            let u = (i as f64 + 0.5) / 32.0 - 0.5;
            if u.abs() < 0.3 { (std::f64::consts::PI * u / 0.6).cos().powi(2) } else { 0.0 }
        })
        .collect();
    write_density(&bump, &normalized(&raw, 2.0));
    let tgc = run(&["kinetic", "tgc", "--density", bump.to_str().unwrap(), "--tol", "1e-8"]);
    assert_eq!(tgc.status.code(), Some(0), "{}", String::from_utf8_lossy(&tgc.stderr));
    let doc = json(&tgc);
    assert!(doc["outputs"]["primal"].as_f64().unwrap() >= doc["outputs"]["dual"].as_f64().unwrap() - 1e-9);
    assert!(doc["meta"]["assertions"].as_array().unwrap().iter().all(|a| a["passed"] == true));
    assert!(doc["outputs"]["slacks"]["li_yau"].as_f64().unwrap() > 0.0);

    let trial = run(&["kinetic", "trial", "--mode", "marchyoung", "--density", bump.to_str().unwrap()]);
    assert_eq!(trial.status.code(), Some(0), "{}", String::from_utf8_lossy(&trial.stderr));
    let my = json(&trial)["outputs"]["state"]["value"].as_f64().unwrap();
    assert!(my >= doc["outputs"]["value"].as_f64().unwrap() - 1e-8);

    let fock = run(&["fock", "dual", "--kernel", "riesz:0.5", "--g", "1.0", "--rho", "0.3,0.4,0.2,0.35,0.25,0.5", "--mode", "gc"]);
    assert_eq!(fock.status.code(), Some(0), "{}", String::from_utf8_lossy(&fock.stderr));
    let f = json(&fock);
    assert!(f["outputs"]["gap"].as_f64().unwrap() >= -1e-9);
    assert_eq!(f["outputs"]["potential"].as_array().unwrap().len(), 6);
}

#[test]
fn dilation_probe_exponents() {
    let q = json(&run(&["bounds", "probe", "--mode", "quantum", "--N", "1e3:1e9:10"]));
    assert!((q["outputs"]["slope"].as_f64().unwrap() - 11.0 / 12.0).abs() < 0.02);
    let c = run(&["bounds", "probe", "--mode", "classical", "--N", "1e3:1e9:10", "--format", "csv"]);
    assert_eq!(String::from_utf8(c.stdout).unwrap().lines().count(), 8);
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", "--criteria", "1,2,9"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["outputs"]["passed"], true);
    let failing = run(&["verify", "--criteria", "3"]);
    assert_eq!(failing.status.code(), Some(2));
    assert_eq!(run(&["verify", "--criteria", "11"]).status.code(), Some(4));
}
