use std::path::Path;
use std::process::{Command, Output};

fn cp1b(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cp1b"))
        .args(args)
        .current_dir(dir)
        .env_remove("CP1B_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const SMALL_DICHOTOMY: &str = "seed = 5\n[experiment]\ntrials = 4\nhorizon = 6.0\ndtau = 0.01\n";

#[test]
fn selftest_passes_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cp1b(&["selftest", "--out", "st"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("st/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["schema"], "cp1b-manifest/1");
    assert_eq!(m["subcommand"], "selftest");
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(report(&tmp.path().join("st"))["passed"], true);
}

#[test]
fn lyapunov_of_gamma2_is_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "l.toml", "seed = 1\n[walk]\nn = 400\ntrials = 20\n\n[walk.measure]\nkind = \"gamma2\"\n");
    let out = cp1b(&["lyapunov", "--config", &cfg, "--out", "l"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("l"));
    let (l, hw) = (r["lambda_hat"].as_f64().unwrap(), r["ci_halfwidth"].as_f64().unwrap());
    assert!(l - hw > 0.0, "{l} +- {hw}");
}

#[test]
fn missing_delta_prime_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.toml", "[fls]\ndelta = 0.15\n");
    let out = cp1b(&["fls", "--config", &cfg, "--out", "f"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta_prime"));
    assert!(!tmp.path().join("f").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.toml", "[experiment]\ntrails = 4\n");
    let out = cp1b(&["dichotomy", "--config", &cfg, "--out", "d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn library_validation_maps_to_exit_2_and_runtime_to_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.toml", "[experiment]\ntrials = 2\n\n[experiment.structure]\nkind = \"puncture_log\"\n");
    let out = cp1b(&["dichotomy", "--config", &cfg, "--out", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnsupportedStructure"));

    let cfg = write(tmp.path(), "f.toml", "[fls]\ndelta = 0.15\ndelta_prime = 0.35\n\n[run]\nrecords = 1\naccepted = 2\n");
    let out = cp1b(&["fls", "--config", &cfg, "--out", "f"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InsufficientData"));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.toml", SMALL_DICHOTOMY);
    assert_eq!(cp1b(&["dichotomy", "--config", &cfg, "--out", "d"], tmp.path()).status.code(), Some(0));
    assert_eq!(cp1b(&["dichotomy", "--config", &cfg, "--out", "d"], tmp.path()).status.code(), Some(2));
    assert_eq!(cp1b(&["dichotomy", "--config", &cfg, "--out", "d", "--force"], tmp.path()).status.code(), Some(0));
}

#[test]
fn manifest_echo_reproduces_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_DICHOTOMY);
    assert_eq!(cp1b(&["cesaro", "--config", &cfg, "--out", "a", "--seed", "9"], tmp.path()).status.code(), Some(0));
    let echo = tmp.path().join("a/config.echo.toml");
    let out = cp1b(&["cesaro", "--config", echo.to_str().unwrap(), "--out", "b"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "curves.csv", "config.echo.toml"] {
        assert_eq!(std::fs::read(tmp.path().join("a").join(f)).unwrap(), std::fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["experiment"]["seed"], 9);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.toml", SMALL_DICHOTOMY);
    let out = Command::new(env!("CARGO_BIN_EXE_cp1b"))
        .args(["harmonic", "--config", &cfg])
        .current_dir(tmp.path())
        .env("CP1B_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("from_env/report.json").exists());
}

#[test]
fn csv_outputs_use_lf_and_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "w.toml", "[walk]\nn = 50\ntrials = 3\n");
    assert_eq!(cp1b(&["walk", "--config", &cfg, "--out", "w"], tmp.path()).status.code(), Some(0));
    for f in ["walk.csv", "curves.csv"] {
        let text = std::fs::read_to_string(tmp.path().join("w").join(f)).unwrap();
        assert!(!text.contains('\r'), "{f}");
        assert!(text.lines().next().unwrap().contains(','), "{f}");
    }
    let curves = std::fs::read_to_string(tmp.path().join("w/curves.csv")).unwrap();
    assert!(curves.starts_with("trial,t_or_k,value,series_name\n"));
}

#[test]
fn bm_and_fls_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "b.toml",
        "[bm]\nstart = [0.1, 0.0]\n\n[bm.mode]\nkind = \"path\"\ndtau = 0.01\nsamples = 3\n\n[bm.mode.stop]\nkind = \"hyper_time\"\nt = 1.0\n",
    );
    let out = cp1b(&["bm", "--config", &cfg, "--out", "b"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("b/path.csv").exists());

    let cfg = write(tmp.path(), "f.toml", "[fls]\ndelta = 0.15\ndelta_prime = 0.35\n\n[run]\nrecords = 6\naccepted = 3\n");
    let out = cp1b(&["fls", "--config", &cfg, "--out", "f"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&tmp.path().join("f"))["invariant_violations"], 0);
}
