use std::path::Path;
use std::process::{Command, Output};

fn isingdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isingdp"))
        .args(args)
        .env_remove("ISINGDP_OUT_DIR")
        .env_remove("ISINGDP_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_json(o: &Output) -> serde_json::Value {
    let text = stdout(o);
    serde_json::from_str(text.lines().last().expect("output")).expect("record line")
}

#[test]
fn bounds_prints_inequalities_and_record() {
    let o = isingdp(&["bounds", "--n", "104", "--p", "1000", "--dim", "3", "--pi", "0.064", "--r2", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("a > -14.625b - 0.8125"), "{text}");
    let rec = last_json(&o);
    for key in ["b_max", "a_lower_intercept", "a_lower_slope", "a_upper_slope", "recommended_a", "recommended_b"] {
        assert!(rec[key].is_number(), "{key}");
    }
}

#[test]
fn bounds_from_config_file_exact_matches_float() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    std::fs::write(&cfg, "n = 104\np = 6600\ndim = 3\npi = 0.01\nr2 = 0.1\nr2_mode = \"relaxed\"\nmargin = 0.1\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let float = last_json(&isingdp(&["bounds", "--config", cfg]));
    let exact = last_json(&isingdp(&["bounds", "--config", cfg, "--exact"]));
    let (bf, be) = (float["b_max"].as_f64().unwrap(), exact["b_max"].as_f64().unwrap());
    assert!((bf - be).abs() < 1e-12);
    assert!((bf - 0.25).abs() < 5e-4, "{bf}");
}

#[test]
fn bounds_exit_codes() {
    let o = isingdp(&["bounds", "--n", "104", "--p", "1000", "--dim", "2", "--pi", "0.05", "--r2", "1e-14"]);
    assert_eq!(o.status.code(), Some(4));
    let o = isingdp(&["bounds", "--n", "104", "--p", "1000", "--dim", "4", "--r2", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = isingdp(&["bounds", "--n", "104"]);
    assert_eq!(o.status.code(), Some(2));
}

fn simulate(dir: &Path) {
    let o = isingdp(&["simulate", "--scenario", "1", "--side", "4", "--n", "40", "--seed", "5", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_dataset_and_record() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    for f in ["y.csv", "x.bin", "x.bin.json", "coords.csv", "truth.csv", "simulation.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulation.json")).unwrap()).unwrap();
    assert!((rec["realized_snr"].as_f64().unwrap() - 0.05).abs() < 1e-9);
    assert_eq!(rec["seed"], 5);
}

#[test]
fn fit_refuses_outside_pair_unless_forced_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data);
    let f = |name: &str| data.join(name).to_str().unwrap().to_string();
    let run = dir.path().join("run");
    let (y, x, c, t, r) = (f("y.csv"), f("x.bin"), f("coords.csv"), f("truth.csv"), run.to_str().unwrap().to_string());
    let base = [
        "fit", "--y", &y, "--x", &x, "--coords", &c, "--truth", &t, "--iterations", "200", "--burn-in", "100",
        "--chains", "2", "--h", "5", "--inclusion-batches", "4", "--r2", "0.5", "--out", &r, "--a=-1", "--b", "0.6",
    ];
    let o = isingdp(&base);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("violates"), "{err}");

    let mut forced = base.to_vec();
    forced.push("--force");
    let o = isingdp(&forced);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("traces/chain_1/scalars.csv").exists());
    assert!(!run.join("summary.csv").exists());

    let o = isingdp(&["diagnose", "--run", &r]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("auc = "));
    for file in ["summary.csv", "roc.csv", "convergence.csv"] {
        assert!(run.join(file).exists(), "{file}");
    }

    let roc_out = dir.path().join("roc2.csv");
    let o = isingdp(&["roc", "--summary", &format!("{r}/summary.csv"), "--truth", &t, "--out", roc_out.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("AUC = "));
    assert_eq!(std::fs::read(&roc_out).unwrap(), std::fs::read(run.join("roc.csv")).unwrap());

    let hm = dir.path().join("hm");
    let o = isingdp(&[
        "heatmap", "--summary", &format!("{r}/summary.csv"), "--coords", &c, "--slices", "1,4", "--out",
        hm.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(hm.join("heatmap_axis3_slice4.csv").exists());
    let o = isingdp(&["heatmap", "--summary", &format!("{r}/summary.csv"), "--coords", &c, "--slices", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_from_config_with_flag_overrides_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[simulate]\nscenario = 1\nside = 4\nn = 40\nseed = 2\n\n[bounds]\nr2 = 0.5\n\n\
         [sampler]\niterations = 10000\nburn_in = 50\nn_chains = 2\nh = 5\ninclusion_batches = 4\n",
    )
    .unwrap();
    let hashes = |out: &Path| -> serde_json::Value {
        let o = Command::new(env!("CARGO_BIN_EXE_isingdp"))
            .args(["pipeline", "--config", cfg.to_str().unwrap(), "--iterations", "150"])
            .env("ISINGDP_OUT_DIR", out)
            .env("ISINGDP_THREADS", "1")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["config"]["sampler"]["iterations"], 150);
        assert_eq!(m["status"]["state"], "completed");
        m["outputs"].clone()
    };
    let a = hashes(&dir.path().join("a"));
    let b = hashes(&dir.path().join("b"));
    assert_eq!(a, b);
    assert!(a.get("summary.csv").is_some() && a.get("roc.csv").is_some());
}

#[test]
fn print_config_shows_merged_snapshot() {
    let o = isingdp(&["fit", "--print-config", "--prior", "iid-gaussian", "--a=-3", "--iterations", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("iterations = 7") && text.contains("prior = \"iid-gaussian\""), "{text}");
}

#[test]
fn bad_enum_value_is_a_usage_error() {
    let o = isingdp(&["fit", "--prior", "ising-lasso"]);
    assert_eq!(o.status.code(), Some(2));
}
