use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uavsim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_uavsim"));
    cmd.args(args).env_remove("UAVSIM_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = uavsim(args, &[]);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn episode_writes_three_deterministic_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(&[
            "--trace",
            "--seed",
            "42",
            "--policy",
            "laser",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
    }
    let mut names: Vec<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["scenario_42.json", "summary.csv", "trace_laser_42.jsonl"]
    );
    for name in &names {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }

    let trace = read(a.path(), "trace_laser_42.jsonl");
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 0.0);
    assert_eq!(first["mode"], "travel_to_cluster");
    assert!(trace
        .lines()
        .any(|l| l.contains("\"event\":\"cluster_served\"")));

    let scenario: serde_json::Value =
        serde_json::from_str(&read(a.path(), "scenario_42.json")).unwrap();
    assert_eq!(scenario["seed"], 42);
    assert_eq!(scenario["clusters"].as_array().unwrap().len(), 18);
    assert_eq!(scenario["station_sites"].as_array().unwrap().len(), 6);
}

#[test]
fn calibrate_reports_coefficients() {
    let out = ok(&["--calibrate"]);
    assert!(out.contains("calibrated drag_coeff = 0.0755"), "{out}");
    assert!(out.contains("argmin speed = 6.20 m/s"), "{out}");
    assert!(out.contains("ok, within 6.2 +/- 0.3"), "{out}");
    assert!(out.contains("laser harvest at 325 m"), "{out}");
    assert!(out.contains("laser break-even range"), "{out}");
}

#[test]
fn desk_scale_monte_carlo_has_one_row_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "--trials",
        "200",
        "--policy",
        "all",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let summary = read(dir.path(), "summary.csv");
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 5);
    for (line, policy) in lines[1..]
        .iter()
        .zip(["noncharged", "charged", "tethered", "laser"])
    {
        assert!(line.starts_with(&format!("{policy},none,,200,")), "{line}");
    }
    assert!(read(dir.path(), "movement.csv")
        .starts_with("policy,sweep_kind,sweep_value,served,dist_mean_m,traces\n"));
    assert!(dir.path().join("scenario_1.json").exists());
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "--trials".to_string(),
            "16".into(),
            "--sweep".into(),
            "stations=0..6:3".into(),
            "--out".into(),
            dir.display().to_string(),
        ]
    };
    for (dir, threads) in [(&a, "1"), (&b, "5")] {
        let argv = args(dir.path());
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = uavsim(&argv, &[("UAVSIM_THREADS", threads)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["summary.csv", "movement.csv", "scenario_1.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let summary = read(a.path(), "summary.csv");
    assert_eq!(summary.lines().count(), 1 + 3 * 4);
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("noncharged,stations,0,16,"));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = ok(&[
        "--print-config",
        "--policy",
        "charged,laser",
        "--rcov",
        "75.5",
        "--sweep",
        "window=4000,6000,9000",
    ]);
    let path = dir.path().join("run.conf");
    fs::write(&path, &first).unwrap();
    let second = ok(&["--print-config", "--config", path.to_str().unwrap()]);
    assert_eq!(first, second);
    assert!(first.contains("run.mode = sweep-window"));
    assert!(first.contains("drone.r_cov = 75.5"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    for (text, key) in [
        ("laser.colour = green\n", "laser.colour"),
        ("world.clusters = -3\n", "world.clusters"),
    ] {
        fs::write(&path, text).unwrap();
        let out = uavsim(&["--config", path.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{text}");
    }

    let out = uavsim(&["--dt", "0"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt must be positive"));

    let out = uavsim(&["--trials", "1"], &[("UAVSIM_THREADS", "0")]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("UAVSIM_THREADS"));
}

#[test]
fn missing_config_and_bad_output_report_paths() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.conf");
    let out = uavsim(&["--config", missing.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.conf"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = uavsim(&["--trace", "--out", blocker.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("file"));
}
