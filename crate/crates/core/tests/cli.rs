use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kspace(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kspace"));
    cmd.args(args).env_remove("KSPACE_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("KSPACE_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn passing_run_writes_csv_json_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kspace(&["circle-topology", "--out", out, "--dump-elements"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("circle-topology_distances.csv")).unwrap();
    assert!(
        csv.starts_with("separation,chordal_distance,kernel,closed_form,truncation_error,bound\n")
    );
    assert!(!csv.contains(';'));
    assert!(dir.path().join("circle-topology_distances.json").exists());
    assert!(dir.path().join("circle-topology.elements.json").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("circle-topology.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn same_seed_gives_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = kspace(
            &[
                "gram-invariance",
                "--seed",
                "7",
                "--out",
                d.path().to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for table in ["gram", "diagram"] {
        let name = format!("gram-invariance_{table}.csv");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn tolerance_override_can_fail_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kspace(
        &[
            "circle-topology",
            "--out",
            out,
            "--tolerance",
            "k0_error=1e-9",
        ],
        None,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kspace(
        &["circle-topology", "--out", out, "--tolerance", "nonsense=1"],
        None,
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown tolerance"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\ncolour = \"red\"\n").unwrap();
    let o = kspace(
        &[
            "norm-convergence",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out,
        ],
        None,
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    fs::write(&cfg, "experiment = \"circle-topology\"\n").unwrap();
    let o = kspace(
        &[
            "norm-convergence",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out,
        ],
        None,
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_params_and_tolerances_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("circle.toml");
    fs::write(
        &cfg,
        "experiment = \"circle-topology\"\nseed = 3\n[params]\nseparations = 8\n[tolerances]\nruntime_s = 60.0\n",
    )
    .unwrap();
    let o = kspace(
        &[
            "circle-topology",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("circle-topology_distances.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("circle-topology.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["tolerances"]["runtime_s"], 60.0);
}

#[test]
fn environment_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = kspace(&["circle-topology"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("circle-topology.report.json").exists());
}

#[test]
fn report_summarizes_and_flags_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let empty = kspace(&["report", "--out", out], None);
    assert_eq!(code(&empty), 2);
    assert!(stderr(&empty).contains("no results found"));

    assert_eq!(code(&kspace(&["circle-topology", "--out", out], None)), 0);
    let o = kspace(&["report", "--out", out], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("circle-topology") && md.contains("PASS"));

    assert_eq!(
        code(&kspace(
            &[
                "norm-convergence",
                "--out",
                out,
                "--tolerance",
                "oracle=1e-20"
            ],
            None
        )),
        1
    );
    let o = kspace(&["report", "--out", out], None);
    assert_eq!(code(&o), 1);
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("FAIL") && md.contains("**"));

    fs::write(dir.path().join("broken.report.json"), "{ not json").unwrap();
    let o = kspace(&["report", "--out", out], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("broken.report.json"));
}
