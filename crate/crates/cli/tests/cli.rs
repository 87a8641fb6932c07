use std::path::Path;
use std::process::{Command, Output};

fn sip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sip"))
        .current_dir(dir)
        .env_remove("SIP_SEED")
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Data rows (no `#` comments, no header) split into fields.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn config_line(csv: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .expect("config echo")
        .to_string()
}

#[test]
fn check_duality_on_a_ring() {
    let dir = tempfile::tempdir().unwrap();
    let o = sip(
        dir.path(),
        &[
            "check-duality",
            "--ring",
            "5",
            "--max-dual",
            "3",
            "--max-occ",
            "4",
            "--m",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max residual"));
    let csv = std::fs::read_to_string(dir.path().join("check-duality.csv")).unwrap();
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert!(r[0][6].parse::<f64>().unwrap() <= 1e-10);
    assert!(dir.path().join("check-duality.json").exists());
}

#[test]
fn nes_profile_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let o = sip(
        dir.path(),
        &[
            "nes-profile",
            "--n-sites",
            "9",
            "--rho-l",
            "0",
            "--rho-r",
            "1",
            "--replicas",
            "100000",
            "--seed",
            "7",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("nes-profile.csv")).unwrap();
    assert!(csv.contains("# seed: 7\n"));
    let r = rows(&csv);
    assert_eq!(r.len(), 9);
    let (est, se): (f64, f64) = (r[4][1].parse().unwrap(), r[4][2].parse().unwrap());
    assert_eq!(r[4][0], "5");
    assert!((est - 0.5).abs() <= 3.0 * se, "{est} ± {se}");
}

#[test]
fn missing_key_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = sip(dir.path(), &["nes-profile", "--n-sites", "9", "--rho-l", "0"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho_r"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sip(dir.path(), &["--help"])), 0);
    assert_eq!(code(&sip(dir.path(), &["--version"])), 0);
    assert_eq!(code(&sip(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&sip(dir.path(), &["z-chain", "--m", "one"])), 1);
    // invalid parameter value rejected by the library
    assert_eq!(code(&sip(dir.path(), &["z-chain", "--m", "-1", "--horizons", "1"])), 1);
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"m": [1.0], "colour": 1}"#).unwrap();
    let o = sip(dir.path(), &["check-balance", "--config", "bad.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    std::fs::write(dir.path().join("bad.toml"), "m = [1.0,\nn_max = 3\n").unwrap();
    let o = sip(dir.path(), &["check-balance", "--config", "bad.toml"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert!(!dir.path().join("check-balance.csv").exists());
}

#[test]
fn runtime_abort_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sip(
        dir.path(),
        &[
            "oracle",
            "--kind",
            "heat_kernel",
            "--m",
            "2",
            "--t",
            "1",
            "--out",
            "missing/dir/x.csv",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn toml_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("z.toml"),
        "command = \"z-chain\"\nseed = 5\nm = 2.0\nhorizons = [10.0]\nreplicas = 200\n",
    )
    .unwrap();
    let o = sip(
        dir.path(),
        &["z-chain", "--config", "z.toml", "--m", "1", "--out", "z.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("z.csv")).unwrap();
    let cfg: serde_json::Value = serde_json::from_str(&config_line(&csv)).unwrap();
    assert_eq!(cfg["m"], 1.0);
    assert_eq!(cfg["seed"], 5);
    assert_eq!(cfg["origin_pull"], 2.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |threads: &'static str, out: &'static str| {
        vec![
            "hydro-lep",
            "--profile",
            "smoothed_step:left=0.2,right=0.6,center=0.5,width=0.1",
            "--n-list",
            "8,16",
            "--t",
            "0.1",
            "--points",
            "0.4,0.6",
            "--replicas",
            "400",
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            out,
        ]
    };
    for (t, out) in [("1", "a.csv"), ("1", "b.csv"), ("3", "c.csv")] {
        assert_eq!(code(&sip(dir.path(), &args(t, out))), 0);
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));

    // the embedded config reproduces the file
    let csv = String::from_utf8(read("a.csv")).unwrap();
    std::fs::write(dir.path().join("echo.json"), config_line(&csv)).unwrap();
    assert_eq!(
        code(&sip(
            dir.path(),
            &["hydro-lep", "--config", "echo.json", "--out", "d.csv"]
        )),
        0
    );
    assert_eq!(read("a.csv"), read("d.csv"));

    let json: serde_json::Value = serde_json::from_slice(&read("a.json")).unwrap();
    assert!(json["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(json["rows"].as_array().unwrap().len(), rows(&csv).len());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_sip"))
            .current_dir(dir.path())
            .env("SIP_SEED", seed)
            .args([
                "-q",
                "z-chain",
                "--m",
                "1",
                "--horizons",
                "5",
                "--replicas",
                "50",
                "--out",
                out,
            ])
            .output()
            .unwrap()
    };
    assert!(run("42", "a.csv").status.success());
    assert!(run("43", "b.csv").status.success());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(a.contains("# seed: 42\n"));
    assert_ne!(
        rows(&a),
        rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap())
    );
}

#[test]
fn simulate_writes_a_replayable_event_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = sip(
        dir.path(),
        &[
            "simulate",
            "--model",
            "sip",
            "--ring",
            "6",
            "--initial",
            "0,0,3",
            "--m",
            "1",
            "--horizon",
            "5",
            "--seed",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut eta = [2i64, 0, 0, 1, 0, 0];
    let mut last = 0.0;
    for r in rows(&csv) {
        let t: f64 = r[0].parse().unwrap();
        assert!(t >= last && t <= 5.0);
        last = t;
        let (from, to): (usize, usize) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        eta[from] -= 1;
        eta[to] += 1;
        assert!(eta[from] >= 0);
    }
    assert_eq!(eta.iter().sum::<i64>(), 3);
}

#[test]
fn other_commands_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &[
            "coupling-scaling",
            "--m",
            "1",
            "--horizons",
            "8,32",
            "--replicas",
            "200",
            "--out",
            "c.csv",
        ],
        &[
            "nes-factorization",
            "--points",
            "0.3,0.6",
            "--n-list",
            "10",
            "--replicas",
            "500",
            "--out",
            "f.csv",
        ],
        &[
            "oracle",
            "--kind",
            "absorption",
            "--sites",
            "3,7",
            "--n-sites",
            "10",
            "--m",
            "2",
            "--out",
            "o.csv",
        ],
        &["check-balance", "--m", "1", "--lambda", "0.5", "--out", "b.csv"],
        &[
            "check-duality",
            "--segment",
            "3",
            "--max-dual",
            "2",
            "--max-occ",
            "3",
            "--m",
            "1.5",
            "--out",
            "d.csv",
        ],
    ];
    let expect = [("c.csv", 8), ("f.csv", 9), ("o.csv", 4), ("b.csv", 6), ("d.csv", 1)];
    for (args, (file, n)) in cases.iter().zip(expect) {
        let o = sip(dir.path(), args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(rows(&csv).len(), n, "{file}");
    }
}
