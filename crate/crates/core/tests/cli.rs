use std::process::{Command, Output};

use serde_json::Value;

fn memcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memcap"))
        .args(args)
        .env_remove("MEMCAP_MAX_N")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(stdout(out).trim_end()).expect("one JSON document")
}

fn reference() -> Value {
    serde_json::from_str(include_str!("golden/reference.json")).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn memoryless_ebit_capacity() {
    let out = memcap(&[
        "capacity",
        "--lambda",
        "0.5",
        "--mu",
        "0",
        "--task",
        "ebit",
        "--n",
        "100",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["command"], "capacity");
    let term = v["outputs"]["bound"]["components"]["asymptotic_term"]
        .as_f64()
        .unwrap();
    assert!((term - 100.0).abs() < 1e-9);
}

#[test]
fn zero_region_warning() {
    let out = memcap(&[
        "capacity",
        "--lambda",
        "0.25",
        "--mu",
        "0.1111111111",
        "--task",
        "qubit",
        "--n",
        "50",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["outputs"]["bound"]["lower"].as_f64(), Some(0.0));
    assert_eq!(v["outputs"]["bound"]["clamped"], true);
    let warnings = v["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("zero-capacity region")));
}

#[test]
fn key_capacity_matches_reference() {
    let out = memcap(&[
        "capacity",
        "--lambda",
        "0.8",
        "--mu",
        "0.2",
        "--task",
        "key",
        "--n",
        "1000",
        "--epsilon",
        "0.05",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let r = &reference()["capacity_0.8_0.2_key_1000_0.05"];
    let outputs = &v["outputs"];
    let comps = &outputs["bound"]["components"];
    let pairs = [
        (&outputs["asymptotic_capacity"], &r["asymptotic_capacity"]),
        (&comps["asymptotic_term"], &r["asymptotic_term"]),
        (&comps["sqrt_term"], &r["sqrt_term"]),
        (&comps["penalty"], &r["penalty"]),
        (&outputs["bound"]["raw_lower"], &r["raw_lower"]),
    ];
    for (got, want) in pairs {
        let (g, w) = (got.as_f64().unwrap(), want.as_f64().unwrap());
        assert!(rel_close(g, w, 1e-9), "{g} vs {w}");
    }
}

#[test]
fn output_is_byte_deterministic() {
    let args = [
        "capacity", "--lambda", "0.7", "--mu", "0.3", "--task", "qubit", "--n", "64", "--exact",
    ];
    let a = memcap(&args);
    let b = memcap(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn numbers_have_seventeen_significant_digits() {
    let out = memcap(&[
        "capacity", "--lambda", "0.7", "--mu", "0.3", "--task", "ebit", "--n", "64",
    ]);
    let text = stdout(&out);
    let v = json(&out);
    let q = v["outputs"]["asymptotic_capacity"].as_f64().unwrap();
    assert!(text.contains(&format!("{q:.16e}")));
}

#[test]
fn csv_and_json_agree() {
    let base = [
        "capacity", "--lambda", "0.6", "--mu", "0.25", "--task", "key", "--n", "400",
    ];
    let j = json(&memcap(&base));
    let mut csv_args = base.to_vec();
    csv_args.extend(["--format", "csv"]);
    let csv = stdout(&memcap(&csv_args));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    let b = &j["outputs"]["bound"];
    let fmt = |v: &Value| format!("{:.16e}", v.as_f64().unwrap());
    assert_eq!(
        col("asymptotic_capacity"),
        fmt(&j["outputs"]["asymptotic_capacity"])
    );
    assert_eq!(col("raw_lower"), fmt(&b["raw_lower"]));
    assert_eq!(col("sqrt_term"), fmt(&b["components"]["sqrt_term"]));
    assert_eq!(col("penalty"), fmt(&b["components"]["penalty"]));
}

#[test]
fn small_n_needs_exact() {
    let args = [
        "capacity", "--lambda", "0.5", "--mu", "0.25", "--task", "ebit", "--n", "2",
    ];
    let out = memcap(&args);
    assert_eq!(code(&out), 2);
    let v = json(&out);
    assert!(v["error"]["message"].as_str().unwrap().contains("--exact"));

    let mut exact = args.to_vec();
    exact.push("--exact");
    let out = memcap(&exact);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["outputs"]["exact_sum_lower_bound"].is_number());
}

#[test]
fn out_of_range_flags() {
    let out = memcap(&[
        "capacity", "--lambda", "1.5", "--mu", "0", "--task", "key", "--n", "10",
    ]);
    assert_eq!(code(&out), 2);
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "InvalidParameter");
    assert!(v["error"]["message"].as_str().unwrap().contains("(0, 1)"));

    let out = memcap(&[
        "capacity",
        "--lambda",
        "0.5",
        "--mu",
        "0",
        "--task",
        "key",
        "--n",
        "10",
        "--epsilon",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&memcap(&[])), 3);
    assert_eq!(code(&memcap(&["capacity", "--lambda", "0.5"])), 3);
    assert_eq!(
        code(&memcap(&[
            "capacity", "--lambda", "0.5", "--mu", "0", "--n", "10", "--task", "bits"
        ])),
        3
    );
    assert_eq!(code(&memcap(&["--help"])), 0);
    let help = stdout(&memcap(&["capacity", "--help"]));
    assert!(help.contains("0.1") && help.contains("1e-10") && help.contains("json"));
}

#[test]
fn uses_needed_references() {
    let r = reference();
    let cases = [
        (
            "uses_0.9_0.5_e_0.05_100",
            ["0.9", "0.5", "key", "0.05", "100"],
        ),
        (
            "uses_0.8_0.2_q_0.1_50",
            ["0.8", "0.2", "qubit", "0.1", "50"],
        ),
    ];
    for (key, [l, m, task, e, k]) in cases {
        let out = memcap(&[
            "uses-needed",
            "--lambda",
            l,
            "--mu",
            m,
            "--task",
            task,
            "--epsilon",
            e,
            "--target-k",
            k,
        ]);
        assert_eq!(code(&out), 0);
        let v = json(&out);
        let want = &r[key];
        assert_eq!(v["outputs"]["n"], want["n"], "{key}");
        let target: f64 = k.parse().unwrap();
        assert!(v["outputs"]["bound_at_n"].as_f64().unwrap() >= target);
        assert!(v["outputs"]["bound_at_n_minus_1"].as_f64().unwrap() < target);
    }
}

#[test]
fn uses_needed_with_fabricated_coefficients() {
    // n·1 − 0·√n − 4 ≥ 10 first holds at n = 14.
    let out = memcap(&[
        "uses-needed",
        "--lambda",
        "0.5",
        "--mu",
        "0",
        "--task",
        "ebit",
        "--target-k",
        "10",
        "--debug-coefficients",
        "1,0,4",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["outputs"]["n"], 14);
}

#[test]
fn unreachable_target_is_structured() {
    let out = memcap(&[
        "uses-needed",
        "--lambda",
        "0.3",
        "--mu",
        "0",
        "--task",
        "qubit",
        "--target-k",
        "10",
    ]);
    assert_eq!(code(&out), 2);
    let v = json(&out);
    assert_eq!(v["command"], "uses-needed");
    assert_eq!(v["error"]["kind"], "UnreachableTarget");
}

#[test]
fn spectrum_matches_reference_csv() {
    let out = memcap(&["spectrum", "--lambda", "0.5", "--mu", "0.25", "--n", "64"]);
    assert_eq!(code(&out), 0);
    let r = &reference()["spectrum_0.5_0.25_n64"];
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,singular_value,transmissivity,q,k"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 64);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (i + 1) as f64);
        for (col, key) in [
            (1, "singular_values"),
            (2, "transmissivities"),
            (3, "q"),
            (4, "k"),
        ] {
            let want = r[key][i].as_f64().unwrap();
            assert!(
                (row[col] - want).abs() <= 1e-11,
                "row {i} {key}: {} vs {want}",
                row[col]
            );
        }
    }
}

#[test]
fn spectrum_small_cases() {
    let out = memcap(&["spectrum", "--lambda", "0.4", "--mu", "0", "--n", "8"]);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    let first = &rows[0][rows[0].find(',').unwrap()..];
    assert!(rows.iter().all(|r| r.ends_with(first)));

    let out = memcap(&["spectrum", "--lambda", "0.4", "--mu", "0.3", "--n", "1"]);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn spectrum_size_cap() {
    let out = memcap(&["spectrum", "--lambda", "0.5", "--mu", "0.25", "--n", "5000"]);
    assert_eq!(code(&out), 3);
    let out = Command::new(env!("CARGO_BIN_EXE_memcap"))
        .args(["spectrum", "--lambda", "0.5", "--mu", "0.25", "--n", "32"])
        .env("MEMCAP_MAX_N", "16")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_quick_grid_passes() {
    let out = memcap(&["verify", "--grid", "quick"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let reports: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reports.len(), 11);
    for r in &reports {
        assert_eq!(r["command"], "verify");
        assert_eq!(r["outputs"]["cases_failed"], 0);
        assert!(r["outputs"]["cases_run"].as_u64().unwrap() > 0);
    }
}

#[test]
fn verify_custom_grids() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "lambdas = []\nmus = [0.0]\nns = [4]\n").unwrap();
    assert_eq!(
        code(&memcap(&["verify", "--grid", empty.to_str().unwrap()])),
        3
    );

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "lambdas = [0.5]\nmus = [0.0\nns = [4]\n").unwrap();
    let out = memcap(&["verify", "--grid", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let small = dir.path().join("small.toml");
    std::fs::write(&small, "lambdas = [0.6]\nmus = [0.0, 0.2]\nns = [8, 16]\n").unwrap();
    assert_eq!(
        code(&memcap(&["verify", "--grid", small.to_str().unwrap()])),
        0
    );

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        code(&memcap(&["verify", "--grid", missing.to_str().unwrap()])),
        3
    );
}

#[test]
fn output_file_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("out.json");
    let log = dir.path().join("run.log");
    let out = memcap(&[
        "capacity",
        "--lambda",
        "0.5",
        "--mu",
        "0",
        "--task",
        "ebit",
        "--n",
        "100",
        "--output",
        file.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(written["command"], "capacity");
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert!(log_text.contains("command=capacity") && log_text.contains("exit=0"));
}
