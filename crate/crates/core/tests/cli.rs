use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&d1, &d2] {
        let out = rgd(&["gen", "--kind", "smatrix", "--m", "60", "--n", "12", "--r", "12", "--inconsistent", "--seed", "5", "--out", p(d)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for f in ["A.mtx", "b.mtx", "xstar.mtx", "meta.json"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let meta = fs::read_to_string(d1.join("meta.json")).unwrap();
    assert!(meta.contains("\"smatrix\""));
    assert!(meta.contains("\"consistent\": false"));
}

#[test]
fn solve_from_problem_directory() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("prob");
    assert_eq!(code(&rgd(&["gen", "--m", "300", "--n", "30", "--seed", "1", "--out", p(&prob)])), 0);
    let res = dir.path().join("res");
    let out = rgd(&["solve", "--problem", p(&prob), "--method", "rgdr", "--theta", "0.5", "--out", p(&res)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(res.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "method,theta,runs,mean_it,mean_cpu,mean_final_rse,converged");
    assert!(lines.next().unwrap().starts_with("rgdr,0.5,1,"));
    let reports = fs::read_to_string(res.join("reports.json")).unwrap();
    assert!(reports.contains("\"termination_reason\":\"converged\""));
}

#[test]
fn randomized_repeats_report_one_decimal_mean() {
    let out = rgd(&["solve", "--m", "200", "--n", "20", "--seed", "2", "--method", "rgrk", "--repeats", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "rgrk");
    assert_eq!(row[2], "4");
    let decimals = row[3].split('.').nth(1).unwrap();
    assert_eq!(decimals.len(), 1);
}

#[test]
fn solve_output_is_deterministic_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["x", "y"] {
        let res = dir.path().join(name);
        let out = rgd(&["solve", "--m", "200", "--n", "20", "--seed", "3", "--method", "rgrk", "--repeats", "3", "--out", p(&res)]);
        assert_eq!(code(&out), 0);
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(res.join("reports.json")).unwrap()).unwrap();
        for r in v.as_array_mut().unwrap() {
            r["wall_seconds"] = serde_json::Value::Null;
            r["time_trace"] = serde_json::Value::Null;
        }
        texts.push(v);
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn row_method_on_inconsistent_system_exits_3() {
    let out = rgd(&["solve", "--m", "200", "--n", "20", "--seed", "4", "--inconsistent", "--method", "rgdr"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("stalled"));
    let out = rgd(&["solve", "--m", "200", "--n", "20", "--seed", "4", "--inconsistent", "--method", "rgdc"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn max_iters_exhaustion_exits_3() {
    let out = rgd(&["solve", "--m", "200", "--n", "20", "--method", "rgrk", "--max-iters", "3"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&rgd(&["solve", "--m", "10", "--n", "5", "--method", "nope"])), 2);
    assert_eq!(code(&rgd(&["solve", "--m", "10", "--n", "5", "--method", "rgdr", "--theta", "1.5"])), 2);
    assert_eq!(code(&rgd(&["solve", "--method", "rgdr"])), 2);
    assert_eq!(code(&rgd(&["frobnicate"])), 2);
    assert_eq!(code(&rgd(&["gen", "--m", "10", "--n", "5", "--kind", "smatrix", "--r", "9", "--out", "unused"])), 2);
}

#[test]
fn bench_rejects_empty_method_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    fs::write(&cfg, r#"{"methods": [], "thetas": [0.5], "sizes": [{"generator": "randn", "m": 50, "n": 10}], "seeds": [1]}"#).unwrap();
    let out = rgd(&["bench", p(&cfg)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn bench_writes_rows_and_trends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    fs::write(
        &cfg,
        r#"{"methods": ["rgrk", "rgdr", "rgrcd", "rgdc"], "thetas": [0.3, 0.7],
            "sizes": [{"generator": "randn", "m": 1000, "n": 100}, {"generator": "randn", "m": 2000, "n": 100}],
            "seeds": [1, 2], "repeats": 2}"#,
    )
    .unwrap();
    let res = dir.path().join("res");
    let out = rgd(&["bench", p(&cfg), "--out", p(&res)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bench = fs::read_to_string(res.join("bench.csv")).unwrap();
    assert_eq!(bench.lines().count(), 1 + 4 * 2 * 2);
    let trend = fs::read_to_string(res.join("trend.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(trend.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let ratio_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.contains("ratio"))
        .map(|(i, _)| i)
        .collect();
    assert!(!ratio_cols.is_empty(), "{headers:?}");
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for &c in &ratio_cols {
            let v: f64 = rec[c].parse().unwrap();
            assert!(v > 1.0, "greedy deterministic method slower than randomized: {rec:?}");
        }
        rows += 1;
    }
    assert_eq!(rows, 2 * 2 * 2);
}

#[test]
fn certify_deterministic_methods_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (method, theta) in [("rgdr", "0.5"), ("rgdc", "0.3")] {
        let csv_path = dir.path().join(format!("{method}.csv"));
        let out = rgd(&["certify", "--m", "100", "--n", "50", "--seed", "9", "--method", method, "--theta", theta, "--out", p(&csv_path)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("k,factor,ratio,satisfied,"));
        assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("true")));
    }
}

#[test]
fn certify_randomized_method_statistically() {
    let out = rgd(&["certify", "--m", "100", "--n", "50", "--seed", "9", "--method", "rgrk", "--repeats", "30"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("PASS"));
    let out = rgd(&["certify", "--m", "100", "--n", "50", "--method", "rgrk", "--repeats", "5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn certify_refuses_large_instances() {
    let out = rgd(&["certify", "--m", "5000", "--n", "300", "--method", "rgdr"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).to_lowercase().contains("size"));
}

#[test]
fn certify_rejects_methods_without_bounds() {
    let out = rgd(&["certify", "--m", "60", "--n", "10", "--method", "gbk"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn trace_plot_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for method in ["rgrcd", "rgdc"] {
        let res = dir.path().join(method);
        let out = rgd(&["solve", "--kind", "smatrix", "--m", "300", "--n", "30", "--inconsistent", "--method", method, "--out", p(&res)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        files.push(res.join("reports.json"));
    }
    let out = rgd(&["trace-plot", p(&files[0]), p(&files[1])]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,theta,k,cumulative_seconds,rse");
    let methods: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    let first_rgrcd = methods.iter().position(|m| *m == "rgrcd").unwrap();
    assert!(methods[..first_rgrcd].iter().all(|m| *m == "rgdc"));
    assert!(methods[first_rgrcd..].iter().all(|m| *m == "rgrcd"));

    let out = rgd(&["trace-plot"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "method,theta,k,cumulative_seconds,rse");
}

#[test]
fn missing_problem_directory_is_io_failure() {
    let out = rgd(&["solve", "--problem", "/nonexistent/dir", "--method", "rgdr"]);
    assert_eq!(code(&out), 1);
}
