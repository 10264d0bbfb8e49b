use std::process::{Command, Output};

fn loopforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopforge"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
        .env_remove("LOOPFORGE_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = loopforge(&["sample", "lerw", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_or_malformed_graph_exits_2() {
    let o = loopforge(&["sample", "lerw", "--graph", "absent.json", "--from", "x", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = std::env::temp_dir().join("loopforge-cli-test-bad.json");
    std::fs::write(&dir, r#"{"vertices":["x"],"edges":[{"from":"x","to":"nowhere","re":1.0}]}"#).unwrap();
    let o = loopforge(&["sample", "lerw", "--graph", dir.to_str().unwrap(), "--from", "x", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("edges[0].to"));
}

#[test]
fn zero_samples_print_nothing() {
    let o = loopforge(&["sample", "lerw", "--graph", "grid3.json", "--from", "1,1", "--n", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn lerw_csv_quotes_labels_and_ends_on_boundary() {
    let o = loopforge(&["sample", "lerw", "--graph", "grid3.json", "--from", "1,1", "--n", "50", "--seed", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,length,path"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    for (i, row) in rows.iter().enumerate() {
        let (head, path) = row.split_once(",\"").expect("quoted path");
        let (idx, len) = head.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), i);
        let steps: Vec<&str> = path.trim_end_matches('"').split(' ').collect();
        assert_eq!(steps.len() - 1, len.parse::<usize>().unwrap());
        assert_eq!(steps[0], "1,1");
        let (x, y) = steps.last().unwrap().split_once(',').unwrap();
        let (x, y): (i64, i64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!(!(0..3).contains(&x) || !(0..3).contains(&y));
    }
}

#[test]
fn sampling_is_seed_deterministic_and_worker_independent() {
    let args = ["sample", "lerw", "--graph", "grid3.json", "--from", "1,1", "--n", "2500", "--seed", "11"];
    let a = loopforge(&args);
    let b = loopforge(&args);
    let mut four = args.to_vec();
    four.extend(["--workers", "4"]);
    let c = loopforge(&four);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let mut other = args.to_vec();
    other[9] = "12";
    assert_ne!(a.stdout, loopforge(&other).stdout);
}

#[test]
fn gff_methods_share_the_header() {
    for method in ["direct", "lupu"] {
        let o = loopforge(&["sample", "gff", "--graph", "two-point.json", "--method", method, "--n", "3"]);
        assert!(o.status.success(), "{method}");
        let text = stdout(&o);
        assert_eq!(text.lines().next(), Some("sample,x,y"));
        assert_eq!(text.lines().count(), 4);
    }
}

#[test]
fn ust_with_root_spans_the_path() {
    let o = loopforge(&["sample", "ust", "--graph", "path3.json", "--root", "2", "--n", "20"]);
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let edges = v["edges"].as_array().unwrap();
        // Interior {1, 3} once 2 becomes a root.
        assert_eq!(edges.len(), 2);
    }
}

#[test]
fn forest_reports_components() {
    let o = loopforge(&["sample", "forest", "--dim", "2", "--side", "4", "--n", "2"]);
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let n = v["vertices"].as_u64().unwrap();
        let e = v["edges"].as_array().unwrap().len() as u64;
        assert_eq!(v["components"].as_u64().unwrap(), n - e);
    }
}

#[test]
fn fomin_points_form() {
    let o = loopforge(&["verify", "--suite", "fomin", "--graph", "grid3.json", "--points", "-1,0", "-1,2", "3,0", "3,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS"));
    let o = loopforge(&["verify", "--suite", "fomin", "--graph", "grid3.json", "--points", "-1,0", "nope", "3,0", "3,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_json_is_parseable() {
    let o = loopforge(&["verify", "--suite", "fomin", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"][0]["id"], "c11-fomin");
}

#[test]
fn crossing_exponent_csv() {
    let o = loopforge(&["experiment", "crossing-exponent", "--n", "2", "--rmin", "3", "--rmax", "6", "--terms", "200", "--y", "1.0,2.0", "--out", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("r,log_det"));
    assert_eq!(text.lines().count(), 32);
    let o = loopforge(&["experiment", "crossing-exponent", "--rmin", "6", "--rmax", "3"]);
    assert_eq!(o.status.code(), Some(2));
}
