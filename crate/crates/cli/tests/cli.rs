use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tmplan_core::milp::{export_lp, parse_lp};
use tmplan_core::parse_topology;

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

/// Runs the binary from the tests directory so echoed paths are relative.
fn tmplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmplan"))
        .args(args)
        .current_dir(tests_dir())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(tests_dir().join("golden").join(name)).unwrap()
}

/// CSV rows after the `#` header lines and the column line.
fn rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn echo<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

#[test]
fn validate_reports_counts() {
    let o = tmplan(&["validate", "data/chain.topo"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "4 nodes, 3 links, 12 flows\n");
}

#[test]
fn validate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.topo");
    fs::write(&bad, "node A\nlink A B\n").unwrap();
    let o = tmplan(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    fs::write(&bad, "node A\nnode B\n").unwrap();
    let o = tmplan(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("disconnected"), "{}", stderr(&o));

    let o = tmplan(&["validate", "data/missing.topo"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tmplan(&["bogus"]).status.code(), Some(1));
    assert_eq!(tmplan(&[]).status.code(), Some(1));
    assert_eq!(
        tmplan(&["sweep", "data/chain.topo", "--k", "3..1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        tmplan(&["plan-greedy", "data/chain.topo", "--fixed", "node:R9"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tmplan(&["simulate", "data/chain.topo", "--timing", "nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(tmplan(&["--help"]).status.code(), Some(0));
}

#[test]
fn greedy_chain_is_one_resource() {
    let o = tmplan(&["plan-greedy", "data/chain.topo", "--phi-min", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(rows(&out), ["1,sdn-node,R2,12,0,1"]);
    assert_eq!(out, golden("plan_greedy_chain.csv"));
}

#[test]
fn greedy_threshold_and_limits() {
    let o = tmplan(&["plan-greedy", "data/chain.topo", "--phi-min", "12"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(rows(&stdout(&o)).is_empty());

    // greedy ignores limits, so the tight backup port leaves flows open
    let o = tmplan(&["plan-greedy", "data/chain.topo", "--catalog", "data/chain.cat"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(echo(&stdout(&o), "status"), Some("incomplete"));
}

#[test]
fn exact_respects_catalog() {
    let o = tmplan(&["plan-exact", "data/chain.topo", "--catalog", "data/chain.cat"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("plan_exact_chain_catalog.csv"));
}

#[test]
fn exact_infeasible_exits_two_with_header() {
    let all_out = "node:R1=0,node:R2=0,node:R3=0,node:R4=0,link:R1:R2=0,link:R2:R3=0,link:R3:R4=0";
    let o = tmplan(&["plan-exact", "data/chain.topo", "--fixed", all_out]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert_eq!(echo(&out, "status"), Some("infeasible"));
    assert!(rows(&out).is_empty());
    assert!(stderr(&o).contains("undetermined"));

    let o = tmplan(&["plan-exact", "data/chain.topo", "--links", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_writes_lp_alongside() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("m.lp");
    let out = dir.path().join("out");
    let o = tmplan(&[
        "plan-exact",
        "data/pl12.topo",
        "--export-lp",
        lp.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = fs::read_to_string(&lp).unwrap();
    assert_eq!(export_lp(&parse_lp(&text).unwrap()), text);
    assert!(text.contains("\\ command=plan-exact\n"));
    let plan = fs::read_to_string(out.join("plan.csv")).unwrap();
    assert_eq!(echo(&plan, "status"), Some("optimal"));
    let assignment = fs::read_to_string(out.join("assignment.csv")).unwrap();
    assert_eq!(rows(&assignment).len(), 132);
}

#[test]
fn export_lp_round_trips() {
    let o = tmplan(&[
        "export-lp",
        "data/chain.topo",
        "--catalog",
        "data/chain.cat",
        "--links",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let m = parse_lp(&text).unwrap();
    assert_eq!(export_lp(&m), text);
    assert!(m.constraint("links_total").is_some());
}

#[test]
fn sweep_is_monotone_and_stable() {
    let o = tmplan(&["sweep", "data/pl12.topo", "--k", "0..5", "--no-wall-time"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let nodes: Vec<usize> = rows(&out)
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(nodes.len(), 6);
    assert!(nodes.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(out, golden("sweep_pl12.csv"));

    let timed = stdout(&tmplan(&["sweep", "data/chain.topo"]));
    assert!(timed.contains("k,sdn_nodes,status,link_fraction,node_fraction,seconds\n"));
    assert_eq!(rows(&timed).len(), 4);
}

#[test]
fn sweep_budget_exceeded_exits_two() {
    let o = tmplan(&["sweep", "data/pl12.topo", "--k", "0..0", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(rows(&stdout(&o))[0].contains("budget-exceeded"));
}

#[test]
fn hybrid_endpoints() {
    let o = tmplan(&["hybrid-sweep", "data/pl12.topo", "--no-wall-time"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let totals: Vec<usize> = rows(&out)
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let greedy: usize = echo(&out, "greedy_resources").unwrap().parse().unwrap();
    assert_eq!(totals.len(), greedy + 1);
    assert!(totals[0] <= *totals.last().unwrap());
    assert_eq!(*totals.last().unwrap(), greedy);
}

#[test]
fn simulate_ideal_reconstructs_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = tmplan(&[
        "simulate",
        "data/pl12.topo",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = fs::read_to_string(dir.path().join("reconstruction.csv")).unwrap();
    assert_eq!(echo(&rec, "unknown"), Some("0"));
    let worst: f64 = echo(&rec, "max_rel_error").unwrap().parse().unwrap();
    assert!(worst <= 1e-9, "{worst}");
    assert_eq!(rows(&rec).len(), 132);
    for name in ["schedule.csv", "plan.csv", "assignment.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn simulate_with_device_timing() {
    let o = tmplan(&[
        "simulate",
        "data/chain.topo",
        "--timing",
        "hp-switch",
        "--planner",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(echo(&out, "timing"), Some("hp-switch"));
    let worst: f64 = echo(&out, "max_rel_error").unwrap().parse().unwrap();
    assert!(worst > 0.0 && worst <= 2.0 * 0.5 / 10.0, "{worst}");

    // the slow agent refreshes no faster than one slot
    let o = tmplan(&[
        "simulate",
        "data/chain.topo",
        "--timing",
        "slow-agent",
        "--fixed",
        "link:R2:R3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identical_config_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = tmplan(&[
            "simulate",
            "data/pl12.topo",
            "--timing",
            "netgear-switch",
            "--seed",
            "3",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["reconstruction.csv", "schedule.csv", "plan.csv", "assignment.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    tmplan(&[
        "simulate",
        "data/pl12.topo",
        "--timing",
        "netgear-switch",
        "--seed",
        "4",
        "--out",
        c.path().to_str().unwrap(),
    ]);
    assert_ne!(
        fs::read(a.path().join("reconstruction.csv")).unwrap(),
        fs::read(c.path().join("reconstruction.csv")).unwrap()
    );
}

#[test]
fn convert_sndlib_output_is_a_topology() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("small.topo");
    let o = tmplan(&["convert-sndlib", "data/small.xml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(echo(&text, "source"), Some("data/small.xml"));
    let t = parse_topology(&text).unwrap();
    assert_eq!(t.to_string(), "3 nodes, 2 links, 6 flows");
    let o = tmplan(&["validate", out.to_str().unwrap()]);
    assert_eq!(stdout(&o), "3 nodes, 2 links, 6 flows\n");

    let o = tmplan(&["convert-sndlib", "data/chain.topo"]);
    assert_eq!(o.status.code(), Some(1));
}
