use std::path::Path;
use std::process::{Command, Output};

fn ncgossip(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncgossip"))
        .args(args)
        .env("NCGOSSIP_THREADS", threads)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const GOSSIP: &str = r#"
seed = 7
q = 4
out_dir = "out"

[model]
kind = "phone-call"
n = 12
mode = "exchange"

[gossip]
k = 3
trials = 150
max_rounds = 200
trace = [5]
"#;

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 1\n[model\nkind = 3\n");
    let out = ncgossip(&["gossip-run", &cfg], "1");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", &format!("{GOSSIP}\nbogus = 1\n"));
    let out = ncgossip(&["gossip-run", &cfg], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let cfg = write(dir.path(), "g.toml", GOSSIP);
    let out = ncgossip(&["gossip-run", &cfg, "--set", "gossip.kk=2"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GOSSIP);
    let files = [
        "trials.csv",
        "stop_times.csv",
        "rank_trace.csv",
        "gossip.json",
    ];
    let mut runs = Vec::new();
    for (i, threads) in ["1", "3"].into_iter().enumerate() {
        let out_dir = format!("out_dir=\"run{i}\"");
        let out = ncgossip(&["gossip-run", &cfg, "--set", &out_dir], threads);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        runs.push(
            files.map(|f| std::fs::read(dir.path().join(format!("run{i}")).join(f)).unwrap()),
        );
    }
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0][0].clone()).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert!(csv.lines().next().unwrap().ends_with(" seed=7"));
    assert_eq!(lines.next(), Some("trial,node,threshold,decode_round"));
    assert_eq!(lines.count(), 150 * 12);
}

#[test]
fn overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GOSSIP);
    let header = |args: &[&str]| {
        let out = ncgossip(args, "1");
        assert_eq!(out.status.code(), Some(0));
        let text = std::fs::read_to_string(dir.path().join("out/stop_times.csv")).unwrap();
        text.lines().next().unwrap().to_string()
    };
    let a = header(&["gossip-run", &cfg]);
    let b = header(&["gossip-run", &cfg, "--set", "seed=8"]);
    let c = header(&["gossip-run", &cfg]);
    assert_ne!(a, b);
    assert_eq!(a, c);
    assert!(b.ends_with("seed=8"));
}

#[test]
fn timeouts_exit_3_and_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GOSSIP);
    let out = ncgossip(&["gossip-run", &cfg, "--set", "gossip.max_rounds=2"], "1");
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(dir.path().join("out/stop_times.csv")).unwrap();
    assert!(text.lines().skip(2).any(|l| l.ends_with(',')));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{GOSSIP}\n[sweep]\ncommand = \"gossip-run\"\nkey = \"gossip.k\"\nvalues = [1, 2, 4, 8]\n"
    );
    let cfg = write(dir.path(), "s.toml", &text);
    let out = ncgossip(&["sweep", &cfg], "2");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for k in [1, 2, 4, 8] {
        let csv = dir.path().join(format!("out/gossip.k={k}/trials.csv"));
        assert!(csv.exists(), "{}", csv.display());
    }
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/sweep_summary.json")).unwrap(),
    )
    .unwrap();
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    let medians: Vec<u64> = runs
        .iter()
        .map(|r| r["result"]["median"].as_u64().unwrap())
        .collect();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn capacity_scan_dumps_valid_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 3
out_dir = "out"
[model]
kind = "phone-call"
n = 10
mode = "push"
[capacity]
sources = [1, 2]
demands = ["1/2"]
sink = 0
trials = 20
dump_paths = true
"#;
    let cfg = write(dir.path(), "c.toml", text);
    let out = ncgossip(&["capacity-scan", &cfg], "1");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/capacity.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("trial,first_feasible_time"));
    assert_eq!(csv.lines().count(), 22);
    let paths = std::fs::read_to_string(dir.path().join("out/paths.txt")).unwrap();
    let line = paths.lines().find(|l| l.starts_with("path ")).unwrap();
    let (weight, hops) = line
        .strip_prefix("path ")
        .unwrap()
        .split_once(": ")
        .unwrap();
    assert_eq!(weight, "1/2");
    assert!(hops
        .split(' ')
        .enumerate()
        .all(|(t, h)| h.ends_with(&format!("@{t}"))));
}

#[test]
fn schema_lists_every_output() {
    let out = ncgossip(&["--schema"], "1");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for f in [
        "flood.json",
        "flood_tail.csv",
        "trials.csv",
        "capacity.csv",
        "lemma4.csv",
        "sweep_summary.json",
    ] {
        assert!(text.contains(f), "{f}");
    }
}
