use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "trial,group_size,trp_count,noise_power_dbm,selection_scheme,nmse,wall_time_seconds";

fn bdris(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdris"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const FAST: &[&str] = &["--trp-count", "40", "--pool-size", "200", "--iterations", "200"];

#[test]
fn pool_then_select() {
    let dir = tempfile::tempdir().unwrap();
    ok(&bdris(dir.path(), &["pool", "--trp-count", "10", "--pool-size", "50", "-o", "pool.txt"]));
    let pool = fs::read_to_string(dir.path().join("pool.txt")).unwrap();
    assert!(pool.starts_with("# bdris-trp-pool v1\n# n_elements 4\n# group_size 2\n# count 50\n"));
    assert_eq!(pool.lines().filter(|l| !l.starts_with('#')).count(), 50);

    ok(&bdris(dir.path(), &["select", "--pool", "pool.txt", "-d", "8", "-o", "greedy.txt"]));
    let set = fs::read_to_string(dir.path().join("greedy.txt")).unwrap();
    let indices = set.lines().find(|l| l.starts_with("# indices")).unwrap();
    assert!(indices.starts_with("# indices 0 "));
    assert_eq!(indices.split_whitespace().count(), 2 + 8);

    ok(&bdris(
        dir.path(),
        &["select", "--pool", "pool.txt", "-d", "8", "--scheme", "random", "--seed", "3", "-o", "random.txt"],
    ));
    let too_many = bdris(dir.path(), &["select", "--pool", "pool.txt", "-d", "51", "-o", "x.txt"]);
    assert!(!too_many.status.success());
}

#[test]
fn trial_prints_one_row_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["trial", "--noise-dbm", "-inf", "--history", "h.csv", "--save-trps", "set.txt"];
    args.extend_from_slice(FAST);
    let stdout = ok(&bdris(dir.path(), &args));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], HEADER);
    assert!(lines[1].starts_with("0,2,40,-inf,greedy,"));

    let history = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("iteration,training_loss,validation_error,learning_rate"));
    assert_eq!(history.lines().count(), 201);
    assert!(fs::read_to_string(dir.path().join("set.txt")).unwrap().contains("# count 40"));

    // Same seed, same result.
    let again = ok(&bdris(dir.path(), &args));
    let nmse = |s: &str| s.lines().nth(1).unwrap().split(',').nth(5).unwrap().to_string();
    assert_eq!(nmse(&stdout), nmse(&again));
}

#[test]
fn sweep_writes_ordered_rows_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep", "--axis", "noise-power", "--values", "-120,-90", "--schemes", "greedy,random", "--trials", "2",
        "-o", "out.csv",
    ];
    args.extend_from_slice(FAST);
    let table = ok(&bdris(dir.path(), &args));
    assert_eq!(table.lines().count(), 5);

    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(csv.lines().next(), Some(HEADER));
    assert_eq!(rows.len(), 8);
    let keys: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r[3], r[4], r[0])).collect();
    assert_eq!(keys[0], ("-120.0", "greedy", "0"));
    assert_eq!(keys[3], ("-120.0", "random", "1"));
    assert_eq!(keys[4], ("-90.0", "greedy", "0"));

    let report = ok(&bdris(dir.path(), &["report", "out.csv"]));
    assert!(report.contains("greedy") && report.contains("random"));
    assert!(report.contains("over 8 rows"));
}

#[test]
fn config_dump_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let dump = ok(&bdris(dir.path(), &["config", "--preset", "reference", "--seed", "9", "--noise-dbm", "-inf"]));
    fs::write(dir.path().join("run.toml"), &dump).unwrap();
    let again = ok(&bdris(dir.path(), &["config", "--config", "run.toml"]));
    assert_eq!(dump, again);
    assert!(dump.contains("master_seed = 9"));
    assert!(dump.contains("noise_power_dbm = -inf"));
}

#[test]
fn invalid_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_group = bdris(dir.path(), &["trial", "--group-size", "3"]);
    assert!(!bad_group.status.success());
    assert!(String::from_utf8_lossy(&bad_group.stderr).contains("group size 3"));

    assert!(!bdris(dir.path(), &["trial", "--trp-count", "1"]).status.success());
    assert!(!bdris(dir.path(), &["report", "missing.csv"]).status.success());
    assert!(!bdris(dir.path(), &["sweep", "--axis", "trp-count", "--values", "2.5", "-o", "x.csv"]).status.success());

    fs::write(dir.path().join("bad.toml"), "[bdris]\nunknown_key = 1\n").unwrap();
    assert!(!bdris(dir.path(), &["config", "--config", "bad.toml"]).status.success());
}
