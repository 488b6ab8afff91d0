//! End-to-end tests of the `ptwalk` binary: every subcommand, the option
//! precedence rules, output formats, determinism, and the error paths.
//!
//! Workloads are deliberately tiny — these tests exercise the command-line
//! contract, not the statistics (the core crate's tests cover those).

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ptwalk"))
}

/// Runs the binary with `args` in `dir` and asserts a zero exit status.
fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().expect("spawn ptwalk");
    assert!(
        out.status.success(),
        "ptwalk {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Runs the binary expecting failure; returns captured stderr.
fn run_err(dir: &Path, args: &[&str]) -> String {
    let out = bin().current_dir(dir).args(args).output().expect("spawn ptwalk");
    assert!(
        !out.status.success(),
        "ptwalk {:?} unexpectedly succeeded: {}",
        args,
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("read json");
    serde_json::from_str(&text).expect("parse json")
}

/// Parses the `kind` column of a trace CSV, skipping the `init` row.
fn move_kinds(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).expect("read trace");
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).expect("kind column").to_string())
        .filter(|k| k != "init")
        .collect()
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[test]
fn run_writes_trace_sidecar_and_diagnostics() {
    let dir = tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "run", "--target", "example1", "--iters", "6e3", "--thin", "5", "--seed", "1",
            "--penalty-prob", "0.1", "--out", "t.csv",
        ],
    );
    assert!(dir.path().join("t.csv").exists());
    assert!(dir.path().join("t.meta.json").exists());
    assert!(dir.path().join("t.diag.json").exists());

    // The stored rows sample the move schedule, so the penalty-kind
    // fraction concentrates near the configured probability 0.1.
    let kinds = move_kinds(&dir.path().join("t.csv"));
    assert_eq!(kinds.len(), 1200);
    let frac =
        kinds.iter().filter(|k| *k == "penalty").count() as f64 / kinds.len() as f64;
    assert!((0.06..=0.14).contains(&frac), "penalty fraction {frac}");

    let diag = read_json(&dir.path().join("t.diag.json"));
    let per_move = diag["per_move_acceptance"].as_object().unwrap();
    assert!(per_move.contains_key("penalty"));
    assert!(diag["global_acceptance"].as_f64().unwrap() > 0.0);
    assert_eq!(diag["iat_per_coordinate"].as_array().unwrap().len(), 2);

    let meta = read_json(&dir.path().join("t.meta.json"));
    assert_eq!(meta["iters"].as_u64(), Some(6000));
    assert_eq!(meta["thin"].as_u64(), Some(5));
    assert_eq!(meta["kernel"]["seed"].as_u64(), Some(1));
}

#[test]
fn plain_kernel_reports_no_penalty_moves() {
    let dir = tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "run", "--target", "example1", "--iters", "3e3", "--seed", "2",
            "--penalty", "none", "--out", "p.csv",
        ],
    );
    let kinds = move_kinds(&dir.path().join("p.csv"));
    assert!(kinds.iter().all(|k| k != "penalty"));
    let diag = read_json(&dir.path().join("p.diag.json"));
    let per_move = diag["per_move_acceptance"].as_object().unwrap();
    assert!(!per_move.contains_key("penalty"));
    assert!(!per_move.is_empty());
}

#[test]
fn equal_invocations_are_byte_identical() {
    let dir = tempdir().unwrap();
    let args = [
        "run", "--target", "example1", "--iters", "2e3", "--thin", "4", "--seed", "9",
    ];
    run_ok(dir.path(), &args.iter().chain(&["--out", "a.csv"]).copied().collect::<Vec<_>>());
    run_ok(dir.path(), &args.iter().chain(&["--out", "b.csv"]).copied().collect::<Vec<_>>());
    for (a, b) in [
        ("a.csv", "b.csv"),
        ("a.meta.json", "b.meta.json"),
        ("a.diag.json", "b.diag.json"),
    ] {
        let left = std::fs::read(dir.path().join(a)).unwrap();
        let right = std::fs::read(dir.path().join(b)).unwrap();
        // The sidecars embed no paths, so every byte must match.
        assert_eq!(left, right, "{a} and {b} differ");
    }
}

#[test]
fn config_file_fills_in_and_flags_override() {
    let dir = tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "target = \"example1\"\niters = \"2e3\"\nthin = 5\nseed = 99\nout = \"c.csv\"\n",
    )
    .unwrap();
    run_ok(dir.path(), &["run", "--config", "run.toml", "--seed", "42"]);
    let meta = read_json(&dir.path().join("c.meta.json"));
    assert_eq!(meta["iters"].as_u64(), Some(2000)); // from the file
    assert_eq!(meta["thin"].as_u64(), Some(5)); // from the file
    assert_eq!(meta["kernel"]["seed"].as_u64(), Some(42)); // flag wins
}

#[test]
fn run_accepts_a_target_spec_file() {
    let dir = tempdir().unwrap();
    std::fs::write(
        dir.path().join("narrow.toml"),
        "dim = 2\n\n[[components]]\nweight = 1.0\nmean = [3.0, -1.0]\n\
         cov = [[0.5, 0.0], [0.0, 0.5]]\n",
    )
    .unwrap();
    run_ok(
        dir.path(),
        &[
            "run", "--target", "narrow.toml", "--iters", "1e3", "--seed", "4",
            "--out", "s.csv",
        ],
    );
    let meta = read_json(&dir.path().join("s.meta.json"));
    assert_eq!(meta["target"].as_str(), Some("narrow"));
}

#[test]
fn run_rejects_fractional_iteration_counts() {
    let dir = tempdir().unwrap();
    let stderr = run_err(dir.path(), &["run", "--iters", "1.5"]);
    assert!(stderr.contains("1.5"), "stderr: {stderr}");
    assert!(!stderr.contains("panicked"));
}

#[test]
fn run_rejects_unknown_targets_cleanly() {
    let dir = tempdir().unwrap();
    let stderr = run_err(dir.path(), &["run", "--target", "nosuch", "--iters", "100"]);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(stderr.contains("unknown target"), "stderr: {stderr}");
    assert!(!stderr.contains("panicked"));
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

#[test]
fn table1_single_cell_matches_the_reference_value() {
    let dir = tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "table1", "--dims", "2", "--kappas", "2", "--shapes", "gaussian",
            "--samples", "2e4", "--seed", "5", "--out", "z.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("z.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("penalty_shape,proposal,d,kappa,n,z_hat,std_err")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[0..4], &["gaussian", "t1", "2", "2"]);
    assert_eq!(row[4], "20000");
    let z_hat: f64 = row[5].parse().unwrap();
    let std_err: f64 = row[6].parse().unwrap();
    assert!((z_hat - 0.8392).abs() < 0.02, "z_hat {z_hat}");
    assert!(std_err > 0.0 && std_err < 0.01, "std_err {std_err}");
    assert_eq!(lines.next(), None);

    // In high dimension at moderate strength the constant saturates.
    run_ok(
        dir.path(),
        &[
            "table1", "--dims", "16", "--kappas", "3", "--shapes", "gaussian",
            "--samples", "2e4", "--seed", "5", "--out", "z16.csv",
        ],
    );
    let text16 = std::fs::read_to_string(dir.path().join("z16.csv")).unwrap();
    let z16: f64 = text16.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!(z16 >= 0.9999, "z_hat {z16}");
}

#[test]
fn table1_emits_the_full_grid_in_deterministic_order() {
    let dir = tempdir().unwrap();
    let out = run_ok(
        dir.path(),
        &[
            "table1", "--dims", "2,4", "--kappas", "2,3", "--shapes", "gaussian,t",
            "--samples", "1e3", "--seed", "0",
        ],
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    let heads: Vec<String> = rows
        .iter()
        .map(|r| r.split(',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    // Shape-major, then dimension, then strength.
    assert_eq!(
        heads,
        vec![
            "gaussian,t1,2,2",
            "gaussian,t1,2,3",
            "gaussian,t1,4,2",
            "gaussian,t1,4,3",
            "t2,t1,2,2",
            "t2,t1,2,3",
            "t2,t1,4,2",
            "t2,t1,4,3",
        ]
    );
    // Larger dimension pushes the constant towards 1 at equal strength.
    let z = |row: &str| -> f64 { row.split(',').nth(5).unwrap().parse().unwrap() };
    assert!(z(rows[2]) > z(rows[0]));

    // The same invocation reproduces the same bytes.
    let again = run_ok(
        dir.path(),
        &[
            "table1", "--dims", "2,4", "--kappas", "2,3", "--shapes", "gaussian,t",
            "--samples", "1e3", "--seed", "0",
        ],
    );
    assert_eq!(again.stdout, out.stdout, "table output should be reproducible");
}

// ---------------------------------------------------------------------------
// combine
// ---------------------------------------------------------------------------

/// Produces two short mode-trapped traces of the two-mode builtin.
fn make_trapped_traces(dir: &Path) {
    run_ok(
        dir,
        &[
            "run", "--target", "example1", "--iters", "4e3", "--thin", "10", "--seed", "11",
            "--penalty", "none", "--out", "a.csv",
        ],
    );
    run_ok(
        dir,
        &[
            "run", "--target", "example1", "--iters", "4e3", "--thin", "10", "--seed", "12",
            "--penalty", "none", "--x0", "20,-20", "--y0", "21,-19", "--out", "b.csv",
        ],
    );
}

#[test]
fn combine_merges_two_trapped_traces() {
    let dir = tempdir().unwrap();
    make_trapped_traces(dir.path());
    run_ok(
        dir.path(),
        &[
            "combine", "a.csv", "b.csv", "--target", "example1", "--iters", "4e3",
            "--seed", "3", "--burn-in", "40", "--out", "m.csv",
        ],
    );

    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,region,index,x_0,x_1"));
    let mut rows = 0usize;
    let mut seen = [false; 2];
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0].parse::<usize>().unwrap(), rows);
        let region: u8 = fields[1].parse().unwrap();
        assert!(region == 1 || region == 2);
        seen[(region - 1) as usize] = true;
        rows += 1;
    }
    assert_eq!(rows, 4001); // initial state + one per iteration
    assert!(seen[0] && seen[1], "both regions should be visited");

    let summary = read_json(&dir.path().join("m.summary.json"));
    let occ = summary["occupancy"].as_array().unwrap();
    let total: f64 = occ.iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(summary["acceptance"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["overlap_warning"].as_bool(), Some(false));
    assert_eq!(summary["bandwidth_region_1"].as_array().unwrap().len(), 2);
}

#[test]
fn combine_accepts_bare_point_matrices() {
    let dir = tempdir().unwrap();
    let mut near = String::new();
    let mut far = String::new();
    for i in 0..60 {
        let t = i as f64 * 0.03;
        near.push_str(&format!("{},{}\n", 0.4 * (t - 0.9), 0.3 * (0.9 - t)));
        far.push_str(&format!("{},{}\n", 20.0 + 2.0 * (t - 0.9), -20.0 - 2.4 * (t - 0.9)));
    }
    std::fs::write(dir.path().join("near.csv"), near).unwrap();
    std::fs::write(dir.path().join("far.csv"), far).unwrap();
    run_ok(
        dir.path(),
        &[
            "combine", "near.csv", "far.csv", "--target", "example1", "--iters", "2e3",
            "--seed", "8", "--out", "mm.csv",
        ],
    );
    let summary = read_json(&dir.path().join("mm.summary.json"));
    assert_eq!(summary["n_region_1"].as_u64(), Some(60));
    assert_eq!(summary["n_region_2"].as_u64(), Some(60));
}

#[test]
fn combine_warns_when_the_inputs_overlap() {
    let dir = tempdir().unwrap();
    make_trapped_traces(dir.path());
    let out = run_ok(
        dir.path(),
        &[
            "combine", "a.csv", "a.csv", "--target", "example1", "--iters", "1e3",
            "--seed", "3", "--out", "o.csv",
        ],
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("overlap"), "stderr: {stderr}");
    let summary = read_json(&dir.path().join("o.summary.json"));
    assert_eq!(summary["overlap_warning"].as_bool(), Some(true));
}

#[test]
fn combine_rejects_zero_iterations() {
    let dir = tempdir().unwrap();
    make_trapped_traces(dir.path());
    let stderr = run_err(
        dir.path(),
        &["combine", "a.csv", "b.csv", "--target", "example1", "--iters", "0"],
    );
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(stderr.contains("at least 1"), "stderr: {stderr}");
}

#[test]
fn combine_rejects_mismatched_dimensions() {
    let dir = tempdir().unwrap();
    let three: String = (0..40).map(|i| format!("{0},{0},{0}\n", i as f64 * 0.01)).collect();
    let two: String = (0..40).map(|i| format!("{0},{0}\n", i as f64 * 0.01)).collect();
    std::fs::write(dir.path().join("three.csv"), three).unwrap();
    std::fs::write(dir.path().join("two.csv"), two).unwrap();
    let stderr = run_err(
        dir.path(),
        &["combine", "three.csv", "two.csv", "--target", "example1", "--iters", "100"],
    );
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(!stderr.contains("panicked"));
}

#[test]
fn combine_rejects_unreadable_input() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("junk.csv"), "this,is\nnot,numbers\n").unwrap();
    let stderr = run_err(
        dir.path(),
        &["combine", "junk.csv", "junk.csv", "--target", "example1", "--iters", "100"],
    );
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    let stderr2 = run_err(
        dir.path(),
        &["combine", "absent.csv", "absent.csv", "--target", "example1", "--iters", "100"],
    );
    assert!(stderr2.starts_with("error:"), "stderr: {stderr2}");
}

// ---------------------------------------------------------------------------
// diag
// ---------------------------------------------------------------------------

#[test]
fn diag_reports_and_writes_a_kde_grid() {
    let dir = tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "run", "--target", "example1", "--iters", "3e3", "--thin", "5", "--seed", "6",
            "--out", "t.csv",
        ],
    );
    let out = run_ok(
        dir.path(),
        &[
            "diag", "t.csv", "--target", "example1", "--burn-in", "20",
            "--kde-out", "kde.csv", "--kde-res", "12,9",
        ],
    );
    let report: Value = serde_json::from_slice(&out.stdout).expect("diag stdout is JSON");
    assert_eq!(report["iat_per_coordinate"].as_array().unwrap().len(), 2);
    assert_eq!(report["mode_occupancy"].as_array().unwrap().len(), 2);

    let kde = std::fs::read_to_string(dir.path().join("kde.csv")).unwrap();
    let mut lines = kde.lines();
    assert_eq!(lines.next(), Some("x,y,density"));
    let mut count = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3);
        for f in fields {
            assert!(f.parse::<f64>().unwrap().is_finite());
        }
        count += 1;
    }
    assert_eq!(count, 12 * 9);

    // With --out the report lands in a file instead of stdout.
    run_ok(dir.path(), &["diag", "t.csv", "--out", "d.json"]);
    let filed = read_json(&dir.path().join("d.json"));
    assert!(filed["global_acceptance"].as_f64().is_some());
    // Without a target there are no centres, so occupancy is empty.
    assert_eq!(filed["mode_occupancy"].as_array().unwrap().len(), 0);
}

#[test]
fn diag_rejects_excessive_burn_in() {
    let dir = tempdir().unwrap();
    run_ok(
        dir.path(),
        &["run", "--target", "example1", "--iters", "200", "--thin", "10", "--seed", "1",
          "--out", "t.csv"],
    );
    let stderr = run_err(dir.path(), &["diag", "t.csv", "--burn-in", "1000"]);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(stderr.contains("burn-in"), "stderr: {stderr}");
}
