//! End-to-end behavior of the commands and the result store.

use std::fs;
use std::path::Path;
use std::process::Command as Process;

use gapfield_cli::commands::judge_stores;
use gapfield_cli::store::{read_records, CSV_HEADER, RESULTS_CSV};
use gapfield_cli::{parse_config_str, run, Command, CliError, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_PASS};

const DISKS: &str = r#"
seed = 11
[geometry]
kind = "disks"
eps = 0.005
[mesh]
h_target = 0.05
gap_layers = 6
[sweep]
eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
"#;

fn sweep_into(dir: &Path, text: &str) {
    let cfg = parse_config_str(text).unwrap();
    run(Command::Sweep, &cfg, dir, Some(2)).unwrap();
}

#[test]
fn solve_with_constant_data_is_trivial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&format!("{DISKS}\n[boundary]\nterms = [{{coef = 1.5}}]\n")).unwrap();
    let out = run(Command::Solve, &cfg, tmp.path(), None).unwrap();
    assert!(out.pass);
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    let value = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("Q").abs() <= 1e-10);
    assert!((value("C1") - 1.5).abs() <= 1e-10);
    assert!(value("flux_residual") <= 1e-10);
    assert!(tmp.path().join("solution.csv").exists());
    assert!(!tmp.path().join("mesh.txt").exists());
}

#[test]
fn sweep_writes_one_row_per_gap_with_fixed_schema() {
    let tmp = tempfile::tempdir().unwrap();
    sweep_into(tmp.path(), DISKS);
    let text = fs::read_to_string(tmp.path().join(RESULTS_CSV)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r.split(',').count(), CSV_HEADER.len());
        // 17 significant digits in scientific notation
        let eps = r.split(',').next().unwrap();
        let mantissa = eps.split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{eps}");
    }
    let fits = fs::read_to_string(tmp.path().join("fits.json")).unwrap();
    for key in ["quantity", "model", "slope", "residual", "n_points", "predicted_exponent", "pass"] {
        assert!(fits.contains(&format!("\"{key}\"")), "{key} missing");
    }
}

#[test]
fn reruns_reproduce_numeric_columns() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    sweep_into(a.path(), DISKS);
    sweep_into(b.path(), DISKS);
    let ra = read_records(&a.path().join(RESULTS_CSV)).unwrap();
    let rb = read_records(&b.path().join(RESULTS_CSV)).unwrap();
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        let mut y = y.clone();
        y.wall_ms = x.wall_ms;
        assert_eq!(*x, y);
        assert_eq!(x.a11.to_bits(), y.a11.to_bits());
    }
}

#[test]
fn store_is_append_only() {
    let tmp = tempfile::tempdir().unwrap();
    sweep_into(tmp.path(), DISKS);
    sweep_into(tmp.path(), DISKS);
    let recs = read_records(&tmp.path().join(RESULTS_CSV)).unwrap();
    assert_eq!(recs.len(), 10);
    // the report judges the latest sweep
    let results = judge_stores(&[tmp.path().to_path_buf()]).unwrap();
    assert!(results.iter().all(|r| r.pass), "{results:#?}");
}

#[test]
fn oracle_table_for_four_dimensions_is_bounded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str("[oracle]\nn = 4\nm = 2\neps = [1e-3, 1e-4, 1e-5, 1e-6]\n").unwrap();
    let out = run(Command::Oracle, &cfg, tmp.path(), None).unwrap();
    assert!(out.pass);
    let text = fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo < 1.1 && hi.is_finite());
}

#[test]
fn tampered_record_fails_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    sweep_into(tmp.path(), DISKS);
    let path = tmp.path().join(RESULTS_CSV);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
    cells[3] = format!("-{}", cells[3]);
    lines[2] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let results = judge_stores(&[tmp.path().to_path_buf()]).unwrap();
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    assert!(failed.contains(&"zero net flux"), "{failed:?}");
    assert!(failed.contains(&"planar blow-up rate"), "{failed:?}");
}

#[test]
fn merged_stores_cover_the_union_in_order() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    sweep_into(a.path(), DISKS);
    sweep_into(
        b.path(),
        "[geometry]\nkind = \"disks\"\nmode = \"axisymmetric\"\n[mesh]\nh_target = 0.05\n[sweep]\neps = [1e-2, 1e-3, 1e-4]\n",
    );
    let only_a: Vec<u32> = judge_stores(&[a.path().to_path_buf()]).unwrap().iter().map(|r| r.id).collect();
    let both = judge_stores(&[b.path().to_path_buf(), a.path().to_path_buf()]).unwrap();
    let ids: Vec<u32> = both.iter().map(|r| r.id).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "{ids:?}");
    assert!(ids.contains(&6) && !only_a.contains(&6));
    assert!(only_a.iter().all(|i| ids.contains(i)));
}

#[test]
fn empty_store_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = judge_stores(&[tmp.path().to_path_buf()]).unwrap_err();
    assert!(matches!(err, CliError::Store(_)));
    assert_eq!(err.exit_code(), EXIT_CONFIG);
}

fn gapfield(args: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_gapfield"))
        .args(args)
        .env_remove("GAPFIELD_OUT")
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let good = dir.join("good.toml");
    fs::write(&good, DISKS).unwrap();
    let bad = dir.join("bad.toml");
    fs::write(&bad, "[sweep]\neps = [0.6]\n").unwrap();
    let out = dir.join("out");
    let out = out.to_str().unwrap();
    assert_eq!(gapfield(&["solve", "--config", bad.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    assert_eq!(gapfield(&["sweep", "--config", good.to_str().unwrap(), "--out", out]), EXIT_PASS);
    assert_eq!(gapfield(&["report", "--config", good.to_str().unwrap(), "--out", out]), EXIT_PASS);
    let csv = Path::new(out).join(RESULTS_CSV);
    let text = fs::read_to_string(&csv).unwrap();
    fs::write(&csv, text.replacen(",2,2,", ",2,2,-", 1)).unwrap();
    assert_eq!(gapfield(&["report", "--config", good.to_str().unwrap(), "--out", out]), EXIT_ACCEPTANCE);
    let empty = dir.join("empty");
    assert_eq!(
        gapfield(&["report", "--config", good.to_str().unwrap(), "--out", empty.to_str().unwrap()]),
        EXIT_CONFIG
    );
}
