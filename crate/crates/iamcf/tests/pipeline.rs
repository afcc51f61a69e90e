use std::collections::BTreeSet;
use std::process::Command;

use iamcf::config::{NormSpec, ObstacleSpec};
use iamcf::io::{read_field_binary, write_field_binary, write_field_csv, FIELD_MAGIC};
use iamcf::summary::parse_line;
use iamcf::{convergence_study, run, Check, Error, RunConfig, Status};
use iamcf_core::{FieldMeaning, Grid2, ScalarField};

fn small_config() -> RunConfig {
    let mut config = RunConfig::bundled("wulff_euclid_2d").unwrap();
    config.grid.resolution = 64;
    config.solver.schedule = vec![1.5, 1.3, 1.2];
    config.flow.minimality_trials = 20;
    config
}

#[test]
fn bundled_config_parses_and_round_trips() {
    let config = RunConfig::bundled("wulff_euclid_2d").unwrap();
    assert_eq!(config.norm, NormSpec::Euclidean);
    assert_eq!(config.checks, Check::ALL.to_vec());
    assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);
    assert!(config.problem().is_ok());
    assert!(RunConfig::bundled("missing").is_none());
    assert!(RunConfig::resolve("no/such/file.toml").is_err());
}

#[test]
fn parse_errors_name_the_line() {
    let text = "[norm]\nkind = \"euclidean\"\n[obstacle]\nkind = \"wulff\"\nradius = 1.0\n[grid]\nhalf_width = 8.0\nresolution = \"many\"\n";
    let Err(Error::Parse(msg)) = RunConfig::from_toml(text) else { panic!("expected a parse error") };
    assert!(msg.contains("line 8"), "{msg}");
    let Err(Error::Parse(msg)) = RunConfig::from_toml("[norm\n") else { panic!("expected a parse error") };
    assert!(msg.contains("line 1"), "{msg}");
    let unknown = "[norm]\nkind = \"euclidean\"\n[obstacle]\nkind = \"wulff\"\nradius = 1.0\n[grid]\nhalf_width = 8.0\nresolution = 32\ncolour = 1\n";
    assert!(matches!(RunConfig::from_toml(unknown), Err(Error::Parse(_))));
}

#[test]
fn invalid_problems_are_rejected() {
    let mut config = small_config();
    config.solver.schedule = vec![2.0, 1.5];
    assert!(matches!(config.problem(), Err(Error::Invalid { .. })));

    let mut config = small_config();
    config.grid.half_width = 4.0;
    assert!(matches!(config.problem(), Err(Error::Invalid { .. })));

    let mut config = small_config();
    config.obstacle = ObstacleSpec::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]] };
    assert!(matches!(config.problem(), Err(Error::Invalid { .. })));

    let mut config = small_config();
    config.flow.growth_times = vec![0.5, -1.0];
    assert!(config.problem().is_err());
}

#[test]
fn fields_round_trip_through_binary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid2::new(5, 3, [-1.0, 2.0], 0.25).unwrap();
    let field = ScalarField::from_fn(g, FieldMeaning::ArrivalTime, |x| x[0] * x[0] - 3.0 * x[1]);
    let bin = dir.path().join("f.bin");
    write_field_binary(&bin, &field).unwrap();
    assert_eq!(read_field_binary(&bin, FieldMeaning::ArrivalTime).unwrap(), field);

    let csv_path = dir.path().join("nested/f.csv");
    write_field_csv(&csv_path, &field).unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["i", "j", "x", "y", "value"]);
    let rows: Vec<(usize, usize, f64, f64, f64)> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);
    for (i, j, x, y, v) in rows {
        assert_eq!(g.point(i, j), [x, y]);
        assert_eq!(field.at(i, j), v);
    }

    let mut bytes = std::fs::read(&bin).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&bin, &bytes).unwrap();
    assert!(read_field_binary(&bin, FieldMeaning::ArrivalTime).is_err());
    bytes[0] ^= 1;
    bytes.pop();
    std::fs::write(&bin, &bytes).unwrap();
    assert!(read_field_binary(&bin, FieldMeaning::ArrivalTime).is_err());
    assert_eq!(&bytes[..8], &FIELD_MAGIC);
}

#[test]
fn small_run_writes_a_complete_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.checks.push(Check::Growth);
    let report = run(&config, dir.path()).unwrap();
    assert_eq!(report.continuation.reports.len(), 3);
    assert!(report.limit.is_some());

    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary, report.summary());
    let mut seen = BTreeSet::new();
    for line in summary.lines() {
        let pairs = parse_line(line).unwrap();
        let keys: Vec<&str> = pairs.iter().take(4).map(|(k, _)| *k).collect();
        assert_eq!(keys, ["check", "status", "value", "tol"], "{line}");
        assert!(seen.insert(pairs[0].1.to_string()), "duplicate {line}");
        pairs[1].1.parse::<Status>().unwrap();
        for (_, v) in &pairs[2..] {
            v.parse::<f64>().unwrap();
        }
    }
    let expected: BTreeSet<String> = Check::ALL.iter().map(|c| c.name().to_string()).collect();
    assert_eq!(seen, expected);

    for file in ["config.toml", "solves.csv", "cauchy.csv", "growth.csv", "minimality.csv", "fields/u_limit.bin", "fields/u_p1.2.csv"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let solves = csv::Reader::from_path(dir.path().join("solves.csv")).unwrap().into_records().count();
    assert_eq!(solves, 3);
    let minimality = std::fs::read_to_string(dir.path().join("minimality.csv")).unwrap();
    assert!(minimality.starts_with('#'));
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut config = small_config();
    config.checks = vec![Check::Minimality, Check::Barriers];
    let ra = run(&config, a.path()).unwrap();
    let rb = run(&config, b.path()).unwrap();
    assert_eq!(ra.outcomes, rb.outcomes);
    for file in ["summary.txt", "minimality.csv", "solves.csv", "fields/u_p1.2.bin"] {
        assert_eq!(std::fs::read(a.path().join(file)).unwrap(), std::fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn study_reports_orders_between_resolutions() {
    let config = small_config();
    let table = convergence_study(&config, &[64, 32], &[1.5]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].resolution, 32);
    assert!(table.rows[1].error < table.rows[0].error);
    assert_eq!(table.orders.len(), 1);
    assert!(table.orders[0].order > 0.5, "{:?}", table.orders);

    let single = convergence_study(&config, &[32, 32], &[1.5]).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.orders.is_empty());
    assert!(convergence_study(&config, &[], &[1.5]).is_err());
}

#[test]
fn binary_reports_status_through_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let mut cfg = small_config();
    cfg.name = "tiny".into();
    cfg.checks = vec![Check::Barriers];
    std::fs::write(&config, cfg.to_toml()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_iamcf"))
        .args(["check", "--config"])
        .arg(&config)
        .env("IAMCF_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("check=barriers status=pass"), "{stdout}");
    assert!(dir.path().join("tiny/summary.txt").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_iamcf"))
        .args(["check", "--p-schedule", "2.5", "--out"])
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("solver.schedule"));
}
