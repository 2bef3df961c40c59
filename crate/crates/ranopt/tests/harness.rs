use proptest::prelude::*;
use ranopt::harness::*;

fn spec(seeds: &[u64]) -> ExperimentSpec {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    ExperimentSpec::from_toml(&format!(
        "name = \"t\"\nchapter = \"ch3\"\nseeds = [{}]\n[sweep]\nvariable = \"target_sinr\"\nvalues = [2.0, 4.0]\n[ch3]\nn_voice = 2\n[ch3.network]\nn_femto = 2\nn_mue = 3\n",
        seeds.join(", ")
    ))
    .unwrap()
}

fn rows_of(report: &ExperimentReport, seed: u64) -> Vec<ReportRow> {
    report.rows.iter().filter(|r| r.seed == seed).cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(
        rows in prop::collection::vec((-1e9f64..1e9, any::<u64>(), "[a-z_]{1,12}", prop::num::f64::NORMAL | prop::num::f64::ZERO), 0..40)
    ) {
        let rows: Vec<ReportRow> =
            rows.into_iter().map(|(sweep, seed, metric, value)| ReportRow { sweep, seed, metric, value }).collect();
        let report = ExperimentReport::from_rows("p", "x", rows.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        emit_csv(&report, &path).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), rows);
    }
}

#[test]
fn empty_report_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&ExperimentReport::default(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "sweep,seed,metric,value\n");
    assert!(read_csv(&path).unwrap().is_empty());
}

#[test]
fn foreign_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "seed,sweep,metric,value\n1,2,a,3\n").unwrap();
    assert!(read_csv(&path).is_err());
}

#[test]
fn rows_follow_sweep_then_seed_order() {
    let report = run_experiment(&spec(&[7, 3])).unwrap();
    let keys: Vec<(f64, u64)> = report.rows.iter().map(|r| (r.sweep, r.seed)).collect();
    let mut dedup = keys.clone();
    dedup.dedup();
    assert_eq!(dedup, vec![(2.0, 7), (2.0, 3), (4.0, 7), (4.0, 3)]);
}

#[test]
fn a_seed_gives_the_same_rows_whatever_its_companions() {
    let a = run_experiment(&spec(&[1, 2, 3])).unwrap();
    let b = run_experiment(&spec(&[3, 9, 1])).unwrap();
    for seed in [1, 3] {
        assert_eq!(rows_of(&a, seed), rows_of(&b, seed));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let report = run_experiment(&spec(&[4, 5])).unwrap();
        let rows = dir.path().join(format!("rows{k}.csv"));
        let agg = dir.path().join(format!("agg{k}.csv"));
        emit_csv(&report, &rows).unwrap();
        emit_aggregate_csv(&report, &agg).unwrap();
        files.push((std::fs::read(rows).unwrap(), std::fs::read(agg).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    assert!(files[0].0.len() > 30);
}

#[test]
fn aggregates_match_row_means() {
    let report = run_experiment(&spec(&[1, 2])).unwrap();
    for a in &report.aggregates {
        let v = report.values(a.sweep, &a.metric);
        assert_eq!(v.len(), a.count);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - a.mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn bad_specs_are_rejected() {
    let base = "chapter = \"ch4\"\n[sweep]\nvariable = \"n_sub\"\n";
    assert!(ExperimentSpec::from_toml(&format!("{base}values = [2.5]\n")).is_err());
    assert!(ExperimentSpec::from_toml(&format!("{base}values = []\n")).is_err());
    assert!(ExperimentSpec::from_toml("chapter = \"ch4\"\nseeds = [1, 1]\n[sweep]\nvariable = \"n_sub\"\nvalues = [4]\n").is_err());
    assert!(ExperimentSpec::from_toml("chapter = \"ch8\"\n[sweep]\nvariable = \"nope\"\nvalues = [1]\n").is_err());
    assert!(ExperimentSpec::from_toml(&format!("{base}values = [4]\n")).is_ok());
}
