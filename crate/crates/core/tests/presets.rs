//! Bundled experiment configurations run end to end.

use simkit::experiment::{load, preset, preset_names, run};
use simkit::parallel::Execution;

#[test]
fn every_preset_passes_its_checks() {
    for name in preset_names() {
        let loaded = load(preset(name).unwrap(), &[]).unwrap();
        let report = run(&loaded, Execution::Parallel).unwrap();
        assert!(report.success(), "{name}: {:?}", report.first_failure());
    }
}

#[test]
fn csv_is_deterministic_and_tagged_with_the_config_hash() {
    let loaded = load(preset("fig2").unwrap(), &[]).unwrap();
    let a = run(&loaded, Execution::Parallel).unwrap().to_csv().unwrap();
    let b = run(&loaded, Execution::Sequential)
        .unwrap()
        .to_csv()
        .unwrap();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config-hash: {}", loaded.hash)
    );
    assert!(lines
        .next()
        .unwrap()
        .starts_with("sweep_value,z1,z2,oracle_value,abs_error,iterations,wall_time"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn overrides_reach_the_run() {
    let base = load(preset("fig1").unwrap(), &[]).unwrap();
    let tweaked = load(preset("fig1").unwrap(), &["model.gamma=2.0".to_string()]).unwrap();
    assert_ne!(base.hash, tweaked.hash);
    let report = run(&tweaked, Execution::Parallel).unwrap();
    assert!(report.success(), "{:?}", report.first_failure());
    let worst = report
        .ok_rows()
        .filter_map(|r| r.column("abs_error"))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}
