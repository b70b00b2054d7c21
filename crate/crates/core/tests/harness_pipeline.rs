//! Harness-level statistical properties and file emission.

use specsense::harness::{
    emit_csv, run_experiment, CommonSource, FilterSource, GridConfig,
};
use specsense::recon::ReconMethod;

#[test]
fn aggregated_mse_is_monotone_in_the_sensing_rate() {
    // Six-point rate sweep; at most one inversion tolerated per method.
    let cfg = GridConfig {
        m: 2,
        j_per_gos: 4,
        n: 32,
        k_common: 4,
        k_inn: 1,
        rate_sweep: vec![0.125, 0.25, 0.375, 0.5, 0.75, 1.0],
        sigma_beta_sweep: vec![0.0],
        noise_sigma: 0.0,
        trials: 20,
        seed: 424_242,
        measure_time: false,
        z_c_source: CommonSource::InnovationL1,
        filter_source: FilterSource::True,
        ..Default::default()
    };
    let res = run_experiment(&cfg).unwrap();
    for method in &cfg.methods {
        let mut curve: Vec<(f64, f64)> = res
            .aggregates
            .iter()
            .filter(|a| a.method == *method)
            .map(|a| (a.rho, a.mean_mse))
            .collect();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        let inversions = curve
            .windows(2)
            .filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-12))
            .count();
        assert!(
            inversions <= 1,
            "{}: {} inversions along {:?}",
            method.name(),
            inversions,
            curve
        );
    }
}

#[test]
fn csv_file_round_trip_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let cfg = GridConfig {
        m: 2,
        j_per_gos: 2,
        n: 32,
        k_common: 2,
        k_inn: 1,
        rate_sweep: vec![0.25, 0.5],
        sigma_beta_sweep: vec![0.0, 0.2],
        noise_sigma: 1e-3,
        trials: 2,
        seed: 9,
        measure_time: false,
        methods: vec![ReconMethod::Innovation, ReconMethod::InnovationChannelAware],
        ..Default::default()
    };
    let res = run_experiment(&cfg).unwrap();
    emit_csv(&res, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,rho,sigma_beta,trial,mean_mse,mean_time_s,support_f1"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
    let mut prev_key: Option<(String, f64, f64, usize)> = None;
    for row in rows {
        let parts: Vec<&str> = row.split(',').collect();
        assert_eq!(parts.len(), 7, "row {row}");
        let key = (
            parts[0].to_string(),
            parts[1].parse::<f64>().unwrap(),
            parts[2].parse::<f64>().unwrap(),
            parts[3].parse::<usize>().unwrap(),
        );
        if let Some(prev) = &prev_key {
            let ordered = prev.0 < key.0
                || (prev.0 == key.0
                    && (prev.1, prev.2, prev.3) <= (key.1, key.2, key.3));
            assert!(ordered, "rows out of order: {prev:?} then {key:?}");
        }
        for field in &parts[4..] {
            let v: f64 = field.parse().unwrap();
            assert!(v.is_finite());
        }
        prev_key = Some(key);
    }
}
