//! Aggregate trends of the experiment harness: coverage responds to the
//! privacy budget and the frequent-location threshold in the expected
//! directions, within sampling noise.

use geocover_core::harness::{run_experiment, ExperimentConfig, Method};

fn paired_drop_bound(a: &[(usize, f64)], b: &[(usize, f64)]) -> (f64, f64) {
    // Returns (mean of b - a, stderr) over trials present in both.
    let diffs: Vec<f64> = a
        .iter()
        .filter_map(|(t, va)| {
            b.iter().find(|(tb, _)| tb == t).map(|(_, vb)| vb - va)
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn coverage_rises_with_privacy_budget() {
    let budgets = [2.0f64.ln(), 4.0f64.ln(), 6.0f64.ln(), 8.0f64.ln()];
    let mut runs = Vec::new();
    for &epsilon in &budgets {
        let config = ExperimentConfig {
            epsilon,
            methods: vec![Method::Ours],
            trials: 30,
            master_seed: 515,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config).unwrap();
        assert!(report.errors.is_empty(), "errors at eps {epsilon}: {:?}", report.errors);
        runs.push(report.coverages(Method::Ours));
    }
    for w in runs.windows(2) {
        let (mean_step, se) = paired_drop_bound(&w[0], &w[1]);
        assert!(
            mean_step >= -se,
            "coverage fell by {mean_step:.4} (se {se:.4}) when the budget rose"
        );
    }
}

#[test]
fn coverage_rises_with_frequent_threshold() {
    let thresholds = [0.5, 0.6, 0.7, 0.8];
    let methods =
        [Method::Ours, Method::Laplace, Method::NoObfuscation, Method::Random];
    let mut runs = Vec::new();
    for &delta in &thresholds {
        let config = ExperimentConfig {
            delta,
            trials: 30,
            master_seed: 616,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config).unwrap();
        assert!(report.errors.is_empty(), "errors at delta {delta}: {:?}", report.errors);
        runs.push(report);
    }
    for method in methods {
        for w in runs.windows(2) {
            let (mean_step, se) =
                paired_drop_bound(&w[0].coverages(method), &w[1].coverages(method));
            assert!(
                mean_step >= -se,
                "{method}: coverage fell by {mean_step:.4} (se {se:.4}) as delta rose"
            );
        }
    }
}
