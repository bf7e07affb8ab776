mod common;

use common::{users_of_collision, Oracle};
use wifi_load::harness::experiment::rmse;
use wifi_load::harness::{load_csv, render_svg, run_on_stream};
use wifi_load::{
    emit_csv, emit_plot, run_experiment, run_schedule, Estimator, ExperimentConfig, LoadSchedule,
    MeasurementMode, PlotKind, Preset, TraceRecord,
};

fn raw_config() -> ExperimentConfig {
    ExperimentConfig {
        schedule: Some(LoadSchedule::new(vec![(10, 500)]).unwrap()),
        estimators: vec![Estimator::Raw],
        measurement: MeasurementMode::BusyFraction,
        ..ExperimentConfig::default()
    }
}

fn estimate_columns(trace: &[TraceRecord]) -> Vec<(Option<f64>, Option<f64>, Option<f64>)> {
    trace
        .iter()
        .map(|r| (r.n_hat_raw, r.n_kf, r.n_nn))
        .collect()
}

#[test]
fn raw_column_inverts_each_window() {
    let exp = run_experiment(&raw_config()).unwrap();
    assert_eq!(exp.trace.len(), 500);
    for r in &exp.trace {
        assert!(r.n_kf.is_none() && r.n_nn.is_none() && r.loss.is_none());
        let want = users_of_collision(r.p_hat);
        let got = r.n_hat_raw.unwrap();
        assert!(
            (got - want).abs() <= 1e-6 * want,
            "t={}: {got} vs {want}",
            r.t
        );
    }
}

#[test]
fn raw_mean_agrees_with_independent_channel() {
    let exp = run_experiment(&raw_config()).unwrap();
    let ours = exp.trace.iter().map(|r| r.n_hat_raw.unwrap()).sum::<f64>() / 500.0;
    let mut oracle = Oracle::new(10, 77);
    let theirs = (0..500)
        .map(|_| users_of_collision(oracle.window(100) as f64 / 100.0))
        .sum::<f64>()
        / 500.0;
    assert!(
        (ours - theirs).abs() <= 3.0,
        "harness {ours}, oracle {theirs}"
    );
}

#[test]
fn estimate_columns_are_reproducible() {
    let cfg = ExperimentConfig::from_preset(Preset::SmallN);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(estimate_columns(&a.trace), estimate_columns(&b.trace));
    assert_eq!(a.kf_triggers, b.kf_triggers);
    assert_eq!(a.nn_triggers, b.nn_triggers);
    let c = run_experiment(&cfg.clone().with_seed(2)).unwrap();
    assert_ne!(estimate_columns(&a.trace), estimate_columns(&c.trace));
}

#[test]
fn small_counts_are_tracked() {
    let exp = run_experiment(&ExperimentConfig::from_preset(Preset::SmallN)).unwrap();
    assert_eq!(exp.metrics.len(), 4);
    for seg in &exp.metrics {
        for e in [Estimator::Kf, Estimator::Nn] {
            let m = seg.get(e).unwrap();
            assert!(
                m.rmse_tail <= 1.5,
                "n={} {e:?}: rmse {}",
                seg.n_true,
                m.rmse_tail
            );
            assert!(
                m.convergence_slots.is_some_and(|c| c <= 800),
                "n={} {e:?}: {m:?}",
                seg.n_true
            );
        }
    }
}

#[test]
fn metrics_can_be_recomputed_from_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/trace.csv");
    let exp = run_experiment(&ExperimentConfig::from_preset(Preset::SmallN)).unwrap();
    emit_csv(&exp.trace, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back, exp.trace);
    for seg in &exp.metrics {
        let tail = &back[seg.start + seg.len / 2..seg.start + seg.len];
        let truth: Vec<f64> = tail.iter().map(|r| r.n_true as f64).collect();
        for m in &seg.estimators {
            let est: Vec<f64> = tail
                .iter()
                .map(|r| r.estimate(m.estimator).unwrap())
                .collect();
            assert_eq!(rmse(&est, &truth), m.rmse_tail);
        }
    }
}

#[test]
fn estimators_see_the_same_stream() {
    let cfg = ExperimentConfig::from_preset(Preset::LargeN);
    let stream = run_schedule(&cfg.schedule(), &cfg.model(), cfg.run_options()).unwrap();
    let both = run_on_stream(&cfg, &stream).unwrap();
    let alone = |e: Estimator| {
        let cfg = ExperimentConfig {
            estimators: vec![e],
            ..cfg.clone()
        };
        run_on_stream(&cfg, &stream).unwrap()
    };
    let kf = alone(Estimator::Kf);
    let nn = alone(Estimator::Nn);
    for ((b, k), n) in both.trace.iter().zip(&kf.trace).zip(&nn.trace) {
        assert_eq!(b.p_hat, k.p_hat);
        assert_eq!(b.p_hat, n.p_hat);
        assert_eq!(b.n_kf, k.n_kf);
        assert_eq!(b.n_nn, n.n_nn);
    }
    // The full pipeline draws the same stream.
    let full = run_experiment(&cfg).unwrap();
    assert_eq!(estimate_columns(&full.trace), estimate_columns(&both.trace));
}

#[test]
fn tracking_plot_of_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let exp = run_experiment(&ExperimentConfig::from_preset(Preset::LargeN)).unwrap();
    assert_eq!(exp.trace.len(), 8000);
    let svg = render_svg(&exp.trace, PlotKind::Tracking).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 4);
    for label in ["true", "raw", "kf", "nn"] {
        assert!(
            svg.contains(&format!("data-label=\"{label}\"")),
            "missing {label}"
        );
    }
    let path = dir.path().join("tracking.svg");
    emit_plot(&exp.trace, &path, PlotKind::Tracking).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), svg);
}
