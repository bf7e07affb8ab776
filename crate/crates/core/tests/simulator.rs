mod common;

use common::{oracle_users, Oracle};
use proptest::prelude::*;
use wifi_load::{
    run_schedule, Countdown, DcfSimulator, LoadSchedule, MeasurementMode, Model, ProtocolParams,
    RunOptions,
};

fn tagged_rate(n: usize, countdown: Countdown, subframes: usize, seed: u64) -> f64 {
    let mut sim = DcfSimulator::new(n, ProtocolParams::default(), countdown, seed).unwrap();
    for _ in 0..subframes {
        sim.step_subframe();
    }
    sim.tagged_stats().collision_rate()
}

#[test]
fn tagged_collision_rate_matches_model() {
    let model = Model::default();
    for n in [5, 10, 20, 30] {
        let want = model.collision_of_users(n as f64).unwrap();
        let got = tagged_rate(n, Countdown::GenericSlot, 500_000, 11);
        assert!(
            (got - want).abs() <= 0.015,
            "n={n}: simulated {got}, model {want}"
        );
    }
}

#[test]
fn long_run_at_ten_users_under_both_countdown_rules() {
    let want = Model::default().collision_of_users(10.0).unwrap();
    for rule in [Countdown::GenericSlot, Countdown::IdleOnly] {
        let got = tagged_rate(10, rule, 1_000_000, 5);
        assert!((got - want).abs() <= 0.01, "{rule:?}: {got} vs {want}");
    }
}

#[test]
fn mean_estimate_matches_independent_oracle() {
    let model = Model::default();
    let schedule = LoadSchedule::new(vec![(25, 500)]).unwrap();
    let stream = run_schedule(&schedule, &model, RunOptions::default()).unwrap();
    let ours = stream.iter().map(|s| s.m.n_hat).sum::<f64>() / 500.0;

    let mut oracle = Oracle::new(25, 99);
    let theirs = (0..500)
        .map(|_| oracle_users(oracle.window(100) as f64 / 100.0))
        .sum::<f64>()
        / 500.0;
    assert!(
        (ours - theirs).abs() <= 3.0,
        "simulator {ours}, oracle {theirs}"
    );
    assert!(
        (theirs - 25.0).abs() <= 3.0,
        "oracle itself is off: {theirs}"
    );
}

#[test]
fn segment_bookkeeping() {
    let schedule = LoadSchedule::new(vec![(5, 2000), (8, 2000), (12, 2000)]).unwrap();
    let stream = run_schedule(&schedule, &Model::default(), RunOptions::default()).unwrap();
    assert_eq!(stream.len(), 6000);
    let changes: Vec<usize> = stream
        .windows(2)
        .filter(|w| w[0].n_true != w[1].n_true)
        .map(|w| w[1].t)
        .collect();
    assert_eq!(changes, vec![2000, 4000]);
    let means: Vec<f64> = stream
        .chunks(2000)
        .map(|c| c.iter().map(|s| s.m.p_hat).sum::<f64>() / 2000.0)
        .collect();
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn windows_account_for_every_subframe(
        n in 1u32..40,
        k_all in 1u32..300,
        seed in any::<u64>(),
        mode in prop_oneof![
            Just(MeasurementMode::BusyFraction),
            Just(MeasurementMode::CollisionShare),
            Just(MeasurementMode::BusyCorrected),
        ],
        countdown in prop_oneof![Just(Countdown::GenericSlot), Just(Countdown::IdleOnly)],
    ) {
        let model = Model::default();
        let p = model.params;
        let schedule = LoadSchedule::new(vec![(n, 20)]).unwrap();
        let stream = run_schedule(&schedule, &model, RunOptions { k_all, seed, mode, countdown }).unwrap();
        for s in &stream {
            let m = s.m;
            prop_assert_eq!(m.k_all, k_all);
            prop_assert!(m.k_busy + m.k_coll <= k_all);
            prop_assert_eq!(m.k_busy + m.k_coll + m.k_idle(), k_all);
            prop_assert!((0.0..=1.0).contains(&m.p_hat));
            prop_assert!(m.n_hat.is_finite() && m.n_hat >= 1.0);
            let airtime = m.k_busy as f64 * p.t_success_us + m.k_coll as f64 * p.t_collision_us + m.k_idle() as f64 * p.t_idle_us;
            prop_assert!((m.elapsed_us - airtime).abs() <= 1e-9 * airtime);
        }
        let again = run_schedule(&schedule, &model, RunOptions { k_all, seed, mode, countdown }).unwrap();
        prop_assert_eq!(stream, again);
    }

    #[test]
    fn membership_changes_keep_counters_valid(sizes in prop::collection::vec(1usize..30, 1..6), seed in any::<u64>()) {
        let params = ProtocolParams::default();
        let mut sim = DcfSimulator::new(sizes[0], params, Countdown::GenericSlot, seed).unwrap();
        for &n in &sizes {
            sim.set_population(n);
            prop_assert_eq!(sim.stations().len(), n);
            for _ in 0..200 {
                sim.step_subframe();
                for st in sim.stations() {
                    prop_assert!(st.stage <= params.max_stage);
                    prop_assert!(st.counter < params.window(st.stage));
                }
            }
        }
    }
}
