use wifi_load::nn::Workspace;
use wifi_load::{
    kf_run, kf_step, nn_run, nn_step, run_schedule, KfConfig, KfState, LoadSchedule, Model,
    NnConfig, NnState, Regime, RunOptions, SlotMeasurement,
};

fn stream(segments: Vec<(u32, u32)>, seed: u64) -> Vec<SlotMeasurement> {
    let schedule = LoadSchedule::new(segments).unwrap();
    run_schedule(
        &schedule,
        &Model::default(),
        RunOptions {
            seed,
            ..RunOptions::default()
        },
    )
    .unwrap()
}

fn p_hats(s: &[SlotMeasurement]) -> Vec<f64> {
    s.iter().map(|x| x.m.p_hat).collect()
}

fn n_hats(s: &[SlotMeasurement]) -> Vec<f64> {
    s.iter().map(|x| x.m.n_hat).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn kf_stays_finite_and_positive_on_long_streams() {
    let model = Model::default();
    for seed in 1..=4 {
        let s = stream(vec![(3, 2500), (30, 2500), (12, 2500), (40, 2500)], seed);
        let trace = kf_run(&p_hats(&s), &KfConfig::default(), &model).unwrap();
        assert_eq!(trace.len(), 10_000);
        for pt in &trace {
            assert!(pt.v > 0.0 && pt.v < 1e3, "seed {seed}: V = {}", pt.v);
            assert!(pt.n_est >= 1.0 && pt.n_est.is_finite());
        }
    }
}

#[test]
fn kf_gain_is_bounded_by_inverse_slope() {
    let model = Model::default();
    let cfg = KfConfig::default();
    let s = stream(vec![(8, 300), (20, 300)], 3);
    let mut state = KfState::from_first_measurement(s[0].m.p_hat, &cfg, &model);
    for x in &s {
        let slope = model.collision_slope(state.n_est).unwrap();
        state = kf_step(&state, x.m.p_hat, &cfg, &model).unwrap();
        assert!(state.last_gain > 0.0 && state.last_gain < 1.0 / slope);
    }
}

#[test]
fn kf_on_noise_free_measurements() {
    let model = Model::default();
    let truth = 14.0;
    let p = model.collision_of_users(truth).unwrap();
    let cfg = KfConfig {
        n0: Some(5.0),
        ..KfConfig::default()
    };
    // Without process noise the error decays roughly as 1/t.
    let trace = kf_run(&vec![p; 3000], &cfg, &model).unwrap();
    let errors: Vec<f64> = trace.iter().map(|t| (t.n_est - truth).abs()).collect();
    assert!(
        errors.windows(2).all(|w| w[1] <= w[0] + 1e-9),
        "not monotone"
    );
    assert!(
        errors.last().unwrap() < &0.05,
        "final error {}",
        errors.last().unwrap()
    );

    // Starting on the fixed point: the estimate never moves.
    let cfg = KfConfig {
        n0: Some(truth),
        ..KfConfig::default()
    };
    let trace = kf_run(&vec![p; 100], &cfg, &model).unwrap();
    assert!(trace.iter().all(|t| (t.n_est - truth).abs() < 1e-6));
    assert!(trace.windows(2).all(|w| w[1].v <= w[0].v));
}

#[test]
fn kf_steps_shrink_without_process_noise() {
    let model = Model::default();
    let s = stream(vec![(10, 2000)], 8);
    let trace = kf_run(&p_hats(&s), &KfConfig::default(), &model).unwrap();
    let step: Vec<f64> = trace
        .windows(2)
        .map(|w| (w[1].n_est - w[0].n_est).abs())
        .collect();
    let early = median(step[..200].to_vec());
    let late = median(step[step.len() - 200..].to_vec());
    assert!(late <= early, "median |step| grew from {early} to {late}");
}

#[test]
fn kf_tracks_small_counts() {
    let model = Model::default();
    let s = stream(vec![(3, 2000), (6, 2000), (9, 2000), (12, 2000)], 2);
    let trace = kf_run(&p_hats(&s), &KfConfig::default(), &model).unwrap();
    for seg in 0..4 {
        let rows = &trace[seg * 2000 + 1000..(seg + 1) * 2000];
        let n = s[seg * 2000].n_true as f64;
        let inside = rows.iter().filter(|t| (t.n_est - n).abs() <= 1.0).count();
        assert!(
            inside as f64 >= 0.8 * rows.len() as f64,
            "segment {seg}: {inside} of {}",
            rows.len()
        );
    }
}

#[test]
fn kf_and_nn_are_deterministic() {
    let model = Model::default();
    let s = stream(vec![(9, 400)], 4);
    let a = kf_run(&p_hats(&s), &KfConfig::default(), &model).unwrap();
    let b = kf_run(&p_hats(&s), &KfConfig::default(), &model).unwrap();
    assert_eq!(a, b);
    let a = nn_run(&n_hats(&s), &NnConfig::default()).unwrap();
    let b = nn_run(&n_hats(&s), &NnConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn nn_stays_finite_on_long_streams() {
    for seed in 1..=4 {
        let s = stream(vec![(3, 2500), (30, 2500), (12, 2500), (40, 2500)], seed);
        let cfg = NnConfig {
            init_seed: seed,
            ..NnConfig::default()
        };
        let mut state = NnState::init(&cfg).unwrap();
        let mut ws = Workspace::default();
        for x in &s {
            let r = nn_step(&mut state, x.m.n_hat, &cfg, &mut ws).unwrap();
            assert!(r.output.is_finite() && r.detect_loss >= 0.0 && r.train_loss >= 0.0);
            assert!(state.prev_output >= 0.0);
        }
        assert!(state.mlp.params.iter().all(|p| p.is_finite()));
        assert!(state
            .adam
            .m
            .iter()
            .chain(&state.adam.v)
            .all(|p| p.is_finite()));
    }
}

#[test]
fn nn_regime_selects_one_weight_set() {
    let cfg = NnConfig::default();
    let s = stream(vec![(4, 300), (10, 300)], 6);
    for (t, r) in nn_run(&n_hats(&s), &cfg).unwrap().iter().enumerate() {
        let (a, b, lr) = cfg.weights(r.regime);
        assert_eq!((r.alpha, r.beta, r.lr), (a, b, lr));
        let changed = t < cfg.warmup_slots as usize || r.triggered;
        assert_eq!(r.regime == Regime::Changed, changed, "slot {t}");
    }
}

#[test]
fn nn_moves_less_in_the_stable_regime() {
    let stable = NnConfig {
        warmup_slots: 0,
        e_d: 1e12,
        ..NnConfig::default()
    };
    let changed = NnConfig {
        warmup_slots: u32::MAX,
        ..NnConfig::default()
    };
    let input = vec![10.0; 60];
    let mean_move = |cfg: &NnConfig| {
        let out: Vec<f64> = nn_run(&input, cfg)
            .unwrap()
            .iter()
            .map(|r| r.output)
            .collect();
        out.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (out.len() - 1) as f64
    };
    let (s, c) = (mean_move(&stable), mean_move(&changed));
    assert!(s < c, "stable {s} vs changed {c}");
}

#[test]
fn nn_initialisations_agree_after_warmup() {
    let s = stream(vec![(6, 1000)], 1);
    let x = n_hats(&s);
    let a = nn_run(
        &x,
        &NnConfig {
            init_seed: 1,
            ..NnConfig::default()
        },
    )
    .unwrap();
    let b = nn_run(
        &x,
        &NnConfig {
            init_seed: 2,
            ..NnConfig::default()
        },
    )
    .unwrap();
    let warmup = NnConfig::default().warmup_slots as usize;
    for (t, (ra, rb)) in a.iter().zip(&b).enumerate().skip(warmup) {
        assert!(
            (ra.estimate() - rb.estimate()).abs() <= 2.0,
            "slot {t}: {} vs {}",
            ra.estimate(),
            rb.estimate()
        );
    }
}

#[test]
fn nn_tracks_small_counts() {
    let s = stream(vec![(3, 2000), (6, 2000), (9, 2000), (12, 2000)], 2);
    let out = nn_run(&n_hats(&s), &NnConfig::default()).unwrap();
    for seg in 0..4 {
        let rows = &out[seg * 2000 + 1000..(seg + 1) * 2000];
        let n = s[seg * 2000].n_true as f64;
        let inside = rows
            .iter()
            .filter(|r| (r.estimate() - n).abs() <= 1.0)
            .count();
        assert!(
            inside as f64 >= 0.8 * rows.len() as f64,
            "segment {seg}: {inside} of {}",
            rows.len()
        );
    }
}
