use plugsense::eval::{detection_rates, iteration_curve};
use plugsense::features::{build_views, DEFAULT_VIEWS};
use plugsense::selftrain::{run_self_training, PriorSchedule, SelfTrainConfig, StopReason};
use plugsense::sim::{preset, simulate_user, START_EPOCH};
use plugsense::{Error, PowerTrace, Presence, WindowSpec};

/// Two days at 1 Hz: busy and rippling during office hours, near-flat otherwise.
fn office_trace() -> PowerTrace {
    let schedule = PriorSchedule::office();
    let watts: Vec<f64> = (0..2 * 86_400i64)
        .map(|i| {
            let t = START_EPOCH + i;
            match schedule.state_at(t) {
                Presence::Present => 100.0 + ((i * 7919) % 11) as f64,
                Presence::Absent => 2.0 + (i % 2) as f64 * 0.01,
            }
        })
        .collect();
    PowerTrace::from_watts("desk", START_EPOCH, 1, &watts).unwrap()
}

#[test]
fn prior_matching_trace_is_a_fixed_point() {
    let fm = build_views(&office_trace(), &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    let schedule = PriorSchedule::office();
    let out = run_self_training(&fm, &schedule, &SelfTrainConfig::default()).unwrap();
    assert_eq!(out.presence.states(), schedule.labels_for(fm.window_starts()).as_slice());

    let d = &out.diagnostics;
    assert_eq!(d.best_iteration, 1);
    assert_eq!(d.stop_reason, Some(StopReason::NegativePhi));
    let r1 = &d.records[1];
    assert_eq!(r1.eps_hat, Some(0.0));
    assert_eq!(r1.eta_hat, 0.0);
    assert_eq!(r1.u, 0);
    assert_eq!(r1.u_k, fm.len() as f64);
    // the second round reproduces the first exactly, so the utility stops growing
    assert_eq!(d.records.len(), 3);
    assert_eq!(d.records[2].phi, 0.0);
}

#[test]
fn same_seed_same_run() {
    let sim = simulate_user(&preset("user26").unwrap().with_days(5), 3).unwrap();
    let fm = build_views(&sim.trace, &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    let cfg = SelfTrainConfig {
        seed: 9,
        stop_on_negative_phi: false,
        max_iter: 8,
        ..Default::default()
    };
    let a = run_self_training(&fm, &PriorSchedule::office(), &cfg).unwrap();
    let b = run_self_training(&fm, &PriorSchedule::office(), &cfg).unwrap();
    assert_eq!(a.presence, b.presence);
    assert_eq!(a.diagnostics, b.diagnostics);
    assert_eq!(a.diagnostics.to_csv(), b.diagnostics.to_csv());
}

#[test]
fn error_drops_from_the_prior_then_plateaus() {
    let sim = simulate_user(&preset("user17").unwrap(), 2).unwrap();
    let fm = build_views(&sim.trace, &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    let schedule = PriorSchedule::office();
    let prior = plugsense::PresenceSeries::new(fm.window_starts().to_vec(), schedule.labels_for(fm.window_starts())).unwrap();
    let prior_error = 1.0 - detection_rates(&prior, &sim.truth).unwrap().overall;

    let cfg = SelfTrainConfig {
        stop_on_negative_phi: false,
        retain_labelings: true,
        ..Default::default()
    };
    let out = run_self_training(&fm, &schedule, &cfg).unwrap();
    let curve = iteration_curve(&out.diagnostics, &sim.truth).unwrap();
    assert_eq!(curve.len(), 30);
    let best = curve.iter().map(|p| p.misclassification).fold(1.0, f64::min);
    assert!(curve[0].misclassification < prior_error / 4.0, "{} vs prior {prior_error}", curve[0].misclassification);
    for p in &curve {
        assert!(p.misclassification < best + 0.05, "round {} at {}", p.iteration, p.misclassification);
    }
    // the indicator fires within the first few rounds, close to the best error
    let first_stop = curve.iter().find(|p| p.stop_indicator).expect("indicator fires");
    assert!(first_stop.iteration <= 4, "{}", first_stop.iteration);
    assert!(curve[first_stop.iteration - 1].misclassification < best + 0.02);
}

#[test]
fn reported_labels_come_from_the_best_round() {
    let sim = simulate_user(&preset("user8").unwrap().with_days(10), 4).unwrap();
    let fm = build_views(&sim.trace, &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    for stop in [true, false] {
        let cfg = SelfTrainConfig {
            alpha1: 0.8,
            alpha2: 0.8,
            max_iter: 12,
            stop_on_negative_phi: stop,
            retain_labelings: true,
            ..Default::default()
        };
        let out = run_self_training(&fm, &PriorSchedule::office(), &cfg).unwrap();
        let d = &out.diagnostics;
        let best = d.best_iteration;
        assert!(d.records.iter().all(|r| r.u_k <= d.records[best].u_k));
        assert!(d.records[..best].iter().all(|r| r.u_k < d.records[best].u_k));
        let votes = d.labelings.as_ref().unwrap();
        if best < votes.len() {
            assert_eq!(out.presence.states(), votes[best].as_slice());
        }
    }
}

#[test]
fn rate_search_keeps_identities() {
    let sim = simulate_user(&preset("user20").unwrap().with_days(6), 5).unwrap();
    let fm = build_views(&sim.trace, &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    let cfg = SelfTrainConfig {
        rate_search: true,
        ..Default::default()
    };
    let out = run_self_training(&fm, &PriorSchedule::office(), &cfg).unwrap();
    for w in out.diagnostics.records.windows(2) {
        assert_eq!(w[1].phi, w[1].u_k - w[0].u_k);
        assert_eq!(w[1].stopped, w[1].phi <= 0.0);
        assert!((0.0..=1.0).contains(&w[1].alpha1) && (0.0..=1.0).contains(&w[1].alpha2));
    }
}

#[test]
fn empty_prior_class_reports_degenerate_labeling() {
    let fm = build_views(&office_trace(), &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    let never = PriorSchedule::new([Presence::Absent; 24]);
    match run_self_training(&fm, &never, &SelfTrainConfig::default()) {
        Err(Error::DegenerateLabeling { diagnostics, .. }) => {
            let d = diagnostics.expect("diagnostics attached");
            assert_eq!(d.records.len(), 1);
            assert_eq!(d.records[0].l1, 0);
        }
        other => panic!("expected degenerate labeling, got {other:?}"),
    }
}

#[test]
fn invalid_config_rejected() {
    let fm = build_views(&office_trace(), &WindowSpec::default(), &DEFAULT_VIEWS).unwrap();
    for cfg in [
        SelfTrainConfig { alpha1: 1.5, ..Default::default() },
        SelfTrainConfig { max_iter: 0, ..Default::default() },
        SelfTrainConfig { epsilon_grid_step: 0.0, ..Default::default() },
    ] {
        assert!(matches!(
            run_self_training(&fm, &PriorSchedule::office(), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
