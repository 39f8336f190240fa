use skm_core::model::{EventSpec, ObservationModel, Observations, Participant};
use skm_core::vi::{learn_rates, LearnConfig, RateEstimator};
use skm_core::SkmSystem;

const RECOVER: usize = 0;
const INFECT: usize = 1;
const UNUSED: usize = 2;

/// One individual that alternates between ten infectious steps and one
/// susceptible step, five times: 50 infectious exposures, 5 recoveries,
/// 4 susceptible exposures and 4 infections.
fn fully_observed() -> (SkmSystem, Observations) {
    let block = [vec![1; 10], vec![0]].concat();
    let path: Vec<usize> = block
        .iter()
        .cycle()
        .take(block.len() * 5)
        .copied()
        .collect();
    let horizon = path.len();
    let step = || {
        vec![
            EventSpec::new(RECOVER, vec![Participant::new(0, vec![0.0, 1.0], -1)]),
            EventSpec::new(INFECT, vec![Participant::new(0, vec![1.0, 0.0], 1)]),
        ]
    };
    let events = std::iter::once(vec![])
        .chain((1..horizon).map(|_| step()))
        .collect();
    let system = SkmSystem::new(1, 2, vec![vec![0.5, 0.5]], vec![0.3, 0.3, 0.2], events).unwrap();
    let rows: Vec<Vec<usize>> = path.iter().map(|&x| vec![x]).collect();
    (system, Observations::from_states(&rows))
}

#[test]
fn fully_observed_rates_are_count_ratios() {
    let (system, obs) = fully_observed();
    for estimator in [RateEstimator::Approximate, RateEstimator::Exact] {
        let config = LearnConfig {
            estimator,
            ..Default::default()
        };
        let out = learn_rates(&system, &ObservationModel::identity(2), &obs, &config).unwrap();
        assert!(
            (out.rates[RECOVER] - 5.0 / 50.0).abs() < 1e-12,
            "{estimator:?}: {:?}",
            out.rates
        );
        assert!(
            (out.rates[INFECT] - 1.0).abs() < 1e-12,
            "{estimator:?}: {:?}",
            out.rates
        );
        assert!(out.converged);
        assert_eq!(out.trace[0], vec![0.3, 0.3, 0.2]);
    }
}

#[test]
fn unused_rates_keep_their_value_and_are_flagged() {
    let (system, obs) = fully_observed();
    let out = learn_rates(
        &system,
        &ObservationModel::identity(2),
        &obs,
        &LearnConfig::default(),
    )
    .unwrap();
    assert_eq!(out.rates[UNUSED], 0.2);
    assert_eq!(out.no_evidence, vec![false, false, true]);
}

#[test]
fn iteration_cap_is_respected() {
    let (system, obs) = fully_observed();
    let noisy = ObservationModel::binary(0.8, 0.9).unwrap();
    let config = LearnConfig {
        max_iters: 2,
        rel_tol: 1e-14,
        ..Default::default()
    };
    let out = learn_rates(&system, &noisy, &obs, &config).unwrap();
    assert_eq!(out.iterations, 2);
    assert_eq!(out.trace.len(), 3);
    assert!(!out.converged);
}

#[test]
fn invalid_learning_configs_are_rejected() {
    let (system, obs) = fully_observed();
    let model = ObservationModel::identity(2);
    let zero = LearnConfig {
        max_iters: 0,
        ..Default::default()
    };
    assert!(learn_rates(&system, &model, &obs, &zero).is_err());
    let tol = LearnConfig {
        rel_tol: f64::NAN,
        ..Default::default()
    };
    assert!(learn_rates(&system, &model, &obs, &tol).is_err());
}
