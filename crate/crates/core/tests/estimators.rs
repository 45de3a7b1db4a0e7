use jdmlmc::estimators::{mc_params, run_mc, run_mlmc, LevelSchedule, MlmcCaps, PROBE_SAMPLES};
use jdmlmc::sde::{DeltaFunction, FnProblem, MertonProblem, MertonSpec, Payoff};
use jdmlmc::Error;

fn merton() -> (MertonSpec, MertonProblem, LevelSchedule) {
    let spec = MertonSpec::default();
    let schedule = LevelSchedule::new(2.0, 0.5, spec.delta().unwrap(), spec.horizon).unwrap();
    (spec, MertonProblem::new(spec).unwrap(), schedule)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn mc_sizing_examples() {
    let merton = MertonSpec::default().delta().unwrap();
    let p = mc_params(0.1, 0.5, &merton).unwrap();
    assert_eq!((p.samples, p.grid_density, p.truncation_dim), (100, 100, 16));
    assert_eq!(p.cost(), 160_000);
    let reciprocal = DeltaFunction::power_law(2.0, 1.0).unwrap();
    let p = mc_params(1.0, 0.5, &reciprocal).unwrap();
    assert_eq!((p.samples, p.grid_density, p.truncation_dim), (1, 1, 2));
    let p = mc_params(0.5, 0.5, &reciprocal).unwrap();
    assert_eq!((p.samples, p.grid_density, p.truncation_dim), (4, 4, 4));
    assert!(mc_params(0.0, 0.5, &merton).is_err());
}

#[test]
fn mc_report_cost_is_kmn() {
    let (spec, problem, _) = merton();
    let report = run_mc(&problem, &Payoff::call(1.0), 0.1, 0.5, &spec.delta().unwrap(), 9).unwrap();
    assert_eq!(report.total_cost, 160_000);
    assert_eq!(report.per_level.len(), 1);
    assert_eq!(report.per_level[0].samples_used, 100);
    assert!(report.value.is_finite() && report.value >= 0.0);
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let (spec, problem, schedule) = merton();
    let payoff = Payoff::call(1.0);
    let delta = spec.delta().unwrap();
    let mc1 = with_threads(1, || run_mc(&problem, &payoff, 0.1, 0.5, &delta, 3).unwrap());
    let mc4 = with_threads(4, || run_mc(&problem, &payoff, 0.1, 0.5, &delta, 3).unwrap());
    assert_eq!(mc1, mc4);
    let ml1 = with_threads(1, || run_mlmc(&problem, &payoff, 0.05, &schedule, 3, MlmcCaps::default()).unwrap());
    let ml3 = with_threads(3, || run_mlmc(&problem, &payoff, 0.05, &schedule, 3, MlmcCaps::default()).unwrap());
    assert_eq!(ml1, ml3);
    assert_eq!(ml1.value.to_bits(), ml3.value.to_bits());
}

#[test]
fn mlmc_report_invariants() {
    let (_, problem, schedule) = merton();
    let eps = 0.05;
    let report = run_mlmc(&problem, &Payoff::call(1.0), eps, &schedule, 17, MlmcCaps::default()).unwrap();
    assert!(report.converged);
    assert!(report.per_level.len() >= 3);
    let mut cost = 0;
    let mut value = 0.0;
    let mut budget = 0.0;
    for (l, stats) in report.per_level.iter().enumerate() {
        assert_eq!(stats.level, l);
        assert_eq!((stats.truncation_dim, stats.grid_density), schedule.params(l).unwrap());
        assert!(stats.samples_used >= PROBE_SAMPLES);
        assert!(stats.samples_used >= stats.target);
        assert!(stats.variance >= 0.0);
        cost += stats.samples_used * stats.unit_cost();
        value += stats.mean;
        budget += stats.allocation_variance / stats.target as f64;
    }
    assert_eq!(report.total_cost, cost);
    assert!((report.value - value).abs() <= 1e-12 * value.abs().max(1.0));
    assert!(budget <= eps * eps / 2.0 * (1.0 + 1e-9), "variance budget {budget}");
    assert!(report.informational_cost > report.total_cost);
}

#[test]
fn mlmc_caps_return_partial_reports() {
    let (_, problem, schedule) = merton();
    let payoff = Payoff::call(1.0);
    match run_mlmc(&problem, &payoff, 0.01, &schedule, 1, MlmcCaps { max_level: 3, ..MlmcCaps::default() }) {
        Err(Error::MaxLevelExceeded { max_level, partial }) => {
            assert_eq!(max_level, 3);
            assert!(!partial.converged);
            assert_eq!(partial.per_level.len(), 4);
        }
        other => panic!("expected level cap, got {other:?}"),
    }
    let err = run_mlmc(&problem, &payoff, 0.01, &schedule, 1, MlmcCaps { max_samples: 5000, ..MlmcCaps::default() })
        .unwrap_err();
    assert!(matches!(err, Error::MaxSamplesExceeded { .. }), "{err:?}");
    assert!(err.partial_report().is_some());
}

#[test]
fn mlmc_on_deterministic_drift_is_exact() {
    let problem = FnProblem::new(1, 1, 2.0, 0.0)
        .unwrap()
        .with_drift(|_, _, out| out[0] = 0.25)
        .with_initial_value(vec![1.0]);
    let schedule = LevelSchedule::new(2.0, 0.5, DeltaFunction::power_law(0.4, 0.5).unwrap(), 2.0).unwrap();
    let report = run_mlmc(&problem, &Payoff::identity(), 0.01, &schedule, 5, MlmcCaps::default()).unwrap();
    assert!((report.value - 1.5).abs() < 1e-12);
    assert!(report.converged);
}

#[test]
fn mlmc_and_mc_agree_on_merton() {
    // Both target the same expectation; their difference is within a few
    // combined standard errors.
    let (spec, problem, schedule) = merton();
    let payoff = Payoff::call(1.0);
    let delta = spec.delta().unwrap();
    let mc = run_mc(&problem, &payoff, 0.05, 0.5, &delta, 23).unwrap();
    let ml = run_mlmc(&problem, &payoff, 0.05, &schedule, 23, MlmcCaps::default()).unwrap();
    let se = (mc.estimator_variance() + ml.estimator_variance()).sqrt();
    assert!((mc.value - ml.value).abs() <= 4.0 * se + 0.05, "mc {} mlmc {} se {se}", mc.value, ml.value);
}

#[test]
fn beta_other_than_two() {
    let spec = MertonSpec::default();
    let problem = MertonProblem::new(spec).unwrap();
    let schedule = LevelSchedule::new(3.0, 0.5, spec.delta().unwrap(), 1.0).unwrap();
    let report = run_mlmc(&problem, &Payoff::call(1.0), 0.1, &schedule, 2, MlmcCaps::default()).unwrap();
    assert!(report.value.is_finite());
    assert_eq!(report.per_level[1].grid_density, 3);
}
