mod support;

use ddzo::o2nc::certificate_at;
use ddzo::problems::test_functions::{identity, synthetic_instance, SyntheticKind, TestKind};
use ddzo::schedules::{clamp_budget, schedule_theorem2};
use ddzo::smoothing::mc_smoothed_value_pair;
use ddzo::{
    goldstein_certificate, make_rng, noisy_value_oracle, run_o2nc, run_sgd, BaselineKind, DecisionVector,
    EstimatorOption, O2NCConfig, SGDConfig, SgdEstimator, SmoothingParams, TraceDetail,
};
use proptest::prelude::*;
use support::traces::o2nc_violations;

fn option_of(i: u8) -> EstimatorOption {
    if i % 2 == 0 {
        EstimatorOption::TwoPoint
    } else {
        EstimatorOption::OnePointResidual
    }
}

fn kind_of(i: u8) -> SyntheticKind {
    match i % 4 {
        0 => SyntheticKind::Fixed(TestKind::Norm),
        1 => SyntheticKind::Fixed(TestKind::AbsSum),
        2 => SyntheticKind::RandomQuadratic,
        _ => SyntheticKind::RandomLinear,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn o2nc_traces_respect_geometry_and_budget(
        seed in 0u64..1_000_000,
        d in 1usize..6,
        m in 1usize..12,
        k in 1usize..8,
        log_eta in -4.0f64..1.0,
        delta in 0.01f64..2.0,
        sigma in 0.0f64..1.0,
        opt in 0u8..2,
        kind in 0u8..4,
    ) {
        let (_, mut oracle) = synthetic_instance(&kind_of(kind), d, sigma, seed).unwrap();
        let cfg = O2NCConfig::new(delta, m, k, 10f64.powf(log_eta), option_of(opt)).unwrap();
        let trace = run_o2nc(&cfg, &mut oracle, &mut make_rng(seed)).unwrap();
        let bad = o2nc_violations(&trace, &cfg);
        prop_assert!(bad.is_empty(), "{:?}", bad);
        prop_assert_eq!(trace.queries, cfg.predicted_queries());
        prop_assert_eq!(oracle.queries(), cfg.predicted_queries());

        let (_, mut again) = synthetic_instance(&kind_of(kind), d, sigma, seed).unwrap();
        prop_assert_eq!(run_o2nc(&cfg, &mut again, &mut make_rng(seed)).unwrap(), trace);
    }

    #[test]
    fn sgd_uses_exactly_2bt_queries(
        seed in 0u64..1_000_000,
        d in 1usize..6,
        b in 1usize..6,
        t in 1usize..30,
        kind in 0u8..4,
    ) {
        let (_, mut oracle) = synthetic_instance(&kind_of(kind), d, 0.3, seed).unwrap();
        let cfg = SGDConfig::new(0.2, b, t, 0.01).unwrap();
        let trace = run_sgd(&cfg, &mut oracle, &mut make_rng(seed)).unwrap();
        prop_assert_eq!(oracle.queries(), 2 * (b * t) as u64);
        prop_assert_eq!(trace.records.len(), t);
        prop_assert_eq!(trace.block_len, 1);
        prop_assert_eq!(&trace.output, &trace.records[trace.output_block].y);
    }

    #[test]
    fn baseline_sgd_uses_declared_queries(seed in 0u64..1_000, d in 1usize..5, b in 1usize..4, t in 1usize..10, which in 0u8..4) {
        let kind = [BaselineKind::Coordinate, BaselineKind::Gaussian, BaselineKind::Sphere, BaselineKind::PlainOnePoint][which as usize];
        let (_, mut oracle) = synthetic_instance(&SyntheticKind::Fixed(TestKind::Norm), d, 0.1, seed).unwrap();
        let cfg = SGDConfig::new(0.2, b, t, 0.01).unwrap().with_estimator(SgdEstimator::Baseline(kind));
        run_sgd(&cfg, &mut oracle, &mut make_rng(seed)).unwrap();
        prop_assert_eq!(oracle.queries(), (b * t) as u64 * kind.queries_per_estimate(d));
        prop_assert_eq!(oracle.queries(), cfg.predicted_queries(d));
    }
}

#[test]
fn compact_traces_keep_query_points() {
    let cfg = O2NCConfig::new(0.5, 4, 3, 0.1, EstimatorOption::TwoPoint).unwrap();
    let run = |detail| {
        let (_, mut o) = synthetic_instance(&SyntheticKind::Fixed(TestKind::Norm), 2, 0.1, 3).unwrap();
        run_o2nc(&cfg.clone().with_detail(detail), &mut o, &mut make_rng(9)).unwrap()
    };
    let (full, compact) = (run(TraceDetail::Full), run(TraceDetail::Compact));
    assert!(compact.records.iter().all(|r| r.x.is_none() && r.g.is_none()));
    let ys = |t: &ddzo::RunTrace| t.records.iter().map(|r| r.y.clone()).collect::<Vec<_>>();
    assert_eq!(ys(&full), ys(&compact));
    assert_eq!(full.output, compact.output);
}

#[test]
fn clamped_schedules_never_exceed_the_cap() {
    let spec = ddzo::ProblemSpec::new(2, 1.0, 0.1, 100.0).unwrap();
    for option in [EstimatorOption::TwoPoint, EstimatorOption::OnePointResidual] {
        let s = schedule_theorem2(&spec, 0.1, 2.0, option).unwrap();
        assert!(s.predicted_queries > 100_000);
        let c = clamp_budget(&s, 100_000).unwrap();
        assert!(c.predicted_queries <= 100_000);
        assert_eq!(c.block_len, s.block_len);
        assert_eq!(c.step_size, s.step_size);
        let cfg = c.o2nc_config().unwrap();
        let (_, mut o) = synthetic_instance(&SyntheticKind::Fixed(TestKind::Norm), 2, 0.1, 1).unwrap();
        let trace = run_o2nc(&cfg, &mut o, &mut make_rng(1)).unwrap();
        assert_eq!(trace.queries, c.predicted_queries);
    }
}

#[test]
fn sgd_descends_on_a_smooth_convex_problem() {
    // f(x) = ||x - c||^2 with the admissible step 1 / beta_delta. Averaged over
    // 50 seeds, f_delta(x_{t+1}) <= f_delta(x_t) up to 4 standard errors.
    let center = vec![1.0, -2.0];
    let (f, _) = synthetic_instance(
        &SyntheticKind::Fixed(TestKind::Quadratic { center: center.clone() }),
        2,
        0.0,
        0,
    )
    .unwrap();
    let spec = f.problem_spec(0.2, 5.0).unwrap();
    let delta = 0.5;
    let cfg = SGDConfig::new(delta, 4, 20, 0.0).map(|_| ()).err();
    assert!(cfg.is_some(), "zero step must be rejected");
    let beta = ddzo::sgd::SGDConfig::new(delta, 4, 20, 1.0).unwrap().smoothness(&spec);
    let cfg = SGDConfig::new(delta, 4, 20, 1.0 / beta).unwrap();
    cfg.check_step(&spec).unwrap();

    let n_seeds = 50;
    let mut diffs = vec![Vec::new(); cfg.iterations - 1];
    let p = SmoothingParams::new(delta, 2_000).unwrap();
    for seed in 0..n_seeds {
        let (f, mut o) = synthetic_instance(&SyntheticKind::Fixed(TestKind::Quadratic { center: center.clone() }), 2, 0.2, seed).unwrap();
        let trace = run_sgd(&cfg, &mut o, &mut make_rng(seed)).unwrap();
        let mut rng = make_rng(1000 + seed);
        for t in 0..cfg.iterations - 1 {
            let pair = mc_smoothed_value_pair(|x: &[f64]| f.value(x), &trace.records[t + 1].y, &trace.records[t].y, &p, &mut rng).unwrap();
            diffs[t].push(pair.difference.mean);
        }
    }
    for (t, d) in diffs.iter().enumerate() {
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean <= 4.0 * (var / n).sqrt(), "t={t}: mean change {mean}");
    }
}

#[test]
fn sgd_contracts_a_quadratic_from_a_shifted_start() {
    let mut o = noisy_value_oracle(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1], 0.0).unwrap();
    let spec = ddzo::ProblemSpec::new(2, 2.0 * (10.0 + 0.0), 0.0, 2.0).unwrap();
    let delta = 0.5;
    let beta = SGDConfig::new(delta, 2, 5, 1.0).unwrap().smoothness(&spec);
    let cfg = SGDConfig::new(delta, 2, 5, 1.0 / beta)
        .unwrap()
        .with_start(DecisionVector::new(vec![1.0, 1.0]).unwrap());
    let trace = run_sgd(&cfg, &mut o, &mut make_rng(3)).unwrap();
    assert!(trace.last_iterate.norm() < 2f64.sqrt());
    assert_eq!(o.queries(), 20);
}

#[test]
fn o2nc_converges_on_the_performative_quadratic() {
    let kind = TestKind::PerformativeQuadratic {
        theta: vec![1.0, 0.0],
        eps: 0.25,
        a: identity(2),
    };
    // A quadratic keeps its gradient under smoothing, so a wide radius costs
    // no bias and keeps the estimator variance low.
    let cfg = O2NCConfig::new(1.0, 10, 4_000, 1e-4, EstimatorOption::TwoPoint).unwrap();
    let mut hits = 0;
    for seed in 0..5 {
        let (f, mut o) = synthetic_instance(&SyntheticKind::Fixed(kind.clone()), 2, 0.5, seed).unwrap();
        let trace = run_o2nc(&cfg, &mut o, &mut make_rng(seed)).unwrap();
        let star = f.stationary_point().unwrap();
        assert_eq!(star.as_slice(), &[-2.0, 0.0]);
        if trace.last_iterate.distance(&star) <= 0.3 {
            hits += 1;
        }
    }
    assert!(hits >= 4, "{hits}/5 seeds converged");
}

#[test]
fn certificate_examples() {
    let p = SmoothingParams::new(0.1, 20_000).unwrap();
    let mut rng = make_rng(4);

    let pts = vec![DecisionVector::new(vec![0.3, -0.2]).unwrap(); 3];
    let lin = certificate_at(&pts, &|x: &[f64]| 3.0 * x[0] + 4.0 * x[1], &p, &mut rng).unwrap();
    let se = lin.std_error.iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!((lin.value - 5.0).abs() <= 4.0 * se);

    let quad = certificate_at(&pts, &|x: &[f64]| x[0] * x[0] + x[1] * x[1], &p, &mut rng).unwrap();
    let expect = 2.0 * (0.13f64).sqrt();
    let se = quad.std_error.iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!((quad.value - expect).abs() <= 4.0 * se + 1e-9);

    let sym = [DecisionVector::new(vec![0.05]).unwrap(), DecisionVector::new(vec![-0.05]).unwrap()];
    let abs = certificate_at(&sym, &|x: &[f64]| x[0].abs(), &p, &mut rng).unwrap();
    assert!(abs.value <= 4.0 * abs.std_error[0] + 1e-9);
    let origin = [DecisionVector::zeros(1)];
    let at_zero = certificate_at(&origin, &|x: &[f64]| x[0].abs(), &p, &mut rng).unwrap();
    assert!(at_zero.value < 1e-12, "antithetic pairs cancel exactly at the kink");
}

#[test]
fn certificate_on_a_trace_uses_the_output_block() {
    let (_, mut o) = synthetic_instance(&SyntheticKind::Fixed(TestKind::Norm), 2, 0.1, 0).unwrap();
    let cfg = O2NCConfig::new(0.1, 5, 4, 0.01, EstimatorOption::TwoPoint)
        .unwrap()
        .with_start(DecisionVector::new(vec![1.0, 1.0]).unwrap());
    let trace = run_o2nc(&cfg, &mut o, &mut make_rng(2)).unwrap();
    let p = SmoothingParams::new(0.1, 1_000).unwrap();
    let a = goldstein_certificate(&trace, |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt(), &p, &mut make_rng(5)).unwrap();
    let b = certificate_at(trace.output_points(), &|x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt(), &p, &mut make_rng(5)).unwrap();
    assert_eq!(a, b);
    // Far from the kink the certificate is close to 1.
    assert!((a.value - 1.0).abs() < 0.05);
}
