//! Property tests for invariants that cut across modules.

use proptest::prelude::*;
use tamed_em_core::controls::{check_superadditivity, ControlFn};
use tamed_em_core::diagnostics::{varpi_bound_from_norms, VarpiBoundMode};
use tamed_em_core::fields::{DiffusionField, DriftField, NormGrid, VectorField};
use tamed_em_core::rates::{fit_rate, strong_error, RateConfig, Reference, DEFAULT_BATCHES};
use tamed_em_core::scheme::{BrownianPath, DriftModel, InitialCondition, SchemeConfig};
use tamed_em_core::taming::{verify_condition_b, ConditionBCertificate, TameOptions, TamedDrift, TamingStrategy};
use tamed_em_core::transport::{solve_transport, InitialDatum, TransportProblem, TransportRun};
use tamed_em_core::Workers;

fn singular() -> DriftField {
    DriftField::power_singularity(1, 0.4, 1.0, 2.0, 16.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregation_is_exact_sum(seed in any::<u64>(), index in 0u64..1000, k in 1u32..6, d in 1usize..3) {
        let fine_n = 1usize << 8;
        let coarse_n = fine_n >> k;
        let fine = BrownianPath::generate(seed, index, d, fine_n);
        let coarse = fine.aggregate(coarse_n).unwrap();
        let ratio = fine_n / coarse_n;
        for j in 0..coarse_n {
            for c in 0..d {
                let direct: f64 = (0..ratio).map(|i| fine.increment(j * ratio + i)[c]).sum();
                prop_assert!((coarse.increment(j)[c] - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn absolute_truncation_is_bounded(n in 1usize..5000, chi in 0.01f64..1.0, c in 0.1f64..5.0, x in -2.0f64..2.0) {
        let tamed = TamedDrift::new(singular(), TamingStrategy::AbsoluteTruncation { c, chi }, n, &TameOptions::default()).unwrap();
        let mut out = [0.0];
        tamed.eval(0.3, &[x], &mut out);
        let level = c * (n as f64).powf(chi);
        prop_assert!(out[0].abs() <= level);
        let mut raw = [0.0];
        singular().eval(0.3, &[x], &mut raw);
        // Kept values are untouched, removed ones are zero.
        prop_assert!(out[0] == raw[0] || out[0] == 0.0);
    }

    #[test]
    fn truncation_certificate_holds(k in 2u32..13, chi in 0.05f64..0.45) {
        let n = 1usize << k;
        let tamed = TamedDrift::new(singular(), TamingStrategy::AbsoluteTruncation { c: 1.0, chi }, n, &TameOptions::default()).unwrap();
        let cert = ConditionBCertificate::standard(&tamed, &NormGrid::default()).unwrap();
        let r = verify_condition_b(&tamed, &cert, 200, k as u64);
        prop_assert!(r.holds, "{:?}", r);
    }

    #[test]
    fn built_controls_are_superadditive(nu in 0.0f64..0.99, start in 0.01f64..0.5, theta in 0.0f64..1.0, power in 1.0f64..4.0, seed in any::<u64>()) {
        let elapsed = ControlFn::elapsed(0.0, 1.0).unwrap();
        let weight = ControlFn::singular_weight(nu, start, 1.0).unwrap();
        for w in [
            weight.clone(),
            ControlFn::product(elapsed.clone(), weight.clone(), theta).unwrap(),
            ControlFn::sum_with_power(elapsed.clone(), weight, power).unwrap(),
        ] {
            let r = check_superadditivity(&w, 100, 1e-12, seed);
            prop_assert_eq!(r.violations, 0, "{:?}", w.kind());
        }
    }

    #[test]
    fn planted_power_law_recovered(a in 0.01f64..100.0, beta in 0.05f64..2.0) {
        let ns: Vec<usize> = (3..=12).map(|k| 1 << k).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| a * (n as f64).powf(-beta)).collect();
        let fit = fit_rate(&ns, &errs, None).unwrap();
        prop_assert!((fit.beta - beta).abs() <= 1e-10);
        prop_assert!((fit.a - a).abs() <= 1e-9 * a);
    }
}

#[test]
fn strong_error_independent_of_workers() {
    let cfg = SchemeConfig::new(
        16,
        InitialCondition::Gaussian {
            mean: vec![0.2],
            std: 0.3,
        },
        DriftModel::Tamed {
            base: singular(),
            strategy: TamingStrategy::RelativeTruncation { c: 1.0, chi: 0.25 },
            options: TameOptions::default(),
        },
        DiffusionField::trig_elliptic(1, 0.5).unwrap(),
    );
    let mut rc = RateConfig {
        levels: vec![8, 16, 32],
        reference: Reference::SelfConvergence { n_ref: 512 },
        paths: 200,
        p_bar: 2.0,
        master_seed: 4,
        workers: Workers(1),
        batches: DEFAULT_BATCHES,
    };
    let one = strong_error(&cfg, &rc).unwrap();
    rc.workers = Workers(6);
    let six = strong_error(&cfg, &rc).unwrap();
    assert_eq!(one.digest, six.digest);
    assert_eq!(one.levels, six.levels);
}

#[test]
fn zero_drift_scheme_is_brownian_motion() {
    let cfg = SchemeConfig::new(
        64,
        InitialCondition::Point { x: vec![0.5, -1.0] },
        DriftModel::Plain(DriftField::zero(2)),
        DiffusionField::identity(2),
    );
    let level = cfg.prepare(64).unwrap();
    for i in 0..20 {
        let w = BrownianPath::generate(8, i, 2, 64);
        let path = level.simulate(&w).unwrap();
        let values = w.values();
        for j in 0..=64 {
            for c in 0..2 {
                let expected = [0.5, -1.0][c] + values[j * 2 + c];
                assert!((path.at(j)[c] - expected).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_drift_transport_follows_brownian_shift() {
    let problem = TransportProblem {
        drift: DriftModel::Plain(DriftField::zero(1)),
        rho: InitialDatum::Gaussian {
            center: vec![0.3],
            width: 0.7,
        },
        taus: vec![0.125, 0.5, 1.0],
        points: vec![vec![-0.5], vec![1.0]],
        quadrature_nodes: 1,
    };
    let run = TransportRun {
        paths: 30,
        master_seed: 21,
        brownian_steps: 256,
        workers: Workers(2),
    };
    let s = solve_transport(&problem, 64, &run).unwrap();
    for i in 0..run.paths {
        let w = BrownianPath::generate(run.master_seed, i as u64, 1, run.brownian_steps).values();
        for (k, tau) in problem.taus.iter().enumerate() {
            let w_tau = w[(tau * run.brownian_steps as f64).round() as usize];
            for (j, x) in problem.points.iter().enumerate() {
                assert!((s.at(i, k, j) - problem.rho.value(&[x[0] + w_tau])).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn drift_difference_norm_decreases_with_n() {
    let grid = NormGrid {
        half_width: 1.5,
        resolution: 1 << 14,
        ..NormGrid::default()
    };
    let b = singular();
    let mode = VarpiBoundMode::MixedNorm { p1: 1.5, q1: 4.0 };
    let values: Vec<f64> = [4usize, 16, 64, 256]
        .iter()
        .map(|&n| {
            let bn = TamedDrift::new(
                b.clone(),
                TamingStrategy::AbsoluteTruncation { c: 1.0, chi: 0.5 },
                n,
                &TameOptions::default(),
            )
            .unwrap();
            varpi_bound_from_norms(&b, &bn, &mode, &grid).unwrap().value
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    assert!(values[3] > 0.0);
}
