use intquant::dist::{Distribution, ParametricDist, Sample, StepCdf};
use intquant::lfunc::{
    kw_identity_check, l_integral_direct, l_integral_layered, reduce_partition, BuiltinWeight,
    MonotoneFn, WeightFunction,
};
use intquant::risk::{
    self, estimate, point_estimate, population, sigma2_upper, EstimateOptions, Measure,
    VarianceMethod,
};
use intquant::rng::{self, tags};
use intquant::Error;
use proptest::prelude::*;

fn positive_sample() -> impl Strategy<Value = Sample> {
    prop::collection::vec(0.01f64..100.0, 2..60).prop_map(|v| Sample::new(v).unwrap())
}

fn step_cdf() -> impl Strategy<Value = StepCdf> {
    prop::collection::vec((-20i32..20, 1u32..50), 1..10).prop_map(|pairs| {
        let total: u32 = pairs.iter().map(|p| p.1).sum();
        let atoms = pairs.iter().map(|p| p.0 as f64 * 0.5).collect();
        let masses = pairs.iter().map(|p| p.1 as f64 / total as f64).collect();
        StepCdf::new(atoms, masses).unwrap()
    })
}

fn draw(d: &ParametricDist, n: usize, seed: u64) -> Sample {
    let mut rng = rng::stream(seed, tags::KS_SANITY, 7);
    Sample::new((0..n).map(|_| d.sample(&mut rng)).collect()).unwrap()
}

proptest! {
    #[test]
    fn tvar_translation_equivariant(s in positive_sample(), p in 0.05f64..0.95, c in -10.0f64..10.0) {
        let t = s.affine(1.0, c).unwrap();
        for m in [Measure::TvarUp, Measure::TvarDown] {
            let d = point_estimate(&t, m, p).unwrap() - point_estimate(&s, m, p).unwrap();
            prop_assert!((d - c).abs() < 1e-8);
        }
    }

    #[test]
    fn lorenz_and_gini_scale_invariant(s in positive_sample(), p in 0.05f64..0.5, a in 0.1f64..10.0) {
        let t = s.affine(a, 0.0).unwrap();
        for m in [Measure::Lorenz, Measure::Gini] {
            let x = point_estimate(&s, m, p).unwrap();
            let y = point_estimate(&t, m, p).unwrap();
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn gini_from_lorenz(s in positive_sample(), p in 0.05f64..0.5) {
        let g = point_estimate(&s, Measure::Gini, p).unwrap();
        let l1 = point_estimate(&s, Measure::Lorenz, 1.0 - p).unwrap();
        let l2 = point_estimate(&s, Measure::Lorenz, p).unwrap();
        prop_assert!((g - (1.0 - l1 - l2)).abs() < 1e-9);
    }

    #[test]
    fn ci_brackets_estimate(s in positive_sample(), p in 0.05f64..0.95) {
        let e = estimate(&s, Measure::TvarUp, p, &EstimateOptions::default()).unwrap();
        prop_assert!(e.ci_lo <= e.estimate && e.estimate <= e.ci_hi);
        prop_assert!(e.stderr >= 0.0);
    }

    #[test]
    fn dual_path_on_step_cdfs(f in step_cdf(), p in 0.05f64..0.95, lambda in 0.0f64..1.0) {
        for b in [
            BuiltinWeight::Gmd,
            BuiltinWeight::Logistic,
            BuiltinWeight::TailGini { p },
            BuiltinWeight::GiniShortfall { p, lambda },
        ] {
            let w = b.weight();
            let direct = l_integral_direct(&f, &w).unwrap();
            let layered = l_integral_layered(&f, &w).unwrap();
            prop_assert!((direct - layered).abs() < 1e-9 * (1.0 + direct.abs()), "{:?}", b);
        }
    }

    #[test]
    fn kw_identity_on_step_pairs(f in step_cdf(), g in step_cdf()) {
        for b in [BuiltinWeight::Gmd, BuiltinWeight::Logistic, BuiltinWeight::TailGini { p: 0.3 }] {
            let c = kw_identity_check(&f, &g, &b.weight()).unwrap();
            prop_assert!(c.residual.abs() < 1e-10, "{:?} {:?}", b, c);
        }
    }
}

#[test]
fn population_gini_from_lorenz() {
    let d = ParametricDist::pareto1(1.0, 3.0).unwrap();
    for p in [0.1, 0.25, 0.4] {
        let g = population(&d, Measure::Gini, p).unwrap();
        let l = population(&d, Measure::Lorenz, 1.0 - p).unwrap()
            + population(&d, Measure::Lorenz, p).unwrap();
        assert!((g - (1.0 - l)).abs() < 1e-12);
    }
}

#[test]
fn uniform_population_values() {
    let u = ParametricDist::uniform(0.0, 2.0).unwrap();
    // TVaR_up(p) = 1 + p, LC(p) = p²
    assert!((population(&u, Measure::TvarUp, 0.75).unwrap() - 1.75).abs() < 1e-12);
    assert!((population(&u, Measure::TvarDown, 0.5).unwrap() - 0.5).abs() < 1e-12);
    assert!((population(&u, Measure::Lorenz, 0.3).unwrap() - 0.09).abs() < 1e-12);
    let zero_mean = ParametricDist::uniform(-1.0, 1.0).unwrap();
    assert!(matches!(
        population(&zero_mean, Measure::Lorenz, 0.3),
        Err(Error::DegenerateMean(_))
    ));
}

#[test]
fn plugin_variance_converges() {
    let u = ParametricDist::uniform(0.0, 2.0).unwrap();
    let s = draw(&u, 50_000, 3);
    let v = sigma2_upper(&s, 0.5).unwrap();
    assert!((v - 5.0 / 48.0).abs() < 0.005, "{v}");
}

#[test]
fn tvar_interval_coverage() {
    // U(0,2), p = 1/2: asymptotic variance of TVaR_up is (5/48)/(1/4)
    let u = ParametricDist::uniform(0.0, 2.0).unwrap();
    let truth = population(&u, Measure::TvarUp, 0.5).unwrap();
    let reps = 400;
    let hits = (0..reps)
        .filter(|&r| {
            let e = estimate(
                &draw(&u, 2000, 1000 + r),
                Measure::TvarUp,
                0.5,
                &EstimateOptions::default(),
            )
            .unwrap();
            e.ci_lo <= truth && truth <= e.ci_hi
        })
        .count();
    let cov = hits as f64 / reps as f64;
    assert!((0.91..=0.985).contains(&cov), "coverage {cov}");
}

#[test]
fn bootstrap_close_to_plugin() {
    let d = ParametricDist::pareto1(1.0, 5.0).unwrap();
    let s = draw(&d, 3000, 5);
    for m in [Measure::TvarUp, Measure::Lorenz, Measure::Gini] {
        let plug = risk::plugin_variance(&s, m, 0.3).unwrap();
        let boot = risk::bootstrap_variance(&s, m, 0.3, 400, 9).unwrap();
        assert!((boot / plug - 1.0).abs() < 0.3, "{m:?}: {boot} vs {plug}");
    }
    let opts = EstimateOptions {
        method: VarianceMethod::Bootstrap,
        bootstrap_reps: 200,
        ..EstimateOptions::default()
    };
    let a = estimate(&s, Measure::TvarUp, 0.3, &opts).unwrap();
    let b = estimate(&s, Measure::TvarUp, 0.3, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gini_shortfall_without_loading_is_tvar() {
    for d in [
        ParametricDist::uniform(0.0, 1.0).unwrap(),
        ParametricDist::normal(1.0, 2.0).unwrap(),
        ParametricDist::pareto1(1.0, 3.0).unwrap(),
    ] {
        for p in [0.2, 0.5, 0.8] {
            let w = BuiltinWeight::GiniShortfall { p, lambda: 0.0 }.weight();
            let l = l_integral_direct(&d, &w).unwrap();
            let t = population(&d, Measure::TvarUp, p).unwrap();
            assert!((l - t).abs() < 1e-9, "{d:?} p={p}: {l} vs {t}");
        }
    }
}

#[test]
fn gmd_on_uniform_and_normal() {
    // ∫ F^{-1}(4u − 2) du = half the Gini mean difference: (b − a)/3 for U(a,b)
    let u = ParametricDist::uniform(0.0, 2.0).unwrap();
    let w = BuiltinWeight::Gmd.weight();
    assert!((l_integral_direct(&u, &w).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    // 2σ/√π for the normal
    let n = ParametricDist::normal(0.0, 1.5).unwrap();
    let expect = 2.0 * 1.5 / std::f64::consts::PI.sqrt();
    assert!((l_integral_layered(&n, &w).unwrap() - expect).abs() < 1e-8);
}

#[test]
fn zigzag_reduces_to_two_pieces() {
    let w = WeightFunction::new(
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        vec![
            (MonotoneFn::linear(0.0, 4.0), MonotoneFn::zero()),
            (MonotoneFn::constant(1.0), MonotoneFn::linear(-1.0, 4.0)),
            (MonotoneFn::linear(-2.0, 4.0), MonotoneFn::zero()),
            (MonotoneFn::constant(1.0), MonotoneFn::linear(-3.0, 4.0)),
        ],
    )
    .unwrap();
    let r = reduce_partition(&w);
    assert_eq!(r.k(), 2);
    assert!(r.is_monotone_on_grid(4000));
    for i in 0..4000 {
        let u = i as f64 / 4000.0;
        assert!((w.eval(u) - r.eval(u)).abs() < 1e-12, "u={u}");
    }
    let d = ParametricDist::pareto1(1.0, 4.0).unwrap();
    let a = l_integral_direct(&d, &w).unwrap();
    let b = l_integral_layered(&d, &r).unwrap();
    assert!((a - b).abs() < 1e-6 * a.abs(), "{a} vs {b}");
    // a sample path through the same weight
    let s = draw(&d, 1000, 2).ecdf();
    let a = l_integral_direct(&s, &w).unwrap();
    let b = l_integral_layered(&s, &r).unwrap();
    assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    assert!(d.mean().unwrap() > 0.0);
}
