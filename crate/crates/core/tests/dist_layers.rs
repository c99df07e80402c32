use intquant::dist::{
    parse_dist_json, parse_sample_text, Distribution, ParametricDist, Sample, StepCdf,
};
use intquant::layers::{
    bound_chain, empirical_layer, empirical_lower, empirical_middle, empirical_middle_trimmed,
    empirical_upper, layer_integral, lower_moment_identity, remainder, upper_moment_identity,
    verify_decomposition, LayerSpec,
};
use intquant::montecarlo::ks_vs_standard_normal;
use intquant::rng::{self, tags};
use proptest::prelude::*;

fn step_cdf() -> impl Strategy<Value = StepCdf> {
    prop::collection::vec((-20i32..20, 1u32..50), 1..12).prop_map(|pairs| {
        let total: u32 = pairs.iter().map(|p| p.1).sum();
        let atoms = pairs.iter().map(|p| p.0 as f64 * 0.25).collect();
        let masses = pairs.iter().map(|p| p.1 as f64 / total as f64).collect();
        StepCdf::new(atoms, masses).unwrap()
    })
}

fn sample() -> impl Strategy<Value = Sample> {
    prop::collection::vec(-100.0f64..100.0, 1..60).prop_map(|v| Sample::new(v).unwrap())
}

proptest! {
    #[test]
    fn quantile_is_generalized_inverse(f in step_cdf(), u in 0.001f64..1.0) {
        let q = f.quantile(u).unwrap();
        prop_assert!(f.cdf(q) >= u);
        prop_assert!(f.cdf_left(q) < u || q == f.support().0);
    }

    #[test]
    fn ecdf_quantile_matches_step_cdf(s in sample(), u in 0.0f64..=1.0) {
        let via_step = s.ecdf().quantile(u).unwrap();
        prop_assert_eq!(s.ecdf_quantile(u).unwrap(), via_step);
    }

    #[test]
    fn layers_add_up_to_mean(s in sample(), p in 0.01f64..0.99) {
        let total = empirical_upper(&s, p).unwrap() + empirical_lower(&s, p).unwrap();
        prop_assert!((total - s.mean()).abs() <= 1e-10 * (1.0 + s.mean().abs()));
    }

    #[test]
    fn middle_forms_agree(s in sample(), a in 0.01f64..0.98, w in 0.005f64..0.5) {
        let b = (a + w).min(0.99);
        prop_assume!(b > a);
        let m = empirical_middle(&s, a, b).unwrap();
        let t = empirical_middle_trimmed(&s, a, b).unwrap();
        prop_assert!((m - t).abs() <= 1e-9 * (1.0 + m.abs()));
    }

    #[test]
    fn empirical_equals_population_of_ecdf(s in sample(), p in 0.01f64..0.99) {
        let f = s.ecdf();
        for spec in [LayerSpec::upper(p).unwrap(), LayerSpec::lower(p).unwrap(), LayerSpec::Full] {
            let e = empirical_layer(&s, spec).unwrap();
            let pop = layer_integral(&f, spec).unwrap();
            prop_assert!((e - pop).abs() <= 1e-9 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn translation_equivariance(s in sample(), p in 0.01f64..0.99, c in -50.0f64..50.0) {
        let shifted = s.affine(1.0, c).unwrap();
        let up = empirical_upper(&shifted, p).unwrap() - empirical_upper(&s, p).unwrap();
        let lo = empirical_lower(&shifted, p).unwrap() - empirical_lower(&s, p).unwrap();
        prop_assert!((up - c * (1.0 - p)).abs() < 1e-8);
        prop_assert!((lo - c * p).abs() < 1e-8);
    }

    #[test]
    fn decomposition_identities(f in step_cdf(), g in step_cdf(), p in 0.01f64..0.99, w in 0.01f64..0.5) {
        let mut specs = vec![LayerSpec::upper(p).unwrap(), LayerSpec::lower(p).unwrap(), LayerSpec::Full];
        if p + w < 1.0 {
            specs.push(LayerSpec::middle(p, p + w).unwrap());
        }
        for spec in specs {
            let r = verify_decomposition(spec, &f, &g).unwrap();
            prop_assert!(r.residual.abs() <= 1e-10, "{:?}", r);
            prop_assert!(r.rem_p1 >= 0.0 && r.rem_p2 >= 0.0);
        }
        prop_assert!(bound_chain(p, &f, &g).unwrap().holds(1e-12));
    }

    #[test]
    fn remainder_vanishes_on_diagonal(f in step_cdf(), p in 0.01f64..0.99) {
        prop_assert_eq!(remainder(p, &f, &f).unwrap(), 0.0);
    }

    #[test]
    fn moment_identities(f in step_cdf(), p in 0.01f64..0.99) {
        let (l, r) = upper_moment_identity(&f, p).unwrap();
        prop_assert!((l - r).abs() < 1e-10);
        let (l, r) = lower_moment_identity(&f, p).unwrap();
        prop_assert!((l - r).abs() < 1e-10);
    }
}

#[test]
fn mixed_pair_decomposition() {
    let f = ParametricDist::normal(0.0, 1.0).unwrap();
    let g = StepCdf::new(vec![-1.0, 0.0, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
    for spec in [
        LayerSpec::upper(0.7).unwrap(),
        LayerSpec::lower(0.2).unwrap(),
        LayerSpec::middle(0.1, 0.6).unwrap(),
    ] {
        let r = verify_decomposition(spec, &f, &g).unwrap();
        assert!(r.residual.abs() < 1e-8, "{r:?}");
        let r = verify_decomposition(spec, &g, &f).unwrap();
        assert!(r.residual.abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn parametric_population_integrals() {
    // ∫_p^1 x0 (1 − u)^{−1/α} du = x0 α/(α − 1) (1 − p)^{1 − 1/α}
    let d = ParametricDist::pareto1(2.0, 3.0).unwrap();
    let v = layer_integral(&d, LayerSpec::upper(0.4).unwrap()).unwrap();
    assert!((v - 2.0 * 1.5 * 0.6f64.powf(2.0 / 3.0)).abs() < 1e-12);
    // standard normal: ∫_p^1 Φ^{-1} = φ(Φ^{-1}(p))
    let n = ParametricDist::normal(0.0, 1.0).unwrap();
    let q = n.quantile(0.8).unwrap();
    let v = layer_integral(&n, LayerSpec::upper(0.8).unwrap()).unwrap();
    let phi = (-0.5 * q * q).exp() / (2.0 * std::f64::consts::PI).sqrt();
    assert!((v - phi).abs() < 1e-12);
}

#[test]
fn dist_json_and_sample_text() {
    let d = parse_dist_json(r#"{"dist":"step","atoms":[1,2],"masses":[0.5,0.5]}"#).unwrap();
    assert_eq!(d.as_dyn().mean().unwrap(), 1.5);
    let d = parse_dist_json(r#"{"dist":"gapped","a":0.5}"#).unwrap();
    assert_eq!(d.as_dyn().quantile(0.5).unwrap(), 0.5);
    assert!(parse_dist_json(r#"{"dist":"uniform","a":2,"b":1}"#).is_err());
    assert!(parse_dist_json(r#"{"a":0}"#).is_err());
    assert!(parse_sample_text("1 2 x").is_err());
    assert!(parse_sample_text("# only a comment\n").is_err());
}

#[test]
fn ks_sanity_band() {
    // √n·D_n is asymptotically Kolmogorov distributed, median ≈ 0.83
    let n = 10_000;
    let mut stats: Vec<f64> = (0..200u32)
        .map(|seed| {
            let mut rng = rng::stream(seed as u64, tags::KS_SANITY, 0);
            let z = ParametricDist::normal(0.0, 1.0).unwrap();
            let xs: Vec<f64> = (0..n).map(|_| z.sample(&mut rng)).collect();
            (n as f64).sqrt() * ks_vs_standard_normal(&xs).unwrap()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let median = 0.5 * (stats[99] + stats[100]);
    assert!((0.5..=1.5).contains(&median), "median {median}");
}

#[test]
fn sampler_moments() {
    let dists = [
        ParametricDist::uniform(-1.0, 3.0).unwrap(),
        ParametricDist::normal(2.0, 0.5).unwrap(),
        ParametricDist::logistic(1.0, 2.0).unwrap(),
        ParametricDist::pareto1(1.0, 4.0).unwrap(),
        ParametricDist::gapped_uniform(0.3).unwrap(),
    ];
    let m = 200_000;
    for (i, d) in dists.iter().enumerate() {
        let mut rng = rng::stream(1, tags::KS_SANITY, 100 + i as u32);
        let xs: Vec<f64> = (0..m).map(|_| d.sample(&mut rng)).collect();
        let s = Sample::new(xs).unwrap();
        let se = (s.variance() / m as f64).sqrt();
        let mu = d.mean().unwrap();
        assert!(
            (s.mean() - mu).abs() < 4.0 * se,
            "{d:?}: {} vs {mu}",
            s.mean()
        );
    }
}
