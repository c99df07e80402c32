//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use intquant::dist::{Distribution, ParametricDist, Sample};
use intquant::layers::{
    full_cdf_side, fuzz_identities, layer_integral, truncated_cdf_side, LayerSpec,
};
use intquant::lfunc::{
    l_integral_direct, l_integral_layered, reduce_partition, BuiltinWeight, MonotoneFn,
    WeightFunction,
};
use intquant::montecarlo::{
    gapped_sigma2, ks_critical_1pct, median_gap_mc, median_gap_probability, run_experiment,
    unit_grid, vervaat_paths, ExperimentConfig,
};
use intquant::risk::{self, sigma2_upper, Measure};
use intquant::rng::{self, tags};
use intquant::timeseries::{
    default_bandwidth, long_run_variance, simulate_ar1, ts_layer_clt_report, Ar1Config, HTransform,
    TsCltOptions,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1_identities() -> Check {
    let mut rng = rng::stream(7, tags::FUZZ, 0);
    let s = fuzz_identities(&mut rng, 1000).map_err(|e| e.to_string())?;
    let msg = format!(
        "{} pairs, {} checks, max residual {:.2e} (tol 1e-10), min Rem {:.2e}, bound-chain violations {}",
        s.pairs,
        s.checks,
        s.max_residual(),
        s.min_remainder,
        s.bound_chain_violations
    );
    if s.pairs >= 1000
        && s.max_residual() <= 1e-10
        && s.min_remainder >= 0.0
        && s.bound_chain_violations == 0
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2_counterexample() -> Check {
    let f = ParametricDist::uniform(0.0, 1.0).unwrap();
    let g = ParametricDist::uniform(0.0, 2.0).unwrap();
    let quantile_side =
        g.quantile_integral(0.0, 1.0).unwrap() - f.quantile_integral(0.0, 1.0).unwrap();
    let full = full_cdf_side(&f, &g).unwrap();
    let truncated = truncated_cdf_side(&f, &g).unwrap();
    let msg = format!("quantile side {quantile_side}, full cdf side {full}, truncated {truncated} (expect 1/2, 1/2, 1/4)");
    if quantile_side == 0.5 && full == 0.5 && truncated == 0.25 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_constants() -> Check {
    let u02 = ParametricDist::uniform(0.0, 2.0).unwrap();
    let gap = ParametricDist::gapped_uniform(0.5).unwrap();
    let up = layer_integral(&u02, LayerSpec::upper(0.75).unwrap()).unwrap();
    let gup = layer_integral(&gap, LayerSpec::upper(0.5).unwrap()).unwrap();
    let s: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&a| gapped_sigma2(a).unwrap())
        .collect();
    let msg = format!(
        "upper U(0,2) p=3/4 {up}, gapped upper(1/2) {gup}, sigma2(0, 1/2, 1) = {:?}",
        s
    );
    let ok = close(up, 7.0 / 16.0, 1e-12)
        && close(gup, 7.0 / 8.0, 1e-12)
        && close(s[0], 5.0 / 48.0, 1e-12)
        && close(s[1], 77.0 / 192.0, 1e-12)
        && close(s[2], 1.0, 1e-12);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c4_table1() -> Check {
    let cfg = ExperimentConfig::preset("table1-desk", false).unwrap();
    let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = rep.rows.len() == 5 && cfg.m == 10_000;
    for r in &rep.rows {
        let target = -3.0 / (16.0 * r.n as f64);
        let z = (r.mean - target) / r.se;
        ok &= r.mean < 0.0 && z.abs() <= 3.0;
        parts.push(format!("n={} mean {:.6} ({:+.2} se)", r.n, r.mean, z));
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn normality_runs(preset: &str) -> Result<Vec<f64>, String> {
    (0..10)
        .map(|seed| {
            let mut cfg = ExperimentConfig::preset(preset, false).unwrap();
            cfg.seed = seed;
            let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
            Ok(rep.rows[0].ks.unwrap())
        })
        .collect()
}

fn c5_sim2() -> Check {
    let crit = ks_critical_1pct(2000);
    let ks = normality_runs("sim2-desk")?;
    let below = ks.iter().filter(|&&d| d < crit).count();
    let max = ks.iter().copied().fold(0.0, f64::max);
    let msg = format!("{below}/10 runs with KS < {crit:.4} (need >= 8), max KS {max:.4}");
    if below >= 8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6_sim3() -> Check {
    let crit = 5.0 * ks_critical_1pct(2000);
    let ks = normality_runs("sim3-desk")?;
    let above = ks.iter().filter(|&&d| d > crit).count();
    let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let msg = format!("{above}/10 runs with KS > {crit:.4} (need 10), min KS {min:.4}");
    if above == 10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7_median_gap() -> Check {
    let (gt2, lt2) = median_gap_probability(2).map_err(|e| e.to_string())?;
    let (gt, lt) = median_gap_probability(100).map_err(|e| e.to_string())?;
    let m = 50_000;
    let (mgt, mlt) = median_gap_mc(100, m, 0).map_err(|e| e.to_string())?;
    let se_gt = (gt * (1.0 - gt) / m as f64).sqrt();
    let se_lt = (lt * (1.0 - lt) / m as f64).sqrt();
    let (z_gt, z_lt) = ((mgt - gt) / se_gt, (mlt - lt) / se_lt);
    let msg = format!(
        "n=2 exact ({gt2}, {lt2}); n=100 exact ({gt:.5}, {lt:.5}) vs MC ({mgt:.5}, {mlt:.5}), z = ({z_gt:+.2}, {z_lt:+.2})"
    );
    if close(gt2, 0.25, 1e-14) && close(lt2, 0.75, 1e-14) && z_gt.abs() <= 3.0 && z_lt.abs() <= 3.0
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_vervaat() -> Check {
    let grid = unit_grid(101);
    let s = vervaat_paths(10_000, &grid, 0, 2000, false).map_err(|e| e.to_string())?;
    let half = s.mean_path[50];
    let msg = format!(
        "min n*V {:.2e}, max |boundary| {:.2e}, mean n*V(1/2) {half:.5} vs 1/8",
        s.min_value, s.max_boundary_abs
    );
    if s.min_value >= -1e-12 && s.max_boundary_abs <= 1e-12 && (half - 0.125).abs() <= 0.1 * 0.125 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_plugin_variance() -> Check {
    let d = ParametricDist::uniform(0.0, 2.0).unwrap();
    let mut est: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = rng::stream(seed, tags::KS_SANITY, 1);
            let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
            sigma2_upper(&Sample::new(xs).unwrap(), 0.5).unwrap()
        })
        .collect();
    est.sort_by(f64::total_cmp);
    let median = 0.5 * (est[9] + est[10]);
    let msg = format!(
        "median sigma2_1(1/2) over 20 seeds {median:.6} vs 5/48 = {:.6}",
        5.0 / 48.0
    );
    if (median - 5.0 / 48.0).abs() <= 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn zigzag() -> WeightFunction {
    WeightFunction::new(
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        vec![
            (MonotoneFn::linear(0.0, 4.0), MonotoneFn::zero()),
            (MonotoneFn::constant(1.0), MonotoneFn::linear(-1.0, 4.0)),
            (MonotoneFn::linear(-2.0, 4.0), MonotoneFn::zero()),
            (MonotoneFn::constant(1.0), MonotoneFn::linear(-3.0, 4.0)),
        ],
    )
    .unwrap()
}

fn c10_lfunc() -> Check {
    let dists = [
        ParametricDist::uniform(0.0, 1.0).unwrap(),
        ParametricDist::uniform(0.0, 2.0).unwrap(),
        ParametricDist::pareto1(1.0, 3.0).unwrap(),
    ];
    let weights = [
        BuiltinWeight::Gmd,
        BuiltinWeight::Logistic,
        BuiltinWeight::TailGini { p: 0.5 },
        BuiltinWeight::GiniShortfall {
            p: 0.5,
            lambda: 0.3,
        },
    ];
    let mut worst_rel = 0.0f64;
    for d in &dists {
        for b in weights {
            let w = b.weight();
            let direct = l_integral_direct(d, &w).map_err(|e| e.to_string())?;
            let layered = l_integral_layered(d, &w).map_err(|e| e.to_string())?;
            worst_rel = worst_rel.max((direct - layered).abs() / direct.abs().max(1e-300));
        }
    }
    let mut worst_tvar = 0.0f64;
    for d in &dists {
        for p in [0.1, 0.5, 0.9] {
            let w = BuiltinWeight::GiniShortfall { p, lambda: 0.0 }.weight();
            let l = l_integral_direct(d, &w).map_err(|e| e.to_string())?;
            let t = risk::population(d, Measure::TvarUp, p).map_err(|e| e.to_string())?;
            worst_tvar = worst_tvar.max((l - t).abs());
        }
    }
    let w = zigzag();
    let r = reduce_partition(&w);
    let worst_grid = (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .filter(|&u| u < 1.0)
        .map(|u| (w.eval(u) - r.eval(u)).abs())
        .fold(0.0f64, f64::max);
    let reduced_ok = r.k() == 2 && r.is_monotone_on_grid(2000);
    let msg = format!(
        "max relative dual-path gap {worst_rel:.2e} (tol 1e-6), max |GS(p,0) - TVaR| {worst_tvar:.2e} (tol 1e-9), \
         K=4 -> K={} grid gap {worst_grid:.2e} (tol 1e-12)",
        r.k()
    );
    if worst_rel <= 1e-6 && worst_tvar <= 1e-9 && worst_grid <= 1e-12 && reduced_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c11_timeseries() -> Check {
    let normal = ParametricDist::normal(0.0, 1.0).unwrap();
    let cfg = Ar1Config::new(0.5, normal, 0).unwrap();
    let n = 200_000;
    let path = simulate_ar1(&cfg, n).map_err(|e| e.to_string())?;
    let nu2 = long_run_variance(path.values(), &HTransform::Identity, default_bandwidth(n))
        .map_err(|e| e.to_string())?;
    let spec = LayerSpec::middle(0.25, 0.75).unwrap();
    let rep = ts_layer_clt_report(&cfg, 20_000, spec, 2000, &TsCltOptions::default())
        .map_err(|e| e.to_string())?;
    let msg = format!(
        "long-run variance {nu2:.4} vs 4 (15%), middle-layer coverage {:.4} in [0.92, 0.975], variance {:.3}",
        rep.coverage, rep.variance
    );
    if (nu2 - 4.0).abs() <= 0.15 * 4.0 && (0.92..=0.975).contains(&rep.coverage) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("exact identities", c1_identities, Duration::from_secs(10)),
        (
            "full-range counterexample",
            c2_counterexample,
            Duration::from_secs(10),
        ),
        (
            "population constants",
            c3_constants,
            Duration::from_secs(10),
        ),
        ("upper-layer bias", c4_table1, Duration::from_secs(60)),
        ("normality on U(0,2)", c5_sim2, Duration::from_secs(60)),
        (
            "non-normality on gapped uniform",
            c6_sim3,
            Duration::from_secs(60),
        ),
        (
            "median-gap probabilities",
            c7_median_gap,
            Duration::from_secs(10),
        ),
        ("Vervaat process", c8_vervaat, Duration::from_secs(30)),
        (
            "plug-in variance",
            c9_plugin_variance,
            Duration::from_secs(30),
        ),
        ("L-functional dual path", c10_lfunc, Duration::from_secs(30)),
        ("time series", c11_timeseries, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (status, detail) = match result {
            Ok(m) if took <= budget => ("PASS", m),
            Ok(m) => ("FAIL", format!("{m}; over runtime budget {budget:?}")),
            Err(m) => ("FAIL", m),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status} [{name}] {detail} ({:.2}s)",
            i + 1,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
