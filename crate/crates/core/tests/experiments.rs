use asym_sbm::density_evolution::{success_from_mu, DensityEvolution};
use asym_sbm::experiments::{
    self as ex, Classifier, SbmEstimateOptions, TestFunction, TreeEstimateOptions, TreeSampler,
};
use asym_sbm::{Community, ModelParams};

fn class_samples(samples: &[(Community, asym_sbm::bp::LogRatio)], x: Community) -> Vec<f64> {
    samples
        .iter()
        .filter(|s| s.0 == x)
        .map(|s| s.1 .0)
        .collect()
}

#[test]
fn dummy_classifiers_score_zero() {
    let m = ModelParams::new(0.25, 10.0, 2.0).unwrap();
    for x in [Community::One, Community::Two] {
        let tree = TreeEstimateOptions {
            classifier: Classifier::Constant(x),
            ..Default::default()
        };
        assert!(
            ex::estimate_psucc_tree(&m, 0.3, 2, 500, 1, &tree)
                .unwrap()
                .estimate
                .abs()
                <= 1e-12
        );
        let sbm = SbmEstimateOptions {
            classifier: Classifier::Constant(x),
            ..Default::default()
        };
        assert!(
            ex::estimate_psucc_sbm(&m, 2000, 0.3, 2, 500, 1, &sbm)
                .unwrap()
                .estimate
                .abs()
                <= 1e-12
        );
    }
}

#[test]
fn no_reveals_or_no_signal_give_zero() {
    let m = ModelParams::new(0.3, 5.0, 0.0).unwrap();
    let r = ex::estimate_psucc_tree(&m, 0.5, 3, 1000, 2, &Default::default()).unwrap();
    assert_eq!(r.estimate, 0.0);
    let m = ModelParams::new(0.3, 5.0, 2.0).unwrap();
    let r = ex::estimate_psucc_tree(&m, 0.0, 3, 1000, 2, &Default::default()).unwrap();
    assert_eq!(r.estimate, 0.0);
}

#[test]
fn radius_zero_full_reveal_is_perfect() {
    let m = ModelParams::new(0.25, 10.0, 2.0).unwrap();
    let r = ex::estimate_psucc_sbm(&m, 2000, 1.0, 0, 300, 4, &Default::default()).unwrap();
    assert_eq!(r.estimate, 1.0);
}

#[test]
fn streaming_and_explicit_tree_samplers_agree() {
    let m = ModelParams::new(0.25, 5.0, 2.5).unwrap();
    let run = |sampler| {
        let opts = TreeEstimateOptions {
            sampler,
            ..Default::default()
        };
        ex::tree_replicates(
            &m,
            0.4,
            3,
            20_000,
            if sampler == TreeSampler::Streaming {
                1
            } else {
                2
            },
            &opts,
        )
        .unwrap()
    };
    let (s1, r1) = run(TreeSampler::Streaming);
    let (s2, r2) = run(TreeSampler::Explicit);
    let se = (r1.stderr.powi(2) + r2.stderr.powi(2)).sqrt();
    assert!(
        (r1.estimate - r2.estimate).abs() < 5.0 * se,
        "{r1:?} {r2:?}"
    );
    for x in [Community::One, Community::Two] {
        let (a, b) = (class_samples(&s1, x), class_samples(&s2, x));
        let fa: Vec<f64> = a.iter().copied().filter(|v| v.is_finite()).collect();
        let fb: Vec<f64> = b.iter().copied().filter(|v| v.is_finite()).collect();
        let ((ma, va), (mb, vb)) = (ex::mean_var(&fa), ex::mean_var(&fb));
        assert!(
            (ma - mb).abs() < 5.0 * (va / fa.len() as f64 + vb / fb.len() as f64).sqrt(),
            "{x}: {ma} vs {mb}"
        );
    }
}

#[test]
fn population_dynamics_matches_tree_samples() {
    let m = ModelParams::new(0.25, 10.0, 2.0).unwrap();
    let pair = ex::population_dynamics(&m, 0.2, 3, 100_000, 8).unwrap();
    let (samples, _) = ex::tree_replicates(&m, 0.2, 3, 40_000, 9, &Default::default()).unwrap();
    for (pool, x) in [(&pair.xi1, Community::One), (&pair.xi2, Community::Two)] {
        let tree = class_samples(&samples, x);
        let ((mp, _), (mt, vt)) = (ex::mean_var(pool), ex::mean_var(&tree));
        assert!(
            (mp - mt).abs() < 5.0 * (vt / tree.len() as f64).sqrt() + 0.02,
            "{x}: pool {mp} tree {mt}"
        );
    }
}

#[test]
fn cavity_moments_at_large_degree() {
    // r = 1 at d = 500: mean h + mu_1/2 with mu_1 = q lambda / (p (1 - p)).
    let (p, lambda, q) = (0.25, 2.0, 0.1);
    let m = ModelParams::new(p, 500.0, lambda).unwrap();
    let pair = ex::population_dynamics(&m, q, 1, 100_000, 3).unwrap();
    let mu1 = q * lambda / (p * (1.0 - p));
    let (mean, var) = ex::mean_var(&pair.xi1);
    let tol = (5.0 * (var / 1e5).sqrt()).max(0.05 * mu1);
    assert!((mean - (m.h() + mu1 / 2.0)).abs() <= tol, "mean {mean}");
    assert!((var - mu1).abs() <= 0.1 * mu1, "var {var}");
}

#[test]
fn nishimori_battery_holds() {
    let m = ModelParams::new(0.25, 200.0, 2.0).unwrap();
    let pair = ex::population_dynamics(&m, 0.1, 3, 100_000, 1).unwrap();
    let report = ex::nishimori_check(&pair, &TestFunction::BATTERY).unwrap();
    assert!(report.max_discrepancy <= 5.0, "{report:?}");

    let small = ModelParams::new(0.2, 3.0, 1.5).unwrap();
    let pair = ex::population_dynamics(&small, 0.5, 2, 50_000, 2).unwrap();
    assert!(
        ex::nishimori_check(&pair, &TestFunction::BATTERY)
            .unwrap()
            .max_discrepancy
            <= 5.0
    );
}

#[test]
fn nishimori_rejects_impossible_atom() {
    let mut pair =
        ex::population_dynamics(&ModelParams::new(0.3, 3.0, 1.0).unwrap(), 0.5, 0, 1000, 1)
            .unwrap();
    pair.xi1[0] = f64::NEG_INFINITY;
    assert!(ex::nishimori_check(&pair, &[TestFunction::One]).is_err());
}

#[test]
fn unmatched_pools_drift_at_large_degree() {
    let m = ModelParams::new(0.25, 200.0, 2.0).unwrap();
    let raw = ex::population_dynamics_with(
        &m,
        0.1,
        3,
        100_000,
        1,
        &ex::PopulationOptions {
            moment_matching: false,
        },
    )
    .unwrap();
    let mu3 = DensityEvolution::from_params(&m, 201)
        .unwrap()
        .iterate(0.1, 1e-300, 3)
        .unwrap()
        .mus[2];
    let (mean, _) = ex::mean_var(&raw.xi1);
    assert!((mean - (m.h() + mu3 / 2.0)).abs() > 0.5, "mean {mean}");
}

#[test]
fn tree_success_at_large_degree_matches_density_evolution() {
    let m = ModelParams::new(0.25, 200.0, 2.0).unwrap();
    let mu3 = DensityEvolution::from_params(&m, 201)
        .unwrap()
        .iterate(0.1, 1e-300, 3)
        .unwrap()
        .mus[2];
    let r = ex::estimate_psucc_tree(&m, 0.1, 3, 2000, 5, &Default::default()).unwrap();
    let target = success_from_mu(mu3);
    assert!(
        (r.estimate - target).abs() <= (5.0 * r.stderr).max(0.05),
        "{} vs {target}",
        r.estimate
    );
}

#[test]
fn tree_success_decays_with_depth_below_spinodal() {
    // Explicit trees at d = 200 and depth 6 are out of reach; d = 10 stands in.
    let m = ModelParams::new(0.3, 10.0, 0.5).unwrap();
    let est: Vec<_> = [2, 4, 6]
        .iter()
        .map(|&k| ex::estimate_psucc_tree(&m, 1.0, k, 4000, 7, &Default::default()).unwrap())
        .collect();
    for w in est.windows(2) {
        assert!(
            w[1].estimate
                < w[0].estimate + 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt(),
            "{est:?}"
        );
    }
    assert!(est[2].estimate < est[0].estimate, "{est:?}");

    // Same question at d = 200 through the cavity pools: P(xi1 >= h) - P(xi2 >= h).
    let m = ModelParams::new(0.3, 200.0, 0.5).unwrap();
    let succ: Vec<f64> = [2, 4, 6]
        .iter()
        .map(|&k| {
            let pair = ex::population_dynamics(&m, 1.0, k, 100_000, 7).unwrap();
            let frac =
                |xs: &[f64]| xs.iter().filter(|&&x| x >= m.h()).count() as f64 / xs.len() as f64;
            frac(&pair.xi1) - frac(&pair.xi2)
        })
        .collect();
    assert!(succ[0] > succ[1] && succ[1] > succ[2], "{succ:?}");
    assert!(succ[2] < 0.2, "{succ:?}");
}

#[test]
fn optimal_threshold_attains_total_variation() {
    let m = ModelParams::new(0.3, 2.0, 1.5).unwrap();
    let (samples, report) =
        ex::tree_replicates(&m, 0.6, 2, 40_000, 3, &Default::default()).unwrap();
    let (x1, x2) = (
        class_samples(&samples, Community::One),
        class_samples(&samples, Community::Two),
    );
    let tv = ex::empirical_tv(&x1, &x2);
    let best = ex::best_threshold_psucc(&x1, &x2);
    assert!(
        (tv - best).abs() <= 5.0 * report.stderr,
        "tv {tv} best {best}"
    );
    assert!((best - report.estimate).abs() <= 5.0 * report.stderr);
}

#[test]
fn gaussian_limit_improves_with_degree() {
    let (p, lambda, q, r) = (0.25, 2.0, 0.2, 2);
    let pool = 100_000;
    let ks: Vec<f64> = [20.0, 100.0, 500.0]
        .iter()
        .map(|&d| {
            let m = ModelParams::new(p, d, lambda).unwrap();
            let mu = DensityEvolution::from_params(&m, 201)
                .unwrap()
                .iterate(q, 1e-300, r)
                .unwrap()
                .mus[r - 1];
            let pair = ex::population_dynamics(&m, q, r, pool, 4).unwrap();
            ex::ks_distance_normal(&pair.xi1, m.h() + mu / 2.0, mu)
        })
        .collect();
    let noise = 1.36 / (pool as f64).sqrt();
    assert!(ks.windows(2).all(|w| w[1] <= w[0] + noise), "{ks:?}");
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let m = ModelParams::new(0.25, 10.0, 2.0).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let t = ex::estimate_psucc_tree(&m, 0.3, 3, 2000, 5, &Default::default()).unwrap();
            let s = ex::estimate_psucc_sbm(&m, 5000, 0.3, 2, 500, 5, &Default::default()).unwrap();
            (
                t.estimate,
                t.stderr,
                s.estimate,
                s.stderr,
                s.flagged_fraction,
            )
        })
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(4));
}
