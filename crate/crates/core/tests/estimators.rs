use lrp_core::estimators::{
    center_degree, check_submultiplicativity, diameter_scaling, estimate_lambda, kernel_comparison, lambda_series,
    moment_ratio, moment_trend, quantile_point_to_box, tail_profile, theta_vs_beta, FitMethod, TailStatus,
    MIN_TAIL_REPLICATES,
};
use lrp_core::{DiameterMode, KernelFamily, KernelSpec};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let k = KernelSpec::exact(1.0);
    let run = || {
        (
            estimate_lambda(&k, 2, 16, 300, 99).unwrap(),
            diameter_scaling(&k, 1, &[4, 8, 16, 32], 50, DiameterMode::default(), 99).unwrap(),
            center_degree(&k, 2, 9, 300, 99).unwrap(),
        )
    };
    let one = pool(1).install(run);
    let four = pool(4).install(run);
    assert_eq!(one, four);
}

#[test]
fn corner_mean_on_four_sites() {
    let est = estimate_lambda(&KernelSpec::exact(1.0), 1, 4, 20_000, 5).unwrap();
    assert!(est.corner_e1.within(43.0 / 18.0, 4.0), "{:?}", est.corner_e1);
    // On the line both corners coincide.
    assert_eq!(est.corner_e1.mean, est.corner_ones.mean);
    assert!(est.corner_bracket_holds(3.0));
}

#[test]
fn bare_lattice_is_deterministic() {
    let zero = KernelSpec::exact(0.0);
    let (series, fit) = lambda_series(&zero, 2, &[4, 8, 16, 32], 3, 1).unwrap();
    for e in &series {
        assert_eq!(e.lambda_hat, e.n as f64);
        assert_eq!(e.lambda_stderr, 0.0);
    }
    assert!((fit.theta_hat - 1.0).abs() < 1e-12);
    assert_eq!(fit.method, FitMethod::LoglogOls);
    let s = check_submultiplicativity(&zero, 1, 4, 8, 3, 1).unwrap();
    assert_eq!(s.lambda_mn.lambda_hat, 32.0);
    assert_eq!(s.product, 32.0);
    assert_eq!(s.z_score, 0.0);
    let m = moment_ratio(&zero, 2, 10, 3, 4, 1).unwrap();
    assert!((m.ratio - 1.0).abs() < 1e-12);
    assert!(moment_ratio(&zero, 2, 10, 3, 3, 1).is_err());
    let t = tail_profile(&zero, 1, 8, MIN_TAIL_REPLICATES, 1.0, 1).unwrap();
    assert_eq!(t.status, TailStatus::Deterministic);
    let dia = diameter_scaling(&zero, 2, &[1, 3, 5, 9, 17], 2, DiameterMode::default(), 1).unwrap();
    assert_eq!(dia.excluded, vec![1]);
    assert!((dia.fit.theta_hat - 1.0).abs() < 1e-12);
    assert_eq!(center_degree(&zero, 2, 5, 2, 1).unwrap().mean, 8.0);
    assert!(center_degree(&zero, 2, 4, 2, 1).is_err());
}

#[test]
fn quantiles_on_the_bare_lattice() {
    let zero = KernelSpec::exact(0.0);
    let q = quantile_point_to_box(&zero, 2, 8, 4, 8.0, 2, 1).unwrap();
    // Nearest vertex with sup norm > 8 is 9 steps away.
    assert_eq!(q.point_to_box.q01, 9.0);
    assert_eq!(q.point_to_box.q99, 9.0);
    assert!((q.point_to_box.normalized_q99 - 9.0 / 8.0).abs() < 1e-12);
    // From {0..7}^2 to outside {-8..15}^2 takes 9 steps.
    assert_eq!(q.box_to_box.q01, 9.0);
}

#[test]
fn kernels_agree_where_they_coincide() {
    let a = KernelSpec::exact(1.0);
    let b = KernelSpec::truncated(1.0);
    let c = kernel_comparison(&a, &b, 1, 64, 100, Some(DiameterMode::default()), 4).unwrap();
    assert_eq!(c.identical_fraction, 1.0);
    assert_eq!(c.corner_ratio_q99, 1.0);
    assert_eq!(c.diameter_ratio_q99, Some(1.0));
    let other = kernel_comparison(&a, &KernelSpec::exponential(1.0), 2, 16, 100, None, 4).unwrap();
    assert!(other.identical_fraction < 1.0);
    assert!(other.diameter_ratio_q99.is_none());
    assert!(kernel_comparison(&a, &KernelSpec::truncated(2.0), 1, 8, 10, None, 4).is_err());
}

#[test]
fn exponent_decreases_with_beta() {
    let r = theta_vs_beta(KernelFamily::ExactCube, 1, &[4.0, 1.0], &[16, 32, 64, 128], 400, 7).unwrap();
    let reference = r.rows.iter().find(|row| row.reference).unwrap();
    assert!((reference.theta_hat - 1.0).abs() < 1e-12);
    let fitted: Vec<_> = r.rows.iter().filter(|row| !row.reference).collect();
    assert_eq!(fitted[0].beta, 1.0);
    assert!(fitted[0].theta_hat > fitted[1].theta_hat);
    assert!(fitted[0].theta_hat < 1.0);
    assert!(r.min_separation_z > 3.0, "{}", r.min_separation_z);
}

#[test]
fn moment_trend_of_constant_ratios_is_flat() {
    let zero = KernelSpec::exact(0.0);
    let ratios = [8, 16, 32].iter().map(|&n| moment_ratio(&zero, 1, n, 3, 2, 1).unwrap()).collect();
    let t = moment_trend(ratios).unwrap();
    assert!(t.slope.abs() < 1e-12);
}

#[test]
fn coarse_distances_stay_within_three_times_fine() {
    let r = lrp_core::estimators::scaling_coupling_check(2, 1.0, 1.0 / 8.0, 8, 4, 20, 3).unwrap();
    assert_eq!(r.pairs_checked, 20 * 64 * 64);
    assert_eq!(r.violations, 0);
    assert!(r.max_ratio <= 3.0);
    assert!(lrp_core::estimators::scaling_coupling_check(1, 1.0, 0.25, 8, 4, 2, 3).is_err());
}
