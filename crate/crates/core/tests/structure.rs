use lrp_core::graph::LatticeGraph;
use lrp_core::oracle::{exact_separation_probability, exact_sphere_probability_d1};
use lrp_core::rng::{derive_seed, Purpose};
use lrp_core::sampler::{sample_box, sample_coupled};
use lrp_core::structure::{
    conditioned_edge_count, cut_point_count_bound, cut_point_probability, cut_points_d1, cut_points_naive,
    enumerate_connected_sets, poisson_binomial, separation_points_d1, sphere_connection_in_window,
    sphere_connection_probability, ConditionedEdgeCount,
};
use lrp_core::{BoxSampler, BoxSpec, KernelSpec};

fn seed(i: u64) -> u64 {
    derive_seed(31, Purpose::Generic, i)
}

#[test]
fn cut_scan_matches_naive_scan() {
    for beta in [0.5, 1.0, 2.0, 6.0] {
        for i in 0..20 {
            let c = sample_box(&KernelSpec::exact(beta), &BoxSpec::new(1, 200).unwrap(), seed(i)).unwrap();
            assert_eq!(cut_points_d1(&c).unwrap().positions, cut_points_naive(&c).unwrap());
        }
    }
    let square = sample_box(&KernelSpec::exact(1.0), &BoxSpec::new(2, 4).unwrap(), 0).unwrap();
    assert!(cut_points_d1(&square).is_err());
}

#[test]
fn cut_points_thin_out_as_beta_grows() {
    let b = BoxSpec::new(1, 300).unwrap();
    let kernels = [0.5, 1.0, 2.0, 4.0].map(KernelSpec::exact);
    for i in 0..20 {
        let v = sample_coupled(&kernels, &b, seed(i)).unwrap();
        let counts: Vec<usize> = v.iter().map(|c| cut_points_d1(c).unwrap().count()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }
}

#[test]
fn cut_point_frequency() {
    let reps = 20_000;
    for (beta, m, w) in [(0.5, 8usize, 3usize), (1.0, 4, 1), (2.0, 16, 5)] {
        let sampler = BoxSampler::new(KernelSpec::exact(beta), BoxSpec::new(1, m).unwrap()).unwrap();
        let hits = (0..reps)
            .filter(|&i| cut_points_d1(&sampler.sample(seed(i))).unwrap().positions.contains(&w))
            .count() as f64;
        let p = cut_point_probability(beta, m, w);
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits / reps as f64 - p).abs() <= 4.0 * se, "beta {beta}: {} vs {p}", hits / reps as f64);
    }
}

#[test]
fn expected_cut_count_is_bounded() {
    for beta in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
        for m in [3usize, 10, 100, 10_000] {
            let b = cut_point_count_bound(beta, m).unwrap();
            assert!(b.holds(), "{b:?}");
        }
    }
    assert!(cut_point_count_bound(1.0, 2).is_err());
    assert!(!cut_point_count_bound(3.0, 10).unwrap().derived_range);
}

#[test]
fn separation_point_frequency() {
    let reps = 20_000;
    let sampler = BoxSampler::new(KernelSpec::exact(1.0), BoxSpec::new(1, 9).unwrap()).unwrap();
    let hits = (0..reps)
        .filter(|&i| separation_points_d1(&sampler.sample(seed(i)), 1).unwrap().contains(&3))
        .count() as f64;
    let p = exact_separation_probability(1.0, 9, 3).unwrap();
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((hits / reps as f64 - p).abs() <= 4.0 * se);
    let c = sampler.sample(1);
    assert!(separation_points_d1(&c, 2).is_err());
    assert!(separation_points_d1(&c, 3).unwrap().iter().all(|w| w % 2 == 1));
}

#[test]
fn sphere_matches_the_line_formula() {
    let k = 4;
    let window = 256;
    let est = sphere_connection_in_window(&KernelSpec::exact(1.0), 1, k, window, 20_000, 3).unwrap();
    let exact = exact_sphere_probability_d1(1.0, k, Some(window)).unwrap();
    assert!(est.estimate.within(exact, 4.0), "{:?} vs {exact}", est.estimate);
    assert!(est.estimate.mean <= est.bound);
    let zero = sphere_connection_probability(&KernelSpec::exact(0.0), 2, 8, 100, 3).unwrap();
    assert_eq!(zero.estimate.mean, 0.0);
    assert!(sphere_connection_in_window(&KernelSpec::exact(1.0), 1, 4, 8, 10, 0).is_err());
}

#[test]
fn sphere_probability_decays_in_the_plane() {
    let k = KernelSpec::exact(1.0);
    let near = sphere_connection_in_window(&k, 2, 2, 512, 5_000, 8).unwrap();
    let far = sphere_connection_in_window(&k, 2, 8, 512, 5_000, 8).unwrap();
    assert!(near.estimate.mean > far.estimate.mean);
    assert!(far.estimate.mean <= far.bound);
}

#[test]
fn connected_sets_on_a_bare_path() {
    let g = LatticeGraph::from_edges(BoxSpec::new(1, 20).unwrap(), &[]);
    let r = enumerate_connected_sets(&g, 10, 6).unwrap();
    for report in &r {
        // Intervals of length k containing the root.
        assert_eq!(report.count, report.k as u64);
        assert!((report.max_avg_degree - 2.0).abs() < 1e-12);
        assert!(report.degree_event(1.5) && !report.degree_event(2.5));
    }
    assert!(enumerate_connected_sets(&g, 10, 7).is_err());
}

#[test]
fn conditioned_counts() {
    let law = poisson_binomial(&[0.5, 0.5, 0.5]);
    assert_eq!(law, vec![0.125, 0.375, 0.375, 0.125]);
    let c = ConditionedEdgeCount::from_probabilities(&[0.5, 0.5]);
    assert!((c.conditional_mean.unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert!(c.bound_holds());
    let k = KernelSpec::exact(2.0);
    for (u, v, n) in [(vec![0i64], vec![3i64], 8usize), (vec![0, 0], vec![2, 1], 4), (vec![0, 0], vec![5, 5], 3)] {
        let r = conditioned_edge_count(&k, &u, &v, n).unwrap();
        assert!((r.law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.bound_holds(), "{u:?} {v:?}: {r:?}");
    }
    assert!(conditioned_edge_count(&k, &[0], &[0], 4).is_err());
    assert!(conditioned_edge_count(&k, &[0, 0], &[3, 0], 20).is_err());
}

#[test]
fn surveys_agree_with_closed_forms() {
    let s = lrp_core::structure::cut_point_survey(1.0, 9, 3, 20_000, 4).unwrap();
    assert!(s.cut_at_w.within(cut_point_probability(1.0, 9, 3), 4.0));
    assert!(s.cut_count.within(cut_point_count_bound(1.0, 9).unwrap().expected, 4.0));
    let sep = s.separation_at_w.unwrap();
    assert!(sep.within(exact_separation_probability(1.0, 9, 3).unwrap(), 4.0));
    assert!(lrp_core::structure::cut_point_survey(1.0, 9, 2, 10, 4).unwrap().separation_at_w.is_none());

    let b = BoxSpec::with_origin(9, vec![-4]).unwrap();
    let cs = lrp_core::structure::connected_set_survey(&KernelSpec::exact(0.0), &b, &[0], 4, 3.0, 5, 1).unwrap();
    for row in &cs {
        assert_eq!(row.count.mean, row.k as f64);
        assert_eq!(row.degree_event.mean, 0.0);
    }
}
