//! Monte Carlo checks of the Gaussian samplers against each other and
//! against the exact covariance.

use bfbm_core::extremes::{estimate_max, slepian_envelope, MaxExperiment, MaxTree};
use bfbm_core::gaussian_bfbm::{covariance_matrix, CholeskySampler, GremPlan, Method, WhiteNoisePlan};
use bfbm_core::rng::{domain as dom, par_replicas, stream};
use bfbm_core::stats::{ks_two_sample, mean_estimate, variance_estimate};
use bfbm_core::tree::{binary_tree, sample_yule, Direction, TreeTopology};
use bfbm_core::HurstParams;

fn endpoint_values(seed: u64, reps: usize, f: impl Fn(&mut bfbm_core::rng::Rng) -> Vec<f64> + Sync) -> Vec<Vec<f64>> {
    par_replicas(seed, reps, |_, s| f(&mut stream(s, dom::GAUSS, 0)))
}

#[test]
fn grem_and_cholesky_share_the_law_of_the_maximum() {
    let p = HurstParams::new(0.8).unwrap();
    let tree = binary_tree(3.0).unwrap();
    let disc = tree.discretize(3, 3.0, Direction::Left).unwrap();
    let nodes: Vec<(usize, f64)> = (0..tree.len()).map(|b| (b, 3.0)).collect();
    let chol = CholeskySampler::new(&tree, &nodes, &p).unwrap();
    let grem = GremPlan::new(&disc, &p).unwrap();
    let max = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let a: Vec<f64> = endpoint_values(1, 4000, |r| chol.sample(r).values).into_iter().map(max).collect();
    let b: Vec<f64> = endpoint_values(2, 4000, |r| grem.sample(r).values).into_iter().map(max).collect();
    let ks = ks_two_sample(&a, &b);
    assert!(ks.p_value > 1e-3, "{ks:?}");
}

#[test]
fn white_noise_variance_matches_after_the_past_deficit() {
    let p = HurstParams::new(0.85).unwrap();
    let t = 1.5;
    let tree = TreeTopology::single(t);
    let plan = WhiteNoisePlan::new(&tree, t / 200.0, t, 50.0 * t, &p).unwrap();
    let xs: Vec<f64> = endpoint_values(3, 20_000, |r| plan.sample(r).values).into_iter().map(|v| v[0]).collect();
    let v = variance_estimate(&xs);
    assert!(v.within(t.powf(2.0 * p.h) - plan.deficit, 3.0, 0.0), "{v:?} deficit {}", plan.deficit);
    assert!(plan.deficit > 0.0);
}

#[test]
fn cholesky_reproduces_tree_covariance() {
    let p = HurstParams::new(0.65).unwrap();
    let tree = sample_yule(2.0, 8).unwrap();
    let nodes: Vec<(usize, f64)> = (0..tree.len().min(5)).flat_map(|b| [(b, 1.0), (b, 2.0)]).collect();
    let exact = covariance_matrix(&tree, &nodes, &p).unwrap();
    let chol = CholeskySampler::new(&tree, &nodes, &p).unwrap();
    let samples = endpoint_values(4, 20_000, |r| chol.sample(r).values);
    let (cov, se) = bfbm_core::gaussian_bfbm::empirical_covariance(&samples);
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            assert!((cov[(i, j)] - exact[(i, j)]).abs() <= 4.0 * se[(i, j)] + 1e-12, "({i},{j})");
        }
    }
}

#[test]
fn left_snapping_bounds_right_snapping_from_above() {
    // Earlier splits mean less correlation and a larger maximum.
    let run = |direction| {
        let exp = MaxExperiment {
            h: 0.85,
            tree: MaxTree::Yule,
            t_list: vec![4.0],
            replicas: 800,
            method: Method::Grem,
            levels: None,
            direction,
            seed: 31,
        };
        estimate_max(&exp).unwrap().remove(0)
    };
    let left = run(Direction::Left);
    let right = run(Direction::Right);
    assert!(left.mean_ratio > right.mean_ratio, "{} vs {}", left.mean_ratio, right.mean_ratio);
}

#[test]
fn binary_tree_maximum_sits_inside_the_envelope() {
    let p = HurstParams::new(0.75).unwrap();
    let t = 6.0;
    let exp = MaxExperiment {
        h: p.h,
        tree: MaxTree::Binary,
        t_list: vec![t],
        replicas: 400,
        method: Method::Grem,
        levels: None,
        direction: Direction::Left,
        seed: 5,
    };
    let row = estimate_max(&exp).unwrap().remove(0);
    let m = mean_estimate(&row.samples);
    let (lo, hi) = slepian_envelope(t, &p, MaxTree::Binary).unwrap();
    assert!(lo < hi);
    assert!(m.value < hi, "{} ≥ {hi}", m.value);
}

#[test]
fn near_brownian_maximum_lags_the_leading_order() {
    // Close to H = 1/2 the model is branching Brownian motion, whose maximum
    // carries a -(3/2) log t correction; at t = 10 the ratio sits near 0.7.
    let exp = MaxExperiment {
        h: 0.501,
        tree: MaxTree::Yule,
        t_list: vec![10.0],
        replicas: 200,
        method: Method::Grem,
        levels: Some(2),
        direction: Direction::Left,
        seed: 12,
    };
    let row = estimate_max(&exp).unwrap().remove(0);
    assert!((0.6..0.8).contains(&row.mean_ratio), "{}", row.mean_ratio);
}
