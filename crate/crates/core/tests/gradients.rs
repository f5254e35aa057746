#[path = "support/gradcheck.rs"]
mod gradcheck;

use gradcheck::*;

const SEEDS: std::ops::Range<u64> = 0..20;

fn all_seeds(check: fn(u64) -> f64, limit: f64) {
    for seed in SEEDS {
        let e = check(seed);
        assert!(e < limit, "seed {seed}: relative error {e:e} >= {limit:e}");
    }
}

#[test]
fn conv2d_matches_finite_differences() {
    all_seeds(check_conv, 1e-3);
}

#[test]
fn leaky_relu_matches_finite_differences() {
    all_seeds(check_leaky_relu, 1e-3);
}

#[test]
fn upsample_matches_finite_differences() {
    all_seeds(check_upsample, 1e-3);
}

#[test]
fn softmax_cross_entropy_matches_finite_differences() {
    all_seeds(check_softmax_cross_entropy, 1e-3);
}

#[test]
fn two_stage_network_matches_finite_differences() {
    all_seeds(check_network, 5e-3);
}
