#![allow(dead_code)]

use rand_distr::{Distribution, StandardNormal};
use rdsnet_core::rng;
use rdsnet_countreg::{simulate_response, CountData, Family, ModelSpec};

/// `x`: standard normal; `g`: two-level factor (a/b); `h`: independent
/// standard normal; `k`: eight-level factor (k0..k7).
pub fn covariates(n: usize, seed: u64) -> CountData {
    let mut r = rng::rng(seed);
    let mut d = CountData::new("y", vec![0; n]);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let h: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let g: Vec<String> = (0..n)
        .map(|_| if rand::Rng::random::<bool>(&mut r) { "b" } else { "a" }.to_string())
        .collect();
    let k: Vec<String> = (0..n).map(|_| format!("k{}", rand::Rng::random_range(&mut r, 0..8))).collect();
    d.add_numeric("x", x).unwrap();
    d.add_numeric("h", h).unwrap();
    d.add_categorical("g", &g, &["a".to_string(), "b".to_string()]).unwrap();
    d.add_categorical("k", &k, &[]).unwrap();
    d
}

pub fn simulate(spec: &ModelSpec, params: &[f64], n: usize, seed: u64) -> CountData {
    let mut d = covariates(n, rng::child_seed(seed, 1, 0));
    d.y = simulate_response(spec, &d, params, rng::child_seed(seed, 2, 0)).unwrap();
    d
}

pub fn full_spec(family: Family) -> ModelSpec {
    let spec = ModelSpec::new(family, "y").conditional(["x", "g"]);
    if family.zero_inflated() {
        spec.zero(["x"])
    } else {
        spec
    }
}

/// Parameter vector for [`full_spec`]: count part (1, x, g:b), zero part
/// (1, x), log α.
pub fn params(family: Family) -> Vec<f64> {
    let mut p = vec![0.6, 0.4, -0.3];
    if family.zero_inflated() {
        p.extend([-0.5, 0.8]);
    }
    if family.has_dispersion() {
        p.push((0.7f64).ln());
    }
    p
}
