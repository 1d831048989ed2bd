mod common;

use proptest::prelude::*;
use rand::Rng;
use rdsnet_core::rng;
use rdsnet_countreg::{fit, loglik, loglik_gradient, pmf, CountData, Family, FitOptions, ModelSpec};
use statrs::function::gamma::ln_gamma;

use common::{full_spec, params, simulate};

/// Unvectorized per-observation log-likelihood in probability space.
fn naive_loglik(spec: &ModelSpec, theta: &[f64], data: &CountData) -> f64 {
    let x = data.design(&spec.conditional_terms).unwrap();
    let z = spec.family.zero_inflated().then(|| data.design(&spec.zero_terms).unwrap());
    let p = x.ncol;
    let q = z.as_ref().map_or(0, |z| z.ncol);
    let mut total = 0.0;
    for i in 0..data.len() {
        let y = f64::from(data.y[i]);
        let eta: f64 = x.row(i).iter().zip(&theta[..p]).map(|(a, b)| a * b).sum();
        let mu = eta.exp();
        let f = if spec.family.has_dispersion() {
            let r = 1.0 / theta[p + q].exp();
            (ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * (r / (r + mu)).ln() + y * (mu / (r + mu)).ln())
                .exp()
        } else {
            (y * mu.ln() - mu - ln_gamma(y + 1.0)).exp()
        };
        let prob = match &z {
            Some(z) => {
                let mut ez = 0.0;
                for j in 0..q {
                    ez += z.row(i)[j] * theta[p + j];
                }
                let pi = 1.0 / (1.0 + (-ez).exp());
                if y == 0.0 {
                    pi + (1.0 - pi) * f
                } else {
                    (1.0 - pi) * f
                }
            }
            None => f,
        };
        total += prob.ln();
    }
    total
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng::rng(11);
    for family in Family::ALL {
        let spec = full_spec(family);
        let data = simulate(&spec, &params(family), 300, 5);
        for _ in 0..20 {
            let theta: Vec<f64> = params(family).iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
            let g = loglik_gradient(&spec, &theta, &data).unwrap();
            for j in 0..theta.len() {
                let step = 1e-5;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += step;
                tm[j] -= step;
                let fd = (loglik(&spec, &tp, &data).unwrap() - loglik(&spec, &tm, &data).unwrap()) / (2.0 * step);
                let rel = (g[j] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-5, "{family} param {j}: analytic {} fd {fd}", g[j]);
            }
        }
    }
}

#[test]
fn loglik_matches_naive_loop_at_the_mle() {
    for family in Family::ALL {
        let spec = full_spec(family);
        let data = simulate(&spec, &params(family), 800, 21);
        let f = fit(&spec, &data, &FitOptions::default()).unwrap();
        assert!(f.converged, "{family}");
        let naive = naive_loglik(&spec, &f.params, &data);
        assert!((f.loglik - naive).abs() < 1e-8 * naive.abs(), "{family}: {} vs {naive}", f.loglik);
    }
}

#[test]
fn zinb_approaches_zip_as_alpha_vanishes() {
    let spec = full_spec(Family::Zip);
    let theta = params(Family::Zip);
    let data = simulate(&spec, &theta, 500, 3);
    let zip = loglik(&spec, &theta, &data).unwrap();
    let zinb_spec = spec.with_family(Family::Zinb);
    let mut last = f64::INFINITY;
    for k in 2..=10 {
        let mut t = theta.clone();
        t.push(-(k as f64) * std::f64::consts::LN_10);
        let gap = (loglik(&zinb_spec, &t, &data).unwrap() - zip).abs();
        assert!(gap < last, "alpha 1e-{k}: gap {gap} after {last}");
        last = gap;
    }
    assert!(last < 1e-6);
}

#[test]
fn fitted_pmf_is_normalized() {
    for family in Family::ALL {
        let spec = full_spec(family);
        let data = simulate(&spec, &params(family), 600, 8);
        let f = fit(&spec, &data, &FitOptions::default()).unwrap();
        let eta = f.beta.iter().map(|c| c.estimate).take(1).sum::<f64>();
        let pi = f.gamma.first().map_or(0.0, |c| 1.0 / (1.0 + (-c.estimate).exp()));
        let total: f64 = (0..=2000).map(|y| pmf(family, y, eta.exp(), pi, f.alpha())).sum();
        assert!((1.0 - 1e-8..=1.0 + 1e-10).contains(&total), "{family}: {total}");
    }
}

#[test]
fn fit_serializes_to_json() {
    let spec = full_spec(Family::Zinb);
    let data = simulate(&spec, &params(Family::Zinb), 400, 2);
    let f = fit(&spec, &data, &FitOptions::default()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&f).unwrap();
    assert_eq!(v["spec"]["family"], "zinb");
    assert_eq!(v["beta"].as_array().unwrap().len(), 3);
    assert_eq!(v["gamma"][1]["term"], "x");
    assert!(v["log_alpha"]["se"].as_f64().unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zip_without_inflation_is_poisson(seed in 0u64..1000, b0 in -1.0f64..2.0, b1 in -1.0f64..1.0) {
        let pois = ModelSpec::new(Family::Poisson, "y").conditional(["x"]);
        let data = simulate(&pois, &[b0, b1], 200, seed);
        let zip = ModelSpec::new(Family::Zip, "y").conditional(["x"]).zero(["h"]);
        let a = loglik(&pois, &[b0, b1], &data).unwrap();
        let b = loglik(&zip, &[b0, b1, f64::NEG_INFINITY, 0.0], &data).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn pmf_sums_to_one(mu in 0.01f64..30.0, pi in 0.0f64..0.99, alpha in 0.01f64..3.0, fi in 0usize..4) {
        let family = Family::ALL[fi];
        let total: f64 = (0..=3000).map(|y| pmf(family, y, mu, pi, Some(alpha))).sum();
        prop_assert!((1.0 - 1e-8..=1.0 + 1e-10).contains(&total), "{}", total);
    }

    #[test]
    fn fit_is_invariant_to_row_order(seed in 0u64..1000, fi in 0usize..4) {
        let family = Family::ALL[fi];
        let spec = full_spec(family);
        let data = simulate(&spec, &params(family), 300, seed);
        let mut rows: Vec<usize> = (0..data.len()).collect();
        rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng::rng(seed));
        let opts = FitOptions::default();
        let a = fit(&spec, &data, &opts).unwrap();
        let b = fit(&spec, &data.select_rows(&rows), &opts).unwrap();
        prop_assert!((a.loglik - b.loglik).abs() < 1e-7);
        if a.converged && b.converged && !a.boundary {
            for (x, y) in a.params.iter().zip(&b.params) {
                prop_assert!((x - y).abs() < 1e-4, "{:?} vs {:?}", a.params, b.params);
            }
        }
    }

    #[test]
    fn adding_a_term_never_lowers_the_maximum(seed in 0u64..1000, fi in 0usize..4) {
        let family = Family::ALL[fi];
        let spec = full_spec(family);
        let data = simulate(&spec, &params(family), 300, seed);
        let opts = FitOptions::default();
        let small = fit(&spec, &data, &opts).unwrap();
        let mut big_spec = spec.clone();
        big_spec.conditional_terms.push("h".into());
        let big = fit(&big_spec, &data, &opts).unwrap();
        prop_assert!(big.loglik >= small.loglik - 1e-6, "{} < {}", big.loglik, small.loglik);
        prop_assert!(small.aicc.unwrap() >= small.aic);
        prop_assert!((small.aic - (-2.0 * small.loglik + 2.0 * small.k as f64)).abs() < 1e-9);
    }
}
