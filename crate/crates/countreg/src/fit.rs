use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use rdsnet_core::rng;

use crate::likelihood::Model;
use crate::optim::{fd_hessian, minimize, OptimResult};
use crate::{CountData, CountError, Design, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Gradient max-norm for convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Optimizer runs; runs after the first start from jittered values.
    pub n_starts: usize,
    pub rng_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iter: 500,
            n_starts: 1,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    /// `+` p < .1, `*` p < .05, `**` p < .01, `***` p < .001.
    pub stars: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Criteria {
    pub aic: f64,
    /// Absent when `n ≤ k + 1`.
    pub aicc: Option<f64>,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountModelFit {
    pub spec: ModelSpec,
    pub beta: Vec<Coefficient>,
    pub gamma: Vec<Coefficient>,
    pub log_alpha: Option<Coefficient>,
    /// Raw parameter vector `[β, γ, log α]`.
    pub params: Vec<f64>,
    /// Inverse observed information; absent when it is not positive definite.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub loglik: f64,
    /// Free parameters, dispersion and zero-part coefficients included.
    pub k: usize,
    pub n: usize,
    pub aic: f64,
    pub aicc: Option<f64>,
    pub bic: f64,
    pub rmse: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Some fitted inflation probability lies outside `[1e-10, 1 − 1e-10]`.
    pub boundary: bool,
}

impl CountModelFit {
    pub fn alpha(&self) -> Option<f64> {
        self.log_alpha.as_ref().map(|c| c.estimate.exp())
    }

    pub fn criteria(&self) -> Criteria {
        Criteria {
            aic: self.aic,
            aicc: self.aicc,
            bic: self.bic,
        }
    }

    /// All coefficients in parameter order.
    pub fn coefficients(&self) -> impl Iterator<Item = &Coefficient> {
        self.beta.iter().chain(&self.gamma).chain(&self.log_alpha)
    }
}

/// `aic = −2ℓ + 2k`, `aicc = aic + 2k(k+1)/(n−k−1)`, `bic = −2ℓ + k·ln n`.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> Criteria {
    let kf = k as f64;
    let aic = -2.0 * loglik + 2.0 * kf;
    let aicc = if k == 0 {
        Some(aic)
    } else if n > k + 1 {
        Some(aic + 2.0 * kf * (kf + 1.0) / (n - k - 1) as f64)
    } else {
        None
    };
    Criteria {
        aic,
        aicc,
        bic: -2.0 * loglik + kf * (n as f64).ln(),
    }
}

fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => "+",
        _ => "",
    }
}

fn coefficient(term: &str, estimate: f64, var: Option<f64>) -> Coefficient {
    let se = var.filter(|v| v.is_finite() && *v >= 0.0).map(f64::sqrt);
    let z = se.filter(|&s| s > 0.0).map(|s| estimate / s);
    let p_value = z.map(|z| erfc(z.abs() / std::f64::consts::SQRT_2));
    Coefficient {
        term: term.to_string(),
        estimate,
        se,
        z,
        p_value,
        stars: p_value.map_or("", stars),
    }
}

/// Poisson IRLS on the count design; used for starting values.
fn irls_poisson(x: &Design, y: &[u32]) -> Vec<f64> {
    let (n, p) = (y.len(), x.ncol);
    let ybar = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n.max(1) as f64;
    let mut beta = vec![0.0; p];
    beta[0] = ybar.max(1e-2).ln();
    for _ in 0..50 {
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for (i, &yi) in y.iter().enumerate() {
            let row = x.row(i);
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().clamp(-30.0, 30.0);
            let mu = eta.exp();
            let zt = eta + (f64::from(yi) - mu) / mu;
            for a in 0..p {
                xtwz[a] += mu * row[a] * zt;
                for b in 0..=a {
                    xtwx[(a, b)] += mu * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let Some(chol) = xtwx.cholesky() else { break };
        let next = chol.solve(&xtwz);
        let change = next.iter().zip(&beta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta.copy_from_slice(next.as_slice());
        if change < 1e-8 {
            break;
        }
    }
    beta
}

fn default_start(model: &Model) -> Vec<f64> {
    let n = model.n() as f64;
    let mut theta = irls_poisson(&model.x, &model.y);
    let p = theta.len();
    let mean = model.y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = model.y.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let alpha = if mean > 0.0 { ((var - mean) / (mean * mean)).clamp(0.05, 20.0) } else { 1.0 };
    if let Some(z) = &model.z {
        let p0_obs = model.y.iter().filter(|&&v| v == 0).count() as f64 / n;
        let p0_model = (0..model.n())
            .map(|i| {
                let mu = model.x.row(i).iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>().exp();
                if model.family.has_dispersion() {
                    (-(alpha * mu).ln_1p() / alpha).exp()
                } else {
                    (-mu).exp()
                }
            })
            .sum::<f64>()
            / n;
        let excess = ((p0_obs - p0_model) / (1.0 - p0_model)).clamp(0.05, 0.95);
        theta[0] -= (1.0 - excess).ln();
        theta.push((excess / (1.0 - excess)).ln());
        theta.extend(std::iter::repeat_n(0.0, z.ncol - 1));
    }
    if model.family.has_dispersion() {
        theta.push(alpha.ln());
    }
    debug_assert_eq!(theta.len(), p + model.q() + usize::from(model.family.has_dispersion()));
    theta
}

pub fn fit(spec: &ModelSpec, data: &CountData, opts: &FitOptions) -> Result<CountModelFit, CountError> {
    fit_with_start(spec, data, opts, None)
}

/// Like [`fit`], starting the first optimizer run at `start`.
pub fn fit_with_start(
    spec: &ModelSpec,
    data: &CountData,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<CountModelFit, CountError> {
    let model = Model::new(spec, data)?;
    let k = model.n_params();
    let n = model.n();
    if n <= k {
        return Err(CountError::TooFewObservations { n, k });
    }
    let theta0 = match start {
        Some(s) => {
            model.check(s)?;
            s.to_vec()
        }
        None => default_start(&model),
    };
    let objective = |theta: &[f64], g: &mut [f64]| {
        let ll = model.eval(theta, Some(g));
        g.iter_mut().for_each(|v| *v = -*v);
        if ll.is_nan() {
            f64::INFINITY
        } else {
            -ll
        }
    };
    let mut best: Option<OptimResult> = None;
    let mut rng = rng::rng(rng::child_seed(opts.rng_seed, 0xC0DE, 0));
    for s in 0..opts.n_starts.max(1) {
        let x0: Vec<f64> = if s == 0 {
            theta0.clone()
        } else {
            theta0
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v + 0.5 * e
                })
                .collect()
        };
        let r = minimize(&objective, &x0, opts.tol, opts.max_iter);
        let better = match &best {
            None => true,
            Some(b) => (r.converged, -r.value) > (b.converged, -b.value),
        };
        if better {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let theta = best.x.clone();
    let loglik = -best.value;
    if !loglik.is_finite() {
        return Err(CountError::NonFinite);
    }

    let info = fd_hessian(&objective, &theta);
    let covariance = info.cholesky().map(|c| c.inverse());
    let var = |j: usize| covariance.as_ref().map(|c| c[(j, j)]);
    let (p, q) = (model.p(), model.q());
    let beta = (0..p).map(|j| coefficient(&model.x.names[j], theta[j], var(j))).collect();
    let gamma = model
        .z
        .as_ref()
        .map(|z| (0..q).map(|j| coefficient(&z.names[j], theta[p + j], var(p + j))).collect())
        .unwrap_or_default();
    let log_alpha = spec
        .family
        .has_dispersion()
        .then(|| coefficient("log(alpha)", theta[p + q], var(p + q)));
    let crit = information_criteria(loglik, k, n);
    let boundary = model.z.is_some()
        && (0..n).any(|i| {
            let pi = model.fitted(&theta, i).pi;
            !(1e-10..=1.0 - 1e-10).contains(&pi)
        });
    Ok(CountModelFit {
        spec: spec.clone(),
        beta,
        gamma,
        log_alpha,
        covariance: covariance.map(|c| (0..k).map(|i| (0..k).map(|j| c[(i, j)]).collect()).collect()),
        rmse: model_rmse(&model, &theta),
        params: theta,
        loglik,
        k,
        n,
        aic: crit.aic,
        aicc: crit.aicc,
        bic: crit.bic,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        boundary,
    })
}

fn model_rmse(model: &Model, theta: &[f64]) -> f64 {
    let n = model.n();
    let sse: f64 = (0..n)
        .map(|i| {
            let f = model.fitted(theta, i);
            (f64::from(model.y[i]) - (1.0 - f.pi) * f.mu).powi(2)
        })
        .sum();
    (sse / n as f64).sqrt()
}

/// Root-mean-square error of `y` around the fitted mean `(1 − π̂)·μ̂`.
pub fn rmse(fit: &CountModelFit, data: &CountData) -> Result<f64, CountError> {
    let model = Model::new(&fit.spec, data)?;
    model.check(&fit.params)?;
    Ok(model_rmse(&model, &fit.params))
}
