//! Log-likelihoods and analytic gradients.
//!
//! Parameters are laid out as `[β, γ, log α]`: the count-part coefficients,
//! the zero-inflation coefficients (zero-inflated families only) and the log
//! of the NB2 dispersion (negative binomial families only). With `r = 1/α`,
//! the NB2 variance is `μ + αμ²`.
//!
//! The inflation probability is handled in log space,
//! `log π = −softplus(−η)` and `log(1−π) = −softplus(η)`, and the zero mass
//! `log(π + (1−π)·f(0))` is a log-sum-exp, so `γ = −∞` gives the plain count
//! model exactly.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::{CountData, CountError, Design, Family, ModelSpec};

/// Above this count the NB normalizer uses log-gamma differences instead of
/// the term-by-term sum.
const LOOP_LIMIT: u32 = 200;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logsumexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Count-part log pmf and its derivatives in `η = log μ` and `r`.
struct CountTerm {
    logf: f64,
    d_eta: f64,
    d_r: f64,
}

#[inline]
fn poisson_term(y: u32, eta: f64, mu: f64, lgy: f64) -> CountTerm {
    let yf = f64::from(y);
    let y_eta = if y == 0 { 0.0 } else { yf * eta };
    CountTerm {
        logf: y_eta - mu - lgy,
        d_eta: yf - mu,
        d_r: 0.0,
    }
}

#[inline]
fn nb_term(y: u32, eta: f64, mu: f64, r: f64, lgy: f64) -> CountTerm {
    let yf = f64::from(y);
    let (sum, dsum) = if y <= LOOP_LIMIT || r > 1e5 {
        let (mut s, mut ds) = (0.0, 0.0);
        for k in 0..y {
            let k = f64::from(k);
            s += ((k - mu) / (r + mu)).ln_1p();
            ds += 1.0 / (r + k);
        }
        (s, ds)
    } else {
        (
            ln_gamma(yf + r) - ln_gamma(r) - yf * (r + mu).ln(),
            digamma(yf + r) - digamma(r),
        )
    };
    let y_eta = if y == 0 { 0.0 } else { yf * eta };
    let l1 = (mu / r).ln_1p();
    CountTerm {
        logf: sum + y_eta - lgy - r * l1,
        d_eta: r * (yf - mu) / (r + mu),
        d_r: dsum - l1 + (mu - yf) / (r + mu),
    }
}

/// A family, design matrices and response ready for evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub family: Family,
    pub x: Design,
    pub z: Option<Design>,
    pub y: Vec<u32>,
    lgy: Vec<f64>,
}

/// Per-observation fitted quantities.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fitted {
    pub mu: f64,
    pub pi: f64,
}

impl Model {
    pub fn new(spec: &ModelSpec, data: &CountData) -> Result<Self, CountError> {
        spec.validate()?;
        let x = data.design(&spec.conditional_terms)?;
        let rank = x.rank();
        if rank < x.ncol {
            return Err(CountError::RankDeficient {
                component: "conditional",
                rank,
                columns: x.ncol,
            });
        }
        let z = if spec.family.zero_inflated() {
            let z = data.design(&spec.zero_terms)?;
            let rank = z.rank();
            if rank < z.ncol {
                return Err(CountError::RankDeficient {
                    component: "zero-inflation",
                    rank,
                    columns: z.ncol,
                });
            }
            Some(z)
        } else {
            None
        };
        Ok(Model {
            family: spec.family,
            x,
            z,
            lgy: data.y.iter().map(|&y| ln_gamma(f64::from(y) + 1.0)).collect(),
            y: data.y.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncol
    }

    pub fn q(&self) -> usize {
        self.z.as_ref().map_or(0, |z| z.ncol)
    }

    pub fn n_params(&self) -> usize {
        self.p() + self.q() + usize::from(self.family.has_dispersion())
    }

    pub fn check(&self, theta: &[f64]) -> Result<(), CountError> {
        if theta.len() != self.n_params() {
            return Err(CountError::ParamLength {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn dot(row: &[f64], coef: &[f64]) -> f64 {
        row.iter().zip(coef).map(|(a, b)| a * b).sum()
    }

    fn r(&self, theta: &[f64]) -> Option<f64> {
        self.family.has_dispersion().then(|| (-theta[self.p() + self.q()]).exp())
    }

    pub fn fitted(&self, theta: &[f64], i: usize) -> Fitted {
        let (p, q) = (self.p(), self.q());
        let mu = Self::dot(self.x.row(i), &theta[..p]).exp();
        let pi = match &self.z {
            Some(z) => (-softplus(-Self::dot(z.row(i), &theta[p..p + q]))).exp(),
            None => 0.0,
        };
        Fitted { mu, pi }
    }

    /// Log-likelihood, writing its gradient into `grad` when given.
    pub fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (p, q) = (self.p(), self.q());
        let r = self.r(theta);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut total = 0.0;
        for i in 0..self.n() {
            let y = self.y[i];
            let xr = self.x.row(i);
            let eta = Self::dot(xr, &theta[..p]);
            let mu = eta.exp();
            let ct = match r {
                Some(r) => nb_term(y, eta, mu, r, self.lgy[i]),
                None => poisson_term(y, eta, mu, self.lgy[i]),
            };
            let (ll, d_eta, d_r, d_z) = match &self.z {
                None => (ct.logf, ct.d_eta, ct.d_r, 0.0),
                Some(z) => {
                    let eta_z = Self::dot(z.row(i), &theta[p..p + q]);
                    let log_pi = -softplus(-eta_z);
                    let log_keep = -softplus(eta_z);
                    if y > 0 {
                        (log_keep + ct.logf, ct.d_eta, ct.d_r, -log_pi.exp())
                    } else {
                        let ll = logsumexp(log_pi, log_keep + ct.logf);
                        let w = (log_keep + ct.logf - ll).exp();
                        let d_z = (1.0 - w) * log_keep.exp() * -ct.logf.exp_m1();
                        (ll, w * ct.d_eta, w * ct.d_r, d_z)
                    }
                }
            };
            total += ll;
            if let Some(g) = grad.as_deref_mut() {
                for (gj, xj) in g[..p].iter_mut().zip(xr) {
                    *gj += d_eta * xj;
                }
                if let Some(z) = &self.z {
                    for (gj, zj) in g[p..p + q].iter_mut().zip(z.row(i)) {
                        *gj += d_z * zj;
                    }
                }
                if let Some(r) = r {
                    g[p + q] += -r * d_r;
                }
            }
        }
        total
    }
}

/// Exact log-likelihood of `params` laid out as `[β, γ, log α]`.
pub fn loglik(spec: &ModelSpec, params: &[f64], data: &CountData) -> Result<f64, CountError> {
    let model = Model::new(spec, data)?;
    model.check(params)?;
    let ll = model.eval(params, None);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(CountError::NonFinite)
    }
}

/// Analytic gradient of [`loglik`].
pub fn loglik_gradient(spec: &ModelSpec, params: &[f64], data: &CountData) -> Result<Vec<f64>, CountError> {
    let model = Model::new(spec, data)?;
    model.check(params)?;
    let mut g = vec![0.0; params.len()];
    model.eval(params, Some(&mut g));
    Ok(g)
}

/// Probability of count `y` given the mean `mu` of the count part, the
/// inflation probability `pi` and (NB families) the dispersion `alpha`.
pub fn pmf(family: Family, y: u32, mu: f64, pi: f64, alpha: Option<f64>) -> f64 {
    let lgy = ln_gamma(f64::from(y) + 1.0);
    let eta = mu.ln();
    let logf = match (family.has_dispersion(), alpha) {
        (true, Some(a)) => nb_term(y, eta, mu, 1.0 / a, lgy).logf,
        _ => poisson_term(y, eta, mu, lgy).logf,
    };
    let count = logf.exp();
    if !family.zero_inflated() {
        count
    } else if y == 0 {
        pi + (1.0 - pi) * count
    } else {
        (1.0 - pi) * count
    }
}
