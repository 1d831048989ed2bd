use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use rdsnet_core::rng;

use crate::likelihood::Model;
use crate::{CountData, CountError, ModelSpec};

fn poisson<R: Rng>(mu: f64, rng: &mut R) -> u32 {
    if !(mu > 0.0) {
        return 0;
    }
    let draw: f64 = Poisson::new(mu).expect("positive mean").sample(rng);
    draw.min(f64::from(u32::MAX)) as u32
}

/// Draws a response vector from the model at `params` using the covariates
/// of `data`. The NB2 draw is a gamma-mixed Poisson.
pub fn simulate_response(spec: &ModelSpec, data: &CountData, params: &[f64], seed: u64) -> Result<Vec<u32>, CountError> {
    let model = Model::new(spec, data)?;
    model.check(params)?;
    let alpha = spec
        .family
        .has_dispersion()
        .then(|| params[model.p() + model.q()].exp());
    let mut rng = rng::rng(seed);
    Ok((0..model.n())
        .map(|i| {
            let f = model.fitted(params, i);
            if f.pi > 0.0 && rng.random::<f64>() < f.pi {
                return 0;
            }
            let mu = match alpha {
                Some(a) if f.mu > 0.0 => Gamma::new(1.0 / a, a * f.mu)
                    .map(|g| g.sample(&mut rng))
                    .unwrap_or(f.mu),
                _ => f.mu,
            };
            poisson(mu, &mut rng)
        })
        .collect())
}
