use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Numerically stable `1 / (1 + exp(-eta))`.
pub fn inverse_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Conditional law of a binary response under the logit link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliLaw {
    pub prob: f64,
}

impl BernoulliLaw {
    /// `Y | x ~ Bernoulli(g^-1(x' beta))` for the canonical logit link.
    pub fn logistic(x: &[f64], beta: &[f64]) -> Result<Self> {
        if x.len() != beta.len() {
            return Err(Error::rejected(format!(
                "covariate length {} does not match coefficient length {}",
                x.len(),
                beta.len()
            )));
        }
        let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        Ok(Self {
            prob: inverse_logit(eta),
        })
    }

    pub fn mean(&self) -> f64 {
        self.prob
    }

    /// `V(mu) = mu (1 - mu)` with dispersion 1.
    pub fn variance(&self) -> f64 {
        self.prob * (1.0 - self.prob)
    }
}

/// Canonical-link GLM response families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlmFamily {
    /// Binary response, logit link, dispersion 1.
    Logistic,
    /// Real response, identity link, with a fixed residual variance.
    Gaussian { variance: f64 },
}

impl GlmFamily {
    pub fn inverse_link(&self, eta: f64) -> f64 {
        match self {
            GlmFamily::Logistic => inverse_logit(eta),
            GlmFamily::Gaussian { .. } => eta,
        }
    }

    /// Cumulant `b(eta)`, so the log-likelihood is `y eta - b(eta)` up to
    /// dispersion and constants.
    pub fn cumulant(&self, eta: f64) -> f64 {
        match self {
            // log(1 + e^eta), stable in both tails
            GlmFamily::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
            GlmFamily::Gaussian { .. } => 0.5 * eta * eta,
        }
    }

    /// `d mu / d eta`, which for a canonical link is the variance function.
    pub fn mean_derivative(&self, mu: f64) -> f64 {
        match self {
            GlmFamily::Logistic => mu * (1.0 - mu),
            GlmFamily::Gaussian { .. } => 1.0,
        }
    }

    pub fn sample_response<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        match self {
            GlmFamily::Logistic => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            GlmFamily::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + variance.sqrt() * z
            }
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, GlmFamily::Logistic)
    }
}
