use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Skew-normal law with location `xi`, scale `omega` and slant `alpha`.
///
/// Only used to generate misspecified data; never fitted as a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl SkewNormalParams {
    pub fn new(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        if !(xi.is_finite() && alpha.is_finite() && omega.is_finite() && omega > 0.0) {
            return Err(Error::rejected(format!(
                "skew-normal needs finite parameters with omega > 0, got ({xi}, {omega}, {alpha})"
            )));
        }
        Ok(Self { xi, omega, alpha })
    }

    pub fn delta(&self) -> f64 {
        self.alpha / (1.0 + self.alpha * self.alpha).sqrt()
    }

    /// Draws `xi + omega (delta |U0| + sqrt(1 - delta^2) U1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.delta();
        let u0: f64 = rng.sample(StandardNormal);
        let u1: f64 = rng.sample(StandardNormal);
        self.xi + self.omega * (d * u0.abs() + (1.0 - d * d).sqrt() * u1)
    }

    pub fn mean(&self) -> f64 {
        self.xi + self.omega * self.delta() * (2.0 / PI).sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.omega * self.omega * (1.0 - 2.0 * d * d / PI)
    }

    pub fn skewness(&self) -> f64 {
        let b = self.delta() * (2.0 / PI).sqrt();
        0.5 * (4.0 - PI) * b.powi(3) / (1.0 - b * b).powf(1.5)
    }
}
