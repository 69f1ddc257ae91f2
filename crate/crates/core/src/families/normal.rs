use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use super::{ParametricFamily, ScoreFamily};
use crate::error::{Error, Result};

/// Variances at or below this floor make the moment inverse fail.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub variance: f64,
}

impl NormalParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::rejected(format!(
                "normal parameters need finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Normal location-scale model with `theta = (mean, variance)`, matched on
/// the first two moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct Normal;

impl ParametricFamily for Normal {
    type Params = NormalParams;

    fn order(&self) -> usize {
        2
    }

    fn fit_moments(&self, moments: &[f64]) -> Result<NormalParams> {
        if moments.len() < 2 {
            return Err(Error::rejected("normal moment inverse needs two moments"));
        }
        let (m1, m2) = (moments[0], moments[1]);
        let variance = m2 - m1 * m1;
        if !(variance > VARIANCE_FLOOR) {
            return Err(Error::DegenerateMoments {
                variance,
                floor: VARIANCE_FLOOR,
            });
        }
        NormalParams::new(m1, variance)
    }

    fn raw_moment(&self, p: &NormalParams, k: usize) -> Result<f64> {
        let (m, v) = (p.mean, p.variance);
        Ok(match k {
            1 => m,
            2 => m * m + v,
            3 => m * m * m + 3.0 * m * v,
            4 => m.powi(4) + 6.0 * m * m * v + 3.0 * v * v,
            _ => return Err(Error::UnsupportedMoment(k)),
        })
    }

    fn central_moment(&self, p: &NormalParams, k: usize) -> Result<f64> {
        Ok(match k {
            1 | 3 => 0.0,
            2 => p.variance,
            4 => 3.0 * p.variance * p.variance,
            _ => return Err(Error::UnsupportedMoment(k)),
        })
    }

    fn mean(&self, p: &NormalParams) -> f64 {
        p.mean
    }

    fn scale(&self, p: &NormalParams) -> f64 {
        p.sd()
    }

    fn density(&self, p: &NormalParams, y: f64) -> f64 {
        let z = (y - p.mean) / p.sd();
        (-0.5 * z * z).exp() / (p.sd() * (2.0 * PI).sqrt())
    }

    fn cdf(&self, p: &NormalParams, y: f64) -> f64 {
        std_normal_cdf((y - p.mean) / p.sd())
    }

    fn sample<R: Rng + ?Sized>(&self, p: &NormalParams, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        p.mean + p.sd() * z
    }

    /// Folded-normal mean: `sigma sqrt(2/pi) exp(-d^2/2) + (a - mu)(2 Phi(d) - 1)`.
    fn abs_moment_integral(&self, p: &NormalParams, a: f64) -> f64 {
        let sd = p.sd();
        let diff = a - p.mean;
        let d = diff / sd;
        sd * (2.0 / PI).sqrt() * (-0.5 * d * d).exp() + diff * (2.0 * std_normal_cdf(d) - 1.0)
    }

    /// `E|X - X'| = 2 sigma / sqrt(pi)`.
    fn pair_abs_moment(&self, p: &NormalParams) -> f64 {
        FRAC_2_SQRT_PI * p.sd()
    }
}

impl ScoreFamily for Normal {
    fn to_vector(&self, p: &NormalParams) -> DVector<f64> {
        DVector::from_vec(vec![p.mean, p.variance])
    }

    fn from_vector(&self, theta: &DVector<f64>) -> Result<NormalParams> {
        if theta.len() != 2 {
            return Err(Error::rejected("normal parameter vector must have length 2"));
        }
        NormalParams::new(theta[0], theta[1])
    }

    fn score(&self, p: &NormalParams, y: f64) -> DVector<f64> {
        let r = y - p.mean;
        let v = p.variance;
        DVector::from_vec(vec![r / v, -0.5 / v + 0.5 * r * r / (v * v)])
    }

    fn fisher(&self, p: &NormalParams) -> DMatrix<f64> {
        let v = p.variance;
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / v, 0.5 / (v * v)]))
    }
}
