//! Parametric families used as the model component of the mixture predictive,
//! plus the skew-normal data generator and the GLM response families.

mod glm;
mod normal;
mod skew_normal;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use glm::{inverse_logit, BernoulliLaw, GlmFamily};
pub use normal::{Normal, NormalParams};
pub use skew_normal::SkewNormalParams;

use crate::error::Result;
use crate::quadrature;

/// A parametric model `f_theta` whose parameters are tied to the data through
/// the method of moments.
///
/// `order()` is the number of parameters `p`; [`fit_moments`] is the inverse
/// map `h(mu^(1), ..., mu^(p))` and [`raw_moment`] its forward counterpart.
///
/// [`fit_moments`]: ParametricFamily::fit_moments
/// [`raw_moment`]: ParametricFamily::raw_moment
pub trait ParametricFamily: Send + Sync {
    type Params: Clone + Debug + Send + Sync;

    fn order(&self) -> usize;

    /// Method-of-moments inverse. Only the first `order()` entries are read.
    fn fit_moments(&self, moments: &[f64]) -> Result<Self::Params>;

    /// Non-central moment `E X^k`.
    fn raw_moment(&self, params: &Self::Params, k: usize) -> Result<f64>;

    /// Central moment `E (X - E X)^k`.
    fn central_moment(&self, params: &Self::Params, k: usize) -> Result<f64>;

    fn mean(&self, params: &Self::Params) -> f64;

    /// A spread hint (standard deviation for location-scale families).
    fn scale(&self, params: &Self::Params) -> f64;

    fn density(&self, params: &Self::Params, y: f64) -> f64;

    fn cdf(&self, params: &Self::Params, y: f64) -> f64;

    fn sample<R: Rng + ?Sized>(&self, params: &Self::Params, rng: &mut R) -> f64;

    /// First `order()` moments of `f_theta`.
    fn moments(&self, params: &Self::Params) -> Result<Vec<f64>> {
        (1..=self.order()).map(|k| self.raw_moment(params, k)).collect()
    }

    /// `E|X - a|` for `X ~ f_theta`.
    ///
    /// The default integrates `F` and `1 - F` numerically to within
    /// [`quadrature::FALLBACK_TOLERANCE`]; families with a closed form override it.
    fn abs_moment_integral(&self, params: &Self::Params, a: f64) -> f64 {
        let s = self.scale(params);
        quadrature::lower_half_line(|x| self.cdf(params, x), a, s)
            + quadrature::upper_half_line(|x| 1.0 - self.cdf(params, x), a, s)
    }

    /// `E|X - X'|` for independent `X, X' ~ f_theta`, i.e. `2 int F (1 - F)`.
    fn pair_abs_moment(&self, params: &Self::Params) -> f64 {
        let s = self.scale(params);
        let m = self.mean(params);
        let g = |x: f64| {
            let f = self.cdf(params, x);
            f * (1.0 - f)
        };
        2.0 * (quadrature::lower_half_line(g, m, s) + quadrature::upper_half_line(g, m, s))
    }
}

/// Families that also support the score-driven parametric update
/// `theta_i = theta_{i-1} + i^-1 I(theta_{i-1})^-1 s(y_i, theta_{i-1})`.
pub trait ScoreFamily: ParametricFamily {
    fn to_vector(&self, params: &Self::Params) -> DVector<f64>;

    fn from_vector(&self, theta: &DVector<f64>) -> Result<Self::Params>;

    /// Gradient of `log f_theta(y)` with respect to the parameter vector.
    fn score(&self, params: &Self::Params, y: f64) -> DVector<f64>;

    /// Per-observation Fisher information.
    fn fisher(&self, params: &Self::Params) -> DMatrix<f64>;
}
