//! Moment martingale posteriors.
//!
//! Predictive resampling with a semiparametric mixture predictive
//! `c/(c+i) f_theta + i/(c+i) P_i`, where `f_theta` is tied to the empirical
//! component by the method of moments so that the first `p` moments are
//! martingales. The crate covers the univariate samplers (mixture, Bayesian
//! bootstrap, score-driven parametric), energy-score selection of `c`, and
//! the GLM extension with a covariate Bayesian bootstrap.

pub mod concentration;
pub mod data;
pub mod energy;
pub mod error;
pub mod families;
pub mod mixture;
pub mod moments;
pub mod quadrature;
pub mod regression;
pub mod resampling;
pub mod rng;

pub use concentration::Concentration;
pub use data::Dataset;
pub use error::{Error, Result};
pub use families::{Normal, NormalParams, ParametricFamily, SkewNormalParams};
pub use mixture::MixturePredictive;
pub use moments::MomentState;
pub use rng::RngStream;
