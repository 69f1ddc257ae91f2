use std::fmt;

use crate::error::{Error, Result};

/// The mixing hyperparameter `c >= 0`, possibly infinite.
///
/// `c = 0` recovers the Bayesian bootstrap and `c = +inf` the purely
/// parametric predictive. At effective sample size `i` the parametric
/// component carries weight `c / (c + i)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Concentration(f64);

impl Concentration {
    pub const ZERO: Concentration = Concentration(0.0);
    pub const INFINITE: Concentration = Concentration(f64::INFINITY);

    pub fn new(c: f64) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::rejected(format!("concentration must be >= 0, got {c}")));
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Parametric weight `lambda_i = c / (c + i)`.
    pub fn weight(self, i: usize) -> f64 {
        if self.0.is_infinite() {
            1.0
        } else if self.0 == 0.0 {
            0.0
        } else {
            self.0 / (self.0 + i as f64)
        }
    }

    /// Inverts `lambda = c / (c + n)`: `c = lambda n / (1 - lambda)`.
    pub fn from_lambda(lambda: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::rejected(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if lambda == 1.0 {
            Ok(Self::INFINITE)
        } else {
            Ok(Self(lambda * n as f64 / (1.0 - lambda)))
        }
    }
}

impl fmt::Display for Concentration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Concentration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Self::INFINITE),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::rejected(format!("cannot parse concentration {s:?}")))
                .and_then(Self::new),
        }
    }
}
