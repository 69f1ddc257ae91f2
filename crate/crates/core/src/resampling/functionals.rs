use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::families::ParametricFamily;
use crate::mixture::MixturePredictive;
use crate::moments::MomentState;

/// Summary functionals of a final predictive.
///
/// Skewness and kurtosis are `None` when fewer than three (resp. four)
/// moments were tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct Functionals {
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    /// `(level, value)` pairs in request order.
    pub quantiles: Vec<(f64, f64)>,
}

impl Functionals {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(q, _)| *q == level)
            .map(|(_, v)| *v)
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }

    /// Name-keyed view: `mean`, `variance`, `skewness`, `kurtosis`, `q<level>`
    /// and `median` when the 0.5 quantile was requested.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        map.insert("mean".to_string(), self.mean);
        map.insert("variance".to_string(), self.variance);
        if let Some(s) = self.skewness {
            map.insert("skewness".to_string(), s);
        }
        if let Some(k) = self.kurtosis {
            map.insert("kurtosis".to_string(), k);
        }
        for (q, v) in &self.quantiles {
            map.insert(quantile_name(*q), *v);
        }
        if let Some(m) = self.median() {
            map.insert("median".to_string(), m);
        }
        map
    }
}

pub fn quantile_name(level: f64) -> String {
    format!("q{level}")
}

/// Functionals of the final mixture predictive.
///
/// The moments of the predictive are `lambda` times the model's plus
/// `1 - lambda` times the tracked empirical moments; at `lambda = 1` only the
/// model contributes, so a symmetric model gives skewness exactly zero.
pub fn extract_functionals<F: ParametricFamily>(
    pred: &MixturePredictive<'_, F>,
    moments: &MomentState,
    quantiles: &[f64],
) -> Result<Functionals> {
    let lambda = pred.lambda();
    let family = pred.family();
    let params = pred.params();
    let order = moments.order();
    let emp = moments.moments();

    let model_mean = family.mean(params);
    let mean = lambda * model_mean + (1.0 - lambda) * emp[0];
    let shift = model_mean - mean;

    let central = |k: usize| -> Result<f64> {
        let model = if lambda > 0.0 {
            // E(X - mean)^k = sum_j C(k, j) E(X - m_theta)^j shift^(k - j)
            let mut total = 0.0;
            let mut binom = 1.0;
            for j in 0..=k {
                let cj = match j {
                    0 => 1.0,
                    1 => 0.0,
                    _ => family.central_moment(params, j)?,
                };
                total += binom * cj * shift.powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            total
        } else {
            0.0
        };
        let empirical = if lambda < 1.0 {
            moment_about(emp, mean, k)
        } else {
            0.0
        };
        Ok(lambda * model + (1.0 - lambda) * empirical)
    };

    if order < 2 {
        return Err(Error::rejected("functionals need at least two tracked moments"));
    }
    let variance = central(2)?;
    if !(variance > 0.0) {
        return Err(Error::DegenerateMoments {
            variance,
            floor: 0.0,
        });
    }
    let skewness = if order >= 3 {
        Some(central(3)? / variance.powf(1.5))
    } else {
        None
    };
    let kurtosis = if order >= 4 {
        Some(central(4)? / (variance * variance))
    } else {
        None
    };
    let values = if quantiles.is_empty() {
        Vec::new()
    } else {
        pred.quantiles(quantiles)?
    };
    Ok(Functionals {
        mean,
        variance,
        skewness,
        kurtosis,
        quantiles: quantiles.iter().copied().zip(values).collect(),
    })
}

/// Functionals of a weighted empirical distribution.
///
/// A point mass is allowed: its variance is zero and skewness and kurtosis
/// are left undefined.
pub fn weighted_functionals(values: &[f64], weights: &[f64], quantiles: &[f64]) -> Result<Functionals> {
    if values.len() != weights.len() || values.is_empty() {
        return Err(Error::rejected("values and weights must be non-empty and of equal length"));
    }
    if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::rejected(format!("quantile level {q} outside (0, 1)")));
    }
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / total;
    let mut central = [0.0; 3];
    for (&y, &w) in values.iter().zip(weights) {
        let d = y - mean;
        central[0] += w * d * d;
        central[1] += w * d * d * d;
        central[2] += w * d * d * d * d;
    }
    let [variance, c3, c4] = central.map(|c| c / total);
    let (skewness, kurtosis) = if variance > 0.0 {
        (Some(c3 / variance.powf(1.5)), Some(c4 / (variance * variance)))
    } else {
        (None, None)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let qv = quantiles
        .iter()
        .map(|&q| {
            let target = q * total;
            let mut cum = 0.0;
            for &j in &order {
                cum += weights[j];
                if cum >= target {
                    return (q, values[j]);
                }
            }
            (q, values[order[order.len() - 1]])
        })
        .collect();
    Ok(Functionals {
        mean,
        variance,
        skewness,
        kurtosis,
        quantiles: qv,
    })
}

/// `E (X - center)^k` from raw moments `raw[j - 1] = E X^j`.
pub(crate) fn moment_about(raw: &[f64], center: f64, k: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let ej = if j == 0 { 1.0 } else { raw[j - 1] };
        total += binom * ej * (-center).powi((k - j) as i32);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    total
}
