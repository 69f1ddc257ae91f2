use crate::error::{Error, Result};

/// An observed univariate sample `y_1..y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::rejected("dataset must contain at least one value"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::rejected(format!("value {v} at index {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Splits into `(selected, rest)` by index membership.
    pub fn partition(&self, selected: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut mask = vec![false; self.values.len()];
        for &i in selected {
            mask[i] = true;
        }
        let mut inside = Vec::with_capacity(selected.len());
        let mut outside = Vec::with_capacity(self.values.len() - selected.len());
        for (v, m) in self.values.iter().zip(mask) {
            if m {
                inside.push(*v);
            } else {
                outside.push(*v);
            }
        }
        (inside, outside)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
