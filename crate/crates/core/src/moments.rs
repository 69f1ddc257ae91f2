use crate::error::{Error, Result};

/// Running raw moments `mu^(1..=order)` of an (imputed) sample of size `count`.
///
/// Stored as running means rather than power sums so that long trajectories
/// do not accumulate huge intermediate values.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    moments: Vec<f64>,
    count: usize,
}

impl MomentState {
    pub fn new(moments: Vec<f64>, count: usize) -> Result<Self> {
        if moments.is_empty() {
            return Err(Error::rejected("moment order must be at least 1"));
        }
        if count == 0 {
            return Err(Error::rejected("moment count must be at least 1"));
        }
        if moments.iter().any(|m| !m.is_finite()) {
            return Err(Error::rejected("moments must be finite"));
        }
        for (idx, m) in moments.iter().enumerate() {
            let k = idx + 1;
            if k % 2 == 0 && *m < 0.0 {
                return Err(Error::rejected(format!("even moment mu^({k}) = {m} is negative")));
            }
        }
        if moments.len() >= 2 {
            let (m1, m2) = (moments[0], moments[1]);
            if m2 - m1 * m1 < -1e-12 * m2.abs().max(1.0) {
                return Err(Error::rejected(format!(
                    "moments violate Jensen: mu2 = {m2} < mu1^2 = {}",
                    m1 * m1
                )));
            }
        }
        Ok(Self { moments, count })
    }

    /// Raw moments of `values` up to `order`.
    pub fn from_sample(values: &[f64], order: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::rejected("cannot take moments of an empty sample"));
        }
        if order == 0 {
            return Err(Error::rejected("moment order must be at least 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::rejected("sample contains a non-finite value"));
        }
        let mut sums = vec![0.0; order];
        for &y in values {
            let mut pow = 1.0;
            for s in sums.iter_mut() {
                pow *= y;
                *s += pow;
            }
        }
        let n = values.len() as f64;
        Ok(Self {
            moments: sums.into_iter().map(|s| s / n).collect(),
            count: values.len(),
        })
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// `mu^(k)` for 1-based `k`.
    pub fn raw(&self, k: usize) -> f64 {
        self.moments[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.moments[0]
    }

    /// Absorbs one observation: `mu^(k) <- (i mu^(k) + y^k) / (i + 1)`.
    pub fn push(&mut self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::rejected(format!("cannot absorb non-finite value {y}")));
        }
        let i = self.count as f64;
        let mut pow = 1.0;
        for m in self.moments.iter_mut() {
            pow *= y;
            *m = (i * *m + pow) / (i + 1.0);
        }
        self.count += 1;
        Ok(())
    }

    /// Functional form of [`MomentState::push`].
    pub fn updated(&self, y: f64) -> Result<Self> {
        let mut next = self.clone();
        next.push(y)?;
        Ok(next)
    }

    /// Central moment of order `k` (2..=order) about the first moment.
    pub fn central(&self, k: usize) -> f64 {
        central_from_raw(&self.moments, k)
    }
}

/// Central moment `E[(X - m)^k]` from raw moments `raw[0] = E X, raw[1] = E X^2, ...`.
pub(crate) fn central_from_raw(raw: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= raw.len(), "central moment order out of range");
    let m = raw[0];
    // sum_j C(k, j) E[X^j] (-m)^(k-j), with E[X^0] = 1
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let ej = if j == 0 { 1.0 } else { raw[j - 1] };
        total += binom * ej * (-m).powi((k - j) as i32);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn update_arithmetic() {
        let mut s = MomentState::new(vec![2.0, 5.0], 4).unwrap();
        s.push(2.0).unwrap();
        assert_eq!(s.moments(), &[2.0, 4.8]);
        assert_eq!(s.count(), 5);
    }

    #[test]
    fn zero_fixed_point() {
        let s = MomentState::new(vec![0.0], 1).unwrap().updated(0.0).unwrap();
        assert_eq!(s.moments(), &[0.0]);
        assert_eq!(s.count(), 2);
    }

    #[test]
    fn rejects_non_finite_observation() {
        let mut s = MomentState::new(vec![0.0, 1.0], 3).unwrap();
        assert!(matches!(s.push(f64::NAN), Err(Error::RejectedInput(_))));
        assert_eq!(s.count(), 3);
    }

    #[test]
    fn invalid_states() {
        assert!(MomentState::new(vec![], 1).is_err());
        assert!(MomentState::new(vec![0.0], 0).is_err());
        assert!(MomentState::new(vec![0.0, -1.0], 2).is_err());
        assert!(MomentState::new(vec![2.0, 3.0], 2).is_err());
    }

    #[test]
    fn central_moments() {
        // standard normal raw moments
        let raw = [0.0, 1.0, 0.0, 3.0];
        assert_eq!(central_from_raw(&raw, 3), 0.0);
        assert_eq!(central_from_raw(&raw, 4), 3.0);
        // sample {1, 2, 3, 6}: mean 3, central deviations -2,-1,0,3
        let s = MomentState::from_sample(&[1.0, 2.0, 3.0, 6.0], 4).unwrap();
        assert!((s.central(2) - 14.0 / 4.0).abs() < 1e-12);
        assert!((s.central(3) - 18.0 / 4.0).abs() < 1e-12);
        assert!((s.central(4) - 98.0 / 4.0).abs() < 1e-12);
    }

    fn batch(values: &[f64], order: usize) -> Vec<f64> {
        (1..=order)
            .map(|k| values.iter().map(|v| v.powi(k as i32)).sum::<f64>() / values.len() as f64)
            .collect()
    }

    proptest! {
        #[test]
        fn running_update_matches_batch(
            base in prop::collection::vec(-10.0f64..10.0, 1..40),
            extra in prop::collection::vec(-10.0f64..10.0, 1..10),
        ) {
            let order = 4;
            let mut s = MomentState::from_sample(&base, order).unwrap();
            let mut all = base.clone();
            for &y in &extra {
                s.push(y).unwrap();
                all.push(y);
            }
            let expect = batch(&all, order);
            let abs: Vec<f64> = all.iter().map(|v| v.abs()).collect();
            let scales = batch(&abs, order);
            for ((got, want), scale) in s.moments().iter().zip(&expect).zip(&scales) {
                prop_assert!((got - want).abs() <= 1e-12 * scale.max(1.0),
                    "got {} want {}", got, want);
            }
            prop_assert_eq!(s.count(), all.len());
        }
    }
}
