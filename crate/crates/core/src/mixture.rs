//! The semiparametric mixture predictive
//! `p_i = lambda f_theta + (1 - lambda) P_i`, with `P_i` the empirical
//! measure of the current atoms.

use crate::error::{Error, Result};
use crate::families::ParametricFamily;
use crate::rng::{scaled_index, RngStream};

/// Absolute tolerance of [`MixturePredictive::quantile`].
pub const QUANTILE_TOLERANCE: f64 = 1e-9;

/// Bracket half-width around the atom range, in units of the family scale.
const BRACKET_SCALES: f64 = 10.0;

/// A frozen snapshot of the mixture predictive.
#[derive(Debug, Clone)]
pub struct MixturePredictive<'a, F: ParametricFamily> {
    family: &'a F,
    params: F::Params,
    atoms: &'a [f64],
    lambda: f64,
}

impl<'a, F: ParametricFamily> MixturePredictive<'a, F> {
    pub fn new(family: &'a F, params: F::Params, atoms: &'a [f64], lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::rejected(format!("mixture weight {lambda} outside [0, 1]")));
        }
        if atoms.is_empty() && lambda < 1.0 {
            return Err(Error::rejected("empirical component needs at least one atom"));
        }
        Ok(Self {
            family,
            params,
            atoms,
            lambda,
        })
    }

    pub fn family(&self) -> &F {
        self.family
    }

    pub fn params(&self) -> &F::Params {
        &self.params
    }

    pub fn atoms(&self) -> &[f64] {
        self.atoms
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// One draw. A single uniform picks the branch (parametric iff `u < lambda`)
    /// and, on the empirical branch, is rescaled to pick the atom.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        draw(self.family, &self.params, self.lambda, self.atoms, rng)
    }

    /// `lambda F_theta(y) + (1 - lambda) #{atoms <= y} / i`.
    pub fn cdf(&self, y: f64) -> f64 {
        let emp = if self.lambda < 1.0 {
            self.atoms.iter().filter(|&&a| a <= y).count() as f64 / self.atoms.len() as f64
        } else {
            0.0
        };
        self.combine(y, emp)
    }

    /// Generalized inverse `inf { y : cdf(y) >= q }` for `q` in `(0, 1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        Ok(self.quantiles(&[q])?[0])
    }

    /// Several quantiles sharing one sort of the atoms.
    pub fn quantiles(&self, qs: &[f64]) -> Result<Vec<f64>> {
        if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::rejected(format!("quantile level {q} outside (0, 1)")));
        }
        let mut sorted = self.atoms.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(qs.iter().map(|&q| self.quantile_sorted(&sorted, q)).collect())
    }

    fn combine(&self, y: f64, emp: f64) -> f64 {
        let par = if self.lambda > 0.0 {
            self.family.cdf(&self.params, y)
        } else {
            0.0
        };
        self.lambda * par + (1.0 - self.lambda) * emp
    }

    fn cdf_sorted(&self, sorted: &[f64], y: f64) -> f64 {
        let emp = if sorted.is_empty() {
            0.0
        } else {
            sorted.partition_point(|&a| a <= y) as f64 / sorted.len() as f64
        };
        self.combine(y, emp)
    }

    fn left_limit_sorted(&self, sorted: &[f64], y: f64) -> f64 {
        let emp = sorted.partition_point(|&a| a < y) as f64 / sorted.len() as f64;
        self.combine(y, emp)
    }

    fn quantile_sorted(&self, sorted: &[f64], q: f64) -> f64 {
        let spread = BRACKET_SCALES * self.family.scale(&self.params);
        let center = self.family.mean(&self.params);
        let (lo_ref, hi_ref) = match (sorted.first(), sorted.last()) {
            (Some(&a), Some(&b)) => (a.min(center), b.max(center)),
            _ => (center, center),
        };

        if self.lambda >= 1.0 || sorted.is_empty() {
            let lo = self.expand_down(sorted, lo_ref - spread, spread, q);
            let hi = self.expand_up(sorted, hi_ref + spread, spread, q);
            return self.bisect(sorted, lo, hi, q);
        }

        // first atom at which the CDF reaches q
        let k = sorted.partition_point(|&a| self.cdf_sorted(sorted, a) < q);
        if k < sorted.len() {
            let atom = sorted[k];
            if self.left_limit_sorted(sorted, atom) < q {
                return atom;
            }
            // the continuous part crosses q strictly between the previous atom and this one
            let lo = if k > 0 {
                sorted[k - 1]
            } else {
                self.expand_down(sorted, lo_ref - spread, spread, q)
            };
            self.bisect(sorted, lo, atom, q)
        } else {
            let lo = sorted[sorted.len() - 1];
            let hi = self.expand_up(sorted, hi_ref + spread, spread, q);
            self.bisect(sorted, lo, hi, q)
        }
    }

    fn expand_down(&self, sorted: &[f64], mut lo: f64, spread: f64, q: f64) -> f64 {
        let mut step = spread.max(1e-300);
        while self.cdf_sorted(sorted, lo) >= q && lo.is_finite() {
            lo -= step;
            step *= 2.0;
        }
        lo
    }

    fn expand_up(&self, sorted: &[f64], mut hi: f64, spread: f64, q: f64) -> f64 {
        let mut step = spread.max(1e-300);
        while self.cdf_sorted(sorted, hi) < q && hi.is_finite() {
            hi += step;
            step *= 2.0;
        }
        hi
    }

    // invariant: cdf(lo) < q <= cdf(hi)
    fn bisect(&self, sorted: &[f64], mut lo: f64, mut hi: f64, q: f64) -> f64 {
        while hi - lo > QUANTILE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf_sorted(sorted, mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Mixture draw on borrowed state, shared by the snapshot type and the
/// resampling loops so both consume the stream identically.
#[inline]
pub(crate) fn draw<F: ParametricFamily>(
    family: &F,
    params: &F::Params,
    lambda: f64,
    atoms: &[f64],
    rng: &mut RngStream,
) -> f64 {
    let u = rng.uniform();
    if u < lambda {
        family.sample(params, rng)
    } else {
        // (u - lambda) / (1 - lambda) is uniform on [0, 1) given this branch
        atoms[scaled_index((u - lambda) / (1.0 - lambda), atoms.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Normal, NormalParams};
    use proptest::prelude::*;

    fn std() -> NormalParams {
        NormalParams::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn degenerate_empirical_draw() {
        let atoms = [3.0];
        let m = MixturePredictive::new(&Normal, std(), &atoms, 0.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(m.sample(&mut rng), 3.0);
        }
    }

    #[test]
    fn pure_parametric_branch_is_standard_normal() {
        let atoms = [100.0];
        let m = MixturePredictive::new(&Normal, std(), &atoms, 1.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        assert!(xs.iter().all(|&x| x != 100.0));
    }

    #[test]
    fn branch_frequency() {
        // P(draw > 5) = 0.5 * P(Z > 5) + 0.5 * 1/2
        let atoms = [0.0, 10.0];
        let m = MixturePredictive::new(&Normal, std(), &atoms, 0.5).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| m.sample(&mut rng) > 5.0).count() as f64 / n as f64;
        let p = 0.25 + 0.5 * (1.0 - crate::families::Normal.cdf(&std(), 5.0));
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits - p).abs() < 3.0 * se, "{hits} vs {p}");
    }

    #[test]
    fn cdf_examples() {
        let atoms = [1.0, 2.0, 3.0];
        let m = MixturePredictive::new(&Normal, std(), &atoms, 0.0).unwrap();
        assert!((m.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        let p = MixturePredictive::new(&Normal, std(), &atoms, 1.0).unwrap();
        assert_eq!(p.cdf(0.0), 0.5);
        let zero = [0.0];
        let h = MixturePredictive::new(&Normal, std(), &zero, 0.5).unwrap();
        assert_eq!(h.cdf(0.0), 0.75);
    }

    #[test]
    fn quantile_examples() {
        let atoms = [1.0, 2.0, 3.0];
        let m = MixturePredictive::new(&Normal, std(), &atoms, 0.0).unwrap();
        assert_eq!(m.quantile(0.5).unwrap(), 2.0);
        let p = MixturePredictive::new(&Normal, std(), &atoms, 1.0).unwrap();
        // reference value from an independent high-precision evaluation
        assert!((p.quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 2e-9);
        let zero = [0.0];
        let h = MixturePredictive::new(&Normal, std(), &zero, 0.5).unwrap();
        assert_eq!(h.quantile(0.75).unwrap(), 0.0);
    }

    #[test]
    fn quantile_beyond_atoms() {
        // with lambda = 0.5 and a single atom at 0, q = 0.9 lies in the parametric tail
        let zero = [0.0];
        let h = MixturePredictive::new(&Normal, std(), &zero, 0.5).unwrap();
        let y = h.quantile(0.9).unwrap();
        // 0.5 Phi(y) + 0.5 = 0.9  =>  Phi(y) = 0.8
        assert!((y - 0.841_621_233_572_914_2).abs() < 2e-9, "{y}");
    }

    #[test]
    fn rejects_bad_levels_and_weights() {
        let atoms = [1.0];
        assert!(MixturePredictive::new(&Normal, std(), &atoms, 1.5).is_err());
        assert!(MixturePredictive::new(&Normal, std(), &[], 0.5).is_err());
        let m = MixturePredictive::new(&Normal, std(), &atoms, 0.5).unwrap();
        assert!(m.quantile(0.0).is_err());
        assert!(m.quantile(1.0).is_err());
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_quantile_consistent(
            atoms in prop::collection::vec(-20.0f64..20.0, 1..30),
            mean in -5.0f64..5.0,
            var in 0.1f64..30.0,
            lambda in 0.0f64..=1.0,
            q in 0.001f64..0.999,
        ) {
            let params = NormalParams::new(mean, var).unwrap();
            let m = MixturePredictive::new(&Normal, params, &atoms, lambda).unwrap();
            let mut prev = 0.0;
            for j in 0..1000 {
                let y = -60.0 + 120.0 * j as f64 / 999.0;
                let c = m.cdf(y);
                prop_assert!(c >= prev - 1e-15);
                prop_assert!((0.0..=1.0).contains(&c));
                prev = c;
            }
            let y = m.quantile(q).unwrap();
            prop_assert!(m.cdf(y) >= q);
            prop_assert!(m.cdf(y - 1e-6) <= q + lambda * 1e-3);
        }
    }
}
