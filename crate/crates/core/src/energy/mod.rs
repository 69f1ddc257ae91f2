//! Energy score and distance for the mixture predictive, and selection of
//! the concentration `c` through the closed-form optimal weight.

mod selection;

use nalgebra::{DMatrix, DVector};

pub use selection::{
    assign_folds, default_curve_grid, score_curve, select_c, SelectionResult, SplitScheme,
    CURVE_POINTS,
};

use crate::error::{Error, Result};
use crate::families::ParametricFamily;
use crate::mixture::MixturePredictive;
use crate::moments::MomentState;

/// Denominators at or below this are treated as degenerate.
pub const CURVATURE_TOLERANCE: f64 = 1e-14;

/// The five averages from which the energy distance between a validation
/// sample and the mixture fitted to a training sample is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiStats {
    /// Mean `|y - x|` over validation `y` and training `x`.
    pub psi_av: f64,
    /// Mean `|x - x'|` over training pairs, self-pairs included.
    pub psi_an: f64,
    /// Mean over validation of `E|y - X|`, `X ~ f_theta`.
    pub psi_bv: f64,
    /// Mean over training of `E|x - X|`, `X ~ f_theta`.
    pub psi_bn: f64,
    /// `E|X - X'|` under `f_theta`.
    pub psi_cn: f64,
}

impl PsiStats {
    /// `2 psi_bn - psi_an - psi_cn`, the energy distance between `f_theta` and
    /// the training empirical measure and the coefficient of `lambda^2`.
    pub fn curvature(&self) -> f64 {
        2.0 * self.psi_bn - self.psi_an - self.psi_cn
    }

    /// `psi_av - psi_an - psi_bv + psi_bn`.
    pub fn slope(&self) -> f64 {
        self.psi_av - self.psi_an - self.psi_bv + self.psi_bn
    }

    /// Mean energy score of the validation sample under weight `lambda`.
    pub fn mean_score(&self, lambda: f64) -> f64 {
        let l = lambda;
        let cross = l * self.psi_bv + (1.0 - l) * self.psi_av;
        let within = l * l * self.psi_cn
            + 2.0 * l * (1.0 - l) * self.psi_bn
            + (1.0 - l) * (1.0 - l) * self.psi_an;
        within - 2.0 * cross
    }

    /// Component-wise average across splits.
    pub fn average(stats: &[PsiStats]) -> Result<PsiStats> {
        if stats.is_empty() {
            return Err(Error::rejected("cannot average an empty set of splits"));
        }
        let k = stats.len() as f64;
        let sum = |f: fn(&PsiStats) -> f64| stats.iter().map(f).sum::<f64>() / k;
        Ok(PsiStats {
            psi_av: sum(|s| s.psi_av),
            psi_an: sum(|s| s.psi_an),
            psi_bv: sum(|s| s.psi_bv),
            psi_bn: sum(|s| s.psi_bn),
            psi_cn: sum(|s| s.psi_cn),
        })
    }
}

/// `n^-2 sum_{i,j} |x_i - x_j|` in `O(n log n)`.
pub fn pairwise_mean_abs(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    // each sorted x_(k) appears k times as the larger and n - 1 - k times as the smaller
    let total: f64 = s
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 - (n as f64 - 1.0)))
        .sum();
    2.0 * total / (n * n) as f64
}

/// `(|a| |b|)^-1 sum_{i,j} |a_i - b_j|` in `O((|a| + |b|) log |b|)`.
pub fn cross_mean_abs(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut s = b.to_vec();
    s.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(s.len() + 1);
    prefix.push(0.0);
    for x in &s {
        prefix.push(prefix[prefix.len() - 1] + x);
    }
    let m = s.len();
    let total_b = prefix[m];
    let sum: f64 = a
        .iter()
        .map(|&y| {
            let k = s.partition_point(|&x| x < y);
            let below = y * k as f64 - prefix[k];
            let above = (total_b - prefix[k]) - y * (m - k) as f64;
            below + above
        })
        .sum();
    sum / (a.len() * m) as f64
}

/// The five statistics for a fitted `theta`.
pub fn compute_psi<F: ParametricFamily>(
    train: &[f64],
    validation: &[f64],
    theta: &F::Params,
    family: &F,
) -> Result<PsiStats> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::rejected("training and validation samples must be non-empty"));
    }
    let mean_abs = |xs: &[f64]| {
        xs.iter().map(|&x| family.abs_moment_integral(theta, x)).sum::<f64>() / xs.len() as f64
    };
    Ok(PsiStats {
        psi_av: cross_mean_abs(validation, train),
        psi_an: pairwise_mean_abs(train),
        psi_bv: mean_abs(validation),
        psi_bn: mean_abs(train),
        psi_cn: family.pair_abs_moment(theta),
    })
}

/// Fits `theta` to `train` by the method of moments, then [`compute_psi`].
pub fn fit_psi<F: ParametricFamily>(train: &[f64], validation: &[f64], family: &F) -> Result<PsiStats> {
    let m = MomentState::from_sample(train, family.order())?;
    let theta = family.fit_moments(m.moments())?;
    compute_psi(train, validation, &theta, family)
}

/// Minimizer of the (quadratic) energy distance over `lambda` in `[0, 1]`.
pub fn closed_form_lambda(psi: &PsiStats) -> Result<f64> {
    let denom = psi.curvature();
    if !(denom > CURVATURE_TOLERANCE) {
        return Err(Error::NumericalDegeneracy(format!(
            "energy-distance curvature {denom:e} is not positive"
        )));
    }
    Ok((psi.slope() / denom).clamp(0.0, 1.0))
}

/// `s(y, P) = -2 E|y - X| + E|X - X'|` for the mixture, in closed form.
pub fn energy_score_sample<F: ParametricFamily>(y: f64, pred: &MixturePredictive<'_, F>) -> f64 {
    let l = pred.lambda();
    let family = pred.family();
    let theta = pred.params();
    let atoms = pred.atoms();
    let mut to_y = 0.0;
    let mut pair = 0.0;
    if l > 0.0 {
        to_y += l * family.abs_moment_integral(theta, y);
        pair += l * l * family.pair_abs_moment(theta);
    }
    if l < 1.0 {
        to_y += (1.0 - l) * cross_mean_abs(&[y], atoms);
        pair += (1.0 - l) * (1.0 - l) * pairwise_mean_abs(atoms);
        if l > 0.0 {
            let mixed = atoms
                .iter()
                .map(|&a| family.abs_moment_integral(theta, a))
                .sum::<f64>()
                / atoms.len() as f64;
            pair += 2.0 * l * (1.0 - l) * mixed;
        }
    }
    -2.0 * to_y + pair
}

/// Energy distance between the validation empirical measure and the mixture
/// on `train` with weight `lambda`, evaluated directly from the mixture.
pub fn sample_energy_distance<F: ParametricFamily>(
    train: &[f64],
    validation: &[f64],
    theta: &F::Params,
    family: &F,
    lambda: f64,
) -> Result<f64> {
    let pred = MixturePredictive::new(family, theta.clone(), train, lambda)?;
    let score = validation.iter().map(|&y| energy_score_sample(y, &pred)).sum::<f64>()
        / validation.len() as f64;
    Ok(-score - pairwise_mean_abs(validation))
}

/// Least-squares quadratic through sample energy distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCheck {
    /// Coefficients of `lambda^2`, `lambda` and `1`.
    pub coefficients: [f64; 3],
    /// Largest absolute error at the held-out weights.
    pub max_residual: f64,
}

impl QuadraticCheck {
    pub fn leading(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let [a, b, c] = self.coefficients;
        (a * lambda + b) * lambda + c
    }
}

/// Fits a quadratic in `lambda` to the sample energy distance at `fit`
/// (at least four distinct weights) and reports its error at `check`.
pub fn quadratic_check<F: ParametricFamily>(
    train: &[f64],
    validation: &[f64],
    theta: &F::Params,
    family: &F,
    fit: &[f64],
    check: &[f64],
) -> Result<QuadraticCheck> {
    let mut distinct = fit.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::rejected("quadratic check needs at least four distinct weights"));
    }
    let d = |l: f64| sample_energy_distance(train, validation, theta, family, l);
    let design = DMatrix::from_fn(fit.len(), 3, |r, c| fit[r].powi(2 - c as i32));
    let rhs = DVector::from_iterator(fit.len(), fit.iter().map(|&l| d(l)).collect::<Result<Vec<_>>>()?);
    let solution = design
        .svd(true, true)
        .solve(&rhs, 1e-15)
        .map_err(|e| Error::NumericalDegeneracy(e.to_string()))?;
    let q = QuadraticCheck {
        coefficients: [solution[0], solution[1], solution[2]],
        max_residual: 0.0,
    };
    let mut max_residual: f64 = 0.0;
    for &l in check {
        max_residual = max_residual.max((d(l)? - q.eval(l)).abs());
    }
    Ok(QuadraticCheck { max_residual, ..q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Normal, NormalParams};
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn std() -> NormalParams {
        NormalParams::new(0.0, 1.0).unwrap()
    }

    fn brute_pairwise(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += (x - y).abs();
            }
        }
        s / (a.len() * b.len()) as f64
    }

    #[test]
    fn point_mass_scores_zero() {
        let atoms = [1.5];
        let pred = MixturePredictive::new(&Normal, std(), &atoms, 0.0).unwrap();
        assert_eq!(energy_score_sample(1.5, &pred), 0.0);
    }

    #[test]
    fn two_atom_score() {
        let atoms = [0.0, 2.0];
        let pred = MixturePredictive::new(&Normal, std(), &atoms, 0.0).unwrap();
        assert_eq!(energy_score_sample(1.0, &pred), -1.0);
    }

    #[test]
    fn mixture_score_monte_carlo() {
        let atoms = [0.0];
        let pred = MixturePredictive::new(&Normal, std(), &atoms, 0.5).unwrap();
        let exact = energy_score_sample(1.0, &pred);
        let mut rng = RngStream::new(41, 0);
        let n = 10_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = pred.sample(&mut rng);
            let x2 = pred.sample(&mut rng);
            let v = -2.0 * (1.0 - x).abs() + (x - x2).abs();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((exact - mean).abs() < 3.0 * se, "{exact} vs {mean} (se {se})");
    }

    #[test]
    fn psi_hand_example() {
        let psi = compute_psi(&[-1.0, 1.0], &[0.0], &std(), &Normal).unwrap();
        assert_eq!(psi.psi_av, 1.0);
        assert_eq!(psi.psi_an, 1.0);
        assert!((psi.psi_bv - (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn psi_degenerate_training() {
        assert!(matches!(
            fit_psi(&[0.0], &[0.0], &Normal),
            Err(Error::DegenerateMoments { .. })
        ));
    }

    #[test]
    fn clipping_at_bounds() {
        let low = PsiStats {
            psi_av: 1.0,
            psi_an: 1.2,
            psi_bv: 1.1,
            psi_bn: 1.0,
            psi_cn: 0.7,
        };
        assert_eq!(closed_form_lambda(&low).unwrap(), 0.0);
        let high = PsiStats {
            psi_av: 2.0,
            psi_an: 1.0,
            psi_bv: 1.0,
            psi_bn: 1.5,
            psi_cn: 0.5,
        };
        assert_eq!(high.slope(), 1.5);
        assert_eq!(high.curvature(), 1.5);
        assert_eq!(closed_form_lambda(&high).unwrap(), 1.0);
    }

    #[test]
    fn flat_curvature_is_an_error() {
        let flat = PsiStats {
            psi_av: 1.0,
            psi_an: 1.0,
            psi_bv: 1.0,
            psi_bn: 1.0,
            psi_cn: 1.0,
        };
        assert!(matches!(closed_form_lambda(&flat), Err(Error::NumericalDegeneracy(_))));
    }

    #[test]
    fn expected_score_is_proper() {
        // Q = N(0, 1); S(Q, N(m, v)) = -2 E|Y - X| + E|X - X'| with Y - X ~ N(-m, 1 + v)
        let score = |m: f64, v: f64| {
            let diff = NormalParams::new(-m, 1.0 + v).unwrap();
            let p = NormalParams::new(m, v).unwrap();
            -2.0 * Normal.abs_moment_integral(&diff, 0.0) + Normal.pair_abs_moment(&p)
        };
        let best = score(0.0, 1.0);
        let mut rng = RngStream::new(6, 0);
        for _ in 0..100 {
            let m = 4.0 * rng.uniform() - 2.0;
            let v = 0.05 + 4.0 * rng.uniform();
            assert!(best >= score(m, v));
        }
    }

    proptest! {
        #[test]
        fn sorted_sums_match_brute_force(
            a in prop::collection::vec(-50.0f64..50.0, 1..40),
            b in prop::collection::vec(-50.0f64..50.0, 1..40),
        ) {
            prop_assert!((pairwise_mean_abs(&a) - brute_pairwise(&a, &a)).abs() < 1e-10);
            prop_assert!((cross_mean_abs(&a, &b) - brute_pairwise(&a, &b)).abs() < 1e-10);
        }

        #[test]
        fn distance_is_the_psi_quadratic(
            train in prop::collection::vec(-10.0f64..10.0, 3..30),
            validation in prop::collection::vec(-10.0f64..10.0, 1..30),
            lambda in 0.0f64..=1.0,
        ) {
            let m = MomentState::from_sample(&train, 2).unwrap();
            let theta = Normal.fit_moments(m.moments());
            prop_assume!(theta.is_ok());
            let theta = theta.unwrap();
            let psi = compute_psi(&train, &validation, &theta, &Normal).unwrap();
            let direct = sample_energy_distance(&train, &validation, &theta, &Normal, lambda).unwrap();
            let from_psi = -psi.mean_score(lambda) - pairwise_mean_abs(&validation);
            prop_assert!((direct - from_psi).abs() < 1e-10);
            prop_assert!(psi.curvature() > 0.0);
        }
    }
}
