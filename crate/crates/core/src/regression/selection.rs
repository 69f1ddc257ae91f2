use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::mle::{fit_glm, GlmFit};
use super::{RegressionDataset, Standardizer};
use crate::concentration::Concentration;
use crate::energy::{assign_folds, SplitScheme};
use crate::error::{Error, Result};
use crate::families::GlmFamily;
use crate::rng::{scaled_index, RngStream};

/// Draws per Monte Carlo score evaluation.
pub const DEFAULT_MC_DRAWS: usize = 2000;

/// Log-spaced points between `c = 10` and `c = 10^5` in the default grid.
const GRID_POINTS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMethod {
    /// Enumerates atoms and both response values; binary responses only.
    Exact,
    /// `draws` samples from the joint predictive, shared across `c`.
    MonteCarlo { draws: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEstimate {
    pub value: f64,
    /// Monte Carlo standard error, zero for exact evaluation.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSelection {
    pub c_hat: Concentration,
    pub folds: usize,
    /// Fold-averaged score minus its value at `c = 0`, in grid order.
    pub curve: Vec<(Concentration, ScoreEstimate)>,
}

impl RegressionSelection {
    pub fn curve_argmax(&self) -> Option<Concentration> {
        let mut best: Option<(Concentration, f64)> = None;
        for &(c, s) in &self.curve {
            if best.is_none_or(|(_, b)| s.value > b) {
                best = Some((c, s.value));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Hold-out scores relative to the Bayesian bootstrap (`c = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutScores {
    pub c_hat: Concentration,
    pub mixture: ScoreEstimate,
    pub parametric: ScoreEstimate,
}

/// `{0}`, log-spaced `10^1 .. 10^5`, `+inf`.
pub fn default_regression_grid() -> Vec<Concentration> {
    let mut grid = vec![Concentration::ZERO];
    for k in 0..GRID_POINTS {
        let e = 1.0 + 4.0 * k as f64 / (GRID_POINTS - 1) as f64;
        grid.push(Concentration::new(10f64.powf(e)).expect("positive grid value"));
    }
    grid.push(Concentration::INFINITE);
    grid
}

/// Joint predictive `P_n(x, y)` of a training set and the squared scaled
/// covariate distances it needs.
struct JointPredictive {
    family: GlmFamily,
    /// Training atom of every training observation.
    of_obs: Vec<usize>,
    weights: Vec<f64>,
    model_means: Vec<f64>,
    empirical_means: Vec<f64>,
    responses: Vec<Vec<f64>>,
    n: usize,
    /// `||x_a - x_b||^2 / (4q)` between training atoms.
    atom_d2: DMatrix<f64>,
    /// The same between validation rows and training atoms.
    cross_d2: DMatrix<f64>,
    validation_y: Vec<f64>,
}

impl JointPredictive {
    fn new(train: &RegressionDataset, fit: &GlmFit, validation: &RegressionDataset) -> Result<Self> {
        if train.dim() != validation.dim() {
            return Err(Error::rejected("training and validation designs differ in width"));
        }
        let table = train.atoms();
        let k = table.len();
        let n = train.len();
        let mut counts = vec![0.0; k];
        let mut sums = vec![0.0; k];
        let mut responses = vec![Vec::new(); k];
        for (i, &a) in table.of_obs.iter().enumerate() {
            counts[a] += 1.0;
            sums[a] += train.y()[i];
            responses[a].push(train.y()[i]);
        }
        let scale = 1.0 / (4.0 * (train.dim() - 1).max(1) as f64);
        let d2 = |u: &DVector<f64>, v: &DVector<f64>| (u - v).norm_squared() * scale;
        let atom_d2 = DMatrix::from_fn(k, k, |a, b| d2(&table.atoms[a], &table.atoms[b]));
        let cross_d2 = DMatrix::from_fn(validation.len(), k, |j, a| d2(&validation.row(j), &table.atoms[a]));
        Ok(Self {
            family: fit.family,
            model_means: table.atoms.iter().map(|x| fit.family.inverse_link(x.dot(&fit.beta))).collect(),
            empirical_means: sums.iter().zip(&counts).map(|(s, c)| s / c).collect(),
            weights: counts.iter().map(|c| c / n as f64).collect(),
            of_obs: table.of_obs,
            responses,
            n,
            atom_d2,
            cross_d2,
            validation_y: validation.y().to_vec(),
        })
    }

    fn lambda(&self, c: Concentration) -> f64 {
        c.weight(self.n)
    }

    /// `P(Y = 1 | atom)` for binary responses.
    fn success(&self, lambda: f64) -> Vec<f64> {
        self.model_means
            .iter()
            .zip(&self.empirical_means)
            .map(|(m, e)| lambda * m + (1.0 - lambda) * e)
            .collect()
    }

    fn exact(&self, lambda: f64) -> Result<f64> {
        if !self.family.is_binary() {
            return Err(Error::rejected("exact joint energy score needs a binary response"));
        }
        let pi = self.success(lambda);
        let k = pi.len();
        let v = self.validation_y.len();
        let mut cross = 0.0;
        for j in 0..v {
            let y = self.validation_y[j];
            for a in 0..k {
                let d = self.cross_d2[(j, a)];
                let same = if y == 1.0 { pi[a] } else { 1.0 - pi[a] };
                cross += self.weights[a] * (same * d.sqrt() + (1.0 - same) * (d + 1.0).sqrt());
            }
        }
        cross /= v as f64;
        let mut spread = 0.0;
        for a in 0..k {
            let mut row = 0.0;
            for b in 0..k {
                let d = self.atom_d2[(a, b)];
                let differ = pi[a] * (1.0 - pi[b]) + (1.0 - pi[a]) * pi[b];
                row += self.weights[b] * ((1.0 - differ) * d.sqrt() + differ * (d + 1.0).sqrt());
            }
            spread += self.weights[a] * row;
        }
        Ok(-2.0 * cross + spread)
    }

    /// Monte Carlo score, with the pair term as a U-statistic, and its
    /// per-draw influence values `-2 g_m + 2 h_m` for the standard error.
    fn monte_carlo(&self, lambda: f64, draws: usize, rng: &RngStream) -> (f64, Vec<f64>) {
        let mut rng = rng.clone();
        let mut atom = Vec::with_capacity(draws);
        let mut y = Vec::with_capacity(draws);
        for _ in 0..draws {
            let a = self.of_obs[rng.index(self.n)];
            let u = rng.uniform();
            let z: f64 = StandardNormal.sample(&mut rng);
            let e = rng.uniform();
            let mu = self.model_means[a];
            let value = match self.family {
                GlmFamily::Logistic => {
                    let p = lambda * mu + (1.0 - lambda) * self.empirical_means[a];
                    if u < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                GlmFamily::Gaussian { variance } => {
                    if u < lambda {
                        mu + variance.sqrt() * z
                    } else {
                        let past = &self.responses[a];
                        past[scaled_index(e, past.len())]
                    }
                }
            };
            atom.push(a);
            y.push(value);
        }
        let v = self.validation_y.len();
        let mut pair_means = vec![0.0; draws];
        for m in 0..draws {
            for l in (m + 1)..draws {
                let kern = (self.atom_d2[(atom[m], atom[l])] + (y[m] - y[l]).powi(2)).sqrt();
                pair_means[m] += kern;
                pair_means[l] += kern;
            }
        }
        let mut value = 0.0;
        let influence = (0..draws)
            .map(|m| {
                let cross = (0..v)
                    .map(|j| (self.cross_d2[(j, atom[m])] + (self.validation_y[j] - y[m]).powi(2)).sqrt())
                    .sum::<f64>()
                    / v as f64;
                let pair = pair_means[m] / (draws - 1) as f64;
                value += (-2.0 * cross + pair) / draws as f64;
                -2.0 * cross + 2.0 * pair
            })
            .collect();
        (value, influence)
    }

    /// Score at each `c` minus the score at `c = 0`.
    fn relative_curve(
        &self,
        grid: &[Concentration],
        method: ScoreMethod,
        rng: &RngStream,
    ) -> Result<Vec<ScoreEstimate>> {
        match method {
            ScoreMethod::Exact => {
                let base = self.exact(0.0)?;
                grid.iter()
                    .map(|&c| {
                        Ok(ScoreEstimate {
                            value: if c == Concentration::ZERO { 0.0 } else { self.exact(self.lambda(c))? - base },
                            se: 0.0,
                        })
                    })
                    .collect()
            }
            ScoreMethod::MonteCarlo { draws } => {
                if draws < 2 {
                    return Err(Error::rejected("Monte Carlo scoring needs at least two draws"));
                }
                let (base, base_psi) = self.monte_carlo(0.0, draws, rng);
                Ok(grid
                    .iter()
                    .map(|&c| {
                        if c == Concentration::ZERO {
                            return ScoreEstimate { value: 0.0, se: 0.0 };
                        }
                        let (value, psi) = self.monte_carlo(self.lambda(c), draws, rng);
                        let diff: Vec<f64> = psi.iter().zip(&base_psi).map(|(a, b)| a - b).collect();
                        ScoreEstimate {
                            value: value - base,
                            se: standard_error(&diff),
                        }
                    })
                    .collect())
            }
        }
    }
}

fn standard_error(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (var / m).sqrt()
}

/// Mean joint energy score of the predictive fitted to `train`, at `c`, on
/// `validation`, with covariate distances scaled by `1 / (4q)` for `q`
/// non-intercept covariates.
pub fn joint_energy_score(
    train: &RegressionDataset,
    fit: &GlmFit,
    validation: &RegressionDataset,
    concentration: Concentration,
    method: ScoreMethod,
    rng: &RngStream,
) -> Result<ScoreEstimate> {
    let pred = JointPredictive::new(train, fit, validation)?;
    let lambda = pred.lambda(concentration);
    match method {
        ScoreMethod::Exact => Ok(ScoreEstimate {
            value: pred.exact(lambda)?,
            se: 0.0,
        }),
        ScoreMethod::MonteCarlo { draws } => {
            if draws < 2 {
                return Err(Error::rejected("Monte Carlo scoring needs at least two draws"));
            }
            let (value, psi) = pred.monte_carlo(lambda, draws, rng);
            Ok(ScoreEstimate {
                value,
                se: standard_error(&psi),
            })
        }
    }
}

/// Chooses `c` on a grid by `folds`-fold cross-validated joint energy score.
/// Covariates are expected to be standardized already.
pub fn select_c_regression(
    data: &RegressionDataset,
    folds: usize,
    grid: &[Concentration],
    method: ScoreMethod,
    rng: &RngStream,
) -> Result<RegressionSelection> {
    if grid.is_empty() {
        return Err(Error::rejected("concentration grid is empty"));
    }
    let split = assign_folds(data.len(), SplitScheme::KFold(folds), &mut rng.child(u64::MAX))?;
    let per_fold: Vec<Result<Vec<ScoreEstimate>>> = split
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let wrap = |e: Error| Error::FoldDegenerate {
                fold: k,
                source: Box::new(e),
            };
            let train_idx: Vec<usize> = (0..data.len()).filter(|i| fold.binary_search(i).is_err()).collect();
            let train = data.subset(&train_idx).map_err(wrap)?;
            let validation = data.subset(fold).map_err(wrap)?;
            let fit = fit_glm(&train).map_err(wrap)?;
            JointPredictive::new(&train, &fit, &validation)
                .and_then(|p| p.relative_curve(grid, method, &rng.child(k as u64)))
                .map_err(wrap)
        })
        .collect();
    let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;
    let j = per_fold.len() as f64;
    let curve: Vec<(Concentration, ScoreEstimate)> = grid
        .iter()
        .enumerate()
        .map(|(g, &c)| {
            let value = per_fold.iter().map(|f| f[g].value).sum::<f64>() / j;
            let se = per_fold.iter().map(|f| f[g].se.powi(2)).sum::<f64>().sqrt() / j;
            (c, ScoreEstimate { value, se })
        })
        .collect();
    let mut result = RegressionSelection {
        c_hat: Concentration::ZERO,
        folds: per_fold.len(),
        curve,
    };
    result.c_hat = result.curve_argmax().expect("non-empty grid");
    Ok(result)
}

/// Standardizes on `train`, takes `fixed` or selects `c` by cross-validation
/// on `train`, and scores that mixture and the parametric predictive on `test`.
pub fn holdout_relative_scores(
    train: &RegressionDataset,
    test: &RegressionDataset,
    fixed: Option<Concentration>,
    folds: usize,
    grid: &[Concentration],
    method: ScoreMethod,
    rng: &RngStream,
) -> Result<HoldoutScores> {
    if train.kind() != test.kind() {
        return Err(Error::rejected("training and test responses differ in kind"));
    }
    let standardizer = Standardizer::fit(train)?;
    let train = standardizer.apply(train)?;
    let test = standardizer.apply(test)?;
    let c_hat = match fixed {
        Some(c) => c,
        None => select_c_regression(&train, folds, grid, method, &rng.child(0))?.c_hat,
    };
    let fit = fit_glm(&train)?;
    let pred = JointPredictive::new(&train, &fit, &test)?;
    let scores = pred.relative_curve(&[c_hat, Concentration::INFINITE], method, &rng.child(1))?;
    Ok(HoldoutScores {
        c_hat,
        mixture: scores[0],
        parametric: scores[1],
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::inverse_logit;
    use crate::regression::ResponseKind;

    fn synthetic(n: usize, seed: u64) -> RegressionDataset {
        let mut rng = RngStream::new(seed, 0);
        let mut features = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let f: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eta = 0.3 + f[0] - 0.5 * f[1] + 0.25 * f[2];
            y.push(if rng.uniform() < inverse_logit(eta) { 1.0 } else { 0.0 });
            features.push(f);
        }
        let d = RegressionDataset::from_features(&features, y, ResponseKind::Binary).unwrap();
        Standardizer::fit(&d).unwrap().apply(&d).unwrap()
    }

    /// Sums over training observations and response values one by one.
    fn brute_force(train: &RegressionDataset, fit: &GlmFit, val: &RegressionDataset, lambda: f64) -> f64 {
        let n = train.len();
        let q = (train.dim() - 1) as f64;
        let kern = |a: &DVector<f64>, b: &DVector<f64>, dy: f64| ((a - b).norm_squared() / (4.0 * q) + dy * dy).sqrt();
        let prob = |i: usize| {
            let x = train.row(i);
            let same: Vec<usize> = (0..n).filter(|&j| train.row(j) == x).collect();
            let emp = same.iter().map(|&j| train.y()[j]).sum::<f64>() / same.len() as f64;
            lambda * inverse_logit(x.dot(&fit.beta)) + (1.0 - lambda) * emp
        };
        let mut cross = 0.0;
        for j in 0..val.len() {
            for i in 0..n {
                let p = prob(i);
                for (yy, w) in [(1.0, p), (0.0, 1.0 - p)] {
                    cross += w * kern(&val.row(j), &train.row(i), val.y()[j] - yy) / (n * val.len()) as f64;
                }
            }
        }
        let mut spread = 0.0;
        for i in 0..n {
            for k in 0..n {
                let (pi, pk) = (prob(i), prob(k));
                for (yi, wi) in [(1.0, pi), (0.0, 1.0 - pi)] {
                    for (yk, wk) in [(1.0, pk), (0.0, 1.0 - pk)] {
                        spread += wi * wk * kern(&train.row(i), &train.row(k), yi - yk) / (n * n) as f64;
                    }
                }
            }
        }
        -2.0 * cross + spread
    }

    #[test]
    fn grid_layout() {
        let g = default_regression_grid();
        assert_eq!(g.len(), GRID_POINTS + 2);
        assert_eq!(g[0], Concentration::ZERO);
        assert!((g[1].value() - 10.0).abs() < 1e-9);
        assert!((g[GRID_POINTS].value() - 1e5).abs() < 1e-6);
        assert!(g.last().unwrap().is_infinite());
    }

    #[test]
    fn exact_score_matches_brute_force() {
        let d = synthetic(40, 1);
        let train = d.subset(&(0..30).collect::<Vec<_>>()).unwrap();
        let val = d.subset(&(30..40).collect::<Vec<_>>()).unwrap();
        let fit = fit_glm(&train).unwrap();
        for c in [0.0, 5.0, 30.0, f64::INFINITY] {
            let conc = Concentration::new(c).unwrap();
            let s = joint_energy_score(&train, &fit, &val, conc, ScoreMethod::Exact, &RngStream::new(0, 0)).unwrap();
            let oracle = brute_force(&train, &fit, &val, conc.weight(30));
            assert!((s.value - oracle).abs() < 1e-12, "{} vs {oracle}", s.value);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let d = synthetic(120, 2);
        let train = d.subset(&(0..90).collect::<Vec<_>>()).unwrap();
        let val = d.subset(&(90..120).collect::<Vec<_>>()).unwrap();
        let fit = fit_glm(&train).unwrap();
        let c = Concentration::new(100.0).unwrap();
        let exact = joint_energy_score(&train, &fit, &val, c, ScoreMethod::Exact, &RngStream::new(0, 0)).unwrap();
        let mc = |seed| {
            joint_energy_score(&train, &fit, &val, c, ScoreMethod::MonteCarlo { draws: 3000 }, &RngStream::new(seed, 0))
                .unwrap()
        };
        let (a, b) = (mc(1), mc(2));
        assert!((a.value - exact.value).abs() < 4.0 * a.se, "{a:?} vs {exact:?}");
        assert!((a.value - b.value).abs() < 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt());
    }

    #[test]
    fn selection_curve_is_relative_to_zero() {
        let d = synthetic(150, 3);
        for method in [ScoreMethod::Exact, ScoreMethod::MonteCarlo { draws: 300 }] {
            let sel = select_c_regression(&d, 5, &default_regression_grid(), method, &RngStream::new(4, 0)).unwrap();
            assert_eq!(sel.folds, 5);
            assert_eq!(sel.curve[0].1.value, 0.0);
            assert_eq!(sel.curve_argmax(), Some(sel.c_hat));
        }
    }

    #[test]
    fn forced_zero_has_zero_relative_score() {
        let d = synthetic(100, 5);
        let train = d.subset(&(0..70).collect::<Vec<_>>()).unwrap();
        let val = d.subset(&(70..100).collect::<Vec<_>>()).unwrap();
        let fit = fit_glm(&train).unwrap();
        let pred = JointPredictive::new(&train, &fit, &val).unwrap();
        let curve = pred
            .relative_curve(&[Concentration::ZERO], ScoreMethod::Exact, &RngStream::new(0, 0))
            .unwrap();
        assert_eq!(curve[0].value, 0.0);
    }

    #[test]
    fn real_response_needs_monte_carlo() {
        let mut rng = RngStream::new(6, 0);
        let features: Vec<Vec<f64>> = (0..60).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let y: Vec<f64> = features.iter().map(|f| f[0] + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let d = RegressionDataset::from_features(&features, y, ResponseKind::Real).unwrap();
        assert!(select_c_regression(&d, 3, &default_regression_grid(), ScoreMethod::Exact, &rng).is_err());
        let sel = select_c_regression(&d, 3, &default_regression_grid(), ScoreMethod::MonteCarlo { draws: 200 }, &rng);
        assert!(sel.is_ok());
    }
}
