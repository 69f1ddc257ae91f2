use nalgebra::{DMatrix, DVector};

use super::{RegressionDataset, ResponseKind};
use crate::error::{Error, Result};
use crate::families::GlmFamily;

/// Newton iterations stop once the averaged score has this norm.
pub const MLE_TOLERANCE: f64 = 1e-10;

const MAX_ITERATIONS: usize = 200;

/// A fitted probability this close to 0 or 1 signals separation.
const BOUNDARY_VARIANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub beta: DVector<f64>,
    /// For real responses this carries the residual variance.
    pub family: GlmFamily,
    pub iterations: usize,
}

/// Average Fisher information `W^-1 sum_a w_a V(mu_a) x_a x_a'`.
pub fn fisher_information(
    family: GlmFamily,
    atoms: &[DVector<f64>],
    counts: &[f64],
    beta: &DVector<f64>,
) -> DMatrix<f64> {
    let p = beta.len();
    let mut info = DMatrix::zeros(p, p);
    let mut total = 0.0;
    for (x, &w) in atoms.iter().zip(counts) {
        if w == 0.0 {
            continue;
        }
        let mu = family.inverse_link(x.dot(beta));
        info.ger(w * family.mean_derivative(mu), x, x, 1.0);
        total += w;
    }
    info / total
}

/// Solves the canonical score equation `sum_a (s_a - w_a mu_a) x_a = 0` by
/// damped Newton from `start`, on data aggregated by atom (`counts` and
/// response `sums` per atom). Returns the root and the iteration count.
pub fn newton_refit(
    family: GlmFamily,
    atoms: &[DVector<f64>],
    counts: &[f64],
    sums: &[f64],
    start: &DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    let total: f64 = counts.iter().sum();
    let p = start.len();
    let objective = |beta: &DVector<f64>| -> f64 {
        atoms
            .iter()
            .zip(counts.iter().zip(sums))
            .filter(|(_, (&w, _))| w > 0.0)
            .map(|(x, (&w, &s))| {
                let eta = x.dot(beta);
                s * eta - w * family.cumulant(eta)
            })
            .sum::<f64>()
            / total
    };
    let mut beta = start.clone();
    let mut current = objective(&beta);
    for iter in 0..MAX_ITERATIONS {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for (x, (&w, &s)) in atoms.iter().zip(counts.iter().zip(sums)) {
            if w == 0.0 {
                continue;
            }
            let mu = family.inverse_link(x.dot(&beta));
            grad.axpy((s - w * mu) / total, x, 1.0);
            hess.ger(w * family.mean_derivative(mu) / total, x, x, 1.0);
        }
        if grad.norm() < MLE_TOLERANCE {
            return Ok((beta, iter));
        }
        let step = hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularFisher(format!("Newton Hessian is not positive definite at {beta}")))?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let trial = &beta + &step * t;
            let value = objective(&trial);
            if value >= current - 1e-15 * current.abs() || t < 1e-10 {
                beta = trial;
                current = value;
                break;
            }
            t *= 0.5;
        }
        if !beta.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalDegeneracy("Newton iterate is not finite".into()));
        }
    }
    Err(Error::NumericalDegeneracy(format!(
        "Newton did not reach score norm {MLE_TOLERANCE:e} in {MAX_ITERATIONS} iterations"
    )))
}

/// Maximum-likelihood fit of the canonical-link GLM.
///
/// Binary responses use the logit link and fail with [`Error::Separation`]
/// when the MLE does not exist; real responses use least squares, with the
/// residual variance `RSS / (n - p)` stored in the returned family.
pub fn fit_glm(data: &RegressionDataset) -> Result<GlmFit> {
    let table = data.atoms();
    let mut counts = vec![0.0; table.len()];
    let mut sums = vec![0.0; table.len()];
    for (i, &a) in table.of_obs.iter().enumerate() {
        counts[a] += 1.0;
        sums[a] += data.y()[i];
    }
    let n = data.len() as f64;
    let p = data.dim();
    match data.kind() {
        ResponseKind::Binary => {
            let ones: f64 = data.y().iter().sum();
            if ones == 0.0 || ones == n {
                return Err(Error::Separation("all responses are equal".into()));
            }
            let mut start = DVector::zeros(p);
            start[0] = (ones / (n - ones)).ln();
            let family = GlmFamily::Logistic;
            let (beta, iterations) = newton_refit(family, &table.atoms, &counts, &sums, &start)
                .map_err(|e| match e {
                    Error::NumericalDegeneracy(msg) | Error::SingularFisher(msg) => {
                        Error::Separation(format!("coefficients diverge: {msg}"))
                    }
                    other => other,
                })?;
            let boundary = table.atoms.iter().any(|x| {
                let mu = family.inverse_link(x.dot(&beta));
                mu * (1.0 - mu) < BOUNDARY_VARIANCE
            });
            if boundary {
                return Err(Error::Separation(format!(
                    "fitted probabilities reach 0 or 1 (|beta| = {:.3e})",
                    beta.norm()
                )));
            }
            Ok(GlmFit {
                beta,
                family,
                iterations,
            })
        }
        ResponseKind::Real => {
            if data.len() <= p {
                return Err(Error::rejected("least squares needs more rows than columns"));
            }
            let (beta, iterations) = newton_refit(
                GlmFamily::Gaussian { variance: 1.0 },
                &table.atoms,
                &counts,
                &sums,
                &DVector::zeros(p),
            )?;
            let rss: f64 = (0..data.len())
                .map(|i| (data.y()[i] - data.row(i).dot(&beta)).powi(2))
                .sum();
            Ok(GlmFit {
                beta,
                family: GlmFamily::Gaussian {
                    variance: rss / (n - p as f64),
                },
                iterations,
            })
        }
    }
}

/// Logistic MLE coefficients.
pub fn fit_mle_logistic(data: &RegressionDataset) -> Result<DVector<f64>> {
    if data.kind() != ResponseKind::Binary {
        return Err(Error::rejected("logistic fit needs a binary response"));
    }
    Ok(fit_glm(data)?.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::inverse_logit;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn random_logistic(n: usize, q: usize, seed: u64) -> RegressionDataset {
        let mut rng = RngStream::new(seed, 0);
        let truth: Vec<f64> = (0..=q).map(|j| 0.8 - 0.4 * j as f64).collect();
        let mut features = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let f: Vec<f64> = (0..q).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eta = truth[0] + f.iter().zip(&truth[1..]).map(|(a, b)| a * b).sum::<f64>();
            y.push(if rng.uniform() < inverse_logit(eta) { 1.0 } else { 0.0 });
            features.push(f);
        }
        RegressionDataset::from_features(&features, y, ResponseKind::Binary).unwrap()
    }

    fn deviance(data: &RegressionDataset, beta: &DVector<f64>) -> f64 {
        (0..data.len())
            .map(|i| {
                let eta = data.row(i).dot(beta);
                -2.0 * (data.y()[i] * eta - GlmFamily::Logistic.cumulant(eta))
            })
            .sum()
    }

    #[test]
    fn intercept_only() {
        let x = DMatrix::from_element(8, 1, 1.0);
        let y = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let d = RegressionDataset::new(x, y, ResponseKind::Binary).unwrap();
        let beta = fit_mle_logistic(&d).unwrap();
        assert!((beta[0] - (-1.098_612_288_668_109_8)).abs() < 1e-9);
    }

    #[test]
    fn constant_response_is_separation() {
        let f = vec![vec![0.0], vec![1.0], vec![2.0]];
        let d = RegressionDataset::from_features(&f, vec![1.0; 3], ResponseKind::Binary).unwrap();
        assert!(matches!(fit_mle_logistic(&d), Err(Error::Separation(_))));
    }

    #[test]
    fn complete_separation_detected() {
        let f: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
        let d = RegressionDataset::from_features(&f, y, ResponseKind::Binary).unwrap();
        assert!(matches!(fit_mle_logistic(&d), Err(Error::Separation(_))));
    }

    #[test]
    fn score_equation_residual() {
        let d = random_logistic(50, 2, 3);
        let beta = fit_mle_logistic(&d).unwrap();
        let n = d.len() as f64;
        let mut resid = DVector::zeros(3);
        for i in 0..d.len() {
            let x = d.row(i);
            resid += &x * ((inverse_logit(x.dot(&beta)) - d.y()[i]) / n);
        }
        assert!(resid.amax() < 1e-8, "{resid}");
        // no point on a fine grid around the MLE has lower deviance
        let best = deviance(&d, &beta);
        for k in 0..3 {
            for step in [-1e-3, -1e-4, 1e-4, 1e-3] {
                let mut b = beta.clone();
                b[k] += step;
                assert!(deviance(&d, &b) > best);
            }
        }
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = RngStream::new(9, 0);
        let features: Vec<Vec<f64>> = (0..40).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let y: Vec<f64> = features
            .iter()
            .map(|f| 1.0 + 2.0 * f[0] + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let d = RegressionDataset::from_features(&features, y.clone(), ResponseKind::Real).unwrap();
        let fit = fit_glm(&d).unwrap();
        let x = d.x();
        let direct = (x.transpose() * x).try_inverse().unwrap() * x.transpose() * DVector::from_vec(y);
        assert!((fit.beta - direct).amax() < 1e-9);
        match fit.family {
            GlmFamily::Gaussian { variance } => assert!(variance > 0.1 && variance < 0.5),
            _ => unreachable!(),
        }
    }
}
