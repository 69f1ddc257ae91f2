use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{closed_form_lambda, fit_psi, PsiStats};
use crate::concentration::Concentration;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::families::ParametricFamily;
use crate::rng::RngStream;

/// Log-spaced points between `c = 1` and `c = 10^6` in the plotted curve.
pub const CURVE_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitScheme {
    /// One random split with this fraction held out for validation.
    Holdout { validation_fraction: f64 },
    /// `J` random folds of (nearly) equal size.
    KFold(usize),
    /// Leave-one-out, i.e. `KFold(n)` without randomness.
    Loocv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub lambda_hat: f64,
    pub c_hat: Concentration,
    /// Statistics averaged over the splits.
    pub psi: PsiStats,
    pub folds: usize,
    /// `(c, mean energy score)` with `lambda = c / (c + n)`, increasing in `c`.
    pub score_curve: Vec<(Concentration, f64)>,
}

impl SelectionResult {
    /// The grid point with the highest score (first one on ties).
    pub fn curve_argmax(&self) -> Option<Concentration> {
        let mut best: Option<(Concentration, f64)> = None;
        for &(c, s) in &self.score_curve {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Validation index sets for each split.
pub fn assign_folds(n: usize, scheme: SplitScheme, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    match scheme {
        SplitScheme::Holdout { validation_fraction } => {
            if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
                return Err(Error::rejected(format!(
                    "validation fraction {validation_fraction} outside (0, 1)"
                )));
            }
            if n < 2 {
                return Err(Error::rejected("holdout needs at least two observations"));
            }
            let v = ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx.truncate(v);
            idx.sort_unstable();
            Ok(vec![idx])
        }
        SplitScheme::KFold(j) => {
            if j < 2 || j > n {
                return Err(Error::rejected(format!("cannot form {j} folds from {n} observations")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let mut folds = vec![Vec::new(); j];
            for (pos, i) in idx.into_iter().enumerate() {
                folds[pos % j].push(i);
            }
            for f in folds.iter_mut() {
                f.sort_unstable();
            }
            Ok(folds)
        }
        SplitScheme::Loocv => {
            if n < 2 {
                return Err(Error::rejected("leave-one-out needs at least two observations"));
            }
            Ok((0..n).map(|i| vec![i]).collect())
        }
    }
}

/// `c` values of the plotted curve: `0`, log-spaced `10^0 .. 10^6`, `+inf`.
pub fn default_curve_grid() -> Vec<Concentration> {
    let mut grid = vec![Concentration::ZERO];
    for k in 0..CURVE_POINTS {
        let e = 6.0 * k as f64 / (CURVE_POINTS - 1) as f64;
        grid.push(Concentration::new(10f64.powf(e)).expect("positive grid value"));
    }
    grid.push(Concentration::INFINITE);
    grid
}

/// Mean energy score at each `c`, mapping `c` to `lambda = c / (c + n)`.
pub fn score_curve(psi: &PsiStats, n: usize, grid: &[Concentration]) -> Vec<(Concentration, f64)> {
    grid.iter().map(|&c| (c, psi.mean_score(c.weight(n)))).collect()
}

/// Chooses `c` by maximizing the split-averaged energy score in closed form.
///
/// `theta` is refitted on every training split. The optimal weight is mapped
/// back to `c` with the full sample size.
pub fn select_c<F: ParametricFamily>(
    data: &Dataset,
    family: &F,
    scheme: SplitScheme,
    rng: &RngStream,
) -> Result<SelectionResult> {
    let n = data.len();
    let folds = assign_folds(n, scheme, &mut rng.clone())?;
    let min_train = family.order() + 2;
    let per_fold: Vec<Result<PsiStats>> = folds
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let (validation, train) = data.partition(fold);
            let wrap = |e: Error| Error::FoldDegenerate {
                fold: k,
                source: Box::new(e),
            };
            if train.len() < min_train {
                return Err(wrap(Error::rejected(format!(
                    "training split has {} observations, need {min_train}",
                    train.len()
                ))));
            }
            fit_psi(&train, &validation, family).map_err(wrap)
        })
        .collect();
    let stats = per_fold.into_iter().collect::<Result<Vec<_>>>()?;
    let psi = PsiStats::average(&stats)?;
    let lambda_hat = closed_form_lambda(&psi)?;
    let c_hat = Concentration::from_lambda(lambda_hat, n)?;
    debug_assert!(
        psi.mean_score(lambda_hat) + 1e-12 * psi.psi_av.max(1.0)
            >= psi.mean_score(0.0).max(psi.mean_score(1.0))
    );

    let mut grid = default_curve_grid();
    if !grid.contains(&c_hat) {
        grid.push(c_hat);
        grid.sort_by(|a, b| a.value().total_cmp(&b.value()));
    }
    Ok(SelectionResult {
        lambda_hat,
        c_hat,
        psi,
        folds: folds.len(),
        score_curve: score_curve(&psi, n, &grid),
    })
}
