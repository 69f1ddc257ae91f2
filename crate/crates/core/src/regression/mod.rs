//! Mixture predictive resampling for generalized linear models.
//!
//! Covariates are resampled by the Bayesian bootstrap over the observed
//! atoms; a response is drawn from `f_beta(y | x)` with probability
//! `c / (c + i)` and otherwise copied from a past response at the same atom.
//! `beta` is tied to the cross-moment `mu^{yx}` through the canonical-link
//! score equation, either exactly or by an online Newton step.

mod mle;
mod resample;
mod selection;
mod state;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

pub use mle::{fisher_information, fit_glm, fit_mle_logistic, newton_refit, GlmFit, MLE_TOLERANCE};
pub use resample::{
    exact_online_divergence, glm_trajectory, run_glm_mp, DivergencePoint, DivergenceSetup, GlmMode,
    GlmOptions, GlmRun, GlmSample, DEFAULT_GLM_FORWARD_STEPS,
};
pub use selection::{
    default_regression_grid, holdout_relative_scores, joint_energy_score, select_c_regression,
    HoldoutScores, RegressionSelection, ScoreEstimate, ScoreMethod, DEFAULT_MC_DRAWS,
};
pub use state::RegressionState;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    /// `y` in `{0, 1}`, logit link.
    Binary,
    /// Real `y`, identity link.
    Real,
}

/// Design matrix with a leading intercept column, plus responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    kind: ResponseKind,
}

impl RegressionDataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, kind: ResponseKind) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::rejected("design matrix must be non-empty"));
        }
        if y.len() != n {
            return Err(Error::rejected(format!("{} responses for {n} rows", y.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::rejected("design and responses must be finite"));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::rejected("first design column must be the all-ones intercept"));
        }
        if kind == ResponseKind::Binary {
            if let Some(&bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinaryTarget(bad));
            }
        }
        let rank = x.clone().svd(false, false).rank(1e-10 * (n.max(p) as f64).sqrt());
        if rank < p {
            return Err(Error::RankDeficient(format!("rank {rank} < {p} columns")));
        }
        Ok(Self { x, y, kind })
    }

    /// Prepends the intercept to `features` (rows are observations).
    pub fn from_features(features: &[Vec<f64>], y: Vec<f64>, kind: ResponseKind) -> Result<Self> {
        let n = features.len();
        let q = features.first().map_or(0, |r| r.len());
        if features.iter().any(|r| r.len() != q) {
            return Err(Error::rejected("feature rows have unequal lengths"));
        }
        let x = DMatrix::from_fn(n, q + 1, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
        Self::new(x, y, kind)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of columns including the intercept.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Rows at `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(idx);
        let y = idx.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y, self.kind)
    }

    /// Unique covariate rows, keyed by exact equality.
    pub fn atoms(&self) -> AtomTable {
        AtomTable::build(self)
    }
}

/// Column means and standard deviations of the non-intercept covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &RegressionDataset) -> Result<Self> {
        let n = data.len() as f64;
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for j in 1..data.dim() {
            let col = data.x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            if !(v > 0.0) {
                return Err(Error::RankDeficient(format!("covariate {j} is constant")));
            }
            means.push(m);
            sds.push(v.sqrt());
        }
        Ok(Self { means, sds })
    }

    pub fn apply(&self, data: &RegressionDataset) -> Result<RegressionDataset> {
        if data.dim() != self.means.len() + 1 {
            return Err(Error::rejected("standardizer was fitted on a different design width"));
        }
        let mut x = data.x.clone();
        for j in 1..x.ncols() {
            let (m, s) = (self.means[j - 1], self.sds[j - 1]);
            x.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
        RegressionDataset::new(x, data.y.clone(), data.kind)
    }
}

/// Distinct covariate rows and the atom of every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomTable {
    pub atoms: Vec<DVector<f64>>,
    pub of_obs: Vec<usize>,
}

impl AtomTable {
    fn build(data: &RegressionDataset) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut atoms = Vec::new();
        let mut of_obs = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let row = data.row(i);
            // +0.0 and -0.0 are the same covariate value
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            let a = *index.entry(key).or_insert_with(|| {
                atoms.push(row.clone());
                atoms.len() - 1
            });
            of_obs.push(a);
        }
        Self { atoms, of_obs }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}
