use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::mle::{fisher_information, newton_refit, GlmFit};
use super::RegressionDataset;
use crate::error::{Error, Result};
use crate::families::GlmFamily;
use crate::rng::{scaled_index, RngStream};

/// State of one GLM predictive-resampling trajectory at effective size `i`.
#[derive(Debug, Clone)]
pub struct RegressionState {
    family: GlmFamily,
    atoms: Arc<Vec<DVector<f64>>>,
    counts: Vec<usize>,
    sums: Vec<f64>,
    responses: Vec<Vec<f64>>,
    history: Vec<usize>,
    cross_moment: DVector<f64>,
    beta: DVector<f64>,
    fisher_inverse: Arc<DMatrix<f64>>,
}

impl RegressionState {
    /// Initial state from the data and its fit; the average Fisher
    /// information at the fitted `beta` is inverted once here.
    pub fn new(data: &RegressionDataset, fit: &GlmFit) -> Result<Self> {
        let table = data.atoms();
        let k = table.len();
        let mut counts = vec![0; k];
        let mut sums = vec![0.0; k];
        let mut responses = vec![Vec::new(); k];
        let mut cross_moment = DVector::zeros(data.dim());
        for (i, &a) in table.of_obs.iter().enumerate() {
            let y = data.y()[i];
            counts[a] += 1;
            sums[a] += y;
            responses[a].push(y);
            cross_moment.axpy(y / data.len() as f64, &table.atoms[a], 1.0);
        }
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let info = fisher_information(fit.family, &table.atoms, &weights, &fit.beta);
        let fisher_inverse = info
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularFisher(format!("{info}")))?;
        Ok(Self {
            family: fit.family,
            atoms: Arc::new(table.atoms),
            counts,
            sums,
            responses,
            history: table.of_obs,
            cross_moment,
            beta: fit.beta.clone(),
            fisher_inverse: Arc::new(fisher_inverse),
        })
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    /// Effective sample size `i`.
    pub fn count(&self) -> usize {
        self.history.len()
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn set_beta(&mut self, beta: DVector<f64>) {
        self.beta = beta;
    }

    /// `mu^{yx} = i^-1 sum_j y_j x_j`.
    pub fn cross_moment(&self) -> &DVector<f64> {
        &self.cross_moment
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn atom_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn responses(&self, atom: usize) -> &[f64] {
        &self.responses[atom]
    }

    /// Atom index of every past covariate draw, data first.
    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// `w_i^x = i^-1 #{j : x_j = x}`.
    pub fn atom_weight(&self, atom: usize) -> f64 {
        self.counts[atom] as f64 / self.count() as f64
    }

    /// `m_i^{yx} = i^-1 sum_j 1(x_j = x) y_j`.
    pub fn accumulator(&self, atom: usize) -> f64 {
        self.sums[atom] / self.count() as f64
    }

    pub fn fisher_inverse(&self) -> &DMatrix<f64> {
        &self.fisher_inverse
    }

    /// Model mean `g^-1(x' beta)` at an atom.
    pub fn model_mean(&self, atom: usize) -> f64 {
        self.family.inverse_link(self.atoms[atom].dot(&self.beta))
    }

    /// Empirical conditional mean `m_i^{yx} / w_i^x`.
    pub fn conditional_mean(&self, atom: usize) -> Result<f64> {
        match self.counts.get(atom) {
            Some(&c) if c > 0 => Ok(self.sums[atom] / c as f64),
            _ => Err(Error::UndefinedConditional(atom)),
        }
    }

    /// Bayesian-bootstrap draw of the next covariate atom.
    pub fn draw_atom(&self, rng: &mut RngStream) -> usize {
        self.history[rng.index(self.history.len())]
    }

    /// Draws `y | x = atom` from `lambda f_beta + (1 - lambda) P_i(. | x)`.
    pub fn draw_response(&self, atom: usize, lambda: f64, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        if u < lambda {
            self.family.sample_response(self.model_mean(atom), rng)
        } else {
            let past = &self.responses[atom];
            past[scaled_index((u - lambda) / (1.0 - lambda), past.len())]
        }
    }

    /// Appends `(x_atom, y)` and updates the moments; `beta` is untouched.
    pub fn absorb(&mut self, atom: usize, y: f64) {
        let i = self.count() as f64;
        self.cross_moment *= i / (i + 1.0);
        self.cross_moment.axpy(y / (i + 1.0), &self.atoms[atom], 1.0);
        self.counts[atom] += 1;
        self.sums[atom] += y;
        self.responses[atom].push(y);
        self.history.push(atom);
    }

    /// Solves the cross-moment equation on the current history, warm-started at `beta`.
    pub fn refit_exact(&mut self) -> Result<()> {
        self.beta = self.solve_exact(&self.beta)?;
        Ok(())
    }

    /// Root of the cross-moment equation on the current history, from `start`.
    pub fn solve_exact(&self, start: &DVector<f64>) -> Result<DVector<f64>> {
        let counts: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        Ok(newton_refit(self.family, &self.atoms, &counts, &self.sums, start)?.0)
    }

    /// `beta + i^-1 I_n(beta_n)^-1 (y - mu(x; beta)) x`, where `i` is the
    /// count after absorbing `(x_atom, y)`.
    pub fn online_step(&self, beta: &DVector<f64>, atom: usize, y: f64) -> DVector<f64> {
        let x = &self.atoms[atom];
        let resid = y - self.family.inverse_link(x.dot(beta));
        beta + &*self.fisher_inverse * x * (resid / self.count() as f64)
    }

    /// `i^-1 sum_j g^-1(x_j' beta) x_j - mu^{yx}`; zero at an exact fit.
    pub fn cross_moment_residual(&self) -> DVector<f64> {
        let i = self.count() as f64;
        let mut fitted = DVector::zeros(self.beta.len());
        for (a, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                fitted.axpy(c as f64 * self.model_mean(a) / i, &self.atoms[a], 1.0);
            }
        }
        fitted - &self.cross_moment
    }

    /// Analytic `E[mu_{i+1}^{yx} | F_i]` under weight `lambda`, summing over
    /// the bootstrap draw of the atom and the mixture draw of the response.
    pub fn expected_next_cross_moment(&self, lambda: f64) -> DVector<f64> {
        let i = self.count() as f64;
        let mut next = DVector::zeros(self.beta.len());
        for (a, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let ey = lambda * self.model_mean(a) + (1.0 - lambda) * self.sums[a] / c as f64;
            next.axpy(c as f64 / i * ey, &self.atoms[a], 1.0);
        }
        &self.cross_moment * (i / (i + 1.0)) + next / (i + 1.0)
    }

    /// `E[m_{i+1}^{yx} | F_i] = i/(i+1) m + [(1 - lambda) m + lambda g^-1(x' beta) w] / (i+1)`.
    pub fn expected_next_accumulator(&self, atom: usize, lambda: f64) -> f64 {
        let i = self.count() as f64;
        let m = self.accumulator(atom);
        let w = self.atom_weight(atom);
        i / (i + 1.0) * m + ((1.0 - lambda) * m + lambda * self.model_mean(atom) * w) / (i + 1.0)
    }
}
