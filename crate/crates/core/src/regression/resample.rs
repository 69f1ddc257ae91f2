use nalgebra::DVector;
use rayon::prelude::*;

use super::mle::{fit_glm, GlmFit};
use super::state::RegressionState;
use super::RegressionDataset;
use crate::concentration::Concentration;
use crate::error::{Error, Result};
use crate::resampling::TrajectoryConfig;
use crate::rng::RngStream;

/// Forward steps beyond the data in the regression experiments.
pub const DEFAULT_GLM_FORWARD_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlmMode {
    /// Re-solve the cross-moment equation after every draw.
    Exact,
    /// One Newton step per draw with the Fisher information frozen at `beta_n`.
    Online,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmOptions {
    pub mode: GlmMode,
    /// Observations whose covariate atoms get conditional-mean tracking.
    pub tracked: Vec<usize>,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self {
            mode: GlmMode::Online,
            tracked: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmPathPoint {
    pub step: usize,
    pub beta: DVector<f64>,
    /// `mu_i^{y|x}` at the tracked atoms.
    pub conditional_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmSample {
    pub replicate: usize,
    pub beta: DVector<f64>,
    pub conditional_means: Vec<f64>,
    pub path: Vec<GlmPathPoint>,
}

#[derive(Debug, Clone)]
pub struct GlmRun {
    pub fit: GlmFit,
    /// Atom index of each tracked observation.
    pub tracked_atoms: Vec<usize>,
    pub samples: Vec<GlmSample>,
    pub aborted: Vec<Error>,
}

impl GlmRun {
    /// Draws of coefficient `j` across completed replicates.
    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.beta[j]).collect()
    }
}

fn snapshot(state: &RegressionState, tracked: &[usize]) -> Result<GlmPathPoint> {
    Ok(GlmPathPoint {
        step: state.count(),
        beta: state.beta().clone(),
        conditional_means: tracked
            .iter()
            .map(|&a| state.conditional_mean(a))
            .collect::<Result<_>>()?,
    })
}

/// One forward draw: atom by Bayesian bootstrap, response from the
/// conditional mixture, then the `beta` update for `mode`.
fn advance(
    state: &mut RegressionState,
    concentration: Concentration,
    mode: GlmMode,
    rng: &mut RngStream,
) -> Result<(usize, f64)> {
    let lambda = concentration.weight(state.count());
    let atom = state.draw_atom(rng);
    let y = state.draw_response(atom, lambda, rng);
    let before = state.beta().clone();
    state.absorb(atom, y);
    match mode {
        GlmMode::Exact => state.refit_exact()?,
        GlmMode::Online => {
            let next = state.online_step(&before, atom, y);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalDegeneracy("online update is not finite".into()));
            }
            state.set_beta(next);
        }
    }
    Ok((atom, y))
}

/// Runs `state` forward to `horizon`, recording every `stride` steps when set.
pub fn glm_trajectory(
    state: &mut RegressionState,
    horizon: usize,
    concentration: Concentration,
    mode: GlmMode,
    stride: Option<usize>,
    tracked_atoms: &[usize],
    rng: &mut RngStream,
) -> Result<Vec<GlmPathPoint>> {
    let start = state.count();
    let mut path = Vec::new();
    if stride.is_some() {
        path.push(snapshot(state, tracked_atoms)?);
    }
    while state.count() < horizon {
        let step = state.count() + 1;
        advance(state, concentration, mode, rng).map_err(|e| crate::resampling::aborted(0, step, e))?;
        if let Some(s) = stride {
            if (step - start) % s == 0 || step == horizon {
                path.push(snapshot(state, tracked_atoms)?);
            }
        }
    }
    Ok(path)
}

/// Posterior over `beta_N` and conditional means by GLM predictive resampling.
pub fn run_glm_mp(
    data: &RegressionDataset,
    cfg: &TrajectoryConfig,
    options: &GlmOptions,
    rng: &RngStream,
) -> Result<GlmRun> {
    let n = data.len();
    cfg.validate(n)?;
    if let Some(&bad) = options.tracked.iter().find(|&&i| i >= n) {
        return Err(Error::rejected(format!("tracked observation {bad} out of range for n = {n}")));
    }
    let fit = fit_glm(data)?;
    let initial = RegressionState::new(data, &fit)?;
    let of_obs = data.atoms().of_obs;
    let tracked_atoms: Vec<usize> = options.tracked.iter().map(|&i| of_obs[i]).collect();

    let results: Vec<Result<GlmSample>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut state = initial.clone();
            let mut stream = crate::resampling::replicate_stream(rng, b);
            let path = glm_trajectory(
                &mut state,
                cfg.horizon,
                cfg.concentration,
                options.mode,
                cfg.path_stride,
                &tracked_atoms,
                &mut stream,
            )
            .map_err(|e| match e {
                Error::TrajectoryAborted { step, source, .. } => crate::resampling::aborted(b, step, *source),
                other => other,
            })?;
            let last = snapshot(&state, &tracked_atoms)?;
            Ok(GlmSample {
                replicate: b,
                beta: last.beta,
                conditional_means: last.conditional_means,
                path,
            })
        })
        .collect();
    let mut run = GlmRun {
        fit,
        tracked_atoms,
        samples: Vec::with_capacity(cfg.replicates),
        aborted: Vec::new(),
    };
    for r in results {
        match r {
            Ok(s) => run.samples.push(s),
            Err(e) => run.aborted.push(e),
        }
    }
    Ok(run)
}

/// Which update drives the draws when comparing exact and online `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceSetup {
    /// Resample with exact refits and shadow the online recursion.
    ExactDriven,
    /// Resample with online updates and shadow the exact refit.
    OnlineDriven,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergencePoint {
    pub step: usize,
    pub exact_norm: f64,
    pub online_norm: f64,
    /// `||beta_exact - beta_online||_2`.
    pub difference: f64,
}

impl DivergencePoint {
    pub fn relative(&self) -> f64 {
        self.difference / self.exact_norm
    }
}

/// Exact and online coefficients along one shared trajectory, at every step.
pub fn exact_online_divergence(
    data: &RegressionDataset,
    horizon: usize,
    concentration: Concentration,
    setup: DivergenceSetup,
    rng: &mut RngStream,
) -> Result<Vec<DivergencePoint>> {
    let n = data.len();
    if horizon <= n {
        return Err(Error::rejected(format!("horizon {horizon} must exceed the sample size {n}")));
    }
    let fit = fit_glm(data)?;
    let mut state = RegressionState::new(data, &fit)?;
    let mut shadow = fit.beta.clone();
    let point = |state: &RegressionState, shadow: &DVector<f64>| {
        let (exact, online) = match setup {
            DivergenceSetup::ExactDriven => (state.beta(), shadow),
            DivergenceSetup::OnlineDriven => (shadow, state.beta()),
        };
        DivergencePoint {
            step: state.count(),
            exact_norm: exact.norm(),
            online_norm: online.norm(),
            difference: (exact - online).norm(),
        }
    };
    let mut out = Vec::with_capacity(horizon - n + 1);
    out.push(point(&state, &shadow));
    while state.count() < horizon {
        let step = state.count() + 1;
        let mode = match setup {
            DivergenceSetup::ExactDriven => GlmMode::Exact,
            DivergenceSetup::OnlineDriven => GlmMode::Online,
        };
        let (atom, y) = advance(&mut state, concentration, mode, rng)
            .map_err(|e| crate::resampling::aborted(0, step, e))?;
        shadow = match setup {
            DivergenceSetup::ExactDriven => state.online_step(&shadow, atom, y),
            DivergenceSetup::OnlineDriven => state
                .solve_exact(&shadow)
                .map_err(|e| crate::resampling::aborted(0, step, e))?,
        };
        out.push(point(&state, &shadow));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::inverse_logit;
    use crate::regression::ResponseKind;
    use rand_distr::{Distribution, StandardNormal};

    fn logistic_data(n: usize, seed: u64) -> RegressionDataset {
        let mut rng = RngStream::new(seed, 0);
        let mut features = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let f: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eta = -0.5 + 1.0 * f[0] - 0.7 * f[1];
            y.push(if rng.uniform() < inverse_logit(eta) { 1.0 } else { 0.0 });
            features.push(f);
        }
        RegressionDataset::from_features(&features, y, ResponseKind::Binary).unwrap()
    }

    #[test]
    fn zero_concentration_is_point_mass_at_unique_atom() {
        let d = logistic_data(60, 1);
        let cfg = TrajectoryConfig::new(400, 8, Concentration::ZERO);
        let opts = GlmOptions {
            mode: GlmMode::Online,
            tracked: vec![10, 20],
        };
        let run = run_glm_mp(&d, &cfg, &opts, &RngStream::new(2, 0)).unwrap();
        assert!(run.aborted.is_empty());
        for s in &run.samples {
            assert_eq!(s.conditional_means, vec![d.y()[10], d.y()[20]]);
        }
    }

    #[test]
    fn infinite_concentration_spreads_conditional_mean() {
        let d = logistic_data(40, 3);
        let cfg = TrajectoryConfig::new(2000, 40, Concentration::INFINITE);
        let opts = GlmOptions {
            mode: GlmMode::Online,
            tracked: vec![5],
        };
        let run = run_glm_mp(&d, &cfg, &opts, &RngStream::new(4, 0)).unwrap();
        let mut values: Vec<f64> = run.samples.iter().map(|s| s.conditional_means[0]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        assert!(values.len() > 10);
        assert!(values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn exact_mode_keeps_residual_zero() {
        let d = logistic_data(50, 5);
        let fit = fit_glm(&d).unwrap();
        let mut state = RegressionState::new(&d, &fit).unwrap();
        let mut rng = RngStream::new(6, 0);
        glm_trajectory(&mut state, 150, Concentration::new(30.0).unwrap(), GlmMode::Exact, None, &[], &mut rng)
            .unwrap();
        assert_eq!(state.count(), 150);
        assert!(state.cross_moment_residual().amax() < 1e-10);
    }

    #[test]
    fn paths_are_recorded_on_stride() {
        let d = logistic_data(30, 7);
        let cfg = TrajectoryConfig::new(75, 2, Concentration::new(10.0).unwrap()).with_paths(20);
        let run = run_glm_mp(&d, &cfg, &GlmOptions::default(), &RngStream::new(8, 0)).unwrap();
        let steps: Vec<usize> = run.samples[0].path.iter().map(|p| p.step).collect();
        assert_eq!(steps, vec![30, 50, 70, 75]);
    }

    #[test]
    fn runs_are_deterministic() {
        let d = logistic_data(30, 9);
        let cfg = TrajectoryConfig::new(200, 6, Concentration::new(50.0).unwrap());
        let a = run_glm_mp(&d, &cfg, &GlmOptions::default(), &RngStream::new(1, 1)).unwrap();
        let b = run_glm_mp(&d, &cfg, &GlmOptions::default(), &RngStream::new(1, 1)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn divergence_starts_at_zero_and_stays_small() {
        let d = logistic_data(500, 11);
        for setup in [DivergenceSetup::ExactDriven, DivergenceSetup::OnlineDriven] {
            let pts = exact_online_divergence(
                &d,
                4500,
                Concentration::new(1600.0).unwrap(),
                setup,
                &mut RngStream::new(12, 0),
            )
            .unwrap();
            assert_eq!(pts.len(), 4001);
            assert_eq!(pts[0].difference, 0.0);
            let worst = pts.iter().map(|p| p.relative()).fold(0.0, f64::max);
            assert!(worst < 0.05);
        }
    }
}
