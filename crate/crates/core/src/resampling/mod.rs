//! Predictive resampling engines.
//!
//! Each replicate imputes `y_{n+1:N}` from a sequence of one-step predictives
//! and reports functionals of the final predictive. Replicate `b` draws from
//! `rng.child(b)`, so results depend only on the seed, never on scheduling.

mod bootstrap;
mod functionals;
mod moment;
mod score;

use rayon::prelude::*;

pub use bootstrap::{bb_trajectory, dirichlet_weights, run_bb, BootstrapMode};
pub use functionals::{extract_functionals, quantile_name, weighted_functionals, Functionals};
pub use moment::{expected_next_moments, moment_trajectory, run_moment_mp};
pub use score::{run_parametric_mp_score, score_step, score_trajectory};

use crate::concentration::Concentration;
use crate::error::{Error, Result};
use crate::moments::MomentState;
use crate::rng::RngStream;

/// Forward steps beyond the data in the univariate experiments.
pub const DEFAULT_FORWARD_STEPS: usize = 1500;

/// Default stride between recorded path points.
pub const DEFAULT_PATH_STRIDE: usize = 10;

/// Moments tracked along every trajectory, so skewness and kurtosis are
/// available even for two-parameter families.
pub const TRACKED_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Final effective sample size `N`.
    pub horizon: usize,
    /// Number of posterior replicates `B`.
    pub replicates: usize,
    pub concentration: Concentration,
    /// Record the moment state every `stride` steps when set.
    pub path_stride: Option<usize>,
    /// Quantile levels reported as functionals.
    pub quantiles: Vec<f64>,
}

impl TrajectoryConfig {
    pub fn new(horizon: usize, replicates: usize, concentration: Concentration) -> Self {
        Self {
            horizon,
            replicates,
            concentration,
            path_stride: None,
            quantiles: Vec::new(),
        }
    }

    /// `N = n + 1500`.
    pub fn with_default_horizon(n: usize, replicates: usize, concentration: Concentration) -> Self {
        Self::new(n + DEFAULT_FORWARD_STEPS, replicates, concentration)
    }

    pub fn with_paths(mut self, stride: usize) -> Self {
        self.path_stride = Some(stride.max(1));
        self
    }

    pub fn with_quantiles(mut self, quantiles: &[f64]) -> Self {
        self.quantiles = quantiles.to_vec();
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.horizon <= n {
            return Err(Error::rejected(format!(
                "horizon {} must exceed the sample size {n}",
                self.horizon
            )));
        }
        if self.replicates == 0 {
            return Err(Error::rejected("at least one replicate is required"));
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::rejected(format!("quantile level {q} outside (0, 1)")));
        }
        Ok(())
    }
}

/// Raw moments recorded at effective sample size `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub step: usize,
    pub moments: Vec<f64>,
}

/// State at the end of one forward trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<P> {
    /// Data followed by the imputed values.
    pub history: Vec<f64>,
    pub moments: MomentState,
    pub params: P,
    pub path: Vec<PathPoint>,
}

#[derive(Debug, Clone)]
pub struct PosteriorSample<P> {
    pub replicate: usize,
    pub final_moments: MomentState,
    pub theta: P,
    /// Parametric weight of the final predictive.
    pub lambda: f64,
    pub functionals: Functionals,
    pub path: Vec<PathPoint>,
}

/// Completed replicates in index order, plus the ones that aborted.
#[derive(Debug, Clone)]
pub struct PosteriorRun<P> {
    pub samples: Vec<PosteriorSample<P>>,
    pub aborted: Vec<Error>,
}

impl<P> PosteriorRun<P> {
    /// Values of one named functional across completed replicates.
    pub fn functional(&self, name: &str) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.functionals.to_map().get(name).copied())
            .collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.functionals.mean).collect()
    }
}

pub(crate) fn run_replicates<P, G>(replicates: usize, job: G) -> PosteriorRun<P>
where
    P: Send,
    G: Fn(usize) -> Result<PosteriorSample<P>> + Sync + Send,
{
    let results: Vec<Result<PosteriorSample<P>>> = (0..replicates).into_par_iter().map(job).collect();
    let mut run = PosteriorRun {
        samples: Vec::with_capacity(replicates),
        aborted: Vec::new(),
    };
    for r in results {
        match r {
            Ok(s) => run.samples.push(s),
            Err(e) => run.aborted.push(e),
        }
    }
    run
}

pub(crate) fn replicate_stream(rng: &RngStream, replicate: usize) -> RngStream {
    rng.child(replicate as u64)
}

pub(crate) fn should_record(stride: Option<usize>, n: usize, step: usize, horizon: usize) -> bool {
    match stride {
        Some(s) => (step - n) % s == 0 || step == horizon,
        None => false,
    }
}

pub(crate) fn aborted(replicate: usize, step: usize, source: Error) -> Error {
    Error::TrajectoryAborted {
        replicate,
        step,
        source: Box::new(source),
    }
}
