use rand_distr::{Distribution, Exp1};

use super::{
    aborted, replicate_stream, run_replicates, should_record, weighted_functionals, PathPoint,
    PosteriorRun, PosteriorSample, Trajectory, TrajectoryConfig, TRACKED_ORDER,
};
use crate::data::Dataset;
use crate::error::Result;
use crate::moments::MomentState;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    /// Dirichlet(1, ..., 1) weights on the data, drawn in one shot.
    Direct,
    /// Polya-urn forward sampling up to the horizon.
    Sequential,
}

/// Dirichlet(1, ..., 1) weights from normalized unit exponentials.
pub fn dirichlet_weights(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    w
}

/// One Polya-urn trajectory: each step copies a uniformly chosen past value.
///
/// Consumes the stream exactly like [`super::moment_trajectory`] at `c = 0`.
pub fn bb_trajectory(
    data: &Dataset,
    cfg: &TrajectoryConfig,
    replicate: usize,
    rng: &mut RngStream,
) -> Result<Trajectory<()>> {
    let n = data.len();
    cfg.validate(n)?;
    let mut moments = MomentState::from_sample(data.values(), TRACKED_ORDER)?;
    let mut history = Vec::with_capacity(cfg.horizon);
    history.extend_from_slice(data.values());
    let mut path = Vec::new();
    if should_record(cfg.path_stride, n, n, cfg.horizon) {
        path.push(PathPoint {
            step: n,
            moments: moments.moments().to_vec(),
        });
    }
    for i in n..cfg.horizon {
        let y = history[rng.index(history.len())];
        history.push(y);
        moments.push(y).map_err(|e| aborted(replicate, i + 1, e))?;
        if should_record(cfg.path_stride, n, i + 1, cfg.horizon) {
            path.push(PathPoint {
                step: i + 1,
                moments: moments.moments().to_vec(),
            });
        }
    }
    Ok(Trajectory {
        history,
        moments,
        params: (),
        path,
    })
}

/// Bayesian bootstrap posterior.
pub fn run_bb(
    data: &Dataset,
    cfg: &TrajectoryConfig,
    mode: BootstrapMode,
    rng: &RngStream,
) -> Result<PosteriorRun<()>> {
    cfg.validate(data.len())?;
    Ok(run_replicates(cfg.replicates, |b| {
        let mut stream = replicate_stream(rng, b);
        match mode {
            BootstrapMode::Direct => {
                let values = data.values();
                let w = dirichlet_weights(values.len(), &mut stream);
                let functionals = weighted_functionals(values, &w, &cfg.quantiles)?;
                let mut raw = vec![0.0; TRACKED_ORDER];
                for (&y, &wj) in values.iter().zip(&w) {
                    let mut pow = 1.0;
                    for r in raw.iter_mut() {
                        pow *= y;
                        *r += wj * pow;
                    }
                }
                Ok(PosteriorSample {
                    replicate: b,
                    final_moments: MomentState::new(raw, values.len())?,
                    theta: (),
                    lambda: 0.0,
                    functionals,
                    path: Vec::new(),
                })
            }
            BootstrapMode::Sequential => {
                let t = bb_trajectory(data, cfg, b, &mut stream)?;
                let w = vec![1.0; t.history.len()];
                let functionals = weighted_functionals(&t.history, &w, &cfg.quantiles)?;
                Ok(PosteriorSample {
                    replicate: b,
                    final_moments: t.moments,
                    theta: (),
                    lambda: 0.0,
                    functionals,
                    path: t.path,
                })
            }
        }
    }))
}
