use super::{
    aborted, extract_functionals, replicate_stream, run_replicates, should_record, PathPoint,
    PosteriorRun, PosteriorSample, Trajectory, TrajectoryConfig, TRACKED_ORDER,
};
use crate::data::Dataset;
use crate::error::Result;
use crate::families::ParametricFamily;
use crate::mixture::{draw, MixturePredictive};
use crate::moments::MomentState;
use crate::rng::RngStream;

/// One forward trajectory of the moment-tied mixture predictive.
///
/// At effective size `i` the next value is drawn from
/// `lambda_i f_theta + (1 - lambda_i) P_i`, the moments are updated and
/// `theta` is refitted by the method of moments.
pub fn moment_trajectory<F: ParametricFamily>(
    data: &Dataset,
    family: &F,
    cfg: &TrajectoryConfig,
    replicate: usize,
    rng: &mut RngStream,
) -> Result<Trajectory<F::Params>> {
    let n = data.len();
    cfg.validate(n)?;
    let p = family.order();
    let mut moments = MomentState::from_sample(data.values(), p.max(TRACKED_ORDER))?;
    let mut params = family
        .fit_moments(&moments.moments()[..p])
        .map_err(|e| aborted(replicate, n, e))?;

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
        let lambda = cfg.concentration.weight(i);
        let y = draw(family, &params, lambda, &history, rng);
        history.push(y);
        moments.push(y).map_err(|e| aborted(replicate, i + 1, e))?;
        params = family
            .fit_moments(&moments.moments()[..p])
            .map_err(|e| aborted(replicate, i + 1, e))?;
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
        params,
        path,
    })
}

/// Analytic `E[mu_{i+1}^(k) | F_i]` for `k = 1..=p` when the next value is
/// drawn from `lambda f_theta + (1 - lambda) P_i`:
/// `(lambda mu_theta^(k) + (1 - lambda) mu_i^(k)) / (i + 1) + i mu_i^(k) / (i + 1)`.
pub fn expected_next_moments<F: ParametricFamily>(
    family: &F,
    params: &F::Params,
    moments: &MomentState,
    lambda: f64,
) -> Result<Vec<f64>> {
    let i = moments.count() as f64;
    (1..=family.order().min(moments.order()))
        .map(|k| {
            let emp = moments.raw(k);
            let model = if lambda > 0.0 { family.raw_moment(params, k)? } else { 0.0 };
            let next = lambda * model + (1.0 - lambda) * emp;
            Ok(next / (i + 1.0) + i * emp / (i + 1.0))
        })
        .collect()
}

/// Moment martingale posterior: `B` trajectories of the mixture predictive.
///
/// Fails up front if the data moments cannot be inverted. A replicate whose
/// refit fails later is reported in [`PosteriorRun::aborted`] with its step.
pub fn run_moment_mp<F: ParametricFamily>(
    data: &Dataset,
    family: &F,
    cfg: &TrajectoryConfig,
    rng: &RngStream,
) -> Result<PosteriorRun<F::Params>> {
    cfg.validate(data.len())?;
    let initial = MomentState::from_sample(data.values(), family.order())?;
    family.fit_moments(initial.moments())?;

    Ok(run_replicates(cfg.replicates, |b| {
        let mut stream = replicate_stream(rng, b);
        let t = moment_trajectory(data, family, cfg, b, &mut stream)?;
        let lambda = cfg.concentration.weight(cfg.horizon);
        let pred = MixturePredictive::new(family, t.params.clone(), &t.history, lambda)?;
        let functionals = extract_functionals(&pred, &t.moments, &cfg.quantiles)
            .map_err(|e| aborted(b, cfg.horizon, e))?;
        Ok(PosteriorSample {
            replicate: b,
            final_moments: t.moments,
            theta: t.params,
            lambda,
            functionals,
            path: t.path,
        })
    }))
}
