use super::{
    aborted, extract_functionals, replicate_stream, run_replicates, should_record, PathPoint,
    PosteriorRun, PosteriorSample, Trajectory, TrajectoryConfig, TRACKED_ORDER,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::families::ScoreFamily;
use crate::mixture::MixturePredictive;
use crate::moments::MomentState;
use crate::rng::RngStream;

/// `theta + i^-1 I(theta)^-1 s(y, theta)`.
pub fn score_step<F: ScoreFamily>(family: &F, params: &F::Params, y: f64, i: usize) -> Result<F::Params> {
    let fisher = family.fisher(params);
    let inv = fisher
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::SingularFisher(format!("{fisher}")))?;
    let step = inv * family.score(params, y) / i as f64;
    family.from_vector(&(family.to_vector(params) + step))
}

/// Pure-parametric forward sampling with the score update, starting from the
/// moment fit to the data.
pub fn score_trajectory<F: ScoreFamily>(
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
        let y = family.sample(&params, rng);
        history.push(y);
        moments.push(y).map_err(|e| aborted(replicate, i + 1, e))?;
        params = score_step(family, &params, y, i + 1).map_err(|e| aborted(replicate, i + 1, e))?;
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

/// Parametric martingale posterior driven by the score update. The
/// concentration in `cfg` is ignored; functionals come from `f_theta_N`.
pub fn run_parametric_mp_score<F: ScoreFamily>(
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
        let t = score_trajectory(data, family, cfg, b, &mut stream)?;
        let pred = MixturePredictive::new(family, t.params.clone(), &t.history, 1.0)?;
        let functionals = extract_functionals(&pred, &t.moments, &cfg.quantiles)
            .map_err(|e| aborted(b, cfg.horizon, e))?;
        Ok(PosteriorSample {
            replicate: b,
            final_moments: t.moments,
            theta: t.params,
            lambda: 1.0,
            functionals,
            path: t.path,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Normal, NormalParams, ParametricFamily};

    #[test]
    fn zero_score_keeps_mean() {
        let p = NormalParams::new(0.0, 1.0).unwrap();
        let next = score_step(&Normal, &p, 0.0, 11).unwrap();
        assert_eq!(next.mean, 0.0);
        // variance moves by (0 - 1) / 11
        assert!((next.variance - (1.0 - 1.0 / 11.0)).abs() < 1e-15);
    }

    #[test]
    fn normal_step_is_running_update() {
        let p = NormalParams::new(2.0, 3.0).unwrap();
        let next = score_step(&Normal, &p, 5.0, 4).unwrap();
        assert!((next.mean - (2.0 + 3.0 / 4.0)).abs() < 1e-14);
        assert!((next.variance - (3.0 + (9.0 - 3.0) / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn mean_increment_is_centred() {
        let p = NormalParams::new(1.0, 25.0).unwrap();
        let mut rng = RngStream::new(8, 0);
        let reps = 10_000;
        let d: Vec<f64> = (0..reps)
            .map(|_| {
                let y = Normal.sample(&p, &mut rng);
                score_step(&Normal, &p, y, 101).unwrap().mean - p.mean
            })
            .collect();
        let m = d.iter().sum::<f64>() / reps as f64;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / reps as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (reps as f64).sqrt());
    }
}
