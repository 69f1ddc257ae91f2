use std::path::Path;

use momentmp::energy::{select_c, SelectionResult};
use momentmp::resampling::{
    quantile_name, run_bb, run_moment_mp, run_parametric_mp_score, PosteriorRun, TrajectoryConfig,
    DEFAULT_FORWARD_STEPS, DEFAULT_PATH_STRIDE,
};
use momentmp::{Concentration, Dataset, Normal, RngStream};
use serde_json::{json, Value};

use crate::config::{self, Method, SelectConfig, SimulateConfig};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::output::{num, strings, OutputDir};

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Resolved {
    concentration: Option<Concentration>,
    selection: Option<SelectionResult>,
}

fn resolve_concentration(cfg: &SimulateConfig, data: &Dataset) -> CliResult<Resolved> {
    let fixed = |c| Resolved {
        concentration: Some(c),
        selection: None,
    };
    Ok(match cfg.method {
        Method::Bb => fixed(Concentration::ZERO),
        Method::Parametric => fixed(Concentration::INFINITE),
        Method::ParametricScore => Resolved {
            concentration: None,
            selection: None,
        },
        Method::Mixture => match &cfg.c {
            Some(c) => fixed(config::parse_concentration(c)?),
            None => {
                let sel = select_c(data, &Normal, cfg.selection.scheme(), &RngStream::new(cfg.seed, 1))?;
                Resolved {
                    concentration: Some(sel.c_hat),
                    selection: Some(sel),
                }
            }
        },
    })
}

/// Runs the configured sampler. With `paths_only` just the moment paths are
/// written, recorded every `DEFAULT_PATH_STRIDE` steps unless configured.
pub fn simulate(cfg: &SimulateConfig, out: &Path, paths_only: bool) -> CliResult<()> {
    let data = data::univariate(&cfg.data, cfg.seed)?;
    let n = data.len();
    let resolved = resolve_concentration(cfg, &data)?;
    let horizon = cfg.horizon.unwrap_or(n + DEFAULT_FORWARD_STEPS);
    let mut tcfg = TrajectoryConfig::new(horizon, cfg.replicates, resolved.concentration.unwrap_or(Concentration::INFINITE))
        .with_quantiles(&cfg.quantiles);
    let stride = if paths_only {
        Some(cfg.path_stride.unwrap_or(DEFAULT_PATH_STRIDE))
    } else {
        cfg.path_stride
    };
    if let Some(s) = stride {
        tcfg = tcfg.with_paths(s);
    }

    let rng = RngStream::new(cfg.seed, 2);
    let run = match cfg.method {
        Method::Bb => erase(run_bb(&data, &tcfg, cfg.bb_mode.into(), &rng)?),
        Method::ParametricScore => erase(run_parametric_mp_score(&data, &Normal, &tcfg, &rng)?),
        Method::Mixture | Method::Parametric => erase(run_moment_mp(&data, &Normal, &tcfg, &rng)?),
    };
    if run.samples.is_empty() {
        let first = run.aborted.first().cloned();
        return Err(first.map_or_else(|| CliError::Numerical("no replicate completed".into()), Into::into));
    }

    let mut dir = OutputDir::create(out, config::config_hash(cfg), cfg.seed)?;
    if !paths_only {
        let rows: Vec<Vec<String>> = data
            .values()
            .iter()
            .enumerate()
            .map(|(i, &y)| vec![i.to_string(), num(y)])
            .collect();
        dir.table("data.csv", &strings(["index", "y"]), &rows, &[])?;

        let mut header = strings(["replicate", "mean", "variance", "skewness", "kurtosis"]);
        header.extend(cfg.quantiles.iter().map(|&q| quantile_name(q)));
        let rows: Vec<Vec<String>> = run
            .samples
            .iter()
            .map(|s| {
                let f = &s.functionals;
                let mut row = vec![s.replicate.to_string(), num(f.mean), num(f.variance), opt(f.skewness), opt(f.kurtosis)];
                row.extend(f.quantiles.iter().map(|(_, v)| num(*v)));
                row
            })
            .collect();
        let c_note = resolved.concentration.map_or("none".to_string(), |c| c.to_string());
        dir.table("posterior.csv", &header, &rows, &[("c", c_note)])?;
    }
    if stride.is_some() {
        let rows: Vec<Vec<String>> = run
            .samples
            .iter()
            .flat_map(|s| {
                s.path.iter().map(move |p| {
                    let mut row = vec![s.replicate.to_string(), p.step.to_string()];
                    row.extend(p.moments.iter().map(|&m| num(m)));
                    row
                })
            })
            .collect();
        let width = run.samples[0].path.first().map_or(0, |p| p.moments.len());
        let mut header = strings(["replicate", "step"]);
        header.extend((1..=width).map(|k| format!("m{k}")));
        dir.table("paths.csv", &header, &rows, &[])?;
    }

    let means: Vec<f64> = run.samples.iter().map(|s| s.functionals.mean).collect();
    let results = json!({
        "n": n,
        "horizon": horizon,
        "method": cfg.method,
        "c": resolved.concentration.map(|c| c.to_string()),
        "lambda_hat": resolved.selection.as_ref().map(|s| s.lambda_hat),
        "completed": run.samples.len(),
        "aborted": run.aborted.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "posterior_mean_of_mean": means.iter().sum::<f64>() / means.len() as f64,
    });
    dir.metadata(if paths_only { "paths" } else { "simulate" }, cfg, results)
}

fn erase<P>(run: PosteriorRun<P>) -> PosteriorRun<()> {
    PosteriorRun {
        samples: run
            .samples
            .into_iter()
            .map(|s| momentmp::resampling::PosteriorSample {
                replicate: s.replicate,
                final_moments: s.final_moments,
                theta: (),
                lambda: s.lambda,
                functionals: s.functionals,
                path: s.path,
            })
            .collect(),
        aborted: run.aborted,
    }
}

fn curve_rows(sel: &SelectionResult, n: usize) -> Vec<Vec<String>> {
    sel.score_curve
        .iter()
        .map(|&(c, s)| vec![c.to_string(), num(c.weight(n)), num(s)])
        .collect()
}

pub fn select(cfg: &SelectConfig, out: &Path) -> CliResult<()> {
    if cfg.regression.is_some() {
        return crate::logistic::select(cfg, out);
    }
    if cfg.datasets == 0 {
        return Err(CliError::Config("`datasets` must be at least 1".into()));
    }
    let mut dir = OutputDir::create(out, config::config_hash(cfg), cfg.seed)?;
    let scheme = cfg.selection.scheme();

    if cfg.datasets == 1 {
        let data = data::univariate(&cfg.data, cfg.seed)?;
        let sel = select_c(&data, &Normal, scheme, &RngStream::new(cfg.seed, 1))?;
        let notes = [("lambda_hat", num(sel.lambda_hat)), ("c_hat", sel.c_hat.to_string())];
        dir.table("curve.csv", &strings(["c", "lambda", "score"]), &curve_rows(&sel, data.len()), &notes)?;
        let results = json!({
            "n": data.len(),
            "folds": sel.folds,
            "lambda_hat": sel.lambda_hat,
            "c_hat": sel.c_hat.to_string(),
            "curvature": sel.psi.curvature(),
            "slope": sel.psi.slope(),
        });
        return dir.metadata("select-c", cfg, results);
    }

    if cfg.data.dgp.is_none() {
        return Err(CliError::Config("several datasets need a `dgp`".into()));
    }
    let mut rows = Vec::with_capacity(cfg.datasets);
    let mut infinite = 0usize;
    for d in 0..cfg.datasets as u64 {
        let seed = cfg.seed + d;
        let data = data::univariate(&cfg.data, seed)?;
        let sel = select_c(&data, &Normal, scheme, &RngStream::new(seed, 1))?;
        infinite += usize::from(sel.c_hat.is_infinite());
        rows.push(vec![
            d.to_string(),
            seed.to_string(),
            num(sel.lambda_hat),
            sel.c_hat.to_string(),
            sel.c_hat.is_infinite().to_string(),
        ]);
    }
    let fraction = infinite as f64 / cfg.datasets as f64;
    dir.table(
        "selections.csv",
        &strings(["dataset", "seed", "lambda_hat", "c_hat", "infinite"]),
        &rows,
        &[("fraction_infinite", num(fraction))],
    )?;
    let results: Value = json!({
        "datasets": cfg.datasets,
        "n": cfg.data.n,
        "fraction_infinite": fraction,
    });
    dir.metadata("select-c", cfg, results)
}
