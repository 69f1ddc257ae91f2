use std::path::Path;

use momentmp::energy::{assign_folds, SplitScheme};
use momentmp::regression::{
    exact_online_divergence, holdout_relative_scores, run_glm_mp, select_c_regression, GlmOptions, RegressionDataset,
    RegressionSelection, Standardizer, DEFAULT_GLM_FORWARD_STEPS,
};
use momentmp::resampling::TrajectoryConfig;
use momentmp::{Concentration, RngStream};
use serde_json::json;

use crate::config::{self, LogisticConfig, SelectConfig};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::output::{num, strings, OutputDir};

fn standardize(data: &RegressionDataset) -> CliResult<RegressionDataset> {
    Ok(Standardizer::fit(data)?.apply(data)?)
}

/// Training and test rows. A training fraction of one keeps every row.
fn split(data: &RegressionDataset, train_fraction: f64, rng: &mut RngStream) -> CliResult<(RegressionDataset, Option<RegressionDataset>)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(CliError::Config(format!("train_fraction {train_fraction} outside (0, 1]")));
    }
    if train_fraction == 1.0 {
        return Ok((data.clone(), None));
    }
    let scheme = SplitScheme::Holdout {
        validation_fraction: 1.0 - train_fraction,
    };
    let test = assign_folds(data.len(), scheme, rng)?.remove(0);
    let train: Vec<usize> = (0..data.len()).filter(|i| test.binary_search(i).is_err()).collect();
    Ok((data.subset(&train)?, Some(data.subset(&test)?)))
}

fn curve_table(dir: &mut OutputDir, sel: &RegressionSelection) -> CliResult<()> {
    let rows: Vec<Vec<String>> = sel
        .curve
        .iter()
        .map(|(c, s)| vec![c.to_string(), num(s.value), num(s.se)])
        .collect();
    dir.table(
        "score_curve.csv",
        &strings(["c", "relative_score", "se"]),
        &rows,
        &[("c_hat", sel.c_hat.to_string()), ("folds", sel.folds.to_string())],
    )
}

fn coefficient_names(features: &[String]) -> Vec<String> {
    std::iter::once("intercept".to_string()).chain(features.iter().cloned()).collect()
}

/// `select-c` on a logistic regression dataset.
pub fn select(cfg: &SelectConfig, out: &Path) -> CliResult<()> {
    let src = cfg.regression.as_ref().expect("regression source present");
    let (data, _) = data::regression(src, cfg.seed)?;
    let standardized = standardize(&data)?;
    let grid = cfg.scoring.grid()?;
    let sel = select_c_regression(&standardized, cfg.scoring.folds, &grid, cfg.scoring.method(), &RngStream::new(cfg.seed, 1))?;
    let mut dir = OutputDir::create(out, config::config_hash(cfg), cfg.seed)?;
    curve_table(&mut dir, &sel)?;
    let results = json!({
        "n": data.len(),
        "c_hat": sel.c_hat.to_string(),
        "folds": sel.folds,
    });
    dir.metadata("select-c", cfg, results)
}

pub fn run(cfg: &LogisticConfig, out: &Path) -> CliResult<()> {
    let (data, features) = data::regression(&cfg.data, cfg.seed)?;
    let (train, _test) = split(&data, cfg.train_fraction, &mut RngStream::new(cfg.seed, 1))?;
    let train = standardize(&train)?;
    let n = train.len();
    if let Some(&bad) = cfg.track.iter().find(|&&i| i >= n) {
        return Err(CliError::Config(format!("tracked row {bad} outside the {n} training rows")));
    }
    let grid = cfg.scoring.grid()?;
    let method = cfg.scoring.method();
    let fixed = cfg.c.as_deref().map(config::parse_concentration).transpose()?;
    let selection = match fixed {
        Some(_) => None,
        None => Some(select_c_regression(&train, cfg.scoring.folds, &grid, method, &RngStream::new(cfg.seed, 2))?),
    };
    let c: Concentration = fixed.or(selection.as_ref().map(|s| s.c_hat)).expect("c is fixed or selected");

    let horizon = cfg.horizon.unwrap_or(n + DEFAULT_GLM_FORWARD_STEPS);
    let mut tcfg = TrajectoryConfig::new(horizon, cfg.replicates, c);
    if let Some(s) = cfg.path_stride {
        tcfg = tcfg.with_paths(s);
    }
    let opts = GlmOptions {
        mode: cfg.mode.into(),
        tracked: cfg.track.clone(),
    };
    let glm = run_glm_mp(&train, &tcfg, &opts, &RngStream::new(cfg.seed, 3))?;
    if glm.samples.is_empty() {
        let first = glm.aborted.first().cloned();
        return Err(first.map_or_else(|| CliError::Numerical("no replicate completed".into()), Into::into));
    }

    let mut holdout = Vec::with_capacity(cfg.splits);
    for s in 0..cfg.splits as u64 {
        let (tr, te) = split(&data, cfg.train_fraction, &mut RngStream::new(cfg.seed, 100 + s))?;
        let te = te.ok_or_else(|| CliError::Config("hold-out splits need train_fraction below 1".into()))?;
        let scores = holdout_relative_scores(&tr, &te, fixed, cfg.scoring.folds, &grid, method, &RngStream::new(cfg.seed, 10_000 + s))?;
        holdout.push(scores);
    }
    let divergence = match cfg.divergence {
        Some(setup) => Some(exact_online_divergence(&train, horizon, c, setup.into(), &mut RngStream::new(cfg.seed, 4))?),
        None => None,
    };

    let mut dir = OutputDir::create(out, config::config_hash(cfg), cfg.seed)?;
    let names = coefficient_names(&features);
    let mut header = strings(["replicate"]);
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = glm
        .samples
        .iter()
        .map(|s| std::iter::once(s.replicate.to_string()).chain(s.beta.iter().map(|&b| num(b))).collect())
        .collect();
    dir.table("beta_posterior.csv", &header, &rows, &[("c", c.to_string())])?;

    let tracked_names: Vec<String> = cfg.track.iter().map(|i| format!("obs{i}")).collect();
    if !cfg.track.is_empty() {
        let mut header = strings(["replicate"]);
        header.extend(tracked_names.iter().cloned());
        let rows: Vec<Vec<String>> = glm
            .samples
            .iter()
            .map(|s| {
                std::iter::once(s.replicate.to_string())
                    .chain(s.conditional_means.iter().map(|&m| num(m)))
                    .collect()
            })
            .collect();
        dir.table("conditional_means.csv", &header, &rows, &[])?;
    }
    if cfg.path_stride.is_some() {
        let mut header = strings(["replicate", "step"]);
        header.extend(names.iter().cloned());
        header.extend(tracked_names.iter().cloned());
        let rows: Vec<Vec<String>> = glm
            .samples
            .iter()
            .flat_map(|s| {
                s.path.iter().map(move |p| {
                    let mut row = vec![s.replicate.to_string(), p.step.to_string()];
                    row.extend(p.beta.iter().map(|&b| num(b)));
                    row.extend(p.conditional_means.iter().map(|&m| num(m)));
                    row
                })
            })
            .collect();
        dir.table("glm_paths.csv", &header, &rows, &[])?;
    }
    if let Some(sel) = &selection {
        curve_table(&mut dir, sel)?;
    }
    let mut holdout_summary = serde_json::Value::Null;
    if !holdout.is_empty() {
        let rows: Vec<Vec<String>> = holdout
            .iter()
            .enumerate()
            .map(|(s, h)| {
                vec![
                    s.to_string(),
                    h.c_hat.to_string(),
                    num(h.mixture.value),
                    num(h.mixture.se),
                    num(h.parametric.value),
                    num(h.parametric.se),
                ]
            })
            .collect();
        let k = holdout.len() as f64;
        let mean = |f: &dyn Fn(&momentmp::regression::HoldoutScores) -> f64| holdout.iter().map(f).sum::<f64>() / k;
        let (mix, par) = (mean(&|h| h.mixture.value), mean(&|h| h.parametric.value));
        let se = |f: &dyn Fn(&momentmp::regression::HoldoutScores) -> f64, m: f64| {
            if holdout.len() < 2 {
                f64::NAN
            } else {
                (holdout.iter().map(|h| (f(h) - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            }
        };
        let (mix_se, par_se) = (se(&|h| h.mixture.value, mix), se(&|h| h.parametric.value, par));
        dir.table(
            "holdout_scores.csv",
            &strings(["split", "c_hat", "mixture", "mixture_se", "parametric", "parametric_se"]),
            &rows,
            &[("mean_mixture", num(mix)), ("mean_parametric", num(par))],
        )?;
        holdout_summary = json!({
            "splits": holdout.len(),
            "mean_mixture": mix,
            "se_mixture": mix_se,
            "mean_parametric": par,
            "se_parametric": par_se,
        });
    }
    if let Some(points) = &divergence {
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| vec![p.step.to_string(), num(p.exact_norm), num(p.online_norm), num(p.difference), num(p.relative())])
            .collect();
        dir.table(
            "divergence.csv",
            &strings(["step", "exact_norm", "online_norm", "difference", "relative"]),
            &rows,
            &[],
        )?;
    }

    let results = json!({
        "n_total": data.len(),
        "n_train": n,
        "horizon": horizon,
        "c": c.to_string(),
        "selected": selection.is_some(),
        "standardized": true,
        "coefficients": names,
        "mle": glm.fit.beta.iter().copied().collect::<Vec<f64>>(),
        "completed": glm.samples.len(),
        "aborted": glm.aborted.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "holdout": holdout_summary,
        "max_relative_divergence": divergence
            .as_ref()
            .map(|d| d.iter().map(|p| p.relative()).fold(0.0, f64::max)),
    });
    dir.metadata("logistic", cfg, results)
}
