use std::path::Path;

use momentmp::families::inverse_logit;
use momentmp::regression::{RegressionDataset, ResponseKind};
use momentmp::{Dataset, Normal, NormalParams, ParametricFamily, RngStream, SkewNormalParams};
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Dgp, RegressionSource, SyntheticLogistic, UnivariateSource};
use crate::error::{CliError, CliResult};

pub fn generate(dgp: &Dgp, n: usize, rng: &mut RngStream) -> CliResult<Vec<f64>> {
    match *dgp {
        Dgp::Normal { mean, variance } => {
            let p = NormalParams::new(mean, variance)?;
            Ok((0..n).map(|_| Normal.sample(&p, rng)).collect())
        }
        Dgp::SkewNormal { xi, omega, alpha } => {
            let p = SkewNormalParams::new(xi, omega, alpha)?;
            Ok((0..n).map(|_| p.sample(rng)).collect())
        }
    }
}

/// Loads the univariate sample. Generated data use stream 0 of `seed`.
pub fn univariate(src: &UnivariateSource, seed: u64) -> CliResult<Dataset> {
    let values = match (&src.dgp, &src.csv) {
        (Some(dgp), None) => {
            let n = src.n.ok_or_else(|| CliError::Config("`n` is required with `dgp`".into()))?;
            generate(dgp, n, &mut RngStream::new(seed, 0))?
        }
        (None, Some(path)) => {
            let column = src
                .column
                .as_deref()
                .ok_or_else(|| CliError::Config("`column` is required with `csv`".into()))?;
            let table = read_table(path)?;
            table.column(column)?
        }
        _ => return Err(CliError::Config("give exactly one of `dgp` or `csv`".into())),
    };
    Dataset::new(values).map_err(|e| CliError::Data(e.to_string()))
}

/// Numeric CSV with a header row; `#` lines are skipped.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let j = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("no column named {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| CliError::Data(format!("row {}: {field:?} is not a number", line + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    Ok(Table { headers, rows })
}

fn synthetic(spec: &SyntheticLogistic, rng: &mut RngStream) -> CliResult<(Vec<Vec<f64>>, Vec<f64>)> {
    if spec.coefficients.is_empty() {
        return Err(CliError::Config("synthetic model needs at least an intercept".into()));
    }
    let q = spec.coefficients.len() - 1;
    let mut features = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let f: Vec<f64> = (0..q).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)).collect();
        let eta = spec.coefficients[0] + f.iter().zip(&spec.coefficients[1..]).map(|(a, b)| a * b).sum::<f64>();
        y.push(if rng.uniform() < inverse_logit(eta) { 1.0 } else { 0.0 });
        features.push(f);
    }
    Ok((features, y))
}

/// Binary-response design with an intercept, plus the feature names.
pub fn regression(src: &RegressionSource, seed: u64) -> CliResult<(RegressionDataset, Vec<String>)> {
    let (features, y, names) = match (&src.csv, &src.synthetic) {
        (Some(path), None) => {
            let target = src
                .target
                .as_deref()
                .ok_or_else(|| CliError::Config("`target` is required with `csv`".into()))?;
            if src.features.is_empty() {
                return Err(CliError::Config("`features` must name at least one column".into()));
            }
            let table = read_table(path)?;
            let y = table.column(target)?;
            let cols = src
                .features
                .iter()
                .map(|f| table.column(f))
                .collect::<CliResult<Vec<_>>>()?;
            let features = (0..y.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
            (features, y, src.features.clone())
        }
        (None, Some(spec)) => {
            let (features, y) = synthetic(spec, &mut RngStream::new(seed, 0))?;
            let names = (1..spec.coefficients.len()).map(|j| format!("x{j}")).collect();
            (features, y, names)
        }
        _ => return Err(CliError::Config("give exactly one of `csv` or `synthetic`".into())),
    };
    let data = RegressionDataset::from_features(&features, y, ResponseKind::Binary).map_err(|e| match e {
        momentmp::Error::RejectedInput(m) => CliError::Data(m),
        other => other.into(),
    })?;
    Ok((data, names))
}
