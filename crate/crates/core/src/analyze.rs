//! Real-data pipeline: CSV ingestion, OLS versus DetMCD fits, and a paired
//! case-resampling bootstrap.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{ols_fit, RegressionFit};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{mean, DataMatrix};
use crate::randgen::{RngStream, DEFAULT_SEED};
use crate::robust_scatter::{detmcd, scatter_to_regression};
use crate::simlab::{coefficient_name, format_sig, OutputFormat};

/// Largest tolerated fraction of failed bootstrap resamples.
const MAX_BOOT_FAILURES: f64 = 0.05;

/// Which columns to read and how to transform them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub response: String,
    pub regressors: Vec<String>,
    /// Columns replaced by their natural logarithm.
    pub log_transform: BTreeSet<String>,
    /// Drop rows with a value ≤ 0 in a logged column instead of failing.
    pub drop_nonpositive: bool,
}

impl ColumnSpec {
    pub fn new(response: &str, regressors: &[&str]) -> Self {
        Self {
            response: response.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            log_transform: BTreeSet::new(),
            drop_nonpositive: true,
        }
    }

    /// Logs the response and every regressor.
    pub fn log_all(mut self) -> Self {
        self.log_transform = self.columns().into_iter().collect();
        self
    }

    pub fn columns(&self) -> Vec<String> {
        let mut c = vec![self.response.clone()];
        c.extend(self.regressors.iter().cloned());
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::Parameter("at least one regressor is required".into()));
        }
        if self.regressors.contains(&self.response) {
            return Err(Error::Parameter(format!(
                "response '{}' is also listed as a regressor",
                self.response
            )));
        }
        let cols = self.columns();
        if let Some(c) = self.log_transform.iter().find(|c| !cols.contains(c)) {
            return Err(Error::Parameter(format!("log requested for unselected column '{c}'")));
        }
        Ok(())
    }
}

/// Result of [`ingest_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub x: DataMatrix,
    pub y: Vec<f64>,
    pub rows_read: usize,
    /// Rows removed for missing, non-numeric or non-positive (logged) values.
    pub dropped: usize,
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("NA") {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads the selected columns of a headed CSV file with listwise deletion.
pub fn ingest_csv(path: &Path, spec: &ColumnSpec) -> Result<Ingested> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols = spec.columns();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::Schema(format!("column '{c}' not found in {}", path.display())))
        })
        .collect::<Result<_>>()?;
    let logged: Vec<bool> = cols.iter().map(|c| spec.log_transform.contains(c)).collect();
    let (mut y, mut xs) = (Vec::new(), Vec::new());
    let (mut rows_read, mut dropped) = (0, 0);
    'rows: for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        rows_read += 1;
        let mut vals = Vec::with_capacity(cols.len());
        for (k, &j) in idx.iter().enumerate() {
            let Some(mut v) = rec.get(j).and_then(parse_cell) else {
                dropped += 1;
                continue 'rows;
            };
            if logged[k] {
                if v <= 0.0 {
                    if spec.drop_nonpositive {
                        dropped += 1;
                        continue 'rows;
                    }
                    return Err(Error::DegenerateData(format!(
                        "non-positive value {v} in logged column '{}' (data row {})",
                        cols[k],
                        line + 1
                    )));
                }
                v = v.ln();
            }
            vals.push(v);
        }
        y.push(vals[0]);
        xs.extend_from_slice(&vals[1..]);
    }
    if y.is_empty() {
        return Err(Error::EmptyData { dropped });
    }
    Ok(Ingested {
        x: DataMatrix::new(y.len(), spec.regressors.len(), xs)?,
        y,
        rows_read,
        dropped,
    })
}

/// Paired comparison against a second estimator on the same resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub other: Estimator,
    pub other_estimate: f64,
    /// `estimate − other_estimate`.
    pub difference: f64,
    pub se_difference: f64,
}

/// Bootstrap summary for one slope coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub estimator: Estimator,
    pub coefficient: String,
    pub estimate: f64,
    pub se_classical: Option<f64>,
    pub se_bootstrap: f64,
    /// Successful resamples.
    pub n_boot: usize,
    pub failures: usize,
    pub comparison: Option<Comparison>,
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// A fit together with its classical slope standard errors, if any.
struct Fitted {
    fit: RegressionFit,
    se: Option<Vec<f64>>,
}

/// DetMCD regression; its classical standard errors are the Gauss-Markov
/// errors of OLS restricted to the MCD support.
fn fit_with_se(e: Estimator, x: &DataMatrix, y: &[f64], rng: &mut RngStream) -> Result<Fitted> {
    match e {
        Estimator::DetMcd => {
            let joint = x.with_column(y)?;
            let est = detmcd(&joint, 0.5)?;
            let fit = scatter_to_regression(&est, &joint, x.ncols())?;
            let ys: Vec<f64> = est.support.iter().map(|&i| y[i]).collect();
            let se = ols_fit(&x.select_rows(&est.support), &ys)
                .ok()
                .and_then(|f| f.stderr_slopes);
            Ok(Fitted { fit, se })
        }
        _ => {
            let fit = e.fit(x, y, rng)?;
            let se = fit.stderr_slopes.clone();
            Ok(Fitted { fit, se })
        }
    }
}

fn estimator_tag(e: Estimator) -> u64 {
    2000 + Estimator::ALL.iter().position(|x| *x == e).unwrap_or(0) as u64
}

/// Pairs bootstrap of `estimator`'s slopes. Resample `b` draws from stream
/// `b` of `seed`, so the result does not depend on the worker count. With
/// `compare`, both estimators are refitted on every resample.
pub fn pairs_bootstrap(
    x: &DataMatrix,
    y: &[f64],
    estimator: Estimator,
    compare: Option<Estimator>,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<BootstrapReport>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} regressor rows but {} responses", y.len())));
    }
    if n < 20 {
        return Err(Error::InsufficientData { n, p: x.ncols() });
    }
    if n_boot < 100 {
        return Err(Error::Parameter(format!("n_boot = {n_boot}; at least 100 required")));
    }
    let base = RngStream::new(seed, u64::MAX);
    let main = fit_with_se(estimator, x, y, &mut base.derive(estimator_tag(estimator)))?;
    let other = compare
        .map(|c| fit_with_se(c, x, y, &mut base.derive(estimator_tag(c))))
        .transpose()?;

    let draws: Vec<Option<(Vec<f64>, Option<Vec<f64>>)>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
            let xb = x.select_rows(&idx);
            let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let a = estimator
                .fit(&xb, &yb, &mut rng.derive(estimator_tag(estimator)))
                .ok()?
                .slopes;
            let c = match compare {
                Some(c) => Some(c.fit(&xb, &yb, &mut rng.derive(estimator_tag(c))).ok()?.slopes),
                None => None,
            };
            let finite = a.iter().chain(c.iter().flatten()).all(|v| v.is_finite());
            finite.then_some((a, c))
        })
        .collect();
    let ok: Vec<_> = draws.into_iter().flatten().collect();
    let failures = n_boot - ok.len();
    if failures as f64 > MAX_BOOT_FAILURES * n_boot as f64 {
        return Err(Error::BootstrapInstability {
            failed: failures,
            total: n_boot,
        });
    }
    Ok((0..x.ncols())
        .map(|j| {
            let a: Vec<f64> = ok.iter().map(|(s, _)| s[j]).collect();
            let comparison = compare.zip(other.as_ref()).map(|(c, of)| {
                let d: Vec<f64> = ok
                    .iter()
                    .map(|(s, t)| s[j] - t.as_ref().expect("paired fit")[j])
                    .collect();
                Comparison {
                    other: c,
                    other_estimate: of.fit.slopes[j],
                    difference: main.fit.slopes[j] - of.fit.slopes[j],
                    se_difference: sd(&d),
                }
            });
            BootstrapReport {
                estimator,
                coefficient: coefficient_name(j),
                estimate: main.fit.slopes[j],
                se_classical: main.se.as_ref().map(|s| s[j]),
                se_bootstrap: sd(&a),
                n_boot: ok.len(),
                failures,
                comparison,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub estimator: Estimator,
    pub compare: Estimator,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::DetMcd,
            compare: Estimator::Ols,
            n_boot: 1000,
            seed: DEFAULT_SEED,
        }
    }
}

/// Point estimates of one method on the full data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub estimator: Estimator,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub se_classical: Option<Vec<f64>>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub dataset: String,
    pub response: String,
    pub regressors: Vec<String>,
    pub n: usize,
    pub rows_read: usize,
    pub dropped: usize,
    pub seed: u64,
    pub fits: Vec<FitSummary>,
    pub bootstrap: Vec<BootstrapReport>,
}

/// Fits the comparison (OLS) and robust estimators on an ingested file and
/// bootstraps the robust slopes and their difference from the comparison.
pub fn analyze_dataset(
    path: &Path,
    spec: &ColumnSpec,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let data = ingest_csv(path, spec)?;
    let mut fits = Vec::new();
    let base = RngStream::new(opts.seed, u64::MAX);
    for e in [opts.compare, opts.estimator] {
        let f = fit_with_se(e, &data.x, &data.y, &mut base.derive(estimator_tag(e)))?;
        fits.push(FitSummary {
            estimator: e,
            intercept: f.fit.intercept,
            slopes: f.fit.slopes,
            se_classical: f.se,
            r_squared: f.fit.r_squared,
        });
    }
    let bootstrap = pairs_bootstrap(
        &data.x,
        &data.y,
        opts.estimator,
        Some(opts.compare),
        opts.n_boot,
        opts.seed,
    )?;
    Ok(AnalysisReport {
        dataset: path.display().to_string(),
        response: spec.response.clone(),
        regressors: spec.regressors.clone(),
        n: data.y.len(),
        rows_read: data.rows_read,
        dropped: data.dropped,
        seed: opts.seed,
        fits,
        bootstrap,
    })
}

/// Renders a report as JSON or as a flat CSV with one line per statistic.
pub fn render_report(report: &AnalysisReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        OutputFormat::Csv => {
            let g = |v: f64| format_sig(v, 6);
            let mut out = String::from("row,coefficient,estimate,se_classical,se_bootstrap\n");
            for f in &report.fits {
                for (j, b) in f.slopes.iter().enumerate() {
                    let se = f.se_classical.as_ref().map(|s| g(s[j])).unwrap_or_default();
                    let boot = report
                        .bootstrap
                        .iter()
                        .find(|r| r.estimator == f.estimator && r.coefficient == coefficient_name(j))
                        .map(|r| g(r.se_bootstrap))
                        .unwrap_or_default();
                    writeln!(out, "{},{},{},{se},{boot}", f.estimator, coefficient_name(j), g(*b))
                        .expect("writing to a String");
                }
            }
            for r in &report.bootstrap {
                if let Some(c) = &r.comparison {
                    writeln!(
                        out,
                        "{} - {},{},{},,{}",
                        r.estimator,
                        c.other,
                        r.coefficient,
                        g(c.difference),
                        g(c.se_difference)
                    )
                    .expect("writing to a String");
                }
            }
            writeln!(out, "# n = {}, dropped = {}, seed = {}", report.n, report.dropped, report.seed)
                .expect("writing to a String");
            Ok(out)
        }
    }
}
