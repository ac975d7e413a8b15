use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{coefficient_name, HeteroMultiplier, NoiseShape, RegressorLaw, ScenarioConfig};
use crate::classical::hc3_stderr;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{mean, quantile, DataMatrix};
use crate::randgen::{splitmix64, RngStream};

/// Failed replications tolerated per estimator, as a fraction.
const MAX_FAILURE_RATE: f64 = 0.02;

/// One simulated data set together with the rows that were perturbed.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Observed (possibly contaminated) regressors.
    pub x: DataMatrix,
    pub y: Vec<f64>,
    /// Error-free regressors, column-wise.
    pub true_x: Vec<Vec<f64>>,
    /// Contaminated rows, one ascending list per contamination entry.
    pub masks: Vec<Vec<usize>>,
    /// Rows carrying the heteroscedastic multiplier.
    pub hetero_rows: Vec<usize>,
}

fn size_seed(seed: u64, n: usize) -> u64 {
    splitmix64(seed ^ n as u64)
}

fn estimator_tag(e: Estimator) -> u64 {
    1000 + Estimator::ALL.iter().position(|x| *x == e).unwrap_or(0) as u64
}

/// Draws replication `rep` of `cfg` at sample size `n`. Order of draws:
/// regressors, disturbances, heteroscedastic rows, contamination masks and
/// their errors in configuration order.
pub fn generate_sample(cfg: &ScenarioConfig, n: usize, rep: u64) -> Result<Sample> {
    let mut rng = RngStream::new(size_seed(cfg.seed, n), rep);
    draw_sample(cfg, n, &mut rng)
}

fn draw_sample(cfg: &ScenarioConfig, n: usize, rng: &mut RngStream) -> Result<Sample> {
    let p = cfg.dim();
    let mut cols = Vec::with_capacity(p);
    for law in &cfg.regressor_law {
        cols.push(match *law {
            RegressorLaw::Normal { .. } => rng.normal(0.0, 1.0, n)?,
            RegressorLaw::ChiSquare { df } => rng.chisq(df, n)?,
        });
    }
    if cfg.regressor_correlation != 0.0 {
        let l = cfg.correlation_matrix().cholesky()?;
        let mut z = vec![0.0; p];
        let mut out = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                z[j] = cols[j][i];
            }
            l.lower_mul(&z, &mut out);
            for j in 0..p {
                cols[j][i] = out[j];
            }
        }
    }
    for (col, law) in cols.iter_mut().zip(&cfg.regressor_law) {
        if let RegressorLaw::Normal { mean, sd } = *law {
            col.iter_mut().for_each(|v| *v = mean + sd * *v);
        }
    }

    let mut u = match cfg.noise_shape {
        NoiseShape::Normal => rng.normal(0.0, cfg.noise_sd, n)?,
        NoiseShape::ExpMedianZero => {
            let mut e = rng.exp_median_zero(n);
            e.iter_mut().for_each(|v| *v *= cfg.noise_sd);
            e
        }
    };
    let mut hetero_rows = Vec::new();
    if let Some(h) = &cfg.hetero_rule {
        hetero_rows = rng.contamination_mask(n, h.fraction)?;
        for &i in &hetero_rows {
            u[i] *= match h.multiplier {
                HeteroMultiplier::ExpNegX => (-cols[0][i]).exp(),
            };
        }
    }
    let y: Vec<f64> = (0..n)
        .map(|i| cfg.alpha + (0..p).map(|j| cfg.beta[j] * cols[j][i]).sum::<f64>() + u[i])
        .collect();

    let mut observed = cols.clone();
    let mut masks: Vec<Vec<usize>> = Vec::with_capacity(cfg.contamination.len());
    for c in &cfg.contamination {
        let excluded: Vec<usize> = match &c.disjoint_group {
            Some(g) => cfg
                .contamination
                .iter()
                .zip(&masks)
                .filter(|(o, _)| o.disjoint_group.as_ref() == Some(g))
                .flat_map(|(_, m)| m.iter().copied())
                .collect(),
            None => Vec::new(),
        };
        let mask = rng.contamination_mask_excluding(n, c.fraction, &excluded)?;
        let crate::simlab::ErrorLaw::Normal { mean, sd } = c.law;
        let err = rng.normal(mean, sd, mask.len())?;
        for (&i, e) in mask.iter().zip(err) {
            observed[c.target][i] += e;
        }
        masks.push(mask);
    }
    Ok(Sample {
        x: DataMatrix::from_columns(&observed)?,
        y,
        true_x: cols,
        masks,
        hetero_rows,
    })
}

/// Per-replication slope estimates for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub n: usize,
    pub estimators: Vec<Estimator>,
    /// `estimates[e][rep]`: slopes, or `None` if the fit failed.
    pub estimates: Vec<Vec<Option<Vec<f64>>>>,
    /// First failure message per estimator.
    pub first_error: Vec<Option<String>>,
    /// Gauss-Markov and HC3 slope standard errors of OLS, per replication.
    pub ols_se_gm: Vec<Option<Vec<f64>>>,
    pub ols_se_hc3: Vec<Option<Vec<f64>>>,
}

struct RepOutcome {
    fits: Vec<std::result::Result<Vec<f64>, String>>,
    se_gm: Option<Vec<f64>>,
    se_hc3: Option<Vec<f64>>,
}

fn one_replication(cfg: &ScenarioConfig, n: usize, rep: u64) -> Result<RepOutcome> {
    let sample = generate_sample(cfg, n, rep)?;
    let base = RngStream::new(size_seed(cfg.seed, n), rep);
    let mut out = RepOutcome {
        fits: Vec::with_capacity(cfg.estimators.len()),
        se_gm: None,
        se_hc3: None,
    };
    for &e in &cfg.estimators {
        let mut rng = base.derive(estimator_tag(e));
        match e.fit(&sample.x, &sample.y, &mut rng) {
            Ok(fit) => {
                if e == Estimator::Ols {
                    out.se_gm = fit.stderr_slopes.clone();
                    out.se_hc3 = hc3_stderr(&sample.x, &sample.y, &fit)
                        .ok()
                        .map(|se| se[1..].to_vec());
                }
                if fit.slopes.iter().all(|v| v.is_finite()) {
                    out.fits.push(Ok(fit.slopes));
                } else {
                    out.fits.push(Err("non-finite slope".into()));
                }
            }
            Err(err) => out.fits.push(Err(err.to_string())),
        }
    }
    Ok(out)
}

/// Runs every replication of `cfg` at size `n`. Replication `r` draws from
/// stream `r`, so results do not depend on the worker count.
pub fn run_replicates(
    cfg: &ScenarioConfig,
    n: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<ReplicateSet> {
    cfg.validate()?;
    let total = cfg.replications;
    let done = AtomicUsize::new(0);
    let outcomes: Vec<RepOutcome> = (0..total as u64)
        .into_par_iter()
        .map(|rep| {
            let r = one_replication(cfg, n, rep);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            r
        })
        .collect::<Result<_>>()?;
    let k = cfg.estimators.len();
    let mut set = ReplicateSet {
        n,
        estimators: cfg.estimators.clone(),
        estimates: vec![Vec::with_capacity(total); k],
        first_error: vec![None; k],
        ols_se_gm: Vec::with_capacity(total),
        ols_se_hc3: Vec::with_capacity(total),
    };
    for o in outcomes {
        for (e, fit) in o.fits.into_iter().enumerate() {
            match fit {
                Ok(s) => set.estimates[e].push(Some(s)),
                Err(msg) => {
                    set.first_error[e].get_or_insert(msg);
                    set.estimates[e].push(None);
                }
            }
        }
        set.ols_se_gm.push(o.se_gm);
        set.ols_se_hc3.push(o.se_hc3);
    }
    Ok(set)
}

/// Summary of one coefficient of one estimator across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: Estimator,
    pub coefficient: String,
    pub n: usize,
    /// Mean estimate minus the true coefficient.
    pub bias: f64,
    /// Root mean squared deviation from the true coefficient.
    pub rmse: f64,
    /// Empirical 2.5% and 97.5% quantiles of the estimates.
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean: f64,
    /// Standard deviation of the estimates (divisor `R − 1`).
    pub sd: f64,
    /// Successful replications `R`.
    pub replications: usize,
    pub seed: u64,
    /// Monte-Carlo standard error of `mean`.
    pub mc_se: f64,
    pub failures: usize,
    /// Mean Gauss-Markov standard error (OLS only).
    #[serde(default)]
    pub mean_se_gm: Option<f64>,
    /// Mean HC3 standard error (OLS only).
    #[serde(default)]
    pub mean_se_hc3: Option<f64>,
}

fn mean_se(v: &[Option<Vec<f64>>], j: usize) -> Option<f64> {
    let xs: Vec<f64> = v.iter().flatten().map(|s| s[j]).collect();
    (!xs.is_empty()).then(|| mean(&xs))
}

/// Aggregates a [`ReplicateSet`] into one row per estimator and coefficient.
pub fn summarize(cfg: &ScenarioConfig, set: &ReplicateSet) -> Result<Vec<MetricsRow>> {
    let total = cfg.replications;
    let mut rows = Vec::new();
    for (e, est) in set.estimators.iter().enumerate() {
        let ok: Vec<&Vec<f64>> = set.estimates[e].iter().flatten().collect();
        let failures = total - ok.len();
        if failures as f64 > MAX_FAILURE_RATE * total as f64 || ok.is_empty() {
            return Err(Error::TooManyFailures {
                failed: failures,
                total,
                detail: format!(
                    "{est} at n = {}: {}",
                    set.n,
                    set.first_error[e].as_deref().unwrap_or("no successful fits")
                ),
            });
        }
        for (j, &truth) in cfg.beta.iter().enumerate() {
            let v: Vec<f64> = ok.iter().map(|s| s[j]).collect();
            let r = v.len() as f64;
            let m = mean(&v);
            let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
            let sd = if v.len() > 1 { (ss / (r - 1.0)).sqrt() } else { 0.0 };
            let msd = v.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / r;
            let is_ols = *est == Estimator::Ols;
            rows.push(MetricsRow {
                estimator: *est,
                coefficient: coefficient_name(j),
                n: set.n,
                bias: m - truth,
                rmse: msd.sqrt(),
                ci_low: quantile(&v, 0.025)?,
                ci_high: quantile(&v, 0.975)?,
                mean: m,
                sd,
                replications: v.len(),
                seed: cfg.seed,
                mc_se: sd / r.sqrt(),
                failures,
                mean_se_gm: if is_ols { mean_se(&set.ols_se_gm, j) } else { None },
                mean_se_hc3: if is_ols { mean_se(&set.ols_se_hc3, j) } else { None },
            });
        }
    }
    Ok(rows)
}

/// Runs every sample size of `cfg` and returns its metrics rows.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<MetricsRow>> {
    run_scenario_with_progress(cfg, &|_, _, _| {})
}

/// As [`run_scenario`], reporting `(n, finished, total)` after each replication.
pub fn run_scenario_with_progress(
    cfg: &ScenarioConfig,
    progress: &(dyn Fn(usize, usize, usize) + Sync),
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let set = run_replicates(cfg, n, &|d, t| progress(n, d, t))?;
        rows.extend(summarize(cfg, &set)?);
    }
    Ok(rows)
}
