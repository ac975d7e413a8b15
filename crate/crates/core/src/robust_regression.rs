//! High-breakdown regression: the biweight S-estimator found by a
//! random-subset search, and the fixed-scale MM refinement step.

use crate::biweight::{efficiency_constant, m_scale, mean_rho, regression_c50, weight};
use crate::classical::RegressionFit;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{self, DataMatrix, SymmetricMatrix};
use crate::randgen::RngStream;

/// M-scale breakdown level.
const B: f64 = 0.5;
const REFINE_TOL: f64 = 1e-10;

/// Search effort for [`s_regression`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SRegressionOptions {
    pub n_subsets: usize,
    /// Improvement steps applied to every elemental fit.
    pub k_steps: usize,
    /// Candidates refined to convergence.
    pub n_best: usize,
    pub max_refine: usize,
}

impl Default for SRegressionOptions {
    fn default() -> Self {
        Self {
            n_subsets: 500,
            k_steps: 2,
            n_best: 5,
            max_refine: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SRegressionState {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub objective: f64,
    pub converged: bool,
}

/// Residual M-scale at 50% breakdown for biweight constant `c`.
pub fn residual_mscale(residuals: &[f64], c: f64) -> f64 {
    m_scale(residuals, c, B)
}

fn residuals(x: &DataMatrix, y: &[f64], coef: &[f64]) -> Vec<f64> {
    x.rows()
        .zip(y)
        .map(|(r, yi)| yi - coef[0] - numerics::dot(r, &coef[1..]))
        .collect()
}

/// Weighted least squares with intercept; `None` if the weighted design is singular.
fn wls(x: &DataMatrix, y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let k = x.ncols() + 1;
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut row = vec![1.0; k];
    for ((r, &yi), &wi) in x.rows().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        row[1..].copy_from_slice(r);
        for i in 0..k {
            xty[i] += wi * row[i] * yi;
            for j in i..k {
                xtx[i * k + j] += wi * row[i] * row[j];
            }
        }
    }
    let a = SymmetricMatrix::from_fn(k, |i, j| xtx[i * k + j]);
    let coef = a.cholesky().ok()?.solve(&xty);
    coef.iter().all(|v| v.is_finite()).then_some(coef)
}

/// Exact fit through `p + 1` rows, solved on centered data.
fn elemental_fit(x: &DataMatrix, y: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let p = x.ncols();
    let k = idx.len() as f64;
    let mut xm = vec![0.0; p];
    let mut ym = 0.0;
    for &i in idx {
        for (a, v) in xm.iter_mut().zip(x.row(i)) {
            *a += v / k;
        }
        ym += y[i] / k;
    }
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut c = vec![0.0; p];
    for &i in idx {
        for j in 0..p {
            c[j] = x.get(i, j) - xm[j];
        }
        let yc = y[i] - ym;
        for a in 0..p {
            xty[a] += c[a] * yc;
            for b in a..p {
                xtx[a * p + b] += c[a] * c[b];
            }
        }
    }
    let a = SymmetricMatrix::from_fn(p, |i, j| xtx[i * p + j]);
    let beta = a.cholesky().ok()?.solve(&xty);
    if !beta.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut coef = Vec::with_capacity(p + 1);
    coef.push(ym - numerics::dot(&xm, &beta));
    coef.extend(beta);
    Some(coef)
}

struct Candidate {
    coef: Vec<f64>,
    scale: f64,
    order: usize,
}

/// One improvement step: scale of current residuals, then WLS with biweight
/// weights at that scale. Returns the new coefficients with the scale that
/// generated their weights.
fn i_step(x: &DataMatrix, y: &[f64], coef: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
    let r = residuals(x, y, coef);
    let s = residual_mscale(&r, c);
    if s == 0.0 {
        return Some((coef.to_vec(), 0.0));
    }
    let w: Vec<f64> = r.iter().map(|ri| weight(ri / s, c)).collect();
    wls(x, y, &w).map(|next| (next, s))
}

fn refine(
    x: &DataMatrix,
    y: &[f64],
    mut coef: Vec<f64>,
    c: f64,
    cap: usize,
) -> (Vec<f64>, f64, bool) {
    let mut scale = residual_mscale(&residuals(x, y, &coef), c);
    for _ in 0..cap {
        if scale == 0.0 {
            return (coef, 0.0, true);
        }
        let Some((next, _)) = i_step(x, y, &coef, c) else {
            return (coef, scale, true);
        };
        let next_scale = residual_mscale(&residuals(x, y, &next), c);
        if next_scale > scale {
            return (coef, scale, true);
        }
        let done = scale - next_scale <= REFINE_TOL * scale;
        coef = next;
        scale = next_scale;
        if done {
            return (coef, scale, true);
        }
    }
    (coef, scale, false)
}

/// Biweight S-regression at 50% breakdown by random elemental subsets.
pub fn s_regression(
    x: &DataMatrix,
    y: &[f64],
    opts: &SRegressionOptions,
    rng: &mut RngStream,
) -> Result<SRegressionState> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Shape(format!("{n} regressor rows but {} responses", y.len())));
    }
    if n <= 2 * (p + 1) {
        return Err(Error::InsufficientData { n, p });
    }
    if opts.n_subsets == 0 || opts.n_best == 0 {
        return Err(Error::Parameter("S-regression needs at least one subset and one candidate".into()));
    }
    let c = regression_c50();
    let mut best: Vec<Candidate> = Vec::with_capacity(opts.n_best + 1);
    let mut any = false;
    for order in 0..opts.n_subsets {
        let idx = rng.distinct_indices(n, p + 1);
        let Some(mut coef) = elemental_fit(x, y, &idx) else {
            continue;
        };
        any = true;
        for _ in 0..opts.k_steps {
            match i_step(x, y, &coef, c) {
                Some((next, s)) if s > 0.0 => coef = next,
                _ => break,
            }
        }
        let r = residuals(x, y, &coef);
        if best.len() == opts.n_best {
            let worst = best[best.len() - 1].scale;
            if worst == 0.0 || mean_rho(&r, worst, c) >= B {
                continue;
            }
        }
        let scale = residual_mscale(&r, c);
        let pos = best
            .iter()
            .position(|b| scale < b.scale)
            .unwrap_or(best.len());
        best.insert(pos, Candidate { coef, scale, order });
        best.truncate(opts.n_best);
    }
    if !any {
        return Err(Error::DegenerateDesign(
            "every elemental subset was singular".into(),
        ));
    }
    let mut winner: Option<(Vec<f64>, f64, bool, usize)> = None;
    for cand in best {
        let (coef, scale, converged) = refine(x, y, cand.coef, c, opts.max_refine);
        let better = match &winner {
            None => true,
            Some((_, s, _, o)) => scale < *s || (scale == *s && cand.order < *o),
        };
        if better {
            winner = Some((coef, scale, converged, cand.order));
        }
    }
    let (coefficients, scale, converged, _) = winner.expect("at least one candidate");
    Ok(SRegressionState {
        coefficients,
        objective: scale,
        scale,
        converged,
    })
}

/// Fixed-scale biweight objective `Σ ρ(r_i / σ)`.
pub fn mm_objective(x: &DataMatrix, y: &[f64], coef: &[f64], scale: f64, c: f64) -> f64 {
    residuals(x, y, coef)
        .iter()
        .map(|r| crate::biweight::rho(r / scale, c))
        .sum()
}

/// MM refinement from `initial` at the requested Gaussian efficiency.
pub fn mm_step(
    x: &DataMatrix,
    y: &[f64],
    initial: &SRegressionState,
    efficiency: f64,
) -> Result<RegressionFit> {
    mm_step_traced(x, y, initial, efficiency).map(|(fit, _)| fit)
}

/// [`mm_step`] that also returns the objective after every iteration,
/// starting with the objective at `initial`.
pub fn mm_step_traced(
    x: &DataMatrix,
    y: &[f64],
    initial: &SRegressionState,
    efficiency: f64,
) -> Result<(RegressionFit, Vec<f64>)> {
    const MAX_ITER: usize = 500;
    if !(efficiency > 0.0 && efficiency < 1.0) {
        return Err(Error::Parameter(format!("efficiency {efficiency} outside (0, 1)")));
    }
    if initial.coefficients.len() != x.ncols() + 1 {
        return Err(Error::Shape(format!(
            "{} initial coefficients for {} regressors",
            initial.coefficients.len(),
            x.ncols()
        )));
    }
    let finish = |coef: Vec<f64>, converged: bool| {
        let mut fit =
            RegressionFit::from_coefficients(Estimator::MmFinal, x, y, coef[0], coef[1..].to_vec());
        fit.converged = converged;
        fit
    };
    if initial.scale == 0.0 {
        return Ok((finish(initial.coefficients.clone(), true), vec![0.0]));
    }
    if !(initial.scale > 0.0) {
        return Err(Error::Parameter(format!("MM scale {} must be positive", initial.scale)));
    }
    let c = efficiency_constant(efficiency);
    let s = initial.scale;
    let mut coef = initial.coefficients.clone();
    let mut trace = vec![mm_objective(x, y, &coef, s, c)];
    for _ in 0..MAX_ITER {
        let r = residuals(x, y, &coef);
        let w: Vec<f64> = r.iter().map(|ri| weight(ri / s, c)).collect();
        let next = wls(x, y, &w).ok_or_else(|| {
            Error::NumericalFailure("MM weighted design became singular".into())
        })?;
        let delta = next
            .iter()
            .zip(&coef)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let size = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        coef = next;
        trace.push(mm_objective(x, y, &coef, s, c));
        if delta <= REFINE_TOL * (1.0 + size) {
            return Ok((finish(coef, true), trace));
        }
    }
    Ok((finish(coef, false), trace))
}
