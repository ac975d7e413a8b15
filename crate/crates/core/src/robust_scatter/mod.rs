//! High-breakdown multivariate location and scatter.
//!
//! Both estimators start from the same six deterministic initial subsets
//! ([`six_starts`]). [`detmcd`] concentrates each start with C-steps and keeps
//! the subset of smallest covariance determinant; [`dets`] runs biweight
//! S-iterations from each start and keeps the smallest M-scale. For small
//! samples DetMCD also concentrates every elemental subset.

mod mcd;
mod s_estimate;
mod starts;

pub use mcd::{
    c_step, c_step_with_h, concentrate, consistency_factor, default_h, detmcd, detmcd_with_h,
    h_for_alpha,
};
pub use s_estimate::{dets, dets_constant};
pub use starts::six_starts;

use crate::classical::RegressionFit;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{eigh, DataMatrix, SymmetricMatrix};

/// Robust location/scatter pair together with the subset that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate {
    pub method: Estimator,
    pub location: Vec<f64>,
    /// The scatter in use: consistency-corrected when `consistency_applied`.
    pub scatter: SymmetricMatrix,
    /// Scatter of the support before any consistency correction.
    pub raw_scatter: SymmetricMatrix,
    /// Row indices of the support, ascending.
    pub support: Vec<usize>,
    /// `det(raw_scatter)`.
    pub determinant: f64,
    pub h: usize,
    pub consistency_applied: bool,
    /// Set when an eigenvalue floor had to be applied to keep the scatter
    /// positive definite.
    pub degenerate: bool,
    pub iterations: usize,
}

impl ScatterEstimate {
    pub fn dim(&self) -> usize {
        self.location.len()
    }
}

/// Mean and maximum-likelihood (divisor `|idx|`) covariance of the rows `idx`.
pub(crate) fn subset_moments(m: &DataMatrix, idx: &[usize]) -> (Vec<f64>, SymmetricMatrix) {
    let p = m.ncols();
    let k = idx.len() as f64;
    let mut mu = vec![0.0; p];
    for &i in idx {
        for (a, v) in mu.iter_mut().zip(m.row(i)) {
            *a += v;
        }
    }
    mu.iter_mut().for_each(|v| *v /= k);
    let mut acc = vec![0.0; p * p];
    let mut c = vec![0.0; p];
    for &i in idx {
        for (j, v) in m.row(i).iter().enumerate() {
            c[j] = v - mu[j];
        }
        for a in 0..p {
            for b in a..p {
                acc[a * p + b] += c[a] * c[b];
            }
        }
    }
    (mu, SymmetricMatrix::from_fn(p, |a, b| acc[a * p + b] / k))
}

/// Subset estimate; a singular subset covariance is a rank collapse.
pub(crate) fn subset_estimate(
    m: &DataMatrix,
    mut idx: Vec<usize>,
    method: Estimator,
) -> Result<ScatterEstimate> {
    idx.sort_unstable();
    let (location, scatter) = subset_moments(m, &idx);
    let determinant = match scatter.cholesky() {
        Ok(ch) => ch.det(),
        Err(_) => return Err(Error::RankCollapse { support: idx }),
    };
    if !(determinant > 0.0) {
        return Err(Error::RankCollapse { support: idx });
    }
    Ok(ScatterEstimate {
        method,
        location,
        raw_scatter: scatter.clone(),
        scatter,
        h: idx.len(),
        support: idx,
        determinant,
        consistency_applied: false,
        degenerate: false,
        iterations: 0,
    })
}

/// Raises eigenvalues below `1e-12·trace` to that floor. Returns the
/// repaired matrix and whether anything changed.
pub(crate) fn floor_eigenvalues(s: &SymmetricMatrix) -> Result<(SymmetricMatrix, bool)> {
    let e = eigh(s)?;
    let trace: f64 = e.values.iter().map(|v| v.max(0.0)).sum();
    let floor = 1e-12 * trace.max(f64::MIN_POSITIVE);
    if e.values[0] >= floor {
        return Ok((s.clone(), false));
    }
    let vals: Vec<f64> = e.values.iter().map(|v| v.max(floor)).collect();
    Ok((e.reconstruct_with(&vals), true))
}

/// Regression coefficients from a joint scatter matrix: slopes solve
/// `C_xx b = c_xy` and the intercept matches the robust location.
/// Residuals are evaluated on `m`, whose column `dep` is the response.
pub fn scatter_to_regression(
    est: &ScatterEstimate,
    m: &DataMatrix,
    dep: usize,
) -> Result<RegressionFit> {
    let d = est.dim();
    if dep >= d || m.ncols() != d {
        return Err(Error::Shape(format!(
            "response column {dep} for a {d}-dimensional scatter and {}-column data",
            m.ncols()
        )));
    }
    let reg: Vec<usize> = (0..d).filter(|&j| j != dep).collect();
    let cxx = est.scatter.submatrix(&reg);
    let cxy: Vec<f64> = reg.iter().map(|&j| est.scatter.get(j, dep)).collect();
    let slopes = cxx
        .cholesky()
        .map_err(|_| Error::SingularDesign("regressor block of the scatter is singular".into()))?
        .solve(&cxy);
    let intercept = est.location[dep]
        - reg
            .iter()
            .zip(&slopes)
            .map(|(&j, b)| b * est.location[j])
            .sum::<f64>();
    let x = m.map_rows(reg.len(), |r, out| {
        for (o, &j) in out.iter_mut().zip(&reg) {
            *o = r[j];
        }
    })?;
    let y = m.column(dep);
    Ok(RegressionFit::from_coefficients(est.method, &x, &y, intercept, slopes))
}
