//! Non-robust regression and the classical errors-in-variables comparators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{
    self, covariance, eigh, mean, ranks, sample_covariance, sd, Cholesky, DataMatrix,
    SymmetricMatrix,
};

/// Fitted linear model `y = intercept + xᵀ slopes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: Estimator,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// `None` where the method has no analytic standard error.
    pub stderr_intercept: Option<f64>,
    pub stderr_slopes: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// False only when an iterative method stopped at its iteration cap.
    pub converged: bool,
}

impl RegressionFit {
    /// Residuals and `R² = max(0, 1 − RSS/TSS)` for given coefficients.
    pub fn from_coefficients(
        method: Estimator,
        x: &DataMatrix,
        y: &[f64],
        intercept: f64,
        slopes: Vec<f64>,
    ) -> Self {
        let residuals: Vec<f64> = x
            .rows()
            .zip(y)
            .map(|(r, yi)| yi - intercept - numerics::dot(r, &slopes))
            .collect();
        let r_squared = r_squared(y, &residuals);
        Self {
            method,
            intercept,
            slopes,
            stderr_intercept: None,
            stderr_slopes: None,
            residuals,
            r_squared,
            converged: true,
        }
    }

    pub fn slope(&self) -> f64 {
        self.slopes[0]
    }
}

fn r_squared(y: &[f64], residuals: &[f64]) -> f64 {
    let my = mean(y);
    let tss: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    if tss > 0.0 {
        (1.0 - rss / tss).max(0.0)
    } else {
        0.0
    }
}

fn check_len(x: &DataMatrix, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} regressor rows but {} responses",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// `XᵀX` and `Xᵀy` for the design with a leading intercept column.
fn normal_equations(x: &DataMatrix, y: &[f64]) -> (SymmetricMatrix, Vec<f64>) {
    let k = x.ncols() + 1;
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut row = vec![1.0; k];
    for (r, &yi) in x.rows().zip(y) {
        row[1..].copy_from_slice(r);
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in i..k {
                xtx[i * k + j] += row[i] * row[j];
            }
        }
    }
    (SymmetricMatrix::from_fn(k, |i, j| xtx[i * k + j]), xty)
}

fn design_factor(x: &DataMatrix, y: &[f64]) -> Result<(Cholesky, Vec<f64>)> {
    let (xtx, xty) = normal_equations(x, y);
    let chol = xtx.cholesky().map_err(|_| {
        Error::SingularDesign("design matrix with intercept is rank deficient".into())
    })?;
    let coef = chol.solve(&xty);
    Ok((chol, coef))
}

/// Least squares with intercept and Gauss-Markov standard errors.
pub fn ols_fit(x: &DataMatrix, y: &[f64]) -> Result<RegressionFit> {
    check_len(x, y)?;
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p + 1 {
        return Err(Error::InsufficientData { n, p });
    }
    let (chol, coef) = design_factor(x, y)?;
    let mut fit =
        RegressionFit::from_coefficients(Estimator::Ols, x, y, coef[0], coef[1..].to_vec());
    let rss: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let sigma2 = rss / (n - p - 1) as f64;
    let inv = chol.inverse();
    let se: Vec<f64> = (0..=p).map(|j| (sigma2 * inv.get(j, j)).sqrt()).collect();
    fit.stderr_intercept = Some(se[0]);
    fit.stderr_slopes = Some(se[1..].to_vec());
    Ok(fit)
}

/// HC3 standard errors for an OLS fit, intercept first.
pub fn hc3_stderr(x: &DataMatrix, y: &[f64], fit: &RegressionFit) -> Result<Vec<f64>> {
    check_len(x, y)?;
    if fit.residuals.len() != y.len() {
        return Err(Error::Shape("fit residuals do not match the sample".into()));
    }
    let k = x.ncols() + 1;
    let (xtx, _) = normal_equations(x, y);
    let bread = xtx
        .inverse()
        .map_err(|_| Error::SingularDesign("X'X is singular".into()))?;
    let mut meat = vec![0.0; k * k];
    let mut row = vec![1.0; k];
    for (i, (r, e)) in x.rows().zip(&fit.residuals).enumerate() {
        row[1..].copy_from_slice(r);
        let h = numerics::dot(&row, &bread.matvec(&row));
        if h >= 1.0 - 1e-12 {
            return Err(Error::LeverageSingularity { index: i, leverage: h });
        }
        let w = e * e / ((1.0 - h) * (1.0 - h));
        for a in 0..k {
            for b in a..k {
                meat[a * k + b] += w * row[a] * row[b];
            }
        }
    }
    let meat = SymmetricMatrix::from_fn(k, |a, b| meat[a * k + b]);
    let cov = meat.congruence(&bread.to_rows());
    Ok((0..k).map(|j| cov.get(j, j).sqrt()).collect())
}

fn bivariate_check(x: &[f64], y: &[f64], min_n: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} vs {} observations", x.len(), y.len())));
    }
    if x.len() < min_n {
        return Err(Error::InsufficientData { n: x.len(), p: 1 });
    }
    Ok(())
}

fn bivariate_fit(method: Estimator, x: &[f64], y: &[f64], slope: f64) -> Result<RegressionFit> {
    let intercept = mean(y) - slope * mean(x);
    let xm = DataMatrix::column_vector(x)?;
    Ok(RegressionFit::from_coefficients(method, &xm, y, intercept, vec![slope]))
}

/// Orthogonal (total least squares) line: normal vector is the eigenvector
/// of the smallest eigenvalue of cov(x, y).
pub fn orthogonal_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    bivariate_check(x, y, 3)?;
    let m = DataMatrix::from_columns(&[x.to_vec(), y.to_vec()])?;
    let e = eigh(&sample_covariance(&m)?)?;
    let v = &e.vectors[0];
    if v[1].abs() < 1e-12 {
        return Err(Error::DegenerateOrientation);
    }
    bivariate_fit(Estimator::Orthogonal, x, y, -v[0] / v[1])
}

/// Geometric-mean regression: `sign(r)·sd(y)/sd(x)`.
pub fn geom_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    bivariate_check(x, y, 3)?;
    let sx = sd(x);
    if !(sx > 0.0) {
        return Err(Error::DegenerateSample("regressor has zero variance".into()));
    }
    let c = covariance(x, y);
    if c == 0.0 || (c / (sx * sd(y))).abs() < 1e-12 {
        return Err(Error::SignIndeterminate);
    }
    bivariate_fit(Estimator::Geometric, x, y, c.signum() * sd(y) / sx)
}

/// Instrument built from the second power of the observed regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentInstrument {
    /// `g = w²`
    #[default]
    RawSquare,
    /// `g = (w − w̄)²`
    CenteredSquare,
}

/// Simple IV estimate `cov(g, y)/cov(g, w)` for instrument `g`.
pub fn iv_fit(
    method: Estimator,
    instrument: &[f64],
    w: &[f64],
    y: &[f64],
) -> Result<RegressionFit> {
    if instrument.len() != w.len() || w.len() != y.len() {
        return Err(Error::Shape("instrument, regressor and response lengths differ".into()));
    }
    let cgw = covariance(instrument, w);
    if !(cgw.abs() >= 1e-10 * sd(instrument) * sd(w)) {
        return Err(Error::WeakInstrument(cgw.abs()));
    }
    bivariate_fit(method, w, y, covariance(instrument, y) / cgw)
}

/// Higher-moment IV using the default [`MomentInstrument::RawSquare`].
pub fn moment_iv_fit(w: &[f64], y: &[f64]) -> Result<RegressionFit> {
    moment_iv_fit_with(w, y, MomentInstrument::default())
}

pub fn moment_iv_fit_with(
    w: &[f64],
    y: &[f64],
    instrument: MomentInstrument,
) -> Result<RegressionFit> {
    bivariate_check(w, y, 10)?;
    let center = match instrument {
        MomentInstrument::RawSquare => 0.0,
        MomentInstrument::CenteredSquare => mean(w),
    };
    let g: Vec<f64> = w.iter().map(|v| (v - center).powi(2)).collect();
    iv_fit(Estimator::MomentIv, &g, w, y)
}

/// IV with the (average) ranks of the observed regressor as instrument.
pub fn rank_iv_fit(w: &[f64], y: &[f64]) -> Result<RegressionFit> {
    bivariate_check(w, y, 10)?;
    if w.iter().all(|v| *v == w[0]) {
        return Err(Error::DegenerateInstrument("regressor is constant".into()));
    }
    iv_fit(Estimator::RankIv, &ranks(w), w, y)
}

/// Probability limit of the OLS slope (true slope 1) when a fraction `frac`
/// of the regressor observations carry an additive N(mu_u, sd_u) error.
pub fn attenuation_limit(var_x: f64, frac: f64, mu_u: f64, sd_u: f64) -> f64 {
    debug_assert!((0.0..0.5).contains(&frac));
    let err_var = frac * (sd_u * sd_u + mu_u * mu_u) - frac * frac * mu_u * mu_u;
    var_x / (var_x + err_var)
}
