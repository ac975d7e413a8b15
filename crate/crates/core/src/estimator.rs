//! Estimator tags and a uniform fitting entry point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{geom_fit, moment_iv_fit, ols_fit, orthogonal_fit, rank_iv_fit, RegressionFit};
use crate::error::{Error, Result};
use crate::numerics::DataMatrix;
use crate::randgen::RngStream;
use crate::robust_regression::{mm_step, s_regression, SRegressionOptions};
use crate::robust_scatter::{detmcd, dets, scatter_to_regression};

/// Gaussian efficiency of the MM refinement step.
pub const MM_EFFICIENCY: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "OLS")]
    Ols,
    /// Raw S-regression, the initial stage of MM.
    #[serde(rename = "MM")]
    Mm,
    /// S-regression followed by the efficiency step.
    #[serde(rename = "MM-final")]
    MmFinal,
    #[serde(rename = "DetMCD")]
    DetMcd,
    #[serde(rename = "DetS")]
    DetS,
    #[serde(rename = "OR")]
    Orthogonal,
    #[serde(rename = "GEOM")]
    Geometric,
    #[serde(rename = "IV")]
    MomentIv,
    #[serde(rename = "RankIV")]
    RankIv,
}

impl Estimator {
    pub const ALL: [Estimator; 9] = [
        Estimator::Ols,
        Estimator::Mm,
        Estimator::MmFinal,
        Estimator::DetMcd,
        Estimator::DetS,
        Estimator::Orthogonal,
        Estimator::Geometric,
        Estimator::MomentIv,
        Estimator::RankIv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ols => "OLS",
            Estimator::Mm => "MM",
            Estimator::MmFinal => "MM-final",
            Estimator::DetMcd => "DetMCD",
            Estimator::DetS => "DetS",
            Estimator::Orthogonal => "OR",
            Estimator::Geometric => "GEOM",
            Estimator::MomentIv => "IV",
            Estimator::RankIv => "RankIV",
        }
    }

    /// Whether the estimator is only defined for a single regressor.
    pub fn bivariate_only(self) -> bool {
        matches!(
            self,
            Estimator::Orthogonal | Estimator::Geometric | Estimator::MomentIv | Estimator::RankIv
        )
    }

    /// Whether [`fit`](Self::fit) consumes randomness.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Estimator::Mm | Estimator::MmFinal)
    }

    /// Fits `y` on the columns of `x` (an intercept is always included).
    pub fn fit(self, x: &DataMatrix, y: &[f64], rng: &mut RngStream) -> Result<RegressionFit> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "{} regressor rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if self.bivariate_only() && x.ncols() != 1 {
            return Err(Error::Parameter(format!(
                "{self} needs exactly one regressor, got {}",
                x.ncols()
            )));
        }
        match self {
            Estimator::Ols => ols_fit(x, y),
            Estimator::Mm | Estimator::MmFinal => {
                let s = s_regression(x, y, &SRegressionOptions::default(), rng)?;
                if self == Estimator::MmFinal {
                    return mm_step(x, y, &s, MM_EFFICIENCY);
                }
                let mut fit = RegressionFit::from_coefficients(
                    Estimator::Mm,
                    x,
                    y,
                    s.coefficients[0],
                    s.coefficients[1..].to_vec(),
                );
                fit.converged = s.converged;
                Ok(fit)
            }
            Estimator::DetMcd | Estimator::DetS => {
                let joint = x.with_column(y)?;
                let est = if self == Estimator::DetMcd {
                    detmcd(&joint, 0.5)?
                } else {
                    dets(&joint)?
                };
                scatter_to_regression(&est, &joint, x.ncols())
            }
            Estimator::Orthogonal => orthogonal_fit(&x.column(0), y),
            Estimator::Geometric => geom_fit(&x.column(0), y),
            Estimator::MomentIv => moment_iv_fit(&x.column(0), y),
            Estimator::RankIv => rank_iv_fit(&x.column(0), y),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(t))
            .or_else(|| match t.to_ascii_lowercase().as_str() {
                "mm-raw" | "s" => Some(Estimator::Mm),
                "mcd" => Some(Estimator::DetMcd),
                "orthogonal" => Some(Estimator::Orthogonal),
                "geometric" => Some(Estimator::Geometric),
                _ => None,
            })
            .ok_or_else(|| Error::Parameter(format!("unknown estimator '{s}'")))
    }
}
