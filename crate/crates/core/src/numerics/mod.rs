//! Dense linear algebra and order statistics for the small (p ≤ ~50)
//! problems that every estimator in this crate reduces to.

mod linalg;
mod matrix;
mod stats;

pub use linalg::{eigh, solve_spd, Cholesky, Eigen};
pub use matrix::{DataMatrix, SymmetricMatrix};
pub use stats::{
    column_means, correlation, covariance, mahalanobis_sq, mean, median, median_abs_dev, quantile,
    ranks, sample_covariance, sd, variance, MAD_CONSISTENCY,
};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
