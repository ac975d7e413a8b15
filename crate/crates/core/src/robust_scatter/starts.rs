//! Deterministic initial estimates.
//!
//! All six are computed on data standardized coordinatewise by median and
//! MAD. Each preliminary matrix contributes only its eigenvectors; the
//! eigenvalues are re-estimated as squared MADs of the projected data, a
//! location is taken as the coordinatewise median in the sphered frame, and
//! the `⌈n/2⌉` rows closest to that center form the start subset.

use statrs::distribution::{ContinuousCDF, Normal};

use super::mcd::smallest_h;
use super::{floor_eigenvalues, subset_moments, ScatterEstimate};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{
    eigh, median, median_abs_dev, ranks, sample_covariance, DataMatrix, SymmetricMatrix,
};

fn correlation_matrix(m: &DataMatrix) -> Result<SymmetricMatrix> {
    let c = sample_covariance(m)?;
    let sd: Vec<f64> = (0..c.dim()).map(|j| c.get(j, j).sqrt()).collect();
    Ok(SymmetricMatrix::from_fn(c.dim(), |i, j| {
        if sd[i] > 0.0 && sd[j] > 0.0 {
            c.get(i, j) / (sd[i] * sd[j])
        } else if i == j {
            1.0
        } else {
            0.0
        }
    }))
}

fn columnwise(z: &DataMatrix, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<DataMatrix> {
    let cols: Vec<Vec<f64>> = (0..z.ncols()).map(|j| f(&z.column(j))).collect();
    DataMatrix::from_columns(&cols)
}

fn mad(v: &[f64]) -> f64 {
    median_abs_dev(v).expect("non-empty column")
}

fn preliminary_scatters(z: &DataMatrix) -> Result<Vec<SymmetricMatrix>> {
    let (n, p) = (z.nrows(), z.ncols());
    let mut out = Vec::with_capacity(6);

    // hyperbolic tangent
    out.push(correlation_matrix(&z.map_rows(p, |r, o| {
        for (a, b) in o.iter_mut().zip(r) {
            *a = b.tanh();
        }
    })?)?);

    // Spearman
    let rk = columnwise(z, ranks)?;
    out.push(correlation_matrix(&rk)?);

    // normal scores
    let std_normal = Normal::standard();
    let nf = n as f64;
    let scores = rk.map_rows(p, |r, o| {
        for (a, b) in o.iter_mut().zip(r) {
            *a = std_normal.inverse_cdf((b - 1.0 / 3.0) / (nf + 1.0 / 3.0));
        }
    })?;
    out.push(correlation_matrix(&scores)?);

    // spatial sign
    let mut ss = vec![0.0; p * p];
    for r in z.rows() {
        let norm2: f64 = r.iter().map(|v| v * v).sum();
        if norm2 > 0.0 {
            for a in 0..p {
                for b in a..p {
                    ss[a * p + b] += r[a] * r[b] / norm2;
                }
            }
        }
    }
    out.push(SymmetricMatrix::from_fn(p, |a, b| ss[a * p + b] / nf));

    // half of the rows with smallest norm
    let norms: Vec<f64> = z.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let half = smallest_h(&norms, n.div_ceil(2));
    out.push(subset_moments(z, &half).1);

    // pairwise (OGK) scatter from robust scales of sums and differences
    let cols: Vec<Vec<f64>> = (0..p).map(|j| z.column(j)).collect();
    out.push(SymmetricMatrix::from_fn(p, |a, b| {
        if a == b {
            mad(&cols[a]).powi(2)
        } else {
            let s: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(u, v)| u + v).collect();
            let d: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(u, v)| u - v).collect();
            (mad(&s).powi(2) - mad(&d).powi(2)) / 4.0
        }
    }));
    Ok(out)
}

/// Rows of the `⌈n/2⌉`-subset picked by one preliminary scatter, plus a flag
/// for whether its re-estimated eigenvalues needed flooring.
fn start_subset(z: &DataMatrix, s: &SymmetricMatrix) -> Result<(Vec<usize>, bool)> {
    let (n, p) = (z.nrows(), z.ncols());
    let e = eigh(s)?;
    // projected data B = Z E, one column per eigenvector
    let proj: Vec<Vec<f64>> = e
        .vectors
        .iter()
        .map(|v| z.rows().map(|r| crate::numerics::dot(r, v)).collect())
        .collect();
    let mut lambda: Vec<f64> = proj.iter().map(|b| mad(b).powi(2)).collect();
    let total: f64 = lambda.iter().sum();
    let floor = 1e-12 * total.max(f64::MIN_POSITIVE);
    let mut degenerate = false;
    for l in lambda.iter_mut() {
        if *l < floor {
            *l = floor;
            degenerate = true;
        }
    }
    // center: Σ^{1/2}·median(Z Σ^{-1/2}), with Σ^{-1/2} = E Λ^{-1/2} Eᵀ;
    // distances are then evaluated in the eigenbasis
    let inv_sqrt: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let sphered: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            (0..n)
                .map(|i| (0..p).map(|j| proj[j][i] * inv_sqrt[j] * e.vectors[j][k]).sum())
                .collect()
        })
        .collect();
    let med_w: Vec<f64> = sphered.iter().map(|w| median(w).expect("n ≥ 1")).collect();
    let center: Vec<f64> = (0..p)
        .map(|j| lambda[j].sqrt() * crate::numerics::dot(&e.vectors[j], &med_w))
        .collect();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (proj[j][i] - center[j]).powi(2) / lambda[j])
                .sum()
        })
        .collect();
    Ok((smallest_h(&d, n.div_ceil(2)), degenerate))
}

/// The six deterministic initial estimates, in original coordinates.
///
/// Each is the mean and covariance of a `⌈n/2⌉`-row subset. Scatters that
/// are numerically singular get their eigenvalues floored at `1e-12·trace`
/// and are flagged `degenerate`.
pub fn six_starts(m: &DataMatrix) -> Result<Vec<ScatterEstimate>> {
    let (n, p) = (m.nrows(), m.ncols());
    if n <= 2 * p {
        return Err(Error::InsufficientData { n, p });
    }
    let mut med = Vec::with_capacity(p);
    let mut scale = Vec::with_capacity(p);
    for j in 0..p {
        let col = m.column(j);
        let s = mad(&col);
        if !(s > 0.0) {
            return Err(Error::DegenerateCoordinate(j));
        }
        med.push(median(&col)?);
        scale.push(s);
    }
    let z = m.map_rows(p, |r, o| {
        for j in 0..p {
            o[j] = (r[j] - med[j]) / scale[j];
        }
    })?;

    preliminary_scatters(&z)?
        .iter()
        .map(|s| {
            let (idx, flagged) = start_subset(&z, s)?;
            let (location, cov) = subset_moments(m, &idx);
            let (scatter, floored) = floor_eigenvalues(&cov)?;
            let determinant = scatter.determinant().unwrap_or(0.0);
            Ok(ScatterEstimate {
                method: Estimator::DetMcd,
                location,
                raw_scatter: scatter.clone(),
                scatter,
                h: idx.len(),
                support: idx,
                determinant,
                consistency_applied: false,
                degenerate: flagged || floored,
                iterations: 0,
            })
        })
        .collect()
}
