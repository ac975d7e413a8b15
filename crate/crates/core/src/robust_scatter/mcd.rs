use itertools::Itertools;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{six_starts, subset_estimate, ScatterEstimate};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::DataMatrix;

const MAX_CSTEPS: usize = 100;
const DET_TOL: f64 = 1e-12;
/// Samples with at most this many elemental subsets also start from each of them.
const MAX_ELEMENTAL_STARTS: u64 = 5000;

/// `⌊(n + p + 1)/2⌋`, the subset size with maximal breakdown.
pub fn default_h(n: usize, p: usize) -> usize {
    (n + p + 1) / 2
}

/// Subset size for coverage `alpha ∈ [0.5, 1]`, interpolating between
/// [`default_h`] at 0.5 and `n` at 1.
pub fn h_for_alpha(n: usize, p: usize, alpha: f64) -> usize {
    let n2 = default_h(n, p) as f64;
    let nf = n as f64;
    ((2.0 * n2 - nf + 2.0 * (nf - n2) * alpha).floor() as usize).clamp(default_h(n, p), n)
}

/// Gaussian consistency factor `(h/n) / P(χ²_{p+2} ≤ χ²_{p; h/n})` for the
/// covariance of the `h` most central of `n` points.
pub fn consistency_factor(h: usize, n: usize, p: usize) -> f64 {
    if h >= n {
        return 1.0;
    }
    let a = h as f64 / n as f64;
    let q = ChiSquared::new(p as f64).expect("p ≥ 1").inverse_cdf(a);
    a / ChiSquared::new(p as f64 + 2.0).expect("p ≥ 1").cdf(q)
}

/// Squared Mahalanobis distances of every row of `m` under `est`'s raw scatter.
pub(crate) fn distances_sq(m: &DataMatrix, est: &ScatterEstimate) -> Result<Vec<f64>> {
    let chol = est
        .raw_scatter
        .cholesky()
        .map_err(|_| Error::RankCollapse {
            support: est.support.clone(),
        })?;
    let p = m.ncols();
    let mut c = vec![0.0; p];
    let mut z = vec![0.0; p];
    Ok(m.rows()
        .map(|r| {
            for j in 0..p {
                c[j] = r[j] - est.location[j];
            }
            chol.forward(&c, &mut z);
            z.iter().map(|v| v * v).sum()
        })
        .collect())
}

/// Indices of the `h` smallest values, ties broken by index.
pub(crate) fn smallest_h(d: &[f64], h: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    let cmp = |a: &usize, b: &usize| d[*a].total_cmp(&d[*b]).then(a.cmp(b));
    if h < idx.len() {
        idx.select_nth_unstable_by(h, cmp);
        idx.truncate(h);
    }
    idx.sort_unstable();
    idx
}

/// One concentration step with subset size `current.h`.
pub fn c_step(m: &DataMatrix, current: &ScatterEstimate) -> Result<ScatterEstimate> {
    c_step_with_h(m, current, current.h)
}

/// Re-selects the `h` rows closest to `current` and returns their mean and
/// covariance. When `current` is itself the moment estimate of at least `h`
/// rows the determinant cannot increase.
pub fn c_step_with_h(m: &DataMatrix, current: &ScatterEstimate, h: usize) -> Result<ScatterEstimate> {
    let d = distances_sq(m, current)?;
    let mut next = subset_estimate(m, smallest_h(&d, h), current.method)?;
    next.iterations = current.iterations + 1;
    Ok(next)
}

/// Iterates C-steps from `start` until the support repeats, the determinant
/// stalls, or the step cap is reached. Also returns the determinant path.
pub fn concentrate(
    m: &DataMatrix,
    start: ScatterEstimate,
    h: usize,
) -> Result<(ScatterEstimate, Vec<f64>)> {
    let mut cur = start;
    let mut path = Vec::new();
    for _ in 0..MAX_CSTEPS {
        let next = c_step_with_h(m, &cur, h)?;
        path.push(next.determinant);
        let repeated = next.support == cur.support;
        let stalled =
            cur.support.len() == h && cur.determinant - next.determinant <= DET_TOL * cur.determinant;
        cur = next;
        if repeated || stalled {
            break;
        }
    }
    Ok((cur, path))
}

/// DetMCD with coverage `alpha` (0.5 gives maximal breakdown).
pub fn detmcd(m: &DataMatrix, alpha: f64) -> Result<ScatterEstimate> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("MCD coverage {alpha} outside [0.5, 1]")));
    }
    detmcd_with_h(m, h_for_alpha(m.nrows(), m.ncols(), alpha))
}

/// `C(n, k)`, saturating.
fn elemental_count(n: usize, k: usize) -> u64 {
    let mut c: u64 = 1;
    for i in 0..k as u64 {
        c = c.saturating_mul(n as u64 - i) / (i + 1);
    }
    c
}

/// DetMCD with an explicit subset size. Small samples additionally start
/// from every elemental `(p + 1)`-subset.
pub fn detmcd_with_h(m: &DataMatrix, h: usize) -> Result<ScatterEstimate> {
    let (n, p) = (m.nrows(), m.ncols());
    if n <= 2 * p {
        return Err(Error::InsufficientData { n, p });
    }
    if h < default_h(n, p) || h > n {
        return Err(Error::Parameter(format!(
            "subset size {h} outside [{}, {n}]",
            default_h(n, p)
        )));
    }
    let mut best: Option<ScatterEstimate> = None;
    for start in six_starts(m)? {
        let mut start = start;
        start.method = Estimator::DetMcd;
        let Ok((est, _)) = concentrate(m, start, h) else {
            continue;
        };
        // strict comparison keeps the earliest start on ties
        if best.as_ref().is_none_or(|b| est.determinant < b.determinant) {
            best = Some(est);
        }
    }
    if elemental_count(n, p + 1) <= MAX_ELEMENTAL_STARTS {
        for idx in (0..n).combinations(p + 1) {
            let Ok(start) = subset_estimate(m, idx, Estimator::DetMcd) else {
                continue;
            };
            let Ok((est, _)) = concentrate(m, start, h) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| est.determinant < b.determinant) {
                best = Some(est);
            }
        }
    }
    let mut best = best.ok_or_else(|| {
        Error::DegenerateData("every DetMCD start collapsed to a singular subset".into())
    })?;
    let factor = consistency_factor(h, n, p);
    best.scatter = best.raw_scatter.scaled(factor);
    best.consistency_applied = true;
    Ok(best)
}
