use std::sync::OnceLock;

use super::{six_starts, ScatterEstimate};
use crate::biweight::{breakdown_constant, m_scale, weight};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::numerics::{DataMatrix, SymmetricMatrix};

const MAX_ITER: usize = 200;
const DET_TOL: f64 = 1e-10;
const MAX_CACHED_DIM: usize = 16;

/// 50%-breakdown biweight constant for `p`-variate Mahalanobis distances.
pub fn dets_constant(p: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    if (1..=MAX_CACHED_DIM).contains(&p) {
        CACHE.get_or_init(|| (1..=MAX_CACHED_DIM).map(|q| breakdown_constant(q, 0.5)).collect())
            [p - 1]
    } else {
        breakdown_constant(p, 0.5)
    }
}

struct SState {
    location: Vec<f64>,
    /// unit-determinant shape
    shape: SymmetricMatrix,
    scale: f64,
    distances: Vec<f64>,
    iterations: usize,
}

fn distances(m: &DataMatrix, mu: &[f64], shape: &SymmetricMatrix) -> Result<Vec<f64>> {
    let chol = shape
        .cholesky()
        .map_err(|_| Error::RankCollapse { support: vec![] })?;
    let p = m.ncols();
    let mut c = vec![0.0; p];
    let mut z = vec![0.0; p];
    Ok(m.rows()
        .map(|r| {
            for j in 0..p {
                c[j] = r[j] - mu[j];
            }
            chol.forward(&c, &mut z);
            z.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect())
}

fn unit_det(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let det = s
        .determinant()
        .map_err(|_| Error::RankCollapse { support: vec![] })?;
    Ok(s.scaled(det.powf(-1.0 / s.dim() as f64)))
}

fn s_iterate(m: &DataMatrix, start: &ScatterEstimate, c: f64) -> Result<SState> {
    let p = m.ncols();
    let mut mu = start.location.clone();
    let mut shape = unit_det(&start.raw_scatter)?;
    let mut d = distances(m, &mu, &shape)?;
    let mut scale = m_scale(&d, c, 0.5);
    let mut iterations = 0;
    while iterations < MAX_ITER && scale > 0.0 {
        iterations += 1;
        let w: Vec<f64> = d.iter().map(|di| weight(di / scale, c)).collect();
        let wsum: f64 = w.iter().sum();
        let mut next_mu = vec![0.0; p];
        for (r, wi) in m.rows().zip(&w) {
            for (a, v) in next_mu.iter_mut().zip(r) {
                *a += wi * v;
            }
        }
        next_mu.iter_mut().for_each(|v| *v /= wsum);
        let mut acc = vec![0.0; p * p];
        let mut cen = vec![0.0; p];
        for (r, wi) in m.rows().zip(&w) {
            if *wi == 0.0 {
                continue;
            }
            for j in 0..p {
                cen[j] = r[j] - next_mu[j];
            }
            for a in 0..p {
                for b in a..p {
                    acc[a * p + b] += wi * cen[a] * cen[b];
                }
            }
        }
        let v = SymmetricMatrix::from_fn(p, |a, b| acc[a * p + b] / wsum);
        let next_shape = unit_det(&v)?;
        let next_d = distances(m, &next_mu, &next_shape)?;
        let next_scale = m_scale(&next_d, c, 0.5);
        let change = (scale - next_scale).abs() / scale;
        mu = next_mu;
        shape = next_shape;
        d = next_d;
        scale = next_scale;
        // det(s²·shape) = s^{2p}; relative determinant change
        if (1.0 + change).powi(2 * p as i32) - 1.0 < DET_TOL {
            break;
        }
    }
    if !(scale > 0.0) {
        return Err(Error::DegenerateData(
            "more than half of the rows coincide with the S center".into(),
        ));
    }
    Ok(SState {
        location: mu,
        shape,
        scale,
        distances: d,
        iterations,
    })
}

/// Deterministic biweight S-estimate of location and scatter at 50% breakdown.
pub fn dets(m: &DataMatrix) -> Result<ScatterEstimate> {
    let (n, p) = (m.nrows(), m.ncols());
    if n <= 2 * p {
        return Err(Error::InsufficientData { n, p });
    }
    let c = dets_constant(p);
    let mut best: Option<SState> = None;
    for start in six_starts(m)? {
        let Ok(state) = s_iterate(m, &start, c) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| state.scale < b.scale) {
            best = Some(state);
        }
    }
    let best = best.ok_or_else(|| {
        Error::DegenerateData("every DetS start collapsed to a singular scatter".into())
    })?;
    let scatter = best.shape.scaled(best.scale * best.scale);
    let support: Vec<usize> = best
        .distances
        .iter()
        .enumerate()
        .filter(|(_, d)| *d / best.scale < c)
        .map(|(i, _)| i)
        .collect();
    Ok(ScatterEstimate {
        method: Estimator::DetS,
        location: best.location,
        raw_scatter: scatter.clone(),
        determinant: best.scale.powi(2 * p as i32),
        scatter,
        h: support.len(),
        support,
        consistency_applied: true,
        degenerate: false,
        iterations: best.iterations,
    })
}
