use super::matrix::{DataMatrix, SymmetricMatrix};
use crate::error::{Error, Result};

/// Gaussian consistency factor for the median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

pub fn column_means(m: &DataMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.ncols()];
    for r in m.rows() {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let n = m.nrows() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// Unbiased (divisor `n − 1`) covariance of the columns of `m`.
pub fn sample_covariance(m: &DataMatrix) -> Result<SymmetricMatrix> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let mu = column_means(m);
    let p = m.ncols();
    let mut acc = vec![0.0; p * p];
    let mut c = vec![0.0; p];
    for r in m.rows() {
        for j in 0..p {
            c[j] = r[j] - mu[j];
        }
        for i in 0..p {
            for j in i..p {
                acc[i * p + j] += c[i] * c[j];
            }
        }
    }
    let d = (n - 1) as f64;
    Ok(SymmetricMatrix::from_fn(p, |i, j| acc[i * p + j] / d))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() - 1) as f64
}

pub fn variance(v: &[f64]) -> f64 {
    covariance(v, v)
}

pub fn sd(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    covariance(a, b) / (variance(a) * variance(b)).sqrt()
}

/// Type-7 quantile: linear interpolation at `h = (n − 1)·q` on the sorted values.
pub fn quantile(v: &[f64], q: f64) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::DegenerateSample("quantile of an empty vector".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("quantile level {q} outside [0, 1]")));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&s, q))
}

pub(crate) fn sorted_quantile(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(v: &[f64]) -> Result<f64> {
    quantile(v, 0.5)
}

/// `1.4826 · median |v_i − median(v)|`.
pub fn median_abs_dev(v: &[f64]) -> Result<f64> {
    let med = median(v)?;
    let dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    Ok(MAD_CONSISTENCY * median(&dev)?)
}

/// `(x − mu)ᵀ s_inv (x − mu)`.
pub fn mahalanobis_sq(x: &[f64], mu: &[f64], s_inv: &SymmetricMatrix) -> Result<f64> {
    let p = s_inv.dim();
    if x.len() != p || mu.len() != p {
        return Err(Error::Shape(format!(
            "point of length {}, center of length {}, metric of dimension {p}",
            x.len(),
            mu.len()
        )));
    }
    let c: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    Ok(super::dot(&c, &s_inv.matvec(&c)))
}

/// Ranks starting at 1, ties receive their average rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eigh;

    #[test]
    fn column_means_examples() {
        let m = DataMatrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(column_means(&m), vec![2.0]);
        let m = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(column_means(&m), vec![2.0, 0.0]);
    }

    #[test]
    fn column_means_agree_with_reverse_summation() {
        let v = [0.318_273_1, -1.722_02, 5.000_1, 2.49e-3];
        let m = DataMatrix::column_vector(&v).unwrap();
        let oracle = v.iter().rev().fold(0.0, |a, b| a + b) / 4.0;
        assert!((column_means(&m)[0] - oracle).abs() <= 1e-12 * oracle.abs());
    }

    #[test]
    fn covariance_examples() {
        let m = DataMatrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(sample_covariance(&m).unwrap().get(0, 0), 2.0);
        let m = DataMatrix::from_rows(&vec![vec![1.5, -2.0]; 4]).unwrap();
        let c = sample_covariance(&m).unwrap();
        assert!(c.to_rows().iter().flatten().all(|&v| v == 0.0));
        let one = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(sample_covariance(&one), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn covariance_matches_double_loop() {
        let rows = vec![
            vec![1.0, 2.0],
            vec![2.5, 0.5],
            vec![-1.0, 3.0],
            vec![0.2, 0.1],
            vec![4.0, -2.0],
        ];
        let m = DataMatrix::from_rows(&rows).unwrap();
        let c = sample_covariance(&m).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let ma = rows.iter().map(|r| r[a]).sum::<f64>() / 5.0;
                let mb = rows.iter().map(|r| r[b]).sum::<f64>() / 5.0;
                let mut s = 0.0;
                for r in &rows {
                    s += (r[a] - ma) * (r[b] - mb);
                }
                assert!((c.get(a, b) - s / 4.0).abs() < 1e-13);
            }
        }
        let e = eigh(&c).unwrap();
        assert!(e.values[0] >= -1e-10 * c.trace());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25).unwrap(), 2.5);
        assert_eq!(quantile(&[5.0, -1.0, 3.0], 0.0).unwrap(), -1.0);
        assert_eq!(quantile(&[5.0, -1.0, 3.0], 1.0).unwrap(), 5.0);
        assert!(matches!(quantile(&[], 0.5), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn mad_examples() {
        assert_eq!(median_abs_dev(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(median_abs_dev(&[0.0, 0.0, 0.0, 0.0, 100.0]).unwrap(), 0.0);
    }

    #[test]
    fn mahalanobis_examples() {
        let id = SymmetricMatrix::identity(2);
        assert_eq!(mahalanobis_sq(&[1.0, 2.0], &[1.0, 2.0], &id).unwrap(), 0.0);
        assert_eq!(mahalanobis_sq(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap(), 25.0);
        // [[2, 0.5], [0.5, 1]] at d = (1, -2): 2·1 + 2·0.5·(1)(−2) + 1·4 = 4
        let s = SymmetricMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert!((mahalanobis_sq(&[2.0, -1.0], &[1.0, 1.0], &s).unwrap() - 4.0).abs() < 1e-15);
        assert!(matches!(
            mahalanobis_sq(&[1.0], &[0.0, 0.0], &id),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
    }
}
