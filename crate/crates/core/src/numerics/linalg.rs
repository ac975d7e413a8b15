use super::matrix::SymmetricMatrix;
use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymmetricMatrix) -> Result<Self> {
        let n = a.dim();
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let floor = f64::EPSILON * max_diag * n as f64;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > floor) {
                return Err(Error::SingularSystem { row: j, pivot: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { dim: n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Solves `L z = b` only; `‖z‖²` is then the quadratic form `bᵀ A⁻¹ b`.
    pub fn forward(&self, b: &[f64], z: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
    }

    /// `out = L·z`.
    pub fn lower_mul(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = (0..=i).map(|k| self.l[i * n + k] * z[k]).sum();
        }
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l[i * self.dim + i].ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut inv = SymmetricMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, &v) in col.iter().enumerate().skip(j) {
                inv.set(i, j, v);
            }
        }
        inv
    }
}

/// Solves `a·x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::Shape(format!(
            "rhs of length {} for a {}-dimensional system",
            b.len(),
            a.dim()
        )));
    }
    Ok(Cholesky::factor(a)?.solve(b))
}

impl SymmetricMatrix {
    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    /// Determinant of a positive definite matrix.
    pub fn determinant(&self) -> Result<f64> {
        Ok(self.cholesky()?.det())
    }

    pub fn inverse(&self) -> Result<SymmetricMatrix> {
        Ok(self.cholesky()?.inverse())
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector belonging to `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    /// `V diag(values) Vᵀ`.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymmetricMatrix {
        let d = self.vectors.len();
        SymmetricMatrix::from_fn(d, |i, j| {
            values
                .iter()
                .zip(&self.vectors)
                .map(|(l, v)| l * v[i] * v[j])
                .sum()
        })
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(&self.values)
    }
}

/// Cyclic Jacobi eigensolver.
pub fn eigh(s: &SymmetricMatrix) -> Result<Eigen> {
    if !s.is_finite() {
        return Err(Error::NumericalFailure("eigh: non-finite input".into()));
    }
    let n = s.dim();
    let mut a = s.to_rows();
    let mut v = vec![vec![0.0; n]; n];
    for (i, vi) in v.iter_mut().enumerate() {
        vi[i] = 1.0;
    }
    let scale = s.frobenius();
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - sn * akq;
                    row[q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - sn * vkq;
                    row[q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = v.iter().map(|row| row[k]).collect();
            // sign convention: largest-magnitude component positive
            let pivot = col
                .iter()
                .copied()
                .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    Ok(Eigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eigh_identity() {
        let e = eigh(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eigh_two_by_two() {
        let s = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigh(&s).unwrap();
        assert!(close(e.values[0], 1.0, 1e-14) && close(e.values[1], 3.0, 1e-14));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // eigenvectors are defined up to sign
        assert!(close(e.vectors[0][0].abs(), r, 1e-14));
        assert!(close(e.vectors[0][0] * e.vectors[0][1], -0.5, 1e-14));
        assert!(close(e.vectors[1][0], r, 1e-14) && close(e.vectors[1][1], r, 1e-14));
    }

    #[test]
    fn eigh_reconstructs_random_4x4() {
        let rows = vec![
            vec![4.1, -0.3, 1.2, 0.7],
            vec![-0.3, 2.2, 0.5, -1.1],
            vec![1.2, 0.5, 3.3, 0.25],
            vec![0.7, -1.1, 0.25, 1.9],
        ];
        let s = SymmetricMatrix::from_rows(&rows).unwrap();
        let e = eigh(&s).unwrap();
        let r = e.reconstruct();
        for i in 0..4 {
            for j in 0..4 {
                assert!(close(r.get(i, j), s.get(i, j), 1e-9));
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn solve_spd_small_cases() {
        let id = SymmetricMatrix::identity(3);
        assert_eq!(solve_spd(&id, &[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let d = SymmetricMatrix::diagonal(&[4.0, 9.0]);
        let x = solve_spd(&d, &[8.0, 27.0]).unwrap();
        assert!(close(x[0], 2.0, 1e-15) && close(x[1], 3.0, 1e-15));
    }

    #[test]
    fn solve_spd_three_by_three_residual() {
        let a = SymmetricMatrix::from_rows(&[
            vec![6.0, 2.0, 1.0],
            vec![2.0, 5.0, 2.0],
            vec![1.0, 2.0, 4.0],
        ])
        .unwrap();
        let b = [1.0, -1.0, 2.0];
        let x = solve_spd(&a, &b).unwrap();
        let ax = a.matvec(&x);
        let res: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum();
        assert!(res <= 1e-10 * 4.0);
    }

    #[test]
    fn solve_spd_rejects_singular() {
        let a = SymmetricMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0]),
            Err(Error::SingularSystem { row: 1, .. })
        ));
        let neg = SymmetricMatrix::diagonal(&[1.0, -2.0]);
        assert!(solve_spd(&neg, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn determinant_and_inverse() {
        let a = SymmetricMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!(close(a.determinant().unwrap(), 8.0, 1e-12));
        let inv = a.inverse().unwrap();
        assert!(close(inv.get(0, 0), 3.0 / 8.0, 1e-14));
        assert!(close(inv.get(0, 1), -2.0 / 8.0, 1e-14));
        assert!(close(inv.get(1, 1), 4.0 / 8.0, 1e-14));
    }
}
