use crate::error::{Error, Result};

/// An `rows × cols` block of finite observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}×{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}×{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns of unequal length".into()));
        }
        let cols = columns.len();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(rows, cols, values)
    }

    /// Single-column matrix.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    /// Appends `col` as a new right-most column.
    pub fn with_column(&self, col: &[f64]) -> Result<DataMatrix> {
        if col.len() != self.rows {
            return Err(Error::Shape(format!(
                "column of length {} for {} rows",
                col.len(),
                self.rows
            )));
        }
        let mut values = Vec::with_capacity(self.rows * (self.cols + 1));
        for (r, &c) in self.rows().zip(col) {
            values.extend_from_slice(r);
            values.push(c);
        }
        DataMatrix::new(self.rows, self.cols + 1, values)
    }

    /// Applies `f` to every row, producing a matrix with `out_cols` columns.
    pub fn map_rows(&self, out_cols: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; self.rows * out_cols];
        for (r, out) in self.rows().zip(values.chunks_exact_mut(out_cols)) {
            f(r, out);
        }
        DataMatrix::new(self.rows, out_cols, values)
    }
}

/// Dense symmetric matrix; both triangles are stored and kept identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.values[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds the matrix from its upper triangle; `f(i, j)` is called for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Rejects input that is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("symmetric matrix must be square and non-empty".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Shape(format!("entry ({i},{j}) differs from ({j},{i})")));
                }
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite matrix entry".into()));
        }
        Ok(Self {
            dim,
            values: rows.concat(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    /// Writes `(i, j)` and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.dim + j] = v;
        self.values[j * self.dim + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.values
            .chunks_exact(self.dim)
            .map(|r| super::dot(r, x))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// `Aᵀ S A` for a square `A` given row-major.
    pub fn congruence(&self, a: &[Vec<f64>]) -> Self {
        let d = self.dim;
        // t = S A
        let mut t = vec![vec![0.0; d]; d];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                *tij = (0..d).map(|k| self.get(i, k) * a[k][j]).sum();
            }
        }
        Self::from_fn(d, |i, j| (0..d).map(|k| a[k][i] * t[k][j]).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
