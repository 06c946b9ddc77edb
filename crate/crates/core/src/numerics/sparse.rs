use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != rows + 1 {
            return Err(Error::shape(
                "SparseMatrix::new offsets",
                rows + 1,
                offsets.len(),
            ));
        }
        if indices.len() != values.len() || offsets[rows] != indices.len() {
            return Err(Error::shape(
                "SparseMatrix::new",
                offsets[rows],
                format!("{} indices / {} values", indices.len(), values.len()),
            ));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "CSR offsets must be nondecreasing".into(),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::InvalidArgument(format!(
                "column index {bad} out of range for {cols} columns"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sparse values must be finite".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// column order within a row is ascending.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::InvalidArgument(format!(
                "triplet ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            offsets[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Self::new(rows, cols, offsets, indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Sparse-dense product `self * b`.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows() {
            return Err(Error::shape("spmm", self.cols, b.rows()));
        }
        let m = b.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            let o_row = out.row_mut(r);
            for (&c, &v) in idx.iter().zip(val) {
                for (o, &x) in o_row.iter_mut().zip(b.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * g`, computed by scattering rows of `g`.
    pub fn spmm_transposed(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != g.rows() {
            return Err(Error::shape("spmm_transposed", self.rows, g.rows()));
        }
        let m = g.cols();
        let mut out = DenseMatrix::zeros(self.cols, m);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            let g_row = g.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(g_row) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                d.set(r, c, d.get(r, c) + v);
            }
        }
        d
    }
}
