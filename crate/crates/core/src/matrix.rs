//! Row-major dense matrices in double precision.
//!
//! This is deliberately a small kernel, not a linear-algebra library: the
//! graph-convolution math needs products, transposes, and element maps over
//! matrices that fit comfortably in memory, and it needs them to be
//! bit-reproducible. Every dot product accumulates left to right (ascending
//! inner index), so results are identical across runs, platforms, and thread
//! counts; the parallel product only splits work across output rows, which
//! leaves each element's summation order unchanged.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("{op}: dimension mismatch, lhs {lhs_rows}x{lhs_cols} vs rhs {rhs_rows}x{rhs_cols}")]
    DimensionMismatch { op: &'static str, lhs_rows: usize, lhs_cols: usize, rhs_rows: usize, rhs_cols: usize },
    #[error("matrix data length {len} does not equal {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix text line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Dense row-major matrix of `f64`. All stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix. Either dimension may be 0.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps row-major data, validating length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::BadShape { rows, cols, len: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite { row: i / cols.max(1), col: i % cols.max(1) });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(MatrixError::BadShape { rows: i + 1, cols, len: r.len() });
        }
        DenseMatrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index ({row},{col}) out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index ({row},{col}) out of bounds");
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Element-wise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Element-wise combination of two equally shaped matrices.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, MatrixError> {
        if self.shape() != other.shape() {
            return Err(self.mismatch("zip_map", other));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn transpose(&self) -> Self {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Matrix product. Dispatches to the row-parallel form when the
    /// `parallel` feature is enabled; both forms are bit-identical.
    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        #[cfg(feature = "parallel")]
        return self.matmul_par(other);
        #[cfg(not(feature = "parallel"))]
        self.matmul_seq(other)
    }

    /// Sequential product; each output element sums ascending over the inner
    /// index.
    pub fn matmul_seq(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(self.mismatch("matmul", other));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            Self::product_row(self.row(r), other, &mut out.data[r * other.cols..(r + 1) * other.cols]);
        }
        Ok(out)
    }

    /// Row-parallel product, same summation order per element as
    /// [`DenseMatrix::matmul_seq`].
    #[cfg(feature = "parallel")]
    pub fn matmul_par(&self, other: &Self) -> Result<Self, MatrixError> {
        use rayon::prelude::*;
        if self.cols != other.rows {
            return Err(self.mismatch("matmul", other));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        out.data
            .par_chunks_mut(other.cols.max(1))
            .zip(self.data.par_chunks(self.cols.max(1)))
            .for_each(|(out_row, lhs_row)| Self::product_row(lhs_row, other, out_row));
        Ok(out)
    }

    /// `out_row = lhs_row · other`, accumulating k = 0, 1, ... in order.
    fn product_row(lhs_row: &[f64], other: &DenseMatrix, out_row: &mut [f64]) {
        for (k, &a) in lhs_row.iter().enumerate() {
            let rhs_row = &other.data[k * other.cols..(k + 1) * other.cols];
            for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                *o += a * b;
            }
        }
    }

    fn mismatch(&self, op: &'static str, other: &Self) -> MatrixError {
        MatrixError::DimensionMismatch {
            op,
            lhs_rows: self.rows,
            lhs_cols: self.cols,
            rhs_rows: other.rows,
            rhs_cols: other.cols,
        }
    }
}

/// Serializes as a `rows cols` header line followed by one line per row,
/// space-separated, 17 significant digits (enough to round-trip any `f64`).
pub fn emit_matrix(m: &DenseMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the [`emit_matrix`] format.
pub fn parse_matrix(content: &str) -> Result<DenseMatrix, MatrixError> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| MatrixError::Malformed { line: 1, reason: "missing header".into() })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [rows, cols] = dims.as_slice() else {
        return Err(MatrixError::Malformed { line: 1, reason: "header must be `rows cols`".into() });
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| MatrixError::Malformed { line: 1, reason: format!("bad dimension `{s}`") })
    };
    let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);

    let mut data = Vec::with_capacity(rows * cols);
    for done in 0..rows {
        let (idx, line) = lines.next().ok_or_else(|| MatrixError::Malformed {
            line: done + 2,
            reason: format!("expected {rows} row lines, found {done}"),
        })?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != cols {
            return Err(MatrixError::Malformed {
                line: idx + 1,
                reason: format!("expected {cols} values, found {}", values.len()),
            });
        }
        for v in values {
            data.push(v.parse::<f64>().map_err(|_| MatrixError::Malformed {
                line: idx + 1,
                reason: format!("bad value `{v}`"),
            })?);
        }
    }
    if let Some((idx, line)) = lines.next() {
        if !line.trim().is_empty() {
            return Err(MatrixError::Malformed {
                line: idx + 1,
                reason: "trailing content after final row".into(),
            });
        }
    }
    DenseMatrix::from_vec(rows, cols, data)
}
