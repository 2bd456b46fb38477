//! Minimal row-major matrix for trajectory storage and estimator inputs.

use crate::error::{Error, Result};

/// Dense row-major f64 matrix. Rows are sample points, columns coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn with_capacity(rows_hint: usize, cols: usize) -> Self {
        Matrix {
            rows: 0,
            cols,
            data: Vec::with_capacity(rows_hint * cols),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Matrix::with_capacity(rows.len(), cols);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Build from a flat scalar series: one column, one row per sample.
    pub fn from_column(series: &[f64]) -> Self {
        Matrix {
            rows: series.len(),
            cols: 1,
            data: series.to_vec(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.data.is_empty() {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::Contract(format!(
                "row length {} does not match matrix width {}",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column-wise concatenation; all inputs must share a row count.
    pub fn hcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if parts.iter().any(|m| m.rows != rows) {
            return Err(Error::Contract(
                "hcat requires equal row counts".to_string(),
            ));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = Matrix::with_capacity(rows, cols);
        let mut buf = Vec::with_capacity(cols);
        for i in 0..rows {
            buf.clear();
            for m in parts {
                buf.extend_from_slice(m.row(i));
            }
            out.push_row(&buf)?;
        }
        Ok(out)
    }

    /// Stack matrices vertically; all inputs must share a column count.
    pub fn vcat(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut out = Matrix::with_capacity(parts.iter().map(|m| m.rows).sum(), cols);
        for m in parts {
            for i in 0..m.rows {
                out.push_row(m.row(i))?;
            }
        }
        Ok(out)
    }

    /// Keep every `stride`-th row starting from the first.
    pub fn thin(&self, stride: usize) -> Matrix {
        let stride = stride.max(1);
        let mut out = Matrix::with_capacity(self.rows / stride + 1, self.cols);
        for i in (0..self.rows).step_by(stride) {
            out.push_row(self.row(i)).expect("same width");
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Euclidean distance between two equal-length slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}
