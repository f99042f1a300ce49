//! Dense row-major matrices and the handful of kernels the models need.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(|r| r.to_vec()).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out[r, :] = x[r, :] · W` for `x` of shape (n, k) and `w` of shape (k, m).
pub(crate) fn matmul(x: &Matrix, w: &Matrix) -> Matrix {
    debug_assert_eq!(x.cols, w.rows);
    let mut out = Matrix::zeros(x.rows, w.cols);
    for r in 0..x.rows {
        let xr = x.row(r);
        let or = &mut out.data[r * w.cols..(r + 1) * w.cols];
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w.data[k * w.cols..(k + 1) * w.cols];
            for (o, &wv) in or.iter_mut().zip(wr) {
                *o += xv * wv;
            }
        }
    }
    out
}

/// `xᵀ · g` for `x` of shape (n, k) and `g` of shape (n, m), giving (k, m).
pub(crate) fn matmul_tn(x: &Matrix, g: &Matrix) -> Matrix {
    debug_assert_eq!(x.rows, g.rows);
    let mut out = Matrix::zeros(x.cols, g.cols);
    for r in 0..x.rows {
        let xr = x.row(r);
        let gr = g.row(r);
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let or = &mut out.data[k * g.cols..(k + 1) * g.cols];
            for (o, &gv) in or.iter_mut().zip(gr) {
                *o += xv * gv;
            }
        }
    }
    out
}

/// `g · Wᵀ` for `g` of shape (n, m) and `w` of shape (k, m), giving (n, k).
pub(crate) fn matmul_nt(g: &Matrix, w: &Matrix) -> Matrix {
    debug_assert_eq!(g.cols, w.cols);
    let mut out = Matrix::zeros(g.rows, w.rows);
    for r in 0..g.rows {
        let gr = g.row(r);
        for k in 0..w.rows {
            out.data[r * w.rows + k] = dot(gr, w.row(k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_naive_loops() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 0.0], [-1.0, 0.5, 3.0]]).unwrap();
        let w = Matrix::from_rows(&[[1.0, 0.0], [2.0, -1.0], [0.5, 4.0]]).unwrap();
        let p = matmul(&x, &w);
        assert_eq!(p.to_rows(), vec![vec![5.0, -2.0], vec![1.5, 11.5]]);

        let t = matmul_tn(&x, &p);
        for k in 0..3 {
            for m in 0..2 {
                let naive: f64 = (0..2).map(|r| x.get(r, k) * p.get(r, m)).sum();
                assert_eq!(t.get(k, m), naive);
            }
        }

        let n = matmul_nt(&p, &w);
        for r in 0..2 {
            for k in 0..3 {
                assert_eq!(n.get(r, k), dot(p.row(r), w.row(k)));
            }
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(Matrix::from_rows(&rows).is_err());
    }
}
