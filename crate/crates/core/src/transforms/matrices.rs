//! Dense band matrices realizing the transforms as `y = L x`, `y = H x`.
//! Reference path for tests and operation counting only.

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;

use super::{check_extent, BoundaryMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Dec,
    Rec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &v) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.data[r * self.cols..(r + 1) * self.cols]) {
                *o += a * v;
            }
        }
        out
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Entries that are not exactly zero.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrices {
    pub lo: Matrix,
    pub hi: Matrix,
    pub n: usize,
    pub mode: BoundaryMode,
}

fn place(taps: &[f64], offset: isize, n: usize, mode: BoundaryMode) -> Matrix {
    let rows = n / 2;
    let mut m = Matrix::zeros(rows, n);
    for r in 0..rows {
        for (t, &c) in taps.iter().enumerate() {
            let pos = (2 * r + t) as isize + offset;
            let col = match mode {
                BoundaryMode::Periodic => Some(pos.rem_euclid(n as isize) as usize),
                BoundaryMode::Truncate => (pos >= 0 && (pos as usize) < n).then_some(pos as usize),
            };
            if let Some(col) = col {
                m.data[r * n + col] += c;
            }
        }
    }
    m
}

/// `floor(N/2) x N` matrices with row `r` holding the filter at column
/// `2r` (`2r - dual_shift` for the reconstruction low-pass).
pub fn build_matrices(n: usize, spec: &WaveletSpec, role: Role, mode: BoundaryMode) -> Result<BandMatrices> {
    check_extent(n, mode)?;
    let (lo, lo_off, hi) = match role {
        Role::Dec => (&spec.lo_dec, 0, &spec.hi_dec),
        Role::Rec => (&spec.lo_rec, -(spec.dual_shift as isize), &spec.hi_rec),
    };
    Ok(BandMatrices { lo: place(lo, lo_off, n, mode), hi: place(hi, 0, n, mode), n, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::get_wavelet;

    #[test]
    fn haar_two_by_two() {
        let m = build_matrices(2, &get_wavelet("haar").unwrap(), Role::Dec, BoundaryMode::Periodic).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(m.lo.data, vec![s, s]);
        assert_eq!(m.hi.data, vec![s, -s]);
    }

    #[test]
    fn haar_rows_orthonormal() {
        let m = build_matrices(4, &get_wavelet("haar").unwrap(), Role::Dec, BoundaryMode::Periodic).unwrap();
        assert!((m.lo.get(0, 0) - m.lo.get(1, 2)).abs() == 0.0);
        let llt = m.lo.matmul(&m.lo.transpose()).unwrap();
        assert!(llt.max_abs_diff(&Matrix::identity(2)) <= 1e-15);
    }

    #[test]
    fn odd_periodic_rejected() {
        let r = build_matrices(3, &get_wavelet("db2").unwrap(), Role::Dec, BoundaryMode::Periodic);
        assert!(matches!(r, Err(Error::InvalidExtent { extent: 3, .. })));
        let t = build_matrices(5, &get_wavelet("db2").unwrap(), Role::Dec, BoundaryMode::Truncate).unwrap();
        assert_eq!((t.lo.rows, t.lo.cols), (2, 5));
    }

    #[test]
    fn truncate_cuts_taps() {
        let db2 = get_wavelet("db2").unwrap();
        let t = build_matrices(4, &db2, Role::Dec, BoundaryMode::Truncate).unwrap();
        // Last row starts at column 2, so only two of four taps survive.
        assert_eq!(t.lo.get(1, 2), db2.lo_dec[0]);
        assert_eq!(t.lo.get(1, 3), db2.lo_dec[1]);
        assert_eq!(t.lo.get(1, 0), 0.0);
    }
}
