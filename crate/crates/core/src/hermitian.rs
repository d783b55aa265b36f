//! Small dense Hermitian matrices and their log-determinant via Cholesky.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major `n x n` complex matrix, assumed Hermitian. Only the lower
/// triangle is read by [`HermitianMatrix::log2_det`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub(crate) fn reset_identity(&mut self) {
        for (k, v) in self.data.iter_mut().enumerate() {
            *v = if k % (self.n + 1) == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        }
    }

    /// `self += scale * G * G^H` where `g` is `n x cols`, row-major.
    pub(crate) fn add_outer(&mut self, scale: f64, g: &[Complex64], cols: usize) {
        let n = self.n;
        debug_assert_eq!(g.len(), n * cols);
        for i in 0..n {
            let gi = &g[i * cols..(i + 1) * cols];
            for j in 0..=i {
                let gj = &g[j * cols..(j + 1) * cols];
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..cols {
                    acc += gi[k] * gj[k].conj();
                }
                self.data[i * n + j] += acc * scale;
                if i != j {
                    self.data[j * n + i] = self.data[i * n + j].conj();
                }
            }
        }
    }

    /// `self += scale * G^H * G` where `g` is `rows x n`, row-major.
    pub(crate) fn add_gram(&mut self, scale: f64, g: &[Complex64], rows: usize) {
        let n = self.n;
        debug_assert_eq!(g.len(), rows * n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..rows {
                    acc += g[k * n + i].conj() * g[k * n + j];
                }
                self.data[i * n + j] += acc * scale;
                if i != j {
                    self.data[j * n + i] = self.data[i * n + j].conj();
                }
            }
        }
    }

    /// `log2 det(self)` through an in-place Cholesky factorization of a copy
    /// held in `scratch`.
    ///
    /// Fails when a pivot is not strictly positive, i.e. the matrix is not
    /// positive definite to working precision.
    pub fn log2_det_with(&self, scratch: &mut Vec<Complex64>) -> Result<f64> {
        let n = self.n;
        scratch.clear();
        scratch.extend_from_slice(&self.data);
        let l = scratch.as_mut_slice();
        let mut ln_det = 0.0;
        for j in 0..n {
            let mut d = l[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NumericalFailure(format!(
                    "Cholesky pivot {j} is {d:e}; matrix not positive definite"
                )));
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            ln_det += d.ln();
            for i in (j + 1)..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(ln_det / std::f64::consts::LN_2)
    }

    pub fn log2_det(&self) -> Result<f64> {
        self.log2_det_with(&mut Vec::with_capacity(self.n * self.n))
    }
}

impl From<(usize, Vec<Complex64>)> for HermitianMatrix {
    fn from((n, data): (usize, Vec<Complex64>)) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }
}
