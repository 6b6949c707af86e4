//! Dense symmetric linear algebra for the ridge estimator.
//!
//! The design matrices here are `I + Σ x xᵀ`, symmetric positive-definite
//! with eigenvalues ≥ 1, and the dimension is the context dimension
//! (single digits at desk scale), so a plain Cholesky factorization per
//! solve is both fast and numerically safe.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("dimension mismatch: matrix is {dim}x{dim}, vector has length {len}")]
    DimensionMismatch { dim: usize, len: usize },
}

/// Square matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    /// Rank-one update `A += x xᵀ`.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += x[i] * x[j];
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solve `A y = b` for symmetric positive-definite `A` via Cholesky.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                dim: self.dim,
                len: b.len(),
            });
        }
        let chol = self.cholesky()?;
        Ok(chol.solve(b))
    }

    /// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(LinalgError::NotPositiveDefinite { pivot: s, index: i });
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { dim: n, l })
    }
}

/// Cached Cholesky factor for repeated solves against the same matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solve `L Lᵀ y = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        // forward: L z = b
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        // backward: Lᵀ y = z
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Quadratic form `xᵀ A⁻¹ x = ‖L⁻¹x‖²` without forming the inverse.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let mut z = x.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.l[i * n + k] * z[k];
            }
            z[i] /= self.l[i * n + i];
        }
        z.iter().map(|v| v * v).sum()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_is_identity() {
        let a = SquareMatrix::identity(3);
        let y = a.solve_spd(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn diagonal_quad_form() {
        let mut a = SquareMatrix::identity(3);
        a.set(0, 0, 4.0);
        let chol = a.cholesky().unwrap();
        let q = chol.inv_quad_form(&[1.0, 0.0, 0.0]);
        assert!((q - 0.25).abs() < 1e-14);
    }

    /// Random SPD solve must agree with an explicit Gauss-Jordan inverse.
    #[test]
    fn random_spd_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rng.random_range(1..=6);
            let mut a = SquareMatrix::identity(d);
            for _ in 0..(2 * d) {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                a.add_outer(&x);
            }
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = a.solve_spd(&b).unwrap();
            let inv = gauss_jordan_inverse(&a);
            let y_ref = inv.mul_vec(&b);
            for i in 0..d {
                assert!(
                    (y[i] - y_ref[i]).abs() < 1e-10,
                    "solve mismatch at {i}: {} vs {}",
                    y[i],
                    y_ref[i]
                );
            }
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = a.cholesky().unwrap().inv_quad_form(&x);
            let q_ref = dot(&x, &inv.mul_vec(&x));
            assert!((q - q_ref).abs() < 1e-10);
        }
    }

    #[test]
    fn non_pd_rejected() {
        let mut a = SquareMatrix::identity(2);
        a.set(0, 0, -1.0);
        assert!(a.cholesky().is_err());
    }

    // Test-only oracle: explicit inverse by Gauss-Jordan with partial pivoting.
    fn gauss_jordan_inverse(a: &SquareMatrix) -> SquareMatrix {
        let n = a.dim();
        let mut aug = vec![0.0; n * 2 * n];
        for i in 0..n {
            for j in 0..n {
                aug[i * 2 * n + j] = a.get(i, j);
            }
            aug[i * 2 * n + n + i] = 1.0;
        }
        for col in 0..n {
            let mut piv = col;
            for row in (col + 1)..n {
                if aug[row * 2 * n + col].abs() > aug[piv * 2 * n + col].abs() {
                    piv = row;
                }
            }
            for j in 0..(2 * n) {
                aug.swap(col * 2 * n + j, piv * 2 * n + j);
            }
            let p = aug[col * 2 * n + col];
            for j in 0..(2 * n) {
                aug[col * 2 * n + j] /= p;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = aug[row * 2 * n + col];
                for j in 0..(2 * n) {
                    aug[row * 2 * n + j] -= f * aug[col * 2 * n + j];
                }
            }
        }
        let mut inv = SquareMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug[i * 2 * n + n + j]);
            }
        }
        inv
    }
}
