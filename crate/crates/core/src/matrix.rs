use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense square matrix stored row-major. Small and unclever on purpose: the
/// covariances in this problem are n-by-n with n in the tens, not thousands.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidModel {
                    violations: vec![format!(
                        "matrix is not square: {} rows but a row of length {}",
                        n,
                        row.len()
                    )],
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Replaces the matrix with its symmetric part (A + A^T) / 2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, m);
                self.set(j, i, m);
            }
        }
    }

    /// FNV-1a over the little-endian bytes of the entries, seeded with n.
    /// Used to detect when a precomputed quantile is replayed against a
    /// different covariance.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.n as u64).to_le_bytes());
        for v in &self.data {
            eat(&v.to_le_bytes());
        }
        h
    }

    /// Lower-triangular Cholesky factor. If the bare factorization hits a
    /// nonpositive pivot, one retry adds `1e-12 * trace / n` to the diagonal
    /// to absorb roundoff in singular-but-PSD inputs; a second failure is a
    /// genuine indefiniteness error.
    pub fn cholesky(&self) -> Result<Matrix> {
        match self.cholesky_with_shift(0.0) {
            Ok(l) => Ok(l),
            Err(_) => {
                let jitter = 1e-12 * self.trace() / self.n as f64;
                self.cholesky_with_shift(jitter)
            }
        }
    }

    fn cholesky_with_shift(&self, shift: f64) -> Result<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut diag = self.get(j, j) + shift;
            for k in 0..j {
                diag -= l.get(j, k) * l.get(j, k);
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::NotPsd {
                    index: j,
                    pivot: diag,
                });
            }
            let d = diag.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(l)
    }

    /// y = L * z for a lower-triangular factor, added onto `mean`.
    pub fn lower_mul_add(&self, z: &[f64], mean: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = mean[i];
            for j in 0..=i {
                acc += self.get(i, j) * z[j];
            }
            out[i] = acc;
        }
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(D::Error::custom)
    }
}
