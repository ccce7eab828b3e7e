//! Observation-plus-covariance model construction and validation.
//!
//! Verification only needs every pairwise difference to have positive
//! variance (v_ij > 0); positive semi-definiteness of the covariance is NOT
//! required here and is enforced only where sampling happens. This is
//! deliberate: the multinomial approximation produces a singular covariance
//! that is still perfectly valid verification input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative tolerance for accepting (and then symmetrizing) a covariance
/// read from a lossy text format.
const SYMMETRY_TOL: f64 = 1e-10;

/// Validated model: observations `x` and known covariance `sigma`.
///
/// Invariants established at construction: dimensions agree, n >= 2,
/// everything finite, `sigma` symmetric (symmetrized when within tolerance),
/// strictly positive diagonal, and every pair has positive difference
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    x: Vec<f64>,
    sigma: Matrix,
}

impl GaussianModel {
    /// Validates and constructs. Collects every violated invariant rather
    /// than stopping at the first, so a bad input file is diagnosed in one
    /// round trip.
    pub fn new(x: Vec<f64>, mut sigma: Matrix) -> Result<Self> {
        let n = x.len();
        let mut violations = Vec::new();
        if n < 2 {
            violations.push(format!("need at least 2 observations, got {n}"));
        }
        if sigma.n() != n {
            violations.push(format!(
                "covariance is {0}x{0} but there are {n} observations",
                sigma.n()
            ));
            return Err(Error::InvalidModel { violations });
        }
        for (i, v) in x.iter().enumerate() {
            if !v.is_finite() {
                violations.push(format!("observation {i} is not finite ({v})"));
            }
        }
        let scale = sigma.max_abs();
        if !scale.is_finite() {
            violations.push("covariance contains non-finite entries".into());
            return Err(Error::InvalidModel { violations });
        }
        let mut asymmetric = false;
        for i in 0..n {
            for j in (i + 1)..n {
                if (sigma.get(i, j) - sigma.get(j, i)).abs() > SYMMETRY_TOL * scale {
                    violations.push(format!(
                        "covariance asymmetric at ({i}, {j}): {} vs {}",
                        sigma.get(i, j),
                        sigma.get(j, i)
                    ));
                    asymmetric = true;
                }
            }
        }
        if !asymmetric {
            sigma.symmetrize();
        }
        for i in 0..n {
            if !(sigma.get(i, i) > 0.0) {
                violations.push(format!(
                    "covariance diagonal entry {i} is not positive ({})",
                    sigma.get(i, i)
                ));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v2 = sigma.get(i, i) - 2.0 * sigma.get(i, j) + sigma.get(j, j);
                if !(v2 > 0.0) {
                    violations.push(format!(
                        "pair ({i}, {j}) has nonpositive difference variance ({v2}); \
                         the two coordinates are perfectly correlated"
                    ));
                }
            }
        }
        if violations.is_empty() {
            Ok(GaussianModel { x, sigma })
        } else {
            Err(Error::InvalidModel { violations })
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Standard deviation of X_i - X_j.
    pub fn pair_scale(&self, i: usize, j: usize) -> f64 {
        let s = &self.sigma;
        (s.get(i, i) - 2.0 * s.get(i, j) + s.get(j, j)).sqrt()
    }
}

/// Covariance family recognized by [`classify_covariance`] or declared by a
/// constructor; drives the fast-equals-full reduction annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovFamilyKind {
    Diagonal,
    Equicorrelated,
    Ar1,
    MultinomialApprox,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovFamilyTag {
    pub kind: CovFamilyKind,
    /// Family correlation parameter where one exists (equicorrelated, AR(1)).
    pub parameter: Option<f64>,
}

pub fn cov_diagonal(variances: &[f64]) -> Result<Matrix> {
    let mut violations = Vec::new();
    if variances.len() < 2 {
        violations.push(format!("need at least 2 variances, got {}", variances.len()));
    }
    for (i, &v) in variances.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            violations.push(format!("variance {i} must be positive and finite, got {v}"));
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidModel { violations });
    }
    let mut m = Matrix::zeros(variances.len());
    for (i, &v) in variances.iter().enumerate() {
        m.set(i, i, v);
    }
    Ok(m)
}

/// Constant diagonal `variance`, constant off-diagonal `rho * variance`.
/// `rho` must lie in (-1/(n-1), 1), the positive-definite range.
pub fn cov_equicorrelated(n: usize, variance: f64, rho: f64) -> Result<Matrix> {
    if n < 2 || !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidModel {
            violations: vec![format!(
                "equicorrelated covariance needs n >= 2 and positive variance (n = {n}, variance = {variance})"
            )],
        });
    }
    let lo = -1.0 / (n as f64 - 1.0);
    if !(rho > lo && rho < 1.0) {
        return Err(Error::RhoOutOfRange { rho, lo, hi: 1.0 });
    }
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, if i == j { variance } else { rho * variance });
        }
    }
    Ok(m)
}

/// First-order autoregressive structure: `sigma_ij = variance * rho^|i-j|`.
pub fn cov_ar1(n: usize, variance: f64, rho: f64) -> Result<Matrix> {
    if n < 2 || !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidModel {
            violations: vec![format!(
                "AR(1) covariance needs n >= 2 and positive variance (n = {n}, variance = {variance})"
            )],
        });
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::RhoOutOfRange {
            rho,
            lo: -1.0,
            hi: 1.0,
        });
    }
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, variance * rho.powi((i as i64 - j as i64).unsigned_abs() as i32));
        }
    }
    Ok(m)
}

/// Gaussian approximation for multinomial proportions: observations are the
/// empirical proportions `counts / t` and the covariance is
/// `diag(pi)/t - pi pi^T / t`. Every count must be positive so all pairwise
/// difference variances stay positive; the resulting covariance is singular
/// (rows sum to zero) but valid verification input.
pub fn multinomial_gaussian_approx(counts: &[u64], t: u64) -> Result<GaussianModel> {
    if counts.len() < 2 {
        return Err(Error::InvalidModel {
            violations: vec![format!("need at least 2 categories, got {}", counts.len())],
        });
    }
    let sum: u64 = counts.iter().sum();
    if sum != t || t == 0 {
        return Err(Error::CountMismatch { sum, t });
    }
    for (index, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::ZeroCount { index });
        }
    }
    let n = counts.len();
    let tf = t as f64;
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / tf).collect();
    let mut sigma = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                pi[i] * (1.0 - pi[i]) / tf
            } else {
                -pi[i] * pi[j] / tf
            };
            sigma.set(i, j, v);
        }
    }
    GaussianModel::new(pi, sigma)
}

/// Unbiased sample covariance (divisor m - 1) of `rows`, each row one
/// observation of n variables.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<Matrix> {
    let m = rows.len();
    if m < 2 {
        return Err(Error::TooFewRows { m });
    }
    let n = rows[0].len();
    if n < 2 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel {
            violations: vec!["sample rows must share one length of at least 2".into()],
        });
    }
    let mf = m as f64;
    let mut mean = vec![0.0; n];
    for row in rows {
        for (a, &v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    for a in &mut mean {
        *a /= mf;
    }
    let mut cov = Matrix::zeros(n);
    for row in rows {
        for i in 0..n {
            let di = row[i] - mean[i];
            for j in i..n {
                let prev = cov.get(i, j);
                cov.set(i, j, prev + di * (row[j] - mean[j]));
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov.get(i, j) / (mf - 1.0);
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    for col in 0..n {
        let scale = rows.iter().map(|r| r[col].abs()).fold(0.0_f64, f64::max);
        if cov.get(col, col) <= (1e-12 * scale).powi(2) {
            return Err(Error::ConstantColumn { col });
        }
    }
    Ok(cov)
}

/// Identifies the most specific covariance family within `tol` (relative to
/// the largest entry). Checks run from most to least specific: diagonal,
/// equicorrelated, AR(1), general. The multinomial tag is never inferred
/// from the matrix alone; it records provenance from the constructor.
pub fn classify_covariance(sigma: &Matrix, tol: f64) -> CovFamilyTag {
    let n = sigma.n();
    let scale = sigma.max_abs().max(f64::MIN_POSITIVE);
    let close = |a: f64, b: f64| (a - b).abs() <= tol * scale;

    let diag_equal = (1..n).all(|i| close(sigma.get(i, i), sigma.get(0, 0)));

    if (0..n).all(|i| (0..n).all(|j| i == j || close(sigma.get(i, j), 0.0))) {
        return CovFamilyTag {
            kind: CovFamilyKind::Diagonal,
            parameter: None,
        };
    }
    if diag_equal {
        let off = sigma.get(0, 1);
        if (0..n).all(|i| (0..n).all(|j| i == j || close(sigma.get(i, j), off))) {
            return CovFamilyTag {
                kind: CovFamilyKind::Equicorrelated,
                parameter: Some(off / sigma.get(0, 0)),
            };
        }
        let s2 = sigma.get(0, 0);
        let rho = off / s2;
        if rho.abs() < 1.0 {
            let ar1_fits = (0..n).all(|i| {
                (0..n).all(|j| {
                    close(
                        sigma.get(i, j),
                        s2 * rho.powi((i as i64 - j as i64).unsigned_abs() as i32),
                    )
                })
            });
            if ar1_fits {
                return CovFamilyTag {
                    kind: CovFamilyKind::Ar1,
                    parameter: Some(rho),
                };
            }
        }
    }
    CovFamilyTag {
        kind: CovFamilyKind::General,
        parameter: None,
    }
}
