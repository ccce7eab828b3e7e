//! Simultaneous-inference comparator: a Monte Carlo studentized-maximum
//! quantile (Tukey-HSD style) with its decision rule.
//!
//! The quantile `h` is the 1 - alpha point of `max_{i != j} |Z_i - Z_j| /
//! v_ij` under `Z ~ N(0, sigma)`; the rule declares the ranking verified
//! when the closest selected/unselected pair clears `v_ij * h`. The
//! selective test's rejection region contains this rule's, which is what
//! the simulation harness demonstrates; the comparator exists to make that
//! comparison runnable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::GaussianModel;
use crate::numerics::Probability;
use crate::selection::{min_pair, top_k, TieBreak};
use crate::verifier::check_alpha;

/// Fewest Monte Carlo draws accepted for quantile estimation.
pub const MIN_HSD_REPS: usize = 1000;

/// Monte Carlo estimate of the simultaneous pairwise-difference quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsdQuantile {
    pub h: f64,
    pub alpha: Probability,
    pub reps: usize,
    pub seed: u64,
    /// Half-width of the order-statistic band one binomial standard
    /// deviation of rank either side of the quantile.
    pub std_error: f64,
    /// Checksum of the covariance the draws were sampled under; compared on
    /// use so a quantile is never replayed against a different matrix.
    pub sigma_checksum: u64,
    /// Worker count the draws were partitioned over; with the seed, part of
    /// the reproducibility key.
    pub workers: usize,
}

fn pair_inverse_scales(sigma: &Matrix) -> Result<Vec<(usize, usize, f64)>> {
    let n = sigma.n();
    let mut violations = Vec::new();
    if n < 2 {
        violations.push(format!("covariance must be at least 2x2, got {n}x{n}"));
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let v2 = sigma.get(i, i) + sigma.get(j, j) - 2.0 * sigma.get(i, j);
            if v2 > 0.0 && v2.is_finite() {
                pairs.push((i, j, 1.0 / v2.sqrt()));
            } else {
                violations.push(format!(
                    "pair ({i}, {j}) has non-positive difference variance {v2}"
                ));
            }
        }
    }
    if violations.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::InvalidModel { violations })
    }
}

fn worker_maxima(
    l: &Matrix,
    pairs: &[(usize, usize, f64)],
    count: usize,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let n = l.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut g = vec![0.0; n];
    let mut z = vec![0.0; n];
    let zero = vec![0.0; n];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        l.lower_mul_add(&g, &zero, &mut z);
        let mut m = 0.0_f64;
        for &(i, j, inv_v) in pairs {
            m = m.max((z[i] - z[j]).abs() * inv_v);
        }
        out.push(m);
    }
    out
}

/// Single-worker [`hsd_quantile_with_workers`].
pub fn hsd_quantile(
    sigma: &Matrix,
    alpha: Probability,
    reps: usize,
    seed: u64,
) -> Result<HsdQuantile> {
    hsd_quantile_with_workers(sigma, alpha, reps, seed, 1)
}

/// Estimates the 1 - alpha quantile of `max_{i != j} |Z_i - Z_j| / v_ij`
/// under `Z ~ N(0, sigma)` from `reps` seeded draws, as the
/// ceil((1 - alpha) * reps)-th order statistic (the conservative side).
///
/// Draws are partitioned across `workers` threads whose generators are
/// independent streams of the same seed, so the result is reproducible for
/// a fixed (seed, workers) and order-invariant in the merge.
///
/// # Errors
/// [`Error::TooFewReps`] below [`MIN_HSD_REPS`] draws;
/// [`Error::InvalidModel`] if some pair has no positive difference
/// variance; [`Error::NotPsd`] if sampling factorization fails.
pub fn hsd_quantile_with_workers(
    sigma: &Matrix,
    alpha: Probability,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<HsdQuantile> {
    let a = check_alpha(alpha)?;
    if reps < MIN_HSD_REPS {
        return Err(Error::TooFewReps {
            reps,
            min: MIN_HSD_REPS,
        });
    }
    let pairs = pair_inverse_scales(sigma)?;
    let l = sigma.cholesky()?;
    let workers = workers.max(1).min(reps);
    let mut maxima: Vec<f64>;
    if workers == 1 {
        maxima = worker_maxima(&l, &pairs, reps, seed, 0);
    } else {
        maxima = Vec::with_capacity(reps);
        let base = reps / workers;
        let rem = reps % workers;
        let chunks: Vec<Vec<f64>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let (l, pairs) = (&l, &pairs);
                    let count = base + usize::from(w < rem);
                    s.spawn(move || worker_maxima(l, pairs, count, seed, w as u64))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        });
        for chunk in chunks {
            maxima.extend(chunk);
        }
    }
    maxima.sort_by(|x, y| x.partial_cmp(y).expect("maxima are finite"));
    let rank = (((1.0 - a) * reps as f64).ceil() as usize).clamp(1, reps);
    let h = maxima[rank - 1];
    let spread = (reps as f64 * a * (1.0 - a)).sqrt().ceil() as usize;
    let hi = (rank - 1 + spread).min(reps - 1);
    let lo = (rank - 1).saturating_sub(spread);
    let std_error = 0.5 * (maxima[hi] - maxima[lo]);
    Ok(HsdQuantile {
        h,
        alpha,
        reps,
        seed,
        std_error,
        sigma_checksum: sigma.checksum(),
        workers,
    })
}

/// Simultaneous decision rule: true iff the closest selected/unselected
/// pair satisfies `x_i >= x_j + v_ij * h`.
///
/// Boundary ties are broken by index rather than refused: this rule does
/// not condition on the selection event, and a zero gap simply fails the
/// comparison for any positive `h`.
///
/// # Errors
/// [`Error::SigmaMismatch`] if `h` was sampled under a different
/// covariance; [`Error::AlphaMismatch`] if `alpha` differs from the level
/// `h` was computed at.
pub fn hsd_verify(
    model: &GaussianModel,
    k: usize,
    alpha: Probability,
    h: &HsdQuantile,
) -> Result<bool> {
    let a = check_alpha(alpha)?;
    if model.sigma().checksum() != h.sigma_checksum {
        return Err(Error::SigmaMismatch);
    }
    if h.alpha.value() != a {
        return Err(Error::AlphaMismatch {
            expected: h.alpha.value(),
            got: a,
        });
    }
    let sel = top_k(model, k, TieBreak::BreakLowIndex)?;
    let (i, j, _) = min_pair(model, &sel, 0.0);
    Ok(model.x()[i] >= model.x()[j] + model.pair_scale(i, j) * h.h)
}
