//! Top-K selection events, per-pair standardized statistics, and the
//! cross-pair correlations that shape every truncation interval.

use crate::error::{Error, Result};
use crate::model::GaussianModel;

/// What to do when the observed values tie exactly at the K/(K+1) boundary,
/// where the selection event is ill-defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Refuse: ties are measure-zero under the model, so one in real data
    /// signals rounding that the caller should resolve deliberately.
    #[default]
    Error,
    /// Rank the lower index higher and flag the selection as tie-broken.
    BreakLowIndex,
}

/// The observed top-K selection event.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    k: usize,
    inside: Vec<usize>,
    outside: Vec<usize>,
    boundary_gap: f64,
    tie_broken: bool,
}

impl Selection {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Selected indices, ascending.
    pub fn inside(&self) -> &[usize] {
        &self.inside
    }

    /// Unselected indices, ascending.
    pub fn outside(&self) -> &[usize] {
        &self.outside
    }

    /// K-th largest observation minus (K+1)-th largest.
    pub fn boundary_gap(&self) -> f64 {
        self.boundary_gap
    }

    pub fn tie_broken(&self) -> bool {
        self.tie_broken
    }

    pub fn contains(&self, i: usize) -> bool {
        self.inside.binary_search(&i).is_ok()
    }
}

/// Standardized statistic for one ordered pair (i selected, j not):
/// `d_delta = ((x_i - x_j) - delta) / v` with `v^2 = Var(X_i - X_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStat {
    pub i: usize,
    pub j: usize,
    pub v: f64,
    pub d_delta: f64,
    pub delta: f64,
}

/// Indices of the top k observations.
///
/// # Errors
/// [`Error::InvalidK`] unless 1 <= k <= n-1; [`Error::BoundaryTie`] when the
/// k-th and (k+1)-th largest values are exactly equal and `ties` is
/// [`TieBreak::Error`].
pub fn top_k(model: &GaussianModel, k: usize, ties: TieBreak) -> Result<Selection> {
    let n = model.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let x = model.x();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[b].partial_cmp(&x[a])
            .expect("observations validated finite")
            .then(a.cmp(&b))
    });
    let tie = x[order[k - 1]] == x[order[k]];
    if tie && ties == TieBreak::Error {
        return Err(Error::BoundaryTie {
            k,
            value: x[order[k]],
        });
    }
    let boundary_gap = x[order[k - 1]] - x[order[k]];
    let mut inside = order[..k].to_vec();
    let mut outside = order[k..].to_vec();
    inside.sort_unstable();
    outside.sort_unstable();
    Ok(Selection {
        k,
        inside,
        outside,
        boundary_gap,
        tie_broken: tie,
    })
}

/// Standardized difference for a selected/unselected pair at margin `delta`.
///
/// # Errors
/// [`Error::WrongSide`] if i is not selected or j is.
pub fn pair_stat(
    model: &GaussianModel,
    sel: &Selection,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<PairStat> {
    if !sel.contains(i) || sel.contains(j) {
        return Err(Error::WrongSide { i, j });
    }
    let v = model.pair_scale(i, j);
    let d_delta = ((model.x()[i] - model.x()[j]) - delta) / v;
    Ok(PairStat {
        i,
        j,
        v,
        d_delta,
        delta,
    })
}

/// Correlation between the difference statistics of two pairs:
/// `rho = Cov(X_i - X_j, X_k - X_l) / (v_ij v_kl)`.
/// The self-correlation is short-circuited to exactly 1.
pub fn cross_correlation(
    model: &GaussianModel,
    (i, j): (usize, usize),
    (k, l): (usize, usize),
) -> f64 {
    if (i, j) == (k, l) {
        return 1.0;
    }
    let s = model.sigma();
    let cov = s.get(i, k) - s.get(i, l) - s.get(j, k) + s.get(j, l);
    cov / (model.pair_scale(i, j) * model.pair_scale(k, l))
}

/// The pair minimizing `d_delta` over selected i, unselected j, with
/// lexicographic (i, j) tie-break. Returns (i, j, d_delta).
pub fn min_pair(model: &GaussianModel, sel: &Selection, delta: f64) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for &i in sel.inside() {
        for &j in sel.outside() {
            let d = pair_stat(model, sel, i, j, delta)
                .expect("iterating the partition")
                .d_delta;
            let better = match best {
                None => true,
                Some((bi, bj, bd)) => d < bd || (d == bd && (i, j) < (bi, bj)),
            };
            if better {
                best = Some((i, j, d));
            }
        }
    }
    best.expect("selection has at least one pair")
}
