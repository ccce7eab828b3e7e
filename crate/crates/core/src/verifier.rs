//! The rank-verification test itself.
//!
//! For each selected/unselected pair (i, j) the observed standardized
//! difference is renormalized to the interval of values compatible with the
//! observed selection event (its truncation interval), giving a selective
//! p-value. The union null "some selected mean fails to beat some unselected
//! mean by more than delta" is rejected only when every pair's selective
//! p-value is at or below alpha.
//!
//! A fast sufficient check on the single closest pair is also provided: when
//! it passes, the full test is guaranteed to reject, at the price of reduced
//! power. For certain covariance families (diagonal, equicorrelated, some
//! AR(1) and multinomial-approximation cases) the two tests coincide exactly
//! at delta = 0; [`reduction_applies`] reports when that holds.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_covariance, CovFamilyKind, CovFamilyTag, GaussianModel};
use crate::numerics::{raw_sf, sf_ratio, Probability};
use crate::selection::{min_pair, pair_stat, top_k, Selection, TieBreak};

/// Correlations with magnitude below this are treated as zero: such pairs do
/// not constrain the truncation interval, and dividing by them would turn
/// floating-point dust into absurd bounds.
const RHO_EPS: f64 = 1e-12;

/// One pair's selective p-value with its truncation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectivePValue {
    pub i: usize,
    pub j: usize,
    pub p: Probability,
    #[serde(with = "extended_real")]
    pub trunc_lo: f64,
    #[serde(with = "extended_real")]
    pub trunc_hi: f64,
    pub d_delta: f64,
}

/// Result of the sufficient check on the closest pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastCheckResult {
    pub i: usize,
    pub j: usize,
    pub d_plus: f64,
    /// Two-sided tail mass 2*sf(d_plus), clamped to 1.
    pub p_two_sided: Probability,
    /// True iff sf(d_plus) <= alpha/2, which guarantees full-test rejection.
    pub passes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Full,
    FastOnly,
}

/// Complete outcome of a verification run.
///
/// With `method = fast-only`, `worst_pair` and `worst_p` echo the fast
/// check's pair and its two-sided p-value (an upper-bound surrogate for the
/// selective p-value; the decision comparison is still exact), and
/// `all_pairs` is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub reject: bool,
    pub alpha: Probability,
    pub delta: f64,
    pub worst_pair: (usize, usize),
    pub worst_p: Probability,
    pub all_pairs: Vec<SelectivePValue>,
    pub fast_check: FastCheckResult,
    pub method: Method,
    pub reduction_detected: Option<CovFamilyTag>,
    /// Cross-pair correlations in (0, 1e-12) by magnitude, excluded from
    /// truncation bounds as numerical dust (structural zeros not counted).
    pub near_zero_rho_excluded: usize,
    /// True when a boundary tie was broken by index rather than by value.
    pub tie_broken: bool,
    /// Wall-clock time of the computation; excluded from serialized reports
    /// so identical inputs produce byte-identical output.
    #[serde(skip)]
    pub timing: Duration,
}

/// Serializes possibly-infinite interval endpoints as numbers or the strings
/// "minus-infinity"/"plus-infinity", never sentinel numerics.
mod extended_real {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("plus-infinity")
        } else {
            s.serialize_str("minus-infinity")
        }
    }

    struct Visitor;

    impl de::Visitor<'_> for Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("a number or \"minus-infinity\"/\"plus-infinity\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "minus-infinity" => Ok(f64::NEG_INFINITY),
                "plus-infinity" => Ok(f64::INFINITY),
                other => Err(E::custom(format!("unrecognized endpoint \"{other}\""))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(Visitor)
    }
}

pub(crate) fn check_alpha(alpha: Probability) -> Result<f64> {
    let a = alpha.value();
    if a <= 0.0 || a >= 1.0 {
        return Err(Error::InvalidProbability { value: a });
    }
    Ok(a)
}

fn selective_p_value_counted(
    model: &GaussianModel,
    sel: &Selection,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<(SelectivePValue, usize)> {
    let d = pair_stat(model, sel, i, j, delta)?.d_delta;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut near_zero = 0usize;
    for &k in sel.inside() {
        for &l in sel.outside() {
            let rho = crate::selection::cross_correlation(model, (i, j), (k, l));
            if rho.abs() < RHO_EPS {
                if rho != 0.0 {
                    near_zero += 1;
                }
                continue;
            }
            let d0 = pair_stat(model, sel, k, l, 0.0)?.d_delta;
            let bound = d - d0 / rho;
            if rho > 0.0 {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
    }
    // The self-pair (rho = 1) always contributes d - d0 <= d, and every
    // negative-rho bound sits above d, so on a genuine selection event the
    // observed statistic lies inside [lo, hi]. Anything else means the
    // selection or covariance handed in is inconsistent.
    if !(lo <= d && d <= hi) {
        return Err(Error::DegenerateTruncation { lo, hi });
    }
    let p = sf_ratio(d, hi, lo, hi)?;
    Ok((
        SelectivePValue {
            i,
            j,
            p,
            trunc_lo: lo,
            trunc_hi: hi,
            d_delta: d,
        },
        near_zero,
    ))
}

/// Selective p-value for one pair: the tail mass of the standardized
/// difference beyond its observed value, renormalized to the truncation
/// interval implied by the selection event.
pub fn selective_p_value(
    model: &GaussianModel,
    sel: &Selection,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<SelectivePValue> {
    selective_p_value_counted(model, sel, i, j, delta).map(|(sp, _)| sp)
}

/// Sufficient check: at margin `delta_plus = max(delta, 0)`, find the pair
/// minimizing the standardized difference and compare its one-sided tail
/// mass to alpha/2.
pub fn fast_check(
    model: &GaussianModel,
    sel: &Selection,
    delta: f64,
    alpha: Probability,
) -> Result<FastCheckResult> {
    let a = check_alpha(alpha)?;
    let delta_plus = delta.max(0.0);
    let (i, j, d_plus) = min_pair(model, sel, delta_plus);
    let tail = raw_sf(d_plus);
    Ok(FastCheckResult {
        i,
        j,
        d_plus,
        p_two_sided: Probability::new((2.0 * tail).min(1.0))?,
        passes: tail <= a / 2.0,
    })
}

/// True when the covariance family makes the fast check exactly equivalent
/// to the full test at delta = 0: diagonal and equicorrelated always,
/// AR(1) with |rho| <= 1/2 for k in {1, n-1}, and the multinomial
/// approximation for k = 1.
pub fn reduction_applies(tag: &CovFamilyTag, k: usize, n: usize) -> bool {
    match tag.kind {
        CovFamilyKind::Diagonal | CovFamilyKind::Equicorrelated => true,
        CovFamilyKind::Ar1 => {
            tag.parameter.map(f64::abs).unwrap_or(1.0) <= 0.5 && (k == 1 || k + 1 == n)
        }
        CovFamilyKind::MultinomialApprox => k == 1,
        CovFamilyKind::General => false,
    }
}

/// Decision-only path: evaluates pairs in increasing d order (the likely
/// largest p-values first) and stops at the first pair above alpha. Used by
/// the bound inversion and the simulation harness, where only the decision
/// matters.
pub(crate) fn decide_rejection(
    model: &GaussianModel,
    sel: &Selection,
    delta: f64,
    alpha: f64,
) -> Result<bool> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for &i in sel.inside() {
        for &j in sel.outside() {
            pairs.push((pair_stat(model, sel, i, j, delta)?.d_delta, i, j));
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (_, i, j) in pairs {
        let (sp, _) = selective_p_value_counted(model, sel, i, j, delta)?;
        if sp.p.value() > alpha {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs the verification test with default options (ties are errors, the
/// covariance family is inferred).
pub fn verify(
    model: &GaussianModel,
    k: usize,
    delta: f64,
    alpha: Probability,
    method: Method,
) -> Result<VerificationReport> {
    verify_with(model, k, delta, alpha, method, TieBreak::Error, None)
}

/// Full-control variant of [`verify`]: choose boundary-tie handling and
/// optionally declare the covariance family (e.g. when the matrix came from
/// the multinomial constructor, whose family cannot be inferred from the
/// entries alone).
pub fn verify_with(
    model: &GaussianModel,
    k: usize,
    delta: f64,
    alpha: Probability,
    method: Method,
    ties: TieBreak,
    family: Option<CovFamilyTag>,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let a = check_alpha(alpha)?;
    let sel = top_k(model, k, ties)?;
    let family = family.unwrap_or_else(|| classify_covariance(model.sigma(), 1e-10));
    let reduction_detected = reduction_applies(&family, k, model.n()).then_some(family);
    let fast = fast_check(model, &sel, delta, alpha)?;

    let report = match method {
        Method::FastOnly => VerificationReport {
            reject: fast.passes,
            alpha,
            delta,
            worst_pair: (fast.i, fast.j),
            worst_p: fast.p_two_sided,
            all_pairs: Vec::new(),
            fast_check: fast,
            method,
            reduction_detected,
            near_zero_rho_excluded: 0,
            tie_broken: sel.tie_broken(),
            timing: start.elapsed(),
        },
        Method::Full => {
            let mut all_pairs = Vec::with_capacity(sel.inside().len() * sel.outside().len());
            let mut near_zero = 0usize;
            let mut worst: Option<SelectivePValue> = None;
            for &i in sel.inside() {
                for &j in sel.outside() {
                    let (sp, nz) = selective_p_value_counted(model, &sel, i, j, delta)?;
                    near_zero += nz;
                    let worse = match &worst {
                        None => true,
                        Some(w) => sp.p > w.p,
                    };
                    if worse {
                        worst = Some(sp);
                    }
                    all_pairs.push(sp);
                }
            }
            let worst = worst.expect("selection has at least one pair");
            VerificationReport {
                reject: worst.p.value() <= a,
                alpha,
                delta,
                worst_pair: (worst.i, worst.j),
                worst_p: worst.p,
                all_pairs,
                fast_check: fast,
                method,
                reduction_detected,
                near_zero_rho_excluded: near_zero,
                tie_broken: sel.tie_broken(),
                timing: start.elapsed(),
            }
        }
    };
    Ok(report)
}
