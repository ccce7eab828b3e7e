//! Confidence lower bounds on the boundary mean gap (smallest selected mean
//! minus largest unselected mean), obtained by inverting the verification
//! test over its margin.
//!
//! Selective p-values are non-decreasing in the margin, so the margins where
//! the test fails to reject form an upward-closed set with a single crossing
//! point: the infimum of that set is a valid 1 - alpha conditional lower
//! bound on the gap. [`clb_exact`] locates the crossing by bisection on the
//! full test's decision; [`clb_fast`] inverts the sufficient single-pair
//! check in closed form. A fast-check pass guarantees a full-test rejection,
//! so the exact bound never falls below the fast one, while the reverse gap
//! can be substantial.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::GaussianModel;
use crate::numerics::{raw_sf, std_normal_quantile, Probability};
use crate::selection::{min_pair, top_k, TieBreak};
use crate::verifier::{check_alpha, decide_rejection};

/// Doublings of the search interval allowed on each side before the bound is
/// declared infinite in that direction.
const MAX_EXPANSIONS: u32 = 60;

/// Hard cap on bisection steps, above anything a sane tolerance needs.
const MAX_BISECTIONS: u32 = 200;

/// Value of a lower bound, which can sit at either extreme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundValue {
    Finite(f64),
    /// The test fails to reject at every margin searched: the data carry no
    /// lower-bound information at this level.
    MinusInfinity,
    /// The test rejects at every margin searched, even after the interval
    /// expansion cap: no finite crossing was found.
    Unbounded,
}

impl BoundValue {
    /// The finite payload, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            BoundValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl Serialize for BoundValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BoundValue::Finite(v) => s.serialize_f64(*v),
            BoundValue::MinusInfinity => s.serialize_str("minus-infinity"),
            BoundValue::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for BoundValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = BoundValue;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a number, \"minus-infinity\", or \"unbounded\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<BoundValue, E> {
                Ok(BoundValue::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BoundValue, E> {
                Ok(BoundValue::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BoundValue, E> {
                Ok(BoundValue::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BoundValue, E> {
                match v {
                    "minus-infinity" => Ok(BoundValue::MinusInfinity),
                    "unbounded" => Ok(BoundValue::Unbounded),
                    other => Err(E::custom(format!("unrecognized bound \"{other}\""))),
                }
            }
        }

        d.deserialize_any(Visitor)
    }
}

/// Which inversion produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClbMethod {
    /// Bisection on the full test's decision.
    Exact,
    /// Closed-form inversion of the fast single-pair check.
    Fast,
}

/// A 1 - alpha confidence lower bound on the boundary mean gap, conditional
/// on the observed selection.
///
/// For the exact method with a finite value, the test rejects at margin
/// `value - tol` and fails to reject at `value + tol` (up to decision
/// rounding exactly at the crossing): the value brackets the infimum of the
/// fail-to-reject margins to within the requested tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: BoundValue,
    pub alpha: Probability,
    pub method: ClbMethod,
    /// Rejection decisions evaluated (0 for the closed form).
    pub iterations: u32,
    /// Final bisection bracket around a finite exact root; `None` when the
    /// value is infinite or came from the closed form.
    pub bracket: Option<(f64, f64)>,
}

/// Scale-relative default tolerance for [`clb_exact`].
pub fn default_tol(model: &GaussianModel) -> f64 {
    let scale = model.x().iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    1e-8 * (1.0 + scale)
}

/// Exact lower bound: bisection for the margin where the full test stops
/// rejecting at level `alpha`, located to within `tol`.
///
/// The initial interval spans the data range plus ten pair scales on each
/// side and doubles outward until it straddles the decision change; if the
/// test still fails to reject after sixty doublings downward the bound is
/// [`BoundValue::MinusInfinity`], and if it still rejects after sixty
/// doublings upward the bound is [`BoundValue::Unbounded`].
///
/// # Errors
/// [`Error::InvalidTolerance`] unless `tol` is positive and finite, plus
/// anything selection or the test itself can raise.
pub fn clb_exact(
    model: &GaussianModel,
    k: usize,
    alpha: Probability,
    tol: f64,
) -> Result<LowerBound> {
    let a = check_alpha(alpha)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance { tol });
    }
    let sel = top_k(model, k, TieBreak::Error)?;
    let (x_min, x_max) = model
        .x()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut max_v = 0.0_f64;
    for &i in sel.inside() {
        for &j in sel.outside() {
            max_v = max_v.max(model.pair_scale(i, j));
        }
    }
    let mut lo = x_min - x_max - 10.0 * max_v;
    let mut hi = x_max - x_min + 10.0 * max_v;
    let width = hi - lo;
    let done = |iterations, value, bracket| {
        Ok(LowerBound {
            value,
            alpha,
            method: ClbMethod::Exact,
            iterations,
            bracket,
        })
    };

    let mut iterations = 1u32;
    let mut reject_lo = decide_rejection(model, &sel, lo, a)?;
    let mut step = width;
    for _ in 0..MAX_EXPANSIONS {
        if reject_lo {
            break;
        }
        lo -= step;
        step *= 2.0;
        iterations += 1;
        reject_lo = decide_rejection(model, &sel, lo, a)?;
    }
    if !reject_lo {
        return done(iterations, BoundValue::MinusInfinity, None);
    }

    iterations += 1;
    let mut fail_hi = !decide_rejection(model, &sel, hi, a)?;
    let mut step = width;
    for _ in 0..MAX_EXPANSIONS {
        if fail_hi {
            break;
        }
        hi += step;
        step *= 2.0;
        iterations += 1;
        fail_hi = !decide_rejection(model, &sel, hi, a)?;
    }
    if !fail_hi {
        return done(iterations, BoundValue::Unbounded, None);
    }

    let mut steps = 0u32;
    while hi - lo > tol && steps < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        steps += 1;
        if decide_rejection(model, &sel, mid, a)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    done(iterations, BoundValue::Finite(0.5 * (lo + hi)), Some((lo, hi)))
}

/// Closed-form lower bound from the fast single-pair check.
///
/// If the check already fails at margin zero the bound is minus infinity.
/// Otherwise each straddling pair's check inverts to the margin
/// `x_i - x_j - v_ij * z_{1-alpha/2}`, and the bound is the smallest of
/// those margins (necessarily nonnegative: a finite branch means the check
/// passes at zero). Never below [`clb_exact`] by more than root tolerance.
pub fn clb_fast(model: &GaussianModel, k: usize, alpha: Probability) -> Result<LowerBound> {
    let a = check_alpha(alpha)?;
    let sel = top_k(model, k, TieBreak::Error)?;
    let (_, _, d0) = min_pair(model, &sel, 0.0);
    let value = if raw_sf(d0) > a / 2.0 {
        BoundValue::MinusInfinity
    } else {
        let z = -std_normal_quantile(Probability::new(a / 2.0)?)?;
        let mut best = f64::INFINITY;
        for &i in sel.inside() {
            for &j in sel.outside() {
                let margin = model.x()[i] - model.x()[j] - model.pair_scale(i, j) * z;
                best = best.min(margin);
            }
        }
        BoundValue::Finite(best)
    };
    Ok(LowerBound {
        value,
        alpha,
        method: ClbMethod::Fast,
        iterations: 0,
        bracket: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::model::{cov_diagonal, cov_equicorrelated, GaussianModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn identity_model(x: Vec<f64>) -> GaussianModel {
        let n = x.len();
        GaussianModel::new(x, cov_diagonal(&vec![1.0; n]).unwrap()).unwrap()
    }

    fn alpha(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize) -> GaussianModel {
        loop {
            let mut rows = vec![vec![0.0; n]; n];
            for row in &mut rows {
                for v in row.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let mut sigma = Matrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (a, b) in rows[i].iter().zip(&rows[j]) {
                        acc += a * b;
                    }
                    sigma.set(i, j, acc + if i == j { 0.05 } else { 0.0 });
                }
            }
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            if let Ok(m) = GaussianModel::new(x, sigma) {
                return m;
            }
        }
    }

    /// Root of the single-pair identity-covariance p-value in delta, found
    /// by scalar bisection straight from the formula sf(d) / sf(d - d0).
    fn n2_root_oracle(g: f64, a: f64) -> f64 {
        let p = |delta: f64| raw_sf((g - delta) / SQRT_2) / raw_sf(-delta / SQRT_2);
        let (mut lo, mut hi) = (-20.0, 20.0);
        assert!(p(lo) <= a && p(hi) > a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) <= a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn n2_fast_closed_form() {
        let m = identity_model(vec![3.0, 0.0]);
        let b = clb_fast(&m, 1, alpha(0.1)).unwrap();
        let v = b.value.finite().unwrap();
        let z = -std_normal_quantile(Probability::new(0.05).unwrap()).unwrap();
        assert!((v - (3.0 - SQRT_2 * z)).abs() < 1e-12);
        assert!((v - 0.67382569264665183).abs() < 1e-12);
        assert_eq!(b.method, ClbMethod::Fast);
        assert_eq!(b.iterations, 0);
        assert_eq!(b.bracket, None);
    }

    #[test]
    fn n2_exact_matches_scalar_inversion() {
        let tol = 1e-10;
        for g in [0.5, 1.5, 3.0, 5.0] {
            for a in [0.05, 0.1, 0.3] {
                let m = identity_model(vec![g, 0.0]);
                let b = clb_exact(&m, 1, alpha(a), tol).unwrap();
                let v = b.value.finite().unwrap();
                let want = n2_root_oracle(g, a);
                assert!(
                    (v - want).abs() <= 2.0 * tol,
                    "g={g} a={a}: {v} vs oracle {want}"
                );
                let (lo, hi) = b.bracket.unwrap();
                assert!(lo <= v && v <= hi && hi - lo <= tol);
            }
        }
        // Frozen reference points for the g = 3, alpha = 0.1 instance.
        let m = identity_model(vec![3.0, 0.0]);
        let exact = clb_exact(&m, 1, alpha(0.1), tol).unwrap();
        assert!((exact.value.finite().unwrap() - 0.96716513664421274).abs() < 1e-9);
        // The exact bound clears the fast bound by a wide margin here.
        let fast = clb_fast(&m, 1, alpha(0.1)).unwrap();
        assert!(exact.value.finite().unwrap() > fast.value.finite().unwrap() + 0.29);
    }

    #[test]
    fn n2_negative_root() {
        // Fails to reject at margin zero yet still crosses at a finite
        // negative margin.
        let m = identity_model(vec![0.5, 0.0]);
        let b = clb_exact(&m, 1, alpha(0.3), 1e-10).unwrap();
        let v = b.value.finite().unwrap();
        assert!(v < 0.0);
        assert!((v - (-4.1780225983965845)).abs() < 1e-8);
    }

    #[test]
    fn exact_root_is_a_decision_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc1b_0001);
        let mut finite = 0;
        for _ in 0..200 {
            let n = rng.random_range(2..=5usize);
            let m = random_model(&mut rng, n);
            let k = rng.random_range(1..n);
            let sel = match top_k(&m, k, TieBreak::Error) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let a = rng.random_range(0.02..0.4);
            let tol = default_tol(&m);
            let b = clb_exact(&m, k, alpha(a), tol).unwrap();
            if let Some(v) = b.value.finite() {
                finite += 1;
                assert!(decide_rejection(&m, &sel, v - 3.0 * tol, a).unwrap());
                assert!(!decide_rejection(&m, &sel, v + 3.0 * tol, a).unwrap());
            }
        }
        assert!(finite > 150, "only {finite} finite bounds");
    }

    #[test]
    fn exact_never_below_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc1b_0002);
        let mut both_finite = 0;
        let mut strictly_above = 0;
        for _ in 0..200 {
            let n = rng.random_range(2..=5usize);
            let m = random_model(&mut rng, n);
            // Double the spread so a useful share of instances clears the
            // fast check at margin zero and both bounds come out finite.
            let m = GaussianModel::new(
                m.x().iter().map(|v| 2.0 * v).collect(),
                m.sigma().clone(),
            )
            .unwrap();
            let k = rng.random_range(1..n);
            if top_k(&m, k, TieBreak::Error).is_err() {
                continue;
            }
            let a = rng.random_range(0.02..0.4);
            let tol = default_tol(&m);
            let exact = clb_exact(&m, k, alpha(a), tol).unwrap();
            let fast = clb_fast(&m, k, alpha(a)).unwrap();
            match (exact.value.finite(), fast.value.finite()) {
                (Some(e), Some(f)) => {
                    both_finite += 1;
                    assert!(e >= f - 2.0 * tol, "exact {e} below fast {f}");
                    if e > f + 10.0 * tol {
                        strictly_above += 1;
                    }
                }
                // A fast pass at margin zero forces a full rejection there,
                // so the exact bound cannot be minus infinity when the fast
                // bound is finite.
                (None, Some(f)) => panic!("fast finite ({f}) but exact infinite"),
                _ => {}
            }
        }
        assert!(both_finite > 30, "only {both_finite} comparable instances");
        assert!(strictly_above > 0, "exact bound never exceeded fast bound");
    }

    #[test]
    fn fast_minus_infinity_when_check_fails_at_zero() {
        // sf(0.5 / sqrt(2)) = 0.362 > alpha/2, so inversion has no root.
        let m = identity_model(vec![0.5, 0.0]);
        let b = clb_fast(&m, 1, alpha(0.1)).unwrap();
        assert_eq!(b.value, BoundValue::MinusInfinity);
        assert_eq!(b.bracket, None);
    }

    #[test]
    fn fast_root_is_the_check_boundary() {
        let cases: Vec<(GaussianModel, usize)> = vec![
            (identity_model(vec![3.0, 0.0]), 1),
            (identity_model(vec![4.0, 3.0, 0.0, -1.0]), 2),
            (
                GaussianModel::new(
                    vec![4.0, 3.0, 0.0],
                    cov_equicorrelated(3, 1.0, 0.4).unwrap(),
                )
                .unwrap(),
                2,
            ),
        ];
        for (idx, (m, k)) in cases.iter().enumerate() {
            let (m, k) = (m, *k);
            let b = clb_fast(m, k, alpha(0.1)).unwrap();
            let v = b.value.finite().unwrap();
            assert!(v >= 0.0);
            let sel = top_k(m, k, TieBreak::Error).unwrap();
            let eps = 1e-6;
            let below = crate::verifier::fast_check(m, &sel, v - eps, alpha(0.1)).unwrap();
            let above = crate::verifier::fast_check(m, &sel, v + eps, alpha(0.1)).unwrap();
            assert!(below.passes, "case {idx}: check fails below its root");
            assert!(!above.passes, "case {idx}: check passes above its root");
        }
    }

    #[test]
    fn tolerance_must_be_positive_and_finite() {
        let m = identity_model(vec![3.0, 0.0]);
        for tol in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                clb_exact(&m, 1, alpha(0.1), tol),
                Err(Error::InvalidTolerance { .. })
            ));
        }
    }

    #[test]
    fn default_tol_tracks_data_scale() {
        let m = identity_model(vec![3.0, 0.0]);
        assert!((default_tol(&m) - 4e-8).abs() < 1e-20);
        let m = identity_model(vec![3000.0, 0.0]);
        assert!((default_tol(&m) - 3.001e-5).abs() < 1e-15);
    }

    #[test]
    fn serde_forms() {
        let m = identity_model(vec![3.0, 0.0]);
        let finite = clb_exact(&m, 1, alpha(0.1), 1e-8).unwrap();
        let json = serde_json::to_string(&finite).unwrap();
        assert!(json.contains("\"method\":\"exact\""));
        assert!(json.contains("\"bracket\":["));
        let back: LowerBound = serde_json::from_str(&json).unwrap();
        assert_eq!(back, finite);

        let neg = clb_fast(&m, 1, alpha(1e-30)).unwrap();
        let json = serde_json::to_string(&neg).unwrap();
        assert!(json.contains("\"value\":\"minus-infinity\""));
        assert!(json.contains("\"bracket\":null"));
        let back: LowerBound = serde_json::from_str(&json).unwrap();
        assert_eq!(back.value, BoundValue::MinusInfinity);

        let unbounded = LowerBound {
            value: BoundValue::Unbounded,
            alpha: alpha(0.1),
            method: ClbMethod::Exact,
            iterations: 61,
            bracket: None,
        };
        let json = serde_json::to_string(&unbounded).unwrap();
        assert!(json.contains("\"value\":\"unbounded\""));
        let back: LowerBound = serde_json::from_str(&json).unwrap();
        assert_eq!(back, unbounded);
    }
}
