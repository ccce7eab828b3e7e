//! Standard-normal primitives tuned for tail work.
//!
//! Every p-value in this crate is a ratio of survival-function differences
//! whose terms can sit near 1e-300, so the survival function is computed
//! through complementary-error-function machinery rather than as `1 - cdf`,
//! and [`sf_ratio`] switches to a log-space path when the direct denominator
//! underflows. The infinities `f64::INFINITY` and `f64::NEG_INFINITY` are
//! accepted as first-class interval endpoints: an empty bound set is encoded
//! as an infinite endpoint instead of a caller-side branch.

mod erf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub(crate) use erf::{erf, erfc};

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779;
const HALF_LN_2PI: f64 = 0.9189385332046727418;

/// Threshold below which the direct survival-difference denominator is
/// considered underflow-endangered and the log-space path takes over.
const LOG_PATH_THRESHOLD: f64 = 1e-250;

/// A probability, guaranteed to lie in [0, 1].
///
/// Construction clamps values within 1e-15 of either boundary (roundoff from
/// upstream arithmetic) and rejects anything further out.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    const CLAMP: f64 = 1e-15;

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::NonFinite {
                context: "Probability::new",
                value,
            });
        }
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else if value > -Self::CLAMP && value < 0.0 {
            Ok(Probability(0.0))
        } else if value > 1.0 && value < 1.0 + Self::CLAMP {
            Ok(Probability(1.0))
        } else {
            Err(Error::InvalidProbability { value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Probability::new(v).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn raw_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn raw_sf(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn raw_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * FRAC_1_SQRT_2PI
}

/// Standard normal cumulative distribution function.
///
/// Absolute error stays below 1e-14 for |x| <= 8, and the implementation is
/// monotone non-decreasing. Large finite arguments saturate to 0 or 1.
///
/// # Errors
/// Non-finite input.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            context: "std_normal_cdf",
            value: x,
        });
    }
    Probability::new(raw_cdf(x))
}

/// Standard normal survival function 1 - cdf, computed directly so relative
/// error stays below 1e-12 out to x = 37.
///
/// Infinite arguments follow the interval-endpoint convention:
/// `sf(-inf) = 1`, `sf(inf) = 0`.
///
/// # Errors
/// NaN input.
pub fn std_normal_sf(x: f64) -> Result<Probability> {
    if x.is_nan() {
        return Err(Error::NonFinite {
            context: "std_normal_sf",
            value: x,
        });
    }
    Probability::new(raw_sf(x))
}

// Quantile rational approximations (Wichura's PPND16 regimes), polished with
// one Newton step against the cdf/sf above so the result is consistent with
// this module's own distribution functions to the last bit that matters.
const QA: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const QB: [f64; 7] = [
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const QC: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const QD: [f64; 7] = [
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const QE: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const QF: [f64; 7] = [
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn rational(r: f64, num: &[f64; 8], den: &[f64; 7]) -> f64 {
    let mut p = num[7];
    for c in num[..7].iter().rev() {
        p = p * r + c;
    }
    let mut q = den[6];
    for c in den[..6].iter().rev() {
        q = q * r + c;
    }
    p / (q * r + 1.0)
}

/// Standard normal quantile (inverse cdf).
///
/// Round-trips with [`std_normal_cdf`] to 1e-10 in x for p in
/// [1e-12, 1 - 1e-12].
///
/// # Errors
/// p = 0 or p = 1.
pub fn std_normal_quantile(p: Probability) -> Result<f64> {
    let p = p.value();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::QuantileDomain { p });
    }
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * rational(r, &QA, &QB)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let r = (-tail.ln()).sqrt();
        let mag = if r <= 5.0 {
            rational(r - 1.6, &QC, &QD)
        } else {
            rational(r - 5.0, &QE, &QF)
        };
        if q < 0.0 {
            -mag
        } else {
            mag
        }
    };
    if x.abs() <= 37.0 {
        let density = raw_pdf(x);
        if p <= 0.5 {
            x -= (raw_cdf(x) - p) / density;
        } else {
            x += ((1.0 - p) - raw_sf(x)) / density;
        }
    }
    Ok(x)
}

/// Log of the survival function, usable far beyond where `sf` underflows.
///
/// Below x = 30 this is the log of the direct value (with a log1p detour on
/// the negative side where sf is near 1); from 30 on it switches to the
/// asymptotic expansion sf(x) = pdf(x)/x * (1 - 1/x^2 + 3/x^4 - ...), whose
/// terms shrink far below double precision long before the series turns.
pub(crate) fn log_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < 0.0 {
        return (-raw_cdf(x)).ln_1p();
    }
    if x < 30.0 {
        return raw_sf(x).ln();
    }
    let half_x2 = 0.5 * x * x;
    if !half_x2.is_finite() {
        return f64::NEG_INFINITY;
    }
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut s = 0.0;
    for k in 1..=24u32 {
        term *= -f64::from(2 * k - 1) * inv2;
        s += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    -half_x2 - x.ln() - HALF_LN_2PI + s.ln_1p()
}

/// P(a < Z < b) for a standard normal, organized to avoid catastrophic
/// cancellation: both-positive intervals subtract survival functions,
/// both-negative intervals mirror, and straddling intervals difference the
/// error function directly (opposite signs add, so no cancellation).
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let mass = if a >= 0.0 {
        raw_sf(a) - raw_sf(b)
    } else if b <= 0.0 {
        raw_sf(-b) - raw_sf(-a)
    } else {
        0.5 * (erf(b * std::f64::consts::FRAC_1_SQRT_2)
            - erf(a * std::f64::consts::FRAC_1_SQRT_2))
    };
    mass.max(0.0)
}

/// log P(a < Z < b), for intervals whose mass underflows a double.
/// Same-sign tail intervals combine `log_sf` values through log1p; a
/// straddling interval cannot cancel, so its direct mass is logged.
pub(crate) fn normal_mass_log(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        let la = log_sf(a);
        let lb = log_sf(b);
        let d = lb - la;
        if !(d < 0.0) {
            return f64::NEG_INFINITY;
        }
        la + (-d.exp()).ln_1p()
    } else if b <= 0.0 {
        normal_mass_log(-b, -a)
    } else {
        normal_mass(a, b).ln()
    }
}

/// Ratio of normal masses `P(num_lo < Z < num_hi) / P(den_lo < Z < den_hi)`
/// for a numerator interval nested inside the denominator interval.
///
/// Written in survival-function terms this is
/// `[sf(num_lo) - sf(num_hi)] / [sf(den_lo) - sf(den_hi)]`.
/// When the denominator is large enough to trust in direct arithmetic
/// (>= 1e-250) the ratio is formed directly; otherwise both masses move to
/// log space. Either way the result is clamped into [0, 1].
///
/// Infinite endpoints are first-class: `sf_ratio(x, INFINITY, y, INFINITY)`
/// is the usual one-sided tail ratio.
///
/// # Errors
/// NaN endpoints, a numerator not nested in the denominator, or a
/// denominator interval carrying no mass.
pub fn sf_ratio(num_lo: f64, num_hi: f64, den_lo: f64, den_hi: f64) -> Result<Probability> {
    for v in [num_lo, num_hi, den_lo, den_hi] {
        if v.is_nan() {
            return Err(Error::NonFinite {
                context: "sf_ratio",
                value: v,
            });
        }
    }
    if !(den_lo <= num_lo && num_lo <= num_hi && num_hi <= den_hi) {
        return Err(Error::InvalidModel {
            violations: vec![format!(
                "sf_ratio numerator [{num_lo}, {num_hi}] not nested in denominator [{den_lo}, {den_hi}]"
            )],
        });
    }
    if den_lo == den_hi {
        return Err(Error::DegenerateTruncation {
            lo: den_lo,
            hi: den_hi,
        });
    }
    let den = normal_mass(den_lo, den_hi);
    if den >= LOG_PATH_THRESHOLD {
        let num = normal_mass(num_lo, num_hi);
        return Probability::new((num / den).min(1.0));
    }
    let log_den = normal_mass_log(den_lo, den_hi);
    if log_den == f64::NEG_INFINITY {
        return Err(Error::DegenerateTruncation {
            lo: den_lo,
            hi: den_hi,
        });
    }
    if num_lo == num_hi {
        return Probability::new(0.0);
    }
    let log_num = normal_mass_log(num_lo, num_hi);
    Probability::new((log_num - log_den).min(0.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn rel_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * b.abs(), "{a} vs {b} (rel tol {tol})");
    }

    #[test]
    fn probability_bounds() {
        assert_eq!(Probability::new(0.25).unwrap().value(), 0.25);
        assert_eq!(Probability::new(-5e-16).unwrap().value(), 0.0);
        assert_eq!(Probability::new(1.0 + 5e-16).unwrap().value(), 1.0);
        assert!(Probability::new(-1e-14).is_err());
        assert!(Probability::new(1.00001).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0).unwrap().value(), 0.5);
        assert_eq!(std_normal_cdf(40.0).unwrap().value(), 1.0);
        assert_eq!(std_normal_cdf(-40.0).unwrap().value(), 0.0);
        // Independent arbitrary-precision reference.
        abs_close(
            std_normal_cdf(1.4142135).unwrap().value(),
            0.92135038732081549119,
            1e-14,
        );
        assert!(std_normal_cdf(f64::INFINITY).is_err());
        assert!(std_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn sf_reference_points() {
        assert_eq!(std_normal_sf(0.0).unwrap().value(), 0.5);
        assert_eq!(std_normal_sf(f64::NEG_INFINITY).unwrap().value(), 1.0);
        assert_eq!(std_normal_sf(f64::INFINITY).unwrap().value(), 0.0);
        rel_close(std_normal_sf(10.0).unwrap().value(), 7.619853024160526066e-24, 1e-13);
        rel_close(std_normal_sf(37.0).unwrap().value(), 5.7255712225245768227e-300, 1e-12);
        assert!(std_normal_sf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_sf_complement() {
        for i in 0..=8000 {
            let x = -8.0 + i as f64 * 0.002;
            abs_close(raw_cdf(x), 1.0 - raw_sf(x), 1e-14);
            abs_close(raw_cdf(x) - std_normal_sf(-x).unwrap().value(), 0.0, 1e-13);
        }
    }

    #[test]
    fn quantile_reference_points() {
        assert_eq!(std_normal_quantile(Probability::new(0.5).unwrap()).unwrap(), 0.0);
        // Independent arbitrary-precision references.
        abs_close(
            std_normal_quantile(Probability::new(0.975).unwrap()).unwrap(),
            1.9599639845400542355,
            1e-12,
        );
        abs_close(
            std_normal_quantile(Probability::new(0.95).unwrap()).unwrap(),
            1.6448536269514727149,
            1e-12,
        );
        abs_close(
            std_normal_quantile(Probability::new(0.99).unwrap()).unwrap(),
            2.3263478740408411009,
            1e-12,
        );
        abs_close(
            std_normal_quantile(Probability::new(0.9).unwrap()).unwrap(),
            1.281551565544600467,
            1e-12,
        );
        assert!(std_normal_quantile(Probability::new(0.0).unwrap()).is_err());
        assert!(std_normal_quantile(Probability::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn quantile_round_trip() {
        let mut p = 1e-12;
        while p < 0.5 {
            for q in [p, 1.0 - p] {
                let x = std_normal_quantile(Probability::new(q).unwrap()).unwrap();
                let back = raw_cdf(x);
                assert!(
                    (back - q).abs() <= 1e-12,
                    "p = {q}: quantile {x}, cdf back {back}"
                );
            }
            p *= 3.7;
        }
    }

    #[test]
    fn log_sf_matches_reference() {
        // Independent arbitrary-precision references.
        let table = [
            (1.0, -1.841021645009263505771),
            (5.0, -15.06499839398872573608),
            (8.0, -35.0134371599145498955),
            (10.0, -53.23128515051247057835),
            (20.0, -203.9171553710972639368),
            (37.0, -689.0305855768905936009),
            (38.0, -726.5572160188201300965),
            (50.0, -1254.831361139419901254),
            (100.0, -5005.524208694205088626),
            (200.0, -20006.21728089819040209),
        ];
        for (x, expect) in table {
            rel_close(log_sf(x), expect, 1e-13);
        }
        assert_eq!(log_sf(f64::INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_sf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn log_sf_continuous_at_crossover() {
        // At the branch point both formulas are well-conditioned; they must
        // agree to roundoff.
        rel_close(log_sf(30.0), raw_sf(30.0).ln(), 1e-13);
        let below = log_sf(29.999999);
        let above = log_sf(30.000001);
        assert!(below > above);
        // The jump across the boundary is the hazard rate times the step.
        let hazard = raw_pdf(30.0) / raw_sf(30.0);
        abs_close(above - below, -hazard * 2e-6, 1e-9);
    }

    #[test]
    fn sf_ratio_trivial_cases() {
        assert_eq!(
            sf_ratio(0.0, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY)
                .unwrap()
                .value(),
            0.5
        );
        assert_eq!(
            sf_ratio(3.2, f64::INFINITY, 3.2, f64::INFINITY).unwrap().value(),
            1.0
        );
        assert_eq!(sf_ratio(2.0, 2.0, 1.0, 3.0).unwrap().value(), 0.0);
    }

    #[test]
    fn sf_ratio_log_path_tail() {
        // den = sf(37) is ~5.7e-300, far below the direct threshold.
        let r = sf_ratio(38.0, f64::INFINITY, 37.0, f64::INFINITY).unwrap().value();
        rel_close(r, 5.0395467070908464344e-17, 1e-6);
    }

    #[test]
    fn sf_ratio_direct_reference_values() {
        // Independent arbitrary-precision references for interior intervals.
        let cases = [
            (7.5, 8.5, 7.0, 9.0, 0.024925087787035193242),
            (12.0, 13.0, 11.5, 14.0, 0.0026933559014693058454),
            (20.5, 21.0, 20.0, 22.0, 3.9091556680719051401e-5),
        ];
        for (nl, nh, dl, dh, expect) in cases {
            rel_close(sf_ratio(nl, nh, dl, dh).unwrap().value(), expect, 1e-11);
        }
        // Denominator ~4.9e-198 forces the log path.
        rel_close(
            sf_ratio(30.2, 31.0, 30.0, 32.0).unwrap().value(),
            0.0024136142766168510502,
            1e-9,
        );
    }

    #[test]
    fn sf_ratio_paths_agree_on_overlap() {
        // Walk tail intervals whose denominator spans [1e-250, 1e-12] and
        // compare the direct ratio against a forced log-space evaluation.
        let mut a: f64 = 7.0;
        while a < 33.0 {
            let (dl, dh) = (a, a + 2.0);
            let (nl, nh) = (a + 0.25, a + 1.25);
            let den = normal_mass(dl, dh);
            assert!(den >= LOG_PATH_THRESHOLD);
            let direct = normal_mass(nl, nh) / den;
            let logged = (normal_mass_log(nl, nh) - normal_mass_log(dl, dh)).exp();
            rel_close(logged, direct, 1e-9);
            a += 0.37;
        }
    }

    #[test]
    fn sf_ratio_rejects_bad_intervals() {
        assert!(sf_ratio(0.0, 1.0, 0.5, 2.0).is_err());
        assert!(sf_ratio(0.0, 3.0, -1.0, 2.0).is_err());
        assert!(sf_ratio(1.0, 2.0, f64::NAN, 3.0).is_err());
        assert!(matches!(
            sf_ratio(1.0, 1.0, 1.0, 1.0),
            Err(Error::DegenerateTruncation { .. })
        ));
    }

    #[test]
    fn sf_monotone_and_strict_off_saturation() {
        let mut prev = raw_sf(-37.0);
        let mut x = -37.0;
        for i in 1..=100_000 {
            x = -37.0 + 74.0 * i as f64 / 100_000.0;
            let s = raw_sf(x);
            assert!(s <= prev, "sf increased at x = {x}");
            if prev < 1.0 - 1e-13 && s > 0.0 {
                assert!(s < prev, "sf plateaued at x = {x} off saturation");
            }
            prev = s;
        }
        assert!(x >= 37.0);
    }

    #[test]
    fn cdf_bitwise_monotone() {
        let mut prev = raw_cdf(-40.0);
        for i in 1..=100_000 {
            let x = -40.0 + 80.0 * i as f64 / 100_000.0;
            let c = raw_cdf(x);
            assert!(c >= prev, "cdf decreased at x = {x}");
            prev = c;
        }
    }
}
