//! Scenario presets, Gaussian sampling, and conditional Monte Carlo
//! estimation of power, false-rejection rate, and lower-bound coverage.
//!
//! Everything here is conditional on the selection event: draws are
//! filtered to those whose observed top-k equals the target set, and the
//! requested rate is estimated among those draws only. A scenario carries
//! the true means that the observation model deliberately does not know.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{hsd_quantile_with_workers, hsd_verify};
use crate::clb::{clb_exact, clb_fast, default_tol, BoundValue};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::GaussianModel;
use crate::numerics::Probability;
use crate::selection::{top_k, TieBreak};
use crate::verifier::{check_alpha, decide_rejection, fast_check};

/// Fewest total draws accepted by the estimator.
pub const MIN_SIM_REPS: usize = 100;

/// Fewest conditioning-event draws below which the conditional rate is
/// reported as an error instead of a number.
pub const MIN_CONDITIONING_EVENTS: usize = 50;

/// Default mean offset, in units of the largest coordinate scale, standing
/// in for the infinitely separated blocks of the tightness construction.
/// Selection leakage at 20 scales has probability far below Monte Carlo
/// resolution.
pub const DEFAULT_TIGHTNESS_SPREAD: f64 = 20.0;

/// Draws behind the internally derived simultaneous quantile when the
/// estimator runs the HSD method.
const HSD_INTERNAL_REPS: usize = 100_000;

/// Salt mixed into the user seed for the internal quantile's generator so
/// it does not share a stream with the scenario draws.
const HSD_SEED_SALT: u64 = 0x9e3779b97f4a7c15;

/// A generative configuration: true means, covariance, and selection size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub k: usize,
    /// Preset name; scenarios named "tightness" additionally get the
    /// far-block leak check in [`estimate_conditional`].
    pub name: String,
}

/// What the conditional rate estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimand {
    /// Probability of rejecting, conditional on selecting the target set.
    Power,
    /// Same rate under a configuration where the union null is true.
    FalseRejection,
    /// Probability that the reported lower bound does not exceed the true
    /// boundary mean gap.
    ClbCoverage,
}

/// Procedure the estimator applies to each conditioning draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    /// Full selective test.
    Full,
    /// Sufficient single-pair check only.
    FastOnly,
    /// Simultaneous pairwise rule with an internally derived quantile
    /// (margin-free: `delta` is recorded but does not enter the rule).
    Hsd,
    /// Exact lower bound, for coverage.
    ClbExact,
    /// Closed-form lower bound, for coverage.
    ClbFast,
}

/// Conditional Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Draws on which the conditioning event occurred; the denominator.
    pub replicates: usize,
    pub conditioning_event_rate: f64,
    pub conditional_rate: f64,
    /// Binomial standard error of the conditional rate.
    pub std_error: f64,
    pub seed: u64,
    pub alpha: Probability,
    pub delta: f64,
    pub estimand: Estimand,
}

fn validate_scenario(s: &Scenario) -> Result<()> {
    let n = s.mu.len();
    if n < 2 || s.sigma.n() != n {
        return Err(Error::InvalidScenario {
            reason: format!(
                "means (length {n}) and covariance ({}x{}) must agree on n >= 2",
                s.sigma.n(),
                s.sigma.n()
            ),
        });
    }
    if s.mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScenario {
            reason: "means must be finite".into(),
        });
    }
    if s.k == 0 || s.k >= n {
        return Err(Error::InvalidScenario {
            reason: format!("k = {} outside [1, {}]", s.k, n - 1),
        });
    }
    Ok(())
}

/// `reps` independent draws of N(mu, sigma), one row per draw, via the
/// covariance's triangular factor. Deterministic per seed.
pub fn mvn_sample(scenario: &Scenario, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    validate_scenario(scenario)?;
    let l = scenario.sigma.cholesky()?;
    let n = scenario.mu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0; n];
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut x = vec![0.0; n];
        l.lower_mul_add(&g, &scenario.mu, &mut x);
        out.push(x);
    }
    Ok(out)
}

/// Five-coordinate preset with one strong leader, one high-variance rival,
/// and a block of laggards negatively dependent on the rival. The
/// covariance is assembled from the generative loadings rather than entered
/// by hand: X1 = Z1 + 5, X2 = sqrt(5) Z2 + 3, and Xj = -sqrt(5) Z2 +
/// sqrt(0.1) Zj for j > 2, so the laggards move against the rival, and a
/// single-pair check badly underuses the structure. Selection size 1.
pub fn scenario_negative_dependence() -> Scenario {
    let s2 = 5.0_f64.sqrt();
    let s3 = 0.1_f64.sqrt();
    let loadings: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, s2, 0.0, 0.0, 0.0],
        [0.0, -s2, s3, 0.0, 0.0],
        [0.0, -s2, 0.0, s3, 0.0],
        [0.0, -s2, 0.0, 0.0, s3],
    ];
    let mut sigma = Matrix::zeros(5);
    for i in 0..5 {
        for j in 0..5 {
            let mut acc = 0.0;
            for t in 0..5 {
                acc += loadings[i][t] * loadings[j][t];
            }
            sigma.set(i, j, acc);
        }
    }
    Scenario {
        mu: vec![5.0, 3.0, 0.0, 0.0, 0.0],
        sigma,
        k: 1,
        name: "negative-dependence".into(),
    }
}

/// Boundary-tight preset: the k-th mean sits exactly `delta` above the
/// (k+1)-th, while every other coordinate is pushed `spread` scales away
/// (above if among the first k-1, below otherwise) so only the boundary
/// pair is ever in play. With `delta = 0` the union null holds with
/// equality and the test's conditional false-rejection rate is exactly the
/// level.
pub fn scenario_tightness(
    n: usize,
    k: usize,
    delta: f64,
    sigma: Matrix,
    spread: f64,
) -> Result<Scenario> {
    if sigma.n() != n || n < 2 {
        return Err(Error::InvalidScenario {
            reason: format!("covariance is {}x{} but n = {n}", sigma.n(), sigma.n()),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidScenario {
            reason: format!("k = {k} outside [1, {}]", n - 1),
        });
    }
    if !spread.is_finite() || spread <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidScenario {
            reason: format!("spread {spread} and delta {delta} must be finite, spread positive"),
        });
    }
    let scale = (0..n)
        .map(|i| sigma.get(i, i))
        .fold(0.0_f64, f64::max)
        .sqrt();
    if !(scale > 0.0) {
        return Err(Error::InvalidScenario {
            reason: "covariance has no positive diagonal entry".into(),
        });
    }
    let mut mu = vec![0.0; n];
    for m in mu.iter_mut().take(k.saturating_sub(1)) {
        *m = spread * scale;
    }
    mu[k - 1] = delta;
    mu[k] = 0.0;
    for m in mu.iter_mut().skip(k + 1) {
        *m = -spread * scale;
    }
    Ok(Scenario {
        mu,
        sigma,
        k,
        name: "tightness".into(),
    })
}

struct ChunkSpec<'a> {
    scenario: &'a Scenario,
    l: &'a Matrix,
    target: &'a [usize],
    delta: f64,
    alpha: Probability,
    alpha_value: f64,
    method: SimMethod,
    true_gap: f64,
    hsd: Option<&'a crate::baselines::HsdQuantile>,
    tightness_guard: bool,
}

/// Per-worker draw loop; returns (conditioning events, hits, leaked draws).
fn run_chunk(spec: &ChunkSpec<'_>, count: usize, seed: u64, stream: u64) -> Result<(usize, usize, usize)> {
    let n = spec.scenario.mu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut g = vec![0.0; n];
    let (mut events, mut hits, mut leaked) = (0usize, 0usize, 0usize);
    for _ in 0..count {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut x = vec![0.0; n];
        spec.l.lower_mul_add(&g, &spec.scenario.mu, &mut x);
        let model = GaussianModel::new(x, spec.scenario.sigma.clone())?;
        let sel = top_k(&model, spec.scenario.k, TieBreak::BreakLowIndex)?;
        if spec.tightness_guard && sel.inside().iter().any(|&i| i > spec.scenario.k) {
            leaked += 1;
        }
        if sel.inside() != spec.target {
            continue;
        }
        events += 1;
        let hit = match spec.method {
            SimMethod::Full => decide_rejection(&model, &sel, spec.delta, spec.alpha_value)?,
            SimMethod::FastOnly => fast_check(&model, &sel, spec.delta, spec.alpha)?.passes,
            SimMethod::Hsd => hsd_verify(
                &model,
                spec.scenario.k,
                spec.alpha,
                spec.hsd.expect("quantile precomputed for the hsd method"),
            )?,
            SimMethod::ClbExact => {
                let tol = default_tol(&model);
                covers(clb_exact(&model, spec.scenario.k, spec.alpha, tol)?.value, spec.true_gap)
            }
            SimMethod::ClbFast => {
                covers(clb_fast(&model, spec.scenario.k, spec.alpha)?.value, spec.true_gap)
            }
        };
        if hit {
            hits += 1;
        }
    }
    Ok((events, hits, leaked))
}

fn covers(bound: BoundValue, true_gap: f64) -> bool {
    match bound {
        BoundValue::Finite(v) => v <= true_gap,
        BoundValue::MinusInfinity => true,
        BoundValue::Unbounded => false,
    }
}

/// Single-worker [`estimate_conditional_with_workers`].
#[allow(clippy::too_many_arguments)]
pub fn estimate_conditional(
    scenario: &Scenario,
    target_s: &[usize],
    delta: f64,
    alpha: Probability,
    method: SimMethod,
    estimand: Estimand,
    reps: usize,
    seed: u64,
) -> Result<SimResult> {
    estimate_conditional_with_workers(scenario, target_s, delta, alpha, method, estimand, reps, seed, 1)
}

/// Draws `reps` observations from the scenario, keeps those whose observed
/// top-k equals `target_s`, applies the chosen procedure to each, and
/// returns the conditional rate with its binomial standard error.
///
/// Draws are partitioned across `workers` seeded RNG streams; counts merge
/// order-independently, so the result is deterministic for a fixed
/// (seed, workers).
///
/// # Errors
/// [`Error::TooFewReps`] below [`MIN_SIM_REPS`];
/// [`Error::InvalidScenario`] for dimension or target-set violations, a
/// false-rejection estimand whose means do not satisfy the union null at
/// `delta`, a method/estimand mismatch, or (for scenarios named
/// "tightness") any draw that selected a far-block coordinate;
/// [`Error::InsufficientConditioning`] when fewer than
/// [`MIN_CONDITIONING_EVENTS`] draws hit the conditioning event.
#[allow(clippy::too_many_arguments)]
pub fn estimate_conditional_with_workers(
    scenario: &Scenario,
    target_s: &[usize],
    delta: f64,
    alpha: Probability,
    method: SimMethod,
    estimand: Estimand,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<SimResult> {
    let alpha_value = check_alpha(alpha)?;
    validate_scenario(scenario)?;
    if reps < MIN_SIM_REPS {
        return Err(Error::TooFewReps {
            reps,
            min: MIN_SIM_REPS,
        });
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite {
            context: "conditional estimation margin",
            value: delta,
        });
    }
    let n = scenario.mu.len();
    let mut target = target_s.to_vec();
    target.sort_unstable();
    target.dedup();
    if target.len() != scenario.k || target_s.len() != scenario.k
        || target.iter().any(|&i| i >= n)
    {
        return Err(Error::InvalidScenario {
            reason: format!(
                "target set must be {} distinct indices below {n}, got {target_s:?}",
                scenario.k
            ),
        });
    }
    let coverage_method = matches!(method, SimMethod::ClbExact | SimMethod::ClbFast);
    if (estimand == Estimand::ClbCoverage) != coverage_method {
        return Err(Error::InvalidScenario {
            reason: "clb-coverage pairs with the bound methods (clb-exact, clb-fast) and the \
                     other estimands with the test methods (full, fast-only, hsd)"
                .into(),
        });
    }
    let mu_in_min = target
        .iter()
        .map(|&i| scenario.mu[i])
        .fold(f64::INFINITY, f64::min);
    let mu_out_max = (0..n)
        .filter(|i| target.binary_search(i).is_err())
        .map(|i| scenario.mu[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let true_gap = mu_in_min - mu_out_max;
    if estimand == Estimand::FalseRejection && true_gap > delta {
        return Err(Error::InvalidScenario {
            reason: format!(
                "false-rejection needs a true union null on the target: mean boundary gap \
                 {true_gap} exceeds the margin {delta}"
            ),
        });
    }
    let workers = workers.max(1).min(reps);
    let hsd = match method {
        SimMethod::Hsd => Some(hsd_quantile_with_workers(
            &scenario.sigma,
            alpha,
            HSD_INTERNAL_REPS,
            seed ^ HSD_SEED_SALT,
            workers,
        )?),
        _ => None,
    };
    let l = scenario.sigma.cholesky()?;
    let spec = ChunkSpec {
        scenario,
        l: &l,
        target: &target,
        delta,
        alpha,
        alpha_value,
        method,
        true_gap,
        hsd: hsd.as_ref(),
        tightness_guard: scenario.name == "tightness",
    };

    let (mut events, mut hits, mut leaked) = (0usize, 0usize, 0usize);
    if workers == 1 {
        (events, hits, leaked) = run_chunk(&spec, reps, seed, 0)?;
    } else {
        let base = reps / workers;
        let rem = reps % workers;
        let chunks: Vec<Result<(usize, usize, usize)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let spec = &spec;
                    let count = base + usize::from(w < rem);
                    s.spawn(move || run_chunk(spec, count, seed, w as u64))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation worker panicked"))
                .collect()
        });
        for chunk in chunks {
            let (e, h, lk) = chunk?;
            events += e;
            hits += h;
            leaked += lk;
        }
    }

    if leaked > 0 {
        return Err(Error::InvalidScenario {
            reason: format!(
                "{leaked} of {reps} draws selected a far-block coordinate; the spread no \
                 longer stands in for infinite separation"
            ),
        });
    }
    let conditioning_event_rate = events as f64 / reps as f64;
    if events < MIN_CONDITIONING_EVENTS {
        return Err(Error::InsufficientConditioning {
            events,
            reps,
            rate: conditioning_event_rate,
            needed: MIN_CONDITIONING_EVENTS,
        });
    }
    let conditional_rate = hits as f64 / events as f64;
    let std_error = (conditional_rate * (1.0 - conditional_rate) / events as f64).sqrt();
    Ok(SimResult {
        replicates: events,
        conditioning_event_rate,
        conditional_rate,
        std_error,
        seed,
        alpha,
        delta,
        estimand,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cov_diagonal;

    fn alpha(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn identity(n: usize) -> Matrix {
        cov_diagonal(&vec![1.0; n]).unwrap()
    }

    #[test]
    fn negative_dependence_covariance_from_loadings() {
        let s = scenario_negative_dependence();
        assert_eq!(s.k, 1);
        assert_eq!(s.mu, vec![5.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.name, "negative-dependence");
        let sig = &s.sigma;
        assert_eq!(sig.get(0, 0), 1.0);
        assert!((sig.get(1, 1) - 5.0).abs() < 1e-14);
        assert!((sig.get(1, 2) + 5.0).abs() < 1e-14);
        assert!((sig.get(2, 3) - 5.0).abs() < 1e-14);
        assert!((sig.get(2, 2) - 5.1).abs() < 1e-14);
        assert_eq!(sig.get(0, 1), 0.0);
        // Difference variance of the leader/rival pair.
        let v2 = sig.get(0, 0) + sig.get(1, 1) - 2.0 * sig.get(0, 1);
        assert!((v2 - 6.0).abs() < 1e-14);
        assert!(sig.cholesky().is_ok());
    }

    #[test]
    fn tightness_layouts() {
        let s = scenario_tightness(5, 1, 0.0, identity(5), 20.0).unwrap();
        assert_eq!(s.mu, vec![0.0, 0.0, -20.0, -20.0, -20.0]);
        let s = scenario_tightness(5, 2, 0.0, identity(5), 20.0).unwrap();
        assert_eq!(s.mu, vec![20.0, 0.0, 0.0, -20.0, -20.0]);
        let s = scenario_tightness(3, 1, 1.0, identity(3), 20.0).unwrap();
        assert_eq!(s.mu, vec![1.0, 0.0, -20.0]);
        assert_eq!(s.name, "tightness");
        // Scale follows the largest diagonal entry.
        let s = scenario_tightness(3, 1, 0.0, cov_diagonal(&[1.0, 4.0, 1.0]).unwrap(), 20.0)
            .unwrap();
        assert_eq!(s.mu[2], -40.0);
        assert!(scenario_tightness(3, 0, 0.0, identity(3), 20.0).is_err());
        assert!(scenario_tightness(3, 1, 0.0, identity(4), 20.0).is_err());
        assert!(scenario_tightness(3, 1, 0.0, identity(3), -1.0).is_err());
    }

    #[test]
    fn mvn_sample_moments_and_determinism() {
        let s = Scenario {
            mu: vec![0.0, 0.0],
            sigma: cov_diagonal(&[4.0, 1.0]).unwrap(),
            k: 1,
            name: "moments".into(),
        };
        let reps = 100_000;
        let draws = mvn_sample(&s, reps, 21).unwrap();
        assert_eq!(draws.len(), reps);
        let mean0: f64 = draws.iter().map(|r| r[0]).sum::<f64>() / reps as f64;
        let mean1: f64 = draws.iter().map(|r| r[1]).sum::<f64>() / reps as f64;
        assert!(mean0.abs() < 4.0 * 2.0 / (reps as f64).sqrt());
        assert!(mean1.abs() < 4.0 / (reps as f64).sqrt());
        let var0: f64 =
            draws.iter().map(|r| (r[0] - mean0).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((var0 - 4.0).abs() < 0.4, "var0 = {var0}");
        let again = mvn_sample(&s, reps, 21).unwrap();
        assert_eq!(draws, again);
        let other = mvn_sample(&s, reps, 22).unwrap();
        assert_ne!(draws, other);
    }

    // At zero margin, the self-pair constraint pins each window's lower end
    // at the observed statistic's null median, and mate pairs bound the
    // upper truncation from below by twice the smallest statistic; the full
    // test therefore adds only a vanishing sf(2 z) term over the two-sided
    // single-pair check, and the two decisions coincide on essentially
    // every draw of this scenario (the conditional rate 0.0566 here is
    // reproduced by an independent implementation of the procedure).
    #[test]
    fn full_and_fast_agree_on_negative_dependence() {
        let s = scenario_negative_dependence();
        let run = |method| {
            estimate_conditional(&s, &[0], 0.0, alpha(0.1), method, Estimand::Power, 4000, 5)
                .unwrap()
        };
        let full = run(SimMethod::Full);
        let fast = run(SimMethod::FastOnly);
        assert!(full.replicates >= 2000, "only {} conditional draws", full.replicates);
        assert!(full.conditioning_event_rate > 0.5);
        assert!(full.conditional_rate >= fast.conditional_rate);
        assert!(
            (full.conditional_rate - fast.conditional_rate).abs() < 2.5 / full.replicates as f64,
            "full = {} fast = {}",
            full.conditional_rate,
            fast.conditional_rate
        );
        assert!(
            (full.conditional_rate - 0.0566).abs() < 0.025,
            "full = {}",
            full.conditional_rate
        );
    }

    #[test]
    fn fast_only_power_on_negative_dependence_is_small() {
        let s = scenario_negative_dependence();
        let r = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::FastOnly,
            Estimand::Power,
            5000,
            5,
        )
        .unwrap();
        assert!(
            (r.conditional_rate - 0.057).abs() < 0.02,
            "rate = {}",
            r.conditional_rate
        );
    }

    #[test]
    fn hsd_power_never_beats_full() {
        let s = scenario_negative_dependence();
        let full = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::Full,
            Estimand::Power,
            2000,
            9,
        )
        .unwrap();
        let hsd = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::Hsd,
            Estimand::Power,
            2000,
            9,
        )
        .unwrap();
        assert!(hsd.conditional_rate <= full.conditional_rate);
    }

    #[test]
    fn tightness_false_rejection_matches_level() {
        let s = scenario_tightness(5, 1, 0.0, identity(5), 20.0).unwrap();
        let r = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::Full,
            Estimand::FalseRejection,
            6000,
            13,
        )
        .unwrap();
        assert!(r.replicates > 2500);
        assert!(
            (r.conditional_rate - 0.1).abs() < 0.02,
            "rate = {} (se {})",
            r.conditional_rate,
            r.std_error
        );
    }

    #[test]
    fn false_rejection_requires_a_true_null() {
        // The leader's mean exceeds everyone else's by 2 > delta = 0.
        let s = scenario_negative_dependence();
        assert!(matches!(
            estimate_conditional(
                &s,
                &[0],
                0.0,
                alpha(0.1),
                SimMethod::Full,
                Estimand::FalseRejection,
                1000,
                1,
            ),
            Err(Error::InvalidScenario { .. })
        ));
    }

    #[test]
    fn clb_coverage_near_nominal_on_tightness() {
        let s = scenario_tightness(4, 1, 0.0, identity(4), 20.0).unwrap();
        let exact = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::ClbExact,
            Estimand::ClbCoverage,
            4000,
            17,
        )
        .unwrap();
        assert!(
            (exact.conditional_rate - 0.9).abs() < 0.025,
            "exact coverage = {}",
            exact.conditional_rate
        );
        let fast = estimate_conditional(
            &s,
            &[0],
            0.0,
            alpha(0.1),
            SimMethod::ClbFast,
            Estimand::ClbCoverage,
            4000,
            17,
        )
        .unwrap();
        assert!(fast.conditional_rate >= 0.88, "fast coverage = {}", fast.conditional_rate);
    }

    #[test]
    fn unreachable_target_reports_insufficient_conditioning() {
        let s = scenario_tightness(3, 1, 0.0, identity(3), 20.0).unwrap();
        let err = estimate_conditional(
            &s,
            &[2],
            0.0,
            alpha(0.1),
            SimMethod::Full,
            Estimand::Power,
            500,
            3,
        )
        .unwrap_err();
        match err {
            Error::InsufficientConditioning { events, reps, needed, .. } => {
                assert_eq!(events, 0);
                assert_eq!(reps, 500);
                assert_eq!(needed, MIN_CONDITIONING_EVENTS);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn configuration_validation() {
        let s = scenario_negative_dependence();
        // Wrong target size.
        assert!(matches!(
            estimate_conditional(&s, &[0, 1], 0.0, alpha(0.1), SimMethod::Full, Estimand::Power, 1000, 1),
            Err(Error::InvalidScenario { .. })
        ));
        // Out-of-range index.
        assert!(matches!(
            estimate_conditional(&s, &[9], 0.0, alpha(0.1), SimMethod::Full, Estimand::Power, 1000, 1),
            Err(Error::InvalidScenario { .. })
        ));
        // Estimand/method mismatches.
        assert!(matches!(
            estimate_conditional(&s, &[0], 0.0, alpha(0.1), SimMethod::ClbExact, Estimand::Power, 1000, 1),
            Err(Error::InvalidScenario { .. })
        ));
        assert!(matches!(
            estimate_conditional(&s, &[0], 0.0, alpha(0.1), SimMethod::Full, Estimand::ClbCoverage, 1000, 1),
            Err(Error::InvalidScenario { .. })
        ));
        // Too few draws.
        assert!(matches!(
            estimate_conditional(&s, &[0], 0.0, alpha(0.1), SimMethod::Full, Estimand::Power, 99, 1),
            Err(Error::TooFewReps { .. })
        ));
    }

    #[test]
    fn deterministic_and_worker_stable() {
        let s = scenario_negative_dependence();
        let run = |seed, workers| {
            estimate_conditional_with_workers(
                &s,
                &[0],
                0.0,
                alpha(0.1),
                SimMethod::FastOnly,
                Estimand::Power,
                1500,
                seed,
                workers,
            )
            .unwrap()
        };
        let a = run(31, 1);
        assert_eq!(a, run(31, 1));
        let b = run(31, 3);
        assert_eq!(b, run(31, 3));
        // The event count is recoverable from the rate exactly.
        assert_eq!((a.conditioning_event_rate * 1500.0).round() as usize, a.replicates);
        assert_ne!(a, run(32, 1));
    }

    #[test]
    fn serde_names_are_kebab_case() {
        assert_eq!(serde_json::to_string(&Estimand::ClbCoverage).unwrap(), "\"clb-coverage\"");
        assert_eq!(serde_json::to_string(&Estimand::FalseRejection).unwrap(), "\"false-rejection\"");
        assert_eq!(serde_json::to_string(&SimMethod::FastOnly).unwrap(), "\"fast-only\"");
        assert_eq!(serde_json::to_string(&SimMethod::ClbExact).unwrap(), "\"clb-exact\"");
        let s = scenario_tightness(3, 1, 0.5, identity(3), 20.0).unwrap();
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let r = estimate_conditional(
            &s,
            &[0],
            0.5,
            alpha(0.1),
            SimMethod::Full,
            Estimand::Power,
            1000,
            2,
        )
        .unwrap();
        let back: SimResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
