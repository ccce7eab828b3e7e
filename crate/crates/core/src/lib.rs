//! Verification of top-k rankings for multivariate Gaussian observations
//! with a known covariance.
//!
//! Given observations `x ~ N(mu, sigma)` and a claimed top set of size `k`,
//! the question is whether the `k` coordinates with the largest *observed*
//! values verifiably have the `k` largest *means*, with every selected mean
//! ahead of every unselected one by at least a margin `delta`. The test
//! conditions on the selection event itself, so it stays valid even though
//! the hypothesis was chosen by looking at the data: each selected/unselected
//! pair gets a truncated-Gaussian p-value, and the claim is accepted at
//! level `alpha` only when every pair's p-value is at or below `alpha`.
//!
//! The crate also ships the pieces around that test:
//!
//! * [`verifier`]: the test itself, a cheap sufficient check on the closest
//!   pair, and detection of covariance families where the cheap check is
//!   exactly equivalent.
//! * [`clb`]: confidence lower bounds on the boundary mean gap by inverting
//!   the test over the margin.
//! * [`baselines`]: a simultaneous pairwise-comparison baseline with a Monte
//!   Carlo quantile, provably dominated by the selective test.
//! * [`sim`]: a conditional Monte Carlo harness for power, false-rejection,
//!   and coverage estimates.
//! * [`model`], [`selection`], [`matrix`], [`numerics`]: the observation
//!   model, top-k selection, dense symmetric matrices, and the normal-tail
//!   kernel everything rests on.
//!
//! # Example
//!
//! ```
//! use rank_verify::model::{cov_diagonal, GaussianModel};
//! use rank_verify::numerics::Probability;
//! use rank_verify::verifier::{verify, Method};
//! use rank_verify::clb::{clb_exact, default_tol, BoundValue};
//!
//! let sigma = cov_diagonal(&[1.0, 1.0, 1.0])?;
//! let model = GaussianModel::new(vec![3.5, 0.0, -0.5], sigma)?;
//! let alpha = Probability::new(0.1)?;
//!
//! // Is the top-1 observation verifiably the top-1 mean?
//! let report = verify(&model, 1, 0.0, alpha, Method::Full)?;
//! assert!(report.reject);
//! assert!(report.worst_p.value() < 0.1);
//!
//! // How large a mean gap does the data support at the same confidence?
//! let bound = clb_exact(&model, 1, alpha, default_tol(&model))?;
//! match bound.value {
//!     BoundValue::Finite(gap) => assert!(gap > 0.0),
//!     other => panic!("expected a finite bound, got {other:?}"),
//! }
//! # Ok::<(), rank_verify::Error>(())
//! ```

pub mod baselines;
pub mod clb;
pub mod error;
pub mod matrix;
pub mod model;
pub mod numerics;
pub mod selection;
pub mod sim;
pub mod verifier;

pub use error::{Error, Result};
