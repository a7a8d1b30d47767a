//! Estimation of optimal linear instrumental-variable approximations.
//!
//! The crate implements a two-step IV estimator: a Tikhonov-regularized
//! sieve first stage recovers an instrument function solving the conditional
//! moment restriction `E[h(Z) | X] = X`, and a second step runs linear IV
//! with the fitted instrument. Around that core it provides
//!
//! * [`design`] — B-spline / indicator sieve bases, standardization and
//!   projection operators,
//! * [`first_stage`] — the penalized instrument fit and its ridge-form twin,
//! * [`structural`] — the dual penalized fit of the structural regression
//!   used by the variance formula,
//! * [`tsiv`] — the IV step, influence functions, sandwich covariance and
//!   confidence intervals,
//! * [`selection`] — generalized cross-validation over the tuning triple,
//! * [`special_cases`] — closed-form instruments for binary and discrete
//!   endogenous regressors,
//! * [`exogeneity`] — a misspecification-robust Hausman test,
//! * [`simulate`] — deterministic Monte Carlo harness reproducing the
//!   reference bias/MSE/coverage/rejection tables.
//!
//! ```
//! use oliva::simulate::{gen_dgp, Dgp, DgpConfig};
//!
//! let cfg = DgpConfig { dgp: Dgp::One, rho: 0.3, gamma: 0.8, n: 200, seed: 7 };
//! let data = gen_dgp(&cfg).unwrap();
//! assert_eq!(data.n(), 200);
//! ```

pub mod dataset;
pub mod design;
pub mod error;
pub mod exogeneity;
pub mod first_stage;
pub mod selection;
pub mod simulate;
pub mod special_cases;
pub mod stats;
pub mod structural;
pub mod tsiv;

mod solver;

pub use dataset::Dataset;
pub use error::{OlivaError, Result};
