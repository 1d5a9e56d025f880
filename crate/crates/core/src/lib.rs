//! Post-Dantzig estimation and prediction for non-sparse "large p, small n"
//! linear models.
//!
//! The pipeline is:
//!
//! 1. optional sure independence screening ([`screening`]) to bring `p` below `n`;
//! 2. the Dantzig selector and its Gaussian two-stage refit ([`dantzig`]),
//!    solved through a dense two-phase simplex ([`lpsolver`]);
//! 3. construction of a low-dimensional instrument `V` from the discarded
//!    covariates ([`instruments`]);
//! 4. a partially linear fit `Y = θ'Z + g(V) + ξ` with Nadaraya–Watson
//!    residualization, and the three predictors built from it ([`plm`]);
//! 5. a reproducible Monte Carlo harness around all of the above ([`bench`]).
//!
//! Index convention: every user-facing index (config files, CSV output,
//! reports) is 1-based. Everything inside the library is 0-based.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod dantzig;
pub mod datamodel;
pub mod error;
pub mod instruments;
pub mod io;
pub mod linalg;
pub mod lpsolver;
pub mod plm;
pub mod rng;
pub mod screening;

pub use error::{Error, Result};
