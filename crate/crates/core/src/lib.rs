//! Stochastic Cox-Ingersoll-Ross (SCIR) sampling on the probability simplex.
//!
//! The CIR diffusion `dθ = (a − θ)dt + √(2θ)dW` has a Gamma(a, 1) stationary
//! law and an exactly sampleable non-central chi-squared transition. Replacing
//! `a` by an unbiased minibatch estimate gives a stochastic-gradient sampler
//! with no discretization error; normalizing independent gamma coordinates
//! moves it onto the simplex.
//!
//! Module map:
//!
//! * [`distributions`]: seeded streams, gamma / beta / Dirichlet /
//!   non-central chi-squared variates and the CDFs used by diagnostics.
//! * [`cir`]: exact CIR transitions, the SCIR update and closed-form moment
//!   and MGF oracles.
//! * [`simplex`]: SCIR and SGRLD simplex samplers plus the exact Dirichlet
//!   reference sampler.
//! * [`evaluation`]: Rosenblatt-transform KS distance, perplexity, mixture
//!   log predictive.
//! * [`models`]: LDA and Dirichlet-process mixture samplers.
//! * [`harness`]: configuration, synthetic data and experiment drivers.

pub mod cir;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod models;
pub mod simplex;

pub use error::{Error, Result};
