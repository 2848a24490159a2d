//! Seeded random variates and the CDFs the diagnostics need.

mod cdf;
mod rng;
mod variates;

pub use cdf::{cdf_beta, cdf_gamma, CDF_TOLERANCE};
pub use rng::RngStream;
pub(crate) use variates::sample_poisson;
pub use variates::{
    sample_beta, sample_categorical, sample_categorical_ln, sample_dirichlet, sample_gamma,
    sample_ln_gamma, sample_noncentral_chisq, NonCentralChiSq,
};
