//! Exact Cox-Ingersoll-Ross transitions, the stochastic (SCIR) update, and the
//! closed-form moment / MGF results used as test oracles.
//!
//! The process is `dθ = (a − θ)dt + √(2θ)dW`, i.e. the general CIR diffusion
//! `b(a − θ)dt + σ√θ dW` with `b = 1` and `σ² = 2b`, so its stationary law is
//! Gamma(a, 1). Over a step of length `h`,
//!
//! ```text
//! θ' | θ ~ (1 − e^{−h})/2 · W,   W ~ χ²(2a, 2θ e^{−h} / (1 − e^{−h}))
//! ```

use rand::Rng;

use crate::distributions::{sample_noncentral_chisq, NonCentralChiSq};
use crate::error::{param_err, Error, Result};

/// State of one CIR / SCIR coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirChainState {
    /// Current value; strictly positive.
    pub theta: f64,
    /// Number of transitions taken.
    pub step: u64,
    /// Stepsize of the most recent transition (the initial stepsize before any).
    pub stepsize: f64,
}

impl CirChainState {
    pub fn new(theta: f64, stepsize: f64) -> Result<Self> {
        check_theta(theta)?;
        check_stepsize(stepsize)?;
        Ok(Self {
            theta,
            step: 0,
            stepsize,
        })
    }
}

/// Unbiased minibatch estimate `â = α + (N/n) Σ_{i∈S} z_i` of a gamma shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeEstimate {
    prior_part: f64,
    count_part: f64,
    total: f64,
}

impl ShapeEstimate {
    pub fn new(prior_part: f64, count_part: f64) -> Result<Self> {
        if !(prior_part.is_finite() && prior_part > 0.0) {
            return param_err(format!("shape prior part must be > 0, got {prior_part}"));
        }
        if !(count_part.is_finite() && count_part >= 0.0) {
            return param_err(format!("shape count part must be >= 0, got {count_part}"));
        }
        Ok(Self {
            prior_part,
            count_part,
            total: prior_part + count_part,
        })
    }

    /// An estimate with no minibatch noise: the full shape sits in the prior part.
    pub fn exact(a: f64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    pub fn prior_part(&self) -> f64 {
        self.prior_part
    }

    pub fn count_part(&self) -> f64 {
        self.count_part
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Parameters of the non-asymptotic SCIR theory: true shape `a`, start `θ₀`,
/// stepsize `h`, number of steps `M` and the per-step variance of `â`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub a: f64,
    pub theta0: f64,
    pub h: f64,
    pub steps: u32,
    pub var_ahat: f64,
}

impl TheoryParams {
    pub fn new(a: f64, theta0: f64, h: f64, steps: u32, var_ahat: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("theta0", theta0), ("h", h)] {
            if !(v.is_finite() && v > 0.0) {
                return param_err(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if steps == 0 {
            return param_err("number of steps must be positive");
        }
        if !(var_ahat.is_finite() && var_ahat >= 0.0) {
            return param_err(format!("Var[â] must be >= 0, got {var_ahat}"));
        }
        Ok(Self {
            a,
            theta0,
            h,
            steps,
            var_ahat,
        })
    }

    /// Total simulated time `Mh`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.h
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        param_err(format!("CIR state must be finite and > 0, got {theta}"))
    }
}

fn check_stepsize(h: f64) -> Result<()> {
    // h = +inf is accepted: the transition then draws from the stationary law.
    if h > 0.0 {
        Ok(())
    } else {
        param_err(format!("stepsize must be > 0, got {h}"))
    }
}

/// One exact CIR transition of length `h` from `theta` with shape `shape`.
pub(crate) fn cir_draw<R: Rng + ?Sized>(rng: &mut R, theta: f64, shape: f64, h: f64) -> Result<f64> {
    check_theta(theta)?;
    check_stepsize(h)?;
    let decay = (-h).exp();
    let scale = -(-h).exp_m1();
    let chi = NonCentralChiSq::new(2.0 * shape, 2.0 * theta * decay / scale)?;
    let w = sample_noncentral_chisq(rng, &chi)?;
    Ok((0.5 * scale * w).max(f64::MIN_POSITIVE))
}

/// Exact CIR transition with stationary Gamma(a, 1) law.
pub fn cir_transition<R: Rng + ?Sized>(
    rng: &mut R,
    state: &CirChainState,
    a: f64,
    h: f64,
) -> Result<CirChainState> {
    if !(a.is_finite() && a > 0.0) {
        return param_err(format!("CIR shape must be finite and > 0, got {a}"));
    }
    Ok(CirChainState {
        theta: cir_draw(rng, state.theta, a, h)?,
        step: state.step + 1,
        stepsize: h,
    })
}

/// SCIR update: the exact CIR transition with `a` replaced by `â`.
pub fn scir_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &CirChainState,
    ahat: &ShapeEstimate,
    h: f64,
) -> Result<CirChainState> {
    cir_transition(rng, state, ahat.total(), h)
}

/// `1 − s(1 − e^{−t})`, the base of every MGF factor.
fn mgf_base(s: f64, t: f64) -> f64 {
    1.0 + s * (-t).exp_m1()
}

fn check_mgf_domain(s: f64, t: f64) -> Result<f64> {
    let base = mgf_base(s, t);
    if base > 0.0 && s.is_finite() {
        Ok(base)
    } else {
        Err(Error::Domain(format!(
            "MGF argument s = {s} outside domain s(1 − e^(−{t})) < 1"
        )))
    }
}

/// MGF of the exact CIR process after time `Mh` started at `θ₀`.
pub fn mgf_cir(tp: &TheoryParams, s: f64) -> Result<f64> {
    let t = tp.horizon();
    let base = check_mgf_domain(s, t)?;
    Ok(base.powf(-tp.a) * (tp.theta0 * s * (-t).exp() / base).exp())
}

/// MGF of SCIR after `M` steps conditional on the sequence of shape estimates.
///
/// `ahat_sequence[0]` is the estimate used by the first transition. The
/// correction factor with exponent `m` in the product belongs to the estimate
/// used `m − 1` steps before the end, since backward conditioning peels off the
/// last transition first.
pub fn mgf_scir(tp: &TheoryParams, s: f64, ahat_sequence: &[ShapeEstimate]) -> Result<f64> {
    let steps = tp.steps as usize;
    if ahat_sequence.len() != steps {
        return param_err(format!(
            "expected {steps} shape estimates, got {}",
            ahat_sequence.len()
        ));
    }
    let exact = mgf_cir(tp, s)?;
    let mut log_correction = 0.0;
    let mut prev = 1.0;
    for m in 1..=steps {
        let base = check_mgf_domain(s, m as f64 * tp.h)?;
        let ahat = ahat_sequence[steps - m].total();
        log_correction += -(ahat - tp.a) * (base / prev).ln();
        prev = base;
    }
    Ok(exact * log_correction.exp())
}

/// `E[θ_M]` for both the exact and the stochastic process.
pub fn scir_mean(tp: &TheoryParams) -> f64 {
    let decay = (-tp.horizon()).exp();
    tp.theta0 * decay + tp.a * (1.0 - decay)
}

/// `Var[θ_M]` of the exact CIR process.
pub fn cir_variance(tp: &TheoryParams) -> f64 {
    let t = tp.horizon();
    let e1 = (-t).exp();
    let e2 = (-2.0 * t).exp();
    2.0 * tp.theta0 * (e1 - e2) + tp.a * (-(-t).exp_m1()).powi(2)
}

/// `Var[θ̂_M]`: the exact CIR variance inflated by the minibatch noise in `â`.
pub fn scir_variance(tp: &TheoryParams) -> f64 {
    let t = tp.horizon();
    let inflation = -(-2.0 * t).exp_m1() * (-(-tp.h).exp_m1()) / (1.0 + (-tp.h).exp());
    cir_variance(tp) + inflation * tp.var_ahat
}

/// `r(s) = s e^{−h} / (1 − s(1 − e^{−h}))`.
pub fn r_map(s: f64, h: f64) -> Result<f64> {
    r_composed(s, h, 1)
}

/// Closed form of the `n`-fold composition of [`r_map`]:
/// `s e^{−nh} / (1 − s(1 − e^{−nh}))`. `n = 0` is the identity.
pub fn r_composed(s: f64, h: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Ok(s);
    }
    let t = n as f64 * h;
    let den = mgf_base(s, t);
    let r = s * (-t).exp() / den;
    if den == 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("pole of r at s = {s}, nh = {t}")));
    }
    Ok(r)
}

/// `Π_{i=0}^{n−1} [1 − r⁽ⁱ⁾(s)(1 − e^{−h})]`, accumulated by iterating `r`.
/// Equals `1 − s(1 − e^{−nh})`.
pub fn lemma2_product(s: f64, h: f64, n: u32) -> Result<f64> {
    let c = -(-h).exp_m1();
    let mut r = s;
    let mut prod = 1.0;
    for i in 0..n {
        prod *= 1.0 - r * c;
        if i + 1 < n {
            r = r_map(r, h)?;
        }
    }
    if !prod.is_finite() {
        return Err(Error::Domain(format!("non-finite product at s = {s}")));
    }
    Ok(prod)
}

/// `U = 2√θ`: maps a CIR path onto a Langevin diffusion for the generalized
/// gamma law with density ∝ `u^{2a−1} e^{−u²/4}`.
pub fn transform_to_generalized_gamma(theta: f64) -> f64 {
    2.0 * theta.sqrt()
}

/// Inverse of [`transform_to_generalized_gamma`]: `θ = U²/4`.
pub fn generalized_gamma_to_cir(u: f64) -> f64 {
    0.25 * u * u
}
