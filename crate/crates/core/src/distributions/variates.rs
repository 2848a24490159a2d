use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{param_err, Error, Result};
use crate::simplex::SimplexVector;

/// Non-central chi-squared law χ²(ν, μ) with real, possibly sub-unit, degrees
/// of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonCentralChiSq {
    dof: f64,
    noncentrality: f64,
}

impl NonCentralChiSq {
    pub fn new(dof: f64, noncentrality: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 0.0) {
            return param_err(format!("chi-squared dof must be finite and > 0, got {dof}"));
        }
        if !(noncentrality.is_finite() && noncentrality >= 0.0) {
            return param_err(format!(
                "chi-squared noncentrality must be finite and >= 0, got {noncentrality}"
            ));
        }
        Ok(Self { dof, noncentrality })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        self.dof + self.noncentrality
    }

    pub fn variance(&self) -> f64 {
        2.0 * (self.dof + 2.0 * self.noncentrality)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        param_err(format!("{name} must be finite and > 0, got {v}"))
    }
}

/// Uniform on (0, 1].
#[inline]
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Marsaglia–Tsang squeeze for shape >= 1, unit rate.
fn marsaglia_tsang<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_uniform(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Natural log of a Gamma(shape, 1) variate.
///
/// Shapes below one are boosted: `X = Y · U^{1/shape}` with
/// `Y ~ Gamma(shape + 1, 1)`, evaluated in log space so that tiny shapes
/// (whose draws routinely underflow `f64`) stay usable for normalization.
pub fn sample_ln_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    if shape >= 1.0 {
        Ok(marsaglia_tsang(rng, shape).ln())
    } else {
        let boosted = marsaglia_tsang(rng, shape + 1.0);
        Ok(boosted.ln() + open_uniform(rng).ln() / shape)
    }
}

/// Gamma(shape, rate) variate. Never returns zero: draws below the smallest
/// normal `f64` are clamped to it.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    check_positive("gamma rate", rate)?;
    let x = if shape >= 1.0 {
        check_positive("gamma shape", shape)?;
        marsaglia_tsang(rng, shape)
    } else {
        sample_ln_gamma(rng, shape)?.exp()
    };
    Ok((x / rate).max(f64::MIN_POSITIVE))
}

/// Draw from χ²(ν, μ) as `2 · Gamma(ν/2 + K, 1)` with `K ~ Poisson(μ/2)`.
pub fn sample_noncentral_chisq<R: Rng + ?Sized>(rng: &mut R, d: &NonCentralChiSq) -> Result<f64> {
    let k = sample_poisson(rng, 0.5 * d.noncentrality)?;
    Ok(2.0 * sample_gamma(rng, 0.5 * d.dof + k, 1.0)?)
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let p = Poisson::new(lambda)
        .map_err(|e| Error::Parameter(format!("poisson rate {lambda}: {e}")))?;
    Ok(p.sample(rng))
}

/// Beta(a, b) as a ratio of gammas, returned strictly inside (0, 1).
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    let lx = sample_ln_gamma(rng, a)?;
    let ly = sample_ln_gamma(rng, b)?;
    // x / (x + y) = 1 / (1 + exp(ly - lx))
    let v = 1.0 / (1.0 + (ly - lx).exp());
    Ok(v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

/// Dirichlet draw by normalizing independent Gamma(α_j, 1) variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Result<SimplexVector> {
    if alpha.is_empty() {
        return param_err("dirichlet parameter vector is empty");
    }
    let logs = alpha
        .iter()
        .map(|&a| sample_ln_gamma(rng, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimplexVector::from_log_weights(&logs))
}

/// Index `j` with probability `weights[j] / Σ weights`.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return param_err(format!("categorical weight must be finite and >= 0, got {w}"));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("categorical weights sum to zero".into()));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = j;
            if target < acc {
                return Ok(j);
            }
        }
    }
    Ok(last)
}

/// Categorical draw from unnormalized log weights (`-inf` entries excluded).
pub fn sample_categorical_ln<R: Rng + ?Sized>(rng: &mut R, ln_weights: &[f64]) -> Result<usize> {
    let max = ln_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::Degenerate("all log weights are -inf".into()));
    }
    let w: Vec<f64> = ln_weights.iter().map(|&l| (l - max).exp()).collect();
    sample_categorical(rng, &w)
}
