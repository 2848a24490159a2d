//! Diagnostics: the Rosenblatt-transform Kolmogorov–Smirnov distance to a
//! Dirichlet target, document-completion perplexity for LDA, and the held-out
//! log predictive of a Dirichlet-process mixture of multinomials.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::distributions::cdf_beta;
use crate::error::{param_err, Result};
use crate::models::Document;
use crate::simplex::SimplexVector;

/// Rows of simplex samples, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    pub fn push(&mut self, row: &SimplexVector) -> Result<()> {
        if row.dim() != self.dim {
            return param_err(format!(
                "sample of dimension {} pushed into matrix of dimension {}",
                row.dim(),
                self.dim
            ));
        }
        self.data.extend_from_slice(row.weights());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Output of the Rosenblatt map for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RosenblattPoint {
    /// `d − 1` coordinates in `[0, 1]`.
    pub coords: Vec<f64>,
    /// Coordinates whose residual stick `1 − Σ_{j<k} x_j` was not positive.
    pub flags: usize,
}

/// Map a Dirichlet(α) sample to `d − 1` coordinates that are iid U(0, 1) when
/// the sample follows the target.
///
/// Coordinate `k` is the Beta(α_k, Σ_{l>k} α_l) CDF of `x_k / (1 − Σ_{j<k} x_j)`.
/// The residual is formed as the suffix sum `Σ_{j≥k} x_j`, which is exact for
/// sparse samples where `1 − Σ_{j<k} x_j` would cancel. An empty residual
/// flags the coordinate and maps it to 0.
pub fn rosenblatt_transform(sample: &[f64], alpha: &[f64]) -> Result<RosenblattPoint> {
    let d = sample.len();
    if d != alpha.len() {
        return param_err("sample and alpha dimensions differ");
    }
    if d < 2 {
        return param_err("Rosenblatt transform needs at least two dimensions");
    }
    let mut suffix = vec![0.0; d + 1];
    for k in (0..d).rev() {
        suffix[k] = suffix[k + 1] + sample[k];
    }
    let mut alpha_tail = vec![0.0; d + 1];
    for k in (0..d).rev() {
        alpha_tail[k] = alpha_tail[k + 1] + alpha[k];
    }
    let mut coords = Vec::with_capacity(d - 1);
    let mut flags = 0;
    for k in 0..d - 1 {
        let residual = suffix[k];
        let arg = if residual > 0.0 {
            (sample[k] / residual).clamp(0.0, 1.0)
        } else {
            flags += 1;
            0.0
        };
        coords.push(cdf_beta(arg, alpha[k], alpha_tail[k + 1])?);
    }
    Ok(RosenblattPoint { coords, flags })
}

/// `sup_x |F̂(x) − x|` for the empirical CDF of `values` against U(0, 1),
/// evaluated exactly at the order statistics.
pub fn ks_uniform(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return param_err("KS distance of an empty sample");
    }
    if values.iter().any(|v| v.is_nan()) {
        return param_err("KS sample contains NaN");
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        let above = (i + 1) as f64 / m - x;
        let below = x - i as f64 / m;
        acc.max(above).max(below)
    }))
}

/// One-sample KS distance of `values` to a continuous CDF.
pub fn ks_distance_to_cdf<F>(values: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let u = values.iter().map(|&x| cdf(x)).collect::<Result<Vec<_>>>()?;
    ks_uniform(&u)
}

/// Two-sample KS statistic `sup |F̂_x − F̂_y|`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return param_err("KS distance of an empty sample");
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Per-dimension and average KS distances of a sample set to a Dirichlet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    /// Sup distance for each of the `d − 1` Rosenblatt coordinates.
    pub per_dim: Vec<f64>,
    /// Mean of `per_dim`.
    pub d_ks: f64,
    /// Number of samples `M`.
    pub samples: usize,
    /// Simplex dimension `d`.
    pub dim: usize,
    /// Residual-mass flags raised by the transform, summed over samples.
    pub flags: usize,
    /// Transformed coordinates with zero spread across samples.
    pub degenerate_dims: usize,
}

impl KsReport {
    pub fn per_dim_max(&self) -> f64 {
        self.per_dim.iter().copied().fold(0.0, f64::max)
    }
}

/// Average Rosenblatt-KS distance of `samples` to Dir(α).
pub fn dirichlet_ks_distance(samples: &SampleMatrix, alpha: &[f64]) -> Result<KsReport> {
    if samples.is_empty() {
        return param_err("no samples");
    }
    if samples.dim() != alpha.len() {
        return param_err("sample and alpha dimensions differ");
    }
    let d = alpha.len();
    let mut columns = vec![Vec::with_capacity(samples.len()); d.saturating_sub(1)];
    let mut flags = 0;
    for row in samples.rows() {
        let p = rosenblatt_transform(row, alpha)?;
        flags += p.flags;
        for (col, u) in columns.iter_mut().zip(p.coords) {
            col.push(u);
        }
    }
    let per_dim = columns
        .iter()
        .map(|c| ks_uniform(c))
        .collect::<Result<Vec<_>>>()?;
    let degenerate_dims = if samples.len() > 1 {
        columns
            .iter()
            .filter(|c| c.iter().all(|&u| u == c[0]))
            .count()
    } else {
        0
    };
    let d_ks = per_dim.iter().sum::<f64>() / per_dim.len() as f64;
    Ok(KsReport {
        per_dim,
        d_ks,
        samples: samples.len(),
        dim: d,
        flags,
        degenerate_dims,
    })
}

/// A held-out document split for document completion.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutDoc {
    /// Even-indexed tokens, used to fit the document's topic proportions.
    pub estimation: Vec<u32>,
    /// Odd-indexed tokens, scored by the predictive.
    pub evaluation: Vec<u32>,
}

impl HeldOutDoc {
    pub fn split(tokens: &[u32]) -> Self {
        let estimation = tokens.iter().step_by(2).copied().collect();
        let evaluation = tokens.iter().skip(1).step_by(2).copied().collect();
        Self {
            estimation,
            evaluation,
        }
    }

    pub fn from_document(doc: &Document) -> Self {
        Self::split(&doc.tokens())
    }
}

/// `exp(−Σ log p(w) / #evaluation tokens)`.
///
/// `predictive(i, doc)` returns the probability of each evaluation token of
/// `docs[i]`. A zero probability makes the perplexity infinite.
pub fn perplexity<F>(docs: &[HeldOutDoc], mut predictive: F) -> Result<f64>
where
    F: FnMut(usize, &HeldOutDoc) -> Result<Vec<f64>>,
{
    let mut log_sum = 0.0;
    let mut tokens = 0usize;
    for (i, doc) in docs.iter().enumerate() {
        if doc.evaluation.is_empty() {
            continue;
        }
        let probs = predictive(i, doc)?;
        if probs.len() != doc.evaluation.len() {
            return param_err("predictive returned the wrong number of probabilities");
        }
        for p in probs {
            if p.is_nan() || p <= 0.0 {
                return Ok(f64::INFINITY);
            }
            log_sum += p.ln();
        }
        tokens += doc.evaluation.len();
    }
    if tokens == 0 {
        return param_err("held-out set has no evaluation tokens");
    }
    Ok((-log_sum / tokens as f64).exp())
}

/// One posterior draw of a Dirichlet-process mixture of multinomials.
///
/// Mass not covered by the instantiated `weights` is assigned to a fresh
/// component drawn from the symmetric Dirichlet base measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub weights: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub base_concentration: f64,
    pub dim: usize,
}

fn ln_multinomial_coefficient(item: &Document) -> f64 {
    let n = item.total() as f64;
    ln_gamma(n + 1.0) - item.iter().map(|(_, c)| ln_gamma(c as f64 + 1.0)).sum::<f64>()
}

fn ln_dirichlet_multinomial(item: &Document, a: f64, dim: usize) -> f64 {
    let n = item.total() as f64;
    let da = a * dim as f64;
    ln_gamma(da) - ln_gamma(da + n)
        + item
            .iter()
            .map(|(_, c)| ln_gamma(a + c as f64) - ln_gamma(a))
            .sum::<f64>()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log Σ_j ω_j Multi(x; n, θ_j)` (plus the base-measure remainder) for one item.
pub fn mixture_log_likelihood(item: &Document, sample: &MixtureSample) -> Result<f64> {
    if sample.weights.len() != sample.components.len() {
        return param_err("mixture weights and components differ in length");
    }
    let coef = ln_multinomial_coefficient(item);
    let mut terms = Vec::with_capacity(sample.weights.len() + 1);
    for (w, theta) in sample.weights.iter().zip(&sample.components) {
        if *w <= 0.0 {
            continue;
        }
        let mut ll = w.ln() + coef;
        for (word, c) in item.iter() {
            let p = *theta
                .get(word as usize)
                .ok_or_else(|| crate::Error::Parameter("item word outside component dimension".into()))?;
            ll += c as f64 * p.ln();
        }
        terms.push(ll);
    }
    let remainder = 1.0 - sample.weights.iter().sum::<f64>();
    if remainder > 1e-15 && sample.base_concentration > 0.0 {
        terms.push(remainder.ln() + coef + ln_dirichlet_multinomial(item, sample.base_concentration, sample.dim));
    }
    Ok(log_sum_exp(&terms))
}

/// Held-out log predictive: for each posterior sample, the mean over items of
/// the mixture log likelihood; then the mean over samples.
pub fn log_predictive(heldout: &[Document], samples: &[MixtureSample]) -> Result<f64> {
    if samples.is_empty() {
        return param_err("no posterior samples");
    }
    if heldout.is_empty() {
        return param_err("no held-out items");
    }
    let mut total = 0.0;
    for s in samples {
        let mut acc = 0.0;
        for item in heldout {
            acc += mixture_log_likelihood(item, s)?;
        }
        total += acc / heldout.len() as f64;
    }
    Ok(total / samples.len() as f64)
}
