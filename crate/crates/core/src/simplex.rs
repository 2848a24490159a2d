//! Simplex samplers sharing one minibatch-count interface: SCIR, the SGRLD
//! baseline and the exact Dirichlet posterior.
//!
//! Both stochastic samplers keep a positive "expanded-mean" coordinate
//! `θ_j` per category targeting Gamma(α_j + Σ_i z_ij, 1) and report
//! `ω = θ / Σ_j θ_j`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cir::{cir_draw, ShapeEstimate};
use crate::distributions::sample_dirichlet;
use crate::error::{param_err, Result};

/// Floor applied to SGRLD coordinates so that `√θ` stays defined.
pub const SGRLD_FLOOR: f64 = 1e-300;

/// A point of the probability simplex: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Allowed deviation of `Σ w` from one.
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return param_err("simplex vector is empty");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return param_err("simplex weights must be finite and nonnegative");
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return param_err(format!("simplex weights sum to {sum}"));
        }
        Ok(Self(weights))
    }

    /// Normalize a vector of positive values.
    pub fn from_positive(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return param_err("simplex vector is empty");
        }
        let sum: f64 = values.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || values.iter().any(|v| *v < 0.0) {
            return param_err(format!("cannot normalize values with sum {sum}"));
        }
        Ok(Self(values.iter().map(|v| v / sum).collect()))
    }

    /// Normalize `exp(l_j)` stably.
    pub(crate) fn from_log_weights(logs: &[f64]) -> Self {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        Self(w.into_iter().map(|x| x / sum).collect())
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return param_err("simplex dimension must be positive");
        }
        Ok(Self(vec![1.0 / dim as f64; dim]))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-category counts stored sparsely, with the dataset size they come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCounts {
    dim: usize,
    items: usize,
    counts: BTreeMap<usize, u64>,
}

impl SparseCounts {
    pub fn new(dim: usize, items: usize) -> Self {
        Self {
            dim,
            items,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_dense(dense: &[u64], items: usize) -> Self {
        let mut c = Self::new(dense.len(), items);
        for (j, &v) in dense.iter().enumerate() {
            c.add(j, v);
        }
        c
    }

    pub fn add(&mut self, category: usize, count: u64) {
        debug_assert!(category < self.dim);
        if count > 0 {
            *self.counts.entry(category).or_insert(0) += count;
        }
    }

    pub fn get(&self, category: usize) -> u64 {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of data items (`N`, or `n` for a minibatch) the counts cover.
    pub fn items(&self) -> usize {
        self.items
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Nonzero `(category, count)` pairs in category order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&j, &c)| (j, c))
    }

    pub fn to_dense(&self) -> Vec<u64> {
        let mut d = vec![0; self.dim];
        for (j, c) in self.iter() {
            d[j] = c;
        }
        d
    }
}

/// Categorical observations `z_i`, stored as the category of each item.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalData {
    dim: usize,
    labels: Vec<u32>,
}

impl CategoricalData {
    pub fn new(dim: usize, labels: Vec<u32>) -> Result<Self> {
        if dim == 0 {
            return param_err("categorical dimension must be positive");
        }
        if labels.iter().any(|&l| l as usize >= dim) {
            return param_err("category label out of range");
        }
        Ok(Self { dim, labels })
    }

    /// A dataset realizing the given per-category totals (labels in category order).
    pub fn from_totals(totals: &[u64]) -> Result<Self> {
        let labels = totals
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(j as u32, c as usize))
            .collect();
        Self::new(totals.len(), labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn totals(&self) -> SparseCounts {
        let mut c = SparseCounts::new(self.dim, self.len());
        for &l in &self.labels {
            c.add(l as usize, 1);
        }
        c
    }

    pub fn batch_counts(&self, batch: &Minibatch) -> SparseCounts {
        let mut c = SparseCounts::new(self.dim, batch.len());
        for &i in batch.indices() {
            c.add(self.labels[i] as usize, 1);
        }
        c
    }
}

/// Indices `S ⊂ {0, …, N−1}` drawn uniformly without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    indices: Vec<usize>,
    population: usize,
}

impl Minibatch {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, population: usize, size: usize) -> Result<Self> {
        if size == 0 || size > population {
            return param_err(format!(
                "minibatch size {size} must lie in 1..={population}"
            ));
        }
        let indices = rand::seq::index::sample(rng, population, size).into_vec();
        Ok(Self {
            indices,
            population,
        })
    }

    pub fn full(population: usize) -> Self {
        Self {
            indices: (0..population).collect(),
            population,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn population(&self) -> usize {
        self.population
    }

    /// `N / n`.
    pub fn scale(&self) -> f64 {
        self.population as f64 / self.indices.len() as f64
    }
}

/// `â_j = α_j + (N/n) · Σ_{i∈S} z_ij`.
pub fn estimate_shape(prior: f64, batch_count: u64, population: usize, batch_size: usize) -> Result<ShapeEstimate> {
    if batch_size == 0 {
        return param_err("minibatch size must be positive");
    }
    if batch_size > population {
        return param_err(format!(
            "minibatch size {batch_size} exceeds population {population}"
        ));
    }
    let scale = population as f64 / batch_size as f64;
    ShapeEstimate::new(prior, scale * batch_count as f64)
}

/// `Var[â_j]` when `n` of `N` items are drawn without replacement and
/// `total` of the `N` items fall in category `j`.
pub fn shape_estimate_variance(total: u64, population: usize, batch_size: usize) -> f64 {
    if population <= 1 || batch_size >= population {
        return 0.0;
    }
    let n_pop = population as f64;
    let n = batch_size as f64;
    let p = total as f64 / n_pop;
    let var_sum = n * p * (1.0 - p) * (n_pop - n) / (n_pop - 1.0);
    (n_pop / n).powi(2) * var_sum
}

/// Update rule for one positive gamma coordinate given its shape estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dynamics {
    /// Exact CIR transition with the estimated shape.
    Scir,
    /// Mirrored Euler–Maruyama step of the same diffusion.
    Sgrld,
}

impl Dynamics {
    pub fn name(self) -> &'static str {
        match self {
            Dynamics::Scir => "scir",
            Dynamics::Sgrld => "sgrld",
        }
    }

    pub fn advance<R: Rng + ?Sized>(self, rng: &mut R, theta: f64, shape: f64, h: f64) -> Result<f64> {
        match self {
            Dynamics::Scir => cir_draw(rng, theta, shape, h),
            Dynamics::Sgrld => sgrld_update(rng, theta, shape, h),
        }
    }
}

/// `θ ← |θ + h(â − θ) + √(2hθ) η|`, floored at [`SGRLD_FLOOR`].
pub fn sgrld_update<R: Rng + ?Sized>(rng: &mut R, theta: f64, shape: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h >= 0.0) {
        return param_err(format!("SGRLD stepsize must be finite and >= 0, got {h}"));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return param_err(format!("SGRLD state must be finite and > 0, got {theta}"));
    }
    let eta: f64 = rng.sample(StandardNormal);
    Ok(sgrld_move(theta, shape, h, eta))
}

/// The SGRLD map for a given standard-normal innovation `eta`.
pub fn sgrld_move(theta: f64, shape: f64, h: f64, eta: f64) -> f64 {
    let next = (theta + h * (shape - theta) + (2.0 * h * theta).sqrt() * eta).abs();
    next.max(SGRLD_FLOOR)
}

/// Positive expanded-mean coordinates plus the Dirichlet prior they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexChain {
    theta: Vec<f64>,
    prior: Vec<f64>,
    step: u64,
}

impl SimplexChain {
    pub fn new(prior: Vec<f64>, theta0: Vec<f64>) -> Result<Self> {
        if prior.is_empty() || prior.len() != theta0.len() {
            return param_err("prior and starting point must be non-empty and of equal length");
        }
        if prior.iter().chain(&theta0).any(|v| !(v.is_finite() && *v > 0.0)) {
            return param_err("prior and starting point must be positive");
        }
        Ok(Self {
            theta: theta0,
            prior,
            step: 0,
        })
    }

    /// All coordinates started at the same value.
    pub fn constant(prior: Vec<f64>, theta0: f64) -> Result<Self> {
        let d = prior.len();
        Self::new(prior, vec![theta0; d])
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn omega(&self) -> SimplexVector {
        SimplexVector::from_positive(&self.theta).expect("chain coordinates are positive")
    }
}

/// One iteration of the shared simplex loop: estimate every `â_j` from the
/// minibatch, advance each coordinate, renormalize.
pub fn simplex_step<R: Rng + ?Sized>(
    rng: &mut R,
    dynamics: Dynamics,
    chain: &mut SimplexChain,
    batch: &Minibatch,
    data: &CategoricalData,
    h: f64,
) -> Result<SimplexVector> {
    if data.dim() != chain.dim() {
        return param_err(format!(
            "data dimension {} does not match chain dimension {}",
            data.dim(),
            chain.dim()
        ));
    }
    if batch.population() != data.len() {
        return param_err("minibatch population does not match dataset size");
    }
    let counts = data.batch_counts(batch);
    for j in 0..chain.dim() {
        let ahat = estimate_shape(chain.prior[j], counts.get(j), data.len(), batch.len())?;
        chain.theta[j] = dynamics.advance(rng, chain.theta[j], ahat.total(), h)?;
    }
    chain.step += 1;
    Ok(chain.omega())
}

/// SCIR on the simplex: each coordinate takes an exact CIR step with its `â_j`.
pub fn scir_simplex_step<R: Rng + ?Sized>(
    rng: &mut R,
    chain: &mut SimplexChain,
    batch: &Minibatch,
    data: &CategoricalData,
    h: f64,
) -> Result<SimplexVector> {
    simplex_step(rng, Dynamics::Scir, chain, batch, data, h)
}

/// SGRLD baseline on the simplex (expanded-mean parameterization).
pub fn sgrld_simplex_step<R: Rng + ?Sized>(
    rng: &mut R,
    chain: &mut SimplexChain,
    batch: &Minibatch,
    data: &CategoricalData,
    h: f64,
) -> Result<SimplexVector> {
    simplex_step(rng, Dynamics::Sgrld, chain, batch, data, h)
}

/// One exact draw from `Dir(α + totals)`.
pub fn exact_dirichlet_posterior<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: &[f64],
    counts: &SparseCounts,
) -> Result<SimplexVector> {
    if alpha.len() != counts.dim() {
        return param_err("prior and count dimensions differ");
    }
    let post: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(j, a)| a + counts.get(j) as f64)
        .collect();
    sample_dirichlet(rng, &post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;

    const SPARSE: [u64; 10] = [800, 100, 100, 0, 0, 0, 0, 0, 0, 0];

    #[test]
    fn simplex_vector_validation() {
        assert!(SimplexVector::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert!(SimplexVector::from_positive(&[0.0, 0.0]).is_err());
        let w = SimplexVector::from_positive(&[1.0, 3.0]).unwrap();
        assert_eq!(w.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn shape_estimates() {
        let full = estimate_shape(0.1, 800, 1000, 1000).unwrap();
        assert_eq!(full.total(), 800.1);
        let e = estimate_shape(0.1, 8, 1000, 10).unwrap();
        assert!((e.total() - 800.1).abs() < 1e-12);
        let empty = estimate_shape(0.1, 0, 1000, 10).unwrap();
        assert_eq!(empty.total(), 0.1);
        assert!(estimate_shape(0.1, 0, 1000, 0).is_err());
        assert!(estimate_shape(0.1, 0, 10, 11).is_err());
    }

    #[test]
    fn full_batch_has_no_estimator_variance() {
        assert_eq!(shape_estimate_variance(800, 1000, 1000), 0.0);
        assert!(shape_estimate_variance(800, 1000, 10) > 0.0);
        assert_eq!(shape_estimate_variance(0, 1000, 10), 0.0);
    }

    #[test]
    fn minibatch_is_without_replacement() {
        let mut rng = RngStream::new(0, 0);
        for _ in 0..100 {
            let b = Minibatch::sample(&mut rng, 50, 20).unwrap();
            let mut idx = b.indices().to_vec();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 20);
            assert!(idx.iter().all(|&i| i < 50));
        }
        assert!(Minibatch::sample(&mut rng, 5, 0).is_err());
        assert!(Minibatch::sample(&mut rng, 5, 6).is_err());
    }

    #[test]
    fn counts_round_trip() {
        let data = CategoricalData::from_totals(&SPARSE).unwrap();
        assert_eq!(data.len(), 1000);
        assert_eq!(data.totals().to_dense(), SPARSE.to_vec());
        let c = data.batch_counts(&Minibatch::full(1000));
        assert_eq!(c.total(), 1000);
        assert_eq!(c.get(5), 0);
    }

    #[test]
    fn one_dimensional_simplex_is_trivial() {
        let mut rng = RngStream::new(1, 0);
        let data = CategoricalData::from_totals(&[10]).unwrap();
        let mut chain = SimplexChain::constant(vec![0.1], 1.0).unwrap();
        for _ in 0..50 {
            let b = Minibatch::sample(&mut rng, 10, 3).unwrap();
            let w = scir_simplex_step(&mut rng, &mut chain, &b, &data, 0.5).unwrap();
            assert_eq!(w.weights(), &[1.0]);
        }
    }

    #[test]
    fn sgrld_zero_step_is_identity() {
        let mut rng = RngStream::new(2, 0);
        let data = CategoricalData::from_totals(&SPARSE).unwrap();
        let mut chain = SimplexChain::new(vec![0.1; 10], (1..=10).map(f64::from).collect()).unwrap();
        let before = chain.theta().to_vec();
        let b = Minibatch::sample(&mut rng, 1000, 10).unwrap();
        sgrld_simplex_step(&mut rng, &mut chain, &b, &data, 0.0).unwrap();
        assert_eq!(chain.theta(), &before[..]);
    }

    #[test]
    fn sgrld_drift_fixed_point() {
        for (theta, h) in [(0.1, 0.5), (800.1, 0.01), (3.0, 1.0)] {
            assert_eq!(sgrld_move(theta, theta, h, 0.0), theta);
        }
        // mirroring keeps the state positive
        assert!(sgrld_move(0.01, 0.1, 0.5, -3.0) > 0.0);
        assert_eq!(sgrld_move(1e-320, 0.1, 0.0, 0.0), SGRLD_FLOOR);
    }

    #[test]
    fn outputs_are_valid_simplex_vectors() {
        let mut rng = RngStream::new(4, 0);
        let data = CategoricalData::from_totals(&SPARSE).unwrap();
        for dynamics in [Dynamics::Scir, Dynamics::Sgrld] {
            let mut chain = SimplexChain::constant(vec![0.1; 10], 1.0).unwrap();
            for _ in 0..500 {
                let b = Minibatch::sample(&mut rng, 1000, 10).unwrap();
                let w = simplex_step(&mut rng, dynamics, &mut chain, &b, &data, 0.05).unwrap();
                assert!(SimplexVector::new(w.into_inner()).is_ok());
                assert!(chain.theta().iter().all(|&t| t > 0.0));
            }
        }
    }

    #[test]
    fn exact_posterior_sparse_means() {
        let mut rng = RngStream::new(5, 0);
        let counts = SparseCounts::from_dense(&SPARSE, 1000);
        let n = 100_000;
        let mut acc = [0.0; 10];
        for _ in 0..n {
            let w = exact_dirichlet_posterior(&mut rng, &[0.1; 10], &counts).unwrap();
            for (a, x) in acc.iter_mut().zip(w.weights()) {
                *a += x;
            }
        }
        let means: Vec<f64> = acc.iter().map(|a| a / n as f64).collect();
        assert!((means[0] - 800.1 / 1001.0).abs() < 1e-3);
        assert!((means[1] - 100.1 / 1001.0).abs() < 1e-3);
        assert!((means[4] - 0.1 / 1001.0).abs() < 5e-6);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut rng = RngStream::new(6, 0);
        let data = CategoricalData::from_totals(&[5, 5]).unwrap();
        let mut chain = SimplexChain::constant(vec![0.1; 3], 1.0).unwrap();
        assert!(scir_simplex_step(&mut rng, &mut chain, &Minibatch::full(10), &data, 0.1).is_err());
        assert!(exact_dirichlet_posterior(&mut rng, &[1.0], &data.totals()).is_err());
    }
}
