//! Dirichlet-process mixture of multinomials under the stick-breaking
//! representation, sampled with the slice construction: an exact Gibbs sweep
//! and a minibatch sweep whose sticks and components move by SCIR (or SGRLD).

use rand::Rng;

use crate::distributions::{sample_beta, sample_categorical_ln, sample_dirichlet, sample_gamma};
use crate::error::{param_err, Error, Result};
use crate::evaluation::MixtureSample;
use crate::models::{Corpus, Document};
use crate::simplex::{Dynamics, Minibatch, SimplexVector, SGRLD_FLOOR};

/// Upper bound on instantiated components; reaching it means the slice
/// variables have collapsed numerically.
const MAX_COMPONENTS: usize = 100_000;

/// Keeps sticks strictly inside (0, 1) so `log(1 − v)` stays finite.
fn clamp_stick(v: f64) -> f64 {
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpHyper {
    /// Symmetric Dirichlet base-measure concentration `a`.
    pub base: f64,
    /// Gamma(b1, b2) prior on the DP concentration.
    pub b1: f64,
    pub b2: f64,
    /// Whether the concentration is resampled each sweep.
    pub sample_alpha: bool,
}

impl DpHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.b1 > 0.0 && self.b2 > 0.0) {
            return param_err("DP hyperparameters must be positive");
        }
        Ok(())
    }
}

/// Slice-sampler state. Component `j` is label `j`; labels are never
/// compacted, components beyond the largest occupied label are discarded and
/// redrawn from the prior when the slice requires more mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    dim: usize,
    alpha: f64,
    sticks: Vec<f64>,
    stick_chains: Vec<[f64; 2]>,
    weights: Vec<f64>,
    components: Vec<SimplexVector>,
    component_chains: Vec<Vec<f64>>,
    z: Vec<usize>,
    u: Vec<f64>,
}

impl DpState {
    /// `k_init` prior components with items allocated uniformly among them.
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        data: &Corpus,
        hyper: &DpHyper,
        k_init: usize,
        alpha0: f64,
    ) -> Result<Self> {
        hyper.validate()?;
        if k_init == 0 {
            return param_err("initial truncation must be at least 1");
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return param_err("DP concentration must be positive");
        }
        if data.is_empty() {
            return param_err("no data items");
        }
        let mut s = Self {
            dim: data.vocab_size(),
            alpha: alpha0,
            sticks: Vec::new(),
            stick_chains: Vec::new(),
            weights: Vec::new(),
            components: Vec::new(),
            component_chains: Vec::new(),
            z: Vec::with_capacity(data.len()),
            u: Vec::with_capacity(data.len()),
        };
        for _ in 0..k_init {
            s.push_prior_component(rng, hyper)?;
        }
        s.recompute_weights();
        for _ in 0..data.len() {
            let j = rng.random_range(0..k_init);
            s.z.push(j);
            s.u.push(rng.random::<f64>() * s.weights[j]);
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sticks(&self) -> &[f64] {
        &self.sticks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[SimplexVector] {
        &self.components
    }

    pub fn allocations(&self) -> &[usize] {
        &self.z
    }

    pub fn slices(&self) -> &[f64] {
        &self.u
    }

    /// Number of instantiated components `k`.
    pub fn len(&self) -> usize {
        self.sticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sticks.is_empty()
    }

    /// `Z*`: one past the largest occupied label.
    pub fn occupied_span(&self) -> usize {
        self.z.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Items per component over the first `k` labels.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut m = vec![0; self.len().max(self.occupied_span())];
        for &j in &self.z {
            m[j] += 1;
        }
        m
    }

    /// Number of distinct occupied components.
    pub fn active_clusters(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&m| m > 0).count()
    }

    /// `Π_j (1 − v_j)`: stick mass not covered by the instantiated weights.
    pub fn remaining_mass(&self) -> f64 {
        self.sticks.iter().map(|v| 1.0 - v).product()
    }

    pub fn mixture_sample(&self, base: f64) -> MixtureSample {
        MixtureSample {
            weights: self.weights.clone(),
            components: self.components.iter().map(|c| c.weights().to_vec()).collect(),
            base_concentration: base,
            dim: self.dim,
        }
    }

    /// Checks the stick identity, label ranges and component normalization.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.len();
        if self.weights.len() != k || self.components.len() != k || self.stick_chains.len() != k {
            return Err(Error::Degenerate("DP state vectors disagree in length".into()));
        }
        let mut rest = 1.0;
        for (j, (&v, &w)) in self.sticks.iter().zip(&self.weights).enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Degenerate(format!("stick {j} = {v} outside (0, 1)")));
            }
            if (w - v * rest).abs() > 1e-12 {
                return Err(Error::Degenerate(format!("stick identity fails at {j}")));
            }
            rest *= 1.0 - v;
        }
        if self.z.iter().any(|&j| j >= k) {
            return Err(Error::Degenerate("allocation to an uninstantiated component".into()));
        }
        Ok(())
    }

    /// Whether item `i` satisfies `u_i < ω_{z_i}`.
    pub fn slice_valid(&self, i: usize) -> bool {
        self.u[i] < self.weights[self.z[i]]
    }

    /// Whether the instantiated weights cover `1 − u`.
    pub fn covers(&self, u: f64) -> bool {
        self.remaining_mass() < u
    }

    fn push_prior_component<R: Rng + ?Sized>(&mut self, rng: &mut R, hyper: &DpHyper) -> Result<()> {
        if self.len() >= MAX_COMPONENTS {
            return Err(Error::Degenerate(format!(
                "more than {MAX_COMPONENTS} components needed to cover the slice"
            )));
        }
        let ga = sample_gamma(rng, 1.0, 1.0)?;
        let gb = sample_gamma(rng, self.alpha, 1.0)?;
        self.sticks.push(clamp_stick(ga / (ga + gb)));
        self.stick_chains.push([ga, gb]);
        let chain = (0..self.dim)
            .map(|_| Ok(sample_gamma(rng, hyper.base, 1.0)?.max(SGRLD_FLOOR)))
            .collect::<Result<Vec<_>>>()?;
        self.components.push(SimplexVector::from_positive(&chain)?);
        self.component_chains.push(chain);
        self.weights.push(0.0);
        Ok(())
    }

    fn recompute_weights(&mut self) {
        let mut rest = 1.0;
        self.weights.clear();
        for &v in &self.sticks {
            self.weights.push(v * rest);
            rest *= 1.0 - v;
        }
    }

    fn truncate(&mut self, k: usize) {
        self.sticks.truncate(k);
        self.stick_chains.truncate(k);
        self.weights.truncate(k);
        self.components.truncate(k);
        self.component_chains.truncate(k);
    }

    /// Adds prior components until the weights cover `1 − u_star`.
    fn extend_to_cover<R: Rng + ?Sized>(&mut self, rng: &mut R, hyper: &DpHyper, u_star: f64) -> Result<()> {
        let mut rest = self.remaining_mass();
        while rest >= u_star {
            self.push_prior_component(rng, hyper)?;
            let v = *self.sticks.last().expect("component just pushed");
            let w = v * rest;
            *self.weights.last_mut().expect("component just pushed") = w;
            rest *= 1.0 - v;
        }
        Ok(())
    }

    fn ln_components(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.weights().iter().map(|p| p.ln()).collect())
            .collect()
    }

    fn resample_allocation<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        i: usize,
        item: &Document,
        ln_theta: &[Vec<f64>],
        scratch: &mut Vec<(usize, f64)>,
    ) -> Result<()> {
        scratch.clear();
        for (j, (&w, lt)) in self.weights.iter().zip(ln_theta).enumerate() {
            if w > self.u[i] {
                let ll: f64 = item.iter().map(|(word, c)| c as f64 * lt[word as usize]).sum();
                scratch.push((j, ll));
            }
        }
        if scratch.is_empty() {
            return Err(Error::Degenerate(format!("slice of item {i} admits no component")));
        }
        let lw: Vec<f64> = scratch.iter().map(|e| e.1).collect();
        let pick = if lw.iter().all(|l| *l == f64::NEG_INFINITY) {
            // every candidate gives zero likelihood: fall back to uniform
            rng.random_range(0..lw.len())
        } else {
            sample_categorical_ln(rng, &lw)?
        };
        self.z[i] = scratch[pick].0;
        Ok(())
    }

    fn sync_component(&mut self, j: usize, chain: Vec<f64>) -> Result<()> {
        self.components[j] = SimplexVector::from_positive(&chain)?;
        self.component_chains[j] = chain;
        Ok(())
    }
}

/// `α ~ Gamma(b1 + Z*, b2 − Σ_{j<Z*} log(1 − v_j))` over the occupied sticks.
pub fn dp_alpha_update<R: Rng + ?Sized>(rng: &mut R, b1: f64, b2: f64, occupied_sticks: &[f64]) -> Result<f64> {
    let rate = b2 - occupied_sticks.iter().map(|v| (1.0 - v).ln()).sum::<f64>();
    sample_gamma(rng, b1 + occupied_sticks.len() as f64, rate)
}

fn check_data(state: &DpState, data: &Corpus) -> Result<()> {
    if data.vocab_size() != state.dim || data.len() != state.z.len() {
        return param_err("data do not match the DP state");
    }
    Ok(())
}

/// One exact slice-sampler sweep over every item.
pub fn dp_slice_gibbs_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &mut DpState,
    data: &Corpus,
    hyper: &DpHyper,
) -> Result<()> {
    hyper.validate()?;
    check_data(state, data)?;
    let items = data.docs();
    for i in 0..items.len() {
        state.u[i] = rng.random::<f64>() * state.weights[state.z[i]];
    }
    let u_star = state.u.iter().copied().fold(f64::INFINITY, f64::min);
    state.truncate(state.occupied_span());
    state.extend_to_cover(rng, hyper, u_star)?;

    let ln_theta = state.ln_components();
    let mut scratch = Vec::new();
    for (i, item) in items.iter().enumerate() {
        state.resample_allocation(rng, i, item, &ln_theta, &mut scratch)?;
    }

    let k = state.len();
    let mut counts = vec![vec![0.0; state.dim]; k];
    let mut m = vec![0usize; k];
    for (item, &j) in items.iter().zip(&state.z) {
        m[j] += 1;
        for (w, c) in item.iter() {
            counts[j][w as usize] += c as f64;
        }
    }
    for (j, cj) in counts.iter_mut().enumerate() {
        for c in cj.iter_mut() {
            *c += hyper.base;
        }
        let theta = sample_dirichlet(rng, cj)?;
        let chain = theta.weights().iter().map(|p| p.max(SGRLD_FLOOR)).collect();
        state.sync_component(j, chain)?;
    }
    let mut tail: usize = m.iter().sum();
    for (j, &mj) in m.iter().enumerate() {
        tail -= mj;
        let v = clamp_stick(sample_beta(rng, 1.0 + mj as f64, state.alpha + tail as f64)?);
        state.sticks[j] = v;
        state.stick_chains[j] = [v, 1.0 - v];
    }
    state.recompute_weights();
    if hyper.sample_alpha {
        let span = state.occupied_span();
        state.alpha = dp_alpha_update(rng, hyper.b1, hyper.b2, &state.sticks[..span])?;
    }
    Ok(())
}

/// One minibatch sweep with SCIR moves for sticks and components.
#[allow(clippy::too_many_arguments)]
pub fn dp_slice_stochastic_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &mut DpState,
    data: &Corpus,
    batch: &Minibatch,
    h_theta: f64,
    h_dp: f64,
    hyper: &DpHyper,
) -> Result<()> {
    dp_slice_stochastic_step_with(rng, Dynamics::Scir, state, data, batch, h_theta, h_dp, hyper)
}

/// Minibatch sweep with the given dynamics:
/// 1. drop components beyond the occupied span `Z*`;
/// 2. move each stick's two gamma chains with shapes `1 + m̂_j` and
///    `α + Σ_{l>j} m̂_l`, where `m̂_j = (L/n)·#{i ∈ S : z_i = j}`;
/// 3. recompute the weights;
/// 4. move each component's chains with shapes `a + (L/n)·(batch counts)`;
/// 5. draw slices for the batch items;
/// 6. resample the concentration;
/// 7. extend from the prior until the batch slices are covered;
/// 8. reallocate the batch items.
#[allow(clippy::too_many_arguments)]
pub fn dp_slice_stochastic_step_with<R: Rng + ?Sized>(
    rng: &mut R,
    dynamics: Dynamics,
    state: &mut DpState,
    data: &Corpus,
    batch: &Minibatch,
    h_theta: f64,
    h_dp: f64,
    hyper: &DpHyper,
) -> Result<()> {
    hyper.validate()?;
    check_data(state, data)?;
    if batch.population() != data.len() || batch.is_empty() {
        return param_err("minibatch must be non-empty and drawn from the data");
    }
    let items = data.docs();
    let scale = batch.scale();

    let span = state.occupied_span();
    state.truncate(span);
    let mut m_hat = vec![0.0; span];
    let mut counts = vec![vec![0.0; state.dim]; span];
    for &i in batch.indices() {
        let j = state.z[i];
        m_hat[j] += scale;
        for (w, c) in items[i].iter() {
            counts[j][w as usize] += c as f64;
        }
    }
    let mut tail: f64 = m_hat.iter().sum();
    for (j, &mj) in m_hat.iter().enumerate() {
        tail = (tail - mj).max(0.0);
        let [ga, gb] = state.stick_chains[j];
        let ga = dynamics.advance(rng, ga, 1.0 + mj, h_dp)?;
        let gb = dynamics.advance(rng, gb, state.alpha + tail, h_dp)?;
        state.stick_chains[j] = [ga, gb];
        state.sticks[j] = clamp_stick(ga / (ga + gb));
    }
    state.recompute_weights();

    for (j, cj) in counts.iter().enumerate() {
        let mut chain = std::mem::take(&mut state.component_chains[j]);
        for (g, &c) in chain.iter_mut().zip(cj) {
            *g = dynamics.advance(rng, *g, hyper.base + scale * c, h_theta)?;
        }
        state.sync_component(j, chain)?;
    }

    let mut u_star = f64::INFINITY;
    for &i in batch.indices() {
        let u = rng.random::<f64>() * state.weights[state.z[i]];
        state.u[i] = u;
        u_star = u_star.min(u);
    }
    if hyper.sample_alpha {
        state.alpha = dp_alpha_update(rng, hyper.b1, hyper.b2, &state.sticks[..span])?;
    }
    state.extend_to_cover(rng, hyper, u_star)?;

    let ln_theta = state.ln_components();
    let mut scratch = Vec::new();
    for &i in batch.indices() {
        state.resample_allocation(rng, i, &items[i], &ln_theta, &mut scratch)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;

    fn hyper() -> DpHyper {
        DpHyper {
            base: 0.5,
            b1: 1.0,
            b2: 1.0,
            sample_alpha: true,
        }
    }

    fn two_cluster_data() -> Corpus {
        let docs = (0..40)
            .map(|i| {
                let w = if i % 2 == 0 { 0 } else { 5 };
                Document::new(format!("u{i}"), vec![(w, 2), (w + 1, 1)]).unwrap()
            })
            .collect();
        Corpus::new(8, docs).unwrap()
    }

    #[test]
    fn alpha_update_mean() {
        let mut rng = RngStream::new(5, 0);
        let n = 200_000;
        let sticks = [0.5, 0.5, 0.5];
        let mean = (0..n)
            .map(|_| dp_alpha_update(&mut rng, 1.0, 1.0, &sticks).unwrap())
            .sum::<f64>()
            / n as f64;
        let expected = 4.0 / (1.0 + 3.0 * 2f64.ln());
        assert!((expected - 1.299).abs() < 1e-3);
        assert!((mean - expected).abs() < 0.01, "{mean}");
    }

    #[test]
    fn gibbs_sweeps_keep_invariants() {
        let mut rng = RngStream::new(6, 0);
        let data = two_cluster_data();
        let mut s = DpState::init(&mut rng, &data, &hyper(), 5, 1.0).unwrap();
        for _ in 0..50 {
            dp_slice_gibbs_step(&mut rng, &mut s, &data, &hyper()).unwrap();
            s.check_invariants().unwrap();
        }
        assert_eq!(s.active_clusters(), 2);
    }

    #[test]
    fn stochastic_sweeps_keep_invariants() {
        let data = two_cluster_data();
        for dynamics in [Dynamics::Scir, Dynamics::Sgrld] {
            let mut rng = RngStream::new(7, 0);
            let mut s = DpState::init(&mut rng, &data, &hyper(), 5, 1.0).unwrap();
            for _ in 0..100 {
                let batch = Minibatch::sample(&mut rng, data.len(), 10).unwrap();
                dp_slice_stochastic_step_with(&mut rng, dynamics, &mut s, &data, &batch, 0.1, 0.1, &hyper())
                    .unwrap();
                s.check_invariants().unwrap();
                for &i in batch.indices() {
                    assert!(s.slice_valid(i));
                }
                let u_star = batch.indices().iter().map(|&i| s.slices()[i]).fold(1.0, f64::min);
                assert!(s.covers(u_star));
            }
        }
    }
}
