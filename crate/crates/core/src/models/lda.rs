//! LDA with the topic-word simplex rows sampled by SCIR or SGRLD from online
//! minibatches of documents, and collapsed Gibbs sweeps for the local
//! token-topic assignments.

use std::collections::BTreeMap;

use rand::Rng;

use crate::distributions::{sample_categorical, sample_gamma};
use crate::error::{param_err, Error, Result};
use crate::evaluation::HeldOutDoc;
use crate::models::Corpus;
use crate::cir::ShapeEstimate;
use crate::simplex::{Dynamics, Minibatch, SimplexVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaHyper {
    /// Number of topics `K`.
    pub topics: usize,
    /// Symmetric document-topic concentration.
    pub alpha: f64,
    /// Symmetric topic-word concentration.
    pub beta: f64,
}

impl LdaHyper {
    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return param_err("LDA needs at least one topic");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return param_err("LDA concentrations must be positive");
        }
        Ok(())
    }
}

/// `h_m = h (1 + m/τ)^{−κ}`.
pub fn stepsize_schedule(h: f64, tau: f64, kappa: f64, m: u64) -> f64 {
    h * (1.0 + m as f64 / tau).powf(-kappa)
}

/// Topic-word state: one positive chain per `(k, w)` and its normalized rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaState {
    hyper: LdaHyper,
    vocab: usize,
    theta: Vec<f64>,
    phi: Vec<SimplexVector>,
    step: u64,
}

impl LdaState {
    /// Starts from explicit chain values, row-major `K × V`.
    pub fn new(hyper: LdaHyper, vocab: usize, theta: Vec<f64>) -> Result<Self> {
        hyper.validate()?;
        if vocab == 0 || theta.len() != hyper.topics * vocab {
            return param_err("topic-word chain must have K × V positive entries");
        }
        if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return param_err("topic-word chain values must be positive");
        }
        let phi = theta
            .chunks_exact(vocab)
            .map(SimplexVector::from_positive)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hyper,
            vocab,
            theta,
            phi,
            step: 0,
        })
    }

    /// Random start with every chain value drawn from Gamma(1, 1).
    pub fn init<R: Rng + ?Sized>(rng: &mut R, hyper: LdaHyper, vocab: usize) -> Result<Self> {
        let theta = (0..hyper.topics * vocab)
            .map(|_| sample_gamma(rng, 1.0, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(hyper, vocab, theta)
    }

    pub fn hyper(&self) -> &LdaHyper {
        &self.hyper
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn topics(&self) -> usize {
        self.hyper.topics
    }

    pub fn phi(&self) -> &[SimplexVector] {
        &self.phi
    }

    pub fn theta_row(&self, k: usize) -> &[f64] {
        &self.theta[k * self.vocab..(k + 1) * self.vocab]
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Token-topic assignments for one document after the local sweeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicAssignment {
    topics: usize,
    words: Vec<u32>,
    z: Vec<usize>,
}

impl TopicAssignment {
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn assignments(&self) -> &[usize] {
        &self.z
    }

    pub fn topic_totals(&self) -> Vec<u32> {
        let mut c = vec![0; self.topics];
        for &k in &self.z {
            c[k] += 1;
        }
        c
    }

    /// Counts per `(topic, word)` pair.
    pub fn counts(&self) -> BTreeMap<(usize, u32), u32> {
        let mut m = BTreeMap::new();
        for (&w, &k) in self.words.iter().zip(&self.z) {
            *m.entry((k, w)).or_insert(0) += 1;
        }
        m
    }
}

fn check_phi(phi: &[SimplexVector]) -> Result<usize> {
    let v = phi.first().map(SimplexVector::dim).ok_or_else(|| Error::Parameter("no topics".into()))?;
    if phi.iter().any(|p| p.dim() != v) {
        return param_err("topic rows differ in dimension");
    }
    Ok(v)
}

/// Collapsed Gibbs over token topics; `on_sweep` sees the topic counts and
/// the assignments after every sweep. Returns the final assignments.
fn gibbs_topics<R, F>(
    rng: &mut R,
    words: &[u32],
    phi: &[SimplexVector],
    alpha: f64,
    sweeps: usize,
    mut on_sweep: F,
) -> Result<Vec<usize>>
where
    R: Rng + ?Sized,
    F: FnMut(&[u32], &[usize]),
{
    let k_topics = phi.len();
    let vocab = check_phi(phi)?;
    if sweeps == 0 {
        return param_err("at least one local sweep is required");
    }
    if words.iter().any(|&w| w as usize >= vocab) {
        return param_err("document word outside the topic vocabulary");
    }
    if k_topics == 1 {
        let c = [words.len() as u32];
        let z = vec![0; words.len()];
        for _ in 0..sweeps {
            on_sweep(&c, &z);
        }
        return Ok(z);
    }
    let mut weights = vec![0.0; k_topics];
    let mut counts = vec![0u32; k_topics];
    let mut z = Vec::with_capacity(words.len());
    for &w in words {
        for (wk, p) in weights.iter_mut().zip(phi) {
            *wk = p.weights()[w as usize];
        }
        let k = categorical_or_prior(rng, &mut weights, &counts, alpha, false)?;
        counts[k] += 1;
        z.push(k);
    }
    for _ in 0..sweeps {
        for (t, &w) in words.iter().enumerate() {
            counts[z[t]] -= 1;
            for (k, (wk, p)) in weights.iter_mut().zip(phi).enumerate() {
                *wk = (alpha + counts[k] as f64) * p.weights()[w as usize];
            }
            let k = categorical_or_prior(rng, &mut weights, &counts, alpha, true)?;
            counts[k] += 1;
            z[t] = k;
        }
        on_sweep(&counts, &z);
    }
    Ok(z)
}

/// Samples from `weights`; if every topic gives the word zero probability the
/// word carries no information and the draw falls back to the count term.
fn categorical_or_prior<R: Rng + ?Sized>(
    rng: &mut R,
    weights: &mut [f64],
    counts: &[u32],
    alpha: f64,
    with_counts: bool,
) -> Result<usize> {
    if weights.iter().sum::<f64>() > 0.0 {
        return sample_categorical(rng, weights);
    }
    for (w, c) in weights.iter_mut().zip(counts) {
        *w = if with_counts { alpha + *c as f64 } else { 1.0 };
    }
    sample_categorical(rng, weights)
}

/// Resamples the topic of every token of `doc` for `sweeps` sweeps with the
/// document's topic proportions integrated out.
pub fn lda_local_z_sweep<R: Rng + ?Sized>(
    rng: &mut R,
    doc: &crate::models::Document,
    phi: &[SimplexVector],
    alpha: f64,
    sweeps: usize,
) -> Result<TopicAssignment> {
    let words = doc.tokens();
    let z = gibbs_topics(rng, &words, phi, alpha, sweeps, |_, _| {})?;
    Ok(TopicAssignment {
        topics: phi.len(),
        words,
        z,
    })
}

/// Posterior-mean topic proportions of a token list under fixed `phi`,
/// averaged over the second half of `sweeps` Gibbs sweeps.
pub fn lda_doc_topic_mean<R: Rng + ?Sized>(
    rng: &mut R,
    tokens: &[u32],
    phi: &[SimplexVector],
    alpha: f64,
    sweeps: usize,
) -> Result<Vec<f64>> {
    let k = phi.len();
    let n = tokens.len() as f64;
    let denom = k as f64 * alpha + n;
    let mut mean = vec![0.0; k];
    let mut kept = 0usize;
    let mut sweep = 0usize;
    let skip = sweeps / 2;
    gibbs_topics(rng, tokens, phi, alpha, sweeps, |c, _| {
        if sweep >= skip {
            for (m, &ck) in mean.iter_mut().zip(c) {
                *m += (alpha + ck as f64) / denom;
            }
            kept += 1;
        }
        sweep += 1;
    })?;
    for m in &mut mean {
        *m /= kept as f64;
    }
    Ok(mean)
}

/// `p(w) = Σ_k θ_k φ_{k,w}` for each evaluation token of a held-out document.
pub fn lda_word_probabilities(phi: &[SimplexVector], doc_topics: &[f64], doc: &HeldOutDoc) -> Vec<f64> {
    doc.evaluation
        .iter()
        .map(|&w| {
            phi.iter()
                .zip(doc_topics)
                .map(|(p, t)| t * p.weights()[w as usize])
                .sum()
        })
        .collect()
}

/// One online step. Every minibatch document gets `sweeps` local Gibbs
/// sweeps; its topic-word counts are averaged over the second half of them.
/// Each topic-word chain then advances with `â_{k,w} = β + (D/|batch|) n̄_{k,w}`.
#[allow(clippy::too_many_arguments)]
pub fn lda_step<R: Rng + ?Sized>(
    rng: &mut R,
    dynamics: Dynamics,
    state: &mut LdaState,
    corpus: &Corpus,
    batch: &Minibatch,
    h: f64,
    sweeps: usize,
) -> Result<()> {
    if corpus.vocab_size() != state.vocab {
        return param_err(format!(
            "corpus vocabulary {} does not match model vocabulary {}",
            corpus.vocab_size(),
            state.vocab
        ));
    }
    if batch.population() != corpus.len() || batch.is_empty() {
        return param_err("minibatch must be non-empty and drawn from the corpus");
    }
    let v = state.vocab;
    let skip = sweeps / 2;
    let mut counts = vec![0.0; state.hyper.topics * v];
    for &l in batch.indices() {
        let words = corpus.docs()[l].tokens();
        let mut sweep = 0;
        gibbs_topics(rng, &words, &state.phi, state.hyper.alpha, sweeps, |_, z| {
            if sweep >= skip {
                for (&w, &k) in words.iter().zip(z) {
                    counts[k * v + w as usize] += 1.0;
                }
            }
            sweep += 1;
        })?;
    }
    let kept = (sweeps - skip) as f64;
    let scale = batch.scale();
    for (theta, &c) in state.theta.iter_mut().zip(&counts) {
        let ahat = ShapeEstimate::new(state.hyper.beta, scale * (c / kept))?;
        *theta = dynamics.advance(rng, *theta, ahat.total(), h)?;
    }
    for (k, phi) in state.phi.iter_mut().enumerate() {
        *phi = SimplexVector::from_positive(&state.theta[k * v..(k + 1) * v])?;
    }
    state.step += 1;
    Ok(())
}

pub fn lda_scir_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &mut LdaState,
    corpus: &Corpus,
    batch: &Minibatch,
    h: f64,
    sweeps: usize,
) -> Result<()> {
    lda_step(rng, Dynamics::Scir, state, corpus, batch, h, sweeps)
}

pub fn lda_sgrld_step<R: Rng + ?Sized>(
    rng: &mut R,
    state: &mut LdaState,
    corpus: &Corpus,
    batch: &Minibatch,
    h: f64,
    sweeps: usize,
) -> Result<()> {
    lda_step(rng, Dynamics::Sgrld, state, corpus, batch, h, sweeps)
}
