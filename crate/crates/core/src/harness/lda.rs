//! Online LDA runs scored by document-completion perplexity.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::distributions::RngStream;
use crate::error::{param_err, Result};
use crate::evaluation::{perplexity, HeldOutDoc};
use crate::harness::config::{ExperimentConfig, LdaMethodConfig};
use crate::harness::data::Truth;
use crate::harness::records::RunRecord;
use crate::harness::{with_threads, Method};
use crate::models::{
    lda_doc_topic_mean, lda_step, lda_word_probabilities, stepsize_schedule, Corpus, LdaHyper, LdaState,
};
use crate::simplex::{Dynamics, Minibatch, SimplexVector};

/// Perplexity trace of one (seed, method) run.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaRun {
    pub seed: u64,
    pub method: Method,
    pub h: f64,
    /// `(iteration, perplexity)` at every evaluation.
    pub trace: Vec<(u64, f64)>,
}

impl LdaRun {
    pub fn final_perplexity(&self) -> Option<f64> {
        self.trace.last().map(|t| t.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaResult {
    pub runs: Vec<LdaRun>,
    /// Perplexity of the held-out documents under the generating parameters.
    pub true_perplexity: Option<f64>,
    pub n_fraction: f64,
}

impl LdaResult {
    pub fn run(&self, method: Method, seed: u64) -> Option<&LdaRun> {
        self.runs.iter().find(|r| r.method == method && r.seed == seed)
    }

    pub fn records(&self) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for r in &self.runs {
            for &(it, p) in &r.trace {
                out.push(RunRecord::new("lda", r.method.name(), r.seed, r.h, self.n_fraction, it, "perplexity", p));
            }
            if let Some(t) = self.true_perplexity {
                if r.method == Method::Scir {
                    out.push(RunRecord::new("lda", "truth", r.seed, 0.0, 1.0, 0, "perplexity", t));
                }
            }
        }
        out
    }
}

/// Topic snapshot with the held-out topic proportions fitted under it.
struct Snapshot {
    phi: Vec<SimplexVector>,
    doc_topics: Vec<Vec<f64>>,
}

fn method_config(cfg: &ExperimentConfig, method: Method) -> LdaMethodConfig {
    match method {
        Method::Sgrld => cfg.lda.sgrld,
        _ => cfg.lda.scir,
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    train: &Corpus,
    heldout: &[HeldOutDoc],
    seed: u64,
    method: Method,
) -> Result<LdaRun> {
    let m = method_config(cfg, method);
    let dynamics = if method == Method::Scir { Dynamics::Scir } else { Dynamics::Sgrld };
    let hyper = LdaHyper {
        topics: cfg.lda.topics,
        alpha: m.alpha,
        beta: m.beta,
    };
    let mut init_rng = RngStream::new(seed, 100);
    let mut state = LdaState::init(&mut init_rng, hyper, train.vocab_size())?;
    let mut rng = RngStream::new(seed, 1 + method.index());
    let mut eval_rng = RngStream::new(seed, 200 + method.index());
    let batch_size = cfg.lda.batch_docs.min(train.len());
    let mut window: VecDeque<Snapshot> = VecDeque::new();
    let mut trace = Vec::new();
    for it in 0..cfg.iterations {
        let batch = Minibatch::sample(&mut rng, train.len(), batch_size)?;
        let h = stepsize_schedule(m.h, m.tau, m.kappa, it as u64);
        lda_step(&mut rng, dynamics, &mut state, train, &batch, h, cfg.lda.local_sweeps)?;
        let done = it + 1;
        if done % cfg.lda.eval_every != 0 {
            continue;
        }
        let phi = state.phi().to_vec();
        let doc_topics = heldout
            .iter()
            .map(|d| lda_doc_topic_mean(&mut eval_rng, &d.estimation, &phi, m.alpha, cfg.lda.eval_sweeps))
            .collect::<Result<Vec<_>>>()?;
        window.push_back(Snapshot { phi, doc_topics });
        if window.len() > cfg.lda.predictive_samples {
            window.pop_front();
        }
        let p = perplexity(heldout, |i, doc| {
            let mut probs = vec![0.0; doc.evaluation.len()];
            for snap in &window {
                for (acc, p) in probs
                    .iter_mut()
                    .zip(lda_word_probabilities(&snap.phi, &snap.doc_topics[i], doc))
                {
                    *acc += p / window.len() as f64;
                }
            }
            Ok(probs)
        })?;
        trace.push((done as u64, p));
    }
    Ok(LdaRun {
        seed,
        method,
        h: m.h,
        trace,
    })
}

/// Trains SCIR and SGRLD topic models on all but the last
/// `lda.heldout_docs` documents and scores the held-out ones.
pub fn run_lda(cfg: &ExperimentConfig, corpus: &Corpus, truth: Option<&Truth>) -> Result<LdaResult> {
    cfg.validate()?;
    if cfg.lda.heldout_docs == 0 {
        return param_err("the held-out set is empty");
    }
    let (train, test) = corpus.split_heldout(cfg.lda.heldout_docs)?;
    let heldout: Vec<HeldOutDoc> = test.docs().iter().map(HeldOutDoc::from_document).collect();
    if heldout.iter().all(|d| d.evaluation.is_empty()) {
        return param_err("held-out documents have no evaluation tokens");
    }
    let true_perplexity = truth
        .map(|t| t.lda_perplexity(test.docs(), train.len()))
        .transpose()?;
    let cells: Vec<(u64, Method)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| [(s, Method::Scir), (s, Method::Sgrld)])
        .collect();
    let runs: Vec<Result<LdaRun>> = with_threads(cfg.threads, || {
        cells
            .par_iter()
            .map(|&(seed, method)| run_one(cfg, &train, &heldout, seed, method))
            .collect()
    })?;
    Ok(LdaResult {
        runs: runs.into_iter().collect::<Result<Vec<_>>>()?,
        true_perplexity,
        n_fraction: cfg.lda.batch_docs.min(train.len()) as f64 / train.len() as f64,
    })
}
