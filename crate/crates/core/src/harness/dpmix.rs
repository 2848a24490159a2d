//! Dirichlet-process mixture runs: SCIR and SGRLD minibatch slice samplers
//! against the exact slice sampler, scored by held-out log predictive.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use crate::distributions::RngStream;
use crate::error::Result;
use crate::evaluation::{log_predictive, MixtureSample};
use crate::harness::config::{DpMethodConfig, ExperimentConfig};
use crate::harness::data::Truth;
use crate::harness::records::RunRecord;
use crate::harness::{with_threads, Method};
use crate::models::{dp_slice_gibbs_step, dp_slice_stochastic_step_with, Corpus, DpHyper, DpState};
use crate::simplex::{Dynamics, Minibatch};

#[derive(Debug, Clone, PartialEq)]
pub struct DpRun {
    pub seed: u64,
    pub method: Method,
    pub h: f64,
    /// `(iteration, log predictive)` at every evaluation.
    pub trace: Vec<(u64, f64)>,
    /// Occupied clusters after every iteration.
    pub active: Vec<usize>,
    pub burn_in: usize,
}

impl DpRun {
    /// Mean log predictive over evaluations after burn-in.
    pub fn mean_log_predictive(&self) -> f64 {
        let post: Vec<f64> = self
            .trace
            .iter()
            .filter(|t| t.0 as usize > self.burn_in)
            .map(|t| t.1)
            .collect();
        post.iter().sum::<f64>() / post.len() as f64
    }

    /// Most frequent post-burn-in active-cluster count (smallest on ties).
    pub fn modal_clusters(&self) -> usize {
        let mut counts = BTreeMap::new();
        for &k in &self.active[self.burn_in..] {
            *counts.entry(k).or_insert(0usize) += 1;
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |e| e.0)
    }

    pub fn mean_clusters(&self) -> f64 {
        let post = &self.active[self.burn_in..];
        post.iter().sum::<usize>() as f64 / post.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpResult {
    pub runs: Vec<DpRun>,
    pub true_log_predictive: Option<f64>,
    pub true_clusters: Option<usize>,
    pub n_fraction: f64,
}

impl DpResult {
    pub fn run(&self, method: Method, seed: u64) -> Option<&DpRun> {
        self.runs.iter().find(|r| r.method == method && r.seed == seed)
    }

    pub fn records(&self) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for r in &self.runs {
            let name = if r.method == Method::Exact { "gibbs" } else { r.method.name() };
            let frac = if r.method == Method::Exact { 1.0 } else { self.n_fraction };
            let rec = |it: u64, metric: &str, v: f64| RunRecord::new("dpmix", name, r.seed, r.h, frac, it, metric, v);
            for &(it, lp) in &r.trace {
                out.push(rec(it, "log_predictive", lp));
                out.push(rec(it, "active_clusters", r.active[it as usize - 1] as f64));
            }
            let last = r.active.len() as u64;
            out.push(rec(last, "log_predictive_mean", r.mean_log_predictive()));
            out.push(rec(last, "active_clusters_mode", r.modal_clusters() as f64));
            out.push(rec(last, "active_clusters_mean", r.mean_clusters()));
        }
        if let Some(first) = self.runs.first() {
            if let Some(t) = self.true_log_predictive {
                out.push(RunRecord::new("dpmix", "truth", first.seed, 0.0, 1.0, 0, "log_predictive", t));
            }
            if let Some(k) = self.true_clusters {
                out.push(RunRecord::new("dpmix", "truth", first.seed, 0.0, 1.0, 0, "active_clusters", k as f64));
            }
        }
        out
    }
}

fn method_config(cfg: &ExperimentConfig, method: Method) -> DpMethodConfig {
    match method {
        Method::Scir => cfg.dp.scir,
        Method::Sgrld => cfg.dp.sgrld,
        Method::Exact => cfg.dp.gibbs,
    }
}

fn run_one(cfg: &ExperimentConfig, train: &Corpus, test: &Corpus, seed: u64, method: Method) -> Result<DpRun> {
    let m = method_config(cfg, method);
    let hyper = DpHyper {
        base: m.base,
        b1: cfg.dp.b1,
        b2: cfg.dp.b2,
        sample_alpha: cfg.dp.sample_alpha,
    };
    let mut rng = RngStream::new(seed, 300 + method.index());
    let mut state = DpState::init(&mut rng, train, &hyper, m.k_init, cfg.dp.alpha0)?;
    let batch_size = cfg.dp.batch.min(train.len());
    let mut window: VecDeque<MixtureSample> = VecDeque::new();
    let mut trace = Vec::new();
    let mut active = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        match method {
            Method::Exact => dp_slice_gibbs_step(&mut rng, &mut state, train, &hyper)?,
            Method::Scir | Method::Sgrld => {
                let dynamics = if method == Method::Scir { Dynamics::Scir } else { Dynamics::Sgrld };
                let batch = Minibatch::sample(&mut rng, train.len(), batch_size)?;
                dp_slice_stochastic_step_with(&mut rng, dynamics, &mut state, train, &batch, m.h_theta, m.h_dp, &hyper)?;
            }
        }
        active.push(state.active_clusters());
        let done = it + 1;
        if done % cfg.dp.eval_every == 0 {
            window.push_back(state.mixture_sample(m.base));
            if window.len() > cfg.dp.predictive_samples {
                window.pop_front();
            }
            let samples: Vec<MixtureSample> = window.iter().cloned().collect();
            trace.push((done as u64, log_predictive(test.docs(), &samples)?));
        }
    }
    Ok(DpRun {
        seed,
        method,
        h: if method == Method::Exact { 0.0 } else { m.h_theta },
        trace,
        active,
        burn_in: cfg.burn_in,
    })
}

/// Runs the three samplers for every seed on all but the last `dp.heldout`
/// items and scores the held-out ones.
pub fn run_dpmix(cfg: &ExperimentConfig, data: &Corpus, truth: Option<&Truth>) -> Result<DpResult> {
    cfg.validate()?;
    let (train, test) = data.split_heldout(cfg.dp.heldout)?;
    if test.is_empty() {
        return crate::error::param_err("the held-out set is empty");
    }
    let true_log_predictive = truth.map(|t| t.dp_log_predictive(test.docs())).transpose()?;
    let true_clusters = match truth {
        Some(Truth::Dp { weights, .. }) => Some(weights.len()),
        _ => None,
    };
    let cells: Vec<(u64, Method)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| [(s, Method::Scir), (s, Method::Sgrld), (s, Method::Exact)])
        .collect();
    let runs: Vec<Result<DpRun>> = with_threads(cfg.threads, || {
        cells
            .par_iter()
            .map(|&(seed, method)| run_one(cfg, &train, &test, seed, method))
            .collect()
    })?;
    Ok(DpResult {
        runs: runs.into_iter().collect::<Result<Vec<_>>>()?,
        true_log_predictive,
        true_clusters,
        n_fraction: cfg.dp.batch.min(train.len()) as f64 / train.len() as f64,
    })
}
