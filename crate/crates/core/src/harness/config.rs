//! Experiment configuration: defaults for every experiment plus a flat
//! `key = value` file format with `#` comments.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Synthetic,
    Lda,
    Dpmix,
    Theory,
    GenData,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Synthetic => "synthetic",
            ExperimentKind::Lda => "lda",
            ExperimentKind::Dpmix => "dpmix",
            ExperimentKind::Theory => "theory",
            ExperimentKind::GenData => "gen-data",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synthetic" => ExperimentKind::Synthetic,
            "lda" => ExperimentKind::Lda,
            "dpmix" => ExperimentKind::Dpmix,
            "theory" => ExperimentKind::Theory,
            "gen-data" => ExperimentKind::GenData,
            _ => return Err(Error::Config(format!("unknown experiment {s:?}"))),
        })
    }
}

/// The two fixed Dirichlet posteriors of the synthetic experiment: ten
/// categories, 1000 observations, symmetric prior 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosteriorKind {
    /// Totals (800, 100, 100, 0, …, 0): seven near-empty categories.
    Sparse,
    /// Totals close to 100 in every category.
    Dense,
}

impl PosteriorKind {
    pub const PRIOR: f64 = 0.1;

    pub fn name(self) -> &'static str {
        match self {
            PosteriorKind::Sparse => "sparse",
            PosteriorKind::Dense => "dense",
        }
    }

    pub fn totals(self) -> [u64; 10] {
        match self {
            PosteriorKind::Sparse => [800, 100, 100, 0, 0, 0, 0, 0, 0, 0],
            PosteriorKind::Dense => [112, 119, 92, 98, 95, 96, 102, 92, 91, 103],
        }
    }

    /// `α + totals`.
    pub fn posterior_alpha(self) -> Vec<f64> {
        self.totals().iter().map(|&t| Self::PRIOR + t as f64).collect()
    }
}

impl FromStr for PosteriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(PosteriorKind::Sparse),
            "dense" => Ok(PosteriorKind::Dense),
            _ => Err(Error::Config(format!("unknown posterior {s:?}"))),
        }
    }
}

/// Generative family of a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Lda,
    Dp,
}

impl FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lda" => Ok(CorpusKind::Lda),
            "dp" => Ok(CorpusKind::Dp),
            _ => Err(Error::Config(format!("unknown corpus kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub posteriors: Vec<PosteriorKind>,
    pub minibatch_fractions: Vec<f64>,
    pub scir_stepsizes: Vec<f64>,
    pub sgrld_stepsizes: Vec<f64>,
    /// Starting value of every gamma coordinate.
    pub init_theta: f64,
    /// Zero-based component summarized by the boxplot quantiles.
    pub boxplot_component: usize,
}

/// Per-method LDA settings: stepsize schedule and concentrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaMethodConfig {
    pub h: f64,
    pub tau: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    pub batch_docs: usize,
    /// Local Gibbs sweeps per minibatch document.
    pub local_sweeps: usize,
    pub eval_every: usize,
    /// Gibbs sweeps used to fit a held-out document's topic proportions.
    pub eval_sweeps: usize,
    /// Number of recent topic snapshots averaged in the predictive.
    pub predictive_samples: usize,
    pub heldout_docs: usize,
    pub scir: LdaMethodConfig,
    pub sgrld: LdaMethodConfig,
}

/// Per-method DP mixture settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpMethodConfig {
    pub h_theta: f64,
    pub h_dp: f64,
    pub base: f64,
    pub k_init: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpConfig {
    pub batch: usize,
    pub b1: f64,
    pub b2: f64,
    pub alpha0: f64,
    pub sample_alpha: bool,
    pub eval_every: usize,
    pub predictive_samples: usize,
    pub heldout: usize,
    pub scir: DpMethodConfig,
    pub sgrld: DpMethodConfig,
    pub gibbs: DpMethodConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    /// Chains per Monte Carlo moment check.
    pub chains: usize,
    /// Random parameter settings for the moment checks.
    pub settings: usize,
    /// Chains per conditional MGF check.
    pub mgf_chains: usize,
    /// Randomized (s, h, n) triples for the lemma checks.
    pub lemma_cases: usize,
    /// Stationary draws for the generalized-gamma KS check.
    pub stationary_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub kind: CorpusKind,
    pub topics: usize,
    pub vocab: usize,
    pub items: usize,
    pub doc_len: usize,
    /// Dirichlet concentration of each topic or cluster word distribution.
    pub sparsity: f64,
    /// Dirichlet concentration of LDA document-topic proportions.
    pub doc_alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub burn_in: usize,
    /// Corpus file for `lda`/`dpmix`; generated from `data` when absent.
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub threads: Option<usize>,
    pub synthetic: SyntheticConfig,
    pub lda: LdaConfig,
    pub dp: DpConfig,
    pub theory: TheoryConfig,
    pub data: DataConfig,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (iterations, burn_in) = match kind {
            ExperimentKind::Synthetic => (2000, 1000),
            ExperimentKind::Lda => (300, 0),
            ExperimentKind::Dpmix => (400, 200),
            ExperimentKind::Theory | ExperimentKind::GenData => (1, 0),
        };
        let data = match kind {
            ExperimentKind::Dpmix => DataConfig {
                kind: CorpusKind::Dp,
                topics: 4,
                vocab: 50,
                items: 3500,
                doc_len: 10,
                sparsity: 0.1,
                doc_alpha: 0.5,
                seed: 7,
            },
            _ => DataConfig {
                kind: CorpusKind::Lda,
                topics: 3,
                vocab: 100,
                items: 550,
                doc_len: 50,
                sparsity: 0.1,
                doc_alpha: 0.5,
                seed: 7,
            },
        };
        Self {
            kind,
            seeds: vec![1, 2, 3, 4, 5],
            iterations,
            burn_in,
            input: None,
            output: PathBuf::from(format!("{}.csv", kind.name())),
            threads: None,
            synthetic: SyntheticConfig {
                posteriors: vec![PosteriorKind::Sparse, PosteriorKind::Dense],
                minibatch_fractions: vec![0.001, 0.01, 0.1, 0.5],
                scir_stepsizes: vec![1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001],
                sgrld_stepsizes: vec![0.5, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001],
                init_theta: 1.0,
                boxplot_component: 4,
            },
            lda: LdaConfig {
                topics: 100,
                batch_docs: 50,
                local_sweeps: 200,
                eval_every: 5,
                eval_sweeps: 20,
                predictive_samples: 10,
                heldout_docs: 50,
                scir: LdaMethodConfig {
                    h: 0.5,
                    tau: 10.0,
                    kappa: 0.33,
                    alpha: 0.1,
                    beta: 0.5,
                },
                sgrld: LdaMethodConfig {
                    h: 0.01,
                    tau: 1000.0,
                    kappa: 0.6,
                    alpha: 0.01,
                    beta: 0.0001,
                },
            },
            dp: DpConfig {
                batch: 1000,
                b1: 1.0,
                b2: 1.0,
                alpha0: 1.0,
                sample_alpha: true,
                eval_every: 10,
                predictive_samples: 5,
                heldout: 500,
                scir: DpMethodConfig {
                    h_theta: 0.1,
                    h_dp: 0.1,
                    base: 0.5,
                    k_init: 20,
                },
                sgrld: DpMethodConfig {
                    h_theta: 0.001,
                    h_dp: 0.005,
                    base: 0.001,
                    k_init: 30,
                },
                gibbs: DpMethodConfig {
                    h_theta: 0.0,
                    h_dp: 0.0,
                    base: 0.5,
                    k_init: 20,
                },
            },
            theory: TheoryConfig {
                chains: 100_000,
                settings: 10,
                mgf_chains: 1_000_000,
                lemma_cases: 100,
                stationary_draws: 100_000,
            },
            data,
        }
    }

    /// Reads a config file. The experiment kind comes from the file's
    /// `experiment` key, else from `default_kind`; defaults for that kind are
    /// applied first and then overridden key by key.
    pub fn from_file(path: &Path, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, default_kind)
    }

    pub fn parse(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let kind = match pairs.iter().find(|(k, _, _)| k == "experiment") {
            Some((_, v, _)) => v.parse()?,
            None => default_kind.ok_or_else(|| Error::Config("no experiment kind given".into()))?,
        };
        let mut cfg = Self::defaults(kind);
        for (key, value, line) in &pairs {
            if key == "experiment" {
                continue;
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one setting by its flat key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seeds" => self.seeds = list(value)?,
            "iterations" => self.iterations = one(value)?,
            "burn_in" => self.burn_in = one(value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = PathBuf::from(value),
            "threads" => self.threads = Some(one(value)?),

            "posteriors" => self.synthetic.posteriors = list(value)?,
            "minibatch_fractions" => self.synthetic.minibatch_fractions = list(value)?,
            "scir.stepsizes" => self.synthetic.scir_stepsizes = list(value)?,
            "sgrld.stepsizes" => self.synthetic.sgrld_stepsizes = list(value)?,
            "init_theta" => self.synthetic.init_theta = one(value)?,
            "boxplot_component" => self.synthetic.boxplot_component = one(value)?,

            "lda.topics" => self.lda.topics = one(value)?,
            "lda.batch_docs" => self.lda.batch_docs = one(value)?,
            "lda.local_sweeps" => self.lda.local_sweeps = one(value)?,
            "lda.eval_every" => self.lda.eval_every = one(value)?,
            "lda.eval_sweeps" => self.lda.eval_sweeps = one(value)?,
            "lda.predictive_samples" => self.lda.predictive_samples = one(value)?,
            "lda.heldout_docs" => self.lda.heldout_docs = one(value)?,

            "dp.batch" => self.dp.batch = one(value)?,
            "dp.b1" => self.dp.b1 = one(value)?,
            "dp.b2" => self.dp.b2 = one(value)?,
            "dp.alpha0" => self.dp.alpha0 = one(value)?,
            "dp.sample_alpha" => self.dp.sample_alpha = one(value)?,
            "dp.eval_every" => self.dp.eval_every = one(value)?,
            "dp.predictive_samples" => self.dp.predictive_samples = one(value)?,
            "dp.heldout" => self.dp.heldout = one(value)?,

            "theory.chains" => self.theory.chains = one(value)?,
            "theory.settings" => self.theory.settings = one(value)?,
            "theory.mgf_chains" => self.theory.mgf_chains = one(value)?,
            "theory.lemma_cases" => self.theory.lemma_cases = one(value)?,
            "theory.stationary_draws" => self.theory.stationary_draws = one(value)?,

            "data.kind" => self.data.kind = one(value)?,
            "data.topics" => self.data.topics = one(value)?,
            "data.vocab" => self.data.vocab = one(value)?,
            "data.items" => self.data.items = one(value)?,
            "data.doc_len" => self.data.doc_len = one(value)?,
            "data.sparsity" => self.data.sparsity = one(value)?,
            "data.doc_alpha" => self.data.doc_alpha = one(value)?,
            "data.seed" => self.data.seed = one(value)?,

            _ => return self.set_method(key, value),
        }
        Ok(())
    }

    fn set_method(&mut self, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::Config(format!("unknown key {key:?}"));
        let (section, field) = key.rsplit_once('.').ok_or_else(unknown)?;
        match section {
            "lda.scir" | "lda.sgrld" => {
                let m = if section == "lda.scir" {
                    &mut self.lda.scir
                } else {
                    &mut self.lda.sgrld
                };
                match field {
                    "h" => m.h = one(value)?,
                    "tau" => m.tau = one(value)?,
                    "kappa" => m.kappa = one(value)?,
                    "alpha" => m.alpha = one(value)?,
                    "beta" => m.beta = one(value)?,
                    _ => return Err(unknown()),
                }
            }
            "dp.scir" | "dp.sgrld" | "dp.gibbs" => {
                let m = match section {
                    "dp.scir" => &mut self.dp.scir,
                    "dp.sgrld" => &mut self.dp.sgrld,
                    _ => &mut self.dp.gibbs,
                };
                match field {
                    "h_theta" => m.h_theta = one(value)?,
                    "h_dp" => m.h_dp = one(value)?,
                    "a" => m.base = one(value)?,
                    "k_init" => m.k_init = one(value)?,
                    _ => return Err(unknown()),
                }
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return fail("seed list is empty");
        }
        if self.iterations <= self.burn_in {
            return fail("iterations must exceed burn_in");
        }
        let s = &self.synthetic;
        if s.posteriors.is_empty() || s.minibatch_fractions.is_empty() {
            return fail("posterior and minibatch-fraction lists must be non-empty");
        }
        if s.scir_stepsizes.is_empty() || s.sgrld_stepsizes.is_empty() {
            return fail("stepsize grids must be non-empty");
        }
        if s.minibatch_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return fail("minibatch fractions must lie in (0, 1]");
        }
        if s.scir_stepsizes.iter().chain(&s.sgrld_stepsizes).any(|h| !(*h > 0.0 && h.is_finite())) {
            return fail("stepsizes must be positive");
        }
        if s.init_theta.is_nan() || s.init_theta <= 0.0 || s.boxplot_component >= 10 {
            return fail("init_theta must be positive and boxplot_component < 10");
        }
        let l = &self.lda;
        if l.topics == 0 || l.batch_docs == 0 || l.local_sweeps == 0 || l.eval_every == 0 {
            return fail("LDA sizes must be positive");
        }
        if l.eval_sweeps == 0 || l.predictive_samples == 0 {
            return fail("LDA evaluation settings must be positive");
        }
        for m in [l.scir, l.sgrld] {
            if !(m.h > 0.0 && m.tau > 0.0 && m.kappa >= 0.0 && m.alpha > 0.0 && m.beta > 0.0) {
                return fail("LDA method settings must be positive");
            }
        }
        let d = &self.dp;
        if d.batch == 0 || d.eval_every == 0 || d.predictive_samples == 0 {
            return fail("DP sizes must be positive");
        }
        if !(d.b1 > 0.0 && d.b2 > 0.0 && d.alpha0 > 0.0) {
            return fail("DP concentration settings must be positive");
        }
        for m in [d.scir, d.sgrld] {
            if !(m.h_theta > 0.0 && m.h_dp > 0.0) {
                return fail("DP stepsizes must be positive");
            }
        }
        for m in [d.scir, d.sgrld, d.gibbs] {
            if m.base.is_nan() || m.base <= 0.0 || m.k_init == 0 {
                return fail("DP base concentration and k_init must be positive");
            }
        }
        let t = &self.theory;
        if t.chains < 2 || t.mgf_chains < 2 || t.stationary_draws == 0 {
            return fail("theory sample sizes too small");
        }
        let g = &self.data;
        if g.topics == 0 || g.vocab == 0 || g.items == 0 || g.doc_len == 0 {
            return fail("data sizes must be positive");
        }
        if !(g.sparsity > 0.0 && g.doc_alpha > 0.0) {
            return fail("data concentrations must be positive");
        }
        Ok(())
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

fn one<T: FromStr>(value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {value:?}")))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(one)
        .collect()
}
