//! Synthetic corpora with known generating parameters.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_categorical, sample_dirichlet, sample_poisson};
use crate::error::{param_err, Result};
use crate::evaluation::{log_predictive, perplexity, HeldOutDoc, MixtureSample};
use crate::harness::config::{CorpusKind, DataConfig};
use crate::models::{Corpus, Document};

/// Generating parameters saved next to a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Truth {
    Lda {
        topics: Vec<Vec<f64>>,
        doc_topics: Vec<Vec<f64>>,
    },
    Dp {
        weights: Vec<f64>,
        components: Vec<Vec<f64>>,
    },
}

impl Truth {
    /// Perplexity of the evaluation halves of `docs` under the true topics
    /// and each document's true proportions; `first_doc` is the corpus index
    /// of `docs[0]`.
    pub fn lda_perplexity(&self, docs: &[Document], first_doc: usize) -> Result<f64> {
        let Truth::Lda { topics, doc_topics } = self else {
            return param_err("truth is not an LDA model");
        };
        if first_doc + docs.len() > doc_topics.len() {
            return param_err("documents outside the generated corpus");
        }
        let held: Vec<HeldOutDoc> = docs.iter().map(HeldOutDoc::from_document).collect();
        perplexity(&held, |i, doc| {
            let theta = &doc_topics[first_doc + i];
            Ok(doc
                .evaluation
                .iter()
                .map(|&w| topics.iter().zip(theta).map(|(t, p)| p * t[w as usize]).sum())
                .collect())
        })
    }

    /// Held-out log predictive under the generating mixture.
    pub fn dp_log_predictive(&self, heldout: &[Document]) -> Result<f64> {
        let Truth::Dp { weights, components } = self else {
            return param_err("truth is not a mixture model");
        };
        let sample = MixtureSample {
            weights: weights.clone(),
            components: components.clone(),
            base_concentration: 0.0,
            dim: components.first().map_or(0, Vec::len),
        };
        log_predictive(heldout, &[sample])
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// A generated corpus with its generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: Truth,
}

/// Path of the truth file stored beside a corpus file.
pub fn truth_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.as_os_str().to_owned();
    name.push(".truth.json");
    PathBuf::from(name)
}

impl SyntheticCorpus {
    pub fn write(&self, corpus_path: &Path) -> Result<()> {
        self.corpus.write(corpus_path)?;
        self.truth.write(&truth_path(corpus_path))
    }
}

/// Draws a corpus of `docs` items over `vocab` words from `k` word
/// distributions, each Dir(sparsity) over the vocabulary.
///
/// LDA corpora give every document Dir(doc_alpha) topic proportions and
/// `doc_len` tokens. Mixture corpora assign each item to one of `k` equally
/// weighted clusters and give it `1 + Poisson(doc_len − 1)` tokens.
#[allow(clippy::too_many_arguments)]
pub fn generate_synthetic_corpus<R: Rng + ?Sized>(
    rng: &mut R,
    kind: CorpusKind,
    k: usize,
    vocab: usize,
    docs: usize,
    doc_len: usize,
    sparsity: f64,
    doc_alpha: f64,
) -> Result<SyntheticCorpus> {
    if k == 0 || vocab == 0 || docs == 0 || doc_len == 0 {
        return param_err("corpus sizes must be positive");
    }
    if !(sparsity > 0.0 && doc_alpha > 0.0) {
        return param_err("corpus concentrations must be positive");
    }
    let topics = (0..k)
        .map(|_| sample_dirichlet(rng, &vec![sparsity; vocab]).map(|s| s.into_inner()))
        .collect::<Result<Vec<_>>>()?;
    let width = docs.to_string().len();
    let mut items = Vec::with_capacity(docs);
    match kind {
        CorpusKind::Lda => {
            let mut doc_topics = Vec::with_capacity(docs);
            for l in 0..docs {
                let theta = sample_dirichlet(rng, &vec![doc_alpha; k])?.into_inner();
                let mut tokens = Vec::with_capacity(doc_len);
                for _ in 0..doc_len {
                    let t = sample_categorical(rng, &theta)?;
                    tokens.push(sample_categorical(rng, &topics[t])? as u32);
                }
                items.push(Document::from_tokens(format!("d{l:0width$}"), &tokens)?);
                doc_topics.push(theta);
            }
            Ok(SyntheticCorpus {
                corpus: Corpus::new(vocab, items)?,
                truth: Truth::Lda { topics, doc_topics },
            })
        }
        CorpusKind::Dp => {
            let weights = vec![1.0 / k as f64; k];
            let extra = doc_len as f64 - 1.0;
            for l in 0..docs {
                let c = sample_categorical(rng, &weights)?;
                let n = 1 + sample_poisson(rng, extra)? as usize;
                let tokens = (0..n)
                    .map(|_| sample_categorical(rng, &topics[c]).map(|w| w as u32))
                    .collect::<Result<Vec<_>>>()?;
                items.push(Document::from_tokens(format!("u{l:0width$}"), &tokens)?);
            }
            Ok(SyntheticCorpus {
                corpus: Corpus::new(vocab, items)?,
                truth: Truth::Dp {
                    weights,
                    components: topics,
                },
            })
        }
    }
}

/// Generates the corpus described by a data config.
pub fn generate_from_config(cfg: &DataConfig) -> Result<SyntheticCorpus> {
    let mut rng = crate::distributions::RngStream::new(cfg.seed, 0);
    generate_synthetic_corpus(
        &mut rng,
        cfg.kind,
        cfg.topics,
        cfg.vocab,
        cfg.items,
        cfg.doc_len,
        cfg.sparsity,
        cfg.doc_alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;

    #[test]
    fn single_topic_corpus_shares_one_distribution() {
        let mut rng = RngStream::new(1, 0);
        let s = generate_synthetic_corpus(&mut rng, CorpusKind::Lda, 1, 20, 30, 10, 0.5, 1.0).unwrap();
        let Truth::Lda { topics, doc_topics } = &s.truth else { panic!() };
        assert_eq!(topics.len(), 1);
        assert!(doc_topics.iter().all(|t| t == &vec![1.0]));
        assert_eq!(s.corpus.total_tokens(), 300);
    }

    #[test]
    fn point_mass_topics_give_one_word_documents() {
        let mut rng = RngStream::new(2, 0);
        let s = generate_synthetic_corpus(&mut rng, CorpusKind::Lda, 1, 50, 20, 8, 1e-9, 1.0).unwrap();
        for d in s.corpus.docs() {
            assert_eq!(d.entries().len(), 1);
        }
    }

    #[test]
    fn truth_round_trips_through_json() {
        let mut rng = RngStream::new(3, 0);
        let s = generate_synthetic_corpus(&mut rng, CorpusKind::Dp, 4, 10, 50, 3, 0.2, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.txt");
        s.write(&path).unwrap();
        assert_eq!(Corpus::read(&path).unwrap(), s.corpus);
        assert_eq!(Truth::read(&truth_path(&path)).unwrap(), s.truth);
        let lp = s.truth.dp_log_predictive(s.corpus.docs()).unwrap();
        assert!(lp.is_finite() && lp < 0.0);
    }

    #[test]
    fn true_lda_perplexity_is_finite() {
        let mut rng = RngStream::new(4, 0);
        let s = generate_synthetic_corpus(&mut rng, CorpusKind::Lda, 3, 100, 40, 50, 0.1, 0.5).unwrap();
        let p = s.truth.lda_perplexity(&s.corpus.docs()[30..], 30).unwrap();
        assert!(p > 1.0 && p < 100.0, "{p}");
    }
}
