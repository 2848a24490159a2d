//! Experiment drivers: configuration, synthetic data, the synthetic simplex
//! benchmark, LDA and DP-mixture runs, the Monte Carlo theory checks, and CSV
//! output. Cells run in parallel on per-cell random streams and results are
//! collected in cell order, so output does not depend on scheduling.

pub mod config;
pub mod data;
pub mod dpmix;
pub mod lda;
pub mod records;
pub mod synthetic;
pub mod theory;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{CorpusKind, ExperimentConfig, ExperimentKind, PosteriorKind};
pub use data::{generate_synthetic_corpus, SyntheticCorpus, Truth};
pub use dpmix::{run_dpmix, DpResult};
pub use lda::{run_lda, LdaResult};
pub use records::{KsRow, RunRecord};
pub use synthetic::{run_synthetic, SyntheticResult};
pub use theory::{run_theory_checks, TheoryCheck};

/// Sampler compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Scir,
    Sgrld,
    /// The exact reference: direct Dirichlet draws or the exact slice sampler.
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Scir => "scir",
            Method::Sgrld => "sgrld",
            Method::Exact => "exact",
        }
    }

    fn index(self) -> u64 {
        match self {
            Method::Scir => 0,
            Method::Sgrld => 1,
            Method::Exact => 2,
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `out` with `suffix` inserted before the extension: `runs.csv` → `runs.ks_sparse.csv`.
pub fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(e) => format!("{stem}.{suffix}.{e}"),
        None => format!("{stem}.{suffix}"),
    };
    out.with_file_name(name)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling_path(Path::new("out/runs.csv"), "ks_sparse"), PathBuf::from("out/runs.ks_sparse.csv"));
        assert_eq!(sibling_path(Path::new("runs"), "x"), PathBuf::from("runs.x"));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
    }
}
