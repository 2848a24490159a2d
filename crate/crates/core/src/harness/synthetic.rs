//! The ten-category Dirichlet benchmark: SCIR, SGRLD and exact draws on a
//! sparse and a dense posterior across minibatch fractions, with the
//! stepsize chosen per seed by the KS distance.

use std::path::Path;

use rayon::prelude::*;

use crate::distributions::RngStream;
use crate::error::Result;
use crate::evaluation::{dirichlet_ks_distance, KsReport, SampleMatrix};
use crate::harness::config::{ExperimentConfig, PosteriorKind};
use crate::harness::records::{write_csv_file, KsRow, RunRecord};
use crate::harness::{quantile, sibling_path, with_threads, Method};
use crate::simplex::{
    exact_dirichlet_posterior, simplex_step, CategoricalData, Dynamics, Minibatch, SimplexChain,
};

/// Quantile levels reported for the boxplot component.
pub const BOXPLOT_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// The selected run for one (posterior, method, seed, fraction) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCell {
    pub posterior: PosteriorKind,
    pub method: Method,
    pub seed: u64,
    pub fraction: f64,
    /// Stepsize with the smallest `d_KS`; 0 for exact draws.
    pub best_h: f64,
    pub report: KsReport,
    /// Quantiles of the boxplot component at [`BOXPLOT_LEVELS`].
    pub boxplot: [f64; 5],
    /// `(h, d_KS)` for every stepsize tried.
    pub grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticResult {
    pub cells: Vec<SyntheticCell>,
}

impl SyntheticResult {
    pub fn cell(&self, posterior: PosteriorKind, method: Method, seed: u64, fraction: f64) -> Option<&SyntheticCell> {
        self.cells
            .iter()
            .find(|c| c.posterior == posterior && c.method == method && c.seed == seed && c.fraction == fraction)
    }

    pub fn ks_rows(&self, posterior: PosteriorKind) -> Vec<KsRow> {
        self.cells
            .iter()
            .filter(|c| c.posterior == posterior)
            .map(|c| KsRow::from_report(c.seed, c.method.name(), c.fraction, &c.report))
            .collect()
    }

    pub fn records(&self, iterations: usize) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for c in &self.cells {
            let exp = format!("synthetic-{}", c.posterior.name());
            let it = iterations as u64;
            let rec = |h: f64, metric: &str, v: f64| RunRecord::new(&exp, c.method.name(), c.seed, h, c.fraction, it, metric, v);
            for &(h, d) in &c.grid {
                out.push(rec(h, "d_ks_grid", d));
            }
            out.push(rec(c.best_h, "d_ks", c.report.d_ks));
            out.push(rec(c.best_h, "per_dim_max", c.report.per_dim_max()));
            out.push(rec(c.best_h, "flags", c.report.flags as f64));
            for (level, q) in BOXPLOT_LEVELS.iter().zip(c.boxplot) {
                out.push(rec(c.best_h, &format!("omega_q{:.0}", level * 100.0), q));
            }
        }
        out
    }

    /// Writes the run records to `out` and one KS table per posterior beside it.
    pub fn write(&self, out: &Path, iterations: usize) -> Result<()> {
        write_csv_file(out, &self.records(iterations))?;
        for p in [PosteriorKind::Sparse, PosteriorKind::Dense] {
            let rows = self.ks_rows(p);
            if !rows.is_empty() {
                write_csv_file(&sibling_path(out, &format!("ks_{}", p.name())), &rows)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Chain {
        posterior: usize,
        method: Method,
        seed: u64,
        fraction: usize,
        h: usize,
    },
    Exact {
        posterior: usize,
        seed: u64,
    },
}

struct JobOutput {
    report: KsReport,
    component: Vec<f64>,
}

fn stream_id(posterior: usize, method: Method, fraction: usize, h: usize) -> u64 {
    (((posterior as u64 * 4 + method.index()) * 256 + fraction as u64) * 256) + h as u64
}

fn boxplot(mut values: Vec<f64>) -> [f64; 5] {
    values.sort_unstable_by(f64::total_cmp);
    BOXPLOT_LEVELS.map(|q| quantile(&values, q))
}

/// Runs one chain and scores its post-burn-in samples.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    posterior: PosteriorKind,
    dynamics: Dynamics,
    rng: &mut RngStream,
    fraction: f64,
    h: f64,
    iterations: usize,
    burn_in: usize,
    init_theta: f64,
    component: usize,
) -> Result<(KsReport, Vec<f64>)> {
    let totals = posterior.totals();
    let data = CategoricalData::from_totals(&totals)?;
    let population = data.len();
    let n = ((fraction * population as f64).round() as usize).clamp(1, population);
    let mut chain = SimplexChain::constant(vec![PosteriorKind::PRIOR; totals.len()], init_theta)?;
    let mut samples = SampleMatrix::with_capacity(totals.len(), iterations - burn_in);
    let mut comp = Vec::with_capacity(iterations - burn_in);
    for it in 0..iterations {
        let batch = Minibatch::sample(rng, population, n)?;
        let omega = simplex_step(rng, dynamics, &mut chain, &batch, &data, h)?;
        if it >= burn_in {
            comp.push(omega.weights()[component]);
            samples.push(&omega)?;
        }
    }
    Ok((dirichlet_ks_distance(&samples, &posterior.posterior_alpha())?, comp))
}

/// Exact posterior draws scored the same way.
pub fn run_exact(
    posterior: PosteriorKind,
    rng: &mut RngStream,
    draws: usize,
    component: usize,
) -> Result<(KsReport, Vec<f64>)> {
    let totals = posterior.totals();
    let counts = CategoricalData::from_totals(&totals)?.totals();
    let prior = vec![PosteriorKind::PRIOR; totals.len()];
    let mut samples = SampleMatrix::with_capacity(totals.len(), draws);
    let mut comp = Vec::with_capacity(draws);
    for _ in 0..draws {
        let omega = exact_dirichlet_posterior(rng, &prior, &counts)?;
        comp.push(omega.weights()[component]);
        samples.push(&omega)?;
    }
    Ok((dirichlet_ks_distance(&samples, &posterior.posterior_alpha())?, comp))
}

pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<SyntheticResult> {
    cfg.validate()?;
    let s = &cfg.synthetic;
    let grid = |m: Method| match m {
        Method::Scir => &s.scir_stepsizes,
        _ => &s.sgrld_stepsizes,
    };
    let mut jobs = Vec::new();
    for (pi, _) in s.posteriors.iter().enumerate() {
        for &seed in &cfg.seeds {
            jobs.push(Job::Exact { posterior: pi, seed });
            for method in [Method::Scir, Method::Sgrld] {
                for fi in 0..s.minibatch_fractions.len() {
                    for hi in 0..grid(method).len() {
                        jobs.push(Job::Chain {
                            posterior: pi,
                            method,
                            seed,
                            fraction: fi,
                            h: hi,
                        });
                    }
                }
            }
        }
    }
    let run = |job: &Job| -> Result<JobOutput> {
        let (report, component) = match *job {
            Job::Exact { posterior, seed } => {
                let mut rng = RngStream::new(seed, stream_id(posterior, Method::Exact, 0, 0));
                run_exact(
                    s.posteriors[posterior],
                    &mut rng,
                    cfg.iterations - cfg.burn_in,
                    s.boxplot_component,
                )?
            }
            Job::Chain {
                posterior,
                method,
                seed,
                fraction,
                h,
            } => {
                let mut rng = RngStream::new(seed, stream_id(posterior, method, fraction, h));
                let dynamics = if method == Method::Scir { Dynamics::Scir } else { Dynamics::Sgrld };
                run_chain(
                    s.posteriors[posterior],
                    dynamics,
                    &mut rng,
                    s.minibatch_fractions[fraction],
                    grid(method)[h],
                    cfg.iterations,
                    cfg.burn_in,
                    s.init_theta,
                    s.boxplot_component,
                )?
            }
        };
        Ok(JobOutput { report, component })
    };
    let outputs: Vec<Result<JobOutput>> = with_threads(cfg.threads, || jobs.par_iter().map(run).collect())?;
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut result = SyntheticResult::default();
    let mut i = 0;
    for &posterior in &s.posteriors {
        for &seed in &cfg.seeds {
            let exact = &outputs[i];
            i += 1;
            let exact_box = boxplot(exact.component.clone());
            for &fraction in &s.minibatch_fractions {
                result.cells.push(SyntheticCell {
                    posterior,
                    method: Method::Exact,
                    seed,
                    fraction,
                    best_h: 0.0,
                    report: exact.report.clone(),
                    boxplot: exact_box,
                    grid: Vec::new(),
                });
            }
            for method in [Method::Scir, Method::Sgrld] {
                for &fraction in &s.minibatch_fractions {
                    let hs = grid(method);
                    let runs = &outputs[i..i + hs.len()];
                    i += hs.len();
                    let best = (0..hs.len())
                        .min_by(|&a, &b| runs[a].report.d_ks.total_cmp(&runs[b].report.d_ks))
                        .expect("non-empty stepsize grid");
                    result.cells.push(SyntheticCell {
                        posterior,
                        method,
                        seed,
                        fraction,
                        best_h: hs[best],
                        report: runs[best].report.clone(),
                        boxplot: boxplot(runs[best].component.clone()),
                        grid: hs.iter().zip(runs).map(|(&h, r)| (h, r.report.d_ks)).collect(),
                    });
                }
            }
        }
    }
    Ok(result)
}
