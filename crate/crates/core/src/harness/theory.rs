//! Monte Carlo checks of the SCIR moment, MGF and stationary-law formulas,
//! and exactness checks of the composition identities.

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::cir::{
    cir_transition, mgf_cir, mgf_scir, r_composed, r_map, lemma2_product, scir_mean, scir_step, scir_variance,
    transform_to_generalized_gamma, CirChainState, ShapeEstimate, TheoryParams,
};
use crate::distributions::{cdf_gamma, RngStream};
use crate::error::{Error, Result};
use crate::evaluation::ks_distance_to_cdf;
use crate::harness::config::ExperimentConfig;
use crate::harness::with_threads;
use crate::simplex::shape_estimate_variance;

/// One closed-form-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryCheck {
    pub check: String,
    pub setting: String,
    pub expected: f64,
    pub observed: f64,
    /// Monte Carlo standard error; 0 for deterministic checks.
    pub se: f64,
    /// `|observed − expected|` in standard errors, or absolute for
    /// deterministic checks.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl TheoryCheck {
    fn stochastic(check: &str, setting: String, expected: f64, observed: f64, se: f64, tol_se: f64) -> Self {
        let margin = (observed - expected).abs() / se;
        Self {
            check: check.into(),
            setting,
            expected,
            observed,
            se,
            margin,
            tolerance: tol_se,
            pass: margin <= tol_se,
        }
    }

    fn exact(check: &str, setting: String, expected: f64, observed: f64, tol: f64) -> Self {
        let margin = (observed - expected).abs();
        Self {
            check: check.into(),
            setting,
            expected,
            observed,
            se: 0.0,
            margin,
            tolerance: tol,
            pass: margin <= tol,
        }
    }
}

/// Minibatch estimates of a gamma shape from a population of `population`
/// 0/1 items of which `total` are ones, `batch` drawn without replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchedShape {
    pub prior: f64,
    pub total: u64,
    pub population: u64,
    pub batch: u64,
}

impl BatchedShape {
    pub fn mean(&self) -> f64 {
        self.prior + self.total as f64
    }

    pub fn variance(&self) -> f64 {
        shape_estimate_variance(self.total, self.population as usize, self.batch as usize)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShapeEstimate> {
        let hg = Hypergeometric::new(self.population, self.total, self.batch)
            .map_err(|e| Error::Parameter(format!("hypergeometric: {e}")))?;
        let count = hg.sample(rng);
        ShapeEstimate::new(self.prior, self.population as f64 / self.batch as f64 * count as f64)
    }
}

/// A random moment-check setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSetting {
    pub theta0: f64,
    pub h: f64,
    pub steps: u32,
    pub shape: BatchedShape,
}

impl MomentSetting {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let population = rng.random_range(20..=400u64);
        let total = rng.random_range(0..=population);
        let batch = rng.random_range(1..=population);
        Self {
            theta0: rng.random_range(0.05..5.0),
            h: 10f64.powf(rng.random_range(-2.0..0.3)),
            steps: rng.random_range(1..=40),
            shape: BatchedShape {
                prior: rng.random_range(0.05..2.0),
                total,
                population,
                batch,
            },
        }
    }

    pub fn params(&self) -> Result<TheoryParams> {
        TheoryParams::new(self.shape.mean(), self.theta0, self.h, self.steps, self.shape.variance())
    }

    fn describe(&self) -> String {
        format!(
            "theta0={:.4} h={:.4} M={} prior={:.3} total={} N={} n={}",
            self.theta0, self.h, self.steps, self.shape.prior, self.shape.total, self.shape.population, self.shape.batch
        )
    }
}

/// Final states of `chains` independent SCIR chains with a fresh minibatch
/// estimate at every step.
pub fn simulate_scir_chains(setting: &MomentSetting, chains: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(chains);
    for _ in 0..chains {
        let mut state = CirChainState::new(setting.theta0, setting.h)?;
        for _ in 0..setting.steps {
            let ahat = setting.shape.sample(rng)?;
            state = scir_step(rng, &state, &ahat, setting.h)?;
        }
        out.push(state.theta);
    }
    Ok(out)
}

/// Sample mean and variance with their standard errors.
pub fn moment_estimates(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (mean, (m2 / n).sqrt(), var, ((m4 - m2 * m2) / n).sqrt())
}

/// Mean and standard error of `e^{sθ}` over samples.
pub fn mgf_estimate(x: &[f64], s: f64) -> (f64, f64) {
    let e: Vec<f64> = x.iter().map(|v| (s * v).exp()).collect();
    let (m, se, _, _) = moment_estimates(&e);
    (m, se)
}

fn moment_checks(setting: &MomentSetting, chains: usize, rng: &mut RngStream) -> Result<Vec<TheoryCheck>> {
    let tp = setting.params()?;
    let x = simulate_scir_chains(setting, chains, rng)?;
    let (mean, mean_se, var, var_se) = moment_estimates(&x);
    Ok(vec![
        TheoryCheck::stochastic("scir_mean", setting.describe(), scir_mean(&tp), mean, mean_se, 5.0),
        TheoryCheck::stochastic("scir_variance", setting.describe(), scir_variance(&tp), var, var_se, 5.0),
    ])
}

/// A fixed shape-estimate sequence for the conditional MGF check.
#[derive(Debug, Clone, PartialEq)]
pub struct MgfCase {
    pub theta0: f64,
    pub h: f64,
    pub ahat: Vec<f64>,
}

impl MgfCase {
    pub fn defaults() -> Vec<MgfCase> {
        vec![
            MgfCase {
                theta0: 1.0,
                h: 0.5,
                ahat: vec![3.0, 1.0, 2.0],
            },
            MgfCase {
                theta0: 0.3,
                h: 0.2,
                ahat: vec![0.5, 4.0, 0.2, 2.5, 1.0],
            },
        ]
    }

    fn params(&self) -> Result<TheoryParams> {
        let a = self.ahat.iter().sum::<f64>() / self.ahat.len() as f64;
        TheoryParams::new(a, self.theta0, self.h, self.ahat.len() as u32, 0.0)
    }

    pub fn closed_form(&self, s: f64) -> Result<f64> {
        let seq = self
            .ahat
            .iter()
            .map(|&a| ShapeEstimate::exact(a))
            .collect::<Result<Vec<_>>>()?;
        mgf_scir(&self.params()?, s, &seq)
    }

    /// Final states of chains driven by the fixed sequence, first entry first.
    pub fn simulate(&self, chains: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(chains);
        for _ in 0..chains {
            let mut state = CirChainState::new(self.theta0, self.h)?;
            for &a in &self.ahat {
                state = cir_transition(rng, &state, a, self.h)?;
            }
            out.push(state.theta);
        }
        Ok(out)
    }
}

pub const MGF_POINTS: [f64; 3] = [-0.5, 0.2, 0.4];

fn mgf_checks(case: &MgfCase, chains: usize, rng: &mut RngStream) -> Result<Vec<TheoryCheck>> {
    let x = case.simulate(chains, rng)?;
    let setting = format!("theta0={} h={} ahat={:?}", case.theta0, case.h, case.ahat);
    let mut out = Vec::new();
    for s in MGF_POINTS {
        let (m, se) = mgf_estimate(&x, s);
        out.push(TheoryCheck::stochastic(
            "mgf_scir",
            format!("{setting} s={s}"),
            case.closed_form(s)?,
            m,
            se,
            3.0,
        ));
    }
    out.push(TheoryCheck::exact("mgf_at_zero", setting, 1.0, case.closed_form(0.0)?, 0.0));
    Ok(out)
}

/// Randomized comparisons of the composition closed forms against direct
/// iteration and products.
pub fn lemma_checks(cases: usize, rng: &mut RngStream) -> Result<Vec<TheoryCheck>> {
    let mut worst_r: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for _ in 0..cases {
        let s = rng.random_range(-3.0..0.9);
        let h = rng.random_range(0.01..2.0);
        let n = rng.random_range(1..=50u32);
        let mut iterated = s;
        for _ in 0..n {
            iterated = r_map(iterated, h)?;
        }
        worst_r = worst_r.max((r_composed(s, h, n)? - iterated).abs());
        let direct = 1.0 + s * (-(n as f64) * h).exp_m1();
        worst_p = worst_p.max((lemma2_product(s, h, n)? - direct).abs());
    }
    let setting = format!("{cases} random (s, h, n)");
    Ok(vec![
        TheoryCheck::exact("r_composed", setting.clone(), 0.0, worst_r, 1e-12),
        TheoryCheck::exact("lemma2_product", setting, 0.0, worst_p, 1e-12),
    ])
}

/// KS distance between transformed stationary CIR(a) draws and the
/// generalized-gamma law of `U = 2√θ`.
pub fn stationary_transform_ks(a: f64, draws: usize, rng: &mut RngStream) -> Result<f64> {
    let start = CirChainState::new(1.0, 1.0)?;
    let u = (0..draws)
        .map(|_| Ok(transform_to_generalized_gamma(cir_transition(rng, &start, a, f64::INFINITY)?.theta)))
        .collect::<Result<Vec<_>>>()?;
    ks_distance_to_cdf(&u, |x| cdf_gamma(x * x / 4.0, a, 1.0))
}

/// Runs every check; stochastic ones draw from streams derived from the
/// first configured seed.
pub fn run_theory_checks(cfg: &ExperimentConfig) -> Result<Vec<TheoryCheck>> {
    let t = &cfg.theory;
    let seed = cfg.seeds[0];
    let mut setting_rng = RngStream::new(seed, 1000);
    let settings: Vec<MomentSetting> = (0..t.settings).map(|_| MomentSetting::random(&mut setting_rng)).collect();
    let cases = MgfCase::defaults();
    let moment: Vec<Result<Vec<TheoryCheck>>> = with_threads(cfg.threads, || {
        let mut jobs: Vec<Result<Vec<TheoryCheck>>> = settings
            .par_iter()
            .enumerate()
            .map(|(i, s)| moment_checks(s, t.chains, &mut RngStream::new(seed, 2000 + i as u64)))
            .collect();
        jobs.extend(
            cases
                .par_iter()
                .enumerate()
                .map(|(i, c)| mgf_checks(c, t.mgf_chains, &mut RngStream::new(seed, 3000 + i as u64)))
                .collect::<Vec<_>>(),
        );
        jobs
    })?;
    let mut out = Vec::new();
    for r in moment {
        out.extend(r?);
    }
    out.extend(lemma_checks(t.lemma_cases, &mut RngStream::new(seed, 4000))?);
    let tp = TheoryParams::new(2.0, 1.0, 0.5, 4, 0.0)?;
    out.push(TheoryCheck::exact("mgf_cir_at_zero", "a=2 theta0=1 h=0.5 M=4".into(), 1.0, mgf_cir(&tp, 0.0)?, 0.0));
    let d = stationary_transform_ks(3.0, t.stationary_draws, &mut RngStream::new(seed, 5000))?;
    out.push(TheoryCheck::exact("generalized_gamma_ks", format!("a=3 draws={}", t.stationary_draws), 0.0, d, 0.01));
    Ok(out)
}
