mod common;

use proptest::prelude::*;
use rand::Rng;
use scir_core::distributions::{cdf_beta, sample_categorical, RngStream};
use scir_core::models::*;
use scir_core::simplex::*;
use statrs::function::gamma::ln_gamma;

use common::{ks_one_sample, moments};

fn simplex(w: &[f64]) -> SimplexVector {
    SimplexVector::new(w.to_vec()).unwrap()
}

#[test]
fn single_topic_assigns_everything_to_topic_zero() {
    let doc = Document::new("d", vec![(0, 3), (2, 5)]).unwrap();
    let phi = [simplex(&[0.2, 0.3, 0.5])];
    let z = lda_local_z_sweep(&mut RngStream::new(50, 0), &doc, &phi, 0.1, 5).unwrap();
    assert!(z.assignments().iter().all(|&k| k == 0));
    assert_eq!(z.topic_totals(), vec![8]);
}

#[test]
fn disjoint_topics_are_identified_by_support() {
    let doc = Document::new("d", vec![(0, 3), (1, 2), (2, 4), (3, 1)]).unwrap();
    let phi = [simplex(&[0.5, 0.5, 0.0, 0.0]), simplex(&[0.0, 0.0, 0.5, 0.5])];
    let z = lda_local_z_sweep(&mut RngStream::new(51, 0), &doc, &phi, 0.1, 3).unwrap();
    for (&w, &k) in z.words().iter().zip(z.assignments()) {
        assert_eq!(k, (w / 2) as usize);
    }
    let empty = Document::new("e", vec![]).unwrap();
    let z = lda_local_z_sweep(&mut RngStream::new(51, 1), &empty, &phi, 0.1, 3).unwrap();
    assert_eq!(z.topic_totals(), vec![0, 0]);
}

#[test]
fn local_sweep_recovers_document_proportions() {
    let phi = [simplex(&[0.6, 0.3, 0.1, 0.0]), simplex(&[0.0, 0.1, 0.3, 0.6])];
    let theta = 0.3;
    let n = 2000;
    let mut rng = RngStream::new(52, 0);
    let tokens: Vec<u32> = (0..n)
        .map(|_| {
            let k = usize::from(rng.random::<f64>() >= theta);
            sample_categorical(&mut rng, phi[k].weights()).unwrap() as u32
        })
        .collect();
    let doc = Document::from_tokens("d", &tokens).unwrap();
    let z = lda_local_z_sweep(&mut rng, &doc, &phi, 0.1, 10).unwrap();
    let share = z.topic_totals()[0] as f64 / n as f64;
    let se = (theta * (1.0 - theta) / n as f64).sqrt();
    assert!((share - theta).abs() < 3.0 * se, "{share}");
}

#[test]
fn stepsize_schedule_values() {
    assert!((stepsize_schedule(0.5, 10.0, 0.33, 10) - 0.5 * 2f64.powf(-0.33)).abs() < 1e-15);
    assert!((stepsize_schedule(0.5, 10.0, 0.33, 10) - 0.39777).abs() < 1e-5);
    assert_eq!(stepsize_schedule(0.01, 1000.0, 0.6, 0), 0.01);
}

fn one_token_corpus(labels: &[u32], vocab: usize) -> Corpus {
    let docs = labels
        .iter()
        .enumerate()
        .map(|(i, &w)| Document::new(format!("d{i}"), vec![(w, 1)]).unwrap())
        .collect();
    Corpus::new(vocab, docs).unwrap()
}

#[test]
fn empty_topic_word_gets_prior_shape() {
    let corpus = one_token_corpus(&[0, 0, 1], 3);
    let hyper = LdaHyper { topics: 1, alpha: 0.1, beta: 0.5 };
    let mut state = LdaState::new(hyper, 3, vec![1.0; 3]).unwrap();
    let mut rng = RngStream::new(53, 0);
    let n = 20_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = state.clone();
        lda_scir_step(&mut rng, &mut s, &corpus, &Minibatch::full(3), f64::INFINITY, 4).unwrap();
        draws.push(s.theta_row(0)[2]);
    }
    let (m, se, _, _) = moments(&draws);
    assert!((m - 0.5).abs() < 5.0 * se, "{m}");
    lda_scir_step(&mut rng, &mut state, &corpus, &Minibatch::full(3), 0.1, 4).unwrap();
    assert_eq!(state.step(), 1);
}

#[test]
fn single_topic_lda_reduces_to_simplex_sampler() {
    let mut rng = RngStream::new(54, 0);
    let vocab = 12;
    let labels: Vec<u32> = (0..300).map(|_| rng.random_range(0..vocab as u32 / 2) * 2).collect();
    let corpus = one_token_corpus(&labels, vocab);
    let data = CategoricalData::new(vocab, labels).unwrap();
    for dynamics in [Dynamics::Scir, Dynamics::Sgrld] {
        let hyper = LdaHyper { topics: 1, alpha: 0.1, beta: 0.1 };
        let mut lda = LdaState::new(hyper, vocab, vec![1.0; vocab]).unwrap();
        let mut chain = SimplexChain::constant(vec![0.1; vocab], 1.0).unwrap();
        let mut batches = RngStream::new(55, 0);
        let mut a = RngStream::new(56, 0);
        let mut b = RngStream::new(56, 0);
        for m in 0..200 {
            let batch = Minibatch::sample(&mut batches, 300, 10).unwrap();
            let h = stepsize_schedule(0.1, 10.0, 0.5, m);
            lda_step(&mut a, dynamics, &mut lda, &corpus, &batch, h, 6).unwrap();
            let w = simplex_step(&mut b, dynamics, &mut chain, &batch, &data, h).unwrap();
            assert_eq!(lda.theta_row(0), chain.theta());
            assert_eq!(lda.phi()[0], w);
        }
    }
}

#[test]
fn full_corpus_topic_chain_is_stationary_at_the_dirichlet() {
    let mut rng = RngStream::new(57, 0);
    let vocab = 6;
    let counts = [40u32, 12, 5, 1, 0, 0];
    let labels: Vec<u32> = counts
        .iter()
        .enumerate()
        .flat_map(|(w, &c)| std::iter::repeat_n(w as u32, c as usize))
        .collect();
    let corpus = one_token_corpus(&labels, vocab);
    let beta = 0.5;
    let hyper = LdaHyper { topics: 1, alpha: 0.1, beta };
    let mut state = LdaState::new(hyper, vocab, vec![1.0; vocab]).unwrap();
    let batch = Minibatch::full(corpus.len());
    let mut draws = Vec::new();
    for it in 0..30_050 {
        lda_scir_step(&mut rng, &mut state, &corpus, &batch, 1.0, 2).unwrap();
        if it >= 50 && it % 3 == 0 {
            draws.push(state.phi()[0].weights().to_vec());
        }
    }
    let total: f64 = counts.iter().map(|&c| c as f64 + beta).sum();
    for w in 0..vocab {
        let a = counts[w] as f64 + beta;
        let col: Vec<f64> = draws.iter().map(|d| d[w]).collect();
        let d = ks_one_sample(&col, |x| cdf_beta(x, a, total - a).unwrap());
        assert!(d < 0.03, "word {w}: {d}");
    }
}

#[test]
fn corpus_round_trip_and_errors() {
    let docs = vec![
        Document::new("a", vec![(3, 2), (0, 1), (3, 1)]).unwrap(),
        Document::new("b", vec![]).unwrap(),
        Document::new("c", vec![(4, 7)]).unwrap(),
    ];
    let corpus = Corpus::new(5, docs).unwrap();
    assert_eq!(corpus.docs()[0].entries(), &[(0, 1), (3, 3)]);
    assert_eq!(corpus.total_tokens(), 11);
    assert_eq!(corpus.word_totals(), vec![1, 0, 0, 3, 7]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    corpus.write(&path).unwrap();
    assert_eq!(Corpus::read(&path).unwrap(), corpus);

    let (train, held) = corpus.split_heldout(1).unwrap();
    assert_eq!((train.len(), held.len()), (2, 1));
    assert_eq!(held.docs()[0].id(), "c");
    assert!(corpus.split_heldout(3).is_err());
    assert!(Corpus::new(4, corpus.docs().to_vec()).is_err());

    let p = std::path::Path::new("x");
    for bad in ["#vocab=3 #items=1\nd\t0:x\n", "#vocab=3 #items=2\nd\t0:1\n", "d\t0:1\n", "#vocab=3 #items=1\nd\t5:1\n"] {
        assert!(matches!(Corpus::parse(bad.as_bytes(), p), Err(scir_core::Error::Parse { .. })), "{bad:?}");
    }
    let e = Corpus::parse("#vocab=3 #items=1\nd\t0-1\n".as_bytes(), p).unwrap_err();
    assert!(matches!(e, scir_core::Error::Parse { line: 2, .. }));
}

#[test]
fn parity_split_halves_every_word() {
    let doc = Document::new("d", vec![(1, 4), (7, 2), (9, 3), (11, 1)]).unwrap();
    let held = scir_core::evaluation::HeldOutDoc::from_document(&doc);
    assert_eq!(held.estimation.len() + held.evaluation.len(), 10);
    for (w, c) in doc.iter() {
        let e = held.estimation.iter().filter(|&&x| x == w).count() as u32;
        assert!(e == c / 2 || e == c.div_ceil(2), "word {w}: {e} of {c}");
    }
}

fn dp_hyper(sample_alpha: bool) -> DpHyper {
    DpHyper { base: 0.5, b1: 1.0, b2: 1.0, sample_alpha }
}

fn small_dp_data() -> Corpus {
    let rows: [(u32, u32); 8] = [(3, 0), (3, 0), (2, 1), (3, 0), (0, 3), (0, 3), (1, 2), (0, 3)];
    let docs = rows
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let e = [(0, a), (1, b)].into_iter().filter(|e| e.1 > 0).collect();
            Document::new(format!("u{i}"), e).unwrap()
        })
        .collect();
    Corpus::new(2, docs).unwrap()
}

/// Posterior over the number of clusters by enumerating all set partitions,
/// weighting each by the CRP prior times the conjugate cluster marginals.
fn enumerate_cluster_counts(data: &Corpus, alpha: f64, base: f64) -> Vec<f64> {
    let n = data.len();
    let d = data.vocab_size();
    let mut probs = vec![0.0; n + 1];
    let mut labels = vec![0usize; n];
    loop {
        let k = labels.iter().max().unwrap() + 1;
        let mut lw = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            lw += alpha.ln() + ln_gamma(members.len() as f64);
            let mut pooled = vec![0.0; d];
            for &i in &members {
                for (w, cnt) in data.docs()[i].iter() {
                    pooled[w as usize] += cnt as f64;
                }
            }
            let tot: f64 = pooled.iter().sum();
            lw += ln_gamma(d as f64 * base) - ln_gamma(d as f64 * base + tot);
            lw += pooled.iter().map(|c| ln_gamma(base + c) - ln_gamma(base)).sum::<f64>();
        }
        probs[k] += lw.exp();
        // next restricted-growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                let z: f64 = probs.iter().sum();
                return probs.iter().map(|p| p / z).collect();
            }
            let cap = labels[..i].iter().max().unwrap() + 1;
            if labels[i] < cap {
                labels[i] += 1;
                for l in &mut labels[i + 1..] {
                    *l = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

fn chain_cluster_counts(stochastic: bool, seed: u64, sweeps: usize) -> Vec<f64> {
    let data = small_dp_data();
    let hyper = dp_hyper(false);
    let mut rng = RngStream::new(seed, 0);
    let mut state = DpState::init(&mut rng, &data, &hyper, 1, 1.0).unwrap();
    let batch = Minibatch::full(data.len());
    let mut freq = vec![0.0; data.len() + 1];
    for it in 0..sweeps + 500 {
        if stochastic {
            let h = f64::INFINITY;
            dp_slice_stochastic_step(&mut rng, &mut state, &data, &batch, h, h, &hyper).unwrap();
        } else {
            dp_slice_gibbs_step(&mut rng, &mut state, &data, &hyper).unwrap();
        }
        if it >= 500 {
            freq[state.active_clusters()] += 1.0 / sweeps as f64;
        }
    }
    freq
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[test]
fn exact_slice_sampler_matches_partition_enumeration() {
    let truth = enumerate_cluster_counts(&small_dp_data(), 1.0, 0.5);
    let got = chain_cluster_counts(false, 58, 40_000);
    let tv = total_variation(&truth, &got);
    assert!(tv < 0.05, "tv {tv}: {got:?} vs {truth:?}");
}

#[test]
fn full_batch_stationary_scir_matches_partition_enumeration() {
    let truth = enumerate_cluster_counts(&small_dp_data(), 1.0, 0.5);
    let got = chain_cluster_counts(true, 59, 40_000);
    let tv = total_variation(&truth, &got);
    assert!(tv < 0.05, "tv {tv}: {got:?} vs {truth:?}");
}

#[test]
fn single_cluster_stick_conditional() {
    let docs: Vec<Document> = (0..10).map(|i| Document::new(format!("{i}"), vec![(0, 5)]).unwrap()).collect();
    let data = Corpus::new(3, docs).unwrap();
    let hyper = dp_hyper(false);
    let alpha = 2.0;
    let mut rng = RngStream::new(60, 0);
    let mut state = DpState::init(&mut rng, &data, &hyper, 1, alpha).unwrap();
    let mut sticks = Vec::new();
    for it in 0..20_050 {
        dp_slice_gibbs_step(&mut rng, &mut state, &data, &hyper).unwrap();
        if it >= 50 && state.occupied_span() == 1 {
            sticks.push(state.sticks()[0]);
        }
    }
    assert!(sticks.len() > 10_000);
    let d = ks_one_sample(&sticks, |x| cdf_beta(x, 11.0, alpha).unwrap());
    assert!(d < 1.63 / (sticks.len() as f64).sqrt(), "{d}");
}

#[test]
fn vanishing_concentration_puts_all_mass_on_one_cluster() {
    let data = Corpus::new(4, vec![Document::new("x", vec![(1, 3)]).unwrap()]).unwrap();
    let hyper = dp_hyper(false);
    let mut rng = RngStream::new(61, 0);
    let mut state = DpState::init(&mut rng, &data, &hyper, 3, 1e-3).unwrap();
    let mut w = Vec::new();
    for _ in 0..2000 {
        dp_slice_gibbs_step(&mut rng, &mut state, &data, &hyper).unwrap();
        w.push(state.weights()[state.allocations()[0]]);
    }
    let (m, _, _, _) = moments(&w);
    assert!(m > 0.99, "{m}");
}

#[test]
fn alpha_update_draw() {
    let mut rng = RngStream::new(62, 0);
    let x: Vec<f64> = (0..100_000).map(|_| dp_alpha_update(&mut rng, 1.0, 1.0, &[0.5; 3]).unwrap()).collect();
    let (m, se, _, _) = moments(&x);
    let want = 4.0 / (1.0 + 3.0 * 2f64.ln());
    assert!((want - 1.299).abs() < 1e-3);
    assert!((m - want).abs() < 5.0 * se);
}

#[test]
fn minibatch_count_scale() {
    let mut rng = RngStream::new(63, 0);
    let b = Minibatch::sample(&mut rng, 30_000, 1000).unwrap();
    assert_eq!(b.scale() * 7.0, 210.0);
}

fn mixed_data(rng: &mut RngStream) -> Corpus {
    let docs = (0..60)
        .map(|i| {
            let base = (i % 3) as u32 * 3;
            let toks: Vec<u32> = (0..4).map(|_| base + rng.random_range(0..3)).collect();
            Document::from_tokens(format!("{i}"), &toks).unwrap()
        })
        .collect();
    Corpus::new(9, docs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dp_invariants_hold_after_every_step(seed in any::<u64>(), n in 1usize..60, h in 1e-3f64..1.0, sgrld in any::<bool>()) {
        let mut rng = RngStream::new(seed, 0);
        let data = mixed_data(&mut rng);
        let hyper = dp_hyper(true);
        let mut state = DpState::init(&mut rng, &data, &hyper, 5, 1.0).unwrap();
        let dynamics = if sgrld { Dynamics::Sgrld } else { Dynamics::Scir };
        for it in 0..15 {
            if it % 5 == 0 {
                dp_slice_gibbs_step(&mut rng, &mut state, &data, &hyper).unwrap();
                prop_assert!((0..data.len()).all(|i| state.slices()[i] > 0.0));
            } else {
                let batch = Minibatch::sample(&mut rng, data.len(), n).unwrap();
                dp_slice_stochastic_step_with(&mut rng, dynamics, &mut state, &data, &batch, h, h, &hyper).unwrap();
                let u_star = batch.indices().iter().map(|&i| state.slices()[i]).fold(f64::INFINITY, f64::min);
                prop_assert!(state.covers(u_star));
            }
            prop_assert!(state.check_invariants().is_ok());
            prop_assert!(state.components().iter().all(|c| (c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10));
            prop_assert!(state.alpha() > 0.0);
        }
    }
}
