//! End-to-end acceptance suite. Each numbered check prints a single
//! `ACCEPTANCE NN name: PASS/FAIL (detail)` line before asserting, so a
//! `--nocapture` run yields one verdict per criterion.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

use sthdp::checkpoint::{load_checkpoint, save_checkpoint};
use sthdp::corpus::{Corpus, Observation};
use sthdp::eval::{
    anomaly_rank, correctness_completeness, make_holdout, per_word_loglik, LabeledPairSet,
    TimeWeights,
};
use sthdp::gibbs::{gibbs_sweep, init_sequential, Sampler, SamplerConfig};
use sthdp::model::{extract_model, save_model, TopicModel, DEFAULT_SUPPORT_FLOOR};
use sthdp::priors::{
    dm_marginal_loglik, t_predictive, DirichletMultinomialStats, NigParams, DEFAULT_ETA,
};
use sthdp::seating::SeatingState;
use sthdp::split_merge::{attempt_split_merge, SmOutcome};
use sthdp::synthgrid::{generate, match_topics, GridGroundTruth, Pattern};

fn report(number: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {number:02} {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Fraction of a matched topic's time mixture that falls after `cut`.
fn profile_mass_after(model: &TopicModel, topic_id: u32, cut: f64) -> f64 {
    let k = model
        .word_topics
        .iter()
        .position(|t| t.id == topic_id)
        .expect("matched topic missing from model");
    model.profiles[k]
        .components
        .iter()
        .map(|&(l, w)| {
            let tt = &model.time_topics[l as usize];
            w * (1.0 - normal_cdf((cut - tt.mean) / tt.variance.sqrt()))
        })
        .sum()
}

// ---------------------------------------------------------------------------
// 1–3: synthetic grid recovery, the 2:1 importance ratio, the phase-4 bump.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_02_03_synthetic_recovery_ratio_and_bump() {
    let truth = GridGroundTruth::default();
    let seeds: Vec<u64> = (1..=5).collect();
    let budget = Duration::from_secs(600);

    let mut recovered = 0usize;
    let mut slowest = Duration::ZERO;
    let mut ratio_ok = true;
    let mut bump_ok = true;
    let mut per_seed = Vec::new();

    for &seed in &seeds {
        let (corpus, _) = generate(&truth, seed);
        let cfg = SamplerConfig {
            burn_in: 50,
            sm_period: 10,
            sm_phase_len: 300,
            total_iters: 600,
            seed,
            ..SamplerConfig::default()
        };
        let started = Instant::now();
        let mut sampler = Sampler::new(&corpus, cfg).expect("valid config");
        sampler.run(|_| {});
        let elapsed = started.elapsed();
        slowest = slowest.max(elapsed);

        let model = extract_model(&sampler.state, DEFAULT_SUPPORT_FLOOR);
        let matching = match_topics(&model.word_topics, &truth);
        let l1_max = matching
            .matches
            .iter()
            .map(|m| m.l1)
            .fold(f64::NEG_INFINITY, f64::max);
        let seed_ok = !matching.under_split && l1_max <= 0.35;
        if seed_ok {
            recovered += 1;
            let scale_of = |p: Pattern| -> f64 {
                let id = matching
                    .matches
                    .iter()
                    .find(|m| m.pattern == p)
                    .expect("both patterns matched")
                    .topic;
                let k = model
                    .word_topics
                    .iter()
                    .position(|t| t.id == id)
                    .expect("matched topic missing");
                model.profiles[k].scale
            };
            let ratio = scale_of(Pattern::P1) / scale_of(Pattern::P2);
            let p2_topic = matching
                .matches
                .iter()
                .find(|m| m.pattern == Pattern::P2)
                .unwrap()
                .topic;
            let tail = profile_mass_after(&model, p2_topic, 210.0);
            ratio_ok &= (1.5..=2.5).contains(&ratio);
            bump_ok &= tail >= 0.05;
            per_seed.push(format!(
                "seed {seed}: L1max {l1_max:.3}, ratio {ratio:.2}, tail {tail:.3}, {:.1}s",
                elapsed.as_secs_f64()
            ));
        } else {
            per_seed.push(format!(
                "seed {seed}: unmatched (under_split {}, L1max {l1_max:.3}), {:.1}s",
                matching.under_split,
                elapsed.as_secs_f64()
            ));
        }
    }

    let c1 = recovered >= 4 && slowest <= budget;
    report(
        1,
        "synthetic spatial recovery",
        c1,
        &format!(
            "both bars matched with L1<=0.35 in {recovered}/5 seeds; slowest seed {:.1}s; {}",
            slowest.as_secs_f64(),
            per_seed.join("; ")
        ),
    );
    report(
        2,
        "temporal importance ratio",
        ratio_ok,
        "P1/P2 scaled-mass ratio within [1.5, 2.5] on every recovered seed",
    );
    report(
        3,
        "phase-4 bump",
        bump_ok,
        "P2-matched profile keeps >=5% of its mass after t=210s on every recovered seed",
    );
    assert!(c1, "criterion 1 failed: {}", per_seed.join("; "));
    assert!(ratio_ok, "criterion 2 failed: {}", per_seed.join("; "));
    assert!(bump_ok, "criterion 3 failed: {}", per_seed.join("; "));
}

// ---------------------------------------------------------------------------
// 4: exact EPPF frequencies for the collapsed table sampler.
// ---------------------------------------------------------------------------

/// All set partitions of {0, …, n−1} in canonical form (blocks sorted,
/// ordered by smallest element).
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn go(i: usize, n: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(i);
            go(i + 1, n, current, out);
            current[b].pop();
        }
        current.push(vec![i]);
        go(i + 1, n, current, out);
        current.pop();
    }
    go(0, n, &mut current, &mut out);
    out
}

/// δ^{#blocks} · Π_b (|b|−1)! / Π_{i<n} (δ + i).
fn crp_probability(partition: &[Vec<usize>], delta: f64, n: usize) -> f64 {
    let mut p = 1.0;
    for block in partition {
        p *= delta;
        for j in 1..block.len() {
            p *= j as f64;
        }
    }
    for i in 0..n {
        p /= delta + i as f64;
    }
    p
}

fn table_partition(state: &SeatingState, doc: usize) -> Vec<Vec<usize>> {
    let mut blocks: HashMap<u32, Vec<usize>> = HashMap::new();
    for (idx, z) in state.z[doc].iter().enumerate() {
        blocks.entry(z.expect("unseated word").0).or_default().push(idx);
    }
    let mut out: Vec<Vec<usize>> = blocks.into_values().collect();
    for b in &mut out {
        b.sort_unstable();
    }
    out.sort_by_key(|b| b[0]);
    out
}

#[test]
fn acceptance_04_eppf_oracle() {
    let started = Instant::now();
    let n = 4usize;
    let doc: Vec<Observation> = (0..n)
        .map(|i| Observation {
            word: 0,
            time_word: i as f64,
            doc: 0,
            trajectory: 0,
        })
        .collect();
    let corpus = Corpus::from_documents(vec![doc], 2);

    let cfg = SamplerConfig {
        uniform_word_likelihood: true,
        disable_time_term: true,
        resample_concentrations: false,
        enable_split_merge: false,
        ..SamplerConfig::default()
    };
    let mut state = SeatingState::empty(&corpus, DEFAULT_ETA, NigParams::default_for_mean(1.5));
    assert_eq!(state.delta.value, 1.0, "test assumes unit concentration");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    init_sequential(&mut state, &cfg, &mut rng);
    for _ in 0..200 {
        gibbs_sweep(&mut state, &cfg, &mut rng);
    }
    let samples = 100_000usize;
    let mut counts: HashMap<Vec<Vec<usize>>, u64> = HashMap::new();
    for _ in 0..samples {
        for _ in 0..3 {
            gibbs_sweep(&mut state, &cfg, &mut rng);
        }
        *counts.entry(table_partition(&state, 0)).or_insert(0) += 1;
    }

    let partitions = set_partitions(n);
    assert_eq!(partitions.len(), 15);
    let mut tvd = 0.0;
    for p in &partitions {
        let expected = crp_probability(p, 1.0, n);
        let observed = *counts.get(p).unwrap_or(&0) as f64 / samples as f64;
        tvd += 0.5 * (expected - observed).abs();
    }
    let malformed: u64 = counts
        .iter()
        .filter(|(p, _)| !partitions.contains(p))
        .map(|(_, c)| *c)
        .sum();
    let elapsed = started.elapsed();

    let ok = tvd < 0.01 && malformed == 0 && elapsed <= Duration::from_secs(60);
    report(
        4,
        "EPPF oracle",
        ok,
        &format!(
            "TVD {tvd:.5} over 1e5 samples (n=4, delta=1), {malformed} malformed, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok, "TVD {tvd}, malformed {malformed}, elapsed {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 5: conjugate predictive densities against independent oracles.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_conjugacy_oracles() {
    // First anchor the quadrature itself against externally computed
    // Student-t densities (scipy.stats.t at df=2·shape,
    // scale²=scale·(1+1/λ)/shape), so it is an oracle, not an echo.
    let frozen: [(f64, f64, f64, f64, f64, f64); 5] = [
        (0.0, 1.0, 1.0, 1.0, 0.0, 0.25),
        (0.0, 1.0, 1.0, 1.0, 2.5, 0.060945858297992615),
        (140.0, 0.01, 0.3, 1.0, 100.0, 0.002682664127887798),
        (-1.0, 0.5, 2.0, 1.5, -3.7, 0.05672095984914732),
        (1.0, 2.0, 3.0, 0.5, 1.2, 0.6981078646317886),
    ];
    let mut quad_err: f64 = 0.0;
    for &(mu, lambda, shape, scale, t, reference) in &frozen {
        let q = common::nig_marginal_quadrature(&NigParams::new(mu, lambda, shape, scale), t);
        quad_err = quad_err.max((q - reference).abs());
    }
    let anchored = quad_err <= 1e-7;

    // Student-t closed form vs the quadrature at 20 random prior/point draws.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t_err: f64 = 0.0;
    for _ in 0..20 {
        let params = NigParams::new(
            rng.random_range(-50.0..150.0),
            rng.random_range(0.05..5.0),
            rng.random_range(0.3..6.0),
            rng.random_range(0.2..4.0),
        );
        let spread = (params.scale * (1.0 + 1.0 / params.lambda) / params.shape).sqrt();
        let t = params.mu + rng.random_range(-4.0..4.0) * spread;
        let closed = t_predictive(&params, t);
        let quad = common::nig_marginal_quadrature(&params, t);
        t_err = t_err.max((closed - quad).abs());
    }
    let t_ok = t_err <= 1e-6;

    // Dirichlet-multinomial marginal vs the product of sequential
    // predictives (chain rule makes the product an independent route).
    let vocab = 30usize;
    let mut dm_err: f64 = 0.0;
    for _ in 0..20 {
        let len = rng.random_range(1..=60);
        let mut stats = DirichletMultinomialStats::new(vocab, 0.7);
        let mut sequential = 0.0;
        for _ in 0..len {
            let w = rng.random_range(0..vocab);
            sequential += stats.log_predictive(w);
            stats.add(w);
        }
        let marginal = dm_marginal_loglik(&stats);
        dm_err = dm_err.max((marginal - sequential).abs() / marginal.abs());
    }
    let dm_ok = dm_err <= 1e-10;

    let ok = anchored && t_ok && dm_ok;
    report(
        5,
        "conjugacy oracles",
        ok,
        &format!(
            "quadrature anchored to 5 external densities (max err {quad_err:.2e}); \
             Student-t vs quadrature max err {t_err:.2e} at 20 points; \
             DM marginal vs sequential products max rel err {dm_err:.2e}"
        ),
    );
    assert!(
        ok,
        "anchor err {quad_err:.3e}, t err {t_err:.3e}, dm rel err {dm_err:.3e}"
    );
}

// ---------------------------------------------------------------------------
// 6: split-merge soundness over a thousand proposals.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_split_merge_soundness() {
    let truth = GridGroundTruth {
        docs_per_phase: 8,
        words_per_doc: 15,
        ..GridGroundTruth::default()
    };
    let (corpus, _) = generate(&truth, 6);
    let cfg = SamplerConfig {
        enable_split_merge: false,
        seed: 6,
        ..SamplerConfig::default()
    };
    let mut sampler = Sampler::new(&corpus, cfg.clone()).expect("valid config");
    for _ in 0..5 {
        sampler.step();
    }
    let mut state = sampler.state.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut proposals = 0u32;
    let mut accepted = 0u32;
    let mut rejected = 0u32;
    while proposals < 1000 {
        if proposals % 10 == 0 {
            // Keep the proposal distribution moving between attempts.
            gibbs_sweep(&mut state, &cfg, &mut rng);
        }
        let before = state.clone();
        match attempt_split_merge(&mut state, &cfg, &mut rng) {
            SmOutcome::Skipped => continue,
            SmOutcome::Rejected => {
                assert_eq!(state, before, "rejected proposal mutated the state");
                rejected += 1;
            }
            SmOutcome::AcceptedSplit | SmOutcome::AcceptedMerge => {
                state.assert_valid();
                accepted += 1;
            }
        }
        proposals += 1;
    }

    // acceptance_probability() asserts the ratio is finite and clamps into
    // [0,1] on every proposal above; reaching here means none violated it.
    let ok = proposals == 1000 && accepted + rejected == 1000;
    report(
        6,
        "split-merge soundness",
        ok,
        &format!(
            "{proposals} proposals: {accepted} accepted (validator clean), \
             {rejected} rejected (bit-identical rollback), all ratios finite in [0,1]"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 7: split-merge efficacy on a merge-pathology corpus.
// ---------------------------------------------------------------------------

/// Two phases whose word patterns are near-identical bars: plain Gibbs
/// tends to keep one topic per phase, and merges are the escape route.
fn pathology_corpus(seed: u64) -> Corpus {
    let cells: [u32; 5] = [10, 11, 12, 13, 14];
    // Slightly perturbed weights in the second phase keep the patterns
    // near-identical rather than exactly equal.
    let phase_weights: [[f64; 5]; 2] = [
        [0.2, 0.2, 0.2, 0.2, 0.2],
        [0.22, 0.18, 0.21, 0.19, 0.20],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    for phase in 0..2usize {
        let weights = &phase_weights[phase];
        for d in 0..30usize {
            let doc = documents.len();
            let obs = (0..25)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut word = cells[4];
                    for (c, w) in cells.iter().zip(weights) {
                        acc += w;
                        if u < acc {
                            word = *c;
                            break;
                        }
                    }
                    Observation {
                        word,
                        time_word: rng.random_range(70.0 * phase as f64..70.0 * (phase + 1) as f64),
                        doc,
                        trajectory: (phase * 30 + d) as u64,
                    }
                })
                .collect();
            documents.push(obs);
        }
    }
    Corpus::from_documents(documents, 25)
}

#[test]
fn acceptance_07_split_merge_efficacy() {
    let seeds: Vec<u64> = (1..=5).collect();
    let mut sm_pwll = Vec::new();
    let mut no_pwll = Vec::new();
    let mut sm_k = Vec::new();
    let mut no_k = Vec::new();

    for &seed in &seeds {
        let corpus = pathology_corpus(seed);
        let split = make_holdout(&corpus, 0.1, seed).expect("valid holdout");
        for enable in [true, false] {
            let cfg = SamplerConfig {
                burn_in: 20,
                sm_period: 5,
                sm_phase_len: 100,
                total_iters: 100,
                seed,
                enable_split_merge: enable,
                ..SamplerConfig::default()
            };
            let mut sampler = Sampler::new(&split.train, cfg).expect("valid config");
            sampler.run(|_| {});
            let model = extract_model(&sampler.state, DEFAULT_SUPPORT_FLOOR);
            let pwll =
                per_word_loglik(&model, &split.test, TimeWeights::PerTopic).expect("scored");
            if enable {
                sm_pwll.push(pwll);
                sm_k.push(model.word_topics.len() as f64);
            } else {
                no_pwll.push(pwll);
                no_k.push(model.word_topics.len() as f64);
            }
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (sm_mean, no_mean) = (mean(&sm_pwll), mean(&no_pwll));
    let (k_sm, k_no) = (mean(&sm_k), mean(&no_k));
    let ok = sm_mean - no_mean >= -0.01;
    report(
        7,
        "split-merge efficacy",
        ok,
        &format!(
            "held-out pwll mean with SM {sm_mean:.4} vs without {no_mean:.4} \
             (diff {:+.4} nats, threshold -0.01); diagnostic K_SM {k_sm:.1} vs K_noSM {k_no:.1}{}",
            sm_mean - no_mean,
            if k_sm <= k_no {
                ""
            } else {
                " [note: SM kept more topics on average]"
            }
        ),
    );
    assert!(ok, "SM {sm_mean} vs no-SM {no_mean}");
}

// ---------------------------------------------------------------------------
// 8: anomalies that are spatially typical but temporally misplaced.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_temporal_anomaly_detection() {
    let truth = GridGroundTruth {
        docs_per_phase: 25,
        words_per_doc: 30,
        ..GridGroundTruth::default()
    };
    let (train, _) = generate(&truth, 8);
    let cfg = SamplerConfig {
        burn_in: 50,
        sm_period: 10,
        sm_phase_len: 150,
        total_iters: 250,
        seed: 8,
        ..SamplerConfig::default()
    };
    let mut sampler = Sampler::new(&train, cfg).expect("valid config");
    sampler.run(|_| {});
    let model = extract_model(&sampler.state, DEFAULT_SUPPORT_FLOOR);

    // Injected trajectories use P1's spatial pattern; the anomalies carry
    // phase-2 time stamps (P2's exclusive window), the controls carry
    // phase-1 stamps where P1 genuinely runs.
    let p1_cells = truth.support(Pattern::P1);
    let mut documents = train.documents.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let anomaly_ids: Vec<u64> = (0..5).map(|i| 10_000 + i).collect();
    let control_ids: Vec<u64> = (0..5).map(|i| 20_000 + i).collect();
    for (ids, window) in [(&anomaly_ids, 75.0..135.0), (&control_ids, 5.0..65.0)] {
        for &trajectory in ids.iter() {
            let doc = documents.len();
            let obs = (0..30)
                .map(|_| Observation {
                    word: p1_cells[rng.random_range(0..p1_cells.len())],
                    time_word: rng.random_range(window.clone()),
                    doc,
                    trajectory,
                })
                .collect();
            documents.push(obs);
        }
    }
    let eval_corpus = Corpus::from_documents(documents, train.vocab_size);

    let ranked = anomaly_rank(&model, &eval_corpus, TimeWeights::PerTopic);
    let n = ranked.len();
    assert_eq!(n, 110);
    let cutoff = n.div_ceil(10); // bottom 10% of scores, lowest first
    let bottom: Vec<u64> = ranked[..cutoff].iter().map(|e| e.trajectory).collect();
    let anomalies_in = anomaly_ids.iter().filter(|id| bottom.contains(id)).count();
    let controls_in = control_ids.iter().filter(|id| bottom.contains(id)).count();

    let ok = anomalies_in == 5 && controls_in == 0;
    report(
        8,
        "temporal anomaly detection",
        ok,
        &format!(
            "{anomalies_in}/5 time-shifted trajectories in the bottom {cutoff} of {n} scores; \
             {controls_in}/5 time-consistent controls there"
        ),
    );
    assert!(ok, "anomalies in bottom decile: {anomalies_in}/5, controls: {controls_in}/5");
}

// ---------------------------------------------------------------------------
// 9: degenerate clusterings hit the metric extremes exactly.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_degenerate_metrics() {
    let trajectories: Vec<u64> = (0..6).collect();
    let pairs = LabeledPairSet {
        pairs: vec![
            (0, 1, true),
            (0, 2, false),
            (1, 3, false),
            (2, 3, true),
            (4, 5, true),
            (0, 5, false),
            (2, 4, false),
        ],
    };

    let one_topic: BTreeMap<u64, Option<u32>> =
        trajectories.iter().map(|&t| (t, Some(0))).collect();
    let lumped = correctness_completeness(&one_topic, &pairs).expect("scored");

    let singletons: BTreeMap<u64, Option<u32>> = trajectories
        .iter()
        .map(|&t| (t, Some(t as u32)))
        .collect();
    let shattered = correctness_completeness(&singletons, &pairs).expect("scored");

    let ok = lumped.correctness == 0.0
        && lumped.completeness == 1.0
        && shattered.correctness == 1.0
        && shattered.completeness == 0.0;
    report(
        9,
        "degenerate-cluster metrics",
        ok,
        &format!(
            "all-in-one gives ({}, {}), all-singletons gives ({}, {}) — exact",
            lumped.correctness, lumped.completeness, shattered.correctness, shattered.completeness
        ),
    );
    assert!(ok, "lumped {lumped:?}, shattered {shattered:?}");
}

// ---------------------------------------------------------------------------
// 10: bit-identical reruns and checkpoint resume.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_determinism_and_resume() {
    let truth = GridGroundTruth {
        docs_per_phase: 5,
        words_per_doc: 12,
        ..GridGroundTruth::default()
    };
    let (corpus, _) = generate(&truth, 10);
    let cfg = SamplerConfig {
        burn_in: 5,
        sm_period: 3,
        sm_phase_len: 20,
        total_iters: 24,
        seed: 10,
        ..SamplerConfig::default()
    };
    let dir = tempfile::tempdir().expect("temp dir");

    let run = || -> Sampler {
        let mut s = Sampler::new(&corpus, cfg.clone()).expect("valid config");
        s.run(|_| {});
        s
    };
    let first = run();
    let second = run();
    let same_rerun = first == second;

    let model_bytes = |sampler: &Sampler, name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        save_model(&extract_model(&sampler.state, DEFAULT_SUPPORT_FLOOR), &path)
            .expect("model written");
        std::fs::read(&path).expect("model read")
    };
    let same_model = model_bytes(&first, "a.bin") == model_bytes(&second, "b.bin");

    let mut interrupted = Sampler::new(&corpus, cfg.clone()).expect("valid config");
    while interrupted.iter < 12 {
        interrupted.step();
    }
    let ckpt = dir.path().join("mid.bin");
    save_checkpoint(&interrupted, &ckpt).expect("checkpoint written");
    let mut resumed = load_checkpoint(&corpus, &ckpt).expect("checkpoint read");
    resumed.run(|_| {});
    let same_resume = resumed == first;
    let same_resume_model = model_bytes(&resumed, "c.bin") == model_bytes(&first, "a.bin");

    let ok = same_rerun && same_model && same_resume && same_resume_model;
    report(
        10,
        "determinism and resume",
        ok,
        &format!(
            "rerun sampler equal: {same_rerun}; rerun model bytes equal: {same_model}; \
             resumed sampler equal: {same_resume}; resumed model bytes equal: {same_resume_model}"
        ),
    );
    assert!(ok);
}
