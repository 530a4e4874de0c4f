//! Held-out likelihood, trajectory topic assignment, anomaly ranking, and
//! pair-label clustering scores over an extracted topic model.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Observation};
use crate::logmath::log_sum_exp;
use crate::model::TopicModel;
use crate::{Error, Result};

/// An observation-level train/test split of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: Corpus,
    pub test: Vec<Observation>,
    pub fraction: f64,
    pub seed: u64,
}

/// Uniformly samples round(fraction·N) observations as the test set and
/// rebuilds the training corpus from the rest; deterministic per seed.
pub fn make_holdout(corpus: &Corpus, fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0,1), got {fraction}"
        )));
    }
    let n = corpus.total_observations();
    if n < 2 {
        return Err(Error::Config(format!(
            "cannot split a corpus of {n} observation(s) into train and test"
        )));
    }
    let n_test = ((fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut slots: Vec<(usize, usize)> = corpus
        .documents
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.len()).map(move |i| (d, i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);
    let mut test_slots = slots[..n_test].to_vec();
    test_slots.sort_unstable();

    let mut test = Vec::with_capacity(n_test);
    let mut documents: Vec<Vec<Observation>> = corpus.documents.clone();
    // Remove back-to-front so earlier indices stay valid.
    for &(d, i) in test_slots.iter().rev() {
        test.push(documents[d].remove(i));
    }
    test.reverse();
    documents.retain(|doc| !doc.is_empty());

    Ok(HoldoutSplit {
        train: Corpus::from_documents(documents, corpus.vocab_size),
        test,
        fraction,
        seed,
    })
}

/// Which weights tie time components to the scored observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWeights {
    /// Each word topic's own time mixture (the model's coupling). Default.
    PerTopic,
    /// One global time mixture weighted by overall component shares.
    Global,
}

impl Default for TimeWeights {
    fn default() -> Self {
        TimeWeights::PerTopic
    }
}

fn log_time_mixture(model: &TopicModel, components: &[(u32, f64)], t: f64) -> f64 {
    let terms: Vec<f64> = components
        .iter()
        .map(|&(l, w)| w.ln() + model.time_density(l as usize, t).ln())
        .collect();
    log_sum_exp(&terms)
}

/// log P(w, t) under the model: log Σ_k v_k·β_k(w)·(time mixture at t),
/// with per-topic or global time weights; evaluated in log space.
pub fn joint_loglik(model: &TopicModel, word: u32, t: f64, weights: TimeWeights) -> f64 {
    assert!(
        (word as usize) < model.vocab_size,
        "word {word} outside vocabulary {}",
        model.vocab_size
    );
    match weights {
        TimeWeights::PerTopic => {
            let terms: Vec<f64> = model
                .word_topics
                .iter()
                .enumerate()
                .map(|(k, topic)| {
                    topic.weight.ln()
                        + topic.distribution[word as usize].ln()
                        + log_time_mixture(model, &model.profiles[k].components, t)
                })
                .collect();
            log_sum_exp(&terms)
        }
        TimeWeights::Global => {
            let global: Vec<(u32, f64)> = model
                .time_topics
                .iter()
                .map(|tt| (tt.id, tt.weight))
                .collect();
            model.log_word_marginal(word) + log_time_mixture(model, &global, t)
        }
    }
}

/// Mean joint log likelihood per observation; errors on an empty set.
pub fn per_word_loglik(
    model: &TopicModel,
    observations: &[Observation],
    weights: TimeWeights,
) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::Config(
            "per-word likelihood of an empty observation set".into(),
        ));
    }
    let sum: f64 = observations
        .iter()
        .map(|o| joint_loglik(model, o.word, o.time_word, weights))
        .sum();
    Ok(sum / observations.len() as f64)
}

/// Best word topic for a whole trajectory: argmax_k Σ_i [ln β_k(w_i) +
/// ln Σ_l γ_kl·N(t_i|α_l)], ties toward the lower topic id. `None` when no
/// observation is in vocabulary.
pub fn assign_trajectory(model: &TopicModel, observations: &[Observation]) -> Option<u32> {
    let in_vocab: Vec<&Observation> = observations
        .iter()
        .filter(|o| (o.word as usize) < model.vocab_size)
        .collect();
    if in_vocab.is_empty() || model.word_topics.is_empty() {
        return None;
    }
    let mut best: Option<(u32, f64)> = None;
    for (k, topic) in model.word_topics.iter().enumerate() {
        let score: f64 = in_vocab
            .iter()
            .map(|o| {
                topic.distribution[o.word as usize].ln()
                    + log_time_mixture(model, &model.profiles[k].components, o.time_word)
            })
            .sum();
        let better = match best {
            None => true,
            Some((_, s)) => score > s,
        };
        if better {
            best = Some((topic.id, score));
        }
    }
    best.map(|(id, _)| id)
}

/// One trajectory's anomaly entry: mean joint log likelihood plus the
/// spatial/temporal decomposition of that mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEntry {
    pub trajectory: u64,
    pub n_obs: usize,
    /// Mean joint log likelihood; low means anomalous.
    pub score: f64,
    /// Mean log word-marginal ln Σ_k v_k β_k(w).
    pub spatial: f64,
    /// Residual: score − spatial; how much the timing explains.
    pub temporal: f64,
}

/// All trajectories sorted ascending by score (most anomalous first);
/// stable for equal scores (corpus trajectory order preserved).
pub fn anomaly_rank(model: &TopicModel, corpus: &Corpus, weights: TimeWeights) -> Vec<AnomalyEntry> {
    let mut entries: Vec<AnomalyEntry> = corpus
        .trajectories
        .iter()
        .map(|(&trajectory, slots)| {
            let mut joint = 0.0;
            let mut spatial = 0.0;
            for &(d, i) in slots {
                let o = &corpus.documents[d][i];
                joint += joint_loglik(model, o.word, o.time_word, weights);
                spatial += model.log_word_marginal(o.word);
            }
            let n = slots.len() as f64;
            let score = joint / n;
            let spatial = spatial / n;
            AnomalyEntry {
                trajectory,
                n_obs: slots.len(),
                score,
                spatial,
                temporal: score - spatial,
            }
        })
        .collect();
    entries.sort_by(|a, b| a.score.partial_cmp(&b.score).expect("NaN anomaly score"));
    entries
}

/// Human-labeled trajectory pairs: do the two move in the same activity?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPairSet {
    pub pairs: Vec<(u64, u64, bool)>,
}

/// Reads a `traj_a,traj_b,same` CSV (header required, same ∈ {0,1}).
pub fn read_pairs_csv(path: &Path) -> Result<LabeledPairSet> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim() != "traj_a,traj_b,same" {
                return Err(Error::Malformed(format!(
                    "expected header 'traj_a,traj_b,same', got '{header}'"
                )));
            }
        }
        None => return Err(Error::Malformed("empty pair file".into())),
    }
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Malformed(format!(
                "pair line {} has {} fields, expected 3",
                lineno + 2,
                fields.len()
            )));
        }
        let a: u64 = fields[0]
            .parse()
            .map_err(|e| Error::Malformed(format!("pair line {}: {e}", lineno + 2)))?;
        let b: u64 = fields[1]
            .parse()
            .map_err(|e| Error::Malformed(format!("pair line {}: {e}", lineno + 2)))?;
        let same = match fields[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Malformed(format!(
                    "pair line {}: same must be 0 or 1, got '{other}'",
                    lineno + 2
                )))
            }
        };
        pairs.push((a, b, same));
    }
    Ok(LabeledPairSet { pairs })
}

/// Writes the pair CSV format accepted by `read_pairs_csv`.
pub fn write_pairs_csv(pairs: &LabeledPairSet, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "traj_a,traj_b,same")?;
    for &(a, b, same) in &pairs.pairs {
        writeln!(f, "{a},{b},{}", same as u8)?;
    }
    f.flush()?;
    Ok(())
}

/// Clustering accuracy against labeled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    /// Fraction of different-activity pairs assigned different topics.
    pub correctness: f64,
    /// Fraction of same-activity pairs assigned the same topic.
    pub completeness: f64,
    /// Pairs skipped because a member was unassignable or unknown.
    pub excluded_pairs: usize,
}

/// Scores assignments against labeled pairs. Pairs touching an
/// unassignable trajectory are excluded and counted; a side with no
/// scorable pairs is vacuously 1.
pub fn correctness_completeness(
    assignments: &BTreeMap<u64, Option<u32>>,
    pairs: &LabeledPairSet,
) -> Result<PairScores> {
    if pairs.pairs.is_empty() {
        return Err(Error::Config("empty labeled pair set".into()));
    }
    let mut excluded = 0usize;
    let mut same_total = 0usize;
    let mut same_hit = 0usize;
    let mut diff_total = 0usize;
    let mut diff_hit = 0usize;
    for &(a, b, same) in &pairs.pairs {
        let (ka, kb) = match (assignments.get(&a), assignments.get(&b)) {
            (Some(Some(ka)), Some(Some(kb))) => (*ka, *kb),
            _ => {
                excluded += 1;
                continue;
            }
        };
        if same {
            same_total += 1;
            same_hit += (ka == kb) as usize;
        } else {
            diff_total += 1;
            diff_hit += (ka != kb) as usize;
        }
    }
    let ratio = |hit: usize, total: usize| {
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    };
    Ok(PairScores {
        correctness: ratio(diff_hit, diff_total),
        completeness: ratio(same_hit, same_total),
        excluded_pairs: excluded,
    })
}

/// Everything an evaluation run reports, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_word_loglik: f64,
    pub n_topics: usize,
    pub n_test_observations: usize,
    pub time_weights: TimeWeights,
    pub anomalies: Vec<AnomalyEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_scores: Option<PairScores>,
    pub unassignable_trajectories: usize,
}

/// Builds the full report: held-out likelihood on the test observations,
/// anomaly top-n over the training corpus, and pair scores when labels are
/// given.
pub fn evaluate(
    model: &TopicModel,
    split: &HoldoutSplit,
    weights: TimeWeights,
    top_n: usize,
    pairs: Option<&LabeledPairSet>,
) -> Result<EvalReport> {
    let pwll = per_word_loglik(model, &split.test, weights)?;
    let mut anomalies = anomaly_rank(model, &split.train, weights);
    anomalies.truncate(top_n);

    let mut unassignable = 0usize;
    let pair_scores = match pairs {
        Some(pairs) => {
            let mut assignments: BTreeMap<u64, Option<u32>> = BTreeMap::new();
            for (&trajectory, slots) in &split.train.trajectories {
                let obs: Vec<Observation> = slots
                    .iter()
                    .map(|&(d, i)| split.train.documents[d][i].clone())
                    .collect();
                let assigned = assign_trajectory(model, &obs);
                unassignable += assigned.is_none() as usize;
                assignments.insert(trajectory, assigned);
            }
            Some(correctness_completeness(&assignments, pairs)?)
        }
        None => None,
    };

    Ok(EvalReport {
        per_word_loglik: pwll,
        n_topics: model.word_topics.len(),
        n_test_observations: split.test.len(),
        time_weights: weights,
        anomalies,
        pair_scores,
        unassignable_trajectories: unassignable,
    })
}
