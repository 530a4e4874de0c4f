//! Synthetic grid corpus with known ground truth: two bar-shaped motion
//! patterns alternating over four time phases, plus recovery scoring of the
//! learned spatial patterns and temporal profiles.

use std::io::Write;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::corpus::{Corpus, Observation};
use crate::model::{TopicModel, WordTopic};
use crate::Result;

/// The two generating patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    P1,
    P2,
}

impl Pattern {
    pub const ALL: [Pattern; 2] = [Pattern::P1, Pattern::P2];

    /// Label written to the labels CSV: 1 or 2.
    pub fn label(self) -> u8 {
        match self {
            Pattern::P1 => 1,
            Pattern::P2 => 2,
        }
    }
}

/// Ground truth for the grid experiment: a horizontal-bar pattern and a
/// vertical-bar pattern on a square grid, active over four equal phases as
/// {P1}, {P2}, {P1}, {P1,P2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridGroundTruth {
    /// Grid side length; the vocabulary is side² cells.
    pub grid_side: usize,
    /// Row index of the horizontal bar (P1).
    pub p1_row: usize,
    /// Column index of the vertical bar (P2).
    pub p2_col: usize,
    /// Seconds per phase; four phases partition [0, 4·phase_len).
    pub phase_len: f64,
    pub docs_per_phase: usize,
    pub words_per_doc: usize,
    /// P1's share of phase-4 words. The default 2/3 makes total P1 mass
    /// twice P2's: P1 owns phases 1 and 3, P2 owns phase 2, and phase 4
    /// splits 2:1, giving 8/3 : 4/3 phases overall.
    pub phase4_p1_share: f64,
}

impl Default for GridGroundTruth {
    fn default() -> Self {
        Self {
            grid_side: 5,
            p1_row: 2,
            p2_col: 2,
            phase_len: 70.0,
            docs_per_phase: 50,
            words_per_doc: 40,
            phase4_p1_share: 2.0 / 3.0,
        }
    }
}

pub const N_PHASES: usize = 4;

impl GridGroundTruth {
    pub fn vocab_size(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// The cells a pattern is uniform over.
    pub fn support(&self, pattern: Pattern) -> Vec<u32> {
        let side = self.grid_side;
        match pattern {
            Pattern::P1 => (0..side).map(|c| (self.p1_row * side + c) as u32).collect(),
            Pattern::P2 => (0..side).map(|r| (r * side + self.p2_col) as u32).collect(),
        }
    }

    /// The pattern as a distribution over the full vocabulary.
    pub fn distribution(&self, pattern: Pattern) -> Vec<f64> {
        let mut dist = vec![0.0; self.vocab_size()];
        let support = self.support(pattern);
        for &w in &support {
            dist[w as usize] = 1.0 / support.len() as f64;
        }
        dist
    }

    /// Phase interval [start, end) in seconds.
    pub fn phase_interval(&self, phase: usize) -> (f64, f64) {
        assert!(phase < N_PHASES);
        (
            phase as f64 * self.phase_len,
            (phase + 1) as f64 * self.phase_len,
        )
    }

    pub fn time_span(&self) -> (f64, f64) {
        (0.0, N_PHASES as f64 * self.phase_len)
    }

    /// P1's share of a phase's words.
    pub fn p1_share(&self, phase: usize) -> f64 {
        match phase {
            0 | 2 => 1.0,
            1 => 0.0,
            3 => self.phase4_p1_share,
            _ => panic!("phase {phase} out of range"),
        }
    }

    pub fn total_observations(&self) -> usize {
        N_PHASES * self.docs_per_phase * self.words_per_doc
    }
}

/// Draws the synthetic corpus: one document per (phase, slot), each word
/// sampled from the phase's pattern mixture with its time stamp uniform in
/// the phase. Returns the corpus and one generating-pattern label per
/// observation in document order.
pub fn generate(truth: &GridGroundTruth, seed: u64) -> (Corpus, Vec<Pattern>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supports = [truth.support(Pattern::P1), truth.support(Pattern::P2)];
    let mut documents = Vec::with_capacity(N_PHASES * truth.docs_per_phase);
    let mut labels = Vec::with_capacity(truth.total_observations());

    for phase in 0..N_PHASES {
        let (start, end) = truth.phase_interval(phase);
        let p1_share = truth.p1_share(phase);
        for _ in 0..truth.docs_per_phase {
            let doc = documents.len();
            let mut obs = Vec::with_capacity(truth.words_per_doc);
            for _ in 0..truth.words_per_doc {
                let pattern = if rng.random::<f64>() < p1_share {
                    Pattern::P1
                } else {
                    Pattern::P2
                };
                let support = &supports[(pattern.label() - 1) as usize];
                let word = support[rng.random_range(0..support.len())];
                let time_word = rng.random_range(start..end);
                obs.push(Observation {
                    word,
                    time_word,
                    doc,
                    trajectory: doc as u64,
                });
                labels.push(pattern);
            }
            documents.push(obs);
        }
    }
    (Corpus::from_documents(documents, truth.vocab_size()), labels)
}

/// Writes the per-observation generating labels as `obs_index,pattern`.
pub fn write_labels_csv(labels: &[Pattern], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "obs_index,pattern")?;
    for (i, p) in labels.iter().enumerate() {
        writeln!(f, "{i},{}", p.label())?;
    }
    f.flush()?;
    Ok(())
}

/// One truth pattern matched to a learned topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatch {
    pub pattern: Pattern,
    pub topic: u32,
    pub cosine: f64,
    /// L1 distance between the truth and matched distributions.
    pub l1: f64,
}

/// The greedy matching plus its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMatching {
    pub matches: Vec<PatternMatch>,
    /// A learned topic had to serve more than one pattern (fewer topics
    /// than patterns).
    pub under_split: bool,
    /// Total weight of learned topics no pattern matched.
    pub unmatched_mass: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Greedily pairs each truth pattern with its most-similar (cosine) learned
/// topic, keeping topics distinct while possible; when topics run out the
/// remaining patterns reuse their best topic and the matching is flagged
/// under-split. Deterministic: ties break toward the lower pattern index,
/// then the lower topic id, regardless of input order.
pub fn match_topics(learned: &[WordTopic], truth: &GridGroundTruth) -> TopicMatching {
    assert!(!learned.is_empty(), "matching needs at least one learned topic");
    let mut topics: Vec<&WordTopic> = learned.iter().collect();
    topics.sort_by_key(|t| t.id);

    let patterns: Vec<(Pattern, Vec<f64>)> = Pattern::ALL
        .iter()
        .map(|&p| (p, truth.distribution(p)))
        .collect();
    let sim: Vec<Vec<f64>> = patterns
        .iter()
        .map(|(_, dist)| topics.iter().map(|t| cosine(dist, &t.distribution)).collect())
        .collect();

    let mut assigned: Vec<Option<usize>> = vec![None; patterns.len()];
    let mut used = vec![false; topics.len()];
    // Distinct phase: repeatedly take the globally best (pattern, topic)
    // pair among unassigned patterns and unused topics.
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (p, row) in sim.iter().enumerate() {
            if assigned[p].is_some() {
                continue;
            }
            for (t, &s) in row.iter().enumerate() {
                if used[t] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bp, bt)) => s > sim[bp][bt],
                };
                if better {
                    best = Some((p, t));
                }
            }
        }
        match best {
            Some((p, t)) => {
                assigned[p] = Some(t);
                used[t] = true;
            }
            None => break,
        }
    }
    // Reuse phase: any pattern left takes its best topic overall.
    let mut under_split = false;
    for (p, slot) in assigned.iter_mut().enumerate() {
        if slot.is_none() {
            under_split = true;
            let t = sim[p]
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("NaN cosine"))
                .map(|(t, _)| t)
                .expect("nonempty topic list");
            *slot = Some(t);
            used[t] = true;
        }
    }

    let matches = patterns
        .iter()
        .zip(&assigned)
        .map(|((pattern, dist), &slot)| {
            let t = slot.expect("every pattern assigned");
            PatternMatch {
                pattern: *pattern,
                topic: topics[t].id,
                cosine: sim[Pattern::ALL.iter().position(|&p| p == *pattern).unwrap()][t],
                l1: l1_distance(dist, &topics[t].distribution),
            }
        })
        .collect();
    let unmatched_mass = topics
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(t, _)| t.weight)
        .sum();
    TopicMatching {
        matches,
        under_split,
        unmatched_mass,
    }
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One matched pattern's time mass split over the truth phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMassRow {
    pub pattern: Pattern,
    pub topic: u32,
    /// Fraction of the topic's time mixture inside each phase interval;
    /// sums to ≤ 1 (tails may fall outside the span).
    pub phase_mass: Vec<f64>,
}

/// Integrates each matched topic's time mixture over each phase interval
/// using the Gaussian CDF.
pub fn temporal_recovery(
    model: &TopicModel,
    matching: &TopicMatching,
    truth: &GridGroundTruth,
) -> Vec<PhaseMassRow> {
    matching
        .matches
        .iter()
        .map(|m| {
            let k = model
                .word_topics
                .iter()
                .position(|t| t.id == m.topic)
                .expect("matched topic missing from model");
            let phase_mass = (0..N_PHASES)
                .map(|phase| {
                    let (a, b) = truth.phase_interval(phase);
                    model.profiles[k]
                        .components
                        .iter()
                        .map(|&(l, w)| {
                            let tt = &model.time_topics[l as usize];
                            let sd = tt.variance.sqrt();
                            w * (phi((b - tt.mean) / sd) - phi((a - tt.mean) / sd))
                        })
                        .sum()
                })
                .collect();
            PhaseMassRow {
                pattern: m.pattern,
                topic: m.topic,
                phase_mass,
            }
        })
        .collect()
}
