//! Metropolis-Hastings split-merge moves over word dishes.
//!
//! Two word tables are drawn uniformly at random; if they serve the same
//! dish the move proposes splitting that dish in two, otherwise merging the
//! two dishes into one. Split assignments are built by sequential
//! allocation: the remaining tables of the dish are visited in random order
//! and routed to one of two growing groups with probability proportional to
//! group support × joint word predictive × estimated time marginal, which
//! also yields the proposal probability q. A merge is deterministic
//! (q = 1), and its reverse-split probability is obtained by running the
//! same allocation with every table forced to the group it actually
//! occupies.
//!
//! The acceptance ratio combines the proposal probabilities with the
//! dish-level seating-prior factors that do not cancel and the marginal
//! likelihood of each affected dish. Every affected dish contributes its
//! word marginal and its time marginal; the time marginal enters once for
//! each of the two seating-prior levels (the per-table annotation product
//! telescopes to the dish's joint marginal) and once in the likelihood. On
//! acceptance the moved tables' time words are re-seated by their
//! conditionals, one restricted pass per affected restaurant; on rejection
//! the pre-proposal state is restored verbatim.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use statrs::function::gamma::ln_gamma;

use crate::gibbs::{
    chained_log_predictive_into, chained_time_log_marginal, dm_gain, draw_time_choice,
    SamplerConfig, TimeMix, TimeScratch,
};
use crate::logmath::{log_sum_exp, sample_log_categorical};
use crate::priors::{dm_marginal_loglik, DirichletMultinomialStats};
use crate::seating::{DishChoice, SeatingState, WordDishId, WordTableId};

/// What a single proposal did to the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmOutcome {
    AcceptedSplit,
    AcceptedMerge,
    Rejected,
    /// Fewer than two word tables exist, so no anchor pair can be drawn.
    Skipped,
}

/// Running proposal totals, surfaced in the progress log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmStats {
    pub proposed: u64,
    pub accepted_split: u64,
    pub accepted_merge: u64,
    pub rejected: u64,
}

impl SmStats {
    pub fn record(&mut self, outcome: SmOutcome) {
        match outcome {
            SmOutcome::AcceptedSplit => {
                self.proposed += 1;
                self.accepted_split += 1;
            }
            SmOutcome::AcceptedMerge => {
                self.proposed += 1;
                self.accepted_merge += 1;
            }
            SmOutcome::Rejected => {
                self.proposed += 1;
                self.rejected += 1;
            }
            SmOutcome::Skipped => {}
        }
    }
}

/// The direction of a proposal and the dishes it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmKind {
    /// Split `dish`; the first group moves to a fresh dish.
    Split { dish: WordDishId },
    /// Move every table of `src` onto `dest`.
    Merge { dest: WordDishId, src: WordDishId },
}

/// A fully-evaluated proposal, ready for the accept draw. Built on a state
/// whose affected time words are already unseated; `snapshot` restores the
/// pre-proposal state verbatim on rejection.
#[derive(Debug, Clone)]
pub struct SmProposal {
    pub kind: SmKind,
    /// The two anchor tables; the first anchors group 1.
    pub anchors: (WordTableId, WordTableId),
    /// Tables of group 1 (a fresh dish after a split; `dest` in a merge).
    pub group1: Vec<WordTableId>,
    pub group2: Vec<WordTableId>,
    /// Every observation whose time word was unseated, sorted by (doc, idx).
    pub obs: Vec<(usize, usize)>,
    /// log q(c*|c): split allocation probability; 0 for a merge.
    pub log_q_forward: f64,
    /// log q(c|c*): forced reverse-split probability for a merge; 0 for a
    /// split, whose reverse is the unique merge.
    pub log_q_reverse: f64,
    /// Restricted log seating-prior difference, proposal minus current.
    pub log_prior_diff: f64,
    /// Restricted log marginal-likelihood difference, proposal minus current.
    pub log_lik_diff: f64,
    pub snapshot: SeatingState,
}

impl SmProposal {
    pub fn log_acceptance_ratio(&self) -> f64 {
        self.log_q_reverse - self.log_q_forward + self.log_prior_diff + self.log_lik_diff
    }

    /// a = min{1, q-ratio × prior-ratio × likelihood-ratio}, always finite
    /// and in [0, 1].
    pub fn acceptance_probability(&self) -> f64 {
        let log_a = self.log_acceptance_ratio();
        assert!(log_a.is_finite(), "non-finite acceptance ratio {log_a}");
        log_a.min(0.0).exp()
    }
}

/// One split-merge attempt: draw anchors, build and score the proposal, and
/// accept or roll back.
pub fn attempt_split_merge<R: Rng + ?Sized>(
    state: &mut SeatingState,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SmOutcome {
    if state.word_tables.len() < 2 {
        return SmOutcome::Skipped;
    }
    let tables: Vec<WordTableId> = state.word_tables.ids().map(WordTableId).collect();
    let a = rng.random_range(0..tables.len());
    let mut b = rng.random_range(0..tables.len() - 1);
    if b >= a {
        b += 1;
    }
    let (ti, tj) = (tables[a], tables[b]);
    let ki = state.word_tables.get(ti.0).dish;
    let kj = state.word_tables.get(tj.0).dish;

    let snapshot = state.clone();
    let proposal = if ki == kj {
        build_split(state, snapshot, ti, tj, ki, cfg, rng)
    } else {
        build_merge(state, snapshot, ti, tj, ki, kj, cfg, rng)
    };

    let accept_prob = proposal.acceptance_probability();
    let u: f64 = rng.random();
    if u <= accept_prob {
        let outcome = match proposal.kind {
            SmKind::Split { .. } => SmOutcome::AcceptedSplit,
            SmKind::Merge { .. } => SmOutcome::AcceptedMerge,
        };
        commit(state, &proposal, rng);
        outcome
    } else {
        *state = proposal.snapshot;
        SmOutcome::Rejected
    }
}

/// How `sequential_allocation` decides each table's group.
pub enum AllocationMode<'m> {
    /// Draw each branch from its conditional (forward split proposal).
    Sample,
    /// Force each table into group 1 iff it is in this set, accumulating
    /// the probability of that path (reverse probability of a merge).
    Forced(&'m BTreeSet<WordTableId>),
}

/// Groups produced by a sequential allocation, with their pooled word
/// statistics and the log-probability of the realized assignment.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub group1: Vec<WordTableId>,
    pub group2: Vec<WordTableId>,
    pub words1: DirichletMultinomialStats,
    pub words2: DirichletMultinomialStats,
    pub log_q: f64,
}

struct AllocGroup<'a> {
    tables: Vec<WordTableId>,
    words: DirichletMultinomialStats,
    m: u32,
    scratch: TimeScratch<'a>,
}

impl<'a> AllocGroup<'a> {
    fn seeded<R: Rng + ?Sized>(
        state: &'a SeatingState,
        anchor: WordTableId,
        cfg: &SamplerConfig,
        rng: &mut R,
    ) -> AllocGroup<'a> {
        let mut words = DirichletMultinomialStats::new(state.vocab_size, state.eta);
        let mut times = Vec::new();
        for (_, w, t) in state.table_members(anchor) {
            words.add(w as usize);
            times.push(t);
        }
        let mut scratch = TimeScratch::for_dish(state, None);
        if !cfg.disable_time_term {
            let sub = subsample_times(&times, cfg.time_subsample, rng);
            let seed = rng.next_u64();
            chained_log_predictive_into(&mut scratch, &sub, seed);
        }
        AllocGroup {
            tables: vec![anchor],
            words,
            m: 1,
            scratch,
        }
    }
}

/// Routes every table of `s` to one of two groups seeded by the anchors.
/// Tables are visited in the order given; each goes to group j with
/// probability ∝ m_j · f_j(table words) · p̂(table times | group restaurant),
/// the group stats growing as tables land. Returns the realized groups and
/// log q = Σ log of the taken branch's probability.
pub fn sequential_allocation<R: Rng + ?Sized>(
    state: &SeatingState,
    anchors: (WordTableId, WordTableId),
    s: &[WordTableId],
    mode: AllocationMode<'_>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> AllocationResult {
    debug_assert!(
        !s.contains(&anchors.0) && !s.contains(&anchors.1),
        "anchors must not appear in the allocation set"
    );
    let mut g1 = AllocGroup::seeded(state, anchors.0, cfg, rng);
    let mut g2 = AllocGroup::seeded(state, anchors.1, cfg, rng);
    let mut log_q = 0.0;

    for &sk in s {
        let members = state.table_members(sk);
        let words: Vec<u32> = members.iter().map(|&(_, w, _)| w).collect();
        let times: Vec<f64> = members.iter().map(|&(_, _, t)| t).collect();
        let sub = subsample_times(&times, cfg.time_subsample, rng);
        let seed = rng.next_u64();

        // Evaluate both branches on scratch clones so only the chosen
        // virtual path persists; the shared seed keeps the comparison on
        // identical sampling randomness.
        let mut sc1 = g1.scratch.clone();
        let mut sc2 = g2.scratch.clone();
        let (lt1, lt2) = if cfg.disable_time_term {
            (0.0, 0.0)
        } else {
            (
                chained_log_predictive_into(&mut sc1, &sub, seed),
                chained_log_predictive_into(&mut sc2, &sub, seed),
            )
        };
        let (lf1, lf2) = if cfg.uniform_word_likelihood {
            (0.0, 0.0)
        } else {
            (dm_gain(&g1.words, &words), dm_gain(&g2.words, &words))
        };
        let logw = [
            (g1.m as f64).ln() + lf1 + lt1,
            (g2.m as f64).ln() + lf2 + lt2,
        ];
        let norm = log_sum_exp(&logw);
        let to_first = match mode {
            AllocationMode::Sample => sample_log_categorical(rng, &logw) == 0,
            AllocationMode::Forced(group1) => group1.contains(&sk),
        };
        log_q += logw[if to_first { 0 } else { 1 }] - norm;

        let (g, sc) = if to_first { (&mut g1, sc1) } else { (&mut g2, sc2) };
        g.tables.push(sk);
        for &w in &words {
            g.words.add(w as usize);
        }
        g.m += 1;
        g.scratch = sc;
    }

    debug_assert!(log_q.is_finite(), "non-finite allocation probability");
    AllocationResult {
        group1: g1.tables,
        group2: g2.tables,
        words1: g1.words,
        words2: g2.words,
        log_q,
    }
}

/// Seating-prior factor of one restaurant's table configuration:
/// δ^{#tables} · Π_t (n_t − 1)! / Π_{i=1..n} (i − 1 + δ), in log space.
pub fn table_crp_log_prior(delta: f64, table_sizes: &[u32]) -> f64 {
    let n: u32 = table_sizes.iter().sum();
    let mut acc = table_sizes.len() as f64 * delta.ln();
    for &s in table_sizes {
        acc += ln_gamma(s as f64);
    }
    for i in 1..=n {
        acc -= ((i - 1) as f64 + delta).ln();
    }
    acc
}

/// Seating-prior factor of the dish configuration:
/// ω^{#dishes} · Π_k (m_k − 1)! / Π_{i=1..m} (i − 1 + ω), in log space.
pub fn dish_crp_log_prior(omega: f64, dish_supports: &[u32]) -> f64 {
    let m: u32 = dish_supports.iter().sum();
    let mut acc = dish_supports.len() as f64 * omega.ln();
    for &s in dish_supports {
        acc += ln_gamma(s as f64);
    }
    for i in 1..=m {
        acc -= ((i - 1) as f64 + omega).ln();
    }
    acc
}

/// Absolute log seating prior of the whole state: per-document table CRP
/// factors times the dish CRP factor, each dish further annotated by its
/// log time marginal at both levels (per-table annotations telescope to one
/// joint marginal per dish, the dish indicator contributes the second).
pub fn state_log_prior(
    state: &SeatingState,
    dish_time_log_marginals: &[(WordDishId, f64)],
) -> f64 {
    let mut acc = 0.0;
    for doc_tables in &state.doc_tables {
        let sizes: Vec<u32> = doc_tables
            .iter()
            .map(|&t| state.word_tables.get(t.0).n)
            .collect();
        acc += table_crp_log_prior(state.delta.value, &sizes);
    }
    let supports: Vec<u32> = state.word_dishes.iter().map(|(_, d)| d.m).collect();
    acc += dish_crp_log_prior(state.omega.value, &supports);
    for &(_, lm) in dish_time_log_marginals {
        acc += 2.0 * lm;
    }
    acc
}

/// Restricted seating-prior gain of replacing one dish of support m1 + m2
/// by two dishes of supports m1 and m2: the dish-level CRP factors that do
/// not cancel plus the time annotations at both prior levels. Table-level
/// CRP factors are untouched by dish moves and cancel exactly.
pub fn split_prior_gain(
    omega: f64,
    m1: u32,
    m2: u32,
    lm1: f64,
    lm2: f64,
    lm_merged: f64,
) -> f64 {
    omega.ln() + ln_gamma(m1 as f64) + ln_gamma(m2 as f64) - ln_gamma((m1 + m2) as f64)
        + 2.0 * (lm1 + lm2 - lm_merged)
}

/// log[f^lik(k1) · f^lik(k2)] − log f^lik(merged), each factor the
/// Dirichlet-multinomial word marginal plus the dish's log time marginal.
/// Positive values favor the split side; merge proposals negate it.
pub fn likelihood_ratio(
    k1: (&DirichletMultinomialStats, f64),
    k2: (&DirichletMultinomialStats, f64),
    merged: (&DirichletMultinomialStats, f64),
) -> f64 {
    dm_marginal_loglik(k1.0) + k1.1 + dm_marginal_loglik(k2.0) + k2.1
        - dm_marginal_loglik(merged.0)
        - merged.1
}

/// Word tables currently serving `dish`, sorted by id.
fn dish_tables(state: &SeatingState, dish: WordDishId) -> Vec<WordTableId> {
    state
        .word_tables
        .iter()
        .filter(|(_, t)| t.dish == dish)
        .map(|(id, _)| WordTableId(id))
        .collect()
}

/// (doc, idx) of every observation seated at any table of the given dishes,
/// sorted.
fn affected_obs(state: &SeatingState, dishes: &[WordDishId]) -> Vec<(usize, usize)> {
    let mut obs = Vec::new();
    for &dish in dishes {
        for table in dish_tables(state, dish) {
            let doc = state.word_tables.get(table.0).doc;
            for (idx, _, _) in state.table_members(table) {
                obs.push((doc, idx));
            }
        }
    }
    obs.sort_unstable();
    obs
}

/// Member time stamps of the given tables, in table-id-then-index order.
fn tables_times(state: &SeatingState, tables: &[WordTableId]) -> Vec<f64> {
    let mut sorted = tables.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .flat_map(|&t| state.table_members(t).into_iter().map(|(_, _, time)| time))
        .collect()
}

fn subsample_times<R: Rng + ?Sized>(times: &[f64], cap: usize, rng: &mut R) -> Vec<f64> {
    let mut ts = times.to_vec();
    ts.shuffle(rng);
    ts.truncate(cap);
    ts
}

/// Estimated log time marginal of a prospective dish owning `times`,
/// against the state with all affected time words unseated: subsample, then
/// chain one-step predictives through an empty scratch restaurant.
fn dish_time_log_marginal<R: Rng + ?Sized>(
    state: &SeatingState,
    times: &[f64],
    seed: u64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> f64 {
    if cfg.disable_time_term {
        return 0.0;
    }
    let sub = subsample_times(times, cfg.time_subsample, rng);
    chained_time_log_marginal(state, None, &sub, seed)
}

fn build_split<R: Rng + ?Sized>(
    state: &mut SeatingState,
    snapshot: SeatingState,
    ti: WordTableId,
    tj: WordTableId,
    dish: WordDishId,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SmProposal {
    let merged_words = state.word_dishes.get(dish.0).words.clone();
    let merged_m = state.word_dishes.get(dish.0).m;
    let obs = affected_obs(state, &[dish]);
    for &(doc, idx) in &obs {
        state.unseat_time_word(doc, idx);
    }

    let mut s: Vec<WordTableId> = dish_tables(state, dish)
        .into_iter()
        .filter(|&t| t != ti && t != tj)
        .collect();
    s.shuffle(rng);
    let alloc = sequential_allocation(state, (ti, tj), &s, AllocationMode::Sample, cfg, rng);

    let times1 = tables_times(state, &alloc.group1);
    let times2 = tables_times(state, &alloc.group2);
    let times_merged = tables_times(state, &dish_tables(state, dish));
    let seed = rng.next_u64();
    let lm1 = dish_time_log_marginal(state, &times1, seed, cfg, rng);
    let lm2 = dish_time_log_marginal(state, &times2, seed, cfg, rng);
    let lm_merged = dish_time_log_marginal(state, &times_merged, seed, cfg, rng);

    let (m1, m2) = (alloc.group1.len() as u32, alloc.group2.len() as u32);
    debug_assert_eq!(m1 + m2, merged_m, "split must assign every table");
    let log_prior_diff = split_prior_gain(state.omega.value, m1, m2, lm1, lm2, lm_merged);
    let log_lik_diff = likelihood_ratio(
        (&dm_flagged(cfg, &alloc.words1), lm1),
        (&dm_flagged(cfg, &alloc.words2), lm2),
        (&dm_flagged(cfg, &merged_words), lm_merged),
    );

    SmProposal {
        kind: SmKind::Split { dish },
        anchors: (ti, tj),
        group1: alloc.group1,
        group2: alloc.group2,
        obs,
        log_q_forward: alloc.log_q,
        log_q_reverse: 0.0,
        log_prior_diff,
        log_lik_diff,
        snapshot,
    }
}

fn build_merge<R: Rng + ?Sized>(
    state: &mut SeatingState,
    snapshot: SeatingState,
    ti: WordTableId,
    tj: WordTableId,
    ki: WordDishId,
    kj: WordDishId,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SmProposal {
    let group1 = dish_tables(state, ki);
    let group2 = dish_tables(state, kj);
    let words1 = state.word_dishes.get(ki.0).words.clone();
    let words2 = state.word_dishes.get(kj.0).words.clone();
    let mut merged_words = words1.clone();
    for (w, &c) in words2.counts.iter().enumerate() {
        for _ in 0..c {
            merged_words.add(w);
        }
    }
    let obs = affected_obs(state, &[ki, kj]);
    for &(doc, idx) in &obs {
        state.unseat_time_word(doc, idx);
    }

    // Reverse probability: a split of the merged dish that reconstructs the
    // current two dishes, evaluated by forcing the allocation along the
    // true assignment.
    let membership: BTreeSet<WordTableId> = group1.iter().copied().collect();
    let mut s: Vec<WordTableId> = group1
        .iter()
        .chain(group2.iter())
        .copied()
        .filter(|&t| t != ti && t != tj)
        .collect();
    s.shuffle(rng);
    let alloc = sequential_allocation(
        state,
        (ti, tj),
        &s,
        AllocationMode::Forced(&membership),
        cfg,
        rng,
    );

    let times1 = tables_times(state, &group1);
    let times2 = tables_times(state, &group2);
    let mut times_merged = times1.clone();
    times_merged.extend_from_slice(&times2);
    let seed = rng.next_u64();
    let lm1 = dish_time_log_marginal(state, &times1, seed, cfg, rng);
    let lm2 = dish_time_log_marginal(state, &times2, seed, cfg, rng);
    let lm_merged = dish_time_log_marginal(state, &times_merged, seed, cfg, rng);

    let (m1, m2) = (group1.len() as u32, group2.len() as u32);
    let log_prior_diff = -split_prior_gain(state.omega.value, m1, m2, lm1, lm2, lm_merged);
    let log_lik_diff = -likelihood_ratio(
        (&dm_flagged(cfg, &words1), lm1),
        (&dm_flagged(cfg, &words2), lm2),
        (&dm_flagged(cfg, &merged_words), lm_merged),
    );

    SmProposal {
        kind: SmKind::Merge { dest: ki, src: kj },
        anchors: (ti, tj),
        group1,
        group2,
        obs,
        log_q_forward: 0.0,
        log_q_reverse: alloc.log_q,
        log_prior_diff,
        log_lik_diff,
        snapshot,
    }
}

/// Word stats as the likelihood sees them: emptied when the word likelihood
/// is switched off so the Dirichlet-multinomial factors drop out.
fn dm_flagged(cfg: &SamplerConfig, stats: &DirichletMultinomialStats) -> DirichletMultinomialStats {
    if cfg.uniform_word_likelihood {
        DirichletMultinomialStats::new(stats.counts.len(), stats.eta)
    } else {
        stats.clone()
    }
}

/// Moves every table in `group` off `dish` onto one fresh dish. Affected
/// time words must already be unseated. Returns the new dish id.
fn execute_split(state: &mut SeatingState, group: &[WordTableId]) -> WordDishId {
    let mut sorted = group.to_vec();
    sorted.sort_unstable();
    let mut new_dish = None;
    for &table in &sorted {
        let words: Vec<u32> = state
            .table_members(table)
            .into_iter()
            .map(|(_, w, _)| w)
            .collect();
        state.detach_table_dish(table, &words);
        let choice = match new_dish {
            None => DishChoice::New,
            Some(k) => DishChoice::Existing(k),
        };
        new_dish = Some(state.attach_table_dish(table, choice, &words));
    }
    new_dish.expect("split group cannot be empty")
}

/// Moves every table of `src` onto `dest`, deleting `src`. Affected time
/// words must already be unseated.
fn execute_merge(state: &mut SeatingState, dest: WordDishId, src: WordDishId) {
    for table in dish_tables(state, src) {
        let words: Vec<u32> = state
            .table_members(table)
            .into_iter()
            .map(|(_, w, _)| w)
            .collect();
        state.detach_table_dish(table, &words);
        state.attach_table_dish(table, DishChoice::Existing(dest), &words);
    }
}

/// Applies an accepted proposal: move the tables, then rebuild the affected
/// time restaurants by re-seating every unseated time word from its
/// conditional, in canonical observation order.
fn commit<R: Rng + ?Sized>(state: &mut SeatingState, proposal: &SmProposal, rng: &mut R) {
    match proposal.kind {
        SmKind::Split { .. } => {
            execute_split(state, &proposal.group1);
        }
        SmKind::Merge { dest, src } => {
            execute_merge(state, dest, src);
        }
    }
    for &(doc, idx) in &proposal.obs {
        let table = state.z[doc][idx].expect("moved observation lost its table");
        let dish = state.word_tables.get(table.0).dish;
        let mix = TimeMix::build(state, state.docs[doc].times[idx]);
        let choice = draw_time_choice(state, Some(dish), &mix, rng);
        state.seat_time_word(doc, idx, choice);
    }
    state.refresh_derived();
    debug_assert!(
        state.validate().is_empty(),
        "state invalid after accepted split-merge: {:?}",
        state.validate()
    );
}
