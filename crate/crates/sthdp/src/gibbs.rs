//! Gibbs sweeps over the coupled franchises: word-table moves weighted by
//! the marginalized time term, dish-level moves with a subsampled
//! virtual-seating estimate of the time marginal, a standard CRF pass over
//! the time side, and concentration resampling.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::logmath::{log_sum_exp, sample_log_categorical};
use crate::priors::{
    dm_marginal_loglik, nig_marginal_loglik, nig_update, t_predictive,
    DirichletMultinomialStats, GaussianSuffStats, NigParams, DEFAULT_ETA,
};
use crate::seating::{
    DishChoice, SeatResult, Seating, SeatingState, TableChoice, TimeChoice, TimeDishChoice,
    TimeDishId, TimeTableId, WordDishId, WordTableId,
};
use crate::split_merge::{attempt_split_merge, SmStats};

/// Knobs for a sampling run. The degenerate switches strip individual
/// likelihood factors so the seating prior can be tested in isolation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Iterations before any split-merge proposals or kept samples.
    pub burn_in: u32,
    /// Gibbs iterations between split-merge attempts during the early phase.
    pub sm_period: u32,
    /// Length of the early phase in which split-merge runs.
    pub sm_phase_len: u32,
    pub total_iters: u32,
    /// Cap on the number of a table's time words used when estimating the
    /// time marginal of a dish candidate.
    pub time_subsample: usize,
    pub seed: u64,
    /// Smoothing of the per-dish word distributions.
    pub eta: f64,
    /// Prior over time-dish Gaussians; `None` centers the prior location on
    /// the corpus mean time stamp.
    pub time_prior: Option<NigParams>,
    pub enable_split_merge: bool,
    /// Proposals per scheduled split-merge attempt.
    pub sm_proposals_per_attempt: u32,
    pub resample_concentrations: bool,
    /// Force every word-likelihood factor to a constant, reducing table
    /// draws to the bare seating prior.
    pub uniform_word_likelihood: bool,
    /// Drop the time factor from the word-side conditionals.
    pub disable_time_term: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 50,
            sm_period: 10,
            sm_phase_len: 500,
            total_iters: 2000,
            time_subsample: 20,
            seed: 0,
            eta: DEFAULT_ETA,
            time_prior: None,
            enable_split_merge: true,
            sm_proposals_per_attempt: 1,
            resample_concentrations: true,
            uniform_word_likelihood: false,
            disable_time_term: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.burn_in < 1 || self.sm_period < 1 || self.sm_phase_len < 1 || self.total_iters < 1
        {
            return Err(crate::Error::Config(
                "iteration counts must all be at least 1".into(),
            ));
        }
        if self.total_iters < self.burn_in {
            return Err(crate::Error::Config(format!(
                "total_iters {} is shorter than burn_in {}",
                self.total_iters, self.burn_in
            )));
        }
        if self.time_subsample < 1 {
            return Err(crate::Error::Config("time_subsample must be at least 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(crate::Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Predictive density of every live time dish (and the prior) at one time
/// stamp, plus the global dish mixture those densities induce. Built once
/// per observation and shared by all candidate weights.
pub(crate) struct TimeMix {
    /// Linear-scale density per time-dish slot; dead slots stay `None`.
    g: Vec<Option<f64>>,
    prior_g: f64,
    /// (Σ_l d_·l·g_l + ε·prior)/(d_·· + ε): the chance of `t` under a
    /// brand-new time table.
    mix: f64,
}

impl TimeMix {
    pub(crate) fn build(state: &SeatingState, t: f64) -> TimeMix {
        let mut g = vec![None; state.time_dishes.slots()];
        let prior_g = t_predictive(&state.time_prior, t);
        let mut acc = state.epsilon.value * prior_g;
        for (id, dish) in state.time_dishes.iter() {
            let gv = t_predictive(&nig_update(&state.time_prior, &dish.stats), t);
            g[id as usize] = Some(gv);
            acc += dish.d as f64 * gv;
        }
        TimeMix {
            g,
            prior_g,
            mix: acc / (state.d_total as f64 + state.epsilon.value),
        }
    }

    fn dish_g(&self, l: TimeDishId) -> f64 {
        self.g[l.0 as usize].expect("dead time dish referenced")
    }
}

/// Probability of time stamp `t` under word dish `dish`'s time restaurant
/// (`None` = the restaurant of a dish about to be created): the sum over
/// every seat the time word could take — each existing time table, or a new
/// table serving an existing or new time dish — weighted by the seating
/// prior.
pub fn time_term(state: &SeatingState, dish: Option<WordDishId>, t: f64) -> f64 {
    time_term_cached(state, dish, &TimeMix::build(state, t))
}

fn time_term_cached(state: &SeatingState, dish: Option<WordDishId>, mix: &TimeMix) -> f64 {
    let zeta = state.zeta.value;
    match dish {
        None => mix.mix,
        Some(k) => {
            let mut s_total = 0.0;
            let mut acc = 0.0;
            for &tt in &state.word_dishes.get(k.0).time_tables {
                let table = state.time_tables.get(tt.0);
                acc += table.stats.n as f64 * mix.dish_g(table.dish);
                s_total += table.stats.n as f64;
            }
            (acc + zeta * mix.mix) / (s_total + zeta)
        }
    }
}

/// One way of seating a word: an existing table, a new table serving an
/// existing dish, or a new table with a new dish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WordCandidate {
    Table(WordTableId),
    NewTableDish(WordDishId),
    NewTableNewDish,
}

/// Log-space weight of every candidate seat for the currently-unseated word
/// (doc, idx). All weights are finite.
pub fn word_table_conditional(
    state: &SeatingState,
    doc: usize,
    idx: usize,
    cfg: &SamplerConfig,
) -> (Vec<WordCandidate>, Vec<f64>) {
    let t = state.docs[doc].times[idx];
    word_table_conditional_cached(state, doc, idx, cfg, &TimeMix::build(state, t))
}

fn word_table_conditional_cached(
    state: &SeatingState,
    doc: usize,
    idx: usize,
    cfg: &SamplerConfig,
    mix: &TimeMix,
) -> (Vec<WordCandidate>, Vec<f64>) {
    assert!(state.z[doc][idx].is_none(), "conditional over a seated word");
    let word = state.docs[doc].words[idx] as usize;

    let ln_time = |dish: Option<WordDishId>| -> f64 {
        if cfg.disable_time_term {
            0.0
        } else {
            time_term_cached(state, dish, mix).ln()
        }
    };
    let ln_f = |dish: Option<WordDishId>| -> f64 {
        if cfg.uniform_word_likelihood {
            0.0
        } else {
            match dish {
                Some(k) => state.word_dishes.get(k.0).words.log_predictive(word),
                None => -(state.vocab_size as f64).ln(),
            }
        }
    };

    let n_cands = state.doc_tables[doc].len() + state.word_dishes.len() + 1;
    let mut cands = Vec::with_capacity(n_cands);
    let mut logw = Vec::with_capacity(n_cands);

    for &tid in &state.doc_tables[doc] {
        let table = state.word_tables.get(tid.0);
        cands.push(WordCandidate::Table(tid));
        logw.push((table.n as f64).ln() + ln_f(Some(table.dish)) + ln_time(Some(table.dish)));
    }
    let ln_delta = state.delta.value.ln();
    let ln_denom = (state.m_total as f64 + state.omega.value).ln();
    for (id, dish) in state.word_dishes.iter() {
        let k = WordDishId(id);
        cands.push(WordCandidate::NewTableDish(k));
        logw.push(ln_delta + (dish.m as f64).ln() - ln_denom + ln_f(Some(k)) + ln_time(Some(k)));
    }
    cands.push(WordCandidate::NewTableNewDish);
    logw.push(ln_delta + state.omega.value.ln() - ln_denom + ln_f(None) + ln_time(None));

    debug_assert!(logw.iter().all(|w| w.is_finite()), "non-finite seat weight");
    (cands, logw)
}

/// Draws a time seat inside the restaurant of word dish `dish` (`None` =
/// the empty restaurant of a dish about to be created), with branch weights
/// matching the terms summed by `time_term`.
pub(crate) fn draw_time_choice<R: Rng + ?Sized>(
    state: &SeatingState,
    dish: Option<WordDishId>,
    mix: &TimeMix,
    rng: &mut R,
) -> TimeChoice {
    let restaurant: &[TimeTableId] = match dish {
        Some(k) => &state.word_dishes.get(k.0).time_tables,
        None => &[],
    };
    let mut logw = Vec::with_capacity(restaurant.len() + 1);
    for &tt in restaurant {
        let table = state.time_tables.get(tt.0);
        logw.push((table.stats.n as f64).ln() + mix.dish_g(table.dish).ln());
    }
    logw.push(state.zeta.value.ln() + mix.mix.ln());
    let pick = sample_log_categorical(rng, &logw);
    if pick < restaurant.len() {
        return TimeChoice::Existing(restaurant[pick]);
    }

    // New table: its dish comes from the global mixture the new-table
    // branch marginalized over.
    let mut dish_ids = Vec::with_capacity(state.time_dishes.len());
    let mut dlogw = Vec::with_capacity(state.time_dishes.len() + 1);
    for (id, d) in state.time_dishes.iter() {
        dish_ids.push(TimeDishId(id));
        dlogw.push((d.d as f64).ln() + mix.dish_g(TimeDishId(id)).ln());
    }
    dlogw.push(state.epsilon.value.ln() + mix.prior_g.ln());
    let dpick = sample_log_categorical(rng, &dlogw);
    if dpick < dish_ids.len() {
        TimeChoice::New(TimeDishChoice::Existing(dish_ids[dpick]))
    } else {
        TimeChoice::New(TimeDishChoice::New)
    }
}

/// Seats the currently-unseated word (doc, idx) by a draw from its full
/// conditional, drawing the time seat from the destination restaurant.
/// Shared by the sweep (after removal) and by sequential initialization.
pub fn seat_word_by_conditional<R: Rng + ?Sized>(
    state: &mut SeatingState,
    doc: usize,
    idx: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SeatResult {
    let t = state.docs[doc].times[idx];
    let mix = TimeMix::build(state, t);
    let (cands, logw) = word_table_conditional_cached(state, doc, idx, cfg, &mix);
    let (table_choice, dish) = match cands[sample_log_categorical(rng, &logw)] {
        WordCandidate::Table(tid) => (
            TableChoice::Existing(tid),
            Some(state.word_tables.get(tid.0).dish),
        ),
        WordCandidate::NewTableDish(k) => (TableChoice::New(DishChoice::Existing(k)), Some(k)),
        WordCandidate::NewTableNewDish => (TableChoice::New(DishChoice::New), None),
    };
    let time_choice = draw_time_choice(state, dish, &mix, rng);
    state.seat_word(
        doc,
        idx,
        Seating {
            table: table_choice,
            time: time_choice,
        },
    )
}

/// One modified-CRF step for word (doc, idx): remove it and re-seat it by
/// its full conditional.
pub fn sample_word_table<R: Rng + ?Sized>(
    state: &mut SeatingState,
    doc: usize,
    idx: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) {
    state.remove_word(doc, idx);
    seat_word_by_conditional(state, doc, idx, cfg, rng);
}

/// A time restaurant layered over the live state: real tables and dishes
/// plus virtual seats added during an estimate, none of which touch the
/// real seating. Mirrors `time_term` on the hypothetical state.
#[derive(Clone)]
pub struct TimeScratch<'a> {
    state: &'a SeatingState,
    /// Extra (table count, pooled seat statistics) per live time-dish slot.
    dish_delta: Vec<(u32, GaussianSuffStats)>,
    /// Dishes that exist only virtually: (table count, pooled statistics).
    virtual_dishes: Vec<(u32, GaussianSuffStats)>,
    extra_d: u32,
    /// Tables of the scratch restaurant: seat count and dish reference.
    tables: Vec<(u64, ScratchDish)>,
    s_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScratchDish {
    Real(u32),
    Virtual(usize),
}

impl<'a> TimeScratch<'a> {
    /// Scratch copy of `dish`'s restaurant (`None` = an empty restaurant).
    pub fn for_dish(state: &'a SeatingState, dish: Option<WordDishId>) -> TimeScratch<'a> {
        let mut tables = Vec::new();
        let mut s_total = 0;
        if let Some(k) = dish {
            for &tt in &state.word_dishes.get(k.0).time_tables {
                let t = state.time_tables.get(tt.0);
                tables.push((t.stats.n, ScratchDish::Real(t.dish.0)));
                s_total += t.stats.n;
            }
        }
        TimeScratch {
            state,
            dish_delta: vec![(0, GaussianSuffStats::default()); state.time_dishes.slots()],
            virtual_dishes: Vec::new(),
            extra_d: 0,
            tables,
            s_total,
        }
    }

    fn dish_g(&self, dish: ScratchDish, t: f64) -> f64 {
        let stats = match dish {
            ScratchDish::Real(slot) => self
                .state
                .time_dishes
                .get(slot)
                .stats
                .merged(&self.dish_delta[slot as usize].1),
            ScratchDish::Virtual(v) => self.virtual_dishes[v].1,
        };
        t_predictive(&nig_update(&self.state.time_prior, &stats), t)
    }

    /// (Σ_l d_·l·g_l + ε·prior)/(d_·· + ε) over real-plus-virtual dishes.
    fn mix(&self, t: f64) -> f64 {
        let eps = self.state.epsilon.value;
        let mut acc = eps * t_predictive(&self.state.time_prior, t);
        for (slot, dish) in self.state.time_dishes.iter() {
            let extra = self.dish_delta[slot as usize].0;
            acc += (dish.d + extra) as f64 * self.dish_g(ScratchDish::Real(slot), t);
        }
        for (v, &(d, _)) in self.virtual_dishes.iter().enumerate() {
            acc += d as f64 * self.dish_g(ScratchDish::Virtual(v), t);
        }
        acc / ((self.state.d_total + self.extra_d) as f64 + eps)
    }

    /// Marginalized-seating predictive of the next time word, mirroring
    /// `time_term` on the layered state.
    pub fn predictive(&self, t: f64) -> f64 {
        let zeta = self.state.zeta.value;
        let table_sum: f64 = self
            .tables
            .iter()
            .map(|&(s, dish)| s as f64 * self.dish_g(dish, t))
            .sum();
        (table_sum + zeta * self.mix(t)) / (self.s_total as f64 + zeta)
    }

    /// Virtually seats `t` at a branch drawn with the same weights
    /// `predictive` summed over.
    pub fn seat<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        let mut logw = Vec::with_capacity(self.tables.len() + 1);
        for &(s, dish) in &self.tables {
            logw.push((s as f64).ln() + self.dish_g(dish, t).ln());
        }
        logw.push(self.state.zeta.value.ln() + self.mix(t).ln());
        let pick = sample_log_categorical(rng, &logw);
        self.s_total += 1;
        if pick < self.tables.len() {
            self.tables[pick].0 += 1;
            match self.tables[pick].1 {
                ScratchDish::Real(slot) => self.dish_delta[slot as usize].1.add(t),
                ScratchDish::Virtual(v) => self.virtual_dishes[v].1.add(t),
            }
            return;
        }

        // New table: draw its dish from the mixture.
        let mut dishes = Vec::with_capacity(self.state.time_dishes.len() + self.virtual_dishes.len());
        let mut dlogw = Vec::with_capacity(dishes.capacity() + 1);
        for (slot, dish) in self.state.time_dishes.iter() {
            let scratch = ScratchDish::Real(slot);
            dishes.push(scratch);
            dlogw.push(((dish.d + self.dish_delta[slot as usize].0) as f64).ln() + self.dish_g(scratch, t).ln());
        }
        for (v, &(d, _)) in self.virtual_dishes.iter().enumerate() {
            let scratch = ScratchDish::Virtual(v);
            dishes.push(scratch);
            dlogw.push((d as f64).ln() + self.dish_g(scratch, t).ln());
        }
        dlogw.push(
            self.state.epsilon.value.ln() + t_predictive(&self.state.time_prior, t).ln(),
        );
        let dpick = sample_log_categorical(rng, &dlogw);
        let dish = if dpick < dishes.len() {
            match dishes[dpick] {
                ScratchDish::Real(slot) => {
                    self.dish_delta[slot as usize].0 += 1;
                    self.dish_delta[slot as usize].1.add(t);
                    ScratchDish::Real(slot)
                }
                ScratchDish::Virtual(v) => {
                    self.virtual_dishes[v].0 += 1;
                    self.virtual_dishes[v].1.add(t);
                    ScratchDish::Virtual(v)
                }
            }
        } else {
            let mut stats = GaussianSuffStats::default();
            stats.add(t);
            self.virtual_dishes.push((1, stats));
            ScratchDish::Virtual(self.virtual_dishes.len() - 1)
        };
        self.extra_d += 1;
        self.tables.push((1, dish));
    }
}

/// Estimate of the log marginal likelihood of `times` under the restaurant
/// of `dish` (`None` = a brand-new restaurant): the product of one-step
/// predictives along a sampled virtual seating path — a standard unbiased
/// sequential estimate of the restaurant marginal. A fixed `seed` lets
/// callers compare candidates on identical sampling randomness.
pub fn chained_time_log_marginal(
    state: &SeatingState,
    dish: Option<WordDishId>,
    times: &[f64],
    seed: u64,
) -> f64 {
    let mut scratch = TimeScratch::for_dish(state, dish);
    chained_log_predictive_into(&mut scratch, times, seed)
}

/// Same estimate accumulated into an existing scratch restaurant, leaving
/// the seated path behind for further chaining.
pub(crate) fn chained_log_predictive_into(
    scratch: &mut TimeScratch<'_>,
    times: &[f64],
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for &t in times {
        acc += scratch.predictive(t).ln();
        scratch.seat(t, &mut rng);
    }
    acc
}

/// Log weight of every dish candidate for a detached table carrying
/// `member_words` and (subsampled) `times`: table support × joint word
/// predictive × estimated time marginal, with ω and the prior predictive
/// for a new dish.
fn word_dish_log_weights(
    state: &SeatingState,
    cands: &[DishChoice],
    member_words: &[u32],
    times: &[f64],
    scratch_seed: u64,
    cfg: &SamplerConfig,
) -> Vec<f64> {
    cands
        .iter()
        .map(|&cand| {
            let (ln_prior, dish) = match cand {
                DishChoice::Existing(k) => (((state.word_dishes.get(k.0).m) as f64).ln(), Some(k)),
                DishChoice::New => (state.omega.value.ln(), None),
            };
            let ln_words = if cfg.uniform_word_likelihood {
                0.0
            } else {
                match dish {
                    Some(k) => dm_gain(&state.word_dishes.get(k.0).words, member_words),
                    None => dm_gain(
                        &DirichletMultinomialStats::new(state.vocab_size, state.eta),
                        member_words,
                    ),
                }
            };
            let ln_time = if cfg.disable_time_term {
                0.0
            } else {
                chained_time_log_marginal(state, dish, times, scratch_seed)
            };
            ln_prior + ln_words + ln_time
        })
        .collect()
}

/// Log gain in the Dirichlet-multinomial marginal from adding `words`.
pub(crate) fn dm_gain(stats: &DirichletMultinomialStats, words: &[u32]) -> f64 {
    let mut with = stats.clone();
    for &w in words {
        with.add(w as usize);
    }
    dm_marginal_loglik(&with) - dm_marginal_loglik(stats)
}

/// One dish move for a word table: detach the table (words and time words),
/// weigh every live dish and a new one, draw, re-attach, and re-seat the
/// table's time words in the destination restaurant by their conditionals.
pub fn sample_word_dish<R: Rng + ?Sized>(
    state: &mut SeatingState,
    table: WordTableId,
    cfg: &SamplerConfig,
    rng: &mut R,
) {
    let doc = state.word_tables.get(table.0).doc;
    let members = state.table_members(table);
    let words: Vec<u32> = members.iter().map(|&(_, w, _)| w).collect();

    for &(idx, _, _) in &members {
        state.unseat_time_word(doc, idx);
    }
    state.detach_table_dish(table, &words);

    let mut cands: Vec<DishChoice> = state
        .word_dishes
        .ids()
        .map(|id| DishChoice::Existing(WordDishId(id)))
        .collect();
    cands.push(DishChoice::New);

    // Shared evidence: one subsample of the table's time words and one
    // virtual-seating seed, so candidates are compared like for like.
    let times: Vec<f64> = if cfg.disable_time_term {
        Vec::new()
    } else {
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(rng);
        order.truncate(cfg.time_subsample.min(members.len()));
        order.iter().map(|&i| members[i].2).collect()
    };
    let scratch_seed = rng.next_u64();

    let logw = word_dish_log_weights(state, &cands, &words, &times, scratch_seed, cfg);
    let choice = cands[sample_log_categorical(rng, &logw)];
    let dest = state.attach_table_dish(table, choice, &words);

    for &(idx, _, t) in &members {
        let mix = TimeMix::build(state, t);
        let tc = draw_time_choice(state, Some(dest), &mix, rng);
        state.seat_time_word(doc, idx, tc);
    }
}

/// One standard CRF pass over the time side with the word side fixed:
/// re-seat every observation's time word within its dish's restaurant, then
/// resample every time table's dish.
pub fn sample_time_hdp<R: Rng + ?Sized>(state: &mut SeatingState, rng: &mut R) {
    for doc in 0..state.n_docs() {
        for idx in 0..state.docs[doc].words.len() {
            let dish = state.unseat_time_word(doc, idx);
            let t = state.docs[doc].times[idx];
            let mix = TimeMix::build(state, t);
            let choice = draw_time_choice(state, Some(dish), &mix, rng);
            state.seat_time_word(doc, idx, choice);
        }
    }
    let tables: Vec<u32> = state.time_tables.ids().collect();
    for id in tables {
        sample_time_table_dish(state, TimeTableId(id), rng);
    }
}

/// Resamples which time dish one table serves: existing dishes weighted by
/// support × marginal-likelihood gain, a new dish by ε × the table's own
/// marginal.
fn sample_time_table_dish<R: Rng + ?Sized>(
    state: &mut SeatingState,
    table: TimeTableId,
    rng: &mut R,
) {
    let (_, stats) = state.detach_time_table_dish(table);

    let mut cands: Vec<TimeDishChoice> = Vec::with_capacity(state.time_dishes.len() + 1);
    let mut logw = Vec::with_capacity(state.time_dishes.len() + 1);
    for (id, dish) in state.time_dishes.iter() {
        cands.push(TimeDishChoice::Existing(TimeDishId(id)));
        let gain = nig_marginal_loglik(&state.time_prior, &dish.stats.merged(&stats))
            - nig_marginal_loglik(&state.time_prior, &dish.stats);
        logw.push((dish.d as f64).ln() + gain);
    }
    cands.push(TimeDishChoice::New);
    logw.push(state.epsilon.value.ln() + nig_marginal_loglik(&state.time_prior, &stats));

    let choice = cands[sample_log_categorical(rng, &logw)];
    state.attach_time_table_dish(table, choice);
}

/// One posterior draw for each of the four concentrations given the current
/// table and dish counts.
pub fn resample_concentrations<R: Rng + ?Sized>(state: &mut SeatingState, rng: &mut R) {
    let doc_sizes: Vec<u64> = state.docs.iter().map(|d| d.words.len() as u64).collect();
    let m_total = state.m_total as u64;
    let d_total = state.d_total as u64;
    state.delta.resample(rng, &doc_sizes, m_total);
    state
        .omega
        .resample(rng, &[m_total], state.word_dishes.len() as u64);
    let restaurant_sizes: Vec<u64> = state
        .word_dishes
        .iter()
        .map(|(_, d)| {
            d.time_tables
                .iter()
                .map(|&tt| state.time_tables.get(tt.0).stats.n)
                .sum()
        })
        .collect();
    state.zeta.resample(rng, &restaurant_sizes, d_total);
    state
        .epsilon
        .resample(rng, &[d_total], state.time_dishes.len() as u64);
}

/// Seats every observation by one sequential pass of draws from its
/// conditional given the words seated so far.
///
/// The pass deliberately drops the time-coupling factor from the word-side
/// weights (time words still seat by their own full conditional). During an
/// incremental pass the coupling is pathological rather than informative: a
/// document seated late lives in a time region the right dishes' restaurants
/// have not reached yet, so the factor steers every one of its words onto
/// whichever table the document opened first — a single-table local mode so
/// reinforced by the likelihood that later sweeps cannot dissolve it.
/// Content-only seating starts the word side near table/dish structure the
/// coupled sweeps then refine instead of fight.
pub fn init_sequential<R: Rng + ?Sized>(
    state: &mut SeatingState,
    cfg: &SamplerConfig,
    rng: &mut R,
) {
    let init_cfg = SamplerConfig {
        disable_time_term: true,
        ..cfg.clone()
    };
    for doc in 0..state.n_docs() {
        for idx in 0..state.docs[doc].words.len() {
            seat_word_by_conditional(state, doc, idx, &init_cfg, rng);
        }
    }
    state.refresh_derived();
    debug_assert!(state.validate().is_empty(), "initialization left an inconsistent state");
}

/// One full iteration: every word's table, every table's dish, a time-side
/// CRF pass, then concentrations; ends by recomputing derived statistics in
/// canonical order so states stay comparable across checkpoints.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut SeatingState, cfg: &SamplerConfig, rng: &mut R) {
    for doc in 0..state.n_docs() {
        for idx in 0..state.docs[doc].words.len() {
            sample_word_table(state, doc, idx, cfg, rng);
        }
    }
    let tables: Vec<u32> = state.word_tables.ids().collect();
    for id in tables {
        sample_word_dish(state, WordTableId(id), cfg, rng);
    }
    sample_time_hdp(state, rng);
    if cfg.resample_concentrations {
        resample_concentrations(state, rng);
    }
    state.refresh_derived();
    debug_assert!(state.validate().is_empty(), "sweep left an inconsistent state");
}

/// Mean per-word log likelihood of the training corpus under the current
/// dish mixture — a mixing diagnostic, not a held-out metric.
pub fn train_per_word_loglik(state: &SeatingState, cfg: &SamplerConfig) -> f64 {
    let m_total = state.m_total as f64;
    let mut total = 0.0;
    let mut n = 0usize;
    let mut terms = Vec::new();
    for doc in 0..state.n_docs() {
        for idx in 0..state.docs[doc].words.len() {
            let word = state.docs[doc].words[idx] as usize;
            let t = state.docs[doc].times[idx];
            let mix = TimeMix::build(state, t);
            terms.clear();
            for (id, dish) in state.word_dishes.iter() {
                let ln_w = (dish.m as f64 / m_total).ln();
                let ln_f = if cfg.uniform_word_likelihood {
                    -(state.vocab_size as f64).ln()
                } else {
                    dish.words.log_predictive(word)
                };
                let ln_t = if cfg.disable_time_term {
                    0.0
                } else {
                    time_term_cached(state, Some(WordDishId(id)), &mix).ln()
                };
                terms.push(ln_w + ln_f + ln_t);
            }
            total += log_sum_exp(&terms);
            n += 1;
        }
    }
    total / n as f64
}

/// One progress-log line; formats as a tab-separated row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressRecord {
    pub iter: u32,
    pub n_word_dishes: usize,
    pub n_time_dishes: usize,
    pub train_pwll: f64,
    pub sm_proposed: u64,
    pub sm_accepted_split: u64,
    pub sm_accepted_merge: u64,
}

impl ProgressRecord {
    pub const TSV_HEADER: &'static str =
        "iter\tK\tL\ttrain_pwll\tsm_proposed\tsm_accepted_split\tsm_accepted_merge";
}

impl fmt::Display for ProgressRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
            self.iter,
            self.n_word_dishes,
            self.n_time_dishes,
            self.train_pwll,
            self.sm_proposed,
            self.sm_accepted_split,
            self.sm_accepted_merge
        )
    }
}

/// RNG streams of the master generator, one per sampling phase, so a change
/// in one phase's draw count cannot shift another phase's randomness.
const STREAM_INIT: u64 = 0;
const STREAM_GIBBS: u64 = 1;
const STREAM_SM: u64 = 2;

/// The full sampling schedule around one seating state: sequential
/// initialization, Gibbs sweeps, and split-merge attempts every `sm_period`
/// iterations after burn-in while the early phase lasts.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub state: SeatingState,
    pub cfg: SamplerConfig,
    /// Completed iterations.
    pub iter: u32,
    pub sm_stats: SmStats,
    rng: ChaCha8Rng,
}

impl Sampler {
    /// Validates the configuration and seats the corpus by one sequential
    /// conditional pass. The time prior defaults to a vague prior centered
    /// on the corpus mean time stamp.
    pub fn new(corpus: &Corpus, cfg: SamplerConfig) -> crate::Result<Sampler> {
        cfg.validate()?;
        let time_prior = cfg
            .time_prior
            .unwrap_or_else(|| NigParams::default_for_mean(corpus.time_mean()));
        let mut state = SeatingState::empty(corpus, cfg.eta, time_prior);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(STREAM_INIT);
        init_sequential(&mut state, &cfg, &mut rng);
        Ok(Sampler {
            state,
            cfg,
            iter: 0,
            sm_stats: SmStats::default(),
            rng,
        })
    }

    /// Reassembles a sampler from checkpointed parts.
    pub fn from_parts(
        state: SeatingState,
        cfg: SamplerConfig,
        iter: u32,
        sm_stats: SmStats,
        rng: ChaCha8Rng,
    ) -> Sampler {
        Sampler {
            state,
            cfg,
            iter,
            sm_stats,
            rng,
        }
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Whether split-merge proposals run after the iteration that just
    /// completed: past burn-in, inside the early phase, on the period.
    fn sm_scheduled(&self, iter: u32) -> bool {
        self.cfg.enable_split_merge
            && iter > self.cfg.burn_in
            && iter <= self.cfg.sm_phase_len
            && iter % self.cfg.sm_period == 0
    }

    /// One iteration: a Gibbs sweep, then any scheduled split-merge
    /// proposals, reported as one progress row.
    pub fn step(&mut self) -> ProgressRecord {
        self.iter += 1;
        self.rng.set_stream(STREAM_GIBBS);
        gibbs_sweep(&mut self.state, &self.cfg, &mut self.rng);
        if self.sm_scheduled(self.iter) {
            self.rng.set_stream(STREAM_SM);
            for _ in 0..self.cfg.sm_proposals_per_attempt {
                let outcome = attempt_split_merge(&mut self.state, &self.cfg, &mut self.rng);
                self.sm_stats.record(outcome);
            }
        }
        ProgressRecord {
            iter: self.iter,
            n_word_dishes: self.state.n_word_dishes(),
            n_time_dishes: self.state.n_time_dishes(),
            train_pwll: train_per_word_loglik(&self.state, &self.cfg),
            sm_proposed: self.sm_stats.proposed,
            sm_accepted_split: self.sm_stats.accepted_split,
            sm_accepted_merge: self.sm_stats.accepted_merge,
        }
    }

    /// Runs the remaining iterations of the schedule, reporting each row.
    pub fn run(&mut self, mut on_iter: impl FnMut(&ProgressRecord)) {
        while self.iter < self.cfg.total_iters {
            let rec = self.step();
            on_iter(&rec);
        }
    }
}
