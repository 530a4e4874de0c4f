//! Chinese-restaurant-franchise state for the coupled word and time HDPs.
//!
//!Each observation holds two assignments: a word table inside its document's
//! restaurant (whose table serves a word dish) and a time table inside the
//! time restaurant attached to that word dish (whose table serves a time
//! dish). This module owns all of that bookkeeping: the slabs of tables
//! and dishes, the per-observation indicator vectors, every derived count,
//! and the mutation primitives the samplers are built from.
//!
//! Two properties matter more than speed here and shape the design:
//!
//! * `remove_word` returns a record that `restore_word` can replay into a
//!   bit-identical state, including floating-point sufficient statistics
//!   (restored from snapshots, never re-derived).
//! * Every container iterates in an order that is a pure function of its
//!   contents (slabs in id order, free ids allocated smallest-first,
//!   restaurant lists kept sorted), so a state rebuilt from a checkpoint
//!   replays the chain exactly.

use std::collections::BTreeSet;

use crate::corpus::Corpus;
use crate::priors::{
    ConcentrationParam, DirichletMultinomialStats, GaussianSuffStats, NigParams,
};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(WordTableId);
id_type!(WordDishId);
id_type!(TimeTableId);
id_type!(TimeDishId);

/// Fixed-capacity-free arena with stable indices. Freed slots are reused
/// smallest-id-first so allocation order depends only on which ids are
/// live, not on the history that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab<T> {
    items: Vec<Option<T>>,
    free: BTreeSet<u32>,
}

impl<T> Default for Slab<T> {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            free: BTreeSet::new(),
        }
    }
}

impl<T> Slab<T> {
    pub fn insert(&mut self, item: T) -> u32 {
        if let Some(&id) = self.free.iter().next() {
            self.free.remove(&id);
            self.items[id as usize] = Some(item);
            id
        } else {
            self.items.push(Some(item));
            (self.items.len() - 1) as u32
        }
    }

    /// Re-occupies a specific freed slot; used when undoing a removal.
    pub fn insert_at(&mut self, id: u32, item: T) {
        assert!(
            self.free.remove(&id),
            "insert_at({id}) into a slot that is not free"
        );
        self.items[id as usize] = Some(item);
    }

    pub fn remove(&mut self, id: u32) -> T {
        let item = self.items[id as usize]
            .take()
            .unwrap_or_else(|| panic!("removing dead slab id {id}"));
        self.free.insert(id);
        item
    }

    pub fn get(&self, id: u32) -> &T {
        self.items[id as usize]
            .as_ref()
            .unwrap_or_else(|| panic!("dead slab id {id}"))
    }

    pub fn get_mut(&mut self, id: u32) -> &mut T {
        self.items[id as usize]
            .as_mut()
            .unwrap_or_else(|| panic!("dead slab id {id}"))
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.items.len() && self.items[id as usize].is_some()
    }

    pub fn len(&self) -> usize {
        self.items.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of slots ever allocated (live + free).
    pub fn slots(&self) -> usize {
        self.items.len()
    }

    /// Live ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(i, x)| x.as_ref().map(|_| i as u32))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &T)> {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(i, x)| x.as_ref().map(|t| (i as u32, t)))
    }

    /// Rebuilds a slab from (id, item) pairs; every id below `slots` that
    /// is absent becomes a free slot.
    pub fn from_entries(slots: usize, entries: impl IntoIterator<Item = (u32, T)>) -> Self {
        let mut items: Vec<Option<T>> = (0..slots).map(|_| None).collect();
        for (id, item) in entries {
            assert!(items[id as usize].replace(item).is_none(), "duplicate id");
        }
        let free = items
            .iter()
            .enumerate()
            .filter_map(|(i, x)| x.is_none().then_some(i as u32))
            .collect();
        Self { items, free }
    }
}

/// A table in a document's word restaurant.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTable {
    pub doc: usize,
    pub dish: WordDishId,
    /// Number of words seated here (n_jt).
    pub n: u32,
}

/// A word dish: the word-count statistics shared by all tables serving it,
/// plus the time restaurant its observations' time words are seated in.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDish {
    pub words: DirichletMultinomialStats,
    /// Number of word tables serving this dish across all documents (m_·k).
    pub m: u32,
    /// The dish's time restaurant: its time tables, sorted by id.
    pub time_tables: Vec<TimeTableId>,
}

/// A table in some word dish's time restaurant.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTable {
    pub owner: WordDishId,
    pub dish: TimeDishId,
    /// Sufficient statistics of the time words seated here; `stats.n` is
    /// the seat count s.
    pub stats: GaussianSuffStats,
}

/// A time dish: a Gaussian component shared across time restaurants.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDish {
    pub stats: GaussianSuffStats,
    /// Number of time tables serving this dish (d_·l).
    pub d: u32,
}

/// The words and time stamps of one document, copied out of the corpus for
/// dense access during sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct DocData {
    pub words: Vec<u32>,
    pub times: Vec<f64>,
}

/// Complete sampler state for both franchises.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatingState {
    pub docs: Vec<DocData>,
    pub vocab_size: usize,
    pub time_prior: NigParams,
    /// Symmetric Dirichlet concentration used by every word dish.
    pub eta: f64,
    /// Word-table assignment z of each observation (None while unseated).
    pub z: Vec<Vec<Option<WordTableId>>>,
    /// Time-table assignment o of each observation.
    pub o: Vec<Vec<Option<TimeTableId>>>,
    pub word_tables: Slab<WordTable>,
    pub word_dishes: Slab<WordDish>,
    pub time_tables: Slab<TimeTable>,
    pub time_dishes: Slab<TimeDish>,
    /// Word tables per document, sorted by id.
    pub doc_tables: Vec<Vec<WordTableId>>,
    /// Total word tables (m_··) and time tables (d_··).
    pub m_total: u32,
    pub d_total: u32,
    /// Concentrations: word tables, word dishes, time tables, time dishes.
    pub delta: ConcentrationParam,
    pub omega: ConcentrationParam,
    pub zeta: ConcentrationParam,
    pub epsilon: ConcentrationParam,
}

/// Where to seat a word (and its time word). `New` variants allocate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableChoice {
    Existing(WordTableId),
    New(DishChoice),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DishChoice {
    Existing(WordDishId),
    New,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeChoice {
    Existing(TimeTableId),
    New(TimeDishChoice),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeDishChoice {
    Existing(TimeDishId),
    New,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seating {
    pub table: TableChoice,
    pub time: TimeChoice,
}

/// Ids actually occupied after a `seat_word`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeatResult {
    pub table: WordTableId,
    pub dish: WordDishId,
    pub time_table: TimeTableId,
    pub time_dish: TimeDishId,
}

/// Everything needed to undo one `remove_word` exactly, including verbatim
/// snapshots of the floating-point statistics it decremented.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalRecord {
    pub doc: usize,
    pub idx: usize,
    pub table: WordTableId,
    pub dish: WordDishId,
    pub time_table: TimeTableId,
    pub time_dish: TimeDishId,
    time_table_stats: GaussianSuffStats,
    time_dish_stats: GaussianSuffStats,
    deleted_time_table: Option<TimeTable>,
    deleted_time_dish: Option<TimeDish>,
    deleted_word_table: Option<WordTable>,
    deleted_word_dish: Option<WordDish>,
}

fn insert_sorted<T: Ord + Copy>(list: &mut Vec<T>, value: T) {
    let pos = list.partition_point(|&x| x < value);
    list.insert(pos, value);
}

fn remove_sorted<T: Ord + Copy>(list: &mut Vec<T>, value: T) {
    let pos = list.partition_point(|&x| x < value);
    debug_assert!(list.get(pos) == Some(&value), "value missing from list");
    list.remove(pos);
}

impl SeatingState {
    /// A state with every observation unseated. Concentrations start at 1
    /// under their vague Gamma priors.
    pub fn empty(corpus: &Corpus, eta: f64, time_prior: NigParams) -> Self {
        let docs: Vec<DocData> = corpus
            .documents
            .iter()
            .map(|doc| DocData {
                words: doc.iter().map(|o| o.word).collect(),
                times: doc.iter().map(|o| o.time_word).collect(),
            })
            .collect();
        let z = docs.iter().map(|d| vec![None; d.words.len()]).collect();
        let o = docs.iter().map(|d| vec![None; d.words.len()]).collect();
        let doc_tables = docs.iter().map(|_| Vec::new()).collect();
        Self {
            docs,
            vocab_size: corpus.vocab_size,
            time_prior,
            eta,
            z,
            o,
            word_tables: Slab::default(),
            word_dishes: Slab::default(),
            time_tables: Slab::default(),
            time_dishes: Slab::default(),
            doc_tables,
            m_total: 0,
            d_total: 0,
            delta: ConcentrationParam::new(1.0),
            omega: ConcentrationParam::new(1.0),
            zeta: ConcentrationParam::new(1.0),
            epsilon: ConcentrationParam::new(1.0),
        }
    }

    /// Number of live word dishes (K).
    pub fn n_word_dishes(&self) -> usize {
        self.word_dishes.len()
    }

    /// Number of live time dishes (L).
    pub fn n_time_dishes(&self) -> usize {
        self.time_dishes.len()
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_observations(&self) -> usize {
        self.docs.iter().map(|d| d.words.len()).sum()
    }

    /// (word index, word, time) of every observation seated at `table`, in
    /// document order.
    pub fn table_members(&self, table: WordTableId) -> Vec<(usize, u32, f64)> {
        let doc = self.word_tables.get(table.0).doc;
        self.z[doc]
            .iter()
            .enumerate()
            .filter(|(_, &zi)| zi == Some(table))
            .map(|(i, _)| (i, self.docs[doc].words[i], self.docs[doc].times[i]))
            .collect()
    }

    /// Unseats observation (doc, idx) from both franchises, deleting any
    /// entity it leaves empty, and returns the exact-undo record.
    pub fn remove_word(&mut self, doc: usize, idx: usize) -> RemovalRecord {
        let table = self.z[doc][idx].expect("word already unseated");
        let time_table = self.o[doc][idx].expect("word has no time seat");
        let word = self.docs[doc].words[idx];
        let t = self.docs[doc].times[idx];
        let dish = self.word_tables.get(table.0).dish;
        let time_dish = self.time_tables.get(time_table.0).dish;

        let time_table_stats = self.time_tables.get(time_table.0).stats;
        let time_dish_stats = self.time_dishes.get(time_dish.0).stats;

        self.z[doc][idx] = None;
        self.o[doc][idx] = None;

        self.word_tables.get_mut(table.0).n -= 1;
        self.word_dishes.get_mut(dish.0).words.remove(word as usize);

        self.time_tables.get_mut(time_table.0).stats.remove(t);
        self.time_dishes.get_mut(time_dish.0).stats.remove(t);

        let deleted_time_table = if self.time_tables.get(time_table.0).stats.n == 0 {
            remove_sorted(
                &mut self.word_dishes.get_mut(dish.0).time_tables,
                time_table,
            );
            self.time_dishes.get_mut(time_dish.0).d -= 1;
            self.d_total -= 1;
            Some(self.time_tables.remove(time_table.0))
        } else {
            None
        };
        let deleted_time_dish = if deleted_time_table.is_some()
            && self.time_dishes.get(time_dish.0).d == 0
        {
            let dead = self.time_dishes.remove(time_dish.0);
            debug_assert_eq!(dead.stats.n, 0, "deleting a time dish that still has data");
            Some(dead)
        } else {
            None
        };

        let deleted_word_table = if self.word_tables.get(table.0).n == 0 {
            remove_sorted(&mut self.doc_tables[doc], table);
            self.word_dishes.get_mut(dish.0).m -= 1;
            self.m_total -= 1;
            Some(self.word_tables.remove(table.0))
        } else {
            None
        };
        let deleted_word_dish = if deleted_word_table.is_some()
            && self.word_dishes.get(dish.0).m == 0
        {
            let dead = self.word_dishes.remove(dish.0);
            debug_assert!(dead.words.is_empty(), "deleting a word dish with words");
            debug_assert!(dead.time_tables.is_empty(), "dish restaurant not empty");
            Some(dead)
        } else {
            None
        };

        RemovalRecord {
            doc,
            idx,
            table,
            dish,
            time_table,
            time_dish,
            time_table_stats,
            time_dish_stats,
            deleted_time_table,
            deleted_time_dish,
            deleted_word_table,
            deleted_word_dish,
        }
    }

    /// Exact inverse of `remove_word`: replays the record, restoring all
    /// floating-point fields from snapshots.
    pub fn restore_word(&mut self, record: RemovalRecord) {
        let RemovalRecord {
            doc,
            idx,
            table,
            dish,
            time_table,
            time_dish,
            time_table_stats,
            time_dish_stats,
            deleted_time_table,
            deleted_time_dish,
            deleted_word_table,
            deleted_word_dish,
        } = record;
        let word = self.docs[doc].words[idx];

        if let Some(shell) = deleted_word_dish {
            self.word_dishes.insert_at(dish.0, shell);
        }
        if let Some(shell) = deleted_word_table {
            self.word_tables.insert_at(table.0, shell);
            insert_sorted(&mut self.doc_tables[doc], table);
            self.word_dishes.get_mut(dish.0).m += 1;
            self.m_total += 1;
        }
        if let Some(shell) = deleted_time_dish {
            self.time_dishes.insert_at(time_dish.0, shell);
        }
        if let Some(shell) = deleted_time_table {
            self.time_tables.insert_at(time_table.0, shell);
            insert_sorted(&mut self.word_dishes.get_mut(dish.0).time_tables, time_table);
            self.time_dishes.get_mut(time_dish.0).d += 1;
            self.d_total += 1;
        }

        self.time_dishes.get_mut(time_dish.0).stats = time_dish_stats;
        self.time_tables.get_mut(time_table.0).stats = time_table_stats;
        self.word_dishes.get_mut(dish.0).words.add(word as usize);
        self.word_tables.get_mut(table.0).n += 1;
        self.z[doc][idx] = Some(table);
        self.o[doc][idx] = Some(time_table);
    }

    /// Seats observation (doc, idx) according to `seating`, allocating any
    /// requested new entities, and returns the ids used.
    pub fn seat_word(&mut self, doc: usize, idx: usize, seating: Seating) -> SeatResult {
        assert!(self.z[doc][idx].is_none(), "observation already seated");
        let word = self.docs[doc].words[idx];
        let t = self.docs[doc].times[idx];

        let (table, dish) = match seating.table {
            TableChoice::Existing(id) => {
                let table = self.word_tables.get_mut(id.0);
                assert_eq!(table.doc, doc, "table belongs to another document");
                table.n += 1;
                let dish = table.dish;
                (id, dish)
            }
            TableChoice::New(dish_choice) => {
                let dish = match dish_choice {
                    DishChoice::Existing(id) => {
                        assert!(self.word_dishes.contains(id.0), "dead word dish");
                        id
                    }
                    DishChoice::New => WordDishId(self.word_dishes.insert(WordDish {
                        words: DirichletMultinomialStats::new(self.vocab_size, self.eta),
                        m: 0,
                        time_tables: Vec::new(),
                    })),
                };
                let id = WordTableId(self.word_tables.insert(WordTable { doc, dish, n: 1 }));
                insert_sorted(&mut self.doc_tables[doc], id);
                self.word_dishes.get_mut(dish.0).m += 1;
                self.m_total += 1;
                (id, dish)
            }
        };
        self.word_dishes.get_mut(dish.0).words.add(word as usize);

        let (time_table, time_dish) = match seating.time {
            TimeChoice::Existing(id) => {
                let tt = self.time_tables.get_mut(id.0);
                assert_eq!(tt.owner, dish, "time table belongs to another restaurant");
                tt.stats.add(t);
                (id, tt.dish)
            }
            TimeChoice::New(td_choice) => {
                let time_dish = match td_choice {
                    TimeDishChoice::Existing(id) => {
                        assert!(self.time_dishes.contains(id.0), "dead time dish");
                        id
                    }
                    TimeDishChoice::New => TimeDishId(self.time_dishes.insert(TimeDish {
                        stats: GaussianSuffStats::default(),
                        d: 0,
                    })),
                };
                let mut stats = GaussianSuffStats::default();
                stats.add(t);
                let id = TimeTableId(self.time_tables.insert(TimeTable {
                    owner: dish,
                    dish: time_dish,
                    stats,
                }));
                insert_sorted(&mut self.word_dishes.get_mut(dish.0).time_tables, id);
                self.time_dishes.get_mut(time_dish.0).d += 1;
                self.d_total += 1;
                (id, time_dish)
            }
        };
        self.time_dishes.get_mut(time_dish.0).stats.add(t);

        self.z[doc][idx] = Some(table);
        self.o[doc][idx] = Some(time_table);
        SeatResult {
            table,
            dish,
            time_table,
            time_dish,
        }
    }

    /// Removes only the time seat of observation (doc, idx), leaving the
    /// word side intact, and returns the word dish whose restaurant the
    /// observation must be re-seated into. First half of the time-side CRF
    /// update; candidates are enumerated on the state this leaves behind.
    pub fn unseat_time_word(&mut self, doc: usize, idx: usize) -> WordDishId {
        let t = self.docs[doc].times[idx];
        let time_table = self.o[doc][idx].expect("word has no time seat");
        let dish = self.time_tables.get(time_table.0).owner;
        let time_dish = self.time_tables.get(time_table.0).dish;

        self.o[doc][idx] = None;
        self.time_tables.get_mut(time_table.0).stats.remove(t);
        self.time_dishes.get_mut(time_dish.0).stats.remove(t);
        if self.time_tables.get(time_table.0).stats.n == 0 {
            remove_sorted(&mut self.word_dishes.get_mut(dish.0).time_tables, time_table);
            self.time_dishes.get_mut(time_dish.0).d -= 1;
            self.d_total -= 1;
            self.time_tables.remove(time_table.0);
            if self.time_dishes.get(time_dish.0).d == 0 {
                self.time_dishes.remove(time_dish.0);
            }
        }
        dish
    }

    /// Seats the time word of observation (doc, idx) inside the restaurant
    /// of the word dish its word table serves. Second half of the time-side
    /// CRF update.
    pub fn seat_time_word(&mut self, doc: usize, idx: usize, choice: TimeChoice) {
        assert!(self.o[doc][idx].is_none(), "time word already seated");
        let t = self.docs[doc].times[idx];
        let table = self.z[doc][idx].expect("word side not seated");
        let dish = self.word_tables.get(table.0).dish;

        let (new_table, new_dish) = match choice {
            TimeChoice::Existing(id) => {
                let tt = self.time_tables.get_mut(id.0);
                assert_eq!(tt.owner, dish, "time table belongs to another restaurant");
                tt.stats.add(t);
                (id, tt.dish)
            }
            TimeChoice::New(td_choice) => {
                let new_dish = match td_choice {
                    TimeDishChoice::Existing(id) => {
                        assert!(self.time_dishes.contains(id.0), "dead time dish");
                        id
                    }
                    TimeDishChoice::New => TimeDishId(self.time_dishes.insert(TimeDish {
                        stats: GaussianSuffStats::default(),
                        d: 0,
                    })),
                };
                let mut stats = GaussianSuffStats::default();
                stats.add(t);
                let id = TimeTableId(self.time_tables.insert(TimeTable {
                    owner: dish,
                    dish: new_dish,
                    stats,
                }));
                insert_sorted(&mut self.word_dishes.get_mut(dish.0).time_tables, id);
                self.time_dishes.get_mut(new_dish.0).d += 1;
                self.d_total += 1;
                (id, new_dish)
            }
        };
        self.time_dishes.get_mut(new_dish.0).stats.add(t);
        self.o[doc][idx] = Some(new_table);
    }

    /// Detaches a word table from its dish for a dish-level move: removes
    /// the table's member words from the dish statistics and decrements its
    /// table count, deleting the dish if this table was its last supporter.
    /// The table's time words must already be unseated; the table's `dish`
    /// field dangles until `attach_table_dish` is called, so the state is
    /// not valid in between.
    pub fn detach_table_dish(&mut self, table: WordTableId, member_words: &[u32]) -> WordDishId {
        let dish = self.word_tables.get(table.0).dish;
        {
            let d = self.word_dishes.get_mut(dish.0);
            debug_assert_eq!(
                member_words.len(),
                self.word_tables.get(table.0).n as usize,
                "member list does not cover the table"
            );
            for &w in member_words {
                d.words.remove(w as usize);
            }
            d.m -= 1;
        }
        self.m_total -= 1;
        if self.word_dishes.get(dish.0).m == 0 {
            let shell = self.word_dishes.remove(dish.0);
            debug_assert!(
                shell.words.is_empty() && shell.time_tables.is_empty(),
                "dish emptied of tables still holds data"
            );
        }
        dish
    }

    /// Seats a word table at the dish chosen by a dish-level move, adding
    /// its member words to the dish statistics. Counterpart of
    /// `detach_table_dish`; the table's time words still need re-seating.
    pub fn attach_table_dish(
        &mut self,
        table: WordTableId,
        choice: DishChoice,
        member_words: &[u32],
    ) -> WordDishId {
        let dish = match choice {
            DishChoice::Existing(id) => {
                assert!(self.word_dishes.contains(id.0), "dead word dish");
                id
            }
            DishChoice::New => WordDishId(self.word_dishes.insert(WordDish {
                words: DirichletMultinomialStats::new(self.vocab_size, self.eta),
                m: 0,
                time_tables: Vec::new(),
            })),
        };
        {
            let d = self.word_dishes.get_mut(dish.0);
            for &w in member_words {
                d.words.add(w as usize);
            }
            d.m += 1;
        }
        self.m_total += 1;
        self.word_tables.get_mut(table.0).dish = dish;
        dish
    }

    /// Detaches a time table from its dish for a time-dish move: subtracts
    /// the table's statistics from the dish and decrements its support,
    /// deleting the dish if this was its last table. The table's `dish`
    /// field dangles until `attach_time_table_dish` is called. Returns the
    /// old dish id and the table's statistics.
    pub fn detach_time_table_dish(&mut self, table: TimeTableId) -> (TimeDishId, GaussianSuffStats) {
        let (dish, stats) = {
            let tt = self.time_tables.get(table.0);
            (tt.dish, tt.stats)
        };
        {
            let d = self.time_dishes.get_mut(dish.0);
            d.stats.unmerge(&stats);
            d.d -= 1;
        }
        if self.time_dishes.get(dish.0).d == 0 {
            self.time_dishes.remove(dish.0);
        }
        (dish, stats)
    }

    /// Seats a time table at the dish chosen by a time-dish move, pooling
    /// its statistics into the dish. Counterpart of `detach_time_table_dish`.
    pub fn attach_time_table_dish(&mut self, table: TimeTableId, choice: TimeDishChoice) -> TimeDishId {
        let stats = self.time_tables.get(table.0).stats;
        let dish = match choice {
            TimeDishChoice::Existing(id) => {
                assert!(self.time_dishes.contains(id.0), "dead time dish");
                id
            }
            TimeDishChoice::New => TimeDishId(self.time_dishes.insert(TimeDish {
                stats: GaussianSuffStats::default(),
                d: 0,
            })),
        };
        {
            let d = self.time_dishes.get_mut(dish.0);
            d.stats.merge(&stats);
            d.d += 1;
        }
        self.time_tables.get_mut(table.0).dish = dish;
        dish
    }

    /// Recomputes all Gaussian sufficient statistics from the raw
    /// assignments in a canonical order (documents in order for tables,
    /// then tables in id order for dishes). Called at sweep boundaries so
    /// that an in-memory state and one rebuilt from a checkpoint agree
    /// bit-for-bit.
    pub fn refresh_derived(&mut self) {
        for id in self.time_tables.ids().collect::<Vec<_>>() {
            self.time_tables.get_mut(id).stats = GaussianSuffStats::default();
        }
        for doc in 0..self.docs.len() {
            for idx in 0..self.docs[doc].words.len() {
                if let Some(tt) = self.o[doc][idx] {
                    self.time_tables
                        .get_mut(tt.0)
                        .stats
                        .add(self.docs[doc].times[idx]);
                }
            }
        }
        for id in self.time_dishes.ids().collect::<Vec<_>>() {
            self.time_dishes.get_mut(id).stats = GaussianSuffStats::default();
        }
        for id in self.time_tables.ids().collect::<Vec<_>>() {
            let (dish, stats) = {
                let tt = self.time_tables.get(id);
                (tt.dish, tt.stats)
            };
            let ds = &mut self.time_dishes.get_mut(dish.0).stats;
            ds.n += stats.n;
            ds.sum += stats.sum;
            ds.sum_sq += stats.sum_sq;
        }
    }

    /// Full-recount consistency check of every invariant. Returns the list
    /// of violated identities (empty when consistent).
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut err = |msg: String| errs.push(msg);

        // Word tables: recount n from z, check doc lists and dish liveness.
        let mut table_n = vec![0u32; self.word_tables.slots()];
        let mut seated = 0usize;
        for (j, zs) in self.z.iter().enumerate() {
            for (i, zi) in zs.iter().enumerate() {
                if let Some(z) = zi {
                    seated += 1;
                    if !self.word_tables.contains(z.0) {
                        err(format!("z[{j}][{i}] points at dead table {z}"));
                        continue;
                    }
                    table_n[z.0 as usize] += 1;
                    if self.word_tables.get(z.0).doc != j {
                        err(format!("table {z} of doc {j} recorded in another doc"));
                    }
                }
            }
        }
        let mut dish_m = vec![0u32; self.word_dishes.slots()];
        let mut dish_counts: Vec<Vec<u32>> =
            vec![vec![0; self.vocab_size]; self.word_dishes.slots()];
        for (id, table) in self.word_tables.iter() {
            if table.n == 0 {
                err(format!("word table {id} is empty but persists"));
            }
            if table.n != table_n[id as usize] {
                err(format!(
                    "table {id}: n={} but {} words point at it",
                    table.n, table_n[id as usize]
                ));
            }
            if !self.word_dishes.contains(table.dish.0) {
                err(format!("table {id} serves dead dish {}", table.dish));
                continue;
            }
            dish_m[table.dish.0 as usize] += 1;
            if !self.doc_tables[table.doc].contains(&WordTableId(id)) {
                err(format!("table {id} missing from doc {} list", table.doc));
            }
        }
        for (j, list) in self.doc_tables.iter().enumerate() {
            if !list.windows(2).all(|w| w[0] < w[1]) {
                err(format!("doc {j} table list not sorted"));
            }
            for id in list {
                if !self.word_tables.contains(id.0) {
                    err(format!("doc {j} lists dead table {id}"));
                }
            }
        }
        for (j, zs) in self.z.iter().enumerate() {
            for (i, zi) in zs.iter().enumerate() {
                if let Some(z) = zi {
                    if self.word_tables.contains(z.0) {
                        let dish = self.word_tables.get(z.0).dish;
                        if self.word_dishes.contains(dish.0) {
                            dish_counts[dish.0 as usize][self.docs[j].words[i] as usize] += 1;
                        }
                    }
                }
            }
        }
        let mut m_total = 0u32;
        for (id, dish) in self.word_dishes.iter() {
            if dish.m == 0 {
                err(format!("word dish {id} has no tables but persists"));
            }
            if dish.m != dish_m[id as usize] {
                err(format!(
                    "dish {id}: m={} but {} tables serve it",
                    dish.m, dish_m[id as usize]
                ));
            }
            m_total += dish.m;
            if dish.words.counts != dish_counts[id as usize] {
                err(format!("dish {id}: word counts disagree with recount"));
            }
            if dish.words.total != dish.words.counts.iter().sum::<u32>() {
                err(format!("dish {id}: stats total inconsistent"));
            }
            if !dish.time_tables.windows(2).all(|w| w[0] < w[1]) {
                err(format!("dish {id}: restaurant list not sorted"));
            }
            for tt in &dish.time_tables {
                if !self.time_tables.contains(tt.0) {
                    err(format!("dish {id} restaurant lists dead time table {tt}"));
                } else if self.time_tables.get(tt.0).owner != WordDishId(id) {
                    err(format!("time table {tt} owner mismatch for dish {id}"));
                }
            }
        }
        if m_total != self.m_total {
            err(format!(
                "m_total={} but dishes sum to {m_total}",
                self.m_total
            ));
        }
        if self.m_total as usize != self.word_tables.len() {
            err(format!(
                "m_total={} but {} live tables",
                self.m_total,
                self.word_tables.len()
            ));
        }

        // Time side: recount seats from o, check restaurant membership.
        let mut tt_stats = vec![GaussianSuffStats::default(); self.time_tables.slots()];
        let mut time_seated = 0usize;
        for (j, os) in self.o.iter().enumerate() {
            for (i, oi) in os.iter().enumerate() {
                match (self.z[j][i], oi) {
                    (Some(z), Some(o)) => {
                        time_seated += 1;
                        if !self.time_tables.contains(o.0) {
                            err(format!("o[{j}][{i}] points at dead time table {o}"));
                            continue;
                        }
                        tt_stats[o.0 as usize].add(self.docs[j].times[i]);
                        if self.word_tables.contains(z.0) {
                            let dish = self.word_tables.get(z.0).dish;
                            if self.time_tables.get(o.0).owner != dish {
                                err(format!(
                                    "obs ({j},{i}): time table {o} not in dish {dish}'s restaurant"
                                ));
                            }
                        }
                    }
                    (None, None) => {}
                    _ => err(format!("obs ({j},{i}): seated in only one franchise")),
                }
            }
        }
        if time_seated != seated {
            err(format!("{seated} word seats vs {time_seated} time seats"));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);
        let mut td_d = vec![0u32; self.time_dishes.slots()];
        let mut td_stats = vec![GaussianSuffStats::default(); self.time_dishes.slots()];
        let mut s_total = 0u64;
        for (id, tt) in self.time_tables.iter() {
            if tt.stats.n == 0 {
                err(format!("time table {id} is empty but persists"));
            }
            s_total += tt.stats.n;
            let recount = &tt_stats[id as usize];
            if tt.stats.n != recount.n
                || !close(tt.stats.sum, recount.sum)
                || !close(tt.stats.sum_sq, recount.sum_sq)
            {
                err(format!("time table {id}: stats disagree with recount"));
            }
            if !self.time_dishes.contains(tt.dish.0) {
                err(format!("time table {id} serves dead time dish {}", tt.dish));
                continue;
            }
            td_d[tt.dish.0 as usize] += 1;
            let agg = &mut td_stats[tt.dish.0 as usize];
            agg.n += recount.n;
            agg.sum += recount.sum;
            agg.sum_sq += recount.sum_sq;
            if !self.word_dishes.contains(tt.owner.0) {
                err(format!("time table {id} owned by dead word dish {}", tt.owner));
            } else if !self
                .word_dishes
                .get(tt.owner.0)
                .time_tables
                .contains(&TimeTableId(id))
            {
                err(format!("time table {id} missing from its restaurant list"));
            }
        }
        if s_total as usize != seated {
            err(format!("time seats sum to {s_total}, expected {seated}"));
        }
        let mut d_total = 0u32;
        for (id, td) in self.time_dishes.iter() {
            if td.d == 0 {
                err(format!("time dish {id} has no tables but persists"));
            }
            if td.d != td_d[id as usize] {
                err(format!(
                    "time dish {id}: d={} but {} tables serve it",
                    td.d, td_d[id as usize]
                ));
            }
            d_total += td.d;
            let recount = &td_stats[id as usize];
            if td.stats.n != recount.n
                || !close(td.stats.sum, recount.sum)
                || !close(td.stats.sum_sq, recount.sum_sq)
            {
                err(format!("time dish {id}: stats disagree with recount"));
            }
        }
        if d_total != self.d_total {
            err(format!(
                "d_total={} but dishes sum to {d_total}",
                self.d_total
            ));
        }
        if self.d_total as usize != self.time_tables.len() {
            err(format!(
                "d_total={} but {} live time tables",
                self.d_total,
                self.time_tables.len()
            ));
        }

        for (name, c) in [
            ("delta", &self.delta),
            ("omega", &self.omega),
            ("zeta", &self.zeta),
            ("epsilon", &self.epsilon),
        ] {
            if !(c.value > 0.0) {
                err(format!("concentration {name} not positive: {}", c.value));
            }
        }
        errs
    }

    /// Panics with the violation list if the state is inconsistent; meant
    /// for debug builds and tests.
    pub fn assert_valid(&self) {
        let errs = self.validate();
        assert!(errs.is_empty(), "seating state inconsistent:\n{}", errs.join("\n"));
    }
}
