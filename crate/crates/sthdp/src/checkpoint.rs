//! Exact sampler checkpoints: the seating assignments, concentrations,
//! split-merge totals, configuration, and RNG position, enough to resume a
//! run bit-identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::gibbs::{Sampler, SamplerConfig};
use crate::priors::{ConcentrationParam, DirichletMultinomialStats, NigParams};
use crate::seating::{
    Slab, SeatingState, TimeDish, TimeDishId, TimeTable, TimeTableId, WordDish, WordDishId,
    WordTable, WordTableId,
};
use crate::split_merge::SmStats;
use crate::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"STCK";
const CHECKPOINT_VERSION: u32 = 1;
/// Refuse to allocate more than this many slots from a (possibly corrupt)
/// file.
const MAX_SLOTS: u64 = 1 << 28;

fn write_concentration<W: Write>(w: &mut W, c: &ConcentrationParam) -> Result<()> {
    w.write_f64::<LittleEndian>(c.value)?;
    w.write_f64::<LittleEndian>(c.prior_shape)?;
    w.write_f64::<LittleEndian>(c.prior_rate)?;
    Ok(())
}

fn read_concentration<R: Read>(r: &mut R) -> Result<ConcentrationParam> {
    Ok(ConcentrationParam {
        value: r.read_f64::<LittleEndian>()?,
        prior_shape: r.read_f64::<LittleEndian>()?,
        prior_rate: r.read_f64::<LittleEndian>()?,
    })
}

fn checked_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = r.read_u64::<LittleEndian>()?;
    if v > MAX_SLOTS {
        return Err(Error::Malformed(format!(
            "checkpoint declares {v} {what}, refusing"
        )));
    }
    Ok(v as usize)
}

fn write_assignments<W: Write>(w: &mut W, rows: &[Vec<Option<u32>>]) -> Result<()> {
    w.write_u64::<LittleEndian>(rows.len() as u64)?;
    for row in rows {
        w.write_u64::<LittleEndian>(row.len() as u64)?;
        for slot in row {
            w.write_u32::<LittleEndian>(slot.map_or(u32::MAX, |v| v))?;
        }
    }
    Ok(())
}

fn read_assignments<R: Read>(r: &mut R) -> Result<Vec<Vec<Option<u32>>>> {
    let n_docs = checked_len(r, "documents")?;
    let mut rows = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let len = checked_len(r, "observations")?;
        let mut row = Vec::with_capacity(len);
        for _ in 0..len {
            let v = r.read_u32::<LittleEndian>()?;
            row.push((v != u32::MAX).then_some(v));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes the sampler to `path` in the versioned little-endian layout.
pub fn save_checkpoint(sampler: &Sampler, path: &Path) -> Result<()> {
    let state = &sampler.state;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(sampler.iter)?;

    w.write_u64::<LittleEndian>(sampler.sm_stats.proposed)?;
    w.write_u64::<LittleEndian>(sampler.sm_stats.accepted_split)?;
    w.write_u64::<LittleEndian>(sampler.sm_stats.accepted_merge)?;
    w.write_u64::<LittleEndian>(sampler.sm_stats.rejected)?;

    let cfg_json = serde_json::to_vec(&sampler.cfg)?;
    w.write_u64::<LittleEndian>(cfg_json.len() as u64)?;
    w.write_all(&cfg_json)?;

    w.write_f64::<LittleEndian>(state.eta)?;
    w.write_f64::<LittleEndian>(state.time_prior.mu)?;
    w.write_f64::<LittleEndian>(state.time_prior.lambda)?;
    w.write_f64::<LittleEndian>(state.time_prior.shape)?;
    w.write_f64::<LittleEndian>(state.time_prior.scale)?;
    for c in [&state.delta, &state.omega, &state.zeta, &state.epsilon] {
        write_concentration(&mut w, c)?;
    }

    let rng = sampler.rng();
    w.write_all(&rng.get_seed())?;
    w.write_u64::<LittleEndian>(rng.get_stream())?;
    w.write_u128::<LittleEndian>(rng.get_word_pos())?;

    // Corpus shape for mismatch detection on load.
    w.write_u64::<LittleEndian>(state.vocab_size as u64)?;
    w.write_u64::<LittleEndian>(state.docs.len() as u64)?;

    w.write_u64::<LittleEndian>(state.word_tables.slots() as u64)?;
    w.write_u64::<LittleEndian>(state.word_tables.len() as u64)?;
    for (id, table) in state.word_tables.iter() {
        w.write_u32::<LittleEndian>(id)?;
        w.write_u64::<LittleEndian>(table.doc as u64)?;
        w.write_u32::<LittleEndian>(table.dish.0)?;
    }

    w.write_u64::<LittleEndian>(state.word_dishes.slots() as u64)?;
    w.write_u64::<LittleEndian>(state.word_dishes.len() as u64)?;
    for (id, _) in state.word_dishes.iter() {
        w.write_u32::<LittleEndian>(id)?;
    }

    w.write_u64::<LittleEndian>(state.time_tables.slots() as u64)?;
    w.write_u64::<LittleEndian>(state.time_tables.len() as u64)?;
    for (id, table) in state.time_tables.iter() {
        w.write_u32::<LittleEndian>(id)?;
        w.write_u32::<LittleEndian>(table.owner.0)?;
        w.write_u32::<LittleEndian>(table.dish.0)?;
    }

    w.write_u64::<LittleEndian>(state.time_dishes.slots() as u64)?;
    w.write_u64::<LittleEndian>(state.time_dishes.len() as u64)?;
    for (id, _) in state.time_dishes.iter() {
        w.write_u32::<LittleEndian>(id)?;
    }

    let z_raw: Vec<Vec<Option<u32>>> = state
        .z
        .iter()
        .map(|row| row.iter().map(|s| s.map(|id| id.0)).collect())
        .collect();
    let o_raw: Vec<Vec<Option<u32>>> = state
        .o
        .iter()
        .map(|row| row.iter().map(|s| s.map(|id| id.0)).collect())
        .collect();
    write_assignments(&mut w, &z_raw)?;
    write_assignments(&mut w, &o_raw)?;
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint written by `save_checkpoint` and reassembles the
/// sampler over `corpus`. Counts and statistics are recomputed from the
/// stored assignments, then every structural invariant is checked.
pub fn load_checkpoint(corpus: &Corpus, path: &Path) -> Result<Sampler> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Malformed(format!(
            "not a checkpoint file (magic {:02x?})",
            magic
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let iter = r.read_u32::<LittleEndian>()?;
    let sm_stats = SmStats {
        proposed: r.read_u64::<LittleEndian>()?,
        accepted_split: r.read_u64::<LittleEndian>()?,
        accepted_merge: r.read_u64::<LittleEndian>()?,
        rejected: r.read_u64::<LittleEndian>()?,
    };

    let cfg_len = checked_len(&mut r, "config bytes")?;
    let mut cfg_json = vec![0u8; cfg_len];
    r.read_exact(&mut cfg_json)?;
    let cfg: SamplerConfig = serde_json::from_slice(&cfg_json)?;

    let eta = r.read_f64::<LittleEndian>()?;
    let time_prior = NigParams::new(
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
    );
    let delta = read_concentration(&mut r)?;
    let omega = read_concentration(&mut r)?;
    let zeta = read_concentration(&mut r)?;
    let epsilon = read_concentration(&mut r)?;

    let mut seed = [0u8; 32];
    r.read_exact(&mut seed)?;
    let stream = r.read_u64::<LittleEndian>()?;
    let word_pos = r.read_u128::<LittleEndian>()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    let vocab_size = checked_len(&mut r, "vocabulary words")?;
    let n_docs = checked_len(&mut r, "documents")?;
    if vocab_size != corpus.vocab_size || n_docs != corpus.documents.len() {
        return Err(Error::Malformed(format!(
            "checkpoint shape ({n_docs} docs, vocabulary {vocab_size}) does not match \
             the corpus ({} docs, vocabulary {})",
            corpus.documents.len(),
            corpus.vocab_size
        )));
    }

    let wt_slots = checked_len(&mut r, "word-table slots")?;
    let wt_len = checked_len(&mut r, "word tables")?;
    let mut word_tables = Vec::with_capacity(wt_len);
    for _ in 0..wt_len {
        let id = r.read_u32::<LittleEndian>()?;
        let doc = r.read_u64::<LittleEndian>()? as usize;
        let dish = WordDishId(r.read_u32::<LittleEndian>()?);
        word_tables.push((id, WordTable { doc, dish, n: 0 }));
    }

    let wd_slots = checked_len(&mut r, "word-dish slots")?;
    let wd_len = checked_len(&mut r, "word dishes")?;
    let mut word_dishes = Vec::with_capacity(wd_len);
    for _ in 0..wd_len {
        let id = r.read_u32::<LittleEndian>()?;
        word_dishes.push((
            id,
            WordDish {
                words: DirichletMultinomialStats::new(vocab_size, eta),
                m: 0,
                time_tables: Vec::new(),
            },
        ));
    }

    let tt_slots = checked_len(&mut r, "time-table slots")?;
    let tt_len = checked_len(&mut r, "time tables")?;
    let mut time_tables = Vec::with_capacity(tt_len);
    for _ in 0..tt_len {
        let id = r.read_u32::<LittleEndian>()?;
        let owner = WordDishId(r.read_u32::<LittleEndian>()?);
        let dish = TimeDishId(r.read_u32::<LittleEndian>()?);
        time_tables.push((
            id,
            TimeTable {
                owner,
                dish,
                stats: Default::default(),
            },
        ));
    }

    let td_slots = checked_len(&mut r, "time-dish slots")?;
    let td_len = checked_len(&mut r, "time dishes")?;
    let mut time_dishes = Vec::with_capacity(td_len);
    for _ in 0..td_len {
        let id = r.read_u32::<LittleEndian>()?;
        time_dishes.push((
            id,
            TimeDish {
                stats: Default::default(),
                d: 0,
            },
        ));
    }

    let z_raw = read_assignments(&mut r)?;
    let o_raw = read_assignments(&mut r)?;

    let mut state = SeatingState::empty(corpus, eta, time_prior);
    state.delta = delta;
    state.omega = omega;
    state.zeta = zeta;
    state.epsilon = epsilon;
    state.word_tables = Slab::from_entries(wt_slots, word_tables);
    state.word_dishes = Slab::from_entries(wd_slots, word_dishes);
    state.time_tables = Slab::from_entries(tt_slots, time_tables);
    state.time_dishes = Slab::from_entries(td_slots, time_dishes);

    let shape_of = |rows: &[Vec<Option<u32>>]| -> Vec<usize> {
        rows.iter().map(|r| r.len()).collect()
    };
    let expected: Vec<usize> = corpus.documents.iter().map(|d| d.len()).collect();
    if shape_of(&z_raw) != expected || shape_of(&o_raw) != expected {
        return Err(Error::Malformed(
            "stored assignments do not match the corpus document lengths".into(),
        ));
    }
    state.z = z_raw
        .iter()
        .map(|row| row.iter().map(|s| s.map(WordTableId)).collect())
        .collect();
    state.o = o_raw
        .iter()
        .map(|row| row.iter().map(|s| s.map(TimeTableId)).collect())
        .collect();

    rebuild_counts(&mut state)?;
    state.refresh_derived();
    let errors = state.validate();
    if !errors.is_empty() {
        return Err(Error::Malformed(format!(
            "checkpoint is internally inconsistent: {}",
            errors.join("; ")
        )));
    }
    Ok(Sampler::from_parts(state, cfg, iter, sm_stats, rng))
}

/// Recomputes every derived count (table sizes, dish word counts and table
/// counts, per-document and per-dish table lists, totals) from the raw
/// assignments just read.
fn rebuild_counts(state: &mut SeatingState) -> Result<()> {
    let bad = |msg: String| Error::Malformed(msg);

    for doc in 0..state.docs.len() {
        for idx in 0..state.docs[doc].words.len() {
            let Some(z) = state.z[doc][idx] else {
                continue;
            };
            if !state.word_tables.contains(z.0) {
                return Err(bad(format!("assignment points at missing table {z}")));
            }
            let dish = state.word_tables.get(z.0).dish;
            if !state.word_dishes.contains(dish.0) {
                return Err(bad(format!("table {z} serves missing dish {dish}")));
            }
            state.word_tables.get_mut(z.0).n += 1;
            let word = state.docs[doc].words[idx] as usize;
            state.word_dishes.get_mut(dish.0).words.add(word);
        }
    }

    let table_ids: Vec<u32> = state.word_tables.ids().collect();
    for id in table_ids {
        let (doc, dish) = {
            let t = state.word_tables.get(id);
            (t.doc, t.dish)
        };
        if doc >= state.docs.len() {
            return Err(bad(format!("table {id} claims out-of-range doc {doc}")));
        }
        state.word_dishes.get_mut(dish.0).m += 1;
        state.doc_tables[doc].push(WordTableId(id));
    }

    let time_ids: Vec<u32> = state.time_tables.ids().collect();
    for id in time_ids {
        let (owner, dish) = {
            let t = state.time_tables.get(id);
            (t.owner, t.dish)
        };
        if !state.word_dishes.contains(owner.0) {
            return Err(bad(format!("time table {id} owned by missing dish {owner}")));
        }
        if !state.time_dishes.contains(dish.0) {
            return Err(bad(format!("time table {id} serves missing dish {dish}")));
        }
        state.word_dishes.get_mut(owner.0).time_tables.push(TimeTableId(id));
        state.time_dishes.get_mut(dish.0).d += 1;
    }

    state.m_total = state.word_tables.len() as u32;
    state.d_total = state.time_tables.len() as u32;
    Ok(())
}
