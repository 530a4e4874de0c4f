//! The human-facing model extracted from a seating state: word topics with
//! posterior-mean word distributions, time topics as Gaussian components,
//! and per-topic scaled time mixtures, plus binary serialization and plot
//! export.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::logmath::log_sum_exp;
use crate::priors::nig_update;
use crate::seating::SeatingState;
use crate::{Error, Result};

/// Topics below this many observations are flagged as low support (but
/// still exported).
pub const DEFAULT_SUPPORT_FLOOR: u64 = 10;

const MODEL_MAGIC: &[u8; 4] = b"STPM";
const MODEL_VERSION: u32 = 1;

/// One motion pattern: a distribution over the word vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTopic {
    pub id: u32,
    /// Posterior-mean probability per vocabulary word; sums to 1.
    pub distribution: Vec<f64>,
    /// Fraction of all observations assigned to this topic; sums to 1
    /// across topics.
    pub weight: f64,
    /// Observations assigned to this topic.
    pub support_count: u64,
    /// Support below the extraction floor; exported but flagged.
    pub low_support: bool,
}

/// One shared temporal component: a Gaussian over seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTopic {
    pub id: u32,
    pub mean: f64,
    pub variance: f64,
    /// Share of time tables serving this component.
    pub weight: f64,
}

/// The time profile of one word topic: a mixture over time topics, scaled
/// by the topic's observation count so curve integrals compare topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTimeProfile {
    pub topic: u32,
    /// (time topic id, mixture weight); weights sum to 1.
    pub components: Vec<(u32, f64)>,
    /// Number of observations behind the profile; the curve integrates to
    /// this value.
    pub scale: f64,
}

/// Everything needed to score observations and plot activity curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub vocab_size: usize,
    pub time_span: (f64, f64),
    pub word_topics: Vec<WordTopic>,
    pub time_topics: Vec<TimeTopic>,
    pub profiles: Vec<TopicTimeProfile>,
}

impl TopicModel {
    /// Gaussian density of time topic `l` at `t`.
    pub fn time_density(&self, l: usize, t: f64) -> f64 {
        let tt = &self.time_topics[l];
        let d = t - tt.mean;
        (-0.5 * d * d / tt.variance).exp() / (2.0 * std::f64::consts::PI * tt.variance).sqrt()
    }

    /// Unscaled mixture density of topic `k`'s time profile at `t`.
    pub fn profile_mixture_density(&self, k: usize, t: f64) -> f64 {
        self.profiles[k]
            .components
            .iter()
            .map(|&(l, w)| w * self.time_density(l as usize, t))
            .sum()
    }

    /// Scaled profile density: scale × Σ_l γ_kl · Normal(t | α_l); its
    /// integral over the real line is the topic's scale.
    pub fn profile_density(&self, k: usize, t: f64) -> f64 {
        self.profiles[k].scale * self.profile_mixture_density(k, t)
    }

    /// Log of the word-topic mixture marginal Σ_k v_k β_k(w).
    pub fn log_word_marginal(&self, word: u32) -> f64 {
        let terms: Vec<f64> = self
            .word_topics
            .iter()
            .map(|k| k.weight.ln() + k.distribution[word as usize].ln())
            .collect();
        log_sum_exp(&terms)
    }
}

/// Reduces a seating state to posterior point estimates. Topic ids are
/// compacted to 0..K (and 0..L) in stable live-slot order; word
/// distributions are posterior means of the smoothed counts, time topics
/// posterior means of the Gaussian components, and each topic's time
/// mixture weights follow its time words' seat counts.
pub fn extract_model(state: &SeatingState, support_floor: u64) -> TopicModel {
    let total_obs = state.total_observations() as f64;

    // Compact id maps in live-slot order.
    let word_ids: Vec<u32> = state.word_dishes.ids().collect();
    let time_ids: Vec<u32> = state.time_dishes.ids().collect();
    let time_index = |slot: u32| -> u32 {
        time_ids
            .iter()
            .position(|&id| id == slot)
            .expect("live time dish missing from id list") as u32
    };

    let d_total = state.d_total as f64;
    let time_topics: Vec<TimeTopic> = time_ids
        .iter()
        .enumerate()
        .map(|(compact, &slot)| {
            let dish = state.time_dishes.get(slot);
            let post = nig_update(&state.time_prior, &dish.stats);
            let variance = if post.shape > 1.0 {
                post.scale / (post.shape - 1.0)
            } else {
                post.scale / post.shape
            };
            TimeTopic {
                id: compact as u32,
                mean: post.mu,
                variance,
                weight: dish.d as f64 / d_total,
            }
        })
        .collect();

    let mut word_topics = Vec::with_capacity(word_ids.len());
    let mut profiles = Vec::with_capacity(word_ids.len());
    for (compact, &slot) in word_ids.iter().enumerate() {
        let dish = state.word_dishes.get(slot);
        let support = dish.words.total as u64;
        let denom = dish.words.total as f64 + state.vocab_size as f64 * dish.words.eta;
        let distribution: Vec<f64> = dish
            .words
            .counts
            .iter()
            .map(|&c| (c as f64 + dish.words.eta) / denom)
            .collect();
        word_topics.push(WordTopic {
            id: compact as u32,
            distribution,
            weight: support as f64 / total_obs,
            support_count: support,
            low_support: support < support_floor,
        });

        let mut seats = 0.0;
        let mut components: Vec<(u32, f64)> = Vec::new();
        for &tt in &dish.time_tables {
            let table = state.time_tables.get(tt.0);
            let l = time_index(table.dish.0);
            let s = table.stats.n as f64;
            seats += s;
            match components.iter_mut().find(|(id, _)| *id == l) {
                Some((_, w)) => *w += s,
                None => components.push((l, s)),
            }
        }
        components.sort_by_key(|&(id, _)| id);
        for (_, w) in &mut components {
            *w /= seats;
        }
        profiles.push(TopicTimeProfile {
            topic: compact as u32,
            components,
            scale: support as f64,
        });
    }

    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for doc in &state.docs {
        for &t in &doc.times {
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
    }

    TopicModel {
        vocab_size: state.vocab_size,
        time_span: (t_min, t_max),
        word_topics,
        time_topics,
        profiles,
    }
}

/// Writes the model in the versioned little-endian binary layout:
/// magic "STPM", version u32, vocab u64, time span 2×f64, then counted
/// arrays of word topics (id, weight, support, flag, V×f64), time topics
/// (id, mean, variance, weight), and profiles (topic, scale, components).
pub fn save_model(model: &TopicModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(MODEL_VERSION)?;
    w.write_u64::<LittleEndian>(model.vocab_size as u64)?;
    w.write_f64::<LittleEndian>(model.time_span.0)?;
    w.write_f64::<LittleEndian>(model.time_span.1)?;

    w.write_u64::<LittleEndian>(model.word_topics.len() as u64)?;
    for topic in &model.word_topics {
        w.write_u32::<LittleEndian>(topic.id)?;
        w.write_f64::<LittleEndian>(topic.weight)?;
        w.write_u64::<LittleEndian>(topic.support_count)?;
        w.write_u8(topic.low_support as u8)?;
        for &p in &topic.distribution {
            w.write_f64::<LittleEndian>(p)?;
        }
    }

    w.write_u64::<LittleEndian>(model.time_topics.len() as u64)?;
    for tt in &model.time_topics {
        w.write_u32::<LittleEndian>(tt.id)?;
        w.write_f64::<LittleEndian>(tt.mean)?;
        w.write_f64::<LittleEndian>(tt.variance)?;
        w.write_f64::<LittleEndian>(tt.weight)?;
    }

    w.write_u64::<LittleEndian>(model.profiles.len() as u64)?;
    for profile in &model.profiles {
        w.write_u32::<LittleEndian>(profile.topic)?;
        w.write_f64::<LittleEndian>(profile.scale)?;
        w.write_u64::<LittleEndian>(profile.components.len() as u64)?;
        for &(l, weight) in &profile.components {
            w.write_u32::<LittleEndian>(l)?;
            w.write_f64::<LittleEndian>(weight)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TopicModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Malformed(format!(
            "not a model file (magic {:02x?})",
            magic
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let vocab_size = r.read_u64::<LittleEndian>()? as usize;
    let time_span = (
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
    );

    let n_word = r.read_u64::<LittleEndian>()? as usize;
    let mut word_topics = Vec::with_capacity(n_word.min(1 << 20));
    for _ in 0..n_word {
        let id = r.read_u32::<LittleEndian>()?;
        let weight = r.read_f64::<LittleEndian>()?;
        let support_count = r.read_u64::<LittleEndian>()?;
        let low_support = r.read_u8()? != 0;
        let mut distribution = vec![0.0; vocab_size];
        for p in &mut distribution {
            *p = r.read_f64::<LittleEndian>()?;
        }
        word_topics.push(WordTopic {
            id,
            distribution,
            weight,
            support_count,
            low_support,
        });
    }

    let n_time = r.read_u64::<LittleEndian>()? as usize;
    let mut time_topics = Vec::with_capacity(n_time.min(1 << 20));
    for _ in 0..n_time {
        time_topics.push(TimeTopic {
            id: r.read_u32::<LittleEndian>()?,
            mean: r.read_f64::<LittleEndian>()?,
            variance: r.read_f64::<LittleEndian>()?,
            weight: r.read_f64::<LittleEndian>()?,
        });
    }

    let n_profiles = r.read_u64::<LittleEndian>()? as usize;
    let mut profiles = Vec::with_capacity(n_profiles.min(1 << 20));
    for _ in 0..n_profiles {
        let topic = r.read_u32::<LittleEndian>()?;
        let scale = r.read_f64::<LittleEndian>()?;
        let n_comp = r.read_u64::<LittleEndian>()? as usize;
        let mut components = Vec::with_capacity(n_comp.min(1 << 20));
        for _ in 0..n_comp {
            components.push((
                r.read_u32::<LittleEndian>()?,
                r.read_f64::<LittleEndian>()?,
            ));
        }
        profiles.push(TopicTimeProfile {
            topic,
            scale,
            components,
        });
    }

    Ok(TopicModel {
        vocab_size,
        time_span,
        word_topics,
        time_topics,
        profiles,
    })
}

/// The scaled density of one topic evaluated on a uniform grid spanning the
/// model's time span (inclusive endpoints).
pub fn density_curve(model: &TopicModel, topic: usize, resolution: usize) -> Vec<(f64, f64)> {
    assert!(resolution >= 2, "a curve needs at least two grid points");
    let (lo, hi) = model.time_span;
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution)
        .map(|i| {
            let t = lo + step * i as f64;
            (t, model.profile_density(topic, t))
        })
        .collect()
}

/// Index entry for one topic in the plot-export manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotIndexEntry {
    pub topic: u32,
    pub csv: String,
    pub weight: f64,
    pub support_count: u64,
    pub low_support: bool,
    /// (mean, variance, mixture weight) per time component.
    pub components: Vec<(f64, f64, f64)>,
}

/// Writes one `topic_<id>.csv` per topic (columns `t,density`) plus an
/// `index.json` manifest; returns the paths written.
pub fn export_plot_data(
    model: &TopicModel,
    out_dir: &Path,
    resolution: usize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut index = Vec::new();
    for (k, topic) in model.word_topics.iter().enumerate() {
        let name = format!("topic_{}.csv", topic.id);
        let path = out_dir.join(&name);
        let mut f = BufWriter::new(File::create(&path)?);
        writeln!(f, "t,density")?;
        for (t, d) in density_curve(model, k, resolution) {
            writeln!(f, "{t},{d}")?;
        }
        f.flush()?;
        written.push(path);

        index.push(PlotIndexEntry {
            topic: topic.id,
            csv: name,
            weight: topic.weight,
            support_count: topic.support_count,
            low_support: topic.low_support,
            components: model.profiles[k]
                .components
                .iter()
                .map(|&(l, w)| {
                    let tt = &model.time_topics[l as usize];
                    (tt.mean, tt.variance, w)
                })
                .collect(),
        });
    }
    let index_path = out_dir.join("index.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&index_path)?), &index)?;
    written.push(index_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Observation};
    use crate::seating::{
        DishChoice, Seating, SeatingState, TableChoice, TimeChoice, TimeDishChoice,
    };
    use crate::priors::NigParams;
    use approx::assert_relative_eq;

    fn corpus_of(docs: &[Vec<(u32, f64)>], vocab_size: usize) -> Corpus {
        let documents = docs
            .iter()
            .enumerate()
            .map(|(doc, obs)| {
                obs.iter()
                    .map(|&(word, time_word)| Observation {
                        word,
                        time_word,
                        doc,
                        trajectory: doc as u64,
                    })
                    .collect()
            })
            .collect();
        Corpus::from_documents(documents, vocab_size)
    }

    /// Two dishes: words 0,0,0 at times near 10; words 1,1 at times near
    /// 100. Each observation gets its own time table; the first dish's time
    /// tables share one time dish, the second's another.
    fn two_dish_state() -> SeatingState {
        let corpus = corpus_of(
            &[vec![
                (0, 10.0),
                (0, 11.0),
                (0, 12.0),
                (1, 100.0),
                (1, 101.0),
            ]],
            3,
        );
        let mut state = SeatingState::empty(&corpus, 0.5, NigParams::default_for_mean(50.0));
        let mut seat = |idx: usize, table, time| {
            state.seat_word(0, idx, Seating { table, time })
        };
        let first = seat(
            0,
            TableChoice::New(DishChoice::New),
            TimeChoice::New(TimeDishChoice::New),
        );
        seat(
            1,
            TableChoice::Existing(first.table),
            TimeChoice::New(TimeDishChoice::Existing(first.time_dish)),
        );
        seat(
            2,
            TableChoice::Existing(first.table),
            TimeChoice::Existing(first.time_table),
        );
        let second = seat(
            3,
            TableChoice::New(DishChoice::New),
            TimeChoice::New(TimeDishChoice::New),
        );
        seat(
            4,
            TableChoice::Existing(second.table),
            TimeChoice::New(TimeDishChoice::Existing(second.time_dish)),
        );
        state.refresh_derived();
        state.assert_valid();
        state
    }

    #[test]
    fn extraction_matches_hand_computed_estimates() {
        let state = two_dish_state();
        let before = state.clone();
        let model = extract_model(&state, 10);
        assert_eq!(state, before, "extraction must not touch the state");

        assert_eq!(model.word_topics.len(), 2);
        assert_eq!(model.time_topics.len(), 2);
        // Dish 0: counts (3,0,0), eta 0.5 → (3.5, 0.5, 0.5)/4.5.
        let beta = &model.word_topics[0].distribution;
        assert_relative_eq!(beta[0], 3.5 / 4.5, max_relative = 1e-12);
        assert_relative_eq!(beta[1], 0.5 / 4.5, max_relative = 1e-12);
        assert_relative_eq!(model.word_topics[0].weight, 3.0 / 5.0, max_relative = 1e-12);
        assert_eq!(model.word_topics[0].support_count, 3);
        assert!(model.word_topics[0].low_support, "support 3 under floor 10");
        assert_relative_eq!(model.word_topics[1].weight, 2.0 / 5.0, max_relative = 1e-12);

        // Simplex and accounting invariants.
        let weight_sum: f64 = model.word_topics.iter().map(|t| t.weight).sum();
        assert_relative_eq!(weight_sum, 1.0, max_relative = 1e-12);
        for topic in &model.word_topics {
            let s: f64 = topic.distribution.iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
        }
        let scale_sum: f64 = model.profiles.iter().map(|p| p.scale).sum();
        assert_relative_eq!(scale_sum, 5.0, max_relative = 1e-12);
        for profile in &model.profiles {
            let s: f64 = profile.components.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
            assert!(profile.components.iter().all(|&(_, w)| w >= 0.0));
        }
        for tt in &model.time_topics {
            assert!(tt.variance > 0.0);
        }

        // Time topic 0 pools stamps {10, 11, 12}; its posterior mean pulls
        // toward the sample mean 11.
        assert!((model.time_topics[0].mean - 11.0).abs() < 1.0);
        assert!((model.time_topics[1].mean - 100.5).abs() < 1.0);
    }

    #[test]
    fn single_dish_state_gets_weight_one() {
        let corpus = corpus_of(&[vec![(2, 5.0), (2, 6.0)]], 4);
        let mut state = SeatingState::empty(&corpus, 0.5, NigParams::default_for_mean(5.0));
        let first = state.seat_word(
            0,
            0,
            Seating {
                table: TableChoice::New(DishChoice::New),
                time: TimeChoice::New(TimeDishChoice::New),
            },
        );
        state.seat_word(
            0,
            1,
            Seating {
                table: TableChoice::Existing(first.table),
                time: TimeChoice::Existing(first.time_table),
            },
        );
        state.refresh_derived();
        let model = extract_model(&state, 10);
        assert_eq!(model.word_topics.len(), 1);
        assert_relative_eq!(model.word_topics[0].weight, 1.0, max_relative = 1e-12);
        // Nearly all mass on the observed word as smoothing shrinks.
        assert!(model.word_topics[0].distribution[2] > 0.6);
    }

    #[test]
    fn profile_density_integrates_to_scale() {
        let model = TopicModel {
            vocab_size: 2,
            time_span: (0.0, 200.0),
            word_topics: vec![],
            time_topics: vec![
                TimeTopic {
                    id: 0,
                    mean: 40.0,
                    variance: 9.0,
                    weight: 0.5,
                },
                TimeTopic {
                    id: 1,
                    mean: 120.0,
                    variance: 25.0,
                    weight: 0.5,
                },
            ],
            profiles: vec![TopicTimeProfile {
                topic: 0,
                components: vec![(0, 0.25), (1, 0.75)],
                scale: 60.0,
            }],
        };
        // Peak value of a single component at its mean.
        let single = TopicModel {
            profiles: vec![TopicTimeProfile {
                topic: 0,
                components: vec![(0, 1.0)],
                scale: 7.0,
            }],
            ..model.clone()
        };
        let peak = 7.0 / (2.0 * std::f64::consts::PI * 9.0).sqrt();
        assert_relative_eq!(single.profile_density(0, 40.0), peak, max_relative = 1e-12);

        // Trapezoid integral over a wide window captures the scale.
        let n = 400_000;
        let (lo, hi) = (-500.0, 700.0);
        let h = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let t = lo + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * model.profile_density(0, t);
        }
        integral *= h;
        assert_relative_eq!(integral, 60.0, max_relative = 1e-3);
    }

    #[test]
    fn profile_scales_follow_support_ratio() {
        let state = two_dish_state();
        let model = extract_model(&state, 10);
        assert_relative_eq!(
            model.profiles[0].scale / model.profiles[1].scale,
            3.0 / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn model_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = extract_model(&two_dish_state(), 10);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
        for t in [0.0, 10.5, 99.0, 150.0] {
            assert_relative_eq!(
                model.profile_density(0, t),
                loaded.profile_density(0, t),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn corrupted_and_mismatched_files_report_structured_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"not a model at all").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Malformed(_))));

        let truncated = dir.path().join("trunc.bin");
        let model = extract_model(&two_dish_state(), 10);
        save_model(&model, &truncated).unwrap();
        let bytes = std::fs::read(&truncated).unwrap();
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_model(&truncated), Err(Error::Io(_))));

        let versioned = dir.path().join("future.bin");
        let mut bytes = std::fs::read(dir.path().join("junk.bin")).unwrap_or_default();
        bytes.clear();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        std::fs::write(&versioned, &bytes).unwrap();
        assert!(matches!(
            load_model(&versioned),
            Err(Error::Version {
                found: 99,
                expected: 1
            })
        ));
    }

    #[test]
    fn plot_export_covers_span_and_integrates_to_scale() {
        let dir = tempfile::tempdir().unwrap();
        // A model whose time mass sits far inside the span, so the over-span
        // integral of the exported curve recovers the scale.
        let model = TopicModel {
            vocab_size: 2,
            time_span: (0.0, 200.0),
            word_topics: vec![
                WordTopic {
                    id: 0,
                    distribution: vec![0.8, 0.2],
                    weight: 0.75,
                    support_count: 30,
                    low_support: false,
                },
                WordTopic {
                    id: 1,
                    distribution: vec![0.1, 0.9],
                    weight: 0.25,
                    support_count: 10,
                    low_support: false,
                },
            ],
            time_topics: vec![
                TimeTopic {
                    id: 0,
                    mean: 60.0,
                    variance: 16.0,
                    weight: 0.5,
                },
                TimeTopic {
                    id: 1,
                    mean: 140.0,
                    variance: 9.0,
                    weight: 0.5,
                },
            ],
            profiles: vec![
                TopicTimeProfile {
                    topic: 0,
                    components: vec![(0, 0.5), (1, 0.5)],
                    scale: 30.0,
                },
                TopicTimeProfile {
                    topic: 1,
                    components: vec![(1, 1.0)],
                    scale: 10.0,
                },
            ],
        };
        let written = export_plot_data(&model, dir.path(), 101).unwrap();
        assert_eq!(written.len(), 3, "two topic CSVs plus the index");

        let curve = density_curve(&model, 0, 5001);
        assert_eq!(curve.first().unwrap().0, model.time_span.0);
        assert_eq!(curve.last().unwrap().0, model.time_span.1);
        assert!(curve.iter().all(|&(_, d)| d >= 0.0));

        let csv = std::fs::read_to_string(dir.path().join("topic_0.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,density"));
        assert_eq!(lines.count(), 101);

        let index: Vec<PlotIndexEntry> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap())
                .unwrap();
        assert_eq!(index.len(), 2);
        assert_eq!(index[0].topic, 0);
        assert_eq!(index[0].components.len(), 2);

        let h = (model.time_span.1 - model.time_span.0) / 5000.0;
        let mut integral = 0.0;
        for (i, &(_, d)) in curve.iter().enumerate() {
            let w = if i == 0 || i == 5000 { 0.5 } else { 1.0 };
            integral += w * d;
        }
        integral *= h;
        assert_relative_eq!(integral, model.profiles[0].scale, max_relative = 1e-3);

        // Exporting an extracted model also succeeds and names files by id.
        let extracted = extract_model(&two_dish_state(), 10);
        let dir2 = tempfile::tempdir().unwrap();
        let written2 = export_plot_data(&extracted, dir2.path(), 64).unwrap();
        assert_eq!(written2.len(), 3);
        assert!(dir2.path().join("topic_1.csv").exists());
    }
}
