//! Raw trajectories to motion-word documents.
//!
//! A tracked trajectory is a time-ordered sequence of image positions.
//! Velocities come from forward finite differences, each sample is
//! discretized into a (cell, direction) vocabulary word, and the stream of
//! words is cut into documents along fixed non-overlapping time windows.
//! Words keep their continuous time stamp: the pair (word, time stamp) is
//! the unit the samplers operate on.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::{Error, Result};

/// One tracked object: ordered (t, x, y) samples, strictly increasing in t.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub id: u64,
    /// (t seconds, x pixels, y pixels)
    pub points: Vec<(f64, f64, f64)>,
}

/// Geometry of the word vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscretizationConfig {
    pub image_width: f64,
    pub image_height: f64,
    pub cell_size: f64,
    pub n_directions: usize,
    /// Samples slower than this many pixels per second are treated as
    /// stationary and dropped; the direction vocabulary has no rest bin.
    pub min_speed: f64,
    /// Set when the input uses image coordinates with y growing downward;
    /// flips vy so direction bins keep their compass meaning.
    pub y_down: bool,
}

impl DiscretizationConfig {
    pub fn new(image_width: f64, image_height: f64) -> Self {
        Self {
            image_width,
            image_height,
            cell_size: 50.0,
            n_directions: 4,
            min_speed: 1.0,
            y_down: false,
        }
    }

    pub fn n_cols(&self) -> usize {
        (self.image_width / self.cell_size).ceil() as usize
    }

    pub fn n_rows(&self) -> usize {
        (self.image_height / self.cell_size).ceil() as usize
    }

    pub fn vocab_size(&self) -> usize {
        self.n_cols() * self.n_rows() * self.n_directions
    }
}

/// A trajectory point with its estimated velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// One discretized sample: a vocabulary word plus its continuous time
/// stamp, tagged with the document and trajectory it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub word: u32,
    pub time_word: f64,
    pub doc: usize,
    pub trajectory: u64,
}

/// The full dataset: documents of observations plus the vocabulary size
/// and an index from trajectory id to the positions of its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Vec<Observation>>,
    pub vocab_size: usize,
    /// (earliest, latest) time stamp present in the corpus.
    pub time_span: (f64, f64),
    /// trajectory id → (document, index within document) of each of its
    /// observations, in time order.
    pub trajectories: BTreeMap<u64, Vec<(usize, usize)>>,
}

impl Corpus {
    /// Rebuilds the trajectory index and time span from `documents`.
    /// Documents must be non-empty and observations must carry their own
    /// document index.
    pub fn from_documents(documents: Vec<Vec<Observation>>, vocab_size: usize) -> Self {
        let mut trajectories: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        for (d, doc) in documents.iter().enumerate() {
            assert!(!doc.is_empty(), "document {d} is empty");
            for (i, obs) in doc.iter().enumerate() {
                debug_assert_eq!(obs.doc, d);
                debug_assert!((obs.word as usize) < vocab_size);
                trajectories.entry(obs.trajectory).or_default().push((d, i));
                t_min = t_min.min(obs.time_word);
                t_max = t_max.max(obs.time_word);
            }
        }
        Self {
            documents,
            vocab_size,
            time_span: (t_min, t_max),
            trajectories,
        }
    }

    pub fn total_observations(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    /// Sample mean of all time stamps; anchors the time prior.
    pub fn time_mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for doc in &self.documents {
            for obs in doc {
                sum += obs.time_word;
                n += 1;
            }
        }
        sum / n as f64
    }
}

/// Result of loading a trajectory file: parsed trajectories plus the number
/// rejected for non-monotonic time stamps.
#[derive(Debug)]
pub struct LoadedTrajectories {
    pub trajectories: Vec<RawTrajectory>,
    pub rejected: usize,
}

/// Reads a `traj_id,t,x,y` CSV, groups rows by trajectory id, and sorts
/// each trajectory's points by time. Trajectories whose time stamps are not
/// strictly increasing after grouping (duplicate rows) are rejected and
/// counted rather than failing the load; malformed rows fail it with their
/// line number.
pub fn load_trajectories(path: &Path) -> Result<LoadedTrajectories> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut grouped: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2; // 1-based, after the header
        let field = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Malformed(format!("line {line}: missing column {idx}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Malformed(format!("line {line}: {e}")))
        };
        let id = field(0)? as u64;
        let (t, x, y) = (field(1)?, field(2)?, field(3)?);
        grouped.entry(id).or_default().push((t, x, y));
    }
    let mut trajectories = Vec::new();
    let mut rejected = 0;
    for (id, mut points) in grouped {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let strictly_increasing = points.windows(2).all(|w| w[0].0 < w[1].0);
        if !strictly_increasing || points.len() < 2 {
            rejected += 1;
            continue;
        }
        trajectories.push(RawTrajectory { id, points });
    }
    Ok(LoadedTrajectories {
        trajectories,
        rejected,
    })
}

/// Forward finite differences: v_i = (p_{i+1} - p_i) / (t_{i+1} - t_i),
/// with the last point reusing the final difference (backward). Pairs with
/// zero dt are skipped and their samples inherit the nearest neighboring
/// velocity. Output length always equals input length.
pub fn estimate_velocities(traj: &RawTrajectory) -> Vec<VelocitySample> {
    let pts = &traj.points;
    assert!(pts.len() >= 2, "velocity needs at least two points");
    let n = pts.len();
    let mut v: Vec<Option<(f64, f64)>> = vec![None; n];
    for i in 0..n - 1 {
        let dt = pts[i + 1].0 - pts[i].0;
        if dt > 0.0 {
            v[i] = Some(((pts[i + 1].1 - pts[i].1) / dt, (pts[i + 1].2 - pts[i].2) / dt));
        }
    }
    // The last sample has no forward pair; give it the backward difference,
    // i.e. the latest defined forward velocity.
    if let Some(last) = v[..n - 1].iter().rev().find_map(|&x| x) {
        v[n - 1] = Some(last);
    }
    // Samples whose own pair was degenerate (zero dt) take the previous
    // sample's velocity, or failing that the next defined one.
    let mut filled = Vec::with_capacity(n);
    for i in 0..n {
        let vi = v[i]
            .or_else(|| v[..i].iter().rev().find_map(|&x| x))
            .or_else(|| v[i + 1..].iter().find_map(|&x| x))
            .unwrap_or((0.0, 0.0));
        filled.push(VelocitySample {
            t: pts[i].0,
            x: pts[i].1,
            y: pts[i].2,
            vx: vi.0,
            vy: vi.1,
        });
    }
    filled
}

/// Maps an in-bounds velocity sample to its vocabulary word, or None when
/// the sample is stationary (speed below `min_speed`). Callers are expected
/// to bounds-check positions first; see `build_corpus`.
///
/// The word encodes (cell row, cell column, direction) as
/// (cy * n_cols + cx) * n_directions + d, with direction sectors of equal
/// angle centered on the +x axis and proceeding counterclockwise.
pub fn discretize(sample: &VelocitySample, config: &DiscretizationConfig) -> Option<u32> {
    let speed = (sample.vx * sample.vx + sample.vy * sample.vy).sqrt();
    if speed < config.min_speed {
        return None;
    }
    let cx = (sample.x / config.cell_size).floor() as usize;
    let cy = (sample.y / config.cell_size).floor() as usize;
    let vy = if config.y_down { -sample.vy } else { sample.vy };
    let n = config.n_directions as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let angle = vy.atan2(sample.vx);
    // Shift by half a sector so sector 0 is centered on angle 0, then bin.
    let d = (((angle + tau / (2.0 * n)).rem_euclid(tau)) / (tau / n)) as usize;
    let d = d.min(config.n_directions - 1);
    Some(((cy * config.n_cols() + cx) * config.n_directions + d) as u32)
}

/// Inverse of the word encoding: word → (cx, cy, d).
pub fn decode_word(word: u32, config: &DiscretizationConfig) -> (usize, usize, usize) {
    let word = word as usize;
    let d = word % config.n_directions;
    let cell = word / config.n_directions;
    let cx = cell % config.n_cols();
    let cy = cell / config.n_cols();
    (cx, cy, d)
}

/// Counters for samples excluded during corpus construction.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct DropStats {
    pub stationary: usize,
    pub out_of_bounds: usize,
}

impl DropStats {
    pub fn total(&self) -> usize {
        self.stationary + self.out_of_bounds
    }
}

/// Cuts time-stamped words into documents along fixed non-overlapping
/// windows [t_min + k w, t_min + (k+1) w). Empty windows produce no
/// document; a trajectory's samples may land in several documents.
pub fn segment_documents(
    mut samples: Vec<(f64, u32, u64)>,
    window: f64,
    vocab_size: usize,
) -> Corpus {
    assert!(window > 0.0, "document window must be positive");
    assert!(!samples.is_empty(), "no samples to segment");
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let t_min = samples[0].0;
    let mut documents: Vec<Vec<Observation>> = Vec::new();
    let mut current_window = usize::MAX;
    for (t, word, traj) in samples {
        let k = ((t - t_min) / window).floor() as usize;
        if k != current_window {
            documents.push(Vec::new());
            current_window = k;
        }
        let doc = documents.len() - 1;
        documents.last_mut().unwrap().push(Observation {
            word,
            time_word: t,
            doc,
            trajectory: traj,
        });
    }
    Corpus::from_documents(documents, vocab_size)
}

/// Full pipeline from raw trajectories to a corpus: velocities,
/// discretization with bounds checking, then windowed segmentation.
pub fn build_corpus(
    trajectories: &[RawTrajectory],
    config: &DiscretizationConfig,
    window: f64,
) -> (Option<Corpus>, DropStats) {
    let mut samples = Vec::new();
    let mut drops = DropStats::default();
    for traj in trajectories {
        for sample in estimate_velocities(traj) {
            let in_bounds = sample.x >= 0.0
                && sample.x < config.image_width
                && sample.y >= 0.0
                && sample.y < config.image_height;
            if !in_bounds {
                drops.out_of_bounds += 1;
                continue;
            }
            match discretize(&sample, config) {
                Some(word) => samples.push((sample.t, word, traj.id)),
                None => drops.stationary += 1,
            }
        }
    }
    if samples.is_empty() {
        return (None, drops);
    }
    (
        Some(segment_documents(samples, window, config.vocab_size())),
        drops,
    )
}

/// Writes a corpus as CSV with a leading `# vocab_size=V` comment and
/// header `doc,word,t,traj`.
pub fn write_corpus_csv(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# vocab_size={}", corpus.vocab_size)?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(["doc", "word", "t", "traj"])?;
    for doc in &corpus.documents {
        for obs in doc {
            writer.write_record([
                obs.doc.to_string(),
                obs.word.to_string(),
                format!("{:?}", obs.time_word),
                obs.trajectory.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads the corpus CSV format produced by `write_corpus_csv`.
pub fn read_corpus_csv(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let vocab_size: usize = first
        .trim()
        .strip_prefix("# vocab_size=")
        .ok_or_else(|| Error::Malformed("expected leading '# vocab_size=V' line".into()))?
        .parse()
        .map_err(|e| Error::Malformed(format!("bad vocab_size: {e}")))?;
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut by_doc: BTreeMap<usize, Vec<Observation>> = BTreeMap::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record?;
        let line = i + 3; // after comment and header
        let get = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::Malformed(format!("line {line}: missing column {idx}")))
        };
        let doc: usize = get(0)?
            .parse()
            .map_err(|e| Error::Malformed(format!("line {line}: {e}")))?;
        let word: u32 = get(1)?
            .parse()
            .map_err(|e| Error::Malformed(format!("line {line}: {e}")))?;
        if word as usize >= vocab_size {
            return Err(Error::Malformed(format!(
                "line {line}: word {word} outside vocabulary of size {vocab_size}"
            )));
        }
        let t: f64 = get(2)?
            .parse()
            .map_err(|e| Error::Malformed(format!("line {line}: {e}")))?;
        let traj: u64 = get(3)?
            .parse()
            .map_err(|e| Error::Malformed(format!("line {line}: {e}")))?;
        by_doc.entry(doc).or_default().push(Observation {
            word,
            time_word: t,
            doc,
            trajectory: traj,
        });
    }
    if by_doc.is_empty() {
        return Err(Error::Malformed("corpus file has no observations".into()));
    }
    // Renumber documents densely in file order so Corpus invariants hold
    // even if the file skips indices.
    let documents: Vec<Vec<Observation>> = by_doc
        .into_values()
        .enumerate()
        .map(|(d, mut obs)| {
            for o in &mut obs {
                o.doc = d;
            }
            obs
        })
        .collect();
    Ok(Corpus::from_documents(documents, vocab_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vga_config() -> DiscretizationConfig {
        DiscretizationConfig::new(640.0, 480.0)
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_minimal_and_interleaved() {
        let f = write_temp("traj_id,t,x,y\n1,0.0,10,10\n2,0.5,5,5\n1,1.0,20,10\n2,1.5,6,6\n");
        let loaded = load_trajectories(f.path()).unwrap();
        assert_eq!(loaded.rejected, 0);
        assert_eq!(loaded.trajectories.len(), 2);
        assert_eq!(loaded.trajectories[0].id, 1);
        assert_eq!(loaded.trajectories[0].points.len(), 2);
        assert_eq!(loaded.trajectories[1].points, vec![(0.5, 5.0, 5.0), (1.5, 6.0, 6.0)]);
    }

    #[test]
    fn load_rejects_duplicate_timestamps() {
        let f = write_temp("traj_id,t,x,y\n1,1.0,10,10\n1,1.0,20,10\n2,0.0,0,0\n2,1.0,1,1\n");
        let loaded = load_trajectories(f.path()).unwrap();
        assert_eq!(loaded.rejected, 1);
        assert_eq!(loaded.trajectories.len(), 1);
        assert_eq!(loaded.trajectories[0].id, 2);
    }

    #[test]
    fn load_reports_malformed_line() {
        let f = write_temp("traj_id,t,x,y\n1,0.0,10,10\n1,abc,20,10\n");
        let err = load_trajectories(f.path()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn velocities_constant_motion() {
        let traj = RawTrajectory {
            id: 1,
            points: vec![(0.0, 0.0, 0.0), (1.0, 10.0, 0.0)],
        };
        let v = estimate_velocities(&traj);
        assert_eq!(v.len(), 2);
        for s in v {
            assert_relative_eq!(s.vx, 10.0);
            assert_relative_eq!(s.vy, 0.0);
        }
    }

    #[test]
    fn velocities_hand_computed() {
        let traj = RawTrajectory {
            id: 1,
            points: vec![(0.0, 0.0, 0.0), (2.0, 4.0, 0.0), (3.0, 4.0, 2.0)],
        };
        let v = estimate_velocities(&traj);
        assert_eq!((v[0].vx, v[0].vy), (2.0, 0.0));
        assert_eq!((v[1].vx, v[1].vy), (0.0, 2.0));
        assert_eq!((v[2].vx, v[2].vy), (0.0, 2.0));
    }

    #[test]
    fn velocities_zero_dt_pair_interpolates() {
        // Middle pair has dt = 0; its sample inherits the previous velocity
        // and the length is preserved.
        let traj = RawTrajectory {
            id: 1,
            points: vec![(0.0, 0.0, 0.0), (1.0, 2.0, 0.0), (1.0, 2.0, 0.0), (2.0, 4.0, 0.0)],
        };
        let v = estimate_velocities(&traj);
        assert_eq!(v.len(), 4);
        assert_eq!((v[0].vx, v[0].vy), (2.0, 0.0));
        assert_eq!((v[1].vx, v[1].vy), (2.0, 0.0));
        assert_eq!((v[2].vx, v[2].vy), (2.0, 0.0));
    }

    #[test]
    fn discretize_reference_words() {
        let config = vga_config();
        assert_eq!(config.n_cols(), 13);
        let east = VelocitySample { t: 0.0, x: 75.0, y: 120.0, vx: 1.0, vy: 0.0 };
        assert_eq!(discretize(&east, &config), Some(108));
        let north = VelocitySample { t: 0.0, x: 75.0, y: 120.0, vx: 0.0, vy: 1.0 };
        assert_eq!(discretize(&north, &config), Some(109));
    }

    #[test]
    fn discretize_stationary_is_none() {
        let config = vga_config();
        let still = VelocitySample { t: 0.0, x: 0.0, y: 0.0, vx: 0.0, vy: 0.0 };
        assert_eq!(discretize(&still, &config), None);
        let slow = VelocitySample { t: 0.0, x: 0.0, y: 0.0, vx: 0.5, vy: 0.5 };
        assert_eq!(discretize(&slow, &config), None);
    }

    #[test]
    fn discretize_direction_sectors() {
        let config = vga_config();
        let at = |vx: f64, vy: f64| {
            let s = VelocitySample { t: 0.0, x: 0.0, y: 0.0, vx, vy };
            discretize(&s, &config).unwrap() % 4
        };
        assert_eq!(at(2.0, 0.0), 0); // east
        assert_eq!(at(0.0, 2.0), 1); // north
        assert_eq!(at(-2.0, 0.0), 2); // west
        assert_eq!(at(0.0, -2.0), 3); // south
        // Sector boundaries are half-open: exactly -45 degrees is east,
        // exactly +45 degrees is north.
        assert_eq!(at(2.0, -2.0), 0);
        assert_eq!(at(2.0, 2.0), 1);
    }

    #[test]
    fn discretize_y_down_flips_north() {
        let mut config = vga_config();
        config.y_down = true;
        let s = VelocitySample { t: 0.0, x: 0.0, y: 0.0, vx: 0.0, vy: -2.0 };
        // Moving toward smaller y in image coordinates is north.
        assert_eq!(discretize(&s, &config).unwrap() % 4, 1);
    }

    #[test]
    fn segment_window_boundaries() {
        let samples = vec![(1.0, 0u32, 1u64), (5.0, 1, 1), (61.0, 2, 1)];
        let corpus = segment_documents(samples, 60.0, 10);
        assert_eq!(corpus.documents.len(), 2);
        assert_eq!(corpus.documents[0].len(), 2);
        assert_eq!(corpus.documents[1].len(), 1);

        let samples = vec![(0.0, 0u32, 1u64), (60.0, 1, 1), (120.0, 2, 1)];
        let corpus = segment_documents(samples, 60.0, 10);
        assert_eq!(corpus.documents.len(), 3);

        let samples = vec![(3.0, 0u32, 1u64), (9.0, 1, 2)];
        let corpus = segment_documents(samples, 60.0, 10);
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.time_span, (3.0, 9.0));
    }

    #[test]
    fn pipeline_accounts_for_every_sample() {
        let config = vga_config();
        let trajectories = vec![
            // Moves, then stops for a second: the stalled samples are
            // genuinely stationary and must be dropped and counted.
            RawTrajectory {
                id: 1,
                points: vec![(0.0, 10.0, 10.0), (1.0, 30.0, 10.0), (2.0, 30.0, 10.0)],
            },
            // Wanders out of frame: x = 700 is out of bounds.
            RawTrajectory {
                id: 2,
                points: vec![(0.0, 600.0, 10.0), (1.0, 700.0, 10.0)],
            },
        ];
        let (corpus, drops) = build_corpus(&trajectories, &config, 60.0);
        let corpus = corpus.unwrap();
        let total_samples: usize = trajectories.iter().map(|t| t.points.len()).sum();
        assert_eq!(corpus.total_observations() + drops.total(), total_samples);
        assert_eq!(drops.out_of_bounds, 1);
        assert_eq!(drops.stationary, 2);
        assert_eq!(corpus.trajectories.len(), 2);
    }

    #[test]
    fn corpus_csv_round_trip() {
        let samples = vec![(1.5, 3u32, 10u64), (2.5, 4, 10), (70.0, 5, 11)];
        let corpus = segment_documents(samples, 60.0, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        write_corpus_csv(&corpus, &path).unwrap();
        let back = read_corpus_csv(&path).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn corpus_csv_rejects_out_of_vocab_word() {
        let f = write_temp("# vocab_size=4\ndoc,word,t,traj\n0,9,1.0,1\n");
        let err = read_corpus_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("outside vocabulary"), "{err}");
    }

    proptest! {
        #[test]
        fn word_round_trip(word in 0u32..520) {
            // 13 columns x 10 rows x 4 directions.
            let config = vga_config();
            prop_assert_eq!(config.vocab_size(), 520);
            let (cx, cy, d) = decode_word(word, &config);
            let re = ((cy * config.n_cols() + cx) * config.n_directions + d) as u32;
            prop_assert_eq!(re, word);
        }

        #[test]
        fn direction_bins_cover_all_angles(angle in 0.0f64..std::f64::consts::TAU, n_dirs in 1usize..9) {
            let mut config = vga_config();
            config.n_directions = n_dirs;
            let s = VelocitySample {
                t: 0.0, x: 5.0, y: 5.0,
                vx: 10.0 * angle.cos(), vy: 10.0 * angle.sin(),
            };
            let word = discretize(&s, &config).unwrap() as usize;
            prop_assert!(word < config.vocab_size());
            prop_assert_eq!(word / n_dirs, 0);
        }
    }
}
