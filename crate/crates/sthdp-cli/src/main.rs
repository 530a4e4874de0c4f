//! Command-line front end: synthetic generation, trajectory ingestion,
//! training with checkpoints and a progress log, evaluation, anomaly
//! ranking, and plot export. Every run writes its fully-resolved
//! configuration next to its outputs so results are reproducible from the
//! config and seed alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sthdp::checkpoint::{load_checkpoint, save_checkpoint};
use sthdp::corpus::{
    build_corpus, load_trajectories, read_corpus_csv, write_corpus_csv, DiscretizationConfig,
};
use sthdp::eval::{evaluate, anomaly_rank, make_holdout, read_pairs_csv, TimeWeights};
use sthdp::gibbs::{ProgressRecord, Sampler, SamplerConfig};
use sthdp::model::{export_plot_data, extract_model, load_model, save_model};
use sthdp::synthgrid::{generate, write_labels_csv, GridGroundTruth};
use sthdp::{Error, Result};

/// Every knob of a run, serializable so outputs carry their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    /// Motion-word geometry used by `ingest`.
    discretization: DiscretizationConfig,
    /// Document window in seconds used by `ingest`.
    document_window_secs: f64,
    sampler: SamplerConfig,
    holdout_fraction: f64,
    holdout_seed: u64,
    /// Iterations between checkpoints during `train`.
    checkpoint_period: u32,
    /// Topics with fewer observations are flagged low-support.
    support_floor: u64,
    synth: GridGroundTruth,
    synth_seed: u64,
    /// Anomalies and eval reports keep this many top entries.
    top_n: usize,
    /// Grid points per exported activity curve.
    plot_resolution: usize,
    time_weights: TimeWeights,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            discretization: DiscretizationConfig::new(500.0, 500.0),
            document_window_secs: 60.0,
            sampler: SamplerConfig::default(),
            holdout_fraction: 0.10,
            holdout_seed: 0,
            checkpoint_period: 100,
            support_floor: 10,
            synth: GridGroundTruth::default(),
            synth_seed: 0,
            top_n: 10,
            plot_resolution: 200,
            time_weights: TimeWeights::PerTopic,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sthdp",
    about = "Spatio-temporal topic models over trajectory corpora",
    version
)]
struct Cli {
    /// JSON run configuration; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed: sets the sampler, synthetic, and holdout seeds at once.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override one config key by dotted path, e.g.
    /// --set sampler.total_iters=200 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic grid corpus with ground-truth labels.
    Synth,
    /// Convert a raw trajectory file into a motion-word corpus CSV.
    Ingest {
        /// Trajectory file: lines `traj_id t x y`.
        #[arg(long)]
        trajectories: PathBuf,
    },
    /// Train a model on a corpus CSV, writing checkpoints, a progress log,
    /// and the final model.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Resume from a checkpoint instead of initializing fresh; the
        /// checkpointed configuration and RNG position are used verbatim.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score held-out data under a trained model, optionally against
    /// labeled trajectory pairs.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// CSV `traj_a,traj_b,same` of labeled pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Rank trajectories from least to most typical.
    Anomalies {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Entries to report; larger than the trajectory count means all.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Export per-topic activity curves as CSV plus an index manifest.
    ExportPlots {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for configuration problems, 4 for numerical failures, 3 for every
/// input/output failure class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    fs::create_dir_all(&cli.out)?;
    write_resolved_config(&config, &cli.out)?;
    match &cli.command {
        Command::Synth => cmd_synth(&config, &cli.out),
        Command::Ingest { trajectories } => cmd_ingest(&config, trajectories, &cli.out),
        Command::Train { corpus, resume } => {
            cmd_train(&config, corpus, resume.as_deref(), &cli.out)
        }
        Command::Eval {
            model,
            corpus,
            pairs,
        } => cmd_eval(&config, model, corpus, pairs.as_deref(), &cli.out),
        Command::Anomalies { model, corpus, top } => {
            cmd_anomalies(&config, model, corpus, *top, &cli.out)
        }
        Command::ExportPlots { model, resolution } => {
            cmd_export_plots(&config, model, *resolution, &cli.out)
        }
    }
}

/// File config (or defaults), then `--set` overrides, then `--seed`.
fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    config = apply_overrides(config, &cli.sets)?;
    if let Some(seed) = cli.seed {
        config.sampler.seed = seed;
        config.synth_seed = seed;
        config.holdout_seed = seed;
    }
    config.sampler.validate()?;
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout_fraction must lie in (0,1), got {}",
            config.holdout_fraction
        )));
    }
    if config.checkpoint_period < 1 {
        return Err(Error::Config("checkpoint_period must be at least 1".into()));
    }
    if config.plot_resolution < 2 {
        return Err(Error::Config("plot_resolution must be at least 2".into()));
    }
    Ok(config)
}

/// Rewrites config keys through their JSON representation. Keys must
/// already exist (no silent typos); values parse as JSON with a fallback
/// to bare strings.
fn apply_overrides(config: RunConfig, sets: &[String]) -> Result<RunConfig> {
    if sets.is_empty() {
        return Ok(config);
    }
    let mut tree = serde_json::to_value(&config)?;
    for setting in sets {
        let (key, raw) = setting.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set needs KEY=VALUE, got '{setting}'"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let pointer = format!("/{}", key.replace('.', "/"));
        let slot = tree
            .pointer_mut(&pointer)
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        *slot = value;
    }
    serde_json::from_value(tree).map_err(|e| Error::Config(format!("--set produced an invalid config: {e}")))
}

fn write_resolved_config(config: &RunConfig, out: &Path) -> Result<()> {
    let path = out.join("config.resolved.json");
    let json = serde_json::to_string_pretty(config)?;
    fs::write(&path, json + "\n")?;
    Ok(())
}

fn cmd_synth(config: &RunConfig, out: &Path) -> Result<()> {
    let (corpus, labels) = generate(&config.synth, config.synth_seed);
    let corpus_path = out.join("corpus.csv");
    let labels_path = out.join("labels.csv");
    write_corpus_csv(&corpus, &corpus_path)?;
    write_labels_csv(&labels, &labels_path)?;
    println!(
        "wrote {} observations in {} documents to {} (labels: {})",
        corpus.total_observations(),
        corpus.documents.len(),
        corpus_path.display(),
        labels_path.display()
    );
    Ok(())
}

fn cmd_ingest(config: &RunConfig, trajectories: &Path, out: &Path) -> Result<()> {
    let loaded = load_trajectories(trajectories)?;
    let (corpus, drops) = build_corpus(
        &loaded.trajectories,
        &config.discretization,
        config.document_window_secs,
    );
    let corpus = corpus.ok_or_else(|| {
        Error::Malformed("no trajectory sample survived discretization".into())
    })?;
    let corpus_path = out.join("corpus.csv");
    write_corpus_csv(&corpus, &corpus_path)?;
    println!(
        "wrote {} observations in {} documents to {} ({} stationary and {} out-of-bounds samples dropped)",
        corpus.total_observations(),
        corpus.documents.len(),
        corpus_path.display(),
        drops.stationary,
        drops.out_of_bounds
    );
    Ok(())
}

fn cmd_train(
    config: &RunConfig,
    corpus_path: &Path,
    resume: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let corpus = read_corpus_csv(corpus_path)?;
    let mut sampler = match resume {
        Some(checkpoint) => load_checkpoint(&corpus, checkpoint)?,
        None => Sampler::new(&corpus, config.sampler.clone())?,
    };

    let progress_path = out.join("progress.tsv");
    let mut progress = std::io::BufWriter::new(if resume.is_some() {
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&progress_path)?
    } else {
        let mut f = fs::File::create(&progress_path)?;
        writeln!(f, "{}", ProgressRecord::TSV_HEADER)?;
        f
    });

    let mut failure: Option<Error> = None;
    let period = config.checkpoint_period;
    while sampler.iter < sampler.cfg.total_iters && failure.is_none() {
        let record = sampler.step();
        writeln!(progress, "{record}")?;
        if !record.train_pwll.is_finite() {
            failure = Some(Error::Numerical(format!(
                "training likelihood became non-finite at iteration {}",
                record.iter
            )));
            break;
        }
        if record.iter % period == 0 {
            progress.flush()?;
            save_checkpoint(&sampler, &out.join(format!("checkpoint_{:06}.bin", record.iter)))?;
        }
    }
    progress.flush()?;
    if let Some(e) = failure {
        return Err(e);
    }

    save_checkpoint(&sampler, &out.join("checkpoint_final.bin"))?;
    let model = extract_model(&sampler.state, config.support_floor);
    let model_path = out.join("model.bin");
    save_model(&model, &model_path)?;
    println!(
        "trained {} iterations: {} topics, {} time components; model at {}",
        sampler.iter,
        model.word_topics.len(),
        model.time_topics.len(),
        model_path.display()
    );
    Ok(())
}

fn cmd_eval(
    config: &RunConfig,
    model_path: &Path,
    corpus_path: &Path,
    pairs_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let model = load_model(model_path)?;
    let corpus = read_corpus_csv(corpus_path)?;
    let split = make_holdout(&corpus, config.holdout_fraction, config.holdout_seed)?;
    let pairs = pairs_path.map(read_pairs_csv).transpose()?;
    let report = evaluate(
        &model,
        &split,
        config.time_weights,
        config.top_n,
        pairs.as_ref(),
    )?;
    let report_path = out.join("eval.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    println!(
        "per-word log likelihood {:.4} over {} held-out observations ({} topics); report at {}",
        report.per_word_loglik,
        report.n_test_observations,
        report.n_topics,
        report_path.display()
    );
    if let Some(scores) = &report.pair_scores {
        println!(
            "correctness {:.4}, completeness {:.4} ({} pairs excluded)",
            scores.correctness, scores.completeness, scores.excluded_pairs
        );
    }
    Ok(())
}

fn cmd_anomalies(
    config: &RunConfig,
    model_path: &Path,
    corpus_path: &Path,
    top: Option<usize>,
    out: &Path,
) -> Result<()> {
    let model = load_model(model_path)?;
    let corpus = read_corpus_csv(corpus_path)?;
    let mut ranked = anomaly_rank(&model, &corpus, config.time_weights);
    ranked.truncate(top.unwrap_or(config.top_n));
    let path = out.join("anomalies.json");
    fs::write(&path, serde_json::to_string_pretty(&ranked)? + "\n")?;
    println!("trajectory\tscore\tspatial\ttemporal\tn_obs");
    for entry in &ranked {
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}",
            entry.trajectory, entry.score, entry.spatial, entry.temporal, entry.n_obs
        );
    }
    println!("report at {}", path.display());
    Ok(())
}

fn cmd_export_plots(
    config: &RunConfig,
    model_path: &Path,
    resolution: Option<usize>,
    out: &Path,
) -> Result<()> {
    let model = load_model(model_path)?;
    let resolution = resolution.unwrap_or(config.plot_resolution);
    if resolution < 2 {
        return Err(Error::Config("resolution must be at least 2".into()));
    }
    let dir = out.join("plots");
    let written = export_plot_data(&model, &dir, resolution)?;
    println!(
        "wrote {} curve files ({} topics) to {}",
        written.len() - 1,
        model.word_topics.len(),
        dir.display()
    );
    Ok(())
}
