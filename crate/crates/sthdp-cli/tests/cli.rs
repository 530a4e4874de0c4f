//! End-to-end runs of the installed binary: the full
//! synth → train → eval → anomalies → export-plots pipeline, checkpoint
//! resume, determinism, and error exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn sthdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sthdp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small fast schedule shared by the pipeline tests.
const FAST: &[&str] = &[
    "--set",
    "sampler.total_iters=14",
    "--set",
    "sampler.burn_in=3",
    "--set",
    "sampler.sm_period=4",
    "--set",
    "sampler.sm_phase_len=12",
    "--set",
    "checkpoint_period=7",
    "--set",
    "synth.docs_per_phase=3",
    "--set",
    "synth.words_per_doc=10",
];

fn fast_args<'a>(rest: &[&'a str]) -> Vec<&'a str> {
    let mut args = Vec::from(FAST);
    args.extend_from_slice(rest);
    args
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = sthdp(&fast_args(&["synth", "--seed", "5", "--out", "run"]), root);
    assert_success(&out);
    assert!(root.join("run/corpus.csv").exists());
    assert!(root.join("run/labels.csv").exists());
    assert!(root.join("run/config.resolved.json").exists());

    let out = sthdp(
        &fast_args(&[
            "train",
            "--seed",
            "5",
            "--corpus",
            "run/corpus.csv",
            "--out",
            "run",
        ]),
        root,
    );
    assert_success(&out);
    assert!(root.join("run/model.bin").exists());
    assert!(root.join("run/checkpoint_000007.bin").exists());
    assert!(root.join("run/checkpoint_000014.bin").exists());
    assert!(root.join("run/checkpoint_final.bin").exists());

    let progress = std::fs::read_to_string(root.join("run/progress.tsv")).unwrap();
    let lines: Vec<&str> = progress.lines().collect();
    assert_eq!(lines.len(), 15, "header plus one row per iteration");
    assert!(lines[0].starts_with("iter\tK\tL\ttrain_pwll"));
    assert!(lines[1].starts_with("1\t"));
    assert!(lines[14].starts_with("14\t"));

    let out = sthdp(
        &fast_args(&[
            "eval",
            "--seed",
            "5",
            "--model",
            "run/model.bin",
            "--corpus",
            "run/corpus.csv",
            "--out",
            "run",
        ]),
        root,
    );
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("run/eval.json")).unwrap())
            .unwrap();
    assert!(report["per_word_loglik"].as_f64().unwrap().is_finite());
    assert!(report["n_topics"].as_u64().unwrap() >= 1);
    assert!(report.get("pair_scores").is_none(), "no pairs supplied");

    let out = sthdp(
        &fast_args(&[
            "anomalies",
            "--model",
            "run/model.bin",
            "--corpus",
            "run/corpus.csv",
            "--top",
            "999",
            "--out",
            "run",
        ]),
        root,
    );
    assert_success(&out);
    let ranked: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("run/anomalies.json")).unwrap())
            .unwrap();
    let entries = ranked.as_array().unwrap();
    assert_eq!(entries.len(), 12, "top larger than trajectory count returns all");
    let scores: Vec<f64> = entries
        .iter()
        .map(|e| e["score"].as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "ascending scores");

    let out = sthdp(
        &fast_args(&[
            "export-plots",
            "--model",
            "run/model.bin",
            "--resolution",
            "37",
            "--out",
            "run",
        ]),
        root,
    );
    assert_success(&out);
    let curve = std::fs::read_to_string(root.join("run/plots/topic_0.csv")).unwrap();
    assert_eq!(curve.lines().count(), 38, "header plus resolution rows");
    assert!(root.join("run/plots/index.json").exists());
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for out_dir in ["a", "b"] {
        let out = sthdp(
            &fast_args(&["synth", "--seed", "9", "--out", out_dir]),
            root,
        );
        assert_success(&out);
        let out = sthdp(
            &fast_args(&[
                "train",
                "--seed",
                "9",
                "--corpus",
                &format!("{out_dir}/corpus.csv"),
                "--out",
                out_dir,
            ]),
            root,
        );
        assert_success(&out);
    }
    for file in ["corpus.csv", "labels.csv", "progress.tsv", "model.bin"] {
        let a = std::fs::read(root.join("a").join(file)).unwrap();
        let b = std::fs::read(root.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn resume_from_checkpoint_matches_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = sthdp(&fast_args(&["synth", "--seed", "2", "--out", "full"]), root);
    assert_success(&out);
    let out = sthdp(
        &fast_args(&[
            "train",
            "--seed",
            "2",
            "--corpus",
            "full/corpus.csv",
            "--out",
            "full",
        ]),
        root,
    );
    assert_success(&out);

    // The mid-run checkpoint restarts in a fresh directory and must land on
    // the same final state.
    std::fs::create_dir(root.join("resumed")).unwrap();
    let out = sthdp(
        &fast_args(&[
            "train",
            "--seed",
            "2",
            "--corpus",
            "full/corpus.csv",
            "--resume",
            "full/checkpoint_000007.bin",
            "--out",
            "resumed",
        ]),
        root,
    );
    assert_success(&out);

    let full_model = std::fs::read(root.join("full/model.bin")).unwrap();
    let resumed_model = std::fs::read(root.join("resumed/model.bin")).unwrap();
    assert_eq!(full_model, resumed_model, "resume diverged from the full run");

    let full_final = std::fs::read(root.join("full/checkpoint_final.bin")).unwrap();
    let resumed_final = std::fs::read(root.join("resumed/checkpoint_final.bin")).unwrap();
    assert_eq!(full_final, resumed_final);

    // The resumed progress log holds exactly the tail rows of the full log.
    let full_progress = std::fs::read_to_string(root.join("full/progress.tsv")).unwrap();
    let resumed_progress = std::fs::read_to_string(root.join("resumed/progress.tsv")).unwrap();
    let full_tail: Vec<&str> = full_progress.lines().skip(8).collect();
    let resumed_rows: Vec<&str> = resumed_progress.lines().collect();
    assert_eq!(full_tail, resumed_rows);
}

#[test]
fn shuffled_times_score_worse_than_the_real_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out = sthdp(
        &[
            "synth",
            "--seed",
            "4",
            "--out",
            "run",
            "--set",
            "synth.docs_per_phase=6",
            "--set",
            "synth.words_per_doc=15",
        ],
        root,
    );
    assert_success(&out);
    let out = sthdp(
        &[
            "train",
            "--seed",
            "4",
            "--corpus",
            "run/corpus.csv",
            "--out",
            "run",
            "--set",
            "sampler.total_iters=50",
            "--set",
            "sampler.burn_in=10",
            "--set",
            "sampler.sm_period=5",
            "--set",
            "sampler.sm_phase_len=40",
        ],
        root,
    );
    assert_success(&out);

    // Reverse the time column across all observations: marginals survive,
    // the word-time coupling does not.
    let corpus = sthdp::corpus::read_corpus_csv(&root.join("run/corpus.csv")).unwrap();
    let mut times: Vec<f64> = corpus
        .documents
        .iter()
        .flatten()
        .map(|o| o.time_word)
        .collect();
    times.reverse();
    let mut it = times.into_iter();
    let shuffled_docs: Vec<Vec<sthdp::corpus::Observation>> = corpus
        .documents
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|o| sthdp::corpus::Observation {
                    time_word: it.next().unwrap(),
                    ..*o
                })
                .collect()
        })
        .collect();
    let shuffled = sthdp::corpus::Corpus::from_documents(shuffled_docs, corpus.vocab_size);
    sthdp::corpus::write_corpus_csv(&shuffled, &root.join("run/shuffled.csv")).unwrap();

    let pwll = |corpus_file: &str, out_dir: &str| -> f64 {
        std::fs::create_dir_all(root.join(out_dir)).unwrap();
        let out = sthdp(
            &[
                "eval",
                "--seed",
                "4",
                "--model",
                "run/model.bin",
                "--corpus",
                corpus_file,
                "--out",
                out_dir,
            ],
            root,
        );
        assert_success(&out);
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(root.join(out_dir).join("eval.json")).unwrap(),
        )
        .unwrap();
        report["per_word_loglik"].as_f64().unwrap()
    };
    let real = pwll("run/corpus.csv", "eval_real");
    let broken = pwll("run/shuffled.csv", "eval_shuffled");
    assert!(
        real > broken,
        "time-shuffled corpus should score worse: real {real}, shuffled {broken}"
    );
}

#[test]
fn error_classes_surface_as_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Unknown config key → configuration failure.
    let out = sthdp(&["synth", "--set", "nope=1", "--out", "x"], root);
    assert_eq!(out.status.code(), Some(2));

    // Invalid sampler schedule → configuration failure.
    let out = sthdp(&["synth", "--set", "sampler.total_iters=0", "--out", "x"], root);
    assert_eq!(out.status.code(), Some(2));

    // Missing corpus file → IO failure.
    let out = sthdp(&["train", "--corpus", "missing.csv", "--out", "x"], root);
    assert_eq!(out.status.code(), Some(3));

    // Malformed config file → configuration failure.
    std::fs::write(root.join("bad.json"), "{ not json").unwrap();
    let out = sthdp(&["synth", "--config", "bad.json", "--out", "x"], root);
    assert_eq!(out.status.code(), Some(2));

    // Garbage model file → IO-class failure.
    std::fs::write(root.join("junk.bin"), b"junk").unwrap();
    std::fs::write(root.join("c.csv"), "# vocab_size=2\ndoc,word,t,traj\n0,0,1.0,0\n").unwrap();
    let out = sthdp(
        &["eval", "--model", "junk.bin", "--corpus", "c.csv", "--out", "x"],
        root,
    );
    assert_eq!(out.status.code(), Some(3));
}
