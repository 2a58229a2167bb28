//! End-to-end pipeline behavior: determinism, caching, stage errors and
//! trend detection on generated corpora.

use conceptspace::pipeline::{run_pipeline, run_pipeline_until, RunConfig, Stage};
use conceptspace::synth::{generate_synthetic, Drift, SyntheticSpec};

fn synth_spec(drift: Drift) -> SyntheticSpec {
    SyntheticSpec {
        years: 8,
        docs_per_year: 40,
        baseline_vocab_size: 100,
        new_per_year: 10,
        drift,
        dimension: 128,
        seed: 9,
    }
}

fn training_config(corpus: &std::path::Path, out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::new(corpus, out);
    cfg.set("dim", "16").unwrap();
    cfg.set("epochs", "2").unwrap();
    cfg.set("train_min_count", "1").unwrap();
    cfg.set("min_count", "2").unwrap();
    cfg.set("n", "60").unwrap();
    cfg.set("n_samples", "10").unwrap();
    cfg.set("within_doc_docs", "20").unwrap();
    cfg.set("subgraph_size", "20").unwrap();
    cfg.set("deterministic", "true").unwrap();
    cfg
}

#[test]
fn deterministic_runs_are_byte_identical_and_cache_preserves_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (artifacts, _) = generate_synthetic(&synth_spec(Drift::None), &dir.path().join("synth"))
        .unwrap();
    let out = dir.path().join("run");
    let cfg = training_config(&artifacts.corpus, &out);

    let manifest1 = run_pipeline(&cfg).unwrap();
    let bytes1 = std::fs::read(out.join("manifest.json")).unwrap();
    let files1: Vec<(String, Vec<u8>)> = manifest1
        .artifacts
        .iter()
        .map(|a| (a.path.clone(), std::fs::read(out.join(&a.path)).unwrap()))
        .collect();

    // Cached rerun reuses artifacts and reproduces the manifest.
    let manifest2 = run_pipeline(&cfg).unwrap();
    let bytes2 = std::fs::read(out.join("manifest.json")).unwrap();
    assert_eq!(bytes1, bytes2, "cached rerun changed the manifest");
    assert_eq!(manifest1.config_hash, manifest2.config_hash);

    // Forced recomputation still lands on identical bytes.
    let mut forced = cfg.clone();
    forced.force = true;
    run_pipeline(&forced).unwrap();
    let bytes3 = std::fs::read(out.join("manifest.json")).unwrap();
    assert_eq!(bytes1, bytes3, "forced rerun changed the manifest");
    for (path, content) in &files1 {
        let now = std::fs::read(out.join(path)).unwrap();
        assert_eq!(&now, content, "artifact {path} changed across forced rerun");
    }
}

#[test]
fn missing_corpus_aborts_at_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(dir.path().join("nope.jsonl"), dir.path().join("out"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, "ingest");
    assert_eq!(err.exit_code, 2);
}

#[test]
fn converging_drift_shows_expected_trends() {
    let dir = tempfile::tempdir().unwrap();
    let (artifacts, truth) =
        generate_synthetic(&synth_spec(Drift::Converging), &dir.path().join("synth")).unwrap();
    let out = dir.path().join("run");
    let mut cfg = RunConfig::new(&artifacts.corpus, &out);
    cfg.set("embedding", "pretrained").unwrap();
    cfg.set(
        "pretrained_path",
        artifacts.vectors.to_str().unwrap(),
    )
    .unwrap();
    cfg.set("first_years", artifacts.first_years.to_str().unwrap())
        .unwrap();
    cfg.set("baseline_end", &truth.baseline_years.1.to_string())
        .unwrap();
    cfg.set("analysis_end", &truth.analysis_years.1.to_string())
        .unwrap();
    cfg.set("n", "80").unwrap();
    cfg.set("n_samples", "20").unwrap();
    cfg.set("within_doc_docs", "20").unwrap();
    let manifest = run_pipeline(&cfg).unwrap();

    assert!(
        manifest.trends["new_prior_similarity"] > 0.9,
        "trends: {:?}",
        manifest.trends
    );
    assert!(manifest.trends["delta_ic"] < -0.9, "trends: {:?}", manifest.trends);
    assert_eq!(
        manifest.stages,
        vec!["ingest", "vocab", "embed", "timeline", "metrics", "stats", "report"]
    );
    // Headline artifacts exist.
    for name in [
        "vocabulary.tsv",
        "embeddings.bin",
        "first_years.tsv",
        "mean_similarity_80_20.csv",
        "samples_delta_ic_80_20.csv",
        "ks_mean_similarity_yearly.csv",
        "growth.svg",
    ] {
        assert!(
            manifest.artifacts.iter().any(|a| a.path == name),
            "missing artifact {name}: {:?}",
            manifest.artifacts.iter().map(|a| &a.path).collect::<Vec<_>>()
        );
    }
}

#[test]
fn partial_run_stops_after_requested_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (artifacts, _) = generate_synthetic(&synth_spec(Drift::None), &dir.path().join("synth"))
        .unwrap();
    let out = dir.path().join("out");
    let cfg = training_config(&artifacts.corpus, &out);
    let manifest = run_pipeline_until(&cfg, Stage::Vocab).unwrap();
    assert_eq!(manifest.stages, vec!["ingest", "vocab"]);
    assert!(out.join("vocabulary.tsv").exists());
    assert!(!out.join("embeddings.bin").exists());
}
