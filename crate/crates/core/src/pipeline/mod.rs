//! End-to-end orchestration: ingest, vocabulary, embeddings, timeline,
//! metrics, significance tests, report.
//!
//! Every stage hashes its inputs (configuration slice plus upstream artifact
//! digests). When the hash matches the cache from a previous run and the
//! artifacts still verify, the stage reloads its outputs instead of
//! recomputing; downstream results are byte-identical either way. The run
//! manifest records the resolved configuration hash, input digests, artifact
//! checksums and headline trends.

mod config;

pub use config::{ConfigError, EmbeddingSource, RunConfig};

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    detect_phrases, extract_concepts, ingest_documents, segment_tokens, ConceptId, Document,
    IngestStats, PhraseParams, Vocabulary,
};
use crate::embedding::{
    load_binary, load_embeddings, save_binary, train_sgns, EmbeddingMatrix, TrainMode,
};
use crate::metrics::{
    new_concepts_per_document, rolling_new_ratio, sample_subgraph, within_document_similarity,
    yearly_metric_series, MetricKind, MetricPoint, MetricSeries, SeriesParams,
};
use crate::report::{
    emit_samples_csv, emit_series_csv, export_subgraph, read_samples_csv, read_series_csv,
    render_chart, series_file_name, ChartData, ChartKind, ChartSpec,
};
use crate::stats::{ks_matrix, pool_periods, spearman_rho, SignificanceMatrix};
use crate::timeline::{
    export_first_years, first_years_from_extracted, import_first_years, ConceptTimeline,
    FirstYears,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Vocab,
    Embed,
    Timeline,
    Metrics,
    Stats,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Vocab => "vocab",
            Stage::Embed => "embed",
            Stage::Timeline => "timeline",
            Stage::Metrics => "metrics",
            Stage::Stats => "stats",
            Stage::Report => "report",
        }
    }

    /// Process exit code reported when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Ingest => 2,
            Stage::Vocab => 3,
            Stage::Embed => 4,
            Stage::Timeline => 5,
            Stage::Metrics => 6,
            Stage::Stats => 7,
            Stage::Report => 8,
        }
    }

    const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Vocab,
        Stage::Embed,
        Stage::Timeline,
        Stage::Metrics,
        Stage::Stats,
        Stage::Report,
    ];
}

/// A pipeline failure names the stage and lists artifacts written so far.
#[derive(Debug, Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub exit_code: i32,
    pub message: String,
    pub partial_artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.json` at the end of a run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<String>,
    pub artifacts: Vec<FileDigest>,
    /// Spearman rank correlation of each headline metric's yearly means
    /// against the year.
    pub trends: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
struct StageCache {
    input_hash: String,
    artifacts: Vec<FileDigest>,
}

type CacheMap = BTreeMap<String, StageCache>;

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn sha256_str(s: &str) -> String {
    hex(&Sha256::digest(s.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

type Extracted = Vec<(i32, Vec<(ConceptId, u32)>)>;

#[derive(Default)]
struct State {
    docs: Vec<Document>,
    ingest_stats: IngestStats,
    corpus_digest: String,
    year_range: (i32, i32),
    vocab: Option<Vocabulary>,
    matrix: Option<EmbeddingMatrix>,
    extracted: Option<Extracted>,
    first_years: Option<FirstYears>,
    timeline: Option<ConceptTimeline>,
    series: BTreeMap<String, MetricSeries>,
    samples: BTreeMap<String, BTreeMap<i32, Vec<f64>>>,
    matrices: Vec<(String, SignificanceMatrix)>,
    stage_hashes: BTreeMap<&'static str, String>,
    artifacts: Vec<FileDigest>,
    cache: CacheMap,
    executed: Vec<String>,
}

impl State {
    fn fail(&self, stage: Stage, message: impl std::fmt::Display) -> PipelineError {
        PipelineError {
            stage: stage.name(),
            exit_code: stage.exit_code(),
            message: message.to_string(),
            partial_artifacts: self.artifacts.iter().map(|a| a.path.clone()).collect(),
        }
    }

    fn cache_hit(&self, stage: Stage, input_hash: &str, out_dir: &Path) -> bool {
        let Some(entry) = self.cache.get(stage.name()) else {
            return false;
        };
        if entry.input_hash != input_hash {
            return false;
        }
        entry.artifacts.iter().all(|a| {
            let path = out_dir.join(&a.path);
            path.exists() && sha256_file(&path).map(|h| h == a.sha256).unwrap_or(false)
        })
    }

    /// Records freshly written artifacts under the stage's cache entry.
    fn commit_stage(
        &mut self,
        stage: Stage,
        input_hash: String,
        rel_paths: Vec<String>,
        out_dir: &Path,
    ) -> Result<(), PipelineError> {
        let mut digests = Vec::with_capacity(rel_paths.len());
        for rel in rel_paths {
            let sha = sha256_file(&out_dir.join(&rel)).map_err(|e| self.fail(stage, e))?;
            digests.push(FileDigest { path: rel, sha256: sha });
        }
        self.cache.insert(
            stage.name().to_string(),
            StageCache {
                input_hash: input_hash.clone(),
                artifacts: digests.clone(),
            },
        );
        self.artifacts.extend(digests);
        self.stage_hashes.insert(stage.name(), input_hash);
        Ok(())
    }

    /// Adopts a verified cache entry's artifacts without rewriting them.
    fn adopt_cached(&mut self, stage: Stage, input_hash: String) {
        if let Some(entry) = self.cache.get(stage.name()) {
            self.artifacts.extend(entry.artifacts.iter().cloned());
        }
        self.stage_hashes.insert(stage.name(), input_hash);
    }

    fn upstream_hash(&self, stage: Stage) -> &str {
        self.stage_hashes
            .get(stage.name())
            .map(String::as_str)
            .unwrap_or("")
    }
}

fn ensure_extracted(cfg: &RunConfig, st: &mut State) {
    if st.extracted.is_some() {
        return;
    }
    let vocab = st.vocab.as_ref().expect("vocab before extraction");
    let extracted: Extracted = st
        .docs
        .par_iter()
        .map(|d| (d.year, extract_concepts(d, vocab)))
        .collect();
    st.extracted = Some(extracted);
    let _ = cfg;
}

fn json_hash(value: &serde_json::Value) -> String {
    sha256_str(&value.to_string())
}

fn stage_ingest(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Ingest;
    st.corpus_digest =
        sha256_file(&cfg.corpus_path).map_err(|e| {
            st.fail(stage, format!("cannot read corpus {}: {e}", cfg.corpus_path.display()))
        })?;
    let reader = ingest_documents(&cfg.corpus_path, cfg.corpus_format)
        .map_err(|e| st.fail(stage, e))?;
    let (docs, stats) = reader.collect_all();
    if docs.is_empty() {
        return Err(st.fail(stage, "corpus contains no valid documents"));
    }
    let min_year = docs.iter().map(|d| d.year).min().unwrap();
    let max_year = docs.iter().map(|d| d.year).max().unwrap();
    st.docs = docs;
    st.ingest_stats = stats;
    st.year_range = (min_year, max_year);

    let input_hash = json_hash(&serde_json::json!({
        "corpus": st.corpus_digest,
        "format": cfg.corpus_format,
    }));
    let artifact = serde_json::json!({
        "documents": stats.produced,
        "skipped": stats.skipped,
        "min_year": min_year,
        "max_year": max_year,
        "corpus_sha256": st.corpus_digest,
    });
    if st.cache_hit(stage, &input_hash, &cfg.out_dir) && !cfg.force {
        st.adopt_cached(stage, input_hash);
    } else {
        let rel = "ingest.json".to_string();
        std::fs::write(
            cfg.out_dir.join(&rel),
            serde_json::to_string_pretty(&artifact).expect("json"),
        )
        .map_err(|e| st.fail(stage, e))?;
        st.commit_stage(stage, input_hash, vec![rel], &cfg.out_dir)?;
    }
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn pretrained_digest(cfg: &RunConfig, st: &State, stage: Stage) -> Result<Option<String>, PipelineError> {
    match &cfg.embedding {
        EmbeddingSource::Pretrained { path, .. } => Ok(Some(
            sha256_file(path).map_err(|e| {
                st.fail(stage, format!("cannot read pretrained vectors {}: {e}", path.display()))
            })?,
        )),
        EmbeddingSource::Train(_) => Ok(None),
    }
}

fn stage_vocab(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Vocab;
    let pretrained = pretrained_digest(cfg, st, stage)?;
    let input_hash = json_hash(&serde_json::json!({
        "upstream": st.upstream_hash(Stage::Ingest),
        "min_count": cfg.min_count,
        "phrase_threshold": cfg.phrase_threshold,
        "max_n": cfg.max_n,
        "pretrained": pretrained,
    }));
    let rel = "vocabulary.tsv".to_string();
    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        let vocab = Vocabulary::import_tsv(&cfg.out_dir.join(&rel))
            .map_err(|e| st.fail(stage, e))?;
        st.vocab = Some(vocab);
        st.adopt_cached(stage, input_hash);
    } else {
        let vocab = match &cfg.embedding {
            EmbeddingSource::Pretrained { path, format } => {
                let matrix = load_embeddings(path, *format, false)
                    .map_err(|e| st.fail(stage, e))?;
                let mut vocab = Vocabulary::from_terms(matrix.terms().to_vec())
                    .map_err(|e| st.fail(stage, e))?;
                st.matrix = Some(matrix);
                // Frequencies are observed usage counts under this vocabulary.
                st.vocab = Some(vocab.clone());
                ensure_extracted(cfg, st);
                let mut freqs = vec![0u64; vocab.len()];
                for (_, concepts) in st.extracted.as_ref().unwrap() {
                    for (id, count) in concepts {
                        freqs[*id as usize] += u64::from(*count);
                    }
                }
                vocab.set_frequencies(&freqs);
                vocab
            }
            EmbeddingSource::Train(_) => {
                let sentences: Vec<crate::corpus::TokenizedSentence> = st
                    .docs
                    .par_iter()
                    .flat_map_iter(|d| d.sentences())
                    .collect();
                detect_phrases(
                    &sentences,
                    &PhraseParams {
                        max_n: cfg.max_n,
                        score_threshold: cfg.phrase_threshold,
                        min_count: cfg.min_count,
                    },
                )
                .map_err(|e| st.fail(stage, e))?
            }
        };
        if vocab.is_empty() {
            return Err(st.fail(stage, "vocabulary is empty; lower min_count or check corpus"));
        }
        vocab.export_tsv(&cfg.out_dir.join(&rel)).map_err(|e| st.fail(stage, e))?;
        st.vocab = Some(vocab);
        st.commit_stage(stage, input_hash, vec![rel], &cfg.out_dir)?;
    }
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn stage_embed(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Embed;
    let pretrained = pretrained_digest(cfg, st, stage)?;
    let source = match &cfg.embedding {
        EmbeddingSource::Train(t) => serde_json::json!({
            "train": t,
            "deterministic": cfg.deterministic,
            "seed": cfg.seed,
        }),
        EmbeddingSource::Pretrained { format, .. } => serde_json::json!({
            "pretrained": pretrained,
            "format": format,
        }),
    };
    let input_hash = json_hash(&serde_json::json!({
        "upstream": st.upstream_hash(Stage::Vocab),
        "source": source,
    }));
    let rel = "embeddings.bin".to_string();
    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        let matrix = load_binary(&cfg.out_dir.join(&rel)).map_err(|e| st.fail(stage, e))?;
        st.matrix = Some(matrix);
        st.adopt_cached(stage, input_hash);
    } else {
        let vocab = st.vocab.as_ref().expect("vocab stage ran");
        let matrix = match &cfg.embedding {
            EmbeddingSource::Pretrained { path, format } => match st.matrix.take() {
                Some(m) => m,
                None => load_embeddings(path, *format, false).map_err(|e| st.fail(stage, e))?,
            },
            EmbeddingSource::Train(train) => {
                let sentences: Vec<Vec<ConceptId>> = st
                    .docs
                    .par_iter()
                    .flat_map_iter(|d| {
                        d.sentences()
                            .into_iter()
                            .map(|s| segment_tokens(&s.tokens, vocab))
                    })
                    .filter(|s| !s.is_empty())
                    .collect();
                let mut train = train.clone();
                train.seed = crate::seeds::derive(cfg.seed, &[crate::seeds::label("train")]);
                let mode = if cfg.deterministic {
                    TrainMode::Deterministic
                } else {
                    TrainMode::Parallel
                };
                train_sgns(&sentences, vocab, &train, mode).map_err(|e| st.fail(stage, e))?
            }
        };
        if matrix.len() != vocab.len() {
            return Err(st.fail(
                stage,
                format!(
                    "embedding rows ({}) do not match vocabulary size ({})",
                    matrix.len(),
                    vocab.len()
                ),
            ));
        }
        save_binary(&matrix, &cfg.out_dir.join(&rel)).map_err(|e| st.fail(stage, e))?;
        st.matrix = Some(matrix);
        st.commit_stage(stage, input_hash, vec![rel], &cfg.out_dir)?;
    }
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn resolved_range(cfg: &RunConfig, st: &State) -> (i32, i32) {
    let baseline_end = cfg.baseline_end.unwrap_or(st.year_range.0 + 4);
    let analysis_end = cfg.analysis_end.unwrap_or(st.year_range.1);
    (baseline_end, analysis_end)
}

fn stage_timeline(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Timeline;
    let (baseline_end, analysis_end) = resolved_range(cfg, st);
    let external = match &cfg.first_years_path {
        Some(p) => Some(sha256_file(p).map_err(|e| {
            st.fail(stage, format!("cannot read first-year data {}: {e}", p.display()))
        })?),
        None => None,
    };
    let input_hash = json_hash(&serde_json::json!({
        "upstream": st.upstream_hash(Stage::Vocab),
        "corpus": st.corpus_digest,
        "baseline_end": baseline_end,
        "analysis_end": analysis_end,
        "external_first_years": external,
    }));
    let rel_fy = "first_years.tsv".to_string();
    let rel_meta = "timeline.json".to_string();
    let vocab = st.vocab.clone().expect("vocab stage ran");
    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        let fy = import_first_years(&cfg.out_dir.join(&rel_fy), &vocab)
            .map_err(|e| st.fail(stage, e))?;
        let timeline = ConceptTimeline::build(&fy, baseline_end, analysis_end)
            .map_err(|e| st.fail(stage, e))?;
        st.first_years = Some(fy);
        st.timeline = Some(timeline);
        st.adopt_cached(stage, input_hash);
    } else {
        let fy = match &cfg.first_years_path {
            Some(p) => import_first_years(p, &vocab).map_err(|e| st.fail(stage, e))?,
            None => {
                ensure_extracted(cfg, st);
                first_years_from_extracted(st.extracted.as_ref().unwrap(), vocab.len())
            }
        };
        let timeline = ConceptTimeline::build(&fy, baseline_end, analysis_end)
            .map_err(|e| st.fail(stage, e))?;
        export_first_years(&fy, &vocab, &cfg.out_dir.join(&rel_fy))
            .map_err(|e| st.fail(stage, e))?;
        ensure_extracted(cfg, st);
        let coverage =
            timeline.baseline_coverage_from_extracted(st.extracted.as_ref().unwrap());
        let per_year: Vec<serde_json::Value> = timeline
            .analysis_years()
            .map(|y| {
                serde_json::json!({
                    "year": y,
                    "new": timeline.new_in(y).unwrap().len(),
                    "cumulative": timeline.cumulative(y).unwrap().len(),
                    "new_share": timeline.new_share(y).unwrap(),
                })
            })
            .collect();
        let meta = serde_json::json!({
            "baseline_end": baseline_end,
            "analysis_end": analysis_end,
            "baseline_size": timeline.baseline().len(),
            "baseline_coverage": coverage,
            "years": per_year,
        });
        std::fs::write(
            cfg.out_dir.join(&rel_meta),
            serde_json::to_string_pretty(&meta).expect("json"),
        )
        .map_err(|e| st.fail(stage, e))?;
        st.first_years = Some(fy);
        st.timeline = Some(timeline);
        st.commit_stage(stage, input_hash, vec![rel_fy, rel_meta], &cfg.out_dir)?;
    }
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn sampled_sizes(cfg: &RunConfig) -> Vec<usize> {
    let mut sizes = vec![cfg.metric_n];
    for s in &cfg.robustness_sizes {
        if !sizes.contains(s) {
            sizes.push(*s);
        }
    }
    sizes
}

fn growth_series(timeline: &ConceptTimeline) -> (MetricSeries, MetricSeries) {
    let mut cumulative = Vec::new();
    let mut share = Vec::new();
    for y in timeline.analysis_years() {
        let c = timeline.cumulative(y).unwrap().len();
        cumulative.push(MetricPoint {
            year: y,
            mean: Some(c as f64),
            std: None,
            n_samples: c as u32,
        });
        share.push(MetricPoint {
            year: y,
            mean: Some(timeline.new_share(y).unwrap()),
            std: None,
            n_samples: c as u32,
        });
    }
    (
        MetricSeries {
            metric: "cumulative_concepts".into(),
            points: cumulative,
        },
        MetricSeries {
            metric: "new_share".into(),
            points: share,
        },
    )
}

fn stage_metrics(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Metrics;
    let input_hash = json_hash(&serde_json::json!({
        "embed": st.upstream_hash(Stage::Embed),
        "timeline": st.upstream_hash(Stage::Timeline),
        "n": cfg.metric_n,
        "n_samples": cfg.n_samples,
        "eps": cfg.eps,
        "robustness": cfg.robustness_sizes,
        "seed": cfg.seed,
        "rolling_window": cfg.rolling_window,
        "within_doc_docs": cfg.within_doc_docs,
    }));

    let sizes = sampled_sizes(cfg);
    let mut rels: Vec<String> = Vec::new();
    for n in &sizes {
        for kind in MetricKind::ALL {
            rels.push(series_file_name(kind.name(), *n, cfg.n_samples, "csv"));
            rels.push(format!(
                "samples_{}",
                series_file_name(kind.name(), *n, cfg.n_samples, "csv")
            ));
        }
    }
    let aux_rels = [
        "cumulative_concepts.csv",
        "new_share.csv",
        "new_concepts_per_doc.csv",
        "concepts_per_doc.csv",
        "rolling_new_ratio.csv",
        "within_doc_similarity.csv",
    ];
    rels.extend(aux_rels.iter().map(|s| s.to_string()));

    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        for n in &sizes {
            for kind in MetricKind::ALL {
                let stem = series_file_name(kind.name(), *n, cfg.n_samples, "csv");
                let series = read_series_csv(&cfg.out_dir.join(&stem))
                    .map_err(|e| st.fail(stage, e))?;
                st.series.insert(stem.trim_end_matches(".csv").to_string(), series);
                let sp = format!("samples_{stem}");
                let samples =
                    read_samples_csv(&cfg.out_dir.join(&sp)).map_err(|e| st.fail(stage, e))?;
                st.samples
                    .insert(format!("{}_{n}", kind.name()), samples);
            }
        }
        for rel in &aux_rels {
            let series =
                read_series_csv(&cfg.out_dir.join(rel)).map_err(|e| st.fail(stage, e))?;
            st.series
                .insert(rel.trim_end_matches(".csv").to_string(), series);
        }
        st.adopt_cached(stage, input_hash);
        st.executed.push(stage.name().to_string());
        return Ok(());
    }

    let timeline = st.timeline.clone().expect("timeline stage ran");
    ensure_extracted(cfg, st);
    let matrix = st.matrix.as_ref().expect("embed stage ran");
    for n in &sizes {
        let params = SeriesParams {
            n: *n,
            n_samples: cfg.n_samples,
            eps: cfg.eps,
            base_seed: cfg.seed,
        };
        for kind in MetricKind::ALL {
            let (series, samples) = yearly_metric_series(&timeline, matrix, kind, &params)
                .map_err(|e| st.fail(stage, e))?;
            let stem = series_file_name(kind.name(), *n, cfg.n_samples, "csv");
            emit_series_csv(&series, &cfg.out_dir.join(&stem))
                .map_err(|e| st.fail(stage, e))?;
            emit_samples_csv(&samples.per_year, &cfg.out_dir.join(format!("samples_{stem}")))
                .map_err(|e| st.fail(stage, e))?;
            st.series
                .insert(stem.trim_end_matches(".csv").to_string(), series);
            st.samples
                .insert(format!("{}_{n}", kind.name()), samples.per_year);
        }
    }

    let extracted = st.extracted.as_ref().unwrap();
    let (cumulative, share) = growth_series(&timeline);
    let (new_per_doc, total_per_doc) = new_concepts_per_document(extracted, &timeline);
    let rolling = rolling_new_ratio(extracted, &timeline, cfg.rolling_window);
    let within = within_document_similarity(
        extracted,
        &timeline,
        matrix,
        cfg.within_doc_docs,
        cfg.seed,
    )
    .map_err(|e| st.fail(stage, e))?;
    for (rel, series) in aux_rels.iter().zip([
        cumulative,
        share,
        new_per_doc,
        total_per_doc,
        rolling,
        within,
    ]) {
        emit_series_csv(&series, &cfg.out_dir.join(rel)).map_err(|e| st.fail(stage, e))?;
        st.series
            .insert(rel.trim_end_matches(".csv").to_string(), series);
    }
    st.commit_stage(stage, input_hash, rels, &cfg.out_dir)?;
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn stage_stats(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Stats;
    let input_hash = json_hash(&serde_json::json!({
        "metrics": st.upstream_hash(Stage::Metrics),
        "alpha": cfg.alpha,
        "ks_period": cfg.ks_period,
    }));
    let mut rels = Vec::new();
    type Planned = Vec<(String, Vec<(String, Vec<f64>)>)>;
    let mut planned: Planned = Vec::new();
    for kind in MetricKind::ALL {
        let Some(samples) = st.samples.get(&format!("{}_{}", kind.name(), cfg.metric_n)) else {
            continue;
        };
        let yearly: Vec<(String, Vec<f64>)> = samples
            .iter()
            .map(|(y, v)| (y.to_string(), v.clone()))
            .collect();
        if yearly.len() >= 2 {
            planned.push((format!("ks_{}_yearly", kind.name()), yearly));
        }
        let pooled = pool_periods(samples, cfg.ks_period);
        if pooled.len() >= 2 {
            planned.push((format!("ks_{}_pooled", kind.name()), pooled));
        }
    }
    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        // Matrices are cheap to recompute and only feed the report stage.
        for (name, samples) in &planned {
            let m = ks_matrix(samples, cfg.alpha).map_err(|e| st.fail(stage, e))?;
            st.matrices.push((name.clone(), m));
        }
        st.adopt_cached(stage, input_hash);
    } else {
        for (name, samples) in &planned {
            let m = ks_matrix(samples, cfg.alpha).map_err(|e| st.fail(stage, e))?;
            let rel = format!("{name}.csv");
            let rel_sig = format!("{name}_significant.csv");
            m.export_csv(&cfg.out_dir.join(&rel)).map_err(|e| st.fail(stage, e))?;
            m.export_significance_csv(&cfg.out_dir.join(&rel_sig))
                .map_err(|e| st.fail(stage, e))?;
            rels.push(rel);
            rels.push(rel_sig);
            st.matrices.push((name.clone(), m));
        }
        st.commit_stage(stage, input_hash, rels, &cfg.out_dir)?;
    }
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn chart(title: &str, y_label: &str, kind: ChartKind) -> ChartSpec {
    ChartSpec {
        kind,
        title: title.to_string(),
        x_label: "year".to_string(),
        y_label: y_label.to_string(),
    }
}

fn stage_report(cfg: &RunConfig, st: &mut State) -> Result<(), PipelineError> {
    let stage = Stage::Report;
    let input_hash = json_hash(&serde_json::json!({
        "metrics": st.upstream_hash(Stage::Metrics),
        "stats": st.upstream_hash(Stage::Stats),
        "subgraph_size": cfg.subgraph_export_size,
    }));
    if !cfg.force && st.cache_hit(stage, &input_hash, &cfg.out_dir) {
        st.adopt_cached(stage, input_hash);
        st.executed.push(stage.name().to_string());
        return Ok(());
    }
    let mut rels = Vec::new();
    let write_svg = |st: &State, rel: String, svg: String| -> Result<String, PipelineError> {
        std::fs::write(cfg.out_dir.join(&rel), svg).map_err(|e| st.fail(stage, e))?;
        Ok(rel)
    };

    // Concept-space growth: cumulative count with the new-concept share on
    // the second axis.
    if let (Some(cumulative), Some(share)) = (
        st.series.get("cumulative_concepts"),
        st.series.get("new_share"),
    ) {
        let svg = render_chart(
            &chart("Concept space growth", "concepts", ChartKind::DualAxisLine),
            &ChartData::DualAxis {
                left: cumulative,
                right: share,
            },
        )
        .map_err(|e| st.fail(stage, e))?;
        rels.push(write_svg(st, "growth.svg".to_string(), svg)?);
    }

    for n in sampled_sizes(cfg) {
        for (kind, label) in [
            (MetricKind::MeanSimilarity, "mean pairwise similarity"),
            (MetricKind::NewPriorSimilarity, "mean new-prior similarity"),
            (MetricKind::DeltaIc, "additional information content (bits)"),
        ] {
            let stem = series_file_name(kind.name(), n, cfg.n_samples, "");
            let stem = stem.trim_end_matches('.').to_string();
            if let Some(series) = st.series.get(&stem) {
                if series.defined().is_empty() {
                    continue;
                }
                let title = format!("{} (n={n}, {} samples)", kind.name(), cfg.n_samples);
                let svg = render_chart(
                    &chart(&title, label, ChartKind::LineWithErrorBars),
                    &ChartData::Series(vec![series]),
                )
                .map_err(|e| st.fail(stage, e))?;
                rels.push(write_svg(
                    st,
                    series_file_name(kind.name(), n, cfg.n_samples, "svg"),
                    svg,
                )?);
            }
        }
        // Both similarity trends on one canvas.
        let a = st.series.get(&format!("mean_similarity_{n}_{}", cfg.n_samples));
        let b = st
            .series
            .get(&format!("new_prior_similarity_{n}_{}", cfg.n_samples));
        if let (Some(a), Some(b)) = (a, b) {
            if !a.defined().is_empty() || !b.defined().is_empty() {
                let svg = render_chart(
                    &chart("Similarity trends", "cosine similarity", ChartKind::LineWithErrorBars),
                    &ChartData::Series(vec![a, b]),
                )
                .map_err(|e| st.fail(stage, e))?;
                rels.push(write_svg(
                    st,
                    format!("similarity_trends_{n}_{}.svg", cfg.n_samples),
                    svg,
                )?);
            }
        }
    }

    for (name, series, label) in [
        ("rolling_new_ratio", st.series.get("rolling_new_ratio"), "share of new concepts"),
        (
            "within_doc_similarity",
            st.series.get("within_doc_similarity"),
            "cosine similarity",
        ),
    ] {
        if let Some(series) = series {
            if series.defined().is_empty() {
                continue;
            }
            let svg = render_chart(
                &chart(name, label, ChartKind::LineWithErrorBars),
                &ChartData::Series(vec![series]),
            )
            .map_err(|e| st.fail(stage, e))?;
            rels.push(write_svg(st, format!("{name}.svg"), svg)?);
        }
    }
    if let (Some(new_pd), Some(tot_pd)) = (
        st.series.get("new_concepts_per_doc"),
        st.series.get("concepts_per_doc"),
    ) {
        if !new_pd.defined().is_empty() {
            let svg = render_chart(
                &chart("Concepts per document", "count", ChartKind::LineWithErrorBars),
                &ChartData::Series(vec![new_pd, tot_pd]),
            )
            .map_err(|e| st.fail(stage, e))?;
            rels.push(write_svg(st, "concepts_per_doc.svg".to_string(), svg)?);
        }
    }

    for (name, matrix) in &st.matrices {
        let svg = render_chart(
            &chart(name, "", ChartKind::Heatmap),
            &ChartData::Significance(matrix),
        )
        .map_err(|e| st.fail(stage, e))?;
        rels.push(write_svg(st, format!("{name}.svg"), svg)?);
    }

    // Small share-preserving subgraph snapshot from the last analysis year.
    let timeline = st.timeline.as_ref().expect("timeline stage ran");
    let matrix = st.matrix.as_ref().expect("embed stage ran");
    let year = timeline.analysis_end();
    let seed = crate::seeds::derive(
        cfg.seed,
        &[crate::seeds::label("subgraph-export"), year as u64],
    );
    let sample = sample_subgraph(timeline, year, cfg.subgraph_export_size, seed)
        .map_err(|e| st.fail(stage, e))?;
    let rel_csv = format!("subgraph_{year}_{}.csv", cfg.subgraph_export_size);
    let rel_svg = format!("subgraph_{year}_{}.svg", cfg.subgraph_export_size);
    export_subgraph(
        &sample,
        matrix,
        &cfg.out_dir.join(&rel_csv),
        &cfg.out_dir.join(&rel_svg),
        None,
    )
    .map_err(|e| st.fail(stage, e))?;
    rels.push(rel_csv);
    rels.push(rel_svg);

    st.commit_stage(stage, input_hash, rels, &cfg.out_dir)?;
    st.executed.push(stage.name().to_string());
    Ok(())
}

fn config_hash(cfg: &RunConfig, st: &State) -> String {
    let params = serde_json::to_value(cfg).expect("config serializes");
    let mut map = serde_json::Map::new();
    map.insert("params".into(), params);
    map.insert("corpus_sha256".into(), st.corpus_digest.clone().into());
    // Paths are recorded but identity comes from content digests.
    json_hash(&serde_json::Value::Object(map))
}

/// Runs stages through `until`, writing artifacts, cache and manifest under
/// the configured output directory.
pub fn run_pipeline_until(cfg: &RunConfig, until: Stage) -> Result<RunManifest, PipelineError> {
    let mut st = State::default();
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| st.fail(Stage::Ingest, e))?;
    let cache_path = cfg.out_dir.join("cache.json");
    if cache_path.exists() {
        if let Ok(content) = std::fs::read_to_string(&cache_path) {
            if let Ok(cache) = serde_json::from_str::<CacheMap>(&content) {
                st.cache = cache;
            }
        }
    }

    for stage in Stage::ALL {
        if stage > until {
            break;
        }
        match stage {
            Stage::Ingest => stage_ingest(cfg, &mut st)?,
            Stage::Vocab => stage_vocab(cfg, &mut st)?,
            Stage::Embed => stage_embed(cfg, &mut st)?,
            Stage::Timeline => stage_timeline(cfg, &mut st)?,
            Stage::Metrics => stage_metrics(cfg, &mut st)?,
            Stage::Stats => stage_stats(cfg, &mut st)?,
            Stage::Report => stage_report(cfg, &mut st)?,
        }
    }

    let mut inputs = vec![FileDigest {
        path: cfg.corpus_path.display().to_string(),
        sha256: st.corpus_digest.clone(),
    }];
    if let EmbeddingSource::Pretrained { path, .. } = &cfg.embedding {
        if let Ok(sha) = sha256_file(path) {
            inputs.push(FileDigest {
                path: path.display().to_string(),
                sha256: sha,
            });
        }
    }
    if let Some(p) = &cfg.first_years_path {
        if let Ok(sha) = sha256_file(p) {
            inputs.push(FileDigest {
                path: p.display().to_string(),
                sha256: sha,
            });
        }
    }

    let mut trends = BTreeMap::new();
    for kind in MetricKind::ALL {
        let stem = format!("{}_{}_{}", kind.name(), cfg.metric_n, cfg.n_samples);
        if let Some(series) = st.series.get(&stem) {
            let defined = series.defined();
            if defined.len() >= 2 {
                let years: Vec<f64> = defined.iter().map(|(y, _)| f64::from(*y)).collect();
                let means: Vec<f64> = defined.iter().map(|(_, m)| *m).collect();
                trends.insert(kind.name().to_string(), spearman_rho(&years, &means));
            }
        }
    }

    let mut artifacts = st.artifacts.clone();
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    artifacts.dedup();
    let manifest = RunManifest {
        config_hash: config_hash(cfg, &st),
        seed: cfg.seed,
        inputs,
        stages: st.executed.clone(),
        artifacts,
        trends,
    };
    let fail_report = |e: std::io::Error| st.fail(until, e);
    std::fs::write(
        &cache_path,
        serde_json::to_string_pretty(&st.cache).expect("cache serializes"),
    )
    .map_err(fail_report)?;
    std::fs::write(
        cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| st.fail(until, e))?;
    Ok(manifest)
}

/// Runs the full pipeline.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest, PipelineError> {
    run_pipeline_until(cfg, Stage::Report)
}
