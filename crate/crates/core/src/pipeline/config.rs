//! Run configuration: defaults, key-value file parsing, flag overrides.
//!
//! Configuration lives in a plain `key = value` file; command-line flags
//! override file values by calling [`RunConfig::set`] with the same keys.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::CorpusFormat;
use crate::embedding::{EmbeddingFormat, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {message}")]
    BadValue { key: String, message: String },
}

#[derive(Debug, Clone, serde::Serialize)]
pub enum EmbeddingSource {
    /// Train skip-gram vectors on the corpus.
    Train(TrainConfig),
    /// Load pretrained vectors; the vocabulary comes from the file's terms.
    Pretrained {
        path: PathBuf,
        format: EmbeddingFormat,
    },
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub corpus_format: CorpusFormat,
    /// Last baseline year; defaults to the fifth corpus year.
    pub baseline_end: Option<i32>,
    /// Last analysis year; defaults to the last corpus year.
    pub analysis_end: Option<i32>,
    pub min_count: u64,
    pub phrase_threshold: f64,
    pub max_n: usize,
    pub embedding: EmbeddingSource,
    /// Externally supplied `term \t first_year` data, bypassing dating.
    pub first_years_path: Option<PathBuf>,
    pub metric_n: usize,
    pub n_samples: usize,
    pub eps: f64,
    /// Extra subgraph sizes for robustness runs (e.g. 500, 2000, 5000).
    pub robustness_sizes: Vec<usize>,
    pub alpha: f64,
    pub ks_period: usize,
    pub rolling_window: usize,
    pub within_doc_docs: usize,
    pub subgraph_export_size: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Forces sequential, bit-reproducible embedding training.
    pub deterministic: bool,
    /// Ignores cached stage artifacts.
    #[serde(skip)]
    pub force: bool,
}

impl RunConfig {
    pub fn new(corpus_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus_path: corpus_path.into(),
            corpus_format: CorpusFormat::Jsonl,
            baseline_end: None,
            analysis_end: None,
            min_count: 5,
            phrase_threshold: 0.5,
            max_n: 4,
            embedding: EmbeddingSource::Train(TrainConfig::default()),
            first_years_path: None,
            metric_n: 1000,
            n_samples: 100,
            eps: 1e-6,
            robustness_sizes: Vec::new(),
            alpha: 0.05,
            ks_period: 5,
            rolling_window: 5,
            within_doc_docs: 10000,
            subgraph_export_size: 30,
            out_dir: out_dir.into(),
            seed: 42,
            deterministic: false,
            force: false,
        }
    }

    /// Parses a `key = value` file ('#' starts a comment).
    pub fn from_kv_file(path: &Path) -> Result<Self, ConfigError> {
        let content = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_kv_str(&content)
    }

    pub fn from_kv_str(content: &str) -> Result<Self, ConfigError> {
        let mut config = Self::new("", "out");
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine { line: lineno + 1 })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    fn train_mut(&mut self) -> &mut TrainConfig {
        if let EmbeddingSource::Pretrained { .. } = self.embedding {
            self.embedding = EmbeddingSource::Train(TrainConfig::default());
        }
        match &mut self.embedding {
            EmbeddingSource::Train(t) => t,
            EmbeddingSource::Pretrained { .. } => unreachable!(),
        }
    }

    /// Applies one `key = value` setting; command-line flags funnel through
    /// here so they win over file values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                message: e.to_string(),
            })
        }
        match key {
            "corpus" => self.corpus_path = PathBuf::from(value),
            "format" => self.corpus_format = parse(key, value)?,
            "baseline_end" => self.baseline_end = Some(parse(key, value)?),
            "analysis_end" => self.analysis_end = Some(parse(key, value)?),
            "min_count" => self.min_count = parse(key, value)?,
            "phrase_threshold" => self.phrase_threshold = parse(key, value)?,
            "max_n" => self.max_n = parse(key, value)?,
            "embedding" => match value {
                "train" => {
                    if let EmbeddingSource::Pretrained { .. } = self.embedding {
                        self.embedding = EmbeddingSource::Train(TrainConfig::default());
                    }
                }
                "pretrained" => {
                    if let EmbeddingSource::Train(_) = self.embedding {
                        self.embedding = EmbeddingSource::Pretrained {
                            path: PathBuf::new(),
                            format: EmbeddingFormat::Tsv,
                        };
                    }
                }
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.to_string(),
                        message: format!("{other:?} is not train or pretrained"),
                    })
                }
            },
            "pretrained_path" => {
                let format = match &self.embedding {
                    EmbeddingSource::Pretrained { format, .. } => *format,
                    _ => EmbeddingFormat::Tsv,
                };
                self.embedding = EmbeddingSource::Pretrained {
                    path: PathBuf::from(value),
                    format,
                };
            }
            "pretrained_format" => {
                let format: EmbeddingFormat = parse(key, value)?;
                let path = match &self.embedding {
                    EmbeddingSource::Pretrained { path, .. } => path.clone(),
                    _ => PathBuf::new(),
                };
                self.embedding = EmbeddingSource::Pretrained { path, format };
            }
            "first_years" => self.first_years_path = Some(PathBuf::from(value)),
            "dim" => self.train_mut().dim = parse(key, value)?,
            "window" => self.train_mut().window = parse(key, value)?,
            "negatives" => self.train_mut().negatives = parse(key, value)?,
            "epochs" => self.train_mut().epochs = parse(key, value)?,
            "lr_start" => self.train_mut().lr_start = parse(key, value)?,
            "lr_end" => self.train_mut().lr_end = parse(key, value)?,
            "train_min_count" => self.train_mut().min_count = parse(key, value)?,
            "n" => self.metric_n = parse(key, value)?,
            "n_samples" => self.n_samples = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "robustness" => {
                self.robustness_sizes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse("robustness", s.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "alpha" => self.alpha = parse(key, value)?,
            "ks_period" => self.ks_period = parse(key, value)?,
            "rolling_window" => self.rolling_window = parse(key, value)?,
            "within_doc_docs" => self.within_doc_docs = parse(key, value)?,
            "subgraph_size" => self.subgraph_export_size = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "deterministic" => self.deterministic = parse(key, value)?,
            "force" => self.force = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_contract() {
        let c = RunConfig::new("corpus.jsonl", "out");
        assert_eq!(c.min_count, 5);
        assert_eq!(c.phrase_threshold, 0.5);
        assert_eq!(c.max_n, 4);
        assert_eq!(c.metric_n, 1000);
        assert_eq!(c.n_samples, 100);
        assert_eq!(c.eps, 1e-6);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.rolling_window, 5);
        assert_eq!(c.within_doc_docs, 10000);
    }

    #[test]
    fn kv_file_parses_and_flags_override() {
        let content = "
            corpus = data/docs.jsonl
            format = csv          # trailing comment
            baseline_end = 1980
            embedding = pretrained
            pretrained_path = vectors.tsv
            n = 500
            robustness = 500, 2000, 5000
            seed = 7
            deterministic = true
        ";
        let mut c = RunConfig::from_kv_str(content).unwrap();
        assert_eq!(c.corpus_path, PathBuf::from("data/docs.jsonl"));
        assert_eq!(c.corpus_format, crate::corpus::CorpusFormat::Csv);
        assert_eq!(c.baseline_end, Some(1980));
        assert!(matches!(c.embedding, EmbeddingSource::Pretrained { .. }));
        assert_eq!(c.metric_n, 500);
        assert_eq!(c.robustness_sizes, vec![500, 2000, 5000]);
        assert_eq!(c.seed, 7);
        assert!(c.deterministic);
        // Flags win.
        c.set("n", "250").unwrap();
        assert_eq!(c.metric_n, 250);
    }

    #[test]
    fn train_keys_on_pretrained_switch_back_to_training() {
        let mut c = RunConfig::new("x", "out");
        c.set("embedding", "pretrained").unwrap();
        c.set("pretrained_path", "v.tsv").unwrap();
        c.set("dim", "64").unwrap();
        match &c.embedding {
            EmbeddingSource::Train(t) => assert_eq!(t.dim, 64),
            other => panic!("expected train source, got {other:?}"),
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut c = RunConfig::new("x", "out");
        assert!(matches!(
            c.set("nope", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            c.set("seed", "abc"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            RunConfig::from_kv_str("just some words"),
            Err(ConfigError::BadLine { line: 1 })
        ));
    }
}
