//! Synthetic corpus generator with known ground truth.
//!
//! Emits a JSONL corpus, a pretrained vector TSV, a first-appearance TSV and
//! a JSON sidecar recording the construction: every concept's true first
//! year and, per analysis year, the expected maximum similarity of that
//! year's new concepts to the prior set.
//!
//! Geometry: every vector carries a weight along a fixed centroid direction,
//! so unrelated concepts meet at a common similarity floor. Each new concept
//! sits at an exact target similarity `s` to a randomly chosen baseline
//! anchor (`v = s*p + c*w` with `w` orthogonal to `p`), and `w` is mixed so
//! the new vector's centroid weight scales with the schedule. The anchor
//! pins the maximum similarity to prior concepts (the information-content
//! ground truth); the centroid weight drives the mean new-to-prior
//! similarity. Under no drift the construction is generation-stationary:
//! new vectors relate to the pool exactly like baseline vectors do.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use crate::corpus::Document;
use crate::embedding::{save_tsv, EmbeddingMatrix};
use crate::seeds;

pub const SYNTH_BASE_YEAR: i32 = 1976;
pub const SYNTH_BASELINE_LEN: i32 = 5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embedding(#[from] crate::embedding::EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Drift {
    None,
    Converging,
    Diverging,
}

impl std::str::FromStr for Drift {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "converging" => Ok(Self::Converging),
            "diverging" => Ok(Self::Diverging),
            other => Err(format!(
                "unknown drift {other:?} (none, converging or diverging)"
            )),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    /// Number of analysis years after the 5-year baseline window.
    pub years: usize,
    pub docs_per_year: usize,
    pub baseline_vocab_size: usize,
    pub new_per_year: usize,
    pub drift: Drift,
    pub dimension: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            years: 20,
            docs_per_year: 200,
            baseline_vocab_size: 2000,
            new_per_year: 40,
            drift: Drift::None,
            dimension: 512,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.years == 0 || self.docs_per_year == 0 || self.baseline_vocab_size < 2 {
            return Err(SynthError::InvalidSpec(
                "years, docs_per_year >= 1 and baseline_vocab_size >= 2 required".into(),
            ));
        }
        if self.dimension < 8 {
            return Err(SynthError::InvalidSpec("dimension must be >= 8".into()));
        }
        Ok(())
    }

    /// Target max similarity of new concepts to prior, per analysis year.
    pub fn schedule(&self) -> Vec<f64> {
        let (lo, hi) = match self.drift {
            Drift::None => (0.55, 0.55),
            Drift::Converging => (0.3, 0.8),
            Drift::Diverging => (0.8, 0.3),
        };
        (0..self.years)
            .map(|t| {
                if self.years == 1 {
                    lo
                } else {
                    lo + (hi - lo) * t as f64 / (self.years - 1) as f64
                }
            })
            .collect()
    }

    pub fn analysis_years(&self) -> impl Iterator<Item = i32> + '_ {
        let start = SYNTH_BASE_YEAR + SYNTH_BASELINE_LEN;
        start..start + self.years as i32
    }
}

/// Paths of the generated files.
#[derive(Debug, Clone)]
pub struct SyntheticArtifacts {
    pub corpus: PathBuf,
    pub vectors: PathBuf,
    pub first_years: PathBuf,
    pub sidecar: PathBuf,
}

/// Ground truth recorded alongside the corpus.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SyntheticTruth {
    pub seed: u64,
    pub drift: Drift,
    pub baseline_years: (i32, i32),
    pub analysis_years: (i32, i32),
    /// (year, expected max similarity of new concepts to the prior set).
    pub schedule: Vec<(i32, f64)>,
    pub first_year: BTreeMap<String, i32>,
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream simple.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Generates corpus, vectors, first-appearance data and sidecar under
/// `out_dir`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    out_dir: &Path,
) -> Result<(SyntheticArtifacts, SyntheticTruth), SynthError> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let dim = spec.dimension;
    let schedule = spec.schedule();
    let centroid_weight = 0.2f64.sqrt();
    let noise_weight = (1.0 - 0.2f64).sqrt();
    // Under no drift the schedule is this constant, making new vectors'
    // centroid weight equal the baseline weight exactly (stationarity).
    let stationary_s = 0.55f64;

    // Terms: baseline first, then per analysis year, ids in that order. All
    // terms end with a digit so tokenization and lemmatization are identity.
    let mut terms: Vec<String> = (0..spec.baseline_vocab_size)
        .map(|i| format!("c{i:05}"))
        .collect();
    let mut first_year: Vec<i32> = (0..spec.baseline_vocab_size)
        .map(|i| SYNTH_BASE_YEAR + (i as i32 % SYNTH_BASELINE_LEN))
        .collect();
    for (t, year) in spec.analysis_years().enumerate() {
        for j in 0..spec.new_per_year {
            terms.push(format!("n{year}x{j:03}"));
            first_year.push(year);
        }
        let _ = t;
    }

    // Vectors.
    let mut rng = seeds::rng(spec.seed, &[seeds::label("synth-vectors")]);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(terms.len());
    for _ in 0..spec.baseline_vocab_size {
        let g = random_unit(&mut rng, dim);
        let mut v: Vec<f64> = g.iter().map(|x| noise_weight * x).collect();
        v[0] += centroid_weight;
        vectors.push(normalize(v));
    }
    for (t, _year) in spec.analysis_years().enumerate() {
        let s = schedule[t];
        let c = (1.0 - s * s).max(1e-9).sqrt();
        // Centroid weight of this year's new vectors; alpha0 exactly when
        // the schedule sits at the stationary constant.
        let h = centroid_weight * (s / stationary_s);
        for _ in 0..spec.new_per_year {
            let anchor = rng.random_range(0..spec.baseline_vocab_size);
            let p = vectors[anchor].clone();
            let p_e0 = p[0];
            // Orthonormal frame in the residual space: e0 projected away
            // from the anchor, plus a random direction orthogonal to both.
            let mut e_perp: Vec<f64> = p.iter().map(|x| -p_e0 * x).collect();
            e_perp[0] += 1.0;
            let e_perp = normalize(e_perp);
            let e_perp_e0 = (1.0 - p_e0 * p_e0).max(1e-9).sqrt();
            let g = random_unit(&mut rng, dim);
            let g_p: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            let g_e: f64 = g.iter().zip(&e_perp).map(|(a, b)| a * b).sum();
            let q = normalize(
                g.iter()
                    .zip(&p)
                    .zip(&e_perp)
                    .map(|((a, b), e)| a - g_p * b - g_e * e)
                    .collect::<Vec<f64>>(),
            );
            // w = gamma * e_perp + delta * q, orthogonal to p, tuned so the
            // finished vector's centroid weight is exactly h.
            let gamma = ((h - s * p_e0) / (c * e_perp_e0)).clamp(-0.99, 0.99);
            let delta = (1.0 - gamma * gamma).sqrt();
            let v: Vec<f64> = (0..dim)
                .map(|i| s * p[i] + c * (gamma * e_perp[i] + delta * q[i]))
                .collect();
            vectors.push(v);
        }
    }

    // Documents: each year's docs introduce that year's concepts round-robin
    // and pad with uniform reuse of concepts from strictly earlier years.
    let target_len = 12usize;
    let mut docs: Vec<Document> = Vec::new();
    let mut intro_by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (idx, fy) in first_year.iter().enumerate() {
        intro_by_year.entry(*fy).or_default().push(idx);
    }
    let mut prior_pool: Vec<usize> = Vec::new();
    let mut doc_rng = seeds::rng(spec.seed, &[seeds::label("synth-docs")]);
    let all_years: Vec<i32> = (SYNTH_BASE_YEAR..SYNTH_BASE_YEAR + SYNTH_BASELINE_LEN)
        .chain(spec.analysis_years())
        .collect();
    for year in all_years {
        let introduced = intro_by_year.get(&year).cloned().unwrap_or_default();
        let mut per_doc: Vec<Vec<usize>> = vec![Vec::new(); spec.docs_per_year];
        for (k, concept) in introduced.iter().enumerate() {
            per_doc[k % spec.docs_per_year].push(*concept);
        }
        for (k, concepts) in per_doc.iter_mut().enumerate() {
            // Concepts introduced by earlier docs of the same year are fair
            // game for reuse too; keep it simple and reuse prior years only.
            while concepts.len() < target_len && !prior_pool.is_empty() {
                concepts.push(prior_pool[doc_rng.random_range(0..prior_pool.len())]);
            }
            let words: Vec<&str> = concepts.iter().map(|i| terms[*i].as_str()).collect();
            let (title_words, abstract_words) =
                words.split_at(words.len().min(2).max(words.len() / 6));
            let mut abstract_text = String::new();
            for (i, w) in abstract_words.iter().enumerate() {
                if i > 0 {
                    abstract_text.push(if i % 6 == 0 { '.' } else { ' ' });
                    if i % 6 == 0 {
                        abstract_text.push(' ');
                    }
                }
                abstract_text.push_str(w);
            }
            abstract_text.push('.');
            docs.push(Document {
                id: format!("d{year}x{k:04}"),
                year,
                title: title_words.join(" "),
                abstract_text,
            });
        }
        prior_pool.extend(introduced);
    }

    // Write artifacts.
    let artifacts = SyntheticArtifacts {
        corpus: out_dir.join("corpus.jsonl"),
        vectors: out_dir.join("vectors.tsv"),
        first_years: out_dir.join("first_years.tsv"),
        sidecar: out_dir.join("truth.json"),
    };
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io {
            path: path.clone(),
            source,
        }
    };

    let mut w = BufWriter::new(
        std::fs::File::create(&artifacts.corpus).map_err(io_err(&artifacts.corpus))?,
    );
    for doc in &docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writeln!(w, "{line}").map_err(io_err(&artifacts.corpus))?;
    }
    w.flush().map_err(io_err(&artifacts.corpus))?;

    let data: Vec<f32> = vectors
        .iter()
        .flat_map(|v| v.iter().map(|x| *x as f32))
        .collect();
    let matrix = EmbeddingMatrix::new(terms.clone(), dim, data)?;
    save_tsv(&matrix, &artifacts.vectors)?;

    let mut w = BufWriter::new(
        std::fs::File::create(&artifacts.first_years).map_err(io_err(&artifacts.first_years))?,
    );
    for (term, fy) in terms.iter().zip(&first_year) {
        writeln!(w, "{term}\t{fy}").map_err(io_err(&artifacts.first_years))?;
    }
    w.flush().map_err(io_err(&artifacts.first_years))?;

    let truth = SyntheticTruth {
        seed: spec.seed,
        drift: spec.drift,
        baseline_years: (SYNTH_BASE_YEAR, SYNTH_BASE_YEAR + SYNTH_BASELINE_LEN - 1),
        analysis_years: (
            SYNTH_BASE_YEAR + SYNTH_BASELINE_LEN,
            SYNTH_BASE_YEAR + SYNTH_BASELINE_LEN + spec.years as i32 - 1,
        ),
        schedule: spec
            .analysis_years()
            .zip(schedule.iter().copied())
            .collect(),
        first_year: terms.into_iter().zip(first_year).collect(),
    };
    let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    std::fs::write(&artifacts.sidecar, json).map_err(io_err(&artifacts.sidecar))?;

    Ok((artifacts, truth))
}
