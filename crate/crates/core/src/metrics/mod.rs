//! Quantitative measures over the concept space.
//!
//! Mean pairwise similarity of a sampled concept set (an inverse indicator of
//! concept-space divergence), mean similarity across the new-by-prior
//! bipartite edge set (an inverse indicator of new-concept originality), and
//! the additional information content a new concept brings, in bits, from
//! its maximum similarity to any prior concept. Yearly series aggregate the
//! per-subgraph (or per-concept) statistics as mean and standard deviation.
//!
//! The pairwise sums are evaluated through the identity
//! `sum_{i<j} u_i . u_j = (|sum_i u_i|^2 - sum_i |u_i|^2) / 2` over
//! unit-normalized vectors, which is the same sum reassociated and keeps
//! sampling at large subgraph sizes cheap.

mod aux;
mod series;

pub use aux::{new_concepts_per_document, rolling_new_ratio, within_document_similarity};
pub use series::{yearly_metric_series, MetricKind, SeriesParams, YearlySamples};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::ConceptId;
use crate::embedding::{EmbeddingError, EmbeddingMatrix};
use crate::timeline::{ConceptTimeline, TimelineError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample has {0} concepts; at least 2 required")]
    SampleTooSmall(usize),
    #[error("prior partition of the sample is empty")]
    EmptyPriorPartition,
    #[error("eps must lie in (0, 1], got {0}")]
    BadEps(f64),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Concepts sampled without replacement from one year's cumulative set,
/// preserving the year's new-concept share.
#[derive(Debug, Clone)]
pub struct SubgraphSample {
    pub year: i32,
    pub concept_ids: Vec<ConceptId>,
    /// Parallel to `concept_ids`; true marks concepts first appearing in
    /// `year`.
    pub new_flags: Vec<bool>,
    pub rng_seed: u64,
    /// Set when the cumulative set was smaller than the requested size and
    /// was used whole.
    pub truncated: bool,
}

impl SubgraphSample {
    pub fn len(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concept_ids.is_empty()
    }

    pub fn new_count(&self) -> usize {
        self.new_flags.iter().filter(|f| **f).count()
    }
}

/// One per-year aggregate of a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPoint {
    pub year: i32,
    /// `None` marks a year where the metric is undefined (e.g. no new
    /// concepts appeared).
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_samples: u32,
}

/// Per-year (mean, standard deviation, sample count) records for one metric,
/// years strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub metric: String,
    pub points: Vec<MetricPoint>,
}

impl MetricSeries {
    /// `(year, mean)` pairs of the defined points.
    pub fn defined(&self) -> Vec<(i32, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.mean.map(|m| (p.year, m)))
            .collect()
    }
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean pairwise similarity over a set of concepts, via the squared-sum
/// identity over unit rows.
pub(crate) fn mean_pairwise_of(
    ids: &[ConceptId],
    m: &EmbeddingMatrix,
) -> Result<f64, MetricsError> {
    let n = ids.len();
    let mut sum_vec = vec![0.0f64; m.dim()];
    let mut self_terms = 0.0f64;
    for &id in ids {
        self_terms += m.accumulate_unit(id, &mut sum_vec)?;
    }
    let sq = sum_vec.iter().map(|c| c * c).sum::<f64>();
    let pair_sum = (sq - self_terms) / 2.0;
    Ok(pair_sum / (n * (n - 1) / 2) as f64)
}

/// Mean semantic similarity over all unordered concept pairs in the sample.
pub fn mean_similarity_all(
    sample: &SubgraphSample,
    m: &EmbeddingMatrix,
) -> Result<f64, MetricsError> {
    if sample.len() < 2 {
        return Err(MetricsError::SampleTooSmall(sample.len()));
    }
    mean_pairwise_of(&sample.concept_ids, m)
}

/// Mean semantic similarity across the new-by-prior bipartite edge set of
/// the sample. `None` when the sample holds no new concepts; an empty prior
/// partition is an error.
pub fn mean_similarity_new_prior(
    sample: &SubgraphSample,
    m: &EmbeddingMatrix,
) -> Result<Option<f64>, MetricsError> {
    let dim = m.dim();
    let mut prior_sum = vec![0.0f64; dim];
    let mut new_sum = vec![0.0f64; dim];
    let mut n_prior = 0u64;
    let mut n_new = 0u64;
    for (&id, &is_new) in sample.concept_ids.iter().zip(&sample.new_flags) {
        let (sum, count) = if is_new {
            (&mut new_sum, &mut n_new)
        } else {
            (&mut prior_sum, &mut n_prior)
        };
        m.accumulate_unit(id, sum)?;
        *count += 1;
    }
    if n_prior == 0 {
        return Err(MetricsError::EmptyPriorPartition);
    }
    if n_new == 0 {
        return Ok(None);
    }
    let cross: f64 = prior_sum.iter().zip(&new_sum).map(|(a, b)| a * b).sum();
    Ok(Some(cross / (n_prior * n_new) as f64))
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified sample of `n` concepts from the cumulative set of `year`:
/// `round(n * new_share)` concepts uniformly from the year's new concepts,
/// the remainder uniformly from prior concepts, all without replacement and
/// deterministic for a given seed. A cumulative set smaller than `n` is used
/// whole and flagged.
pub fn sample_subgraph(
    timeline: &ConceptTimeline,
    year: i32,
    n: usize,
    seed: u64,
) -> Result<SubgraphSample, MetricsError> {
    let cumulative = timeline.cumulative(year)?;
    let prior = timeline.prior_of(year)?;
    let new = timeline.new_in(year)?;

    if cumulative.len() <= n {
        let concept_ids = cumulative.to_vec();
        let new_flags: Vec<bool> = (0..cumulative.len()).map(|i| i >= prior.len()).collect();
        return Ok(SubgraphSample {
            year,
            concept_ids,
            new_flags,
            rng_seed: seed,
            truncated: cumulative.len() < n,
        });
    }

    let share = timeline.new_share(year)?;
    let k = round_half_up(n as f64 * share)
        .min(new.len())
        .min(n);
    let n_prior = (n - k).min(prior.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut concept_ids = Vec::with_capacity(k + n_prior);
    let mut new_flags = Vec::with_capacity(k + n_prior);
    for i in rand::seq::index::sample(&mut rng, new.len(), k) {
        concept_ids.push(new[i]);
        new_flags.push(true);
    }
    for i in rand::seq::index::sample(&mut rng, prior.len(), n_prior) {
        concept_ids.push(prior[i]);
        new_flags.push(false);
    }
    Ok(SubgraphSample {
        year,
        concept_ids,
        new_flags,
        rng_seed: seed,
        truncated: false,
    })
}

/// Additional information content of a new concept, in bits:
/// `-log2(clamp(max similarity to prior, eps, 1))`. Non-negative, zero iff
/// the clamped maximum similarity is 1.
pub fn delta_information_content(
    x: ConceptId,
    prior: &[ConceptId],
    m: &EmbeddingMatrix,
    eps: f64,
) -> Result<f64, MetricsError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MetricsError::BadEps(eps));
    }
    let (_, sim) = m.max_similarity_to_set(x, prior)?;
    let p = sim.clamp(eps, 1.0);
    Ok(-p.log2())
}
