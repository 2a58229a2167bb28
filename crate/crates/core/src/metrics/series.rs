//! Yearly aggregation of the core metrics.
//!
//! For the subgraph metrics, each analysis year draws `n_samples` stratified
//! subgraphs and aggregates the per-subgraph statistic. For information
//! content, each year scores up to `n` randomly chosen new concepts against
//! the full prior cumulative set. Every task's RNG seed is derived from
//! (base seed, year, sample index), so results are identical at any
//! concurrency degree.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{
    delta_information_content, mean_similarity_all, mean_similarity_new_prior, mean_std,
    sample_subgraph, MetricPoint, MetricSeries, MetricsError,
};
use crate::embedding::EmbeddingMatrix;
use crate::seeds;
use crate::timeline::ConceptTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Mean pairwise similarity over sampled subgraphs.
    MeanSimilarity,
    /// Mean new-to-prior similarity over sampled subgraphs.
    NewPriorSimilarity,
    /// Additional information content of sampled new concepts, in bits.
    DeltaIc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::MeanSimilarity => "mean_similarity",
            MetricKind::NewPriorSimilarity => "new_prior_similarity",
            MetricKind::DeltaIc => "delta_ic",
        }
    }

    pub const ALL: [MetricKind; 3] = [
        MetricKind::MeanSimilarity,
        MetricKind::NewPriorSimilarity,
        MetricKind::DeltaIc,
    ];
}

#[derive(Debug, Clone)]
pub struct SeriesParams {
    /// Subgraph size, and the per-year cap on scored new concepts.
    pub n: usize,
    /// Subgraphs drawn per year.
    pub n_samples: usize,
    /// Lower clamp for the similarity-to-probability reading.
    pub eps: f64,
    pub base_seed: u64,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            n: 1000,
            n_samples: 100,
            eps: 1e-6,
            base_seed: 42,
        }
    }
}

/// Raw per-year metric values (one per subgraph or scored concept), the
/// input to significance testing.
#[derive(Debug, Clone)]
pub struct YearlySamples {
    pub metric: String,
    pub per_year: BTreeMap<i32, Vec<f64>>,
}

fn point_from_values(year: i32, values: &[f64]) -> MetricPoint {
    if values.is_empty() {
        return MetricPoint {
            year,
            mean: None,
            std: None,
            n_samples: 0,
        };
    }
    let (mean, std) = mean_std(values);
    MetricPoint {
        year,
        mean: Some(mean),
        std: Some(std),
        n_samples: values.len() as u32,
    }
}

/// Per-year mean and standard deviation of one metric, plus the raw values.
///
/// Years whose metric is undefined (no new concepts) carry a missing point.
pub fn yearly_metric_series(
    timeline: &ConceptTimeline,
    m: &EmbeddingMatrix,
    kind: MetricKind,
    params: &SeriesParams,
) -> Result<(MetricSeries, YearlySamples), MetricsError> {
    let mut points = Vec::new();
    let mut per_year = BTreeMap::new();
    for year in timeline.analysis_years() {
        let values = match kind {
            MetricKind::MeanSimilarity | MetricKind::NewPriorSimilarity => {
                subgraph_values(timeline, m, kind, params, year)?
            }
            MetricKind::DeltaIc => delta_ic_values(timeline, m, params, year)?,
        };
        points.push(point_from_values(year, &values));
        if !values.is_empty() {
            per_year.insert(year, values);
        }
    }
    Ok((
        MetricSeries {
            metric: kind.name().to_string(),
            points,
        },
        YearlySamples {
            metric: kind.name().to_string(),
            per_year,
        },
    ))
}

/// Both subgraph metrics share one label, so for a given base seed they are
/// evaluated on identical subgraphs.
fn subgraph_values(
    timeline: &ConceptTimeline,
    m: &EmbeddingMatrix,
    kind: MetricKind,
    params: &SeriesParams,
    year: i32,
) -> Result<Vec<f64>, MetricsError> {
    let results: Vec<Option<f64>> = (0..params.n_samples)
        .into_par_iter()
        .map(|idx| {
            let seed = seeds::derive(
                params.base_seed,
                &[seeds::label("subgraph"), year as u64, idx as u64],
            );
            let sample = sample_subgraph(timeline, year, params.n, seed)?;
            match kind {
                MetricKind::MeanSimilarity => mean_similarity_all(&sample, m).map(Some),
                MetricKind::NewPriorSimilarity => mean_similarity_new_prior(&sample, m),
                MetricKind::DeltaIc => unreachable!("delta_ic uses concept sampling"),
            }
        })
        .collect::<Result<_, MetricsError>>()?;
    Ok(results.into_iter().flatten().collect())
}

fn delta_ic_values(
    timeline: &ConceptTimeline,
    m: &EmbeddingMatrix,
    params: &SeriesParams,
    year: i32,
) -> Result<Vec<f64>, MetricsError> {
    let new = timeline.new_in(year)?;
    if new.is_empty() {
        return Ok(Vec::new());
    }
    let prior = timeline.prior_of(year)?;
    let count = params.n.min(new.len());
    let mut rng = seeds::rng(params.base_seed, &[seeds::label("delta-ic"), year as u64]);
    let chosen: Vec<u32> = rand::seq::index::sample(&mut rng, new.len(), count)
        .iter()
        .map(|i| new[i])
        .collect();
    chosen
        .par_iter()
        .map(|&id| delta_information_content(id, prior, m, params.eps))
        .collect()
}
