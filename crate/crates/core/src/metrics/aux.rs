//! Per-document and rolling-window statistics.

use std::collections::{BTreeMap, HashSet};

use super::{mean_std, MetricPoint, MetricSeries, MetricsError};
use crate::corpus::ConceptId;
use crate::embedding::EmbeddingMatrix;
use crate::seeds;
use crate::timeline::ConceptTimeline;

/// A document reduced to its year and extracted concepts.
pub type ExtractedDoc = (i32, Vec<(ConceptId, u32)>);

/// Per analysis year, the mean count of that year's new concepts per
/// document, and the mean count of distinct concepts per document. Years
/// without documents are missing.
pub fn new_concepts_per_document(
    extracted: &[ExtractedDoc],
    timeline: &ConceptTimeline,
) -> (MetricSeries, MetricSeries) {
    let mut by_year: BTreeMap<i32, Vec<(f64, f64)>> = BTreeMap::new();
    for (year, concepts) in extracted {
        if *year < timeline.analysis_start() || *year > timeline.analysis_end() {
            continue;
        }
        let new_count = concepts
            .iter()
            .filter(|(id, _)| timeline.first_year(*id) == Some(*year))
            .count();
        by_year
            .entry(*year)
            .or_default()
            .push((new_count as f64, concepts.len() as f64));
    }
    let mut new_points = Vec::new();
    let mut total_points = Vec::new();
    for year in timeline.analysis_years() {
        match by_year.get(&year) {
            Some(docs) => {
                let news: Vec<f64> = docs.iter().map(|(n, _)| *n).collect();
                let totals: Vec<f64> = docs.iter().map(|(_, t)| *t).collect();
                let (nm, ns) = mean_std(&news);
                let (tm, ts) = mean_std(&totals);
                new_points.push(MetricPoint {
                    year,
                    mean: Some(nm),
                    std: Some(ns),
                    n_samples: docs.len() as u32,
                });
                total_points.push(MetricPoint {
                    year,
                    mean: Some(tm),
                    std: Some(ts),
                    n_samples: docs.len() as u32,
                });
            }
            None => {
                for points in [&mut new_points, &mut total_points] {
                    points.push(MetricPoint {
                        year,
                        mean: None,
                        std: None,
                        n_samples: 0,
                    });
                }
            }
        }
    }
    (
        MetricSeries {
            metric: "new_concepts_per_doc".into(),
            points: new_points,
        },
        MetricSeries {
            metric: "concepts_per_doc".into(),
            points: total_points,
        },
    )
}

/// For each window ending in an analysis year: the share of concepts first
/// appearing within the window among all unique concepts occurring in it.
pub fn rolling_new_ratio(
    extracted: &[ExtractedDoc],
    timeline: &ConceptTimeline,
    window: usize,
) -> MetricSeries {
    assert!(window >= 1, "window must be >= 1");
    let mut occurring: BTreeMap<i32, HashSet<ConceptId>> = BTreeMap::new();
    for (year, concepts) in extracted {
        let set = occurring.entry(*year).or_default();
        for (id, _) in concepts {
            set.insert(*id);
        }
    }
    let mut points = Vec::new();
    for end in timeline.analysis_years() {
        let start = end - window as i32 + 1;
        let mut unique: HashSet<ConceptId> = HashSet::new();
        for (_, set) in occurring.range(start..=end) {
            unique.extend(set.iter().copied());
        }
        if unique.is_empty() {
            points.push(MetricPoint {
                year: end,
                mean: None,
                std: None,
                n_samples: 0,
            });
            continue;
        }
        let first_in_window = unique
            .iter()
            .filter(|id| {
                timeline
                    .first_year(**id)
                    .is_some_and(|y| y >= start && y <= end)
            })
            .count();
        points.push(MetricPoint {
            year: end,
            mean: Some(first_in_window as f64 / unique.len() as f64),
            std: None,
            n_samples: unique.len() as u32,
        });
    }
    MetricSeries {
        metric: "rolling_new_ratio".into(),
        points,
    }
}

/// Mean pairwise similarity among each document's distinct concepts,
/// averaged per year over up to `n_docs` sampled documents. Documents with
/// fewer than two distinct in-vocabulary concepts are skipped.
pub fn within_document_similarity(
    extracted: &[ExtractedDoc],
    timeline: &ConceptTimeline,
    m: &EmbeddingMatrix,
    n_docs: usize,
    base_seed: u64,
) -> Result<MetricSeries, MetricsError> {
    let mut eligible: BTreeMap<i32, Vec<&Vec<(ConceptId, u32)>>> = BTreeMap::new();
    for (year, concepts) in extracted {
        if concepts.len() >= 2
            && *year >= timeline.analysis_start()
            && *year <= timeline.analysis_end()
        {
            eligible.entry(*year).or_default().push(concepts);
        }
    }
    let mut points = Vec::new();
    for year in timeline.analysis_years() {
        let Some(docs) = eligible.get(&year) else {
            points.push(MetricPoint {
                year,
                mean: None,
                std: None,
                n_samples: 0,
            });
            continue;
        };
        let count = n_docs.min(docs.len());
        let mut rng = seeds::rng(base_seed, &[seeds::label("within-doc"), year as u64]);
        let chosen = rand::seq::index::sample(&mut rng, docs.len(), count);
        let mut per_doc = Vec::with_capacity(count);
        for i in chosen {
            per_doc.push(doc_mean_similarity(docs[i], m)?);
        }
        let (mean, std) = mean_std(&per_doc);
        points.push(MetricPoint {
            year,
            mean: Some(mean),
            std: Some(std),
            n_samples: count as u32,
        });
    }
    Ok(MetricSeries {
        metric: "within_doc_similarity".into(),
        points,
    })
}

fn doc_mean_similarity(
    concepts: &[(ConceptId, u32)],
    m: &EmbeddingMatrix,
) -> Result<f64, MetricsError> {
    let ids: Vec<ConceptId> = concepts.iter().map(|(id, _)| *id).collect();
    super::mean_pairwise_of(&ids, m)
}
