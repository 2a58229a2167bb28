//! Concept first-appearance dating and yearly new/prior partitions.
//!
//! Concepts first seen up to the baseline year are treated as pre-existing
//! for every analysis year, absorbing the left-censoring of the source
//! database. Each analysis year then partitions the cumulative concept set
//! into that year's new concepts and everything prior.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{extract_concepts, ConceptId, Document, Vocabulary};

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("baseline is empty: no concept first appears on or before {0}")]
    EmptyBaseline(i32),
    #[error("invalid range: baseline end {baseline_end} must precede analysis end {analysis_end}")]
    InvalidRange { baseline_end: i32, analysis_end: i32 },
    #[error("year {year} outside analysis range {start}..={end}")]
    YearOutOfRange { year: i32, start: i32, end: i32 },
    #[error("malformed first-year file {path} at line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

/// Minimum observation year per concept, plus concepts never observed.
#[derive(Debug, Clone, Default)]
pub struct FirstYears {
    /// Indexed by concept id; `None` = never observed in the corpus.
    pub by_concept: Vec<Option<i32>>,
}

impl FirstYears {
    pub fn unobserved(&self) -> Vec<ConceptId> {
        self.by_concept
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_none())
            .map(|(i, _)| i as ConceptId)
            .collect()
    }
}

/// For each vocabulary concept, the minimum year over documents containing
/// it. Document order does not matter (a min-reduction).
pub fn first_appearance_years(docs: &[Document], vocab: &Vocabulary) -> FirstYears {
    let merged = docs
        .par_chunks(256)
        .map(|chunk| {
            let mut local: Vec<Option<i32>> = vec![None; vocab.len()];
            for doc in chunk {
                for (id, _) in extract_concepts(doc, vocab) {
                    let slot = &mut local[id as usize];
                    *slot = Some(slot.map_or(doc.year, |y| y.min(doc.year)));
                }
            }
            local
        })
        .reduce(
            || vec![None; vocab.len()],
            |mut a, b| {
                for (sa, sb) in a.iter_mut().zip(b) {
                    *sa = match (*sa, sb) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (x, y) => x.or(y),
                    };
                }
                a
            },
        );
    FirstYears { by_concept: merged }
}

/// Same reduction over pre-extracted `(year, concepts)` pairs.
pub fn first_years_from_extracted(
    extracted: &[(i32, Vec<(ConceptId, u32)>)],
    vocab_len: usize,
) -> FirstYears {
    let mut by_concept: Vec<Option<i32>> = vec![None; vocab_len];
    for (year, concepts) in extracted {
        for (id, _) in concepts {
            let slot = &mut by_concept[*id as usize];
            *slot = Some(slot.map_or(*year, |y| y.min(*year)));
        }
    }
    FirstYears { by_concept }
}

/// First-appearance year per concept with baseline and yearly partitions.
///
/// Internally stores one concept ordering: baseline concepts first, then each
/// analysis year's new concepts, so every cumulative and prior set is a
/// prefix slice.
#[derive(Debug, Clone)]
pub struct ConceptTimeline {
    first_year: Vec<Option<i32>>,
    baseline_end: i32,
    analysis_end: i32,
    ordered: Vec<ConceptId>,
    baseline_len: usize,
    /// Segment of `ordered` holding new concepts per analysis year, indexed
    /// by `year - analysis_start()`.
    segments: Vec<Range<usize>>,
}

impl ConceptTimeline {
    /// Partitions concepts by first-appearance year. Concepts dated after
    /// `analysis_end` (or never observed) are excluded from all sets.
    pub fn build(
        first_years: &FirstYears,
        baseline_end: i32,
        analysis_end: i32,
    ) -> Result<Self, TimelineError> {
        if baseline_end >= analysis_end {
            return Err(TimelineError::InvalidRange {
                baseline_end,
                analysis_end,
            });
        }
        let mut baseline: Vec<ConceptId> = Vec::new();
        let mut by_year: BTreeMap<i32, Vec<ConceptId>> = BTreeMap::new();
        for (i, year) in first_years.by_concept.iter().enumerate() {
            let Some(y) = year else { continue };
            if *y <= baseline_end {
                baseline.push(i as ConceptId);
            } else if *y <= analysis_end {
                by_year.entry(*y).or_default().push(i as ConceptId);
            }
        }
        if baseline.is_empty() {
            return Err(TimelineError::EmptyBaseline(baseline_end));
        }
        let baseline_len = baseline.len();
        let mut ordered = baseline;
        let analysis_start = baseline_end + 1;
        let mut segments = Vec::new();
        for year in analysis_start..=analysis_end {
            let start = ordered.len();
            if let Some(ids) = by_year.get(&year) {
                ordered.extend_from_slice(ids);
            }
            segments.push(start..ordered.len());
        }
        Ok(Self {
            first_year: first_years.by_concept.clone(),
            baseline_end,
            analysis_end,
            ordered,
            baseline_len,
            segments,
        })
    }

    pub fn baseline_end(&self) -> i32 {
        self.baseline_end
    }

    pub fn analysis_start(&self) -> i32 {
        self.baseline_end + 1
    }

    pub fn analysis_end(&self) -> i32 {
        self.analysis_end
    }

    pub fn analysis_years(&self) -> impl Iterator<Item = i32> {
        self.analysis_start()..=self.analysis_end
    }

    pub fn first_year(&self, id: ConceptId) -> Option<i32> {
        self.first_year.get(id as usize).copied().flatten()
    }

    pub fn baseline(&self) -> &[ConceptId] {
        &self.ordered[..self.baseline_len]
    }

    fn check_year(&self, year: i32) -> Result<usize, TimelineError> {
        if year < self.analysis_start() || year > self.analysis_end {
            return Err(TimelineError::YearOutOfRange {
                year,
                start: self.analysis_start(),
                end: self.analysis_end,
            });
        }
        Ok((year - self.analysis_start()) as usize)
    }

    /// Concepts first appearing in `year`.
    pub fn new_in(&self, year: i32) -> Result<&[ConceptId], TimelineError> {
        let i = self.check_year(year)?;
        Ok(&self.ordered[self.segments[i].clone()])
    }

    /// Baseline plus all concepts first appearing before `year`.
    pub fn prior_of(&self, year: i32) -> Result<&[ConceptId], TimelineError> {
        let i = self.check_year(year)?;
        Ok(&self.ordered[..self.segments[i].start])
    }

    /// Baseline plus all concepts first appearing up to and including `year`.
    pub fn cumulative(&self, year: i32) -> Result<&[ConceptId], TimelineError> {
        let i = self.check_year(year)?;
        Ok(&self.ordered[..self.segments[i].end])
    }

    /// |new(year)| / |cumulative(year)|.
    pub fn new_share(&self, year: i32) -> Result<f64, TimelineError> {
        let new = self.new_in(year)?.len();
        let cumulative = self.cumulative(year)?.len();
        Ok(new as f64 / cumulative as f64)
    }

    /// Fraction of concept usage occurrences attributable to baseline
    /// concepts, over pre-extracted documents.
    pub fn baseline_coverage_from_extracted(
        &self,
        extracted: &[(i32, Vec<(ConceptId, u32)>)],
    ) -> f64 {
        let mut baseline_occ = 0u64;
        let mut total_occ = 0u64;
        for (_, concepts) in extracted {
            for (id, count) in concepts {
                total_occ += u64::from(*count);
                if self
                    .first_year(*id)
                    .is_some_and(|y| y <= self.baseline_end)
                {
                    baseline_occ += u64::from(*count);
                }
            }
        }
        if total_occ == 0 {
            return 0.0;
        }
        baseline_occ as f64 / total_occ as f64
    }

    /// [`Self::baseline_coverage_from_extracted`] straight from documents.
    pub fn baseline_coverage(&self, docs: &[Document], vocab: &Vocabulary) -> f64 {
        let extracted: Vec<(i32, Vec<(ConceptId, u32)>)> = docs
            .par_iter()
            .map(|d| (d.year, extract_concepts(d, vocab)))
            .collect();
        self.baseline_coverage_from_extracted(&extracted)
    }
}

/// Writes `term \t first_year` rows for every observed concept.
pub fn export_first_years(
    first_years: &FirstYears,
    vocab: &Vocabulary,
    path: &Path,
) -> Result<(), TimelineError> {
    let io_err = |source| TimelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for (i, year) in first_years.by_concept.iter().enumerate() {
        if let Some(y) = year {
            writeln!(w, "{}\t{}", vocab.term(i as ConceptId), y).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads `term \t first_year` rows. Terms absent from the vocabulary are
/// ignored (the file may cover a superset); vocabulary concepts absent from
/// the file stay unobserved.
pub fn import_first_years(path: &Path, vocab: &Vocabulary) -> Result<FirstYears, TimelineError> {
    let io_err = |source| TimelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut by_concept: Vec<Option<i32>> = vec![None; vocab.len()];
    let mut index: HashMap<&str, ConceptId> = HashMap::with_capacity(vocab.len());
    for (i, e) in vocab.entries().iter().enumerate() {
        index.insert(e.term.as_str(), i as ConceptId);
    }
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.is_empty() {
            continue;
        }
        let malformed = |message: &str| TimelineError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: message.to_string(),
        };
        let (term, year) = line
            .split_once('\t')
            .ok_or_else(|| malformed("expected term<TAB>year"))?;
        let year: i32 = year.parse().map_err(|_| malformed("bad year"))?;
        if let Some(&id) = index.get(term) {
            let slot = &mut by_concept[id as usize];
            *slot = Some(slot.map_or(year, |y| y.min(year)));
        }
    }
    Ok(FirstYears { by_concept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn doc(id: &str, year: i32, text: &str) -> Document {
        Document {
            id: id.into(),
            year,
            title: String::new(),
            abstract_text: text.into(),
        }
    }

    fn first_years(years: &[Option<i32>]) -> FirstYears {
        FirstYears {
            by_concept: years.to_vec(),
        }
    }

    #[test]
    fn minimum_year_wins() {
        let vocab = Vocabulary::from_terms(["gear"]).unwrap();
        let docs = vec![doc("a", 1983, "the gear."), doc("b", 1981, "a gear.")];
        let fy = first_appearance_years(&docs, &vocab);
        assert_eq!(fy.by_concept[0], Some(1981));
    }

    #[test]
    fn singleton_observation() {
        let vocab = Vocabulary::from_terms(["gear", "sprocket"]).unwrap();
        let docs = vec![doc("a", 1990, "one gear.")];
        let fy = first_appearance_years(&docs, &vocab);
        assert_eq!(fy.by_concept[0], Some(1990));
        assert_eq!(fy.by_concept[1], None);
        assert_eq!(fy.unobserved(), vec![1]);
    }

    #[test]
    fn order_invariance_under_permutation() {
        let vocab = Vocabulary::from_terms(["gear", "lever", "cam"]).unwrap();
        let mut docs: Vec<Document> = (0..40)
            .map(|i| {
                let year = 1976 + (i % 13);
                let text = match i % 3 {
                    0 => "gear and lever.",
                    1 => "cam follows gear.",
                    _ => "a lever.",
                };
                doc(&format!("d{i}"), year, text)
            })
            .collect();
        let sorted = first_appearance_years(&docs, &vocab);
        let mut rng = crate::seeds::rng(5, &[1]);
        docs.shuffle(&mut rng);
        let shuffled = first_appearance_years(&docs, &vocab);
        assert_eq!(sorted.by_concept, shuffled.by_concept);
    }

    #[test]
    fn partitions_match_hand_count() {
        // Concepts dated 1979, 1981, 1981, 1982; baseline ends 1980.
        let fy = first_years(&[Some(1979), Some(1981), Some(1981), Some(1982)]);
        let t = ConceptTimeline::build(&fy, 1980, 1982).unwrap();
        assert_eq!(t.baseline(), &[0]);
        assert_eq!(t.new_in(1981).unwrap(), &[1, 2]);
        assert_eq!(t.new_in(1982).unwrap(), &[3]);
        assert_eq!(t.cumulative(1982).unwrap().len(), 4);
        assert_eq!(t.prior_of(1982).unwrap().len(), 3);
    }

    #[test]
    fn degenerate_all_baseline() {
        let fy = first_years(&[Some(1978); 10]);
        let t = ConceptTimeline::build(&fy, 1980, 1985).unwrap();
        assert_eq!(t.baseline().len(), 10);
        for y in t.analysis_years() {
            assert!(t.new_in(y).unwrap().is_empty());
            assert_eq!(t.cumulative(y).unwrap().len(), 10);
        }
    }

    #[test]
    fn empty_baseline_is_an_error() {
        let fy = first_years(&[Some(1985), Some(1986)]);
        assert!(matches!(
            ConceptTimeline::build(&fy, 1980, 1990),
            Err(TimelineError::EmptyBaseline(1980))
        ));
    }

    #[test]
    fn concepts_after_analysis_end_are_excluded() {
        let fy = first_years(&[Some(1979), Some(1984), Some(1999)]);
        let t = ConceptTimeline::build(&fy, 1980, 1990).unwrap();
        assert_eq!(t.cumulative(1990).unwrap().len(), 2);
    }

    #[test]
    fn new_share_examples() {
        let mut years = vec![Some(1979); 35];
        years.push(Some(1982));
        years.push(Some(1982));
        let t = ConceptTimeline::build(&first_years(&years), 1980, 1983).unwrap();
        assert_eq!(t.new_share(1981).unwrap(), 0.0);
        let share = t.new_share(1982).unwrap();
        assert!((share - 2.0 / 37.0).abs() < 1e-12);
        assert!((share - 0.0541).abs() < 1e-4);
    }

    #[test]
    fn cumulative_sizes_are_monotone_and_partition_disjoint() {
        let years: Vec<Option<i32>> = (0..200)
            .map(|i| Some(1976 + (i * 7 % 20)))
            .collect();
        let t = ConceptTimeline::build(&first_years(&years), 1980, 1995).unwrap();
        let mut prev = 0;
        let mut seen: Vec<ConceptId> = t.baseline().to_vec();
        for y in t.analysis_years() {
            let c = t.cumulative(y).unwrap().len();
            assert!(c >= prev);
            prev = c;
            for id in t.new_in(y).unwrap() {
                assert!(!seen.contains(id), "concept {id} in two partitions");
                seen.push(*id);
            }
        }
        let observed = years
            .iter()
            .filter(|y| y.is_some_and(|y| y <= 1995))
            .count();
        assert_eq!(seen.len(), observed);
    }

    #[test]
    fn baseline_coverage_counts_occurrences() {
        // 3 of 4 usage occurrences are baseline concepts.
        let fy = first_years(&[Some(1979), Some(1983)]);
        let t = ConceptTimeline::build(&fy, 1980, 1985).unwrap();
        let extracted = vec![(1983, vec![(0, 3), (1, 1)])];
        assert_eq!(t.baseline_coverage_from_extracted(&extracted), 0.75);
    }

    #[test]
    fn full_coverage_when_only_baseline_used() {
        let fy = first_years(&[Some(1979)]);
        let t = ConceptTimeline::build(&fy, 1980, 1985).unwrap();
        let extracted = vec![(1982, vec![(0, 5)]), (1984, vec![(0, 2)])];
        assert_eq!(t.baseline_coverage_from_extracted(&extracted), 1.0);
    }

    #[test]
    fn first_years_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fy.tsv");
        let vocab = Vocabulary::from_terms(["gear", "lever", "cam"]).unwrap();
        let fy = first_years(&[Some(1979), None, Some(1984)]);
        export_first_years(&fy, &vocab, &path).unwrap();
        let back = import_first_years(&path, &vocab).unwrap();
        assert_eq!(back.by_concept, fy.by_concept);
    }

    #[test]
    fn import_ignores_unknown_terms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fy.tsv");
        std::fs::write(&path, "gear\t1979\nunknown thing\t1980\n").unwrap();
        let vocab = Vocabulary::from_terms(["gear"]).unwrap();
        let back = import_first_years(&path, &vocab).unwrap();
        assert_eq!(back.by_concept, vec![Some(1979)]);
    }
}
