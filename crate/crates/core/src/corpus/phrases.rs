//! Collocation detection via normalized pointwise mutual information.
//!
//! Adjacent unit pairs whose NPMI exceeds the threshold (and whose joint
//! count meets the minimum) are merged into a single unit; repeating the pass
//! grows phrases up to the gram limit. Unigrams above the minimum count are
//! always kept, except stopwords.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{is_stopword, CorpusError, TokenizedSentence, Vocabulary, VocabEntry, MAX_GRAM};

#[derive(Debug, Clone)]
pub struct PhraseParams {
    /// Longest phrase to form, in tokens (2..=4).
    pub max_n: usize,
    /// NPMI a pair must exceed (strictly) to merge.
    pub score_threshold: f64,
    /// Minimum count for pairs to merge and terms to survive.
    pub min_count: u64,
}

impl Default for PhraseParams {
    fn default() -> Self {
        Self {
            max_n: MAX_GRAM,
            score_threshold: 0.5,
            min_count: 5,
        }
    }
}

/// Interned unit table: unit id -> (surface form, gram length).
struct Units {
    table: Vec<(String, u8)>,
    index: HashMap<String, u32>,
}

impl Units {
    fn intern(&mut self, s: String, gram: u8) -> u32 {
        if let Some(&id) = self.index.get(&s) {
            return id;
        }
        let id = self.table.len() as u32;
        self.index.insert(s.clone(), id);
        self.table.push((s, gram));
        id
    }
}

type PassCounts = (HashMap<u32, u64>, HashMap<(u32, u32), u64>);

fn count_pass(stream: &[Vec<u32>]) -> PassCounts {
    stream
        .par_chunks(1024)
        .map(|chunk| {
            let mut units: HashMap<u32, u64> = HashMap::new();
            let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
            for sen in chunk {
                for &u in sen {
                    *units.entry(u).or_insert(0) += 1;
                }
                for w in sen.windows(2) {
                    *pairs.entry((w[0], w[1])).or_insert(0) += 1;
                }
            }
            (units, pairs)
        })
        .reduce(
            || (HashMap::new(), HashMap::new()),
            |(mut u1, mut p1), (u2, p2)| {
                for (k, v) in u2 {
                    *u1.entry(k).or_insert(0) += v;
                }
                for (k, v) in p2 {
                    *p1.entry(k).or_insert(0) += v;
                }
                (u1, p1)
            },
        )
}

fn npmi(pair_count: u64, a_count: u64, b_count: u64, total: u64) -> f64 {
    let p_ab = pair_count as f64 / total as f64;
    let p_a = a_count as f64 / total as f64;
    let p_b = b_count as f64 / total as f64;
    let denom = -p_ab.ln();
    if denom <= 0.0 {
        return 1.0;
    }
    (p_ab / (p_a * p_b)).ln() / denom
}

/// Learns a vocabulary of unigrams and collocations from tokenized sentences.
pub fn detect_phrases(
    sentences: &[TokenizedSentence],
    params: &PhraseParams,
) -> Result<Vocabulary, CorpusError> {
    assert!(
        (2..=MAX_GRAM).contains(&params.max_n),
        "max_n must be in 2..={MAX_GRAM}"
    );
    let mut units = Units {
        table: Vec::new(),
        index: HashMap::new(),
    };
    let mut stream: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| units.intern(t.clone(), 1))
                .collect()
        })
        .collect();

    // Raw unigram counts decide which single tokens survive, independent of
    // later merging.
    let (raw_unigrams, _) = count_pass(&stream);

    for _pass in 0..params.max_n - 1 {
        let (unit_counts, pair_counts) = count_pass(&stream);
        let total: u64 = unit_counts.values().sum();
        if total == 0 {
            break;
        }
        let merges: HashSet<(u32, u32)> = pair_counts
            .iter()
            .filter(|(&(a, b), &c)| {
                c >= params.min_count
                    && (units.table[a as usize].1 + units.table[b as usize].1) as usize
                        <= params.max_n
                    && npmi(c, unit_counts[&a], unit_counts[&b], total) > params.score_threshold
            })
            .map(|(&k, _)| k)
            .collect();
        if merges.is_empty() {
            break;
        }
        for sen in &mut stream {
            let mut out = Vec::with_capacity(sen.len());
            let mut i = 0;
            while i < sen.len() {
                if i + 1 < sen.len() && merges.contains(&(sen[i], sen[i + 1])) {
                    let (a, ga) = units.table[sen[i] as usize].clone();
                    let (b, gb) = units.table[sen[i + 1] as usize].clone();
                    let merged = units.intern(format!("{a} {b}"), ga + gb);
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(sen[i]);
                    i += 1;
                }
            }
            *sen = out;
        }
    }

    let (final_counts, _) = count_pass(&stream);
    let mut entries: Vec<VocabEntry> = Vec::new();
    for (id, &count) in &final_counts {
        let (term, gram) = &units.table[*id as usize];
        if *gram >= 2 && count >= params.min_count {
            entries.push(VocabEntry {
                term: term.clone(),
                gram_length: *gram,
                frequency: count,
            });
        }
    }
    for (id, &count) in &raw_unigrams {
        let (term, _) = &units.table[*id as usize];
        if count >= params.min_count && !is_stopword(term) {
            entries.push(VocabEntry {
                term: term.clone(),
                gram_length: 1,
                frequency: count,
            });
        }
    }
    entries.sort_unstable_by(|a, b| a.term.cmp(&b.term));
    Vocabulary::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn sentences(lines: &[&str]) -> Vec<TokenizedSentence> {
        lines.iter().flat_map(|l| tokenize(l)).collect()
    }

    fn params(threshold: f64, min_count: u64) -> PhraseParams {
        PhraseParams {
            max_n: 4,
            score_threshold: threshold,
            min_count,
        }
    }

    #[test]
    fn perfect_cooccurrence_forms_phrase() {
        // "neural" and "network" only ever occur adjacent to each other, so
        // their NPMI is exactly 1 and any threshold below 1 admits them. The
        // surrounding context varies so no other pair reaches the threshold.
        let lines: Vec<String> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    format!("neural network improves widget{i}.")
                } else {
                    format!("widget{i} beats neural network.")
                }
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let vocab = detect_phrases(&sentences(&refs), &params(0.99, 5)).unwrap();
        assert!(vocab.id("neural network").is_some());
        let e = vocab.entry(vocab.id("neural network").unwrap());
        assert_eq!(e.gram_length, 2);
        assert_eq!(e.frequency, 10);
    }

    #[test]
    fn independence_rate_yields_unigrams_only() {
        // Counts arranged so p(x,y) = p(x)p(y) exactly: NPMI = 0, below any
        // positive threshold.
        let mut lines = vec!["x y.".to_string(); 4];
        lines.extend(vec!["x x.".to_string(); 2]);
        lines.extend(vec!["y y.".to_string(); 2]);
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let vocab = detect_phrases(&sentences(&refs), &params(0.001, 2)).unwrap();
        for e in vocab.entries() {
            assert_eq!(e.gram_length, 1, "unexpected phrase {:?}", e.term);
        }
        assert!(vocab.id("x").is_some());
        assert!(vocab.id("y").is_some());
    }

    #[test]
    fn two_passes_form_trigram() {
        // Pass 1 merges (deep, neural); pass 2 merges (deep neural, network).
        let lines: Vec<String> = (0..8)
            .map(|i| {
                if i % 2 == 0 {
                    format!("deep neural network beats filler{i}.")
                } else {
                    format!("filler{i} needs deep neural network.")
                }
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let vocab = detect_phrases(&sentences(&refs), &params(0.5, 5)).unwrap();
        assert!(
            vocab.id("deep neural network").is_some(),
            "terms: {:?}",
            vocab.entries().iter().map(|e| &e.term).collect::<Vec<_>>()
        );
        let id = vocab.id("deep neural network").unwrap();
        assert_eq!(vocab.entry(id).gram_length, 3);
        assert_eq!(vocab.entry(id).frequency, 8);
        // The intermediate bigram was fully absorbed.
        assert!(vocab.id("deep neural").is_none());
    }

    #[test]
    fn threshold_above_max_npmi_yields_unigram_only_vocabulary() {
        let lines: Vec<String> = (0..10)
            .map(|i| format!("neural network improves widget{i}."))
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let vocab = detect_phrases(&sentences(&refs), &params(1.0, 5)).unwrap();
        for e in vocab.entries() {
            assert_eq!(e.gram_length, 1);
        }
    }

    #[test]
    fn empty_stream_yields_empty_vocabulary() {
        let vocab = detect_phrases(&[], &PhraseParams::default()).unwrap();
        assert!(vocab.is_empty());
    }

    #[test]
    fn stopwords_do_not_become_standalone_terms() {
        let lines = vec!["the widget holds the gear."; 12];
        let vocab = detect_phrases(&sentences(&lines), &params(0.9, 5)).unwrap();
        assert!(vocab.id("the").is_none());
        assert!(vocab.id("widget").is_some());
    }
}
