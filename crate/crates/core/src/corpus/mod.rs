//! Corpus ingestion and concept extraction.
//!
//! Turns timestamped text records into sequences of concept terms (words and
//! multi-word phrases up to 4-grams) suitable for embedding training and
//! first-appearance dating.

mod extract;
mod ingest;
mod lemma;
mod phrases;
mod stopwords;
mod tokenize;

pub use extract::{extract_concepts, segment_tokens};
pub use ingest::{ingest_documents, CorpusFormat, DocumentReader, IngestStats};
pub use lemma::lemmatize;
pub use phrases::{detect_phrases, PhraseParams};
pub use stopwords::is_stopword;
pub use tokenize::{tokenize, tokenize_lemmatized};

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense index of a vocabulary term.
pub type ConceptId = u32;

/// Longest phrase length the pipeline will form or match.
pub const MAX_GRAM: usize = 4;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("duplicate vocabulary term {0:?}")]
    DuplicateTerm(String),
    #[error("term {term:?} has {got} tokens, more than the {MAX_GRAM}-gram limit")]
    TermTooLong { term: String, got: usize },
    #[error("malformed vocabulary file {path} at line {line}: {message}")]
    MalformedVocabulary {
        path: String,
        line: usize,
        message: String,
    },
}

/// One timestamped text record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub year: i32,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl Document {
    /// Tokenized, lemmatized sentences of title followed by abstract.
    pub fn sentences(&self) -> Vec<TokenizedSentence> {
        let mut out = tokenize_lemmatized(&self.title);
        out.extend(tokenize_lemmatized(&self.abstract_text));
        out
    }
}

/// One sentence as normalized tokens. Tokens are never empty and never
/// consist solely of punctuation or digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
}

/// One vocabulary term with its corpus statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub term: String,
    pub gram_length: u8,
    pub frequency: u64,
}

/// Concept terms with dense contiguous ids (row order = id order).
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, ConceptId>,
    max_gram: usize,
}

impl Vocabulary {
    /// Builds a vocabulary assigning ids 0.. in the order given.
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut max_gram = 0usize;
        for (i, e) in entries.iter().enumerate() {
            let grams = e.term.split(' ').count();
            if grams > MAX_GRAM {
                return Err(CorpusError::TermTooLong {
                    term: e.term.clone(),
                    got: grams,
                });
            }
            debug_assert_eq!(grams, e.gram_length as usize);
            max_gram = max_gram.max(grams);
            if index.insert(e.term.clone(), i as ConceptId).is_some() {
                return Err(CorpusError::DuplicateTerm(e.term.clone()));
            }
        }
        Ok(Self {
            entries,
            index,
            max_gram,
        })
    }

    /// Vocabulary from bare terms (e.g. rows of a pretrained vector file),
    /// with frequencies initially zero.
    pub fn from_terms<I, S>(terms: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = terms
            .into_iter()
            .map(|t| {
                let term: String = t.into();
                let gram_length = term.split(' ').count() as u8;
                VocabEntry {
                    term,
                    gram_length,
                    frequency: 0,
                }
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn id(&self, term: &str) -> Option<ConceptId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: ConceptId) -> &str {
        &self.entries[id as usize].term
    }

    pub fn entry(&self, id: ConceptId) -> &VocabEntry {
        &self.entries[id as usize]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest gram length present (0 for an empty vocabulary).
    pub fn max_gram(&self) -> usize {
        self.max_gram
    }

    /// Overwrites per-term frequencies (used when the vocabulary came from a
    /// pretrained vector file and counts are observed during extraction).
    pub fn set_frequencies(&mut self, freqs: &[u64]) {
        assert_eq!(freqs.len(), self.entries.len());
        for (e, f) in self.entries.iter_mut().zip(freqs) {
            e.frequency = *f;
        }
    }

    /// Writes `term \t gram_length \t frequency` rows.
    pub fn export_tsv(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{}", e.term, e.gram_length, e.frequency).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    /// Reads a vocabulary written by [`Vocabulary::export_tsv`].
    pub fn import_tsv(path: &Path) -> Result<Self, CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let reader = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let malformed = |message: &str| CorpusError::MalformedVocabulary {
                path: path.display().to_string(),
                line: lineno + 1,
                message: message.to_string(),
            };
            let term = parts.next().ok_or_else(|| malformed("missing term"))?;
            let gram: u8 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("bad gram_length"))?;
            let freq: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("bad frequency"))?;
            entries.push(VocabEntry {
                term: term.to_string(),
                gram_length: gram,
                frequency: freq,
            });
        }
        Self::from_entries(entries)
    }
}
