//! Streaming document ingestion from JSONL or CSV.
//!
//! Malformed records (parse failures, missing fields, empty or duplicate ids)
//! are counted and skipped; only an unreadable file is fatal.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;
use std::str::FromStr;

use super::{CorpusError, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown corpus format {other:?} (jsonl or csv)")),
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct IngestStats {
    /// Documents yielded.
    pub produced: u64,
    /// Malformed records skipped.
    pub skipped: u64,
}

enum Source {
    Jsonl(Lines<BufReader<File>>),
    Csv(Box<csv::DeserializeRecordsIntoIter<File, Document>>),
}

/// Iterator over valid documents in file order.
pub struct DocumentReader {
    source: Source,
    seen_ids: HashSet<String>,
    stats: IngestStats,
}

impl DocumentReader {
    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Drains the reader into a vector plus final counts.
    pub fn collect_all(mut self) -> (Vec<Document>, IngestStats) {
        let mut docs = Vec::new();
        for d in &mut self {
            docs.push(d);
        }
        (docs, self.stats)
    }

    fn admit(&mut self, doc: Document) -> Option<Document> {
        if doc.id.is_empty() || !self.seen_ids.insert(doc.id.clone()) {
            self.stats.skipped += 1;
            return None;
        }
        self.stats.produced += 1;
        Some(doc)
    }
}

impl Iterator for DocumentReader {
    type Item = Document;

    fn next(&mut self) -> Option<Document> {
        loop {
            let parsed: Option<Option<Document>> = match &mut self.source {
                Source::Jsonl(lines) => match lines.next()? {
                    Ok(line) => {
                        if line.trim().is_empty() {
                            Some(None)
                        } else {
                            match serde_json::from_str::<Document>(&line) {
                                Ok(doc) => Some(Some(doc)),
                                Err(_) => {
                                    self.stats.skipped += 1;
                                    Some(None)
                                }
                            }
                        }
                    }
                    Err(_) => {
                        self.stats.skipped += 1;
                        Some(None)
                    }
                },
                Source::Csv(records) => match records.next()? {
                    Ok(doc) => Some(Some(doc)),
                    Err(_) => {
                        self.stats.skipped += 1;
                        Some(None)
                    }
                },
            };
            match parsed {
                Some(Some(doc)) => {
                    if let Some(doc) = self.admit(doc) {
                        return Some(doc);
                    }
                }
                Some(None) => continue,
                None => return None,
            }
        }
    }
}

/// Opens a corpus file for streaming. An unreadable file is fatal; per-record
/// problems are counted on the reader and skipped.
pub fn ingest_documents(path: &Path, format: CorpusFormat) -> Result<DocumentReader, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source = match format {
        CorpusFormat::Jsonl => Source::Jsonl(BufReader::new(file).lines()),
        CorpusFormat::Csv => {
            let reader = csv::ReaderBuilder::new().from_reader(file);
            Source::Csv(Box::new(reader.into_deserialize()))
        }
    };
    Ok(DocumentReader {
        source,
        seen_ids: HashSet::new(),
        stats: IngestStats::default(),
    })
}
