//! Embedding interchange: TSV text and a little-endian binary layout.
//!
//! TSV rows are `term \t v1 \t ... \t vd` with floats printed in shortest
//! round-trip form, so export/import is lossless. The binary layout is a
//! fixed header (magic, version, dimension, row count) followed by a term
//! table and the packed f32 rows, mmap-friendly at large scale.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingMatrix};

const MAGIC: &[u8; 4] = b"CVEC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Tsv,
    Binary,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(format!("unknown embedding format {other:?} (tsv or binary)")),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a matrix, optionally unit-normalizing rows on the way in.
pub fn load_embeddings(
    path: &Path,
    format: EmbeddingFormat,
    normalize: bool,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut m = match format {
        EmbeddingFormat::Tsv => load_tsv(path),
        EmbeddingFormat::Binary => load_binary(path),
    }?;
    if normalize {
        m.normalize_in_place()?;
    }
    Ok(m)
}

pub fn load_tsv(path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut terms: Vec<String> = Vec::new();
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut data: Vec<f32> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let malformed = |message: String| EmbeddingError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let mut parts = line.split('\t');
        let term = parts.next().unwrap_or_default();
        if term.is_empty() {
            return Err(malformed("empty term".into()));
        }
        let mut row = Vec::with_capacity(dim.unwrap_or(0));
        for p in parts {
            let v: f32 = p
                .parse()
                .map_err(|_| malformed(format!("bad float {p:?}")))?;
            row.push(v);
        }
        match dim {
            None => {
                if row.is_empty() {
                    return Err(malformed("row has no vector components".into()));
                }
                dim = Some(row.len());
            }
            Some(d) if d != row.len() => {
                return Err(malformed(format!(
                    "row has dimension {}, expected {d}",
                    row.len()
                )));
            }
            _ => {}
        }
        if !seen.insert(term.to_string()) {
            return Err(EmbeddingError::DuplicateTerm(term.to_string()));
        }
        terms.push(term.to_string());
        data.extend_from_slice(&row);
    }
    EmbeddingMatrix::new(terms, dim.unwrap_or(0), data)
}

pub fn save_tsv(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for id in 0..m.len() {
        let mut line = m.term(id as u32).to_string();
        for v in m.vector(id as u32) {
            line.push('\t');
            line.push_str(&format!("{v}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn save_binary(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let err = io_err(path);
    w.write_all(MAGIC).map_err(&err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(&err)?;
    w.write_all(&(m.dim() as u32).to_le_bytes()).map_err(&err)?;
    w.write_all(&(m.len() as u64).to_le_bytes()).map_err(&err)?;
    w.write_all(&u8::from(m.is_unit_normalized()).to_le_bytes())
        .map_err(&err)?;
    for id in 0..m.len() {
        let bytes = m.term(id as u32).as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(&err)?;
        w.write_all(bytes).map_err(&err)?;
    }
    for id in 0..m.len() {
        for v in m.vector(id as u32) {
            w.write_all(&v.to_le_bytes()).map_err(&err)?;
        }
    }
    w.flush().map_err(&err)
}

pub fn load_binary(path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let err = io_err(path);
    let malformed = |message: &str| EmbeddingError::Malformed {
        path: path.display().to_string(),
        line: 0,
        message: message.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(&err)?;
    if &magic != MAGIC {
        return Err(malformed("bad magic bytes"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(&err)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(malformed("unsupported version"));
    }
    r.read_exact(&mut b4).map_err(&err)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(&err)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1).map_err(&err)?;
    let normalized = b1[0] != 0;

    let mut terms = Vec::with_capacity(count);
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b4).map_err(&err)?;
        let len = u32::from_le_bytes(b4) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(&err)?;
        let term = String::from_utf8(buf).map_err(|_| malformed("term is not utf-8"))?;
        if !seen.insert(term.clone()) {
            return Err(EmbeddingError::DuplicateTerm(term));
        }
        terms.push(term);
    }
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        r.read_exact(&mut b4).map_err(&err)?;
        data.push(f32::from_le_bytes(b4));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(&err)? != 0 {
        return Err(malformed("trailing bytes after vector block"));
    }
    let mut m = EmbeddingMatrix::new(terms, dim, data)?;
    if normalized {
        m.normalize_in_place()?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            vec!["alpha".into(), "beta gamma".into(), "delta".into()],
            4,
            vec![
                0.25, -1.5, 3.25e-3, 0.0, //
                1.0, 2.0, 3.0, 4.0, //
                -0.125, 0.5, 0.75, -2.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn tsv_loads_three_terms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        save_tsv(&sample(), &path).unwrap();
        let m = load_tsv(&path).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.dim(), 4);
        assert_eq!(m.term(1), "beta gamma");
    }

    #[test]
    fn tsv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        let orig = sample();
        save_tsv(&orig, &path).unwrap();
        let back = load_tsv(&path).unwrap();
        for id in 0..orig.len() as u32 {
            for (a, b) in orig.vector(id).iter().zip(back.vector(id)) {
                assert!((f64::from(*a) - f64::from(*b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.tsv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "a\t1\t2\t3\t4").unwrap();
        writeln!(f, "b\t1\t2\t3\t4\t5").unwrap();
        match load_tsv(&path) {
            Err(EmbeddingError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_terms_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.tsv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "a\t1\t2").unwrap();
        writeln!(f, "a\t3\t4").unwrap();
        assert!(matches!(
            load_tsv(&path),
            Err(EmbeddingError::DuplicateTerm(_))
        ));
    }

    #[test]
    fn binary_round_trip_preserves_bits_and_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        let mut orig = sample();
        orig.normalize_in_place().unwrap();
        save_binary(&orig, &path).unwrap();
        let back = load_binary(&path).unwrap();
        assert!(back.is_unit_normalized());
        assert_eq!(back.terms(), orig.terms());
    }

    #[test]
    fn binary_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOPEnope").unwrap();
        assert!(load_binary(&path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn binary_round_trip_bits(rows in proptest::collection::vec(
            proptest::collection::vec(-1e3f32..1e3, 3), 1..6)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.bin");
            let terms: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
            let data: Vec<f32> = rows.iter().flatten().copied().collect();
            let orig = EmbeddingMatrix::new(terms, 3, data).unwrap();
            save_binary(&orig, &path).unwrap();
            let back = load_binary(&path).unwrap();
            for id in 0..orig.len() as u32 {
                for (a, b) in orig.vector(id).iter().zip(back.vector(id)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
