//! Concept embeddings and similarity queries.
//!
//! Houses the dense vector matrix behind every pairwise semantic similarity:
//! rows are concept vectors indexed by concept id, similarity is the cosine
//! of the corresponding vectors.

mod io;
mod train;

pub use io::{load_binary, load_embeddings, load_tsv, save_binary, save_tsv, EmbeddingFormat};
pub use train::{sgns_gradients, sgns_loss, train_sgns, SgnsGradients, TrainConfig, TrainMode};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::ConceptId;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed embedding file {path} at line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate term {0:?} in embedding file")]
    DuplicateTerm(String),
    #[error("vector for concept {0} has zero norm; cosine similarity undefined")]
    ZeroVector(ConceptId),
    #[error("non-finite value in vector for concept {0}")]
    NonFinite(ConceptId),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("concept id {id} out of range (vocabulary size {size})")]
    IdOutOfRange { id: ConceptId, size: usize },
    #[error("prior set is empty")]
    EmptyPrior,
    #[error("training stream is empty")]
    EmptyStream,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Per-concept dense vectors with cosine-similarity access.
///
/// Row index equals the concept id of the vocabulary the matrix was built
/// against. Vectors are stored as f32; similarity arithmetic runs in f64.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    dim: usize,
    terms: Vec<String>,
    data: Vec<f32>,
    /// Squared Euclidean norm per row, cached so similarity queries cost one
    /// dot product.
    sq_norms: Vec<f64>,
    unit_normalized: bool,
}

fn squared_norm(row: &[f32]) -> f64 {
    row.iter().map(|v| f64::from(*v) * f64::from(*v)).sum()
}

impl EmbeddingMatrix {
    pub fn new(terms: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        assert_eq!(terms.len() * dim, data.len(), "matrix shape mismatch");
        let mut sq_norms = Vec::with_capacity(terms.len());
        for (i, row) in data.chunks(dim.max(1)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(i as ConceptId));
            }
            sq_norms.push(squared_norm(row));
        }
        Ok(Self {
            dim,
            terms,
            data,
            sq_norms,
            unit_normalized: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_unit_normalized(&self) -> bool {
        self.unit_normalized
    }

    pub fn term(&self, id: ConceptId) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn vector(&self, id: ConceptId) -> &[f32] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    fn check_id(&self, id: ConceptId) -> Result<(), EmbeddingError> {
        if (id as usize) < self.terms.len() {
            Ok(())
        } else {
            Err(EmbeddingError::IdOutOfRange {
                id,
                size: self.terms.len(),
            })
        }
    }

    /// Scales every row to unit Euclidean norm. Zero rows are an error.
    pub fn normalize_in_place(&mut self) -> Result<(), EmbeddingError> {
        for (i, row) in self.data.chunks_mut(self.dim).enumerate() {
            let norm = self.sq_norms[i].sqrt();
            if norm == 0.0 {
                return Err(EmbeddingError::ZeroVector(i as ConceptId));
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
            self.sq_norms[i] = squared_norm(row);
        }
        self.unit_normalized = true;
        Ok(())
    }

    /// Adds the unit-normalized row to `sum` componentwise and returns the
    /// row's squared length after normalization (its pair-identity self
    /// term).
    pub(crate) fn accumulate_unit(
        &self,
        id: ConceptId,
        sum: &mut [f64],
    ) -> Result<f64, EmbeddingError> {
        let row = self.vector(id);
        let mut self_term = 0.0f64;
        if self.unit_normalized {
            for (s, v) in sum.iter_mut().zip(row) {
                let u = f64::from(*v);
                *s += u;
                self_term += u * u;
            }
        } else {
            let norm = self.sq_norms[id as usize].sqrt();
            if norm == 0.0 {
                return Err(EmbeddingError::ZeroVector(id));
            }
            for (s, v) in sum.iter_mut().zip(row) {
                let u = f64::from(*v) / norm;
                *s += u;
                self_term += u * u;
            }
        }
        Ok(self_term)
    }

    /// Cosine similarity of two concepts, clamped to [-1, 1].
    ///
    /// The dot product is always evaluated with the lower id on the left, so
    /// `cosine(a, b)` and `cosine(b, a)` share the same arithmetic and are
    /// exactly equal. `cosine(x, x)` is exactly 1 for nonzero vectors.
    pub fn cosine(&self, a: ConceptId, b: ConceptId) -> Result<f64, EmbeddingError> {
        self.check_id(a)?;
        self.check_id(b)?;
        let (lo, hi) = (a.min(b), a.max(b));
        let va = self.vector(lo);
        let vb = self.vector(hi);
        let na = self.sq_norms[lo as usize];
        let nb = self.sq_norms[hi as usize];
        if na == 0.0 {
            return Err(EmbeddingError::ZeroVector(lo));
        }
        if nb == 0.0 {
            return Err(EmbeddingError::ZeroVector(hi));
        }
        // Identical vectors are similarity 1 by definition; the division
        // below would land within one ulp of it.
        if va == vb {
            return Ok(1.0);
        }
        let mut dot = 0.0f64;
        for (x, y) in va.iter().zip(vb) {
            dot += f64::from(*x) * f64::from(*y);
        }
        // sqrt of the product rounds once, not three times.
        Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
    }

    /// Exact maximum cosine similarity of `x` over a set of prior concepts.
    ///
    /// Ties break to the lexicographically smallest term. Occurrences of `x`
    /// itself inside `prior` are ignored; an effectively empty prior set is
    /// an error.
    pub fn max_similarity_to_set(
        &self,
        x: ConceptId,
        prior: &[ConceptId],
    ) -> Result<(ConceptId, f64), EmbeddingError> {
        self.check_id(x)?;
        if prior.is_empty() {
            return Err(EmbeddingError::EmptyPrior);
        }
        let nx = self.sq_norms[x as usize];
        if nx == 0.0 {
            return Err(EmbeddingError::ZeroVector(x));
        }
        let vx = self.vector(x);
        // Chunked scan with a tight inner loop; the per-pair arithmetic
        // matches cosine() exactly (IEEE products commute, same summation
        // order). Max with deterministic tie-breaking is associative and
        // commutative, so the reduce returns the same argmax at any thread
        // count.
        let best = prior
            .par_chunks(2048)
            .map(|chunk| -> Result<Option<(ConceptId, f64)>, EmbeddingError> {
                let mut best: Option<(ConceptId, f64)> = None;
                for &p in chunk {
                    if p == x {
                        continue;
                    }
                    self.check_id(p)?;
                    let np = self.sq_norms[p as usize];
                    if np == 0.0 {
                        return Err(EmbeddingError::ZeroVector(p));
                    }
                    let mut dot = 0.0f64;
                    for (a, b) in vx.iter().zip(self.vector(p)) {
                        dot += f64::from(*a) * f64::from(*b);
                    }
                    let sim = (dot / (nx * np).sqrt()).clamp(-1.0, 1.0);
                    best = Some(match best {
                        None => (p, sim),
                        Some(cur) => pick_max(cur, (p, sim), self),
                    });
                }
                Ok(best)
            })
            .try_reduce(
                || None,
                |a, b| {
                    Ok(match (a, b) {
                        (Some(a), Some(b)) => Some(pick_max(a, b, self)),
                        (a, b) => a.or(b),
                    })
                },
            )?;
        best.ok_or(EmbeddingError::EmptyPrior)
    }
}

fn pick_max(
    a: (ConceptId, f64),
    b: (ConceptId, f64),
    m: &EmbeddingMatrix,
) -> (ConceptId, f64) {
    if b.1 > a.1 || (b.1 == a.1 && m.term(b.0) < m.term(a.0)) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let terms = (0..rows.len()).map(|i| format!("t{i:03}")).collect();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EmbeddingMatrix::new(terms, dim, data).unwrap()
    }

    #[test]
    fn identical_vectors_have_similarity_one() {
        let m = matrix(&[&[0.3, 0.4], &[0.3, 0.4]]);
        assert_eq!(m.cosine(0, 1).unwrap(), 1.0);
        assert_eq!(m.cosine(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_vectors_have_similarity_zero() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_abs_diff_eq!(m.cosine(0, 1).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.7071 is the hand-computed expectation
    fn forty_five_degrees() {
        let m = matrix(&[&[1.0, 1.0], &[1.0, 0.0]]);
        assert_abs_diff_eq!(m.cosine(0, 1).unwrap(), 0.7071, epsilon = 1e-4);
    }

    #[test]
    fn zero_vector_is_an_error() {
        let m = matrix(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            m.cosine(0, 1),
            Err(EmbeddingError::ZeroVector(0))
        ));
    }

    #[test]
    fn symmetry_is_exact() {
        let mut rng = crate::seeds::rng(11, &[1]);
        for _ in 0..50 {
            let rows: Vec<Vec<f32>> = (0..2)
                .map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
            let m = matrix(&refs);
            let ab = m.cosine(0, 1).unwrap();
            let ba = m.cosine(1, 0).unwrap();
            assert_eq!(ab.to_bits(), ba.to_bits());
            assert!((-1.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn max_similarity_finds_duplicate() {
        let m = matrix(&[&[0.6, 0.8], &[0.0, 1.0], &[0.6, 0.8]]);
        let (arg, sim) = m.max_similarity_to_set(0, &[1, 2]).unwrap();
        assert_eq!(arg, 2);
        assert_eq!(sim, 1.0);
    }

    #[test]
    fn max_similarity_matches_exhaustive_scan() {
        let mut rng = crate::seeds::rng(13, &[2]);
        let rows: Vec<Vec<f32>> = (0..51)
            .map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        let m = matrix(&refs);
        let prior: Vec<ConceptId> = (1..51).collect();
        let (arg, sim) = m.max_similarity_to_set(0, &prior).unwrap();
        // Brute-force oracle: sequential scan over the whole prior set.
        let mut best = (prior[0], m.cosine(0, prior[0]).unwrap());
        for &p in &prior[1..] {
            let s = m.cosine(0, p).unwrap();
            if s > best.1 {
                best = (p, s);
            }
        }
        assert_eq!(arg, best.0);
        assert_eq!(sim, best.1);
    }

    #[test]
    fn ties_break_to_lexicographically_smallest_term() {
        // Rows 1 and 2 are both identical to row 0. Term "t001" < "t002".
        let m = matrix(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]);
        let (arg, sim) = m.max_similarity_to_set(0, &[2, 1]).unwrap();
        assert_eq!(sim, 1.0);
        assert_eq!(m.term(arg), "t001");
    }

    #[test]
    fn empty_prior_is_an_error() {
        let m = matrix(&[&[1.0, 0.0]]);
        assert!(matches!(
            m.max_similarity_to_set(0, &[]),
            Err(EmbeddingError::EmptyPrior)
        ));
        // A prior containing only x itself is effectively empty.
        assert!(matches!(
            m.max_similarity_to_set(0, &[0]),
            Err(EmbeddingError::EmptyPrior)
        ));
    }

    #[test]
    fn normalization_yields_unit_rows() {
        let mut m = matrix(&[&[3.0, 4.0], &[1.0, 1.0]]);
        m.normalize_in_place().unwrap();
        assert!(m.is_unit_normalized());
        for id in 0..2 {
            let n: f64 = m
                .vector(id)
                .iter()
                .map(|v| f64::from(*v) * f64::from(*v))
                .sum();
            assert_abs_diff_eq!(n.sqrt(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn non_finite_rows_rejected() {
        let err = EmbeddingMatrix::new(vec!["a".into()], 2, vec![f32::NAN, 0.0]);
        assert!(matches!(err, Err(EmbeddingError::NonFinite(0))));
    }
}
