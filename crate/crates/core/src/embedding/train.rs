//! Skip-gram with negative sampling over concept-id sentences.
//!
//! Minimizes, per (input, positive, negatives) instance,
//!
//! ```text
//! L = -log sigmoid(u_pos . v_in) - sum_i log sigmoid(-u_neg_i . v_in)
//! ```
//!
//! with negatives drawn from the unigram distribution raised to the 3/4
//! power. Input-side vectors are returned. Deterministic mode performs
//! sequential updates and is bit-reproducible for a fixed seed; parallel
//! mode performs unsynchronized concurrent updates (lossy by design) and is
//! not bit-reproducible.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;

use super::{EmbeddingError, EmbeddingMatrix};
use crate::corpus::{ConceptId, Vocabulary};
use crate::seeds;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    /// Tokens rarer than this in the training stream are skipped.
    pub min_count: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            seed: 42,
            min_count: 5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 2".into()));
        }
        if self.window < 1 {
            return Err(EmbeddingError::InvalidConfig("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(EmbeddingError::InvalidConfig("negatives must be >= 1".into()));
        }
        if !(self.lr_start > self.lr_end && self.lr_end > 0.0) {
            return Err(EmbeddingError::InvalidConfig(
                "learning rate schedule requires start > end > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Sequential updates; bit-reproducible for a fixed seed.
    Deterministic,
    /// Unsynchronized concurrent updates; not bit-reproducible.
    Parallel,
}

/// f32 cell allowing unsynchronized concurrent read/write during training.
struct Cell(AtomicU32);

impl Cell {
    fn new(v: f32) -> Self {
        Cell(AtomicU32::new(v.to_bits()))
    }

    #[inline]
    fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, d: f32) {
        self.0.store((self.get() + d).to_bits(), Ordering::Relaxed);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log sigmoid(x), stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one training instance.
pub fn sgns_loss(input: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let mut loss = -log_sigmoid(dot(positive, input));
    for neg in negatives {
        loss -= log_sigmoid(-dot(neg, input));
    }
    loss
}

/// Analytic gradients of [`sgns_loss`] with respect to every parameter.
#[derive(Debug, Clone)]
pub struct SgnsGradients {
    pub input: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_gradients(input: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> SgnsGradients {
    let d = input.len();
    let gp = sigmoid(dot(positive, input)) - 1.0;
    let mut g_input: Vec<f64> = (0..d).map(|c| gp * positive[c]).collect();
    let g_positive: Vec<f64> = (0..d).map(|c| gp * input[c]).collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let gn = sigmoid(dot(neg, input));
        for c in 0..d {
            g_input[c] += gn * neg[c];
        }
        g_negatives.push((0..d).map(|c| gn * input[c]).collect());
    }
    SgnsGradients {
        input: g_input,
        positive: g_positive,
        negatives: g_negatives,
    }
}

/// Cumulative table for drawing negatives from counts^(3/4).
struct NegativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0f64;
        for &c in counts {
            acc += (c as f64).powf(0.75);
            cumulative.push(acc);
        }
        Self {
            cumulative,
            total: acc,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> ConceptId {
        let r = rng.random_range(0.0..self.total);
        self.cumulative.partition_point(|&c| c <= r) as ConceptId
    }
}

struct Trainer<'a> {
    dim: usize,
    window: usize,
    negatives: usize,
    min_count: u64,
    counts: &'a [u64],
    table: NegativeTable,
    syn0: Vec<Cell>,
    syn1: Vec<Cell>,
}

impl Trainer<'_> {
    // Offset-indexed loops mirror the flat row layout (l1 + c, l2 + c).
    #[allow(clippy::needless_range_loop)]
    fn train_sentence(&self, sentence: &[ConceptId], alpha: f32, rng: &mut impl Rng) {
        let dim = self.dim;
        let mut delta = vec![0.0f32; dim];
        for (i, &center) in sentence.iter().enumerate() {
            if self.counts[center as usize] < self.min_count {
                continue;
            }
            let span = rng.random_range(1..=self.window);
            let lo = i.saturating_sub(span);
            let hi = (i + span).min(sentence.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let context = sentence[j];
                if self.counts[context as usize] < self.min_count {
                    continue;
                }
                let l1 = context as usize * dim;
                delta.fill(0.0);
                for k in 0..=self.negatives {
                    let (target, label) = if k == 0 {
                        (center, 1.0f32)
                    } else {
                        let neg = self.table.sample(rng);
                        if neg == center {
                            continue;
                        }
                        (neg, 0.0)
                    };
                    let l2 = target as usize * dim;
                    let mut f = 0.0f64;
                    for c in 0..dim {
                        f += f64::from(self.syn0[l1 + c].get()) * f64::from(self.syn1[l2 + c].get());
                    }
                    let g = (label - sigmoid(f) as f32) * alpha;
                    for c in 0..dim {
                        delta[c] += g * self.syn1[l2 + c].get();
                    }
                    for c in 0..dim {
                        self.syn1[l2 + c].add(g * self.syn0[l1 + c].get());
                    }
                }
                for c in 0..dim {
                    self.syn0[l1 + c].add(delta[c]);
                }
            }
        }
    }
}

/// Seeded uniform initialization of the input matrix, in (-0.5/dim, 0.5/dim).
fn seeded_init(vocab_size: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = seeds::rng(seed, &[seeds::label("sgns-init")]);
    (0..vocab_size * dim)
        .map(|_| ((rng.random::<f64>() - 0.5) / dim as f64) as f32)
        .collect()
}

/// Trains input-side vectors over concept-id sentences. Row index equals
/// concept id; terms come from the vocabulary.
pub fn train_sgns(
    sentences: &[Vec<ConceptId>],
    vocab: &Vocabulary,
    config: &TrainConfig,
    mode: TrainMode,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    config.validate()?;
    let vocab_size = vocab.len();
    let mut counts = vec![0u64; vocab_size];
    let mut total_tokens = 0u64;
    for sen in sentences {
        for &id in sen {
            if id as usize >= vocab_size {
                return Err(EmbeddingError::IdOutOfRange {
                    id,
                    size: vocab_size,
                });
            }
            counts[id as usize] += 1;
            total_tokens += 1;
        }
    }
    if total_tokens == 0 {
        return Err(EmbeddingError::EmptyStream);
    }

    let dim = config.dim;
    let trainer = Trainer {
        dim,
        window: config.window,
        negatives: config.negatives,
        min_count: config.min_count,
        counts: &counts,
        table: NegativeTable::new(&counts),
        syn0: seeded_init(vocab_size, dim, config.seed)
            .into_iter()
            .map(Cell::new)
            .collect(),
        syn1: (0..vocab_size * dim).map(|_| Cell::new(0.0)).collect(),
    };

    let total_work = (config.epochs as u64 * total_tokens).max(1);
    let alpha_at = |processed: u64| {
        let t = processed as f64 / total_work as f64;
        (config.lr_start + (config.lr_end - config.lr_start) * t.min(1.0)) as f32
    };

    match mode {
        TrainMode::Deterministic => {
            let mut processed = 0u64;
            for epoch in 0..config.epochs {
                let mut rng =
                    seeds::rng(config.seed, &[seeds::label("sgns-train"), epoch as u64]);
                for sen in sentences {
                    trainer.train_sentence(sen, alpha_at(processed), &mut rng);
                    processed += sen.len() as u64;
                }
            }
        }
        TrainMode::Parallel => {
            let processed = AtomicU64::new(0);
            for epoch in 0..config.epochs {
                sentences
                    .par_chunks(256)
                    .enumerate()
                    .for_each(|(chunk_idx, chunk)| {
                        let mut rng = seeds::rng(
                            config.seed,
                            &[seeds::label("sgns-train"), epoch as u64, chunk_idx as u64],
                        );
                        for sen in chunk {
                            let done = processed
                                .fetch_add(sen.len() as u64, Ordering::Relaxed);
                            trainer.train_sentence(sen, alpha_at(done), &mut rng);
                        }
                    });
            }
        }
    }

    let data: Vec<f32> = trainer.syn0.iter().map(Cell::get).collect();
    let terms = vocab.entries().iter().map(|e| e.term.clone()).collect();
    EmbeddingMatrix::new(terms, dim, data)
}
