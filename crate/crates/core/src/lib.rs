//! Longitudinal concept-space analysis.
//!
//! Extracts concept terms from a timestamped text corpus, embeds them, dates
//! each concept's first appearance, and measures how the concept space grows
//! and how original newly appearing concepts are: mean pairwise similarity
//! over sampled subgraphs, mean new-to-prior similarity, and the additional
//! information content each new concept brings (bits, from its maximum
//! similarity to prior concepts). Trends are tested with two-sample
//! Kolmogorov-Smirnov statistics and rendered as deterministic CSV/SVG
//! reports.

pub mod corpus;
pub mod embedding;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod seeds;
pub mod stats;
pub mod synth;
pub mod timeline;

pub use corpus::{ConceptId, Document, Vocabulary};
pub use embedding::EmbeddingMatrix;
pub use metrics::{MetricSeries, SubgraphSample};
pub use timeline::ConceptTimeline;
