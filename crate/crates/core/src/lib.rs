//! Streaming in-memory spatio-textual index.
//!
//! Geo-tagged, timestamped keyword objects arrive as a stream and are
//! indexed in time-ordered segments of grid-trees whose nodes carry
//! frequency superimposed-coding signatures. Top-k temporal spatial
//! keyword queries return the `k` objects containing every query keyword
//! with the smallest blend of normalized distance and age.
//!
//! Two inverted-file baselines ([`IfqIndex`], [`SifqIndex`]) share the same
//! tree and search code, and [`search::brute_force_topk`] is the
//! definitional oracle all of them must agree with.

pub mod baselines;
pub mod error;
pub mod grid;
pub mod harness;
pub mod index;
pub mod memory;
pub mod model;
pub mod search;
pub mod signature;

pub use baselines::{IfqIndex, InvertedFile, SifqIndex};
pub use error::{Error, Result};
pub use grid::{GridConfig, GridTree};
pub use index::{IndexConfig, IndexKind, IndexStats, SegmentedIndex, SsgIndex, StreamIndex};
pub use model::{GeoTextualObject, Point, Rect, ScoredResult, SpaceContext, TermId, Timestamp, TskQuery};
pub use search::{brute_force_topk, SearchOptions, SearchOutcome, SearchTrace};
pub use signature::{BlockLayout, FrequencyTable, Signature, SignatureConfig};

/// Builds an empty index of the given kind. `freq` drives the signature
/// layout and is ignored by the inverted-file baselines.
pub fn build_index(kind: IndexKind, cfg: IndexConfig, freq: &FrequencyTable) -> Result<Box<dyn StreamIndex>> {
    Ok(match kind {
        IndexKind::Ssg => Box::new(SsgIndex::with_frequencies(cfg, freq)?),
        IndexKind::Ifq => Box::new(IfqIndex::new(cfg)?),
        IndexKind::Sifq => Box::new(SifqIndex::with_config(cfg)?),
    })
}
