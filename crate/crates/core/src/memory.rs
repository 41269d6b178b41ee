//! Memory estimator shared by every index kind.
//!
//! The figures are modeled sizes, not allocator measurements: each
//! structure is charged a fixed number of bytes per record so that
//! indexes built from the same stream can be compared like for like.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Bytes charged for one keyword id.
pub const TERM_ID_BYTES: usize = 4;
/// Bytes charged for one reference to a stored object or node.
pub const REF_BYTES: usize = 4;
/// Rectangle (4 x f64), latest timestamp and a kind/depth word.
pub const NODE_FIXED_BYTES: usize = 32 + 8 + 8;
/// Object id, timestamp and location; keywords are charged separately.
pub const OBJECT_FIXED_BYTES: usize = 8 + 8 + 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    /// Textual filters: signatures, or inverted files.
    pub text_bytes: usize,
    /// Tree skeleton: rectangles, timestamps, child and entry references.
    pub node_bytes: usize,
    /// Stored objects.
    pub object_bytes: usize,
}

impl MemoryEstimate {
    pub fn total(&self) -> usize {
        self.text_bytes + self.node_bytes + self.object_bytes
    }
}

impl Add for MemoryEstimate {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            text_bytes: self.text_bytes + rhs.text_bytes,
            node_bytes: self.node_bytes + rhs.node_bytes,
            object_bytes: self.object_bytes + rhs.object_bytes,
        }
    }
}

impl AddAssign for MemoryEstimate {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

pub fn object_bytes(term_count: usize) -> usize {
    OBJECT_FIXED_BYTES + term_count * TERM_ID_BYTES
}
