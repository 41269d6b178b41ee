//! On-disk index images.
//!
//! An image is a JSON snapshot of the configuration, vocabulary, keyword
//! history and retained objects. Loading re-inserts the objects oldest
//! first, which reproduces the searchable set exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::text::Vocabulary;
use crate::index::{IndexConfig, IndexKind, StreamIndex};
use crate::model::GeoTextualObject;
use crate::signature::FrequencyTable;

const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexImage {
    pub format: u32,
    pub kind: IndexKind,
    pub config: IndexConfig,
    pub vocab: Vocabulary,
    pub frequencies: FrequencyTable,
    /// Oldest first.
    pub objects: Vec<GeoTextualObject>,
}

impl IndexImage {
    pub fn capture(index: &dyn StreamIndex, vocab: &Vocabulary, frequencies: &FrequencyTable) -> Self {
        Self {
            format: FORMAT,
            kind: index.kind(),
            config: *index.config(),
            vocab: vocab.clone(),
            frequencies: frequencies.clone(),
            objects: index.retained().into_iter().cloned().collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut image: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if image.format != FORMAT {
            return Err(Error::Usage(format!(
                "{}: image format {} is not supported (expected {FORMAT})",
                path.display(),
                image.format
            )));
        }
        image.vocab.reindex();
        Ok(image)
    }

    pub fn rebuild(&self) -> Result<Box<dyn StreamIndex>> {
        let mut index = crate::build_index(self.kind, self.config, &self.frequencies)?;
        for o in &self.objects {
            index.insert(o.clone())?;
        }
        Ok(index)
    }
}
