//! Segmented streaming index.
//!
//! The stream is cut into segments of `P` objects. Each segment owns one
//! grid-tree; the newest segment is active and takes all insertions, the
//! others are sealed and never change again. Retention is enforced by
//! dropping whole sealed segments, oldest first, while the sealed objects
//! exceed `W`. The same machinery backs the signature index ([`SsgIndex`])
//! and the segmented inverted-file baseline; only the per-node text
//! summary differs.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridConfig, GridNode, GridTree, NodeText, ObjSeq};
use crate::memory::MemoryEstimate;
use crate::model::{GeoTextualObject, Rect, SpaceContext, Timestamp, TskQuery};
use crate::search::{search_trees, Probe, SearchOptions, SearchOutcome};
use crate::signature::{BlockLayout, FrequencyTable, Signature, SignatureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub signature: SignatureConfig,
    pub grid: GridConfig,
    /// Objects per segment (`P`).
    pub segment_capacity: usize,
    /// Retained sealed objects (`W`).
    pub retention: usize,
    pub bounds: Rect,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            signature: SignatureConfig::default(),
            grid: GridConfig::default(),
            segment_capacity: 50_000,
            retention: 5_000_000,
            bounds: Rect::default(),
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        self.signature.validate()?;
        self.grid.validate()?;
        if self.segment_capacity == 0 {
            return Err(Error::Usage("segment capacity P must be at least 1".into()));
        }
        if self.bounds.diagonal().is_nan() || self.bounds.diagonal() <= 0.0 {
            return Err(Error::Usage(format!("bounds {} are degenerate", self.bounds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Ssg,
    Ifq,
    Sifq,
}

impl IndexKind {
    pub const ALL: [IndexKind; 3] = [IndexKind::Ssg, IndexKind::Ifq, IndexKind::Sifq];
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexKind::Ssg => "ssg",
            IndexKind::Ifq => "ifq",
            IndexKind::Sifq => "sifq",
        })
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssg" => Ok(IndexKind::Ssg),
            "ifq" => Ok(IndexKind::Ifq),
            "sifq" => Ok(IndexKind::Sifq),
            other => Err(Error::Usage(format!("unknown index kind {other:?} (ssg|ifq|sifq)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub kind: IndexKind,
    pub segments: usize,
    pub objects: usize,
    pub nodes: usize,
    pub memory: MemoryEstimate,
    pub oldest_t: Option<Timestamp>,
    pub newest_t: Option<Timestamp>,
    pub inserted: u64,
    pub evicted: u64,
    /// Insertions whose timestamp was older than the newest seen and was
    /// clamped to it.
    pub order_violations: u64,
}

/// Operations common to every index kind.
pub trait StreamIndex: Send + Sync {
    fn kind(&self) -> IndexKind;

    fn config(&self) -> &IndexConfig;

    fn insert(&mut self, obj: GeoTextualObject) -> Result<()>;

    /// Normalizers for `q` against the currently retained objects.
    fn context_for(&self, q: &TskQuery) -> Result<SpaceContext>;

    fn search_with(&self, q: &TskQuery, opts: SearchOptions) -> Result<SearchOutcome>;

    fn search(&self, q: &TskQuery) -> Result<SearchOutcome> {
        self.search_with(q, SearchOptions::default())
    }

    /// Every retained object, oldest first.
    fn retained(&self) -> Vec<&GeoTextualObject>;

    fn stats(&self) -> IndexStats;

    /// Structural audit of every tree.
    fn audit(&self) -> Result<()>;
}

/// Stream clock: clamps late arrivals to the newest timestamp seen.
#[derive(Debug, Clone, Default)]
pub(crate) struct StreamClock {
    newest: Option<Timestamp>,
    pub(crate) violations: u64,
}

impl StreamClock {
    pub(crate) fn admit(&mut self, obj: &mut GeoTextualObject) {
        match self.newest {
            Some(n) if obj.t < n => {
                obj.t = n;
                self.violations += 1;
            }
            _ => self.newest = Some(obj.t),
        }
    }

    pub(crate) fn newest(&self) -> Option<Timestamp> {
        self.newest
    }
}

/// How a segmented index summarizes text in its nodes.
pub trait TextModel: Send + Sync {
    type Text: NodeText;
    type Probe: Probe<Self::Text>;

    const KIND: IndexKind;

    fn empty_text(&self) -> Self::Text;

    fn payload(&self, obj: &GeoTextualObject) -> <Self::Text as NodeText>::Payload;

    fn probe(&self, q: &TskQuery, opts: SearchOptions) -> Self::Probe;
}

/// Node summary of the signature index: superimposed object signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSignature(pub Signature);

impl NodeText for NodeSignature {
    type Payload = Signature;

    fn leaf_add(&mut self, _: ObjSeq, _: &GeoTextualObject, sig: &Signature) {
        self.0.or_unchecked(sig);
    }

    fn inner_add(&mut self, _: &GeoTextualObject, sig: &Signature) {
        self.0.or_unchecked(sig);
    }

    fn to_inner(&self) -> Self {
        self.clone()
    }

    fn merge_child(&mut self, child: &Self) {
        self.0.or_unchecked(&child.0);
    }

    fn text_bytes(&self) -> usize {
        self.0.width().div_ceil(8) as usize
    }

    fn payload_bytes(sig: &Signature) -> usize {
        sig.width().div_ceil(8) as usize
    }
}

#[derive(Debug, Clone)]
pub struct SignatureModel {
    cfg: SignatureConfig,
    layout: BlockLayout,
}

impl SignatureModel {
    pub fn new(cfg: SignatureConfig, layout: BlockLayout) -> Result<Self> {
        cfg.validate()?;
        if layout.width() != cfg.bits {
            return Err(Error::Invariant(format!("layout width {} does not match B={}", layout.width(), cfg.bits)));
        }
        Ok(Self { cfg, layout })
    }

    pub fn from_frequencies(cfg: SignatureConfig, freq: &FrequencyTable) -> Result<Self> {
        Self::new(cfg, BlockLayout::build(freq, &cfg)?)
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn signature_config(&self) -> &SignatureConfig {
        &self.cfg
    }
}

pub struct SignatureProbe {
    query: Signature,
    filter: bool,
}

impl Probe<NodeSignature> for SignatureProbe {
    fn admits(&self, text: &NodeSignature) -> bool {
        !self.filter || self.query.subset_unchecked(&text.0)
    }

    fn leaf_candidates(&self, leaf: &GridNode<NodeSignature>, rejected: &mut u64, out: &mut Vec<ObjSeq>) {
        for e in leaf.entries_newest_first() {
            if !self.filter || self.query.subset_unchecked(&e.payload) {
                out.push(e.seq);
            } else {
                *rejected += 1;
            }
        }
    }
}

impl TextModel for SignatureModel {
    type Text = NodeSignature;
    type Probe = SignatureProbe;

    const KIND: IndexKind = IndexKind::Ssg;

    fn empty_text(&self) -> NodeSignature {
        NodeSignature(Signature::zeros(self.cfg.bits))
    }

    fn payload(&self, obj: &GeoTextualObject) -> Signature {
        self.layout.signature(&obj.terms, &self.cfg)
    }

    fn probe(&self, q: &TskQuery, opts: SearchOptions) -> SignatureProbe {
        SignatureProbe { query: self.layout.signature(&q.terms, &self.cfg), filter: opts.text_filter }
    }
}

#[derive(Debug, Clone)]
pub struct Segment<T: NodeText> {
    pub tree: GridTree<T>,
    pub min_t: Option<Timestamp>,
    pub max_t: Option<Timestamp>,
    pub sealed: bool,
}

impl<T: NodeText> Segment<T> {
    fn open(cfg: &IndexConfig, proto: T) -> Result<Self> {
        Ok(Self { tree: GridTree::new(cfg.bounds, cfg.grid, proto)?, min_t: None, max_t: None, sealed: false })
    }

    pub fn count(&self) -> usize {
        self.tree.len()
    }
}

/// Chronological sequence of grid-tree segments with one active segment.
#[derive(Debug, Clone)]
pub struct SegmentedIndex<M: TextModel> {
    cfg: IndexConfig,
    model: M,
    /// Newest first; `segments[0]` is the active segment.
    segments: VecDeque<Segment<M::Text>>,
    clock: StreamClock,
    inserted: u64,
    evicted: u64,
}

/// The segmented signature grid-tree index.
pub type SsgIndex = SegmentedIndex<SignatureModel>;

impl SsgIndex {
    /// Builds an index whose signature layout comes from `freq`.
    pub fn with_frequencies(cfg: IndexConfig, freq: &FrequencyTable) -> Result<Self> {
        Self::new(cfg, SignatureModel::from_frequencies(cfg.signature, freq)?)
    }
}

impl<M: TextModel> SegmentedIndex<M> {
    pub fn new(cfg: IndexConfig, model: M) -> Result<Self> {
        cfg.validate()?;
        let active = Segment::open(&cfg, model.empty_text())?;
        Ok(Self {
            cfg,
            model,
            segments: VecDeque::from([active]),
            clock: StreamClock::default(),
            inserted: 0,
            evicted: 0,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Segments newest first; the first is the active one.
    pub fn segments(&self) -> impl ExactSizeIterator<Item = &Segment<M::Text>> {
        self.segments.iter()
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(Segment::count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn order_violations(&self) -> u64 {
        self.clock.violations
    }

    fn insert_object(&mut self, mut obj: GeoTextualObject) -> Result<()> {
        obj.check(&self.cfg.bounds)?;
        self.clock.admit(&mut obj);
        let payload = self.model.payload(&obj);
        let t = obj.t;
        let active = &mut self.segments[0];
        active.tree.insert(obj, payload)?;
        active.min_t.get_or_insert(t);
        active.max_t = Some(t);
        self.inserted += 1;
        if active.count() >= self.cfg.segment_capacity {
            active.sealed = true;
            self.segments.push_front(Segment::open(&self.cfg, self.model.empty_text())?);
        }
        self.evict_expired();
        Ok(())
    }

    /// Drops whole oldest sealed segments while the sealed objects exceed
    /// the retention limit. Returns the number of objects dropped.
    pub fn evict_expired(&mut self) -> usize {
        let mut sealed: usize = self.segments.iter().skip(1).map(Segment::count).sum();
        let mut dropped = 0;
        while sealed > self.cfg.retention && self.segments.len() > 1 {
            let oldest = self.segments.pop_back().expect("more than one segment");
            debug_assert!(oldest.sealed);
            sealed -= oldest.count();
            dropped += oldest.count();
        }
        self.evicted += dropped as u64;
        dropped
    }

    fn oldest_t(&self) -> Option<Timestamp> {
        self.segments.iter().rev().find_map(|s| s.min_t)
    }

    /// Search with an explicit context, bypassing per-query normalizers.
    pub fn search_in(&self, q: &TskQuery, ctx: &SpaceContext, opts: SearchOptions) -> SearchOutcome {
        let trees: Vec<&GridTree<M::Text>> = self.segments.iter().map(|s| &s.tree).collect();
        search_trees(&trees, &self.model.probe(q, opts), q, ctx)
    }
}

impl<M: TextModel> StreamIndex for SegmentedIndex<M> {
    fn kind(&self) -> IndexKind {
        M::KIND
    }

    fn config(&self) -> &IndexConfig {
        &self.cfg
    }

    fn insert(&mut self, obj: GeoTextualObject) -> Result<()> {
        self.insert_object(obj)
    }

    fn context_for(&self, q: &TskQuery) -> Result<SpaceContext> {
        SpaceContext::for_query(self.cfg.bounds, q.t, self.oldest_t())
    }

    fn search_with(&self, q: &TskQuery, opts: SearchOptions) -> Result<SearchOutcome> {
        let ctx = self.context_for(q)?;
        Ok(self.search_in(q, &ctx, opts))
    }

    fn retained(&self) -> Vec<&GeoTextualObject> {
        self.segments.iter().rev().flat_map(|s| s.tree.objects()).collect()
    }

    fn stats(&self) -> IndexStats {
        let mut memory = MemoryEstimate::default();
        for s in &self.segments {
            memory += s.tree.memory();
        }
        IndexStats {
            kind: M::KIND,
            segments: self.segments.len(),
            objects: self.len(),
            nodes: self.segments.iter().map(|s| s.tree.node_count()).sum(),
            memory,
            oldest_t: self.oldest_t(),
            newest_t: self.clock.newest(),
            inserted: self.inserted,
            evicted: self.evicted,
            order_violations: self.clock.violations,
        }
    }

    fn audit(&self) -> Result<()> {
        let mut prev_min: Option<Timestamp> = None;
        for (i, s) in self.segments.iter().enumerate() {
            s.tree.audit()?;
            if s.sealed == (i == 0) {
                return Err(Error::Invariant(format!("segment {i} sealed flag is {}", s.sealed)));
            }
            if i > 0 && s.count() != self.cfg.segment_capacity {
                return Err(Error::Invariant(format!("sealed segment {i} holds {} objects", s.count())));
            }
            if let (Some(min), Some(max)) = (s.min_t, s.max_t) {
                if min > max || prev_min.is_some_and(|newer| max > newer) {
                    return Err(Error::Invariant(format!("segment {i} time range out of order")));
                }
                prev_min = Some(min);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, TermId};

    fn obj(oid: u64, t: Timestamp) -> GeoTextualObject {
        let x = (oid * 37 % 100) as f64;
        let y = (oid * 61 % 100) as f64;
        GeoTextualObject::new(oid, vec![TermId((oid % 5) as u32), TermId(9)], Point::new(x, y), t).unwrap()
    }

    fn index(p: usize, w: usize) -> SsgIndex {
        let cfg = IndexConfig { segment_capacity: p, retention: w, ..IndexConfig::default() };
        let freq: FrequencyTable = (0..10).map(|i| (TermId(i), 10 - u64::from(i))).collect();
        SsgIndex::with_frequencies(cfg, &freq).unwrap()
    }

    fn oids(idx: &SsgIndex) -> Vec<u64> {
        idx.retained().iter().map(|o| o.oid).collect()
    }

    #[test]
    fn empty_index() {
        let idx = index(2, 4);
        let s = idx.stats();
        assert_eq!((s.objects, s.segments), (0, 1));
        assert_eq!(s.oldest_t, None);
        idx.audit().unwrap();
    }

    #[test]
    fn single_insert() {
        let mut idx = index(2, 4);
        idx.insert(obj(0, 0)).unwrap();
        assert_eq!(idx.segments().len(), 1);
        assert_eq!(idx.segments().next().unwrap().count(), 1);
    }

    #[test]
    fn capacity_rule() {
        let mut idx = index(2, 100);
        for i in 0..3 {
            idx.insert(obj(i, i as i64)).unwrap();
        }
        assert_eq!(idx.segments().len(), 2);
        let counts: Vec<usize> = idx.segments().map(Segment::count).collect();
        assert_eq!(counts, vec![1, 2]);
        idx.audit().unwrap();
    }

    #[test]
    fn seal_and_evict_schedule() {
        // Seals after inserts 2, 4 and 6; the third seal pushes the sealed
        // total to 6 > W = 4 so the oldest segment {0, 1} goes at insert 6.
        let mut idx = index(2, 4);
        for i in 0..7 {
            idx.insert(obj(i, i as i64)).unwrap();
            let sealed: usize = idx.segments().skip(1).map(Segment::count).sum();
            assert!(sealed <= 4);
            assert!(idx.len() <= 4 + 2);
        }
        assert_eq!(oids(&idx), vec![2, 3, 4, 5, 6]);
        assert_eq!(idx.stats().evicted, 2);
        idx.audit().unwrap();
    }

    #[test]
    fn zero_retention_drops_every_sealed_segment() {
        let mut idx = index(3, 0);
        for i in 0..10 {
            idx.insert(obj(i, i as i64)).unwrap();
            assert_eq!(idx.segments().len(), 1);
        }
        assert_eq!(oids(&idx), vec![9]);
    }

    #[test]
    fn out_of_order_timestamps_are_clamped() {
        let mut idx = index(10, 100);
        idx.insert(obj(0, 100)).unwrap();
        idx.insert(obj(1, 50)).unwrap();
        idx.insert(obj(2, 120)).unwrap();
        assert_eq!(idx.order_violations(), 1);
        let ts: Vec<Timestamp> = idx.retained().iter().map(|o| o.t).collect();
        assert_eq!(ts, vec![100, 100, 120]);
    }

    #[test]
    fn rejects_out_of_bounds() {
        let mut idx = index(10, 100);
        let bad = GeoTextualObject::new(1, vec![TermId(1)], Point::new(-1.0, 5.0), 0).unwrap();
        assert!(matches!(idx.insert(bad), Err(Error::Domain(_))));
        assert!(idx.is_empty());
        assert_eq!(idx.stats().inserted, 0);
    }

    #[test]
    fn memory_is_monotone_and_signature_bytes_add_up() {
        let mut idx = index(50, 1000);
        let mut last = 0;
        for i in 0..400 {
            idx.insert(obj(i, i as i64)).unwrap();
            let s = idx.stats();
            assert!(s.memory.total() >= last);
            last = s.memory.total();
            assert_eq!(s.memory.text_bytes, (s.objects + s.nodes) * 512 / 8);
        }
    }

    #[test]
    fn config_validation() {
        let bad = IndexConfig { segment_capacity: 0, ..IndexConfig::default() };
        assert!(bad.validate().is_err());
        assert_eq!("SIFQ".parse::<IndexKind>().unwrap(), IndexKind::Sifq);
        assert!("rtree".parse::<IndexKind>().is_err());
    }
}
