//! Inverted-file quadtree baselines.
//!
//! Nodes carry inverted files instead of signatures: inner cells keep the
//! set of terms present anywhere below them, leaf cells keep one
//! reverse-chronological posting list per term. IFQ is a single tree over
//! all retained objects that expires objects one at a time; SIFQ reuses
//! the segmented index with inverted files in place of signatures.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::grid::{GridNode, GridTree, NodeId, NodeKind, NodeText, ObjSeq};
use crate::index::{IndexConfig, IndexKind, IndexStats, SegmentedIndex, StreamClock, StreamIndex, TextModel};
use crate::memory::{REF_BYTES, TERM_ID_BYTES};
use crate::model::{GeoTextualObject, SpaceContext, TermId, TskQuery};
use crate::search::{search_trees, Probe, SearchOptions, SearchOutcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvertedFile {
    /// Inner cell: terms occurring anywhere in the subtree.
    Presence(BTreeSet<TermId>),
    /// Leaf cell: per-term object lists, oldest first in memory and read
    /// newest first.
    Postings(BTreeMap<TermId, Vec<ObjSeq>>),
}

impl InvertedFile {
    pub fn contains(&self, term: TermId) -> bool {
        match self {
            InvertedFile::Presence(set) => set.contains(&term),
            InvertedFile::Postings(map) => map.contains_key(&term),
        }
    }

    pub fn term_count(&self) -> usize {
        match self {
            InvertedFile::Presence(set) => set.len(),
            InvertedFile::Postings(map) => map.len(),
        }
    }

    pub fn terms(&self) -> Box<dyn Iterator<Item = TermId> + '_> {
        match self {
            InvertedFile::Presence(set) => Box::new(set.iter().copied()),
            InvertedFile::Postings(map) => Box::new(map.keys().copied()),
        }
    }

    pub fn postings(&self, term: TermId) -> Option<&[ObjSeq]> {
        match self {
            InvertedFile::Postings(map) => map.get(&term).map(Vec::as_slice),
            InvertedFile::Presence(_) => None,
        }
    }

    /// Removes `seq` from the posting lists of `terms`; returns the terms
    /// whose list became empty.
    fn remove_posting(&mut self, seq: ObjSeq, terms: &[TermId]) -> Vec<TermId> {
        let InvertedFile::Postings(map) = self else { unreachable!("postings live in leaves only") };
        let mut vanished = Vec::new();
        for t in terms {
            if let Some(list) = map.get_mut(t) {
                if let Some(pos) = list.iter().position(|&s| s == seq) {
                    list.remove(pos);
                }
                if list.is_empty() {
                    map.remove(t);
                    vanished.push(*t);
                }
            }
        }
        vanished
    }
}

impl NodeText for InvertedFile {
    type Payload = ();

    fn leaf_add(&mut self, seq: ObjSeq, obj: &GeoTextualObject, _: &()) {
        let InvertedFile::Postings(map) = self else { unreachable!("leaf with presence summary") };
        for &t in &obj.terms {
            map.entry(t).or_default().push(seq);
        }
    }

    fn inner_add(&mut self, obj: &GeoTextualObject, _: &()) {
        let InvertedFile::Presence(set) = self else { unreachable!("inner node with postings summary") };
        set.extend(obj.terms.iter().copied());
    }

    fn to_inner(&self) -> Self {
        InvertedFile::Presence(self.terms().collect())
    }

    fn merge_child(&mut self, child: &Self) {
        let InvertedFile::Presence(set) = self else { unreachable!("merge into a leaf summary") };
        set.extend(child.terms());
    }

    fn text_bytes(&self) -> usize {
        match self {
            InvertedFile::Presence(set) => set.len() * TERM_ID_BYTES,
            InvertedFile::Postings(map) => map.values().map(|list| TERM_ID_BYTES + list.len() * REF_BYTES).sum(),
        }
    }

    fn payload_bytes(_: &()) -> usize {
        0
    }
}

pub struct InvertedProbe {
    terms: Vec<TermId>,
    filter: bool,
}

impl Probe<InvertedFile> for InvertedProbe {
    fn admits(&self, text: &InvertedFile) -> bool {
        !self.filter || self.terms.iter().all(|&t| text.contains(t))
    }

    fn leaf_candidates(&self, leaf: &GridNode<InvertedFile>, rejected: &mut u64, out: &mut Vec<ObjSeq>) {
        let total = leaf.entries_newest_first().count();
        if !self.filter {
            out.extend(leaf.entries_newest_first().map(|e| e.seq));
            return;
        }
        let mut lists = Vec::with_capacity(self.terms.len());
        for &t in &self.terms {
            match leaf.text.postings(t) {
                Some(list) => lists.push(list),
                None => {
                    *rejected += total as u64;
                    return;
                }
            }
        }
        // Intersect from the shortest list; postings are in ascending order.
        lists.sort_by_key(|l| l.len());
        let before = out.len();
        out.extend(
            lists[0].iter().rev().copied().filter(|seq| lists[1..].iter().all(|l| l.binary_search(seq).is_ok())),
        );
        *rejected += (total - (out.len() - before)) as u64;
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InvertedModel;

impl TextModel for InvertedModel {
    type Text = InvertedFile;
    type Probe = InvertedProbe;

    const KIND: IndexKind = IndexKind::Sifq;

    fn empty_text(&self) -> InvertedFile {
        InvertedFile::Postings(BTreeMap::new())
    }

    fn payload(&self, _: &GeoTextualObject) {}

    fn probe(&self, q: &TskQuery, opts: SearchOptions) -> InvertedProbe {
        InvertedProbe { terms: q.terms.clone(), filter: opts.text_filter }
    }
}

/// Segmented inverted-file quadtrees.
pub type SifqIndex = SegmentedIndex<InvertedModel>;

impl SifqIndex {
    pub fn with_config(cfg: IndexConfig) -> Result<Self> {
        Self::new(cfg, InvertedModel)
    }
}

/// Single inverted-file quadtree with per-object expiry: once more than
/// `W` objects are held, the oldest is removed from its leaf, its posting
/// lists, and every ancestor whose subtree no longer holds its terms.
#[derive(Debug, Clone)]
pub struct IfqIndex {
    cfg: IndexConfig,
    tree: GridTree<InvertedFile>,
    clock: StreamClock,
    inserted: u64,
    evicted: u64,
}

impl IfqIndex {
    pub fn new(cfg: IndexConfig) -> Result<Self> {
        cfg.validate()?;
        let tree = GridTree::new(cfg.bounds, cfg.grid, InvertedModel.empty_text())?;
        Ok(Self { cfg, tree, clock: StreamClock::default(), inserted: 0, evicted: 0 })
    }

    pub fn tree(&self) -> &GridTree<InvertedFile> {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Removes the oldest retained object. Returns it, or `None` when empty.
    pub fn expire_oldest(&mut self) -> Option<GeoTextualObject> {
        let (seq, obj) = self.tree.pop_oldest_object()?;
        let path = self.tree.path_to(&obj.loc);
        let leaf_id = *path.last().expect("path holds the root");

        let leaf = self.tree.node_mut(leaf_id);
        let NodeKind::Leaf(entries) = &mut leaf.kind else { unreachable!("path ends at a leaf holding the object") };
        let pos = entries.iter().position(|e| e.seq == seq).expect("object is stored in its leaf");
        entries.remove(pos);
        // Later entries carry newer (clamped) timestamps; the last one is the max.
        let last = entries.last().map(|e| e.seq);
        let mut vanished = leaf.text.remove_posting(seq, &obj.terms);
        let latest = last.map(|s| self.tree.object(s).t);
        self.tree.node_mut(leaf_id).latest = latest;

        for &id in path.iter().rev().skip(1) {
            let children: Vec<NodeId> = self.tree.node(id).children().collect();
            let latest = children.iter().filter_map(|&c| self.tree.node(c).latest).max();
            vanished.retain(|&t| !children.iter().any(|&c| self.tree.node(c).text.contains(t)));
            let node = self.tree.node_mut(id);
            node.latest = latest;
            if let InvertedFile::Presence(set) = &mut node.text {
                for t in &vanished {
                    set.remove(t);
                }
            }
        }
        self.evicted += 1;
        Some(obj)
    }

    pub fn search_in(&self, q: &TskQuery, ctx: &SpaceContext, opts: SearchOptions) -> SearchOutcome {
        search_trees(&[&self.tree], &InvertedModel.probe(q, opts), q, ctx)
    }
}

impl StreamIndex for IfqIndex {
    fn kind(&self) -> IndexKind {
        IndexKind::Ifq
    }

    fn config(&self) -> &IndexConfig {
        &self.cfg
    }

    fn insert(&mut self, mut obj: GeoTextualObject) -> Result<()> {
        obj.check(&self.cfg.bounds)?;
        self.clock.admit(&mut obj);
        self.tree.insert(obj, ())?;
        self.inserted += 1;
        while self.tree.len() > self.cfg.retention {
            self.expire_oldest();
        }
        Ok(())
    }

    fn context_for(&self, q: &TskQuery) -> Result<SpaceContext> {
        SpaceContext::for_query(self.cfg.bounds, q.t, self.tree.oldest().map(|o| o.t))
    }

    fn search_with(&self, q: &TskQuery, opts: SearchOptions) -> Result<SearchOutcome> {
        let ctx = self.context_for(q)?;
        Ok(self.search_in(q, &ctx, opts))
    }

    fn retained(&self) -> Vec<&GeoTextualObject> {
        self.tree.objects().collect()
    }

    fn stats(&self) -> IndexStats {
        IndexStats {
            kind: IndexKind::Ifq,
            segments: 1,
            objects: self.tree.len(),
            nodes: self.tree.node_count(),
            memory: self.tree.memory(),
            oldest_t: self.tree.oldest().map(|o| o.t),
            newest_t: self.clock.newest(),
            inserted: self.inserted,
            evicted: self.evicted,
            order_violations: self.clock.violations,
        }
    }

    fn audit(&self) -> Result<()> {
        self.tree.audit()?;
        if self.tree.len() > self.cfg.retention {
            return Err(Error::Invariant(format!(
                "IFQ retains {} objects over the limit {}",
                self.tree.len(),
                self.cfg.retention
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::model::Point;

    fn obj(oid: u64, terms: &[u32], x: f64, y: f64) -> GeoTextualObject {
        GeoTextualObject::new(oid, terms.iter().copied().map(TermId).collect(), Point::new(x, y), oid as i64).unwrap()
    }

    fn cfg(w: usize) -> IndexConfig {
        IndexConfig {
            grid: GridConfig { fanout: 2, leaf_capacity: 3, max_depth: 8 },
            retention: w,
            segment_capacity: 5,
            ..IndexConfig::default()
        }
    }

    #[test]
    fn root_inverted_file_holds_object_terms() {
        let mut idx = IfqIndex::new(cfg(100)).unwrap();
        idx.insert(obj(1, &[4, 8], 10.0, 10.0)).unwrap();
        let terms: Vec<TermId> = idx.tree().root().text.terms().collect();
        assert_eq!(terms, vec![TermId(4), TermId(8)]);
    }

    #[test]
    fn expired_object_leaves_every_posting_list() {
        let mut idx = IfqIndex::new(cfg(6)).unwrap();
        let script = [
            (0, vec![1, 2], 10.0, 10.0),
            (1, vec![2, 3], 12.0, 11.0),
            (2, vec![1], 80.0, 80.0),
            (3, vec![7], 11.0, 12.0),
            (4, vec![2], 13.0, 14.0),
            (5, vec![3, 9], 60.0, 20.0),
            (6, vec![1, 5], 14.0, 10.0),
            (7, vec![2], 90.0, 90.0),
        ];
        for (oid, terms, x, y) in script {
            idx.insert(obj(oid, &terms, x, y)).unwrap();
            idx.audit().unwrap();
        }
        assert_eq!(idx.len(), 6);
        let expired = [0u64, 1];
        for id in 0..idx.tree().node_count() as NodeId {
            let node = idx.tree().node(id);
            if let InvertedFile::Postings(map) = &node.text {
                for list in map.values() {
                    for &seq in list {
                        assert!(!expired.contains(&idx.tree().object(seq).oid));
                    }
                }
            }
        }
        // term 9 still present, nothing left with the expired oid 0's unique pair
        let root_terms: Vec<u32> = idx.tree().root().text.terms().map(|t| t.0).collect();
        assert_eq!(root_terms, vec![1, 2, 3, 5, 7, 9]);
    }

    #[test]
    fn expiring_everything_empties_the_tree() {
        let mut idx = IfqIndex::new(cfg(100)).unwrap();
        for i in 0..40 {
            idx.insert(obj(i, &[(i % 7) as u32], (i * 13 % 100) as f64, (i * 29 % 100) as f64)).unwrap();
        }
        while idx.expire_oldest().is_some() {
            idx.audit().unwrap();
        }
        assert!(idx.tree().root().is_empty());
        assert_eq!(idx.tree().root().text.term_count(), 0);
    }

    #[test]
    fn absent_term_prunes_at_root() {
        let mut idx = IfqIndex::new(cfg(100)).unwrap();
        for i in 0..30 {
            idx.insert(obj(i, &[1, 2], (i * 3) as f64, (i * 3) as f64)).unwrap();
        }
        assert!(!idx.tree().root().is_leaf());
        let q = TskQuery::new(vec![TermId(99)], Point::new(5.0, 5.0), 40, 5, 0.5).unwrap();
        let out = idx.search(&q).unwrap();
        assert!(out.results.is_empty());
        assert_eq!(out.trace.nodes_accessed, 1);
    }

    #[test]
    fn sifq_seals_like_ssg() {
        let mut sifq = SifqIndex::with_config(cfg(100)).unwrap();
        for i in 0..12 {
            sifq.insert(obj(i, &[1], 50.0, 50.0)).unwrap();
        }
        let counts: Vec<usize> = sifq.segments().map(|s| s.count()).collect();
        assert_eq!(counts, vec![2, 5, 5]);
        sifq.audit().unwrap();
    }
}
