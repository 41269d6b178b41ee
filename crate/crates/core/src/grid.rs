//! Grid-tree: a space-partitioning tree whose overflowing leaves split
//! into `n x n` equal cells (`n = 2` is a quadtree).
//!
//! Every node carries its rectangle, the latest timestamp below it and a
//! textual summary `T`. The summary type is what separates the signature
//! index from the inverted-file baselines; structure, descent and split
//! rules are shared.
//!
//! Cells are half-open `[lo, hi)` on each axis except the last cell,
//! which is closed, so every point of a node's rectangle belongs to
//! exactly one child.

use std::collections::VecDeque;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{self, MemoryEstimate, NODE_FIXED_BYTES, REF_BYTES};
use crate::model::{GeoTextualObject, Point, Rect, Timestamp};

pub type NodeId = u32;

/// Position of an object in its tree's insertion sequence.
pub type ObjSeq = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Cells per axis.
    pub fanout: u32,
    pub leaf_capacity: usize,
    /// Leaves at this depth are never split.
    pub max_depth: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { fanout: 2, leaf_capacity: 100, max_depth: 12 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fanout < 2 {
            return Err(Error::Usage(format!("grid fanout n={} must be at least 2", self.fanout)));
        }
        if self.leaf_capacity == 0 {
            return Err(Error::Usage("leaf capacity c must be at least 1".into()));
        }
        Ok(())
    }

    fn cells(&self) -> usize {
        (self.fanout * self.fanout) as usize
    }
}

/// Per-node textual summary.
///
/// `leaf_add` and `inner_add` must be monotone so a node's summary only
/// grows along an insertion path; the audit recomputes leaves by replaying
/// `leaf_add` over their entries and inner nodes by folding their
/// children with `merge_child`.
pub trait NodeText: Clone + PartialEq + Debug + Send + Sync {
    /// Per-object data kept in leaf entries.
    type Payload: Clone + Debug + Send + Sync;

    fn leaf_add(&mut self, seq: ObjSeq, obj: &GeoTextualObject, payload: &Self::Payload);

    fn inner_add(&mut self, obj: &GeoTextualObject, payload: &Self::Payload);

    /// The summary a leaf keeps once it becomes an inner node.
    fn to_inner(&self) -> Self;

    /// Folds a child's summary into this inner summary.
    fn merge_child(&mut self, child: &Self);

    fn text_bytes(&self) -> usize;

    fn payload_bytes(payload: &Self::Payload) -> usize;
}

#[derive(Debug, Clone)]
pub struct LeafEntry<P> {
    pub seq: ObjSeq,
    pub payload: P,
}

#[derive(Debug, Clone)]
pub enum NodeKind<P> {
    /// Entries in insertion (chronological) order.
    Leaf(Vec<LeafEntry<P>>),
    /// `n * n` slots in row-major order; empty cells hold no node.
    Inner(Box<[Option<NodeId>]>),
}

#[derive(Debug, Clone)]
pub struct GridNode<T: NodeText> {
    pub rect: Rect,
    pub depth: u32,
    /// `None` while nothing is stored below this node.
    pub latest: Option<Timestamp>,
    pub text: T,
    pub kind: NodeKind<T::Payload>,
}

impl<T: NodeText> GridNode<T> {
    fn leaf(rect: Rect, depth: u32, text: T) -> Self {
        Self { rect, depth, latest: None, text, kind: NodeKind::Leaf(Vec::new()) }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_none()
    }

    /// Leaf entries newest first; empty for inner nodes.
    pub fn entries_newest_first(&self) -> impl Iterator<Item = &LeafEntry<T::Payload>> {
        let entries: &[LeafEntry<T::Payload>] = match &self.kind {
            NodeKind::Leaf(e) => e,
            NodeKind::Inner(_) => &[],
        };
        entries.iter().rev()
    }

    pub fn children(&self) -> impl Iterator<Item = NodeId> + '_ {
        let slots: &[Option<NodeId>] = match &self.kind {
            NodeKind::Inner(c) => c,
            NodeKind::Leaf(_) => &[],
        };
        slots.iter().flatten().copied()
    }

    fn bump_latest(&mut self, t: Timestamp) {
        self.latest = Some(self.latest.map_or(t, |l| l.max(t)));
    }
}

/// Lower edge of cell `i` along an axis; `i == n` gives the upper bound.
fn cell_edge(lo: f64, hi: f64, i: u32, n: u32) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * f64::from(i) / f64::from(n)
    }
}

fn cell_index(lo: f64, hi: f64, v: f64, n: u32) -> u32 {
    let span = hi - lo;
    let mut i = if span > 0.0 { ((v - lo) / span * f64::from(n)).floor() as i64 } else { 0 };
    i = i.clamp(0, i64::from(n) - 1);
    let mut i = i as u32;
    // Snap to the edges actually used for child rectangles.
    while i > 0 && v < cell_edge(lo, hi, i, n) {
        i -= 1;
    }
    while i + 1 < n && v >= cell_edge(lo, hi, i + 1, n) {
        i += 1;
    }
    i
}

/// Row-major child slot of `p` inside `rect` for an `n x n` grid.
pub fn child_slot(rect: &Rect, p: &Point, n: u32) -> usize {
    let col = cell_index(rect.min_x, rect.max_x, p.x, n);
    let row = cell_index(rect.min_y, rect.max_y, p.y, n);
    (row * n + col) as usize
}

pub fn child_rect(rect: &Rect, slot: usize, n: u32) -> Rect {
    let (row, col) = (slot as u32 / n, slot as u32 % n);
    Rect {
        min_x: cell_edge(rect.min_x, rect.max_x, col, n),
        max_x: cell_edge(rect.min_x, rect.max_x, col + 1, n),
        min_y: cell_edge(rect.min_y, rect.max_y, row, n),
        max_y: cell_edge(rect.min_y, rect.max_y, row + 1, n),
    }
}

#[derive(Debug, Clone)]
pub struct GridTree<T: NodeText> {
    cfg: GridConfig,
    /// Empty leaf summary, cloned for every new leaf.
    proto: T,
    nodes: Vec<GridNode<T>>,
    objects: VecDeque<GeoTextualObject>,
    /// Sequence number of `objects[0]`.
    base: ObjSeq,
}

pub const ROOT: NodeId = 0;

impl<T: NodeText> GridTree<T> {
    pub fn new(bounds: Rect, cfg: GridConfig, proto: T) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            nodes: vec![GridNode::leaf(bounds, 0, proto.clone())],
            proto,
            objects: VecDeque::new(),
            base: 0,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &Rect {
        &self.nodes[ROOT as usize].rect
    }

    pub fn root(&self) -> &GridNode<T> {
        &self.nodes[ROOT as usize]
    }

    pub fn node(&self, id: NodeId) -> &GridNode<T> {
        &self.nodes[id as usize]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut GridNode<T> {
        &mut self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, seq: ObjSeq) -> &GeoTextualObject {
        &self.objects[(seq - self.base) as usize]
    }

    /// Stored objects, oldest first.
    pub fn objects(&self) -> impl ExactSizeIterator<Item = &GeoTextualObject> {
        self.objects.iter()
    }

    pub fn oldest(&self) -> Option<&GeoTextualObject> {
        self.objects.front()
    }

    pub fn oldest_seq(&self) -> ObjSeq {
        self.base
    }

    /// Inserts `obj` into the unique leaf containing its location,
    /// updating summaries and latest timestamps along the path.
    pub fn insert(&mut self, obj: GeoTextualObject, payload: T::Payload) -> Result<ObjSeq> {
        obj.check(self.bounds())?;
        let seq = self.base + self.objects.len() as ObjSeq;
        let n = self.cfg.fanout;
        let mut id = ROOT;
        loop {
            let node = &mut self.nodes[id as usize];
            node.bump_latest(obj.t);
            match &node.kind {
                NodeKind::Leaf(_) => break,
                NodeKind::Inner(slots) => {
                    let slot = child_slot(&node.rect, &obj.loc, n);
                    let next = slots[slot];
                    node.text.inner_add(&obj, &payload);
                    id = match next {
                        Some(child) => child,
                        None => self.add_child(id, slot),
                    };
                }
            }
        }

        let node = &mut self.nodes[id as usize];
        node.text.leaf_add(seq, &obj, &payload);
        let NodeKind::Leaf(entries) = &mut node.kind else { unreachable!() };
        entries.push(LeafEntry { seq, payload });
        let overflow = entries.len() > self.cfg.leaf_capacity && node.depth < self.cfg.max_depth;
        self.objects.push_back(obj);
        if overflow {
            self.split_leaf(id);
        }
        Ok(seq)
    }

    fn add_child(&mut self, parent: NodeId, slot: usize) -> NodeId {
        let n = self.cfg.fanout;
        let p = &self.nodes[parent as usize];
        let child = GridNode::leaf(child_rect(&p.rect, slot, n), p.depth + 1, self.proto.clone());
        let id = self.nodes.len() as NodeId;
        self.nodes.push(child);
        let NodeKind::Inner(slots) = &mut self.nodes[parent as usize].kind else {
            unreachable!("children hang off inner nodes only")
        };
        slots[slot] = Some(id);
        id
    }

    /// Turns an overflowing leaf into an inner node with `n * n` cells and
    /// redistributes its entries. The node's own summary and latest
    /// timestamp keep their values.
    pub(crate) fn split_leaf(&mut self, id: NodeId) {
        let n = self.cfg.fanout;
        let node = &mut self.nodes[id as usize];
        let entries =
            match std::mem::replace(&mut node.kind, NodeKind::Inner(vec![None; self.cfg.cells()].into_boxed_slice())) {
                NodeKind::Leaf(entries) => entries,
                NodeKind::Inner(_) => unreachable!("split of an inner node"),
            };
        node.text = node.text.to_inner();
        let rect = node.rect;

        let mut touched = Vec::new();
        for entry in entries {
            let obj = &self.objects[(entry.seq - self.base) as usize];
            let slot = child_slot(&rect, &obj.loc, n);
            let NodeKind::Inner(slots) = &self.nodes[id as usize].kind else { unreachable!() };
            let child = match slots[slot] {
                Some(c) => c,
                None => {
                    touched.push(slot);
                    self.add_child(id, slot)
                }
            };
            let obj = &self.objects[(entry.seq - self.base) as usize];
            let c = &mut self.nodes[child as usize];
            c.text.leaf_add(entry.seq, obj, &entry.payload);
            c.bump_latest(obj.t);
            let NodeKind::Leaf(list) = &mut c.kind else { unreachable!() };
            list.push(entry);
        }

        for slot in touched {
            let NodeKind::Inner(slots) = &self.nodes[id as usize].kind else { unreachable!() };
            let child = slots[slot].expect("slot was just filled");
            let c = &self.nodes[child as usize];
            if let NodeKind::Leaf(list) = &c.kind {
                if list.len() > self.cfg.leaf_capacity && c.depth < self.cfg.max_depth {
                    self.split_leaf(child);
                }
            }
        }
    }

    /// Root-to-leaf node path for location `p`, stopping early at an empty
    /// cell.
    pub fn path_to(&self, p: &Point) -> Vec<NodeId> {
        let mut path = vec![ROOT];
        let mut id = ROOT;
        while let NodeKind::Inner(slots) = &self.nodes[id as usize].kind {
            match slots[child_slot(&self.nodes[id as usize].rect, p, self.cfg.fanout)] {
                Some(c) => {
                    path.push(c);
                    id = c;
                }
                None => break,
            }
        }
        path
    }

    pub(crate) fn pop_oldest_object(&mut self) -> Option<(ObjSeq, GeoTextualObject)> {
        let obj = self.objects.pop_front()?;
        let seq = self.base;
        self.base += 1;
        Some((seq, obj))
    }

    pub fn memory(&self) -> MemoryEstimate {
        let mut est = MemoryEstimate::default();
        for node in &self.nodes {
            est.text_bytes += node.text.text_bytes();
            est.node_bytes += NODE_FIXED_BYTES;
            match &node.kind {
                NodeKind::Leaf(entries) => {
                    est.node_bytes += entries.len() * REF_BYTES;
                    est.text_bytes += entries.iter().map(|e| T::payload_bytes(&e.payload)).sum::<usize>();
                }
                NodeKind::Inner(slots) => est.node_bytes += slots.len() * REF_BYTES,
            }
        }
        est.object_bytes = self.objects.iter().map(|o| memory::object_bytes(o.terms.len())).sum();
        est
    }

    /// Full structural audit: tiling, containment, reachability, and the
    /// summary/latest aggregation rules. Returns the first violation found.
    pub fn audit(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let n = self.cfg.fanout;
        let mut seen = vec![false; self.objects.len()];
        let mut stack = vec![ROOT];
        let mut reached_nodes = 0usize;
        while let Some(id) = stack.pop() {
            reached_nodes += 1;
            let node = &self.nodes[id as usize];
            match &node.kind {
                NodeKind::Leaf(entries) => {
                    if entries.len() > self.cfg.leaf_capacity && node.depth < self.cfg.max_depth {
                        return fail(format!("leaf {id} holds {} entries below max depth", entries.len()));
                    }
                    let mut expect = self.proto.clone();
                    let mut latest = None::<Timestamp>;
                    for w in entries.windows(2) {
                        if w[0].seq >= w[1].seq {
                            return fail(format!("leaf {id} entries out of order"));
                        }
                    }
                    for e in entries {
                        if e.seq < self.base || e.seq - self.base >= self.objects.len() as u64 {
                            return fail(format!("leaf {id} references expired object seq {}", e.seq));
                        }
                        let idx = (e.seq - self.base) as usize;
                        if std::mem::replace(&mut seen[idx], true) {
                            return fail(format!("object seq {} reachable twice", e.seq));
                        }
                        let obj = &self.objects[idx];
                        if !node.rect.contains(&obj.loc) {
                            return fail(format!("leaf {id} rect does not contain object {}", obj.oid));
                        }
                        expect.leaf_add(e.seq, obj, &e.payload);
                        latest = Some(latest.map_or(obj.t, |l| l.max(obj.t)));
                    }
                    if expect != node.text {
                        return fail(format!("leaf {id} summary differs from its entries"));
                    }
                    if latest != node.latest {
                        return fail(format!("leaf {id} latest {:?} != {:?}", node.latest, latest));
                    }
                }
                NodeKind::Inner(slots) => {
                    if slots.len() != self.cfg.cells() {
                        return fail(format!("inner {id} has {} slots", slots.len()));
                    }
                    let mut expect = self.proto.to_inner();
                    let mut latest = None::<Timestamp>;
                    for (slot, child) in slots.iter().enumerate() {
                        let Some(c) = child else { continue };
                        let cn = &self.nodes[*c as usize];
                        if cn.rect != child_rect(&node.rect, slot, n) || cn.depth != node.depth + 1 {
                            return fail(format!("child {c} of {id} does not tile slot {slot}"));
                        }
                        expect.merge_child(&cn.text);
                        latest = match (latest, cn.latest) {
                            (Some(a), Some(b)) => Some(a.max(b)),
                            (a, b) => a.or(b),
                        };
                        stack.push(*c);
                    }
                    if expect != node.text {
                        return fail(format!("inner {id} summary differs from its children"));
                    }
                    if latest != node.latest {
                        return fail(format!("inner {id} latest {:?} != {:?}", node.latest, latest));
                    }
                }
            }
        }
        if reached_nodes != self.nodes.len() {
            return fail(format!("{} of {} nodes reachable", reached_nodes, self.nodes.len()));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return fail(format!("object seq {} not reachable", self.base + missing as u64));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::TermId;
    use crate::signature::{BlockLayout, Signature, SignatureConfig};

    /// Plain signature summary for structural tests.
    #[derive(Debug, Clone, PartialEq)]
    pub(crate) struct Sig(pub Signature);

    impl NodeText for Sig {
        type Payload = Signature;
        fn leaf_add(&mut self, _: ObjSeq, _: &GeoTextualObject, p: &Signature) {
            self.0.or_unchecked(p);
        }
        fn inner_add(&mut self, _: &GeoTextualObject, p: &Signature) {
            self.0.or_unchecked(p);
        }
        fn to_inner(&self) -> Self {
            self.clone()
        }
        fn merge_child(&mut self, child: &Self) {
            self.0.or_unchecked(&child.0);
        }
        fn text_bytes(&self) -> usize {
            self.0.width() as usize / 8
        }
        fn payload_bytes(p: &Signature) -> usize {
            p.width() as usize / 8
        }
    }

    fn cfg() -> SignatureConfig {
        SignatureConfig { bits: 64, blocks: 1, hashes: 2, seed: 1 }
    }

    fn obj(oid: u64, x: f64, y: f64, terms: &[u32]) -> GeoTextualObject {
        GeoTextualObject::new(oid, terms.iter().copied().map(TermId).collect(), Point::new(x, y), oid as i64).unwrap()
    }

    fn tree(c: usize, max_depth: u32) -> GridTree<Sig> {
        let grid = GridConfig { fanout: 2, leaf_capacity: c, max_depth };
        GridTree::new(Rect::default(), grid, Sig(Signature::zeros(64))).unwrap()
    }

    fn insert(t: &mut GridTree<Sig>, o: GeoTextualObject) {
        let sig = BlockLayout::single_block(64).signature(&o.terms, &cfg());
        t.insert(o, sig).unwrap();
    }

    #[test]
    fn single_insert_makes_root_leaf() {
        let mut t = tree(100, 12);
        let o = obj(1, 10.0, 10.0, &[3, 4]);
        let sig = BlockLayout::single_block(64).signature(&o.terms, &cfg());
        insert(&mut t, o);
        let root = t.root();
        assert!(root.is_leaf());
        assert_eq!(root.entries_newest_first().count(), 1);
        assert_eq!(root.text.0, sig);
        assert_eq!(root.latest, Some(1));
        t.audit().unwrap();
    }

    #[test]
    fn three_quadrants_split_root() {
        let mut t = tree(2, 12);
        insert(&mut t, obj(0, 10.0, 10.0, &[1]));
        insert(&mut t, obj(1, 60.0, 10.0, &[2]));
        assert!(t.root().is_leaf());
        insert(&mut t, obj(2, 10.0, 60.0, &[3]));
        let NodeKind::Inner(slots) = &t.root().kind else { panic!("root did not split") };
        // row-major: (10,10) -> slot 0, (60,10) -> slot 1, (10,60) -> slot 2
        let occupied: Vec<usize> = (0..4).filter(|&s| slots[s].is_some()).collect();
        assert_eq!(occupied, vec![0, 1, 2]);
        for (slot, oid) in [(0, 0), (1, 1), (2, 2)] {
            let child = t.node(slots[slot].unwrap());
            assert!(child.is_leaf());
            let held: Vec<u64> = child.entries_newest_first().map(|e| t.object(e.seq).oid).collect();
            assert_eq!(held, vec![oid]);
        }
        t.audit().unwrap();
    }

    #[test]
    fn saturated_signature_is_unchanged() {
        let mut t = tree(100, 12);
        insert(&mut t, obj(0, 10.0, 10.0, &[1, 2, 3]));
        let before = t.root().text.clone();
        insert(&mut t, obj(1, 20.0, 20.0, &[2]));
        assert_eq!(t.root().text, before);
    }

    #[test]
    fn half_open_boundary() {
        let r = Rect::default();
        assert_eq!(child_slot(&r, &Point::new(50.0, 10.0), 2), 1);
        assert_eq!(child_slot(&r, &Point::new(49.999, 10.0), 2), 0);
        assert_eq!(child_slot(&r, &Point::new(100.0, 100.0), 2), 3);
        assert_eq!(child_slot(&r, &Point::new(0.0, 50.0), 2), 2);
        // awkward n where i/n is inexact
        let r = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        for i in 0..=3000 {
            let p = Point::new(f64::from(i) / 3000.0, 0.0);
            let slot = child_slot(&r, &p, 3);
            assert!(child_rect(&r, slot, 3).contains(&p));
        }
    }

    #[test]
    fn colocated_objects_overflow_at_max_depth() {
        let mut t = tree(2, 3);
        for i in 0..10 {
            insert(&mut t, obj(i, 33.0, 33.0, &[1]));
        }
        t.audit().unwrap();
        let path = t.path_to(&Point::new(33.0, 33.0));
        let leaf = t.node(*path.last().unwrap());
        assert_eq!(leaf.depth, 3);
        assert_eq!(leaf.entries_newest_first().count(), 10);
        let newest: Vec<u64> = leaf.entries_newest_first().map(|e| t.object(e.seq).oid).collect();
        assert_eq!(newest, (0..10).rev().collect::<Vec<_>>());
    }

    #[test]
    fn split_preserves_parent_summary() {
        let mut t = tree(4, 12);
        for i in 0..4 {
            insert(&mut t, obj(i, 10.0 + i as f64 * 20.0, 10.0 + i as f64 * 20.0, &[i as u32]));
        }
        let before = (t.root().text.clone(), t.root().latest);
        insert(&mut t, obj(4, 90.0, 5.0, &[1]));
        assert!(!t.root().is_leaf());
        let mut merged = Sig(Signature::zeros(64));
        for c in t.root().children() {
            merged.merge_child(&t.node(c).text);
        }
        assert_eq!(merged, t.root().text);
        let sig4 = BlockLayout::single_block(64).signature(&[TermId(1)], &cfg());
        assert_eq!(t.root().text.0, before.0 .0.superimpose(&sig4).unwrap());
        assert_eq!(t.root().latest, Some(4));
        t.audit().unwrap();
    }

    #[test]
    fn outside_bounds_is_domain_error() {
        let mut t = tree(4, 12);
        let o = obj(0, 150.0, 10.0, &[1]);
        let err = t.insert(o, Signature::zeros(64)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(t.is_empty());
    }

    #[test]
    fn random_trees_pass_audit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in 2..=4 {
            let grid = GridConfig { fanout: n, leaf_capacity: 8, max_depth: 6 };
            let mut t = GridTree::new(Rect::default(), grid, Sig(Signature::zeros(64))).unwrap();
            for i in 0..3000 {
                // quantized coordinates exercise shared edges
                let x = f64::from(rng.random_range(0..=20u32)) * 5.0;
                let y = rng.random_range(0.0..=100.0);
                insert(&mut t, obj(i, x, y, &[rng.random_range(0..50)]));
            }
            t.audit().unwrap();
            assert_eq!(t.len(), 3000);
        }
    }
}
