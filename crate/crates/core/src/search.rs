//! Best-first top-k temporal spatial keyword search over a sequence of
//! grid-trees, and the brute-force oracle it must agree with.
//!
//! Nodes are popped from one min-heap keyed by [`mind_st`]. Older segment
//! roots are opened lazily: before each pop, the next-older root is
//! enqueued whenever its key does not exceed the heap minimum. All roots
//! share the global rectangle and older segments have older latest
//! timestamps, so root keys never decrease along the segment sequence and
//! the popped keys are non-decreasing over the whole run. Once the popped
//! key exceeds the k-th best score nothing left can enter the result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::grid::{GridNode, GridTree, NodeId, NodeKind, NodeText, ObjSeq};
use crate::model::{keyword_containment, mind_st, score_at, GeoTextualObject, ScoredResult, SpaceContext, TskQuery};

/// Textual filter for one query.
pub trait Probe<T: NodeText> {
    /// Whether the subtree under a node with summary `text` may hold a
    /// matching object. False positives allowed, false negatives not.
    fn admits(&self, text: &T) -> bool;

    /// Candidate objects of a leaf, newest first. Rejected entries are
    /// added to `rejected`.
    fn leaf_candidates(&self, leaf: &GridNode<T>, rejected: &mut u64, out: &mut Vec<ObjSeq>);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub nodes_accessed: u64,
    /// Objects that passed exact keyword verification and were scored.
    pub objects_scored: u64,
    /// Nodes and leaf entries rejected by the textual filter.
    pub signature_rejections: u64,
    /// Candidates that passed the filter but failed exact containment.
    pub false_positives: u64,
    pub segments_opened: u64,
}

impl std::ops::AddAssign for SearchTrace {
    fn add_assign(&mut self, o: Self) {
        self.nodes_accessed += o.nodes_accessed;
        self.objects_scored += o.objects_scored;
        self.signature_rejections += o.signature_rejections;
        self.false_positives += o.false_positives;
        self.segments_opened += o.segments_opened;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub results: Vec<ScoredResult>,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Disabling the textual filter keeps exact verification, so results
    /// are unchanged; only the work differs.
    pub text_filter: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { text_filter: true }
    }
}

/// Bounded best-k buffer under the result order.
#[derive(Debug)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<ScoredResult>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    /// k-th best score once full, `+inf` before.
    pub fn threshold(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |r| r.score)
        }
    }

    pub fn offer(&mut self, r: ScoredResult) {
        if self.heap.len() < self.k {
            self.heap.push(r);
        } else if let Some(worst) = self.heap.peek() {
            if r.rank_cmp(worst) == Ordering::Less {
                self.heap.pop();
                self.heap.push(r);
            }
        }
    }

    pub fn into_sorted(self) -> Vec<ScoredResult> {
        self.heap.into_sorted_vec()
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    key: f64,
    /// Enqueue order; breaks key ties first-in first-out.
    order: u64,
    segment: usize,
    node: NodeId,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed: BinaryHeap is a max-heap.
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then(other.order.cmp(&self.order))
    }
}

/// Observer of the node pops of a search, used by invariant checks.
pub trait PopObserver<T: NodeText> {
    fn popped(&mut self, key: f64, segment: usize, node: &GridNode<T>);
}

impl<T: NodeText> PopObserver<T> for () {
    fn popped(&mut self, _: f64, _: usize, _: &GridNode<T>) {}
}

/// Top-k search over `trees`, ordered newest segment first.
pub fn search_trees<T, P>(trees: &[&GridTree<T>], probe: &P, q: &TskQuery, ctx: &SpaceContext) -> SearchOutcome
where
    T: NodeText,
    P: Probe<T>,
{
    search_trees_observed(trees, probe, q, ctx, &mut ())
}

pub fn search_trees_observed<T, P, O>(
    trees: &[&GridTree<T>],
    probe: &P,
    q: &TskQuery,
    ctx: &SpaceContext,
    observer: &mut O,
) -> SearchOutcome
where
    T: NodeText,
    P: Probe<T>,
    O: PopObserver<T>,
{
    let mut trace = SearchTrace::default();
    let mut results = TopK::new(q.k);
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    let mut next_segment = 0usize;
    let mut candidates = Vec::new();

    let node_key = |node: &GridNode<T>| -> Option<f64> { node.latest.map(|t| mind_st(q, &node.rect, t, ctx)) };

    loop {
        while next_segment < trees.len() {
            let seg = next_segment;
            let Some(key) = node_key(trees[seg].root()) else {
                next_segment += 1;
                continue;
            };
            if heap.peek().is_some_and(|top: &Frontier| key > top.key) {
                break;
            }
            next_segment += 1;
            if key > results.threshold() {
                // Older roots only score worse.
                next_segment = trees.len();
                break;
            }
            trace.segments_opened += 1;
            heap.push(Frontier { key, order, segment: seg, node: crate::grid::ROOT });
            order += 1;
        }

        let Some(top) = heap.pop() else { break };
        if top.key > results.threshold() {
            break;
        }
        let tree = trees[top.segment];
        let node = tree.node(top.node);
        trace.nodes_accessed += 1;
        observer.popped(top.key, top.segment, node);

        match &node.kind {
            NodeKind::Inner(_) => {
                for child_id in node.children() {
                    let child = tree.node(child_id);
                    let Some(key) = node_key(child) else { continue };
                    if !probe.admits(&child.text) {
                        trace.signature_rejections += 1;
                        continue;
                    }
                    if key <= results.threshold() {
                        heap.push(Frontier { key, order, segment: top.segment, node: child_id });
                        order += 1;
                    }
                }
            }
            NodeKind::Leaf(_) => {
                candidates.clear();
                probe.leaf_candidates(node, &mut trace.signature_rejections, &mut candidates);
                for &seq in &candidates {
                    let obj = tree.object(seq);
                    if !keyword_containment(&obj.terms, &q.terms) {
                        trace.false_positives += 1;
                        continue;
                    }
                    trace.objects_scored += 1;
                    results.offer(ScoredResult { oid: obj.oid, score: score_at(&obj.loc, obj.t, q, ctx), t: obj.t });
                }
            }
        }
    }

    SearchOutcome { results: results.into_sorted(), trace }
}

/// Definitional evaluation: filter by containment, score, sort, truncate.
pub fn brute_force_topk<'a>(
    objects: impl IntoIterator<Item = &'a GeoTextualObject>,
    q: &TskQuery,
    ctx: &SpaceContext,
) -> Vec<ScoredResult> {
    let mut all: Vec<ScoredResult> = objects
        .into_iter()
        .filter(|o| keyword_containment(&o.terms, &q.terms))
        .map(|o| ScoredResult { oid: o.oid, score: score_at(&o.loc, o.t, q, ctx), t: o.t })
        .collect();
    all.sort_by(ScoredResult::rank_cmp);
    all.truncate(q.k);
    all
}
