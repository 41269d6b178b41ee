#![allow(dead_code)]

use ssg_core::grid::{NodeId, NodeText};
use ssg_core::harness::{
    build_workload, generate_synthetic, Corpus, GenerateParams, SpatialModel, Tokenizer, WorkloadSpec,
};
use ssg_core::{GeoTextualObject, GridTree, TskQuery};

pub fn corpus(seed: u64, count: usize) -> Corpus {
    let p = GenerateParams {
        count,
        seed,
        spatial: SpatialModel::Clusters { centers: 20, spread: 0.03 },
        ..GenerateParams::default()
    };
    Corpus::from_records(&generate_synthetic(&p).unwrap(), &Tokenizer::default())
}

pub fn queries(corpus: &Corpus, count: usize, keywords: usize, seed: u64) -> Vec<TskQuery> {
    let spec = WorkloadSpec { query_count: count, keywords, seed, ..WorkloadSpec::default() };
    build_workload(corpus, &spec).unwrap().queries
}

/// Every object stored below `id`.
pub fn descendants<T: NodeText>(tree: &GridTree<T>, id: NodeId) -> Vec<&GeoTextualObject> {
    let mut out = Vec::new();
    let mut stack = vec![id];
    while let Some(n) = stack.pop() {
        let node = tree.node(n);
        out.extend(node.entries_newest_first().map(|e| tree.object(e.seq)));
        stack.extend(node.children());
    }
    out
}
