mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssg_core::grid::GridConfig;
use ssg_core::model::{mind_st, ranking_score};
use ssg_core::{GeoTextualObject, IndexConfig, Point, SsgIndex, StreamIndex, TermId, TskQuery};

#[test]
fn node_key_never_exceeds_descendant_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let grid = GridConfig {
            fanout: rng.random_range(2..=4),
            leaf_capacity: rng.random_range(1..=20),
            max_depth: rng.random_range(1..=10),
        };
        let cfg = IndexConfig { grid, segment_capacity: 10_000, ..IndexConfig::default() };
        let mut index = SsgIndex::with_frequencies(cfg, &Default::default()).unwrap();
        let n = rng.random_range(1..=2_000);
        let mut t = 0;
        for oid in 0..n {
            t += rng.random_range(0..50);
            let terms = vec![TermId(rng.random_range(0..30))];
            let loc = Point::new(rng.random_range(0.0..=100.0), rng.random_range(0.0..=100.0));
            index.insert(GeoTextualObject::new(oid, terms, loc, t).unwrap()).unwrap();
        }
        let tree = &index.segments().next().unwrap().tree;
        for _ in 0..20 {
            let loc = Point::new(rng.random_range(-20.0..120.0), rng.random_range(-20.0..120.0));
            let q = TskQuery::new(vec![TermId(0)], loc, t + rng.random_range(0..500), 10, rng.random_range(0.0..=1.0))
                .unwrap();
            let ctx = index.context_for(&q).unwrap();
            for id in 0..tree.node_count() as u32 {
                let node = tree.node(id);
                let Some(latest) = node.latest else { continue };
                let key = mind_st(&q, &node.rect, latest, &ctx);
                for o in common::descendants(tree, id) {
                    assert!(key <= ranking_score(o, &q, &ctx) + 1e-12);
                }
            }
        }
    }
}
