use ssg_core::{GeoTextualObject, IndexConfig, Point, SsgIndex, StreamIndex, TermId};

fn obj(i: u64) -> GeoTextualObject {
    let loc = Point::new((i * 37 % 100) as f64, (i * 61 % 100) as f64);
    GeoTextualObject::new(i, vec![TermId((i % 7) as u32)], loc, i as i64).unwrap()
}

fn index(p: usize, w: usize) -> SsgIndex {
    let cfg = IndexConfig { segment_capacity: p, retention: w, ..IndexConfig::default() };
    SsgIndex::with_frequencies(cfg, &Default::default()).unwrap()
}

/// Retained oids after `n` inserts, from the schedule alone: full segments
/// seal, and only as many sealed segments as fit in `w` survive.
fn expected_retained(n: u64, p: u64, w: u64) -> std::ops::Range<u64> {
    let active = n % p;
    let sealed = (n / p).min(w / p);
    n - active - sealed * p..n
}

#[test]
fn searchable_set_matches_schedule() {
    for (p, w) in [(2, 4), (3, 4), (5, 0), (4, 100), (7, 21)] {
        let mut idx = index(p, w);
        for n in 1..=200u64 {
            idx.insert(obj(n - 1)).unwrap();
            let oids: Vec<u64> = idx.retained().iter().map(|o| o.oid).collect();
            let want: Vec<u64> = expected_retained(n, p as u64, w as u64).collect();
            assert_eq!(oids, want, "P={p} W={w} n={n}");
        }
        idx.audit().unwrap();
    }
}

#[test]
fn retained_count_stays_within_window_bounds() {
    let (p, w) = (50_000usize, 100_000usize);
    let mut idx = index(p, w);
    let (mut lo, mut hi) = (usize::MAX, 0);
    for i in 0..1_000_000u64 {
        idx.insert(obj(i)).unwrap();
        if i as usize + 1 >= w {
            let n = idx.len();
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    assert!(lo >= w && hi <= w + p, "retained ranged over [{lo}, {hi}]");
    idx.audit().unwrap();
}

#[test]
fn sealed_segments_never_change() {
    let mut idx = index(100, 1_000);
    for i in 0..350 {
        idx.insert(obj(i)).unwrap();
    }
    let before: Vec<String> = idx.segments().filter(|s| s.sealed).map(|s| format!("{:?}", s.tree)).collect();
    assert_eq!(before.len(), 3);
    for i in 350..399 {
        idx.insert(obj(i)).unwrap();
    }
    let after: Vec<String> = idx.segments().filter(|s| s.sealed).map(|s| format!("{:?}", s.tree)).collect();
    assert_eq!(before, after);
}

#[test]
fn signature_bytes_track_objects_and_nodes() {
    for bits in [64, 512, 1024] {
        let mut cfg = IndexConfig { segment_capacity: 300, retention: 900, ..IndexConfig::default() };
        cfg.signature.bits = bits;
        let mut idx = SsgIndex::with_frequencies(cfg, &Default::default()).unwrap();
        for i in 0..2_000 {
            idx.insert(obj(i)).unwrap();
        }
        let nodes: usize = idx.segments().map(|s| s.tree.node_count()).sum();
        let stats = idx.stats();
        assert_eq!(stats.nodes, nodes);
        assert_eq!(stats.memory.text_bytes, (stats.objects + nodes) * bits as usize / 8);
    }
}
