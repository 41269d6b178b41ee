//! Domain records shared by every index and the oracle, and the
//! spatial-temporal ranking functions.
//!
//! Scores are normalized to `[0, 1]` and smaller is better. Spatial
//! distance is planar Euclidean distance divided by the diagonal of the
//! configured bounds; temporal distance is the age of an object relative
//! to the query time divided by a per-query normalizer.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds.
pub type Timestamp = i64;

/// Dense keyword identifier, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        euclid(self.x - other.x, self.y - other.y)
    }
}

#[inline]
fn euclid(dx: f64, dy: f64) -> f64 {
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned rectangle, closed on every side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let ok = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) && min_x <= max_x && min_y <= max_y;
        if !ok {
            return Err(Error::Domain(format!("invalid rectangle [{min_x}, {max_x}] x [{min_y}, {max_y}]")));
        }
        Ok(Self { min_x, min_y, max_x, max_y })
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        euclid(self.width(), self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Minimum Euclidean distance from `p` to any point of the rectangle;
    /// zero when `p` is inside.
    ///
    /// Uses the same arithmetic shape as [`Point::distance`] so the bound
    /// holds exactly in floating point, not just in the reals.
    pub fn min_distance(&self, p: &Point) -> f64 {
        let dx = if p.x < self.min_x {
            self.min_x - p.x
        } else if p.x > self.max_x {
            p.x - self.max_x
        } else {
            0.0
        };
        let dy = if p.y < self.min_y {
            self.min_y - p.y
        } else if p.y > self.max_y {
            p.y - self.max_y
        } else {
            0.0
        };
        euclid(dx, dy)
    }
}

impl Default for Rect {
    fn default() -> Self {
        Self { min_x: 0.0, min_y: 0.0, max_x: 100.0, max_y: 100.0 }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.min_x, self.min_y, self.max_x, self.max_y)
    }
}

/// Validates and normalizes a keyword list: sorted ascending, no duplicates.
pub fn normalize_terms(mut terms: Vec<TermId>) -> Vec<TermId> {
    terms.sort_unstable();
    terms.dedup();
    terms
}

fn is_strictly_ascending(terms: &[TermId]) -> bool {
    terms.windows(2).all(|w| w[0] < w[1])
}

/// A timestamped, geo-located keyword set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTextualObject {
    pub oid: u64,
    pub terms: Vec<TermId>,
    pub loc: Point,
    pub t: Timestamp,
}

impl GeoTextualObject {
    /// Builds an object, normalizing `terms`. Fails on an empty keyword set.
    pub fn new(oid: u64, terms: Vec<TermId>, loc: Point, t: Timestamp) -> Result<Self> {
        let terms = normalize_terms(terms);
        if terms.is_empty() {
            return Err(Error::Domain(format!("object {oid} has no keywords")));
        }
        if !loc.x.is_finite() || !loc.y.is_finite() {
            return Err(Error::Domain(format!("object {oid} has a non-finite location")));
        }
        Ok(Self { oid, terms, loc, t })
    }

    pub(crate) fn check(&self, bounds: &Rect) -> Result<()> {
        if self.terms.is_empty() || !is_strictly_ascending(&self.terms) {
            return Err(Error::Domain(format!("object {} keywords must be non-empty, sorted and distinct", self.oid)));
        }
        if !bounds.contains(&self.loc) {
            return Err(Error::Domain(format!(
                "object {} at ({}, {}) lies outside bounds {bounds}",
                self.oid, self.loc.x, self.loc.y
            )));
        }
        Ok(())
    }
}

/// Top-k temporal spatial keyword query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TskQuery {
    pub terms: Vec<TermId>,
    pub loc: Point,
    pub t: Timestamp,
    pub k: usize,
    pub alpha: f64,
}

impl TskQuery {
    pub fn new(terms: Vec<TermId>, loc: Point, t: Timestamp, k: usize, alpha: f64) -> Result<Self> {
        let terms = normalize_terms(terms);
        if terms.is_empty() {
            return Err(Error::Domain("query has no keywords".into()));
        }
        if k == 0 {
            return Err(Error::Domain("query k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("query alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { terms, loc, t, k, alpha })
    }
}

/// Normalizers in effect for one query evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceContext {
    pub bounds: Rect,
    pub delta_max: f64,
    pub lambda_max: f64,
}

impl SpaceContext {
    pub fn new(bounds: Rect, lambda_max: f64) -> Result<Self> {
        let delta_max = bounds.diagonal();
        if delta_max.is_nan() || delta_max <= 0.0 {
            return Err(Error::Domain(format!("bounds {bounds} have a zero diagonal")));
        }
        if !lambda_max.is_finite() || lambda_max <= 0.0 {
            return Err(Error::Domain(format!("temporal normalizer {lambda_max} must be positive")));
        }
        Ok(Self { bounds, delta_max, lambda_max })
    }

    /// Context for a query issued at `query_t` against data whose oldest
    /// retained timestamp is `oldest_t`: `lambda_max = max(1, query_t - oldest_t)`.
    pub fn for_query(bounds: Rect, query_t: Timestamp, oldest_t: Option<Timestamp>) -> Result<Self> {
        let span = oldest_t.map_or(1, |oldest| query_t.saturating_sub(oldest).max(1));
        Self::new(bounds, span as f64)
    }
}

pub fn spatial_proximity(oloc: &Point, qloc: &Point, ctx: &SpaceContext) -> f64 {
    normalize_spatial(oloc.distance(qloc), ctx)
}

pub fn temporal_recency(ot: Timestamp, qt: Timestamp, ctx: &SpaceContext) -> f64 {
    normalize_temporal(ot, qt, ctx)
}

#[inline]
fn normalize_spatial(dist: f64, ctx: &SpaceContext) -> f64 {
    (dist / ctx.delta_max).min(1.0)
}

// Objects newer than the query count as "now".
#[inline]
fn normalize_temporal(ot: Timestamp, qt: Timestamp, ctx: &SpaceContext) -> f64 {
    let dt = qt.saturating_sub(ot).max(0);
    (dt as f64 / ctx.lambda_max).min(1.0)
}

#[inline]
fn blend(alpha: f64, fs: f64, ft: f64) -> f64 {
    alpha * fs + (1.0 - alpha) * ft
}

/// `alpha * f_s + (1 - alpha) * f_t`.
pub fn ranking_score(o: &GeoTextualObject, q: &TskQuery, ctx: &SpaceContext) -> f64 {
    score_at(&o.loc, o.t, q, ctx)
}

#[inline]
pub(crate) fn score_at(loc: &Point, t: Timestamp, q: &TskQuery, ctx: &SpaceContext) -> f64 {
    blend(q.alpha, spatial_proximity(loc, &q.loc, ctx), temporal_recency(t, q.t, ctx))
}

/// Lower bound of [`ranking_score`] over every object located in `rect`
/// with timestamp at most `latest_t`.
pub fn mind_st(q: &TskQuery, rect: &Rect, latest_t: Timestamp, ctx: &SpaceContext) -> f64 {
    blend(q.alpha, normalize_spatial(rect.min_distance(&q.loc), ctx), normalize_temporal(latest_t, q.t, ctx))
}

/// `true` iff every query keyword occurs in the object keyword list. Both
/// lists must be sorted ascending without duplicates.
pub fn keyword_containment(oterms: &[TermId], qterms: &[TermId]) -> bool {
    if qterms.len() > oterms.len() {
        return false;
    }
    let mut it = oterms.iter();
    'outer: for q in qterms {
        for o in it.by_ref() {
            match o.cmp(q) {
                Ordering::Less => continue,
                Ordering::Equal => continue 'outer,
                Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub oid: u64,
    pub score: f64,
    pub t: Timestamp,
}

impl ScoredResult {
    /// Result order: score ascending, then newer first, then smaller oid.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.t.cmp(&self.t)).then_with(|| self.oid.cmp(&other.oid))
    }
}

impl Eq for ScoredResult {}

impl PartialOrd for ScoredResult {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoredResult {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx100() -> SpaceContext {
        SpaceContext::new(Rect::default(), 1000.0).unwrap()
    }

    fn ids(v: &[u32]) -> Vec<TermId> {
        v.iter().copied().map(TermId).collect()
    }

    #[test]
    fn spatial_examples() {
        let ctx = ctx100();
        assert_eq!(ctx.delta_max, 20000f64.sqrt());
        let p = Point::new(12.0, 7.0);
        assert_eq!(spatial_proximity(&p, &p, &ctx), 0.0);
        let one = spatial_proximity(&Point::new(0.0, 0.0), &Point::new(100.0, 100.0), &ctx);
        assert!((one - 1.0).abs() < 1e-15);
        let d = spatial_proximity(&Point::new(0.0, 0.0), &Point::new(30.0, 40.0), &ctx);
        assert!((d - 50.0 / 20000f64.sqrt()).abs() < 1e-15);
        assert!((d - 0.353553).abs() < 1e-6);
    }

    #[test]
    fn temporal_examples() {
        let ctx = ctx100();
        assert_eq!(temporal_recency(500, 500, &ctx), 0.0);
        assert_eq!(temporal_recency(0, 1000, &ctx), 1.0);
        assert_eq!(temporal_recency(750, 1000, &ctx), 0.25);
        // newer than the query clamps to zero, older than the window to one
        assert_eq!(temporal_recency(1200, 1000, &ctx), 0.0);
        assert_eq!(temporal_recency(-5000, 1000, &ctx), 1.0);
    }

    #[test]
    fn ranking_examples() {
        let ctx = ctx100();
        let o = GeoTextualObject::new(1, ids(&[1]), Point::new(30.0, 40.0), 800).unwrap();
        let q = |alpha| TskQuery::new(ids(&[1]), Point::new(0.0, 0.0), 1000, 1, alpha).unwrap();
        assert_eq!(ranking_score(&o, &q(1.0), &ctx), spatial_proximity(&o.loc, &q(1.0).loc, &ctx));
        assert_eq!(ranking_score(&o, &q(0.0), &ctx), temporal_recency(o.t, 1000, &ctx));
        assert!((blend(0.5, 0.4, 0.2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn containment_examples() {
        assert!(keyword_containment(&ids(&[2, 5, 9]), &ids(&[2, 5])));
        assert!(!keyword_containment(&ids(&[2, 5, 9]), &ids(&[2, 7])));
        assert!(keyword_containment(&ids(&[2, 5, 9]), &ids(&[9])));
        assert!(!keyword_containment(&ids(&[2]), &ids(&[2, 5])));
        assert!(TskQuery::new(vec![], Point::new(0.0, 0.0), 0, 1, 0.5).is_err());
    }

    #[test]
    fn query_validation() {
        let p = Point::new(0.0, 0.0);
        assert!(TskQuery::new(ids(&[1]), p, 0, 0, 0.5).is_err());
        assert!(TskQuery::new(ids(&[1]), p, 0, 1, 1.5).is_err());
        assert!(TskQuery::new(ids(&[1]), p, 0, 1, -0.1).is_err());
        let q = TskQuery::new(ids(&[4, 1, 4]), p, 0, 3, 0.0).unwrap();
        assert_eq!(q.terms, ids(&[1, 4]));
    }

    #[test]
    fn object_outside_bounds_is_rejected() {
        let o = GeoTextualObject::new(1, ids(&[1]), Point::new(101.0, 0.0), 0).unwrap();
        assert!(matches!(o.check(&Rect::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_for_query() {
        let b = Rect::default();
        assert_eq!(SpaceContext::for_query(b, 100, None).unwrap().lambda_max, 1.0);
        assert_eq!(SpaceContext::for_query(b, 100, Some(100)).unwrap().lambda_max, 1.0);
        assert_eq!(SpaceContext::for_query(b, 100, Some(40)).unwrap().lambda_max, 60.0);
    }

    #[test]
    fn mind_st_examples() {
        let ctx = ctx100();
        let rect = Rect::new(10.0, 10.0, 20.0, 20.0).unwrap();
        let q = TskQuery::new(ids(&[1]), Point::new(15.0, 15.0), 900, 1, 0.5).unwrap();
        assert_eq!(mind_st(&q, &rect, 900, &ctx), 0.0);
        let q = TskQuery::new(ids(&[1]), Point::new(40.0, 15.0), 900, 1, 1.0).unwrap();
        assert_eq!(mind_st(&q, &rect, 0, &ctx), 20.0 / ctx.delta_max);
    }

    proptest! {
        #[test]
        fn score_in_unit_interval_and_monotone(
            ox in 0.0..=100.0f64, oy in 0.0..=100.0f64,
            qx in 0.0..=100.0f64, qy in 0.0..=100.0f64,
            ot in 0i64..2000, qt in 0i64..2000, alpha in 0.0..=1.0f64,
            fs in 0.0..=1.0f64, ft in 0.0..=1.0f64, dfs in 0.0..=1.0f64, dft in 0.0..=1.0f64,
        ) {
            let ctx = SpaceContext::for_query(Rect::default(), qt, Some(0)).unwrap();
            let o = GeoTextualObject::new(0, vec![TermId(0)], Point::new(ox, oy), ot).unwrap();
            let q = TskQuery::new(vec![TermId(0)], Point::new(qx, qy), qt, 1, alpha).unwrap();
            let s = ranking_score(&o, &q, &ctx);
            prop_assert!((0.0..=1.0).contains(&s));

            let base = blend(alpha, fs, ft);
            prop_assert!(blend(alpha, (fs + dfs).min(1.0), ft) >= base);
            prop_assert!(blend(alpha, fs, (ft + dft).min(1.0)) >= base);
        }

        #[test]
        fn alpha_swap_symmetry(alpha in 0.0..=1.0f64, fs in 0.0..=1.0f64, ft in 0.0..=1.0f64) {
            let a = blend(alpha, fs, ft);
            let b = blend(1.0 - alpha, ft, fs);
            prop_assert!((a - b).abs() <= 1e-15);
        }

        #[test]
        fn result_order_is_strict_total(
            raw in prop::collection::vec((0u8..4, 0i64..4, 0u64..4), 3)
        ) {
            let r: Vec<ScoredResult> = raw
                .iter()
                .map(|&(s, t, oid)| ScoredResult { oid, score: s as f64 / 4.0, t })
                .collect();
            let (a, b, c) = (&r[0], &r[1], &r[2]);
            prop_assert_eq!(a.rank_cmp(b), b.rank_cmp(a).reverse());
            if a.rank_cmp(b) == Ordering::Equal {
                prop_assert_eq!(a, b);
            }
            if a.rank_cmp(b) == Ordering::Less && b.rank_cmp(c) == Ordering::Less {
                prop_assert_eq!(a.rank_cmp(c), Ordering::Less);
            }
        }

        #[test]
        fn containment_matches_set_semantics(
            o in prop::collection::btree_set(0u32..30, 1..12),
            q in prop::collection::btree_set(0u32..30, 1..5),
        ) {
            let ov: Vec<TermId> = o.iter().copied().map(TermId).collect();
            let qv: Vec<TermId> = q.iter().copied().map(TermId).collect();
            prop_assert_eq!(keyword_containment(&ov, &qv), q.is_subset(&o));
        }
    }
}
