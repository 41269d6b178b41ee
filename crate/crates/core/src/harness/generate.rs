//! Synthetic geo-tagged keyword streams.
//!
//! Keywords follow a Zipf law over a fixed universe, keyword counts per
//! object average ten, locations are uniform or drawn around Gaussian
//! cluster centers, and timestamps strictly increase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io::ObjectRecord;
use crate::model::{Rect, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpatialModel {
    Uniform,
    /// Points around `centers` uniformly placed centers with standard
    /// deviation `spread` times the bounds width.
    Clusters {
        centers: usize,
        spread: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub count: usize,
    pub zipf_s: f64,
    pub term_universe: usize,
    pub spatial: SpatialModel,
    pub seed: u64,
    pub bounds: Rect,
    /// Mean keywords per object.
    pub mean_terms: f64,
    /// Mean gap between consecutive timestamps, milliseconds (>= 1).
    pub mean_gap_ms: f64,
    pub start_t: Timestamp,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            count: 20_000,
            zipf_s: 1.0,
            term_universe: 10_000,
            spatial: SpatialModel::Uniform,
            seed: 1,
            bounds: Rect::default(),
            mean_terms: 10.0,
            mean_gap_ms: 10.0,
            start_t: 1_600_000_000_000,
        }
    }
}

impl GenerateParams {
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.count == 0 {
            return usage("object count must be at least 1".into());
        }
        if self.term_universe == 0 {
            return usage("term universe must hold at least one term".into());
        }
        if !self.zipf_s.is_finite() || self.zipf_s < 0.0 {
            return usage(format!("zipf exponent {} must be a non-negative number", self.zipf_s));
        }
        if self.mean_terms.is_nan() || self.mean_terms < 1.0 {
            return usage(format!("mean keywords per object {} must be at least 1", self.mean_terms));
        }
        if self.mean_gap_ms.is_nan() || self.mean_gap_ms < 1.0 {
            return usage(format!("mean inter-arrival {} ms must be at least 1", self.mean_gap_ms));
        }
        if let SpatialModel::Clusters { centers, spread } = self.spatial {
            if centers == 0 || spread.is_nan() || spread <= 0.0 {
                return usage("cluster model needs at least one center and a positive spread".into());
            }
        }
        if self.bounds.diagonal().is_nan() || self.bounds.diagonal() <= 0.0 {
            return usage(format!("bounds {} are degenerate", self.bounds));
        }
        Ok(())
    }
}

/// Token for the keyword of Zipf rank `rank` (1-based).
pub fn term_token(rank: u64) -> String {
    format!("w{rank}")
}

pub fn generate_synthetic(p: &GenerateParams) -> Result<Vec<ObjectRecord>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let zipf = Zipf::new(p.term_universe as f64, p.zipf_s).map_err(|e| Error::Usage(e.to_string()))?;
    let extra_terms = Poisson::new((p.mean_terms - 1.0).max(1e-9)).map_err(|e| Error::Usage(e.to_string()))?;
    // floor(Exp(rate)) is geometric with mean 1 / (e^rate - 1).
    let gap = Exp::new((1.0 / (p.mean_gap_ms - 1.0).max(1e-9)).ln_1p()).map_err(|e| Error::Usage(e.to_string()))?;
    let b = p.bounds;
    let centers: Vec<(f64, f64)> = match p.spatial {
        SpatialModel::Uniform => Vec::new(),
        SpatialModel::Clusters { centers, .. } => {
            (0..centers).map(|_| (rng.random_range(b.min_x..=b.max_x), rng.random_range(b.min_y..=b.max_y))).collect()
        }
    };
    let jitter = match p.spatial {
        SpatialModel::Clusters { spread, .. } => Some(Normal::new(0.0, spread * b.width().max(b.height())).unwrap()),
        SpatialModel::Uniform => None,
    };

    let mut out = Vec::with_capacity(p.count);
    let mut t = p.start_t;
    let mut ranks: Vec<u64> = Vec::with_capacity(32);
    for oid in 0..p.count as u64 {
        let want = (1 + extra_terms.sample(&mut rng) as usize).min(p.term_universe);
        ranks.clear();
        while ranks.len() < want {
            let r = zipf.sample(&mut rng) as u64;
            if !ranks.contains(&r) {
                ranks.push(r);
            }
        }
        let text = ranks.iter().map(|&r| term_token(r)).collect::<Vec<_>>().join(" ");

        let (x, y) = match (&jitter, centers.is_empty()) {
            (Some(normal), false) => {
                let (cx, cy) = centers[rng.random_range(0..centers.len())];
                (
                    (cx + normal.sample(&mut rng)).clamp(b.min_x, b.max_x),
                    (cy + normal.sample(&mut rng)).clamp(b.min_y, b.max_y),
                )
            }
            _ => (rng.random_range(b.min_x..=b.max_x), rng.random_range(b.min_y..=b.max_y)),
        };

        out.push(ObjectRecord { oid, t, x, y, text });
        t += 1 + gap.sample(&mut rng).floor() as Timestamp;
    }
    Ok(out)
}
