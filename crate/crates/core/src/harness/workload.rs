//! Query workloads drawn from a corpus.
//!
//! Each query keyword is drawn with probability proportional to its corpus
//! frequency (redrawn on a repeat within the query), the location is that
//! of a uniformly chosen corpus object, and the query time is the newest
//! corpus timestamp.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io::{Corpus, QueryRecord};
use crate::model::{Point, TermId, TskQuery};
use crate::signature::FrequencyTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub query_count: usize,
    /// Keywords per query (`l`).
    pub keywords: usize,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self { query_count: 1000, keywords: 3, k: 10, alpha: 0.5, seed: 7 }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.query_count == 0 || self.keywords == 0 || self.k == 0 {
            return Err(Error::Usage("query count, keywords per query and k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Usage(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<TskQuery>,
    pub warnings: Vec<String>,
}

impl Workload {
    pub fn to_records(&self, corpus: &Corpus) -> Vec<QueryRecord> {
        self.queries
            .iter()
            .map(|q| QueryRecord {
                t: q.t,
                x: q.loc.x,
                y: q.loc.y,
                k: q.k,
                alpha: q.alpha,
                text: corpus.words(&q.terms),
            })
            .collect()
    }
}

pub fn build_workload(corpus: &Corpus, spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    if corpus.objects.is_empty() {
        return Err(Error::Usage("cannot build a workload from an empty corpus".into()));
    }
    let mut freq = FrequencyTable::new();
    for o in &corpus.objects {
        freq.observe(&o.terms);
    }
    let (terms, weights): (Vec<TermId>, Vec<u64>) = freq.iter().unzip();

    let mut warnings = Vec::new();
    let mut keywords = spec.keywords;
    if terms.len() == 1 && keywords > 1 {
        warnings.push(format!("corpus has a single keyword; using 1 keyword per query instead of {keywords}"));
        keywords = 1;
    } else if keywords > terms.len() {
        return Err(Error::Usage(format!(
            "{keywords} keywords per query exceed the {} distinct corpus keywords",
            terms.len()
        )));
    }

    let pick = WeightedIndex::new(&weights).map_err(|e| Error::Usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let query_t = corpus.max_timestamp().expect("corpus is non-empty");
    let mut queries = Vec::with_capacity(spec.query_count);
    for _ in 0..spec.query_count {
        let mut chosen: Vec<TermId> = Vec::with_capacity(keywords);
        while chosen.len() < keywords {
            let t = terms[pick.sample(&mut rng)];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        let anchor = &corpus.objects[rng.random_range(0..corpus.objects.len())];
        let loc = Point::new(anchor.loc.x, anchor.loc.y);
        queries.push(TskQuery::new(chosen, loc, query_t, spec.k, spec.alpha)?);
    }
    Ok(Workload { queries, warnings })
}
