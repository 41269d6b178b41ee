//! Benchmark driver: streams a corpus into an index at a target arrival
//! rate, runs a query workload, optionally checks every sampled answer
//! against the brute-force oracle, and emits reports.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io::Corpus;
use crate::index::{IndexConfig, IndexKind, IndexStats, StreamIndex};
use crate::memory::MemoryEstimate;
use crate::model::{ScoredResult, TskQuery};
use crate::search::{brute_force_topk, SearchOutcome, SearchTrace};
use crate::signature::FrequencyTable;

pub const CORPUS_NOTE: &str =
    "synthetic Zipf corpus shaped to ~10 keywords per object; absolute figures are not comparable to full-scale runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// Queries run once the whole stream is indexed.
    After,
    /// Queries are spread evenly over the stream.
    Interleaved,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub index: IndexConfig,
    pub kinds: Vec<IndexKind>,
    /// Arrival rate in objects per second; `None` streams as fast as possible.
    pub rate: Option<f64>,
    pub query_mode: QueryMode,
    /// Forces writer and queries onto one thread.
    pub serial: bool,
    /// Number of queries checked against the oracle.
    pub verify: Option<usize>,
    /// Leading fraction of the stream used as the keyword-frequency history.
    pub history_fraction: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            index: IndexConfig::default(),
            kinds: IndexKind::ALL.to_vec(),
            rate: Some(4000.0),
            query_mode: QueryMode::After,
            serial: true,
            verify: None,
            history_fraction: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub kind: IndexKind,
    pub query_index: usize,
    pub query: TskQuery,
    pub expected: Vec<ScoredResult>,
    pub got: Vec<ScoredResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub kind: IndexKind,
    pub objects_streamed: usize,
    /// Time spent inside insert calls.
    pub insert_busy_secs: f64,
    /// Objects per second of insert busy time.
    pub insert_throughput: f64,
    /// Wall-clock duration of the whole stream including pacing.
    pub stream_wall_secs: f64,
    /// Largest lag behind the arrival schedule, in milliseconds.
    pub max_backlog_ms: f64,
    pub queries: usize,
    pub mean_latency_us: f64,
    pub p95_latency_us: f64,
    pub mean_nodes_accessed: f64,
    pub empty_results: usize,
    pub trace: SearchTrace,
    pub memory: MemoryEstimate,
    pub stats: IndexStats,
    pub verified: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone)]
pub struct IndexRun {
    pub report: IndexReport,
    pub outcomes: Vec<SearchOutcome>,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub runs: Vec<IndexRun>,
}

impl BenchOutcome {
    pub fn mismatches(&self) -> impl Iterator<Item = &Mismatch> {
        self.runs.iter().flat_map(|r| r.mismatches.iter())
    }
}

fn verify_sample(n_queries: usize, verify: Option<usize>, seed: u64) -> Vec<bool> {
    let mut marks = vec![false; n_queries];
    match verify {
        None => {}
        Some(v) if v >= n_queries => marks.iter_mut().for_each(|m| *m = true),
        Some(v) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in rand::seq::index::sample(&mut rng, n_queries, v) {
                marks[i] = true;
            }
        }
    }
    marks
}

struct QueryRun {
    outcome: SearchOutcome,
    latency: Duration,
    mismatch: Option<(Vec<ScoredResult>, Vec<ScoredResult>)>,
}

fn run_query(index: &dyn StreamIndex, q: &TskQuery, check: bool) -> Result<QueryRun> {
    let start = Instant::now();
    let outcome = index.search(q)?;
    let latency = start.elapsed();
    let mut mismatch = None;
    if check {
        let ctx = index.context_for(q)?;
        let expected = brute_force_topk(index.retained(), q, &ctx);
        if expected != outcome.results {
            mismatch = Some((expected, outcome.results.clone()));
        }
    }
    Ok(QueryRun { outcome, latency, mismatch })
}

/// Index position after which query `i` of `n` runs in interleaved mode.
fn query_slot(i: usize, n_queries: usize, n_objects: usize) -> usize {
    ((i + 1) * n_objects).div_ceil(n_queries).max(1)
}

struct Pacer {
    start: Instant,
    rate: Option<f64>,
    max_backlog: Duration,
}

impl Pacer {
    fn new(rate: Option<f64>) -> Self {
        Self { start: Instant::now(), rate, max_backlog: Duration::ZERO }
    }

    /// Waits until object `i` is due.
    fn wait(&mut self, i: usize) {
        let Some(rate) = self.rate else { return };
        let due = self.start + Duration::from_secs_f64(i as f64 / rate);
        let now = Instant::now();
        if now < due {
            std::thread::sleep(due - now);
        } else {
            self.max_backlog = self.max_backlog.max(now - due);
        }
    }
}

pub fn run_index(
    kind: IndexKind,
    corpus: &Corpus,
    freq: &FrequencyTable,
    queries: &[TskQuery],
    cfg: &BenchConfig,
) -> Result<IndexRun> {
    let index = crate::build_index(kind, cfg.index, freq)?;
    let marks = verify_sample(queries.len(), cfg.verify, cfg.seed);
    let n = corpus.objects.len();
    let mut runs: Vec<Option<QueryRun>> = (0..queries.len()).map(|_| None).collect();
    let mut busy = Duration::ZERO;
    let mut pacer = Pacer::new(cfg.rate);
    let wall_start = Instant::now();

    let index = match (cfg.query_mode, cfg.serial) {
        (QueryMode::Interleaved, false) => {
            let shared = RwLock::new(index);
            let progress = AtomicUsize::new(0);
            let reader_result: Result<Vec<QueryRun>> = std::thread::scope(|s| {
                let reader = s.spawn(|| -> Result<Vec<QueryRun>> {
                    let mut out = Vec::with_capacity(queries.len());
                    for (i, q) in queries.iter().enumerate() {
                        let slot = query_slot(i, queries.len(), n);
                        while progress.load(Ordering::Acquire) < slot {
                            std::thread::sleep(Duration::from_micros(50));
                        }
                        let guard = shared.read();
                        out.push(run_query(guard.as_ref(), q, marks[i])?);
                    }
                    Ok(out)
                });
                let mut written = Ok(());
                for (i, obj) in corpus.objects.iter().enumerate() {
                    pacer.wait(i);
                    let t0 = Instant::now();
                    written = shared.write().insert(obj.clone());
                    busy += t0.elapsed();
                    if written.is_err() {
                        // Release the reader so the scope can join it.
                        progress.store(usize::MAX, Ordering::Release);
                        break;
                    }
                    progress.store(i + 1, Ordering::Release);
                }
                let read = reader.join().expect("query thread panicked");
                written.and(read)
            });
            for (slot, run) in runs.iter_mut().zip(reader_result?) {
                *slot = Some(run);
            }
            shared.into_inner()
        }
        (mode, _) => {
            let mut index = index;
            let mut next_query = 0;
            for (i, obj) in corpus.objects.iter().enumerate() {
                pacer.wait(i);
                let t0 = Instant::now();
                index.insert(obj.clone())?;
                busy += t0.elapsed();
                if mode == QueryMode::Interleaved {
                    while next_query < queries.len() && query_slot(next_query, queries.len(), n) <= i + 1 {
                        runs[next_query] = Some(run_query(index.as_ref(), &queries[next_query], marks[next_query])?);
                        next_query += 1;
                    }
                }
            }
            for (i, q) in queries.iter().enumerate().skip(next_query) {
                runs[i] = Some(run_query(index.as_ref(), q, marks[i])?);
            }
            index
        }
    };
    let stream_wall = wall_start.elapsed();

    let runs: Vec<QueryRun> = runs.into_iter().map(|r| r.expect("every query ran")).collect();
    let mut latencies: Vec<Duration> = runs.iter().map(|r| r.latency).collect();
    latencies.sort();
    let mut trace = SearchTrace::default();
    for r in &runs {
        trace += r.outcome.trace;
    }
    let mismatches: Vec<Mismatch> = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.mismatch.as_ref().map(|(expected, got)| Mismatch {
                kind,
                query_index: i,
                query: queries[i].clone(),
                expected: expected.clone(),
                got: got.clone(),
            })
        })
        .collect();
    let nq = runs.len().max(1) as f64;
    let stats = index.stats();
    let report = IndexReport {
        kind,
        objects_streamed: n,
        insert_busy_secs: busy.as_secs_f64(),
        insert_throughput: if busy.is_zero() { 0.0 } else { n as f64 / busy.as_secs_f64() },
        stream_wall_secs: stream_wall.as_secs_f64(),
        max_backlog_ms: pacer.max_backlog.as_secs_f64() * 1e3,
        queries: runs.len(),
        mean_latency_us: latencies.iter().map(|d| d.as_secs_f64() * 1e6).sum::<f64>() / nq,
        p95_latency_us: percentile(&latencies, 0.95).as_secs_f64() * 1e6,
        mean_nodes_accessed: trace.nodes_accessed as f64 / nq,
        empty_results: runs.iter().filter(|r| r.outcome.results.is_empty()).count(),
        trace,
        memory: stats.memory,
        stats,
        verified: marks.iter().filter(|&&m| m).count(),
        mismatches: mismatches.len(),
    };
    Ok(IndexRun { report, outcomes: runs.into_iter().map(|r| r.outcome).collect(), mismatches })
}

fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let rank = ((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Runs every configured index kind over the same corpus and workload.
pub fn run_bench(corpus: &Corpus, queries: &[TskQuery], cfg: &BenchConfig) -> Result<BenchOutcome> {
    if corpus.objects.is_empty() {
        return Err(Error::Usage("object file holds no indexable objects".into()));
    }
    let freq = corpus.prefix_frequencies(cfg.history_fraction);
    let runs =
        cfg.kinds.iter().map(|&kind| run_index(kind, corpus, &freq, queries, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(BenchOutcome { runs })
}

/// One line per query: kind, query number, `oid:score:t` results and the
/// trace counters. Byte-identical across runs with identical inputs.
pub fn write_results(w: &mut impl Write, kind: IndexKind, outcomes: &[SearchOutcome]) -> std::io::Result<()> {
    for (i, o) in outcomes.iter().enumerate() {
        let results: Vec<String> = o.results.iter().map(|r| format!("{}:{:?}:{}", r.oid, r.score, r.t)).collect();
        let t = &o.trace;
        writeln!(
            w,
            "{kind}\t{i}\t{}\tnodes={} scored={} rejected={} false_pos={} segments={}",
            results.join(","),
            t.nodes_accessed,
            t.objects_scored,
            t.signature_rejections,
            t.false_positives,
            t.segments_opened
        )?;
    }
    Ok(())
}

pub fn write_results_file(path: &Path, outcome: &BenchOutcome) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for run in &outcome.runs {
        write_results(&mut w, run.report.kind, &run.outcomes)?;
    }
    w.flush()?;
    Ok(())
}

/// Line-delimited report: a header line, then one JSON object per index.
pub fn render_report_lines(outcome: &BenchOutcome, corpus_label: &str) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "# corpus: {corpus_label} ({CORPUS_NOTE})");
    for run in &outcome.runs {
        s.push_str(&serde_json::to_string(&run.report)?);
        s.push('\n');
    }
    Ok(s)
}

pub const CSV_HEADER: &str = "index,objects,insert_throughput,stream_wall_secs,max_backlog_ms,queries,mean_latency_us,p95_latency_us,mean_nodes_accessed,empty_results,text_bytes,node_bytes,object_bytes,total_bytes,verified,mismatches";

pub fn render_csv(outcome: &BenchOutcome) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for run in &outcome.runs {
        let r = &run.report;
        let _ = writeln!(
            s,
            "{},{},{:.1},{:.3},{:.3},{},{:.2},{:.2},{:.2},{},{},{},{},{},{},{}",
            r.kind,
            r.objects_streamed,
            r.insert_throughput,
            r.stream_wall_secs,
            r.max_backlog_ms,
            r.queries,
            r.mean_latency_us,
            r.p95_latency_us,
            r.mean_nodes_accessed,
            r.empty_results,
            r.memory.text_bytes,
            r.memory.node_bytes,
            r.memory.object_bytes,
            r.memory.total(),
            r.verified,
            r.mismatches
        );
    }
    s
}

/// CSV to an aligned plain-text table.
pub fn render_table(csv: &str) -> Result<String> {
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(str::trim).collect())
        .collect();
    let Some(width) = rows.first().map(Vec::len) else {
        return Err(Error::Usage("empty CSV report".into()));
    };
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Usage(format!("CSV row {} has {} columns, expected {width}", bad + 1, rows[bad].len())));
    }
    let widths: Vec<usize> = (0..width).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        }
    }
    Ok(out)
}
