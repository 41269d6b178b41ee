use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssg_core::harness::bench::{self, BenchConfig, QueryMode};
use ssg_core::harness::config::{apply, load_config};
use ssg_core::harness::io::{read_frequencies, read_queries, resolve_query, write_objects, write_queries, QueryRecord};
use ssg_core::harness::{
    build_workload, generate_synthetic, Corpus, GenerateParams, IndexImage, SpatialModel, Tokenizer, WorkloadSpec,
};
use ssg_core::{brute_force_topk, build_index, Error, IndexConfig, IndexKind, SearchOutcome, TskQuery};

#[derive(Debug)]
enum Failure {
    Core(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 2,
            Failure::Core(Error::Io(_) | Error::Parse { .. } | Error::Json(_)) => 3,
            Failure::Core(_) => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Streaming spatio-textual index: data generation, ingestion, queries and benchmarks.
#[derive(Parser)]
#[command(name = "ssg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic object file.
    Generate(GenerateArgs),
    /// Draw a query workload from an object file.
    Workload(WorkloadArgs),
    /// Index an object file and save the index image.
    Ingest(IngestArgs),
    /// Run queries against a saved index image.
    Query(QueryArgs),
    /// Stream objects into one or more indexes and time a workload.
    Bench(BenchArgs),
    /// Render a CSV report as a table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Spatial {
    Uniform,
    Clusters,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 20_000)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    /// Size of the keyword universe.
    #[arg(long, default_value_t = 10_000)]
    terms: usize,
    #[arg(long, value_enum, default_value_t = Spatial::Uniform)]
    spatial: Spatial,
    #[arg(long, default_value_t = 20)]
    clusters: usize,
    /// Cluster standard deviation as a fraction of the bounds width.
    #[arg(long, default_value_t = 0.03)]
    spread: f64,
    #[arg(long, default_value_t = 10.0)]
    mean_terms: f64,
    #[arg(long, default_value_t = 10.0)]
    mean_gap_ms: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// minX,minY,maxX,maxY
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TextArgs {
    /// Whitespace-separated words dropped during tokenization.
    #[arg(long)]
    stoplist: Option<PathBuf>,
}

impl TextArgs {
    fn tokenizer(&self) -> CliResult<Tokenizer> {
        Ok(match &self.stoplist {
            Some(p) => Tokenizer::with_stoplist(fs::read_to_string(p)?.split_whitespace()),
            None => Tokenizer::default(),
        })
    }
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long)]
    objects: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Keywords per query.
    #[arg(long = "l", default_value_t = 3)]
    keywords: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    text: TextArgs,
}

/// Index configuration: defaults, then `--config`, then individual keys.
#[derive(Args)]
struct IndexArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signature width in bits.
    #[arg(long = "B")]
    bits: Option<String>,
    /// Frequency blocks.
    #[arg(long = "u")]
    blocks: Option<String>,
    /// Hash functions per keyword.
    #[arg(long = "m")]
    hashes: Option<String>,
    /// Hash seed.
    #[arg(long = "seed")]
    seed: Option<String>,
    /// Grid fanout per axis.
    #[arg(long = "n")]
    fanout: Option<String>,
    /// Leaf capacity.
    #[arg(long = "c")]
    leaf_capacity: Option<String>,
    #[arg(long = "maxDepth")]
    max_depth: Option<String>,
    /// Objects per segment.
    #[arg(long = "P")]
    segment_capacity: Option<String>,
    /// Retained sealed objects.
    #[arg(long = "W")]
    retention: Option<String>,
    /// minX,minY,maxX,maxY
    #[arg(long)]
    bounds: Option<String>,
    /// Leading fraction of the stream used as keyword history.
    #[arg(long, default_value_t = 0.1)]
    history: f64,
}

impl IndexArgs {
    fn resolve(&self) -> CliResult<IndexConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(input(p)?, IndexConfig::default())?,
            None => IndexConfig::default(),
        };
        let keys = [
            ("B", &self.bits),
            ("u", &self.blocks),
            ("m", &self.hashes),
            ("seed", &self.seed),
            ("n", &self.fanout),
            ("c", &self.leaf_capacity),
            ("maxDepth", &self.max_depth),
            ("P", &self.segment_capacity),
            ("W", &self.retention),
            ("bounds", &self.bounds),
        ];
        for (key, value) in keys {
            if let Some(v) = value {
                apply(&mut cfg, key, v)?;
            }
        }
        cfg.validate()?;
        if !(self.history > 0.0 && self.history <= 1.0) {
            return Err(Error::Usage(format!("history fraction {} outside (0, 1]", self.history)).into());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    objects: PathBuf,
    #[arg(long = "index", default_value_t = IndexKind::Ssg)]
    kind: IndexKind,
    /// Keyword history as `term<TAB>count` lines, instead of the stream prefix.
    #[arg(long)]
    frequencies: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    index: IndexArgs,
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    image: PathBuf,
    /// Query file; without it a single query is built from the flags below.
    #[arg(long, conflicts_with = "text")]
    queries: Option<PathBuf>,
    #[arg(long, required_unless_present = "queries")]
    text: Option<String>,
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    y: f64,
    /// Query time in milliseconds; defaults to the newest indexed timestamp.
    #[arg(long)]
    t: Option<i64>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Check every answer against a full scan.
    #[arg(long)]
    verify: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    text_args: TextArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    objects: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Index kinds, comma separated.
    #[arg(long = "index", value_delimiter = ',', default_value = "ssg,ifq,sifq")]
    kinds: Vec<IndexKind>,
    /// Arrival rate in objects per second, or `max` for no pacing.
    #[arg(long, default_value = "4000")]
    rate: String,
    #[arg(long, value_enum, default_value_t = Mode::After)]
    mode: Mode,
    /// Run writer and queries on one thread.
    #[arg(long)]
    serial: bool,
    /// Check answers against a full scan: all queries, or a sample of N.
    #[arg(long, num_args = 0..=1, default_missing_value = "all", value_name = "N")]
    verify: Option<String>,
    #[arg(long, default_value_t = 7)]
    sample_seed: u64,
    /// Line-delimited JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-query results and trace counters.
    #[arg(long)]
    results: Option<PathBuf>,
    #[command(flatten)]
    index: IndexArgs,
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Queries after the whole stream is indexed.
    After,
    /// Queries spread over the stream.
    Interleaved,
}

#[derive(Args)]
struct ReportArgs {
    csv: PathBuf,
}

fn generate(a: &GenerateArgs) -> CliResult {
    let mut p = GenerateParams {
        count: a.count,
        zipf_s: a.zipf,
        term_universe: a.terms,
        spatial: match a.spatial {
            Spatial::Uniform => SpatialModel::Uniform,
            Spatial::Clusters => SpatialModel::Clusters { centers: a.clusters, spread: a.spread },
        },
        seed: a.seed,
        mean_terms: a.mean_terms,
        mean_gap_ms: a.mean_gap_ms,
        ..GenerateParams::default()
    };
    if let Some(b) = &a.bounds {
        p.bounds = ssg_core::harness::config::parse_bounds(b)?;
    }
    let records = generate_synthetic(&p)?;
    write_objects(&a.out, &records)?;
    eprintln!("wrote {} objects to {}", records.len(), a.out.display());
    Ok(())
}

/// Names the file in the error when an input cannot be opened.
fn input(path: &Path) -> CliResult<&Path> {
    match fs::metadata(path) {
        Ok(_) => Ok(path),
        Err(e) => Err(io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()),
    }
}

fn load_corpus(path: &Path, text: &TextArgs) -> CliResult<Corpus> {
    let path = input(path)?;
    let corpus = Corpus::load(path, &text.tokenizer()?)?;
    if corpus.skipped > 0 {
        eprintln!("skipped {} objects without keywords", corpus.skipped);
    }
    if corpus.objects.is_empty() {
        return Err(Error::Usage(format!("{} holds no indexable objects", path.display())).into());
    }
    Ok(corpus)
}

fn workload(a: &WorkloadArgs) -> CliResult {
    let corpus = load_corpus(&a.objects, &a.text)?;
    let spec = WorkloadSpec { query_count: a.count, keywords: a.keywords, k: a.k, alpha: a.alpha, seed: a.seed };
    let w = build_workload(&corpus, &spec)?;
    for warning in &w.warnings {
        eprintln!("warning: {warning}");
    }
    write_queries(&a.out, &w.to_records(&corpus))?;
    eprintln!("wrote {} queries to {}", w.queries.len(), a.out.display());
    Ok(())
}

fn ingest(a: &IngestArgs) -> CliResult {
    let cfg = a.index.resolve()?;
    let mut corpus = load_corpus(&a.objects, &a.text)?;
    let freq = match &a.frequencies {
        Some(p) => read_frequencies(input(p)?, &mut corpus.vocab)?,
        None => corpus.prefix_frequencies(a.index.history),
    };
    let mut index = build_index(a.kind, cfg, &freq)?;
    for o in &corpus.objects {
        index.insert(o.clone())?;
    }
    index.audit()?;
    IndexImage::capture(index.as_ref(), &corpus.vocab, &freq).save(&a.out)?;
    println!("{}", serde_json::to_string(&index.stats()).map_err(Error::from)?);
    Ok(())
}

fn query_record_line(r: &QueryRecord) -> String {
    format!("{}\t{:?}\t{:?}\t{}\t{:?}\t{}", r.t, r.x, r.y, r.k, r.alpha, r.text)
}

fn query(a: &QueryArgs) -> CliResult {
    let image = IndexImage::load(input(&a.image)?)?;
    let index = image.rebuild()?;
    let mut vocab = image.vocab.clone();
    let tokenizer = a.text_args.tokenizer()?;
    let records = match (&a.queries, &a.text) {
        (Some(p), _) => read_queries(input(p)?)?,
        (None, Some(text)) => {
            let t = a.t.or(index.stats().newest_t).unwrap_or(0);
            vec![QueryRecord { t, x: a.x, y: a.y, k: a.k, alpha: a.alpha, text: text.clone() }]
        }
        (None, None) => unreachable!("clap requires --text without --queries"),
    };
    let queries: Vec<TskQuery> =
        records.iter().map(|r| resolve_query(r, &mut vocab, &tokenizer)).collect::<Result<_, _>>()?;

    let mut outcomes: Vec<SearchOutcome> = Vec::with_capacity(queries.len());
    let mut bad = 0;
    for (i, q) in queries.iter().enumerate() {
        let outcome = index.search(q)?;
        if a.verify {
            let expected = brute_force_topk(index.retained(), q, &index.context_for(q)?);
            if expected != outcome.results {
                bad += 1;
                eprintln!("verification failed for query {i}: {}", query_record_line(&records[i]));
            }
        }
        outcomes.push(outcome);
    }
    match &a.out {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p)?);
            bench::write_results(&mut w, image.kind, &outcomes)?;
            w.flush()?;
        }
        None => bench::write_results(&mut io::stdout().lock(), image.kind, &outcomes)?,
    }
    if bad > 0 {
        return Err(Failure::Verify(format!("{bad} of {} queries disagree with a full scan", queries.len())));
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> CliResult {
    let index = a.index.resolve()?;
    let corpus = load_corpus(&a.objects, &a.text)?;
    let records = read_queries(input(&a.queries)?)?;
    let mut vocab = corpus.vocab.clone();
    let tokenizer = a.text.tokenizer()?;
    let queries: Vec<TskQuery> =
        records.iter().map(|r| resolve_query(r, &mut vocab, &tokenizer)).collect::<Result<_, _>>()?;
    let rate = match a.rate.as_str() {
        "max" => None,
        r => match r.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Some(v),
            _ => return Err(Error::Usage(format!("rate {r:?} must be a positive number or `max`")).into()),
        },
    };
    let verify = match a.verify.as_deref() {
        None => None,
        Some("all") => Some(usize::MAX),
        Some(n) => Some(n.parse().map_err(|_| Error::Usage(format!("verify sample {n:?} is not a count")))?),
    };
    let cfg = BenchConfig {
        index,
        kinds: a.kinds.clone(),
        rate,
        query_mode: match a.mode {
            Mode::After => QueryMode::After,
            Mode::Interleaved => QueryMode::Interleaved,
        },
        serial: a.serial,
        verify,
        history_fraction: a.index.history,
        seed: a.sample_seed,
    };
    let out = bench::run_bench(&corpus, &queries, &cfg)?;

    let label = a.objects.display().to_string();
    let lines = bench::render_report_lines(&out, &label)?;
    let csv = bench::render_csv(&out);
    if let Some(p) = &a.report {
        fs::write(p, &lines)?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, &csv)?;
    }
    if let Some(p) = &a.results {
        bench::write_results_file(p, &out)?;
    }
    println!("# corpus: {label} ({})", bench::CORPUS_NOTE);
    print!("{}", bench::render_table(&csv)?);
    for run in &out.runs {
        let r = &run.report;
        println!(
            "{}: {} of {} queries returned nothing; memory text {} B, nodes {} B, objects {} B",
            r.kind, r.empty_results, r.queries, r.memory.text_bytes, r.memory.node_bytes, r.memory.object_bytes
        );
    }
    let text_bytes = |k: IndexKind| out.runs.iter().find(|r| r.report.kind == k).map(|r| r.report.memory.text_bytes);
    if let (Some(s), Some(i)) = (text_bytes(IndexKind::Ssg), text_bytes(IndexKind::Sifq)) {
        println!("signature / inverted-file bytes (ssg / sifq): {:.3}", s as f64 / i as f64);
    }

    let mismatches: Vec<_> = out.mismatches().collect();
    for m in &mismatches {
        let r = &records[m.query_index];
        eprintln!("verification failed: {} query {}: {}", m.kind, m.query_index, query_record_line(r));
        eprintln!("  expected {:?}", m.expected);
        eprintln!("  got      {:?}", m.got);
    }
    if !mismatches.is_empty() {
        return Err(Failure::Verify(format!("{} answers disagree with a full scan", mismatches.len())));
    }
    Ok(())
}

fn report(a: &ReportArgs) -> CliResult {
    print!("{}", bench::render_table(&fs::read_to_string(input(&a.csv)?)?)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Workload(a) => workload(a),
        Command::Ingest(a) => ingest(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Verify(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
