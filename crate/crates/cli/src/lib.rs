//! Command-line front end: ingest set files into an index bundle, run
//! top-k queries, benchmark query files and generate synthetic workloads.

pub mod bundle;
pub mod ingest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use semoverlap::synth::{generate, typo_workload, SynthConfig};
use semoverlap::{
    Collection, Engine, InvertedIndex, SearchParams, SearchResult, SimilarityProvider,
};
use serde_json::json;
use thiserror::Error;

pub use bundle::{IndexBundle, ProviderSpec, FORMAT_VERSION};
pub use ingest::{is_numeric, parse_sets, split_line, ParsedSets};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    /// 1 for usage errors, 2 for bad or unreadable data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<semoverlap::Error> for CliError {
    fn from(e: semoverlap::Error) -> Self {
        match e {
            semoverlap::Error::InvalidParams(_) | semoverlap::Error::UnknownProvider(_) => {
                CliError::Usage(e.to_string())
            }
            semoverlap::Error::Io(e) => CliError::Io(e),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Some search hit its deadline; printed scores may be inexact.
    TimedOut,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::TimedOut => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "semoverlap",
    version,
    about = "Exact top-k semantic overlap set search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a set file (one set per line) and write an index bundle.
    Ingest(IngestArgs),
    /// Print the top-k sets for one query.
    Query(QueryArgs),
    /// Run every query of a file and write a CSV report.
    Bench(BenchArgs),
    /// Write a synthetic set file, query file and embedding file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Similarity provider: cosine, qgram-jaccard, exact or table.
    #[arg(long)]
    pub sim: Option<String>,
    /// Embedding file for `cosine` (`token v1 ... vd` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Pair table for `table` (`a<TAB>b<TAB>sim` per line).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Gram length for `qgram-jaccard`.
    #[arg(long, default_value_t = 3)]
    pub q: usize,
}

impl ProviderArgs {
    /// The provider named on the command line, or `fallback` if none was.
    pub fn resolve(&self, fallback: &ProviderSpec) -> Result<ProviderSpec, CliError> {
        let Some(name) = &self.sim else {
            return Ok(fallback.clone());
        };
        let resource = match name.as_str() {
            "cosine" => self.embeddings.clone(),
            "table" => self.table.clone(),
            _ => None,
        };
        let resource = resource.map(|p| absolute(&p)).transpose()?;
        let config = semoverlap::ProviderConfig::from_name(name, resource, self.q)?;
        Ok(ProviderSpec::from_config(&config))
    }
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Element delimiter.
    #[arg(long, default_value = "\t")]
    pub delimiter: String,
    /// Remove purely numeric tokens.
    #[arg(long)]
    pub drop_numeric: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Index bundle written by `ingest`.
    pub bundle: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub partitions: usize,
    /// Time budget in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Concurrent exact matchings per partition (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed of the random partitioning.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Match every candidate exactly instead of using the bound-based search.
    #[arg(long)]
    pub baseline: bool,
    /// Element delimiter of query text.
    #[arg(long, default_value = "\t")]
    pub delimiter: String,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

impl SearchArgs {
    pub fn params(&self) -> SearchParams {
        SearchParams {
            k: self.k,
            alpha: self.alpha,
            partitions: self.partitions,
            timeout_seconds: self.timeout,
            workers: self.workers,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// A file holding the query tokens, or the tokens themselves.
    pub query: String,
    /// Append a `stats` line with the search counters as JSON.
    #[arg(long)]
    pub stats: bool,
    /// Also print each partition's own top-k list.
    #[arg(long)]
    pub per_partition: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Query file, one query set per line.
    pub queries: PathBuf,
    /// CSV destination (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory receiving sets.txt, queries.txt and embeddings.txt.
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub sets: usize,
    #[arg(long, default_value_t = 10)]
    pub queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add look-alike sets built from near-duplicate tokens of each query.
    #[arg(long)]
    pub typo: bool,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, out),
        Command::Query(a) => cmd_query(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Generate(a) => cmd_generate(&a, out),
    }
}

pub fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    if a.delimiter.is_empty() {
        return Err(CliError::Usage("delimiter must not be empty".into()));
    }
    let provider = a.provider.resolve(&ProviderSpec {
        name: "exact".into(),
        resource: None,
        q: None,
    })?;
    let file =
        File::open(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let parsed = parse_sets(file, &a.delimiter, a.drop_numeric)?;
    let collection = Collection::from_token_sets(&parsed.sets);
    let index = InvertedIndex::build(&collection);
    IndexBundle::new(&collection, &index, provider).save(&a.output)?;
    writeln!(
        out,
        "{} sets, {} distinct tokens, {} lines skipped",
        collection.len(),
        collection.dictionary().len(),
        parsed.skipped
    )?;
    Ok(Outcome::Done)
}

struct Loaded {
    collection: Collection,
    index: InvertedIndex,
    provider: Box<dyn SimilarityProvider>,
}

fn load(a: &SearchArgs) -> Result<Loaded, CliError> {
    if a.delimiter.is_empty() {
        return Err(CliError::Usage("delimiter must not be empty".into()));
    }
    a.params().validate()?;
    let bundle = IndexBundle::load(&a.bundle)?;
    let spec = a.provider.resolve(&bundle.provider)?;
    let provider = spec.to_config()?.build()?;
    info!("provider {}", spec.name);
    Ok(Loaded {
        collection: bundle.collection()?,
        index: bundle.index()?,
        provider,
    })
}

fn query_tokens(spec: &str, delimiter: &str) -> Result<Vec<String>, CliError> {
    let path = Path::new(spec);
    let tokens = if path.is_file() {
        let parsed = parse_sets(File::open(path)?, delimiter, false)?;
        let mut seen = std::collections::HashSet::new();
        parsed
            .sets
            .into_iter()
            .flatten()
            .filter(|t| seen.insert(t.clone()))
            .collect()
    } else {
        split_line(spec, delimiter, false)
    };
    if tokens.is_empty() {
        return Err(CliError::Usage("query has no tokens".into()));
    }
    Ok(tokens)
}

fn execute(engine: &Engine, loaded: &Loaded, tokens: &[String], baseline: bool) -> SearchResult {
    let q = loaded.collection.query(tokens);
    if baseline {
        engine.baseline(&q, &*loaded.provider, false)
    } else {
        engine.search(&q, &*loaded.provider)
    }
}

fn stats_json(r: &SearchResult) -> serde_json::Value {
    let s = &r.stats;
    json!({
        "exact": r.exact,
        "too_few_results": r.too_few_results,
        "query_cardinality": s.query_cardinality,
        "candidates": s.candidates,
        "iub_pruned": s.iub_pruned,
        "tuples_consumed": s.tuples_consumed,
        "no_em": s.no_em,
        "em_calls": s.em_calls,
        "em_early_terminated": s.em_early_terminated,
        "postproc_ub_pruned": s.postproc_ub_pruned,
        "left_in_queue": s.left_in_queue,
        "score_calls": s.score_calls,
        "refine_ms": s.refine_ms,
        "postproc_ms": s.postproc_ms,
        "total_ms": s.total_ms,
    })
}

pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let loaded = load(&a.search)?;
    let tokens = query_tokens(&a.query, &a.search.delimiter)?;
    let engine = Engine::with_index(&loaded.collection, loaded.index.clone(), a.search.params())?;
    let r = execute(&engine, &loaded, &tokens, a.search.baseline);
    if r.too_few_results {
        warn!(
            "only {} sets overlap the query (k = {})",
            r.entries.len(),
            a.search.k
        );
    }
    for (rank, (id, score)) in r.entries.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.9}", rank + 1, id, score)?;
    }
    if a.per_partition {
        for (p, list) in r.partition_results.iter().enumerate() {
            for (rank, (id, score)) in list.iter().enumerate() {
                writeln!(out, "partition\t{p}\t{}\t{id}\t{score:.9}", rank + 1)?;
            }
        }
    }
    if a.stats {
        writeln!(out, "stats\t{}", stats_json(&r))?;
    }
    Ok(if r.exact {
        Outcome::Done
    } else {
        Outcome::TimedOut
    })
}

pub const BENCH_COLUMNS: [&str; 12] = [
    "query",
    "query_cardinality",
    "candidates",
    "iub_pruned",
    "no_em",
    "em_early_terminated",
    "em_calls",
    "score_calls",
    "refine_ms",
    "postproc_ms",
    "total_ms",
    "top1_score",
];

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let loaded = load(&a.search)?;
    let file = File::open(&a.queries)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.queries.display())))?;
    let queries = parse_sets(file, &a.search.delimiter, false)?;
    let engine = Engine::with_index(&loaded.collection, loaded.index.clone(), a.search.params())?;

    let mut sink: Box<dyn Write + '_> = match &a.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(&mut *out),
    };
    let mut header: Vec<&str> = BENCH_COLUMNS.to_vec();
    if a.search.baseline {
        header.extend(["baseline_em_calls", "baseline_ms"]);
    }
    writeln!(sink, "{}", header.join(","))?;

    let mut sums = vec![0.0; header.len() - 1];
    let mut exact = true;
    for (i, tokens) in queries.sets.iter().enumerate() {
        let r = execute(&engine, &loaded, tokens, false);
        exact &= r.exact;
        let s = &r.stats;
        let mut row = vec![
            s.query_cardinality as f64,
            s.candidates as f64,
            s.iub_pruned as f64,
            s.no_em as f64,
            s.em_early_terminated as f64,
            s.em_calls as f64,
            s.score_calls as f64,
            s.refine_ms,
            s.postproc_ms,
            s.total_ms,
            r.entries.first().map_or(0.0, |e| e.1),
        ];
        if a.search.baseline {
            let b = execute(&engine, &loaded, tokens, true);
            exact &= b.exact;
            row.extend([b.stats.em_calls as f64, b.stats.total_ms]);
        }
        sums.iter_mut().zip(&row).for_each(|(s, v)| *s += v);
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, v)| cell(header[j + 1], *v))
            .collect();
        writeln!(sink, "{},{}", i + 1, cells.join(","))?;
    }
    let n = queries.sets.len().max(1) as f64;
    let means: Vec<String> = sums.iter().map(|s| format!("{:.3}", s / n)).collect();
    writeln!(sink, "mean,{}", means.join(","))?;
    sink.flush()?;
    Ok(if exact {
        Outcome::Done
    } else {
        Outcome::TimedOut
    })
}

fn cell(column: &str, v: f64) -> String {
    match column {
        "top1_score" => format!("{v:.9}"),
        c if c.ends_with("_ms") => format!("{v:.3}"),
        _ => format!("{}", v as u64),
    }
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let cfg = SynthConfig {
        sets: a.sets,
        queries: a.queries,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let w = if a.typo {
        typo_workload(&cfg)
    } else {
        generate(&cfg)
    };
    std::fs::create_dir_all(&a.out_dir)?;

    let mut sets = BufWriter::new(File::create(a.out_dir.join("sets.txt"))?);
    let dict = w.collection.dictionary();
    for s in w.collection.sets() {
        let toks: Vec<&str> = s.elements().iter().filter_map(|&e| dict.token(e)).collect();
        writeln!(sets, "{}", toks.join("\t"))?;
    }
    sets.flush()?;

    let mut queries = BufWriter::new(File::create(a.out_dir.join("queries.txt"))?);
    for q in &w.queries {
        writeln!(queries, "{}", q.join("\t"))?;
    }
    queries.flush()?;

    let mut emb = BufWriter::new(File::create(a.out_dir.join("embeddings.txt"))?);
    let mut seen = std::collections::HashSet::new();
    let names = dict.tokens().iter().chain(w.queries.iter().flatten());
    for tok in names.filter(|t| seen.insert(t.as_str())) {
        if let Some(v) = w.embeddings.vector(tok) {
            let comps: Vec<String> = v.iter().map(f64::to_string).collect();
            writeln!(emb, "{tok} {}", comps.join(" "))?;
        }
    }
    emb.flush()?;

    writeln!(
        out,
        "{} sets, {} queries written to {}",
        w.collection.len(),
        w.queries.len(),
        a.out_dir.display()
    )?;
    Ok(Outcome::Done)
}
