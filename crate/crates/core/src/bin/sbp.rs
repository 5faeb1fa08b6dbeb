//! Command-line front end: build indexes, run queries, score runs, benchmark,
//! and generate synthetic collections.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbp_core::{
    build_index, exact_topk_index, index_space_report, load_index, order_documents, parse_queries,
    run_benchmark, save_index, search, Corpus, Error, LoopOrder, OrderingStrategy, Qrels, Ratio,
    SearchMode, SearchOutcome, SearchParams, SpIndex, SyntheticCorpusSpec,
    DEFAULT_QUERY_WEIGHT_SCALE,
};

#[derive(Parser)]
#[command(name = "sbp", about = "Sparse retrieval with superblock pruning", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run queries against an index and emit a TREC-format run.
    Search(SearchArgs),
    /// Score a TREC-format run against relevance judgments.
    Eval(EvalArgs),
    /// Timed batch retrieval with warmup passes.
    Bench(BenchArgs),
    /// Generate a seeded synthetic collection.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build an index from a JSONL document collection.
    Build(IndexBuildArgs),
    /// Print the header and space report of an existing index.
    Info(IndexInfoArgs),
}

#[derive(Args)]
struct IndexBuildArgs {
    /// JSONL documents: one {"id": ..., "vector": {...}} per line.
    #[arg(long)]
    docs: PathBuf,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
    /// Documents per block.
    #[arg(long, default_value_t = 8)]
    b: u32,
    /// Blocks per superblock.
    #[arg(long, default_value_t = 64)]
    c: u32,
    /// Document ordering: identity | greedy.
    #[arg(long, default_value = "identity")]
    order: String,
}

#[derive(Args)]
struct IndexInfoArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args, Clone)]
struct QueryParams {
    /// Results per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Threshold overestimation factor in (0, 1]; 1 is rank-safe.
    #[arg(long, default_value = "1")]
    mu: String,
    /// Average-bound factor in [mu, 1]; 1 keeps the probabilistic guard off.
    #[arg(long, default_value = "1")]
    eta: String,
    /// Query term pruning: keep the smallest weight-mass prefix covering this
    /// fraction.
    #[arg(long, default_value = "1")]
    beta: String,
    /// Bound accumulation order: saat | taat.
    #[arg(long, default_value = "saat")]
    loop_order: String,
    /// Traversal mode: interleaved | two-phase.
    #[arg(long, default_value = "interleaved")]
    mode: String,
    /// Scale applied to real-valued query weights before rounding.
    #[arg(long, default_value_t = DEFAULT_QUERY_WEIGHT_SCALE)]
    query_scale: f64,
}

impl QueryParams {
    fn to_search_params(&self) -> Result<SearchParams, Error> {
        let params = SearchParams {
            k: self.k,
            mu: Ratio::parse_decimal(&self.mu)?,
            eta: Ratio::parse_decimal(&self.eta)?,
            beta: Ratio::parse_decimal(&self.beta)?,
            loop_order: self.loop_order.parse::<LoopOrder>()?,
            mode: self.mode.parse::<SearchMode>()?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// JSONL queries, same record shape as documents.
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    params: QueryParams,
    /// Score with the exhaustive exact scorer instead of the pruned engine.
    #[arg(long)]
    oracle: bool,
    /// Run tag for the TREC output.
    #[arg(long, default_value = "sbp")]
    tag: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// TREC-format run file.
    #[arg(long)]
    results: PathBuf,
    /// Tab-separated qrels: query_id, doc_id, grade.
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    params: QueryParams,
    /// Total passes over the query set; the first two are warmup.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Optional qrels for relevance metrics.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Worker threads; 1 keeps the timing protocol single-threaded.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file holding the generator spec.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for docs.jsonl, queries.jsonl, qrels.tsv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Index(IndexCommand::Build(args)) => index_build(args),
        Command::Index(IndexCommand::Info(args)) => index_info(args),
        Command::Search(args) => run_search(args),
        Command::Eval(args) => run_eval(args),
        Command::Bench(args) => run_bench(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn load_queries(index: &SpIndex, path: &PathBuf, scale: f64) -> Result<Vec<(String, sbp_core::QueryVector)>, Error> {
    let reader = BufReader::new(File::open(path)?);
    parse_queries(reader, &index.vocab, scale)
}

fn index_build(args: IndexBuildArgs) -> Result<(), Error> {
    let strategy: OrderingStrategy = args.order.parse()?;
    let corpus = Corpus::from_jsonl_reader(BufReader::new(File::open(&args.docs)?))?;
    let ordering = order_documents(&corpus, strategy)?;
    let index = build_index(&corpus, &ordering, args.b, args.c)?;
    save_index(&index, &args.out)?;
    print_index_summary(&index);
    Ok(())
}

fn index_info(args: IndexInfoArgs) -> Result<(), Error> {
    let index = load_index(&args.index)?;
    print_index_summary(&index);
    Ok(())
}

fn print_index_summary(index: &SpIndex) {
    let summary = serde_json::json!({
        "geometry": index.geometry,
        "quantization_scale": index.manifest.quantization.scale,
        "space": index_space_report(index),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
}

fn write_trec_run<W: Write>(
    out: &mut W,
    query_id: &str,
    hits: &[(String, u64)],
    tag: &str,
) -> Result<(), Error> {
    for (rank, (doc, score)) in hits.iter().enumerate() {
        writeln!(out, "{query_id}\tQ0\t{doc}\t{}\t{score}\t{tag}", rank + 1)?;
    }
    Ok(())
}

fn run_search(args: SearchArgs) -> Result<(), Error> {
    let params = args.params.to_search_params()?;
    let index = load_index(&args.index)?;
    let queries = load_queries(&index, &args.queries, args.params.query_scale)?;

    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };

    for (query_id, query) in &queries {
        let hits: Vec<(String, u64)> = if args.oracle {
            let ranking = exact_topk_index(&index, query, params.k)?;
            ranking
                .entries()
                .iter()
                .map(|&(pos, score)| (index.external_id(pos).to_string(), score))
                .collect()
        } else {
            match search(&index, query, &params) {
                Ok(SearchOutcome { hits, .. }) => {
                    hits.into_iter().map(|h| (h.doc, h.score)).collect()
                }
                Err(Error::EmptyQuery) => {
                    eprintln!("warning: query {query_id} has no positive-weight terms; emitting no results");
                    Vec::new()
                }
                Err(e) => return Err(e),
            }
        };
        write_trec_run(&mut sink, query_id, &hits, &args.tag)?;
    }
    sink.flush()?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Error> {
    let qrels = Qrels::parse_tsv(BufReader::new(File::open(&args.qrels)?))?;

    // Group the run by query, ordered by rank.
    let mut runs: Vec<(String, Vec<(u32, String)>)> = Vec::new();
    let reader = BufReader::new(File::open(&args.results)?);
    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 6 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected query_id Q0 doc_id rank score tag".into(),
            });
        }
        let rank: u32 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("invalid rank {:?}", fields[3]),
        })?;
        match runs.iter_mut().find(|(qid, _)| qid == fields[0]) {
            Some((_, rows)) => rows.push((rank, fields[2].to_string())),
            None => runs.push((fields[0].to_string(), vec![(rank, fields[2].to_string())])),
        }
    }

    let empty = std::collections::HashMap::new();
    let mut per_query = Vec::new();
    for (query_id, mut rows) in runs {
        rows.sort();
        let ranked: Vec<String> = rows.into_iter().map(|(_, doc)| doc).collect();
        let rels = qrels.for_query(&query_id).unwrap_or(&empty);
        let recall = sbp_core::recall_at_k(&ranked, rels, args.k);
        per_query.push(serde_json::json!({
            "query_id": query_id,
            "mrr_at_10": sbp_core::mrr_at_10(&ranked, rels),
            "recall_at_k": recall.value,
            "no_relevant": recall.no_relevant,
            "ndcg_at_10": sbp_core::ndcg_at_10(&ranked, rels),
        }));
    }
    let n = per_query.len().max(1) as f64;
    let mean = |key: &str| {
        per_query
            .iter()
            .map(|v| v[key].as_f64().unwrap_or(0.0))
            .sum::<f64>()
            / n
    };
    let report = serde_json::json!({
        "k": args.k,
        "num_queries": per_query.len(),
        "mrr_at_10": mean("mrr_at_10"),
        "recall_at_k": mean("recall_at_k"),
        "ndcg_at_10": mean("ndcg_at_10"),
        "per_query": per_query,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), Error> {
    let params = args.params.to_search_params()?;
    let index = load_index(&args.index)?;
    let queries = load_queries(&index, &args.queries, args.params.query_scale)?;
    let qrels = match &args.qrels {
        Some(path) => Some(Qrels::parse_tsv(BufReader::new(File::open(path)?))?),
        None => None,
    };
    let report = run_benchmark(
        &index,
        &queries,
        &params,
        args.reps,
        qrels.as_ref(),
        args.threads,
    )?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let spec: SyntheticCorpusSpec =
        serde_json::from_reader(BufReader::new(File::open(&args.spec)?)).map_err(|e| {
            Error::InvalidParameter(format!("invalid synthetic spec: {e}"))
        })?;
    let set = sbp_core::generate_synthetic(&spec)?;
    sbp_core::write_synthetic_files(&set, &args.out)?;
    let summary = serde_json::json!({
        "num_docs": set.corpus.num_docs(),
        "vocab_size": set.corpus.vocab_size(),
        "num_queries": set.queries.len(),
        "quantization_scale": set.corpus.manifest.quantization.scale,
        "out": args.out,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    Ok(())
}
