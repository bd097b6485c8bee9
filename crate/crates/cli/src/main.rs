use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use commvec::community::{size_distribution, write_sizes_tsv};
use commvec::eval::{eval_categorization, eval_similarity, CategorizationDataset, SimilarityDataset};
use commvec::graph::is_snapshot;
use commvec::ingest::{ingest_files, InputFormat};
use commvec::pipeline::{parse_format, stats_for_path, PipelineError, PipelineStage, EVAL_SEED_OFFSET, LP_SEED_OFFSET};
use commvec::query::{explain, NeighborIndex};
use commvec::{
    build_model, label_propagation, preprocess_pipeline, CooccurrenceGraph, EmbeddingModel, IngestConfig, LpConfig,
    PairCounts, Partition, PipelineConfig, PreprocessConfig, QueryTarget, SparseEmbedding, StageOrder,
};

#[derive(Parser)]
#[command(
    name = "commvec",
    version,
    about = "Sparse word embeddings from co-occurrence communities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Count windowed co-occurrences into an edge list.
    Ingest(IngestArgs),
    /// Build a graph snapshot from an edge list.
    BuildGraph {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PPMI filter, top-degree removal and k-core.
    Preprocess(PreprocessArgs),
    /// Label propagation community detection.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_sweeps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Community size histogram.
        #[arg(long)]
        sizes: Option<PathBuf>,
    },
    /// Build the sparse embedding model.
    Embed {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        labels: usize,
    },
    #[command(subcommand)]
    Query(QueryCommand),
    #[command(subcommand)]
    Eval(EvalCommand),
    /// JSON summary of a graph snapshot, partition or model.
    Stats { path: PathBuf },
    /// Write a model as dense word2vec text.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, default_value = "records", value_parser = parse_format)]
    format: InputFormat,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 1980)]
    min_year: i32,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    lowercase: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Edge list or graph snapshot.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    ntop: usize,
    #[arg(long, default_value = "filter,ntop,kcore")]
    order: StageOrder,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Top-k neighbors by cosine similarity.
    Nearest {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, group = "target")]
        term: Option<String>,
        /// Sparse vector as `dim:value,dim:value`.
        #[arg(long, group = "target")]
        vector: Option<String>,
        /// Canonical vector of one community.
        #[arg(long, group = "target")]
        community: Option<u32>,
        #[arg(long, default_value_t = 10)]
        topk: usize,
    },
    /// Strongest dimensions of a few words, with community labels.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        terms: Vec<String>,
        #[arg(long, default_value_t = 5)]
        topdims: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Spearman correlation on a `w1 w2 score` dataset.
    Sim {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Spherical k-means purity on a `word category` dataset.
    Cat {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input files; overrides `input`.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    min_year: Option<String>,
    #[arg(long)]
    lowercase: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    ntop: Option<String>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_sweeps: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Any other `key=value` setting, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let tag = stage_tag(&cli.command);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<PipelineError>() {
                Some(pe) => eprintln!("error: {pe}"),
                None => eprintln!("error: [{tag}] {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}

fn stage_tag(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::BuildGraph { .. } => "build-graph",
        Command::Preprocess(_) => "preprocess",
        Command::Detect { .. } => "detect",
        Command::Embed { .. } => "embed",
        Command::Query(_) => "query",
        Command::Eval(_) => "eval",
        Command::Stats { .. } => "stats",
        Command::Export { .. } => "export",
        Command::Run(_) => "run",
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::BuildGraph { input, out } => {
            let counts = PairCounts::load(&input)?;
            let g = CooccurrenceGraph::build(&counts)?;
            g.save(&out)?;
            log::info!("{} nodes, {} edges", g.node_count(), g.edge_count());
            Ok(())
        }
        Command::Preprocess(a) => preprocess(a),
        Command::Detect {
            input,
            seed,
            max_sweeps,
            out,
            sizes,
        } => {
            let g = CooccurrenceGraph::load(&input)?;
            let outcome = label_propagation(
                &g,
                &LpConfig {
                    seed: seed.wrapping_add(LP_SEED_OFFSET),
                    max_sweeps,
                },
            )?;
            if !outcome.converged {
                log::warn!("label propagation stopped after {max_sweeps} sweeps without converging");
            }
            outcome.partition.save(&g, &out)?;
            if let Some(path) = sizes {
                write_sizes_tsv(&size_distribution(&outcome.partition), create(&path)?)?;
            }
            log::info!(
                "{} communities in {} sweeps",
                outcome.partition.community_count(),
                outcome.sweeps
            );
            Ok(())
        }
        Command::Embed {
            graph,
            partition,
            out,
            labels,
        } => {
            let g = CooccurrenceGraph::load(&graph)?;
            let p = Partition::load(&g, &partition)?;
            build_model(&g, &p, labels)?.save(&out)?;
            Ok(())
        }
        Command::Query(q) => query(q),
        Command::Eval(e) => eval(e),
        Command::Stats { path } => {
            let stats = stats_for_path(&path)?;
            emit(&serde_json::to_string_pretty(&stats)?)?;
            Ok(())
        }
        Command::Export { model, out } => {
            let m = EmbeddingModel::load(&model)?;
            let mut w = create(&out)?;
            m.write_dense(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Run(a) => run(a),
    }
}

fn emit(text: &str) -> io::Result<()> {
    quiet_pipe(writeln!(io::stdout().lock(), "{text}"))
}

fn quiet_pipe(r: io::Result<()>) -> io::Result<()> {
    match r {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let cfg = IngestConfig {
        window: a.window,
        min_year: a.min_year,
        lowercase: a.lowercase,
    };
    let paths: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    let counts = ingest_files(&paths, a.format, &cfg)?;
    counts.save(&a.out)?;
    log::info!("{} distinct pairs", counts.len());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let g = if is_snapshot(&a.input)? {
        CooccurrenceGraph::load(&a.input)?
    } else {
        CooccurrenceGraph::build(&PairCounts::load(&a.input)?)?
    };
    let cfg = PreprocessConfig {
        k: a.k,
        ntop: a.ntop,
        order: a.order,
    };
    let (pruned, report) = preprocess_pipeline(&g, &cfg);
    pruned.save(&a.out)?;
    if let Some(path) = a.report {
        serde_json::to_writer_pretty(create(&path)?, &report)?;
    }
    if pruned.is_empty() {
        bail!("no nodes survive preprocessing; lower k or ntop");
    }
    Ok(())
}

fn parse_vector(spec: &str, dim: usize) -> Result<SparseEmbedding> {
    let mut entries = Vec::new();
    for part in spec.split(',').filter(|s| !s.is_empty()) {
        let (c, v) = part
            .split_once(':')
            .with_context(|| format!("vector entry {part:?} is not dim:value"))?;
        entries.push((c.trim().parse()?, v.trim().parse()?));
    }
    entries.sort_by_key(|e: &(u32, f64)| e.0);
    Ok(SparseEmbedding::new(dim, entries)?)
}

fn query(q: QueryCommand) -> Result<()> {
    match q {
        QueryCommand::Nearest {
            model,
            term,
            vector,
            community,
            topk,
        } => {
            let m = EmbeddingModel::load(&model)?;
            let target = match (term, vector, community) {
                (Some(t), _, _) => QueryTarget::Term(t),
                (_, Some(v), _) => QueryTarget::Vector(parse_vector(&v, m.dim())?),
                (_, _, Some(c)) => QueryTarget::Canonical(c),
                _ => bail!("one of --term, --vector or --community is required"),
            };
            let result = NeighborIndex::new(&m).nearest(&target, topk)?;
            quiet_pipe(result.write_tsv(io::stdout().lock()))?;
            Ok(())
        }
        QueryCommand::Explain {
            model,
            terms,
            topdims,
            out,
        } => {
            let m = EmbeddingModel::load(&model)?;
            let terms: Vec<&str> = terms.iter().map(String::as_str).collect();
            let table = explain(&m, &terms, topdims)?;
            match out {
                Some(p) => {
                    let mut w = create(&p)?;
                    table.write_tsv(&mut w)?;
                    w.flush()?;
                }
                None => quiet_pipe(table.write_tsv(io::stdout().lock()))?,
            }
            Ok(())
        }
    }
}

fn eval(e: EvalCommand) -> Result<()> {
    let result = match e {
        EvalCommand::Sim { model, dataset } => {
            let m = EmbeddingModel::load(&model)?;
            eval_similarity(&m, &SimilarityDataset::load(&dataset, true)?)?
        }
        EvalCommand::Cat { model, dataset, seed } => {
            let m = EmbeddingModel::load(&model)?;
            let ds = CategorizationDataset::load(&dataset, true)?;
            eval_categorization(&m, &ds, seed.wrapping_add(EVAL_SEED_OFFSET))?
        }
    };
    Ok(emit(&serde_json::to_string(&result)?)?)
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            PipelineConfig::parse(&text).map_err(config_err)?
        }
        None => PipelineConfig::default(),
    };
    let flags = [
        ("format", &a.format),
        ("window", &a.window),
        ("min_year", &a.min_year),
        ("lowercase", &a.lowercase),
        ("k", &a.k),
        ("ntop", &a.ntop),
        ("order", &a.order),
        ("seed", &a.seed),
        ("max_sweeps", &a.max_sweeps),
        ("labels", &a.labels),
        ("out_dir", &a.out_dir),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(config_err)?;
        }
    }
    for kv in &a.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set {kv:?}: expected key=value")))?;
        cfg.set(k.trim(), v.trim()).map_err(config_err)?;
    }
    if !a.inputs.is_empty() {
        cfg.inputs = a.inputs;
    }
    let report = commvec::run_pipeline(&cfg)?;
    Ok(emit(&serde_json::to_string_pretty(&report)?)?)
}

fn config_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(PipelineStage::Config, e)
}
