//! End-to-end orchestration: ingest, graph build, pruning, community
//! detection and embedding, with every intermediate written to disk.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::community::{label_propagation, size_distribution, write_sizes_tsv, LpConfig, LpOutcome, Partition};
use crate::embedding::{build_model, EmbeddingModel};
use crate::graph::CooccurrenceGraph;
use crate::ingest::{ingest_files, IngestConfig, InputFormat, PairCounts};
use crate::preprocess::{preprocess_pipeline, PreprocessConfig, PreprocessReport, StageOrder};

/// Offset added to the top-level seed for label propagation.
pub const LP_SEED_OFFSET: u64 = 1;
/// Offset added to the top-level seed for categorization k-means.
pub const EVAL_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineStage {
    Config,
    Ingest,
    BuildGraph,
    Preprocess,
    Detect,
    Embed,
    Stats,
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PipelineStage::Config => "config",
            PipelineStage::Ingest => "ingest",
            PipelineStage::BuildGraph => "build-graph",
            PipelineStage::Preprocess => "preprocess",
            PipelineStage::Detect => "detect",
            PipelineStage::Embed => "embed",
            PipelineStage::Stats => "stats",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: PipelineStage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: PipelineStage, e: impl fmt::Display) -> Self {
        Self {
            stage,
            message: e.to_string(),
        }
    }
}

/// Where each artifact of a run goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub edges: PathBuf,
    pub graph: PathBuf,
    pub pruned_graph: PathBuf,
    pub report: PathBuf,
    pub partition: PathBuf,
    pub sizes: PathBuf,
    pub model: PathBuf,
    pub stats: PathBuf,
}

impl ArtifactPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.tsv"),
            graph: dir.join("graph.snapshot"),
            pruned_graph: dir.join("pruned.snapshot"),
            report: dir.join("preprocess_report.json"),
            partition: dir.join("partition.tsv"),
            sizes: dir.join("sizes.tsv"),
            model: dir.join("model.txt"),
            stats: dir.join("stats.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    pub ingest: IngestConfig,
    pub preprocess: PreprocessConfig,
    pub seed: u64,
    pub max_sweeps: usize,
    pub label_count: usize,
    pub paths: ArtifactPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            format: InputFormat::Records,
            ingest: IngestConfig::default(),
            preprocess: PreprocessConfig::default(),
            seed: 0,
            max_sweeps: 100,
            label_count: 10,
            paths: ArtifactPaths::in_dir(Path::new("out")),
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true/false, got {v:?}")),
    }
}

pub fn parse_format(v: &str) -> Result<InputFormat, String> {
    match v {
        "records" => Ok(InputFormat::Records),
        "text" => Ok(InputFormat::Text),
        _ => Err(format!("format must be records or text, got {v:?}")),
    }
}

impl PipelineConfig {
    pub fn lp_config(&self) -> LpConfig {
        LpConfig {
            seed: self.seed.wrapping_add(LP_SEED_OFFSET),
            max_sweeps: self.max_sweeps,
        }
    }

    /// Applies one `key=value` setting. `out_dir` resets every artifact path,
    /// so it should come before individual path keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| format!("{key}: expected an integer, got {v:?}"))
        };
        match key {
            "input" => self.inputs = value.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect(),
            "format" => self.format = parse_format(value)?,
            "window" => self.ingest.window = num(value)? as usize,
            "min_year" => {
                self.ingest.min_year = value.parse().map_err(|_| format!("min_year: bad integer {value:?}"))?
            }
            "lowercase" => self.ingest.lowercase = parse_bool(value)?,
            "k" => self.preprocess.k = num(value)? as usize,
            "ntop" => self.preprocess.ntop = num(value)? as usize,
            "order" => self.preprocess.order = value.parse::<StageOrder>().map_err(|e| e.to_string())?,
            "seed" => self.seed = num(value)?,
            "max_sweeps" => self.max_sweeps = num(value)? as usize,
            "labels" => self.label_count = num(value)? as usize,
            "out_dir" => self.paths = ArtifactPaths::in_dir(Path::new(value)),
            "edges_path" => self.paths.edges = value.into(),
            "graph_path" => self.paths.graph = value.into(),
            "pruned_graph_path" => self.paths.pruned_graph = value.into(),
            "report_path" => self.paths.report = value.into(),
            "partition_path" => self.paths.partition = value.into(),
            "sizes_path" => self.paths.sizes = value.into(),
            "model_path" => self.paths.model = value.into(),
            "stats_path" => self.paths.stats = value.into(),
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.ingest.validate().map_err(|e| e.to_string())?;
        if self.max_sweeps == 0 {
            return Err("max_sweeps must be >= 1".into());
        }
        if self.label_count == 0 {
            return Err("labels must be >= 1".into());
        }
        Ok(())
    }

    /// Canonical text of every setting that affects the model's content.
    pub fn canonical(&self) -> String {
        let format = match self.format {
            InputFormat::Records => "records",
            InputFormat::Text => "text",
        };
        format!(
            "format={format}\nwindow={}\nmin_year={}\nlowercase={}\nk={}\nntop={}\norder={}\nseed={}\nmax_sweeps={}\nlabels={}\n",
            self.ingest.window,
            self.ingest.min_year,
            self.ingest.lowercase,
            self.preprocess.k,
            self.preprocess.ntop,
            self.preprocess.order,
            self.seed,
            self.max_sweeps,
            self.label_count,
        )
    }

    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.canonical().as_bytes())[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: f64,
    pub degree: DegreeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub nodes: usize,
    pub communities: usize,
    pub largest: usize,
    pub singletons: usize,
    pub size_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub vocab: usize,
    pub dims: usize,
    pub mean_nonzeros: f64,
    pub min_nonzeros: usize,
    pub max_nonzeros: usize,
    pub zero_norm_vectors: usize,
}

pub fn graph_stats(g: &CooccurrenceGraph) -> GraphStats {
    let mut degrees: Vec<usize> = g.nodes().map(|u| g.neighbors(u).len()).collect();
    degrees.sort_unstable();
    let n = degrees.len();
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => degrees[n / 2] as f64,
        _ => (degrees[n / 2 - 1] + degrees[n / 2]) as f64 / 2.0,
    };
    GraphStats {
        nodes: n,
        edges: g.edge_count(),
        total_weight: g.total_weight(),
        degree: DegreeSummary {
            min: degrees.first().copied().unwrap_or(0),
            max: degrees.last().copied().unwrap_or(0),
            mean: if n == 0 {
                0.0
            } else {
                degrees.iter().sum::<usize>() as f64 / n as f64
            },
            median,
        },
    }
}

fn stats_from_histogram(nodes: usize, size_histogram: BTreeMap<usize, usize>) -> PartitionStats {
    PartitionStats {
        nodes,
        communities: size_histogram.values().sum(),
        largest: size_histogram.keys().next_back().copied().unwrap_or(0),
        singletons: size_histogram.get(&1).copied().unwrap_or(0),
        size_histogram,
    }
}

pub fn partition_stats(p: &Partition) -> PartitionStats {
    stats_from_histogram(p.node_count(), size_distribution(p))
}

pub fn model_stats(m: &EmbeddingModel) -> ModelStats {
    let nnz = m.vectors().iter().map(|v| v.nnz());
    ModelStats {
        vocab: m.len(),
        dims: m.dim(),
        mean_nonzeros: m.mean_nnz(),
        min_nonzeros: nnz.clone().min().unwrap_or(0),
        max_nonzeros: nnz.max().unwrap_or(0),
        zero_norm_vectors: m.zero_norm_count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactStats {
    Graph(GraphStats),
    Partition(PartitionStats),
    Model(ModelStats),
}

/// Summarizes a graph snapshot, sparse model file or partition TSV, detected
/// from its first line.
pub fn stats_for_path(path: &Path) -> Result<ArtifactStats, PipelineError> {
    let err = |e: &dyn fmt::Display| PipelineError::new(PipelineStage::Stats, format!("{}: {e}", path.display()));
    let f = fs::File::open(path).map_err(|e| err(&e))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(|e| err(&e))?;
    if first.starts_with("#cooccurrence-graph") {
        let g = CooccurrenceGraph::load(path).map_err(|e| err(&e))?;
        Ok(ArtifactStats::Graph(graph_stats(&g)))
    } else if first.starts_with("#dims") {
        let m = EmbeddingModel::load(path).map_err(|e| err(&e))?;
        Ok(ArtifactStats::Model(model_stats(&m)))
    } else {
        partition_stats_from_tsv(path).map(ArtifactStats::Partition)
    }
}

/// Partition statistics straight from a `term\tcommunity_id` file, without
/// the graph. Checks that no term repeats and ids are contiguous.
pub fn partition_stats_from_tsv(path: &Path) -> Result<PartitionStats, PipelineError> {
    let err = |m: String| PipelineError::new(PipelineStage::Stats, format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (term, cid) = line
            .split_once('\t')
            .ok_or_else(|| err(format!("line {}: not a partition row", i + 1)))?;
        let cid: u32 = cid
            .parse()
            .map_err(|_| err(format!("line {}: bad community id", i + 1)))?;
        if !seen.insert(term) {
            return Err(err(format!("term {term:?} assigned to two communities")));
        }
        *sizes.entry(cid).or_insert(0) += 1;
    }
    if sizes.keys().enumerate().any(|(i, &c)| i as u32 != c) {
        return Err(err("community ids are not contiguous from 0".into()));
    }
    let mut hist = BTreeMap::new();
    for s in sizes.values() {
        *hist.entry(*s).or_insert(0) += 1;
    }
    Ok(stats_from_histogram(seen.len(), hist))
}

/// Everything a run produces, in memory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub raw_graph: CooccurrenceGraph,
    pub graph: CooccurrenceGraph,
    pub preprocess: PreprocessReport,
    pub communities: LpOutcome,
    pub model: EmbeddingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub vocab_size: usize,
    pub communities: usize,
    pub mean_nonzeros: f64,
    pub lp_converged: bool,
    pub lp_sweeps: usize,
    pub preprocess: PreprocessReport,
    pub graph: GraphStats,
    pub partition: PartitionStats,
    pub model: ModelStats,
}

impl Artifacts {
    pub fn report(&self, cfg: &PipelineConfig) -> RunReport {
        RunReport {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            vocab_size: self.graph.node_count(),
            communities: self.communities.partition.community_count(),
            mean_nonzeros: self.model.mean_nnz(),
            lp_converged: self.communities.converged,
            lp_sweeps: self.communities.sweeps,
            preprocess: self.preprocess.clone(),
            graph: graph_stats(&self.graph),
            partition: partition_stats(&self.communities.partition),
            model: model_stats(&self.model),
        }
    }
}

/// Runs every stage after ingestion in memory.
pub fn build_artifacts(counts: &PairCounts, cfg: &PipelineConfig) -> Result<Artifacts, PipelineError> {
    cfg.validate()
        .map_err(|e| PipelineError::new(PipelineStage::Config, e))?;
    let raw_graph = CooccurrenceGraph::build(counts).map_err(|e| PipelineError::new(PipelineStage::BuildGraph, e))?;
    let (graph, preprocess) = preprocess_pipeline(&raw_graph, &cfg.preprocess);
    if graph.is_empty() {
        return Err(PipelineError::new(
            PipelineStage::Preprocess,
            "no nodes survive preprocessing; lower k or ntop",
        ));
    }
    let communities =
        label_propagation(&graph, &cfg.lp_config()).map_err(|e| PipelineError::new(PipelineStage::Detect, e))?;
    let mut model = build_model(&graph, &communities.partition, cfg.label_count)
        .map_err(|e| PipelineError::new(PipelineStage::Embed, e))?;
    model.provenance.config_hash = cfg.hash();
    model.provenance.seed = cfg.seed;
    Ok(Artifacts {
        raw_graph,
        graph,
        preprocess,
        communities,
        model,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(w, value).map_err(std::io::Error::other)
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p),
        _ => Ok(()),
    }
}

/// Runs the whole pipeline from the configured input files, writing each
/// artifact as soon as its stage completes.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    use PipelineStage::*;
    cfg.validate().map_err(|e| PipelineError::new(Config, e))?;
    if cfg.inputs.is_empty() {
        return Err(PipelineError::new(Config, "no input files"));
    }
    let p = &cfg.paths;
    for path in [
        &p.edges,
        &p.graph,
        &p.pruned_graph,
        &p.report,
        &p.partition,
        &p.sizes,
        &p.model,
        &p.stats,
    ] {
        ensure_parent(path).map_err(|e| PipelineError::new(Config, format!("{}: {e}", path.display())))?;
    }

    let inputs: Vec<&Path> = cfg.inputs.iter().map(PathBuf::as_path).collect();
    let counts = ingest_files(&inputs, cfg.format, &cfg.ingest).map_err(|e| PipelineError::new(Ingest, e))?;
    counts.save(&p.edges).map_err(|e| PipelineError::new(Ingest, e))?;
    log::info!("ingest: {} distinct pairs", counts.len());

    let raw_graph = CooccurrenceGraph::build(&counts).map_err(|e| PipelineError::new(BuildGraph, e))?;
    raw_graph
        .save(&p.graph)
        .map_err(|e| PipelineError::new(BuildGraph, e))?;

    let (graph, preprocess) = preprocess_pipeline(&raw_graph, &cfg.preprocess);
    graph
        .save(&p.pruned_graph)
        .map_err(|e| PipelineError::new(Preprocess, e))?;
    write_json(&p.report, &preprocess).map_err(|e| PipelineError::new(Preprocess, e))?;
    if graph.is_empty() {
        return Err(PipelineError::new(
            Preprocess,
            "no nodes survive preprocessing; lower k or ntop",
        ));
    }
    log::info!("preprocess: {} nodes, {} edges", graph.node_count(), graph.edge_count());

    let communities = label_propagation(&graph, &cfg.lp_config()).map_err(|e| PipelineError::new(Detect, e))?;
    let partition = &communities.partition;
    partition
        .save(&graph, &p.partition)
        .map_err(|e| PipelineError::new(Detect, e))?;
    let sizes = fs::File::create(&p.sizes).map_err(|e| PipelineError::new(Detect, e))?;
    write_sizes_tsv(&size_distribution(partition), BufWriter::new(sizes)).map_err(|e| PipelineError::new(Detect, e))?;
    log::info!(
        "detect: {} communities after {} sweeps (converged: {})",
        partition.community_count(),
        communities.sweeps,
        communities.converged
    );

    let mut model = build_model(&graph, partition, cfg.label_count).map_err(|e| PipelineError::new(Embed, e))?;
    model.provenance.config_hash = cfg.hash();
    model.provenance.seed = cfg.seed;
    model.save(&p.model).map_err(|e| PipelineError::new(Embed, e))?;

    let artifacts = Artifacts {
        raw_graph,
        graph,
        preprocess,
        communities,
        model,
    };
    let report = artifacts.report(cfg);
    write_json(&p.stats, &report).map_err(|e| PipelineError::new(Stats, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_hash() {
        let cfg = PipelineConfig::parse(
            "# demo\nwindow = 3\nk=4\nntop=7\norder=filter,kcore,ntop\nseed=9\nout_dir=/tmp/x\nmodel_path=/tmp/m.txt\n",
        )
        .unwrap();
        assert_eq!(cfg.ingest.window, 3);
        assert_eq!(cfg.preprocess.order, StageOrder::KCoreThenNtop);
        assert_eq!(cfg.paths.graph, PathBuf::from("/tmp/x/graph.snapshot"));
        assert_eq!(cfg.paths.model, PathBuf::from("/tmp/m.txt"));
        assert_eq!(cfg.lp_config().seed, 10);

        let mut other = cfg.clone();
        other.paths = ArtifactPaths::in_dir(Path::new("elsewhere"));
        assert_eq!(cfg.hash(), other.hash());
        other.preprocess.k = 5;
        assert_ne!(cfg.hash(), other.hash());

        assert!(PipelineConfig::parse("bogus=1").is_err());
        assert!(PipelineConfig::parse("window").is_err());
        assert!(PipelineConfig::parse("window=9").unwrap().validate().is_err());
    }

    #[test]
    fn triangle_graph_stats() {
        let g = CooccurrenceGraph::from_weighted_edges([("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)]).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.nodes, s.edges), (3, 3));
        assert_eq!(s.degree.median, 2.0);
        let empty = graph_stats(&CooccurrenceGraph::empty());
        assert_eq!((empty.nodes, empty.edges, empty.degree.max), (0, 0, 0));
    }

    #[test]
    fn empty_model_stats_are_zero() {
        let m = EmbeddingModel::from_parts(Vec::new(), Vec::new(), 0).unwrap();
        let s = model_stats(&m);
        assert_eq!((s.vocab, s.dims, s.mean_nonzeros, s.max_nonzeros), (0, 0, 0.0, 0));
    }

    #[test]
    fn partition_file_stats_detect_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.tsv");
        fs::write(&p, "a\t0\nb\t0\nc\t1\n").unwrap();
        let s = partition_stats_from_tsv(&p).unwrap();
        assert_eq!(s.size_histogram, BTreeMap::from([(1, 1), (2, 1)]));
        fs::write(&p, "a\t0\nb\t2\n").unwrap();
        assert!(partition_stats_from_tsv(&p).is_err());
        fs::write(&p, "a\t0\na\t1\n").unwrap();
        assert!(partition_stats_from_tsv(&p).is_err());
    }
}
