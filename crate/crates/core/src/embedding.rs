//! Sparse community-indexed word embeddings.
//!
//! A word's component for community `c` is the mean normalized PPMI (edge
//! weight divided by the graph's largest edge weight) over its neighbors in
//! `c`, then z-scored per community. Mean and standard deviation of a column
//! are taken over the words that actually have a neighbor in that community;
//! everyone else stays at zero, which is what keeps the vectors sparse.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::community::{CommunityId, Partition};
use crate::graph::{CooccurrenceGraph, GraphError, NodeId};
use crate::numfmt::format_sig;

/// Above this many dimensions the dense export is mostly zeros and large.
pub const DENSE_EXPORT_WARN_DIMS: usize = 10_000;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("partition covers {partition} nodes but graph has {graph}")]
    PartitionMismatch { partition: usize, graph: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEmbedding {
    dim: usize,
    entries: Vec<(CommunityId, f64)>,
}

impl SparseEmbedding {
    /// Validates strictly increasing ids below `dim` and finite nonzero values.
    pub fn new(dim: usize, entries: Vec<(CommunityId, f64)>) -> Result<Self, EmbeddingError> {
        if entries.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(EmbeddingError::InvalidVector("ids not strictly increasing".into()));
        }
        if let Some(&(c, _)) = entries.iter().find(|&&(c, _)| c as usize >= dim) {
            return Err(EmbeddingError::InvalidVector(format!("id {c} >= dim {dim}")));
        }
        if let Some(&(c, v)) = entries.iter().find(|&&(_, v)| v == 0.0 || !v.is_finite()) {
            return Err(EmbeddingError::InvalidVector(format!("bad value {v} at {c}")));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Drops zeros and builds from components already in ascending id order.
    fn from_sorted(dim: usize, comps: impl IntoIterator<Item = (CommunityId, f64)>) -> Self {
        Self {
            dim,
            entries: comps.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(CommunityId, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, c: CommunityId) -> f64 {
        self.entries
            .binary_search_by_key(&c, |&(k, _)| k)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_sorted(self.dim, self.entries.iter().map(|&(c, v)| (c, v * factor)))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c as usize] = v;
        }
        out
    }
}

/// Per-community normalization constants over present raw components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation; 0 for constant or empty columns.
    pub std: f64,
}

impl ColumnStats {
    pub const EMPTY: ColumnStats = ColumnStats {
        count: 0,
        mean: 0.0,
        std: 0.0,
    };

    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::EMPTY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let std = if lo == hi {
            0.0
        } else {
            (values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        };
        Self {
            count: values.len(),
            mean,
            std,
        }
    }

    pub fn zscore(&self, raw: f64) -> f64 {
        if self.std == 0.0 {
            0.0
        } else {
            (raw - self.mean) / self.std
        }
    }
}

/// Per-node raw components, each row in ascending community order.
pub type ComponentRows = Vec<Vec<(CommunityId, f64)>>;

/// Edge weight over the graph's largest edge weight.
pub fn sppmi(g: &CooccurrenceGraph, u: NodeId, v: NodeId) -> Result<f64, GraphError> {
    let w = g.weight(u, v)?;
    let max = g.max_weight().expect("graph with an edge has a max weight");
    Ok(w / max)
}

/// Mean SPPMI over `n`'s neighbors in community `c`; `None` when `n` has no
/// neighbor there.
pub fn raw_component(g: &CooccurrenceGraph, p: &Partition, n: NodeId, c: CommunityId) -> Option<f64> {
    let max = g.max_weight()?;
    let (sum, count) = g
        .neighbors(n)
        .iter()
        .filter(|&&(v, _)| p.community_of(v) == c)
        .fold((0.0, 0usize), |(s, k), &(_, w)| (s + w / max, k + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Groups `(community, sppmi)` contributions, already ordered by neighbor
/// id, into per-community means.
fn mean_by_community(contribs: impl Iterator<Item = (CommunityId, f64)>) -> Vec<(CommunityId, f64)> {
    let mut acc: BTreeMap<CommunityId, (f64, usize)> = BTreeMap::new();
    for (c, s) in contribs {
        let e = acc.entry(c).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    acc.into_iter().map(|(c, (s, k))| (c, s / k as f64)).collect()
}

/// Raw components of every node, computed in parallel.
pub fn raw_components(g: &CooccurrenceGraph, p: &Partition) -> ComponentRows {
    let Some(max) = g.max_weight() else {
        return vec![Vec::new(); g.node_count()];
    };
    let nodes: Vec<NodeId> = g.nodes().collect();
    nodes
        .par_iter()
        .map(|&u| mean_by_community(g.neighbors(u).iter().map(|&(v, w)| (p.community_of(v), w / max))))
        .collect()
}

/// Z-scores each community column over its present values. Absent components
/// stay absent; values that land on exactly zero are kept here and only
/// dropped when stored in a [`SparseEmbedding`].
pub fn zscore_components(raw: &ComponentRows, dim: usize) -> (ComponentRows, Vec<ColumnStats>) {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for row in raw {
        for &(c, v) in row {
            columns[c as usize].push(v);
        }
    }
    let stats: Vec<ColumnStats> = columns.iter().map(|col| ColumnStats::from_values(col)).collect();
    let normalized = raw
        .iter()
        .map(|row| row.iter().map(|&(c, v)| (c, stats[c as usize].zscore(v))).collect())
        .collect();
    (normalized, stats)
}

/// Members of each community ranked by the weight they share with co-members
/// (ties by term), truncated to `m`.
pub fn label_communities(g: &CooccurrenceGraph, p: &Partition, m: usize) -> Vec<Vec<String>> {
    p.communities()
        .map(|(c, members)| {
            let mut ranked: Vec<(f64, &str)> = members
                .iter()
                .map(|&u| {
                    let internal: f64 = g
                        .neighbors(u)
                        .iter()
                        .filter(|&&(v, _)| p.community_of(v) == c)
                        .map(|&(_, w)| w)
                        .sum();
                    (internal, g.term(u))
                })
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            ranked.into_iter().take(m).map(|(_, t)| t.to_string()).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<SparseEmbedding>,
    dim: usize,
    labels: Vec<Vec<String>>,
    column_stats: Vec<ColumnStats>,
    max_weight: f64,
    pub provenance: Provenance,
}

/// Builds one embedding per graph node, with community labels of up to
/// `label_count` terms.
pub fn build_model(g: &CooccurrenceGraph, p: &Partition, label_count: usize) -> Result<EmbeddingModel, EmbeddingError> {
    if p.node_count() != g.node_count() {
        return Err(EmbeddingError::PartitionMismatch {
            partition: p.node_count(),
            graph: g.node_count(),
        });
    }
    let dim = p.community_count();
    let raw = raw_components(g, p);
    let (normalized, column_stats) = zscore_components(&raw, dim);
    let vectors = normalized
        .into_iter()
        .map(|row| SparseEmbedding::from_sorted(dim, row))
        .collect();
    let terms = g.terms().to_vec();
    Ok(EmbeddingModel {
        index: index_terms(&terms),
        terms,
        vectors,
        dim,
        labels: label_communities(g, p, label_count),
        column_stats,
        max_weight: g.max_weight().unwrap_or(0.0),
        provenance: Provenance::default(),
    })
}

fn index_terms(terms: &[String]) -> HashMap<String, usize> {
    terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect()
}

/// Embeds a term that is not in the graph from its `(neighbor, weight)`
/// list, against the existing partition and stored normalization constants.
/// Weights are on the scale of the graph's (PPMI) edge weights.
pub fn embed_new_term(
    g: &CooccurrenceGraph,
    p: &Partition,
    model: &EmbeddingModel,
    neighbors: &[(&str, f64)],
) -> Result<SparseEmbedding, EmbeddingError> {
    let mut resolved = neighbors
        .iter()
        .map(|&(t, w)| {
            if w <= 0.0 || !w.is_finite() {
                return Err(EmbeddingError::InvalidVector(format!(
                    "neighbor {t:?} has non-positive weight {w}"
                )));
            }
            Ok((g.require_node(t)?, w))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if resolved.is_empty() {
        return Ok(SparseEmbedding::zeros(model.dim));
    }
    // Same summation order as for a node already in the graph.
    resolved.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let max = model.max_weight;
    let raw = mean_by_community(resolved.iter().map(|&(v, w)| (p.community_of(v), w / max)));
    Ok(SparseEmbedding::from_sorted(
        model.dim,
        raw.into_iter()
            .map(|(c, v)| (c, model.column_stats[c as usize].zscore(v))),
    ))
}

impl EmbeddingModel {
    pub fn from_parts(terms: Vec<String>, vectors: Vec<SparseEmbedding>, dim: usize) -> Result<Self, EmbeddingError> {
        if terms.len() != vectors.len() {
            return Err(EmbeddingError::InvalidVector(format!(
                "{} terms but {} vectors",
                terms.len(),
                vectors.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.dim != dim) {
            return Err(EmbeddingError::InvalidVector(format!(
                "vector dim {} != model dim {dim}",
                v.dim
            )));
        }
        let index = index_terms(&terms);
        if index.len() != terms.len() {
            return Err(EmbeddingError::InvalidVector("duplicate term".into()));
        }
        Ok(Self {
            terms,
            index,
            vectors,
            dim,
            labels: vec![Vec::new(); dim],
            column_stats: vec![ColumnStats::EMPTY; dim],
            max_weight: 0.0,
            provenance: Provenance::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn vectors(&self) -> &[SparseEmbedding] {
        &self.vectors
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn vector(&self, term: &str) -> Option<&SparseEmbedding> {
        self.index_of(term).map(|i| &self.vectors[i])
    }

    pub fn labels(&self, c: CommunityId) -> &[String] {
        self.labels.get(c as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn column_stats(&self) -> &[ColumnStats] {
        &self.column_stats
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    pub fn zero_norm_count(&self) -> usize {
        self.vectors.iter().filter(|v| v.nnz() == 0).count()
    }

    pub fn mean_nnz(&self) -> f64 {
        if self.vectors.is_empty() {
            0.0
        } else {
            self.vectors.iter().map(|v| v.nnz()).sum::<usize>() as f64 / self.vectors.len() as f64
        }
    }

    /// Sparse model text: `#dims D vocab N`, an optional
    /// `#provenance config=H seed=S` line, then `term c:v ...` per term with
    /// 6 significant digits.
    pub fn write_sparse<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "#dims {} vocab {}", self.dim, self.terms.len())?;
        if !self.provenance.config_hash.is_empty() {
            writeln!(
                w,
                "#provenance config={} seed={}",
                self.provenance.config_hash, self.provenance.seed
            )?;
        }
        for (t, v) in self.terms.iter().zip(&self.vectors) {
            w.write_all(t.as_bytes())?;
            for &(c, x) in &v.entries {
                write!(w, " {}:{}", c, format_sig(x, 6))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read_sparse<R: BufRead>(r: R) -> Result<Self, EmbeddingError> {
        let mut lines = r.lines();
        let parse = |line: usize, reason: String| EmbeddingError::Parse { line, reason };
        let header = lines
            .next()
            .ok_or_else(|| parse(1, "missing header".into()))?
            .map_err(|e| parse(1, e.to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (dim, n) = match h.as_slice() {
            ["#dims", d, "vocab", n] => (
                d.parse::<usize>().map_err(|_| parse(1, format!("bad dims {d:?}")))?,
                n.parse::<usize>().map_err(|_| parse(1, format!("bad vocab {n:?}")))?,
            ),
            _ => return Err(parse(1, format!("bad header {header:?}"))),
        };
        let mut terms = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n);
        let mut provenance = Provenance::default();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| parse(line_no, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#provenance ") {
                provenance =
                    parse_provenance(rest).ok_or_else(|| parse(line_no, format!("bad provenance {rest:?}")))?;
                continue;
            }
            let mut parts = line.split(' ');
            let term = parts.next().unwrap_or_default();
            let entries = parts
                .map(|tok| {
                    let (c, v) = tok
                        .split_once(':')
                        .ok_or_else(|| parse(line_no, format!("bad component {tok:?}")))?;
                    let c = c
                        .parse::<CommunityId>()
                        .map_err(|_| parse(line_no, format!("bad id {c:?}")))?;
                    let v = v
                        .parse::<f64>()
                        .map_err(|_| parse(line_no, format!("bad value {v:?}")))?;
                    Ok((c, v))
                })
                .collect::<Result<Vec<_>, EmbeddingError>>()?;
            let v = SparseEmbedding::new(dim, entries).map_err(|e| parse(line_no, e.to_string()))?;
            terms.push(term.to_string());
            vectors.push(v);
        }
        if terms.len() != n {
            return Err(parse(0, format!("header declares {n} terms, found {}", terms.len())));
        }
        let mut model = Self::from_parts(terms, vectors, dim)?;
        model.provenance = provenance;
        Ok(model)
    }

    /// Labels file: `community_id\tlabel1,label2,...`.
    pub fn write_labels<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (c, l) in self.labels.iter().enumerate() {
            writeln!(w, "{c}\t{}", l.join(","))?;
        }
        w.flush()
    }

    pub fn read_labels<R: BufRead>(&mut self, r: R) -> Result<(), EmbeddingError> {
        let mut labels = vec![Vec::new(); self.dim];
        for (i, line) in r.lines().enumerate() {
            let parse = |reason: String| EmbeddingError::Parse { line: i + 1, reason };
            let line = line.map_err(|e| parse(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (c, l) = line
                .split_once('\t')
                .ok_or_else(|| parse("expected id<TAB>labels".into()))?;
            let c: usize = c.parse().map_err(|_| parse(format!("bad id {c:?}")))?;
            let slot = labels
                .get_mut(c)
                .ok_or_else(|| parse(format!("community {c} out of range")))?;
            *slot = l.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
        }
        self.labels = labels;
        Ok(())
    }

    /// Normalization sidecar: provenance and SPPMI normalizer in the header,
    /// then `community\tcount\tmean\tstd` with round-trip precision.
    pub fn write_normalization<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "#normalization\tdims={}\tmax_weight={:?}\tconfig={}\tseed={}",
            self.dim, self.max_weight, self.provenance.config_hash, self.provenance.seed
        )?;
        for (c, s) in self.column_stats.iter().enumerate() {
            writeln!(w, "{c}\t{}\t{:?}\t{:?}", s.count, s.mean, s.std)?;
        }
        w.flush()
    }

    pub fn read_normalization<R: BufRead>(&mut self, r: R) -> Result<(), EmbeddingError> {
        let mut lines = r.lines();
        let parse = |line: usize, reason: String| EmbeddingError::Parse { line, reason };
        let header = lines
            .next()
            .ok_or_else(|| parse(1, "missing header".into()))?
            .map_err(|e| parse(1, e.to_string()))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        let mut parts = header.split('\t');
        if parts.next() != Some("#normalization") {
            return Err(parse(1, format!("bad header {header:?}")));
        }
        for p in parts {
            if let Some((k, v)) = p.split_once('=') {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| parse(1, format!("missing {k}")));
        let dim: usize = get("dims")?.parse().map_err(|_| parse(1, "bad dims".into()))?;
        if dim != self.dim {
            return Err(parse(1, format!("dims {dim} != model dims {}", self.dim)));
        }
        let max_weight: f64 = get("max_weight")?
            .parse()
            .map_err(|_| parse(1, "bad max_weight".into()))?;
        let provenance = Provenance {
            config_hash: get("config")?.to_string(),
            seed: get("seed")?.parse().map_err(|_| parse(1, "bad seed".into()))?,
        };
        let mut stats = vec![ColumnStats::EMPTY; dim];
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| parse(line_no, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || parse(line_no, format!("bad stats line {line:?}"));
            if f.len() != 4 {
                return Err(bad());
            }
            let c: usize = f[0].parse().map_err(|_| bad())?;
            let slot = stats.get_mut(c).ok_or_else(bad)?;
            *slot = ColumnStats {
                count: f[1].parse().map_err(|_| bad())?,
                mean: f[2].parse().map_err(|_| bad())?,
                std: f[3].parse().map_err(|_| bad())?,
            };
        }
        self.column_stats = stats;
        self.max_weight = max_weight;
        self.provenance = provenance;
        Ok(())
    }

    /// Word2vec text format: `N D` header, then `term v1 ... vD`.
    pub fn write_dense<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.dim > DENSE_EXPORT_WARN_DIMS {
            log::warn!(
                "dense export of {} dimensions for {} terms; output will be large",
                self.dim,
                self.terms.len()
            );
        }
        writeln!(w, "{} {}", self.terms.len(), self.dim)?;
        for (t, v) in self.terms.iter().zip(&self.vectors) {
            w.write_all(t.as_bytes())?;
            for x in v.to_dense() {
                write!(w, " {}", format_sig(x, 6))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// Writes the model file and its `.labels.tsv` / `.norm.tsv` sidecars.
    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        write_file(path, |w| self.write_sparse(w))?;
        write_file(&sidecar(path, "labels.tsv"), |w| self.write_labels(w))?;
        write_file(&sidecar(path, "norm.tsv"), |w| self.write_normalization(w))
    }

    /// Loads a model file plus whichever sidecars exist next to it.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let mut model = Self::read_sparse(open(path)?)?;
        let labels = sidecar(path, "labels.tsv");
        if labels.exists() {
            model.read_labels(open(&labels)?)?;
        }
        let norm = sidecar(path, "norm.tsv");
        if norm.exists() {
            model.read_normalization(open(&norm)?)?;
        }
        Ok(model)
    }
}

fn parse_provenance(text: &str) -> Option<Provenance> {
    let mut p = Provenance::default();
    for field in text.split_whitespace() {
        match field.split_once('=')? {
            ("config", h) => p.config_hash = h.to_string(),
            ("seed", s) => p.seed = s.parse().ok()?,
            _ => return None,
        }
    }
    Some(p)
}

/// `model.txt` -> `model.txt.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}

fn open(path: &Path) -> Result<BufReader<File>, EmbeddingError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn write_file<F>(path: &Path, f: F) -> Result<(), EmbeddingError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let io_err = |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(&str, &str, f64)]) -> CooccurrenceGraph {
        CooccurrenceGraph::from_weighted_edges(edges.iter().copied()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ppmi_abc() -> CooccurrenceGraph {
        let ab = (0.25f64 / (0.25 * 0.375)).log2();
        let bc = (0.5f64 / (0.375 * 0.375)).log2();
        g(&[("a", "b", ab), ("a", "c", ab), ("b", "c", bc)])
    }

    #[test]
    fn sppmi_normalizes_by_max() {
        let gr = ppmi_abc();
        let (a, b, c) = (NodeId(0), NodeId(1), NodeId(2));
        assert_eq!(sppmi(&gr, b, c).unwrap(), 1.0);
        assert!(close(sppmi(&gr, a, b).unwrap(), 0.7732, 1e-4));
        let single = g(&[("x", "y", 0.3)]);
        assert_eq!(sppmi(&single, NodeId(0), NodeId(1)).unwrap(), 1.0);
        assert!(sppmi(&g(&[("a", "b", 1.0), ("b", "c", 1.0)]), NodeId(0), NodeId(2)).is_err());
    }

    #[test]
    fn raw_component_means() {
        // n's neighbors: x (c0, sppmi 0.5), y and z (c1, sppmi 0.2 and 0.4),
        // w (c2) carries the maximum weight.
        let gr = g(&[("n", "x", 0.5), ("n", "y", 0.2), ("n", "z", 0.4), ("w", "v", 1.0)]);
        let labels: Vec<u32> = gr
            .terms()
            .iter()
            .map(|t| match t.as_str() {
                "x" => 0,
                "y" | "z" => 1,
                "n" => 3,
                _ => 2,
            })
            .collect();
        let p = Partition::from_labels(&labels);
        let n = gr.node("n").unwrap();
        let cx = p.community_of(gr.node("x").unwrap());
        let cy = p.community_of(gr.node("y").unwrap());
        let cw = p.community_of(gr.node("w").unwrap());
        assert_eq!(raw_component(&gr, &p, n, cx), Some(0.5));
        assert!(close(raw_component(&gr, &p, n, cy).unwrap(), 0.3, 1e-15));
        assert_eq!(raw_component(&gr, &p, n, cw), None);
    }

    #[test]
    fn zscore_columns() {
        let s = ColumnStats::from_values(&[1.0, 2.0, 3.0]);
        assert!(close(s.std, (2.0f64 / 3.0).sqrt(), 1e-15));
        let z: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&v| s.zscore(v)).collect();
        assert!(close(z[0], -1.2247, 1e-4) && z[1] == 0.0 && close(z[2], 1.2247, 1e-4));

        let s = ColumnStats::from_values(&[5.0, 5.0]);
        assert_eq!((s.zscore(5.0), s.std), (0.0, 0.0));
        let s = ColumnStats::from_values(&[7.0]);
        assert_eq!(s.zscore(7.0), 0.0);
        // 0.1 three times does not average back to exactly 0.1
        let s = ColumnStats::from_values(&[0.1, 0.1, 0.1]);
        assert_eq!(s.std, 0.0);

        let raw: ComponentRows = vec![vec![(0, 1.0)], vec![(0, 2.0), (1, 4.0)], vec![(0, 3.0)]];
        let (z, stats) = zscore_components(&raw, 2);
        assert_eq!(z[1][1], (1, 0.0));
        assert_eq!(stats[1].count, 1);
        assert!(close(z[2][0].1, 1.2247, 1e-4));
    }

    #[test]
    fn disjoint_edges_give_zero_vectors() {
        let gr = g(&[("a", "b", 1.0), ("c", "d", 1.0)]);
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        let m = build_model(&gr, &p, 3).unwrap();
        assert_eq!(m.dim(), 2);
        assert!(m.vectors().iter().all(|v| v.nnz() == 0));
        assert_eq!(m.zero_norm_count(), 4);
    }

    #[test]
    fn labels_rank_by_internal_strength() {
        let tri = g(&[("x", "y", 1.0), ("y", "z", 1.0), ("x", "z", 1.0)]);
        let p = Partition::from_labels(&[0, 0, 0]);
        assert_eq!(label_communities(&tri, &p, 2), vec![vec!["x", "y"]]);
        assert_eq!(label_communities(&tri, &p, 10), vec![vec!["x", "y", "z"]]);

        let heavy = g(&[("a", "q", 1.0), ("b", "q", 1.0), ("a", "b", 0.5), ("q", "out", 5.0)]);
        let labels: Vec<u32> = heavy.terms().iter().map(|t| (t == "out") as u32).collect();
        let p = Partition::from_labels(&labels);
        assert_eq!(
            label_communities(&heavy, &p, 1)[p.community_of(NodeId(0)) as usize],
            vec!["q"]
        );
    }

    fn planted() -> (CooccurrenceGraph, Partition) {
        // two dense groups with uneven weights and one bridge
        let mut e = Vec::new();
        for (side, base) in [("l", 1.0), ("r", 2.0)] {
            for i in 0..5 {
                for j in i + 1..5 {
                    e.push((format!("{side}{i}"), format!("{side}{j}"), base + (i * j) as f64 * 0.25));
                }
            }
        }
        e.push(("l0".into(), "r0".into(), 0.5));
        e.push(("l4".into(), "r3".into(), 0.75));
        let gr =
            CooccurrenceGraph::from_weighted_edges(e.iter().map(|(a, b, w)| (a.as_str(), b.as_str(), *w))).unwrap();
        let labels: Vec<u32> = gr.terms().iter().map(|t| t.starts_with('r') as u32).collect();
        (gr, Partition::from_labels(&labels))
    }

    #[test]
    fn model_respects_sparsity_bound() {
        let (gr, p) = planted();
        let m = build_model(&gr, &p, 3).unwrap();
        for u in gr.nodes() {
            assert!(m.vectors()[u.index()].nnz() <= gr.degree(u).unwrap());
        }
        let again = build_model(&gr, &p, 3).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn new_term_reproduces_existing_word() {
        let (gr, p) = planted();
        let m = build_model(&gr, &p, 3).unwrap();
        for u in gr.nodes() {
            let mut profile: Vec<(&str, f64)> = gr.neighbors(u).iter().map(|&(v, w)| (gr.term(v), w)).collect();
            profile.reverse();
            let v = embed_new_term(&gr, &p, &m, &profile).unwrap();
            assert_eq!(&v, &m.vectors()[u.index()]);
        }
        assert_eq!(embed_new_term(&gr, &p, &m, &[]).unwrap().nnz(), 0);
        assert!(embed_new_term(&gr, &p, &m, &[("nope", 1.0)]).is_err());
        let split = embed_new_term(&gr, &p, &m, &[("l1", 1.0), ("r2", 2.0), ("r4", 0.3)]).unwrap();
        assert!(split.nnz() <= 2);
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseEmbedding::new(3, vec![(0, 1.0), (2, -1.0)]).is_ok());
        assert!(SparseEmbedding::new(3, vec![(2, 1.0), (0, 1.0)]).is_err());
        assert!(SparseEmbedding::new(3, vec![(3, 1.0)]).is_err());
        assert!(SparseEmbedding::new(3, vec![(1, 0.0)]).is_err());
    }

    #[test]
    fn files_round_trip() {
        let (gr, p) = planted();
        let mut m = build_model(&gr, &p, 3).unwrap();
        m.provenance = Provenance {
            config_hash: "abc123".into(),
            seed: 42,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!(
            "#dims 2 vocab {}\n#provenance config=abc123 seed=42\n",
            gr.node_count()
        )));
        let bare = EmbeddingModel::read_sparse(text.as_bytes()).unwrap();
        assert_eq!(bare.provenance, m.provenance);

        let back = EmbeddingModel::load(&path).unwrap();
        assert_eq!(back.terms(), m.terms());
        assert_eq!(back.all_labels(), m.all_labels());
        assert_eq!(back.column_stats(), m.column_stats());
        assert_eq!(back.max_weight(), m.max_weight());
        assert_eq!(back.provenance, m.provenance);
        for (a, b) in back.vectors().iter().zip(m.vectors()) {
            assert_eq!(a.nnz(), b.nnz());
            for (x, y) in a.entries().iter().zip(b.entries()) {
                assert_eq!(x.0, y.0);
                assert!(((x.1 - y.1) / y.1).abs() < 5e-6);
            }
        }

        let mut dense = Vec::new();
        m.write_dense(&mut dense).unwrap();
        let dense = String::from_utf8(dense).unwrap();
        let mut lines = dense.lines();
        assert_eq!(lines.next().unwrap(), format!("{} 2", gr.node_count()));
        assert!(lines.all(|l| l.split(' ').count() == 3));
    }
}
