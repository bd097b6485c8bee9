//! Weighted undirected co-occurrence graph and its PPMI probability model.
//!
//! Nodes carry dense ids `0..n` assigned in ascending term order, so every
//! graph built from the same edge set has the same layout. Adjacency lists
//! are sorted by neighbor id. Edge probabilities are taken over unordered
//! pairs, `p(u,v) = w(u,v) / W`, and node marginals are
//! `p(u) = strength(u) / 2W`, which makes PPMI invariant to a global
//! rescaling of the weights.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::ingest::PairCounts;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on term {0:?}")]
    SelfLoop(String),
    #[error("non-positive weight {weight} on edge {a:?}-{b:?}")]
    NonPositiveWeight { a: String, b: String, weight: f64 },
    #[error("duplicate edge {0:?}-{1:?}")]
    DuplicateEdge(String, String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("no edge between {0} and {1}")]
    MissingEdge(NodeId, NodeId),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceGraph {
    terms: Vec<String>,
    index: HashMap<String, NodeId>,
    adjacency: Vec<Vec<(NodeId, f64)>>,
    strength: Vec<f64>,
    total_weight: f64,
    edge_count: usize,
}

impl Default for CooccurrenceGraph {
    fn default() -> Self {
        Self::empty()
    }
}

impl CooccurrenceGraph {
    pub fn empty() -> Self {
        Self {
            terms: Vec::new(),
            index: HashMap::new(),
            adjacency: Vec::new(),
            strength: Vec::new(),
            total_weight: 0.0,
            edge_count: 0,
        }
    }

    /// Builds the graph from aggregated pair counts.
    pub fn build(edges: &PairCounts) -> Result<Self, GraphError> {
        Self::from_weighted_edges(edges.iter().map(|(a, b, c)| (a, b, c as f64)))
    }

    /// Builds from arbitrary `(termA, termB, weight)` triples. Each unordered
    /// pair may appear only once.
    pub fn from_weighted_edges<'a, I>(edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let edges: Vec<(&str, &str, f64)> = edges.into_iter().collect();
        let mut terms: Vec<&str> = Vec::with_capacity(edges.len());
        for &(a, b, w) in &edges {
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight {
                    a: a.to_string(),
                    b: b.to_string(),
                    weight: w,
                });
            }
            terms.push(a);
            terms.push(b);
        }
        terms.sort_unstable();
        terms.dedup();
        let index: HashMap<String, NodeId> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), NodeId(i as u32)))
            .collect();
        let mut adjacency = vec![Vec::new(); terms.len()];
        for &(a, b, w) in &edges {
            let (u, v) = (index[a], index[b]);
            adjacency[u.index()].push((v, w));
            adjacency[v.index()].push((u, w));
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable_by_key(|&(v, _)| v);
            if let Some(pair) = list.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(GraphError::DuplicateEdge(
                    terms[u].to_string(),
                    terms[pair[0].0.index()].to_string(),
                ));
            }
        }
        let terms = terms.into_iter().map(str::to_string).collect();
        Ok(Self::assemble(terms, index, adjacency))
    }

    /// Computes strengths, edge count and `W` from sorted symmetric adjacency.
    fn assemble(terms: Vec<String>, index: HashMap<String, NodeId>, adjacency: Vec<Vec<(NodeId, f64)>>) -> Self {
        let strength: Vec<f64> = adjacency.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
        let mut total_weight = 0.0;
        let mut edge_count = 0;
        for (u, list) in adjacency.iter().enumerate() {
            for &(v, w) in list {
                if v.index() > u {
                    total_weight += w;
                    edge_count += 1;
                }
            }
        }
        Self {
            terms,
            index,
            adjacency,
            strength,
            total_weight,
            edge_count,
        }
    }

    pub fn node_count(&self) -> usize {
        self.terms.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of edge weights, each unordered edge counted once.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.terms.len() as u32).map(NodeId)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, u: NodeId) -> &str {
        &self.terms[u.index()]
    }

    pub fn node(&self, term: &str) -> Option<NodeId> {
        self.index.get(term).copied()
    }

    pub fn require_node(&self, term: &str) -> Result<NodeId, GraphError> {
        self.node(term).ok_or_else(|| GraphError::UnknownTerm(term.to_string()))
    }

    fn check(&self, u: NodeId) -> Result<(), GraphError> {
        if u.index() < self.terms.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(u))
        }
    }

    /// Neighbors of `u` sorted by id. Panics on an out-of-range id.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[u.index()]
    }

    /// Unweighted degree (neighbor count).
    pub fn degree(&self, u: NodeId) -> Result<usize, GraphError> {
        self.check(u)?;
        Ok(self.adjacency[u.index()].len())
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, u: NodeId) -> Result<f64, GraphError> {
        self.check(u)?;
        Ok(self.strength[u.index()])
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Result<f64, GraphError> {
        self.check(u)?;
        self.check(v)?;
        let list = &self.adjacency[u.index()];
        list.binary_search_by_key(&v, |&(n, _)| n)
            .map(|i| list[i].1)
            .map_err(|_| GraphError::MissingEdge(u, v))
    }

    pub fn max_weight(&self) -> Option<f64> {
        self.edges().map(|(_, _, w)| w).reduce(f64::max)
    }

    /// Unordered edges as `(u, v, w)` with `u < v`, in ascending `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            let u = NodeId(u as u32);
            list.iter().filter(move |&&(v, _)| v > u).map(move |&(v, w)| (u, v, w))
        })
    }

    /// `max(0, log2(p(u,v) / (p(u) p(v))))` against this graph's marginals.
    pub fn ppmi(&self, u: NodeId, v: NodeId) -> Result<f64, GraphError> {
        let w = self.weight(u, v)?;
        Ok(ppmi_value(
            w,
            self.strength[u.index()],
            self.strength[v.index()],
            self.total_weight,
        ))
    }

    /// Keeps the nodes for which `keep` is true, and among their mutual edges
    /// those accepted by `reweight` (returning the new weight, or `None` to
    /// drop). Relative node order is preserved, so ids stay term-sorted.
    pub fn filter_map<K, F>(&self, keep: K, mut reweight: F) -> Self
    where
        K: Fn(NodeId) -> bool,
        F: FnMut(NodeId, NodeId, f64) -> Option<f64>,
    {
        let mut remap = vec![None; self.terms.len()];
        let mut terms = Vec::new();
        for u in self.nodes() {
            if keep(u) {
                remap[u.index()] = Some(NodeId(terms.len() as u32));
                terms.push(self.terms[u.index()].clone());
            }
        }
        let mut adjacency: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); terms.len()];
        for (u, v, w) in self.edges() {
            if let (Some(nu), Some(nv)) = (remap[u.index()], remap[v.index()]) {
                if let Some(nw) = reweight(u, v, w) {
                    adjacency[nu.index()].push((nv, nw));
                    adjacency[nv.index()].push((nu, nw));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), NodeId(i as u32)))
            .collect();
        Self::assemble(terms, index, adjacency)
    }

    /// Drops nodes without neighbors.
    pub fn without_isolated(&self) -> Self {
        self.filter_map(|u| !self.adjacency[u.index()].is_empty(), |_, _, w| Some(w))
    }

    /// Writes the text snapshot: a header line, the vocabulary, then edges.
    /// Weights use the shortest round-trip decimal form, so a load restores
    /// every weight bit-exactly.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "#cooccurrence-graph\tnodes={}\tedges={}\tW={:?}",
            self.node_count(),
            self.edge_count(),
            self.total_weight
        )?;
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(w, "{i}\t{t}")?;
        }
        for (u, v, wt) in self.edges() {
            writeln!(w, "{}\t{}\t{:?}", u.0, v.0, wt)?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        self.write_snapshot(BufWriter::new(f)).map_err(|e| io_err(path, e))
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let corrupt = |m: String| GraphError::Corrupt(m);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| corrupt("missing header".into()))?
            .map_err(|e| corrupt(e.to_string()))?;
        let (nodes, edges, declared_w) = parse_header(&header)?;

        let mut terms = Vec::with_capacity(nodes);
        let mut index = HashMap::with_capacity(nodes);
        for i in 0..nodes {
            let line = lines
                .next()
                .ok_or_else(|| corrupt(format!("vocabulary truncated at node {i}")))?
                .map_err(|e| corrupt(e.to_string()))?;
            let (id, term) = line
                .split_once('\t')
                .ok_or_else(|| corrupt(format!("bad vocabulary line {line:?}")))?;
            if id.parse::<usize>().ok() != Some(i) {
                return Err(corrupt(format!("node ids not dense at {i}")));
            }
            if index.insert(term.to_string(), NodeId(i as u32)).is_some() {
                return Err(corrupt(format!("duplicate term {term:?}")));
            }
            terms.push(term.to_string());
        }
        if terms.windows(2).any(|p| p[0] >= p[1]) {
            return Err(corrupt("vocabulary not in ascending term order".into()));
        }

        let mut adjacency: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); nodes];
        let mut prev: Option<(u32, u32)> = None;
        for e in 0..edges {
            let line = lines
                .next()
                .ok_or_else(|| corrupt(format!("edge list truncated at edge {e}")))?
                .map_err(|e| corrupt(e.to_string()))?;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(corrupt(format!("bad edge line {line:?}")));
            }
            let u: u32 = f[0].parse().map_err(|_| corrupt(format!("bad edge line {line:?}")))?;
            let v: u32 = f[1].parse().map_err(|_| corrupt(format!("bad edge line {line:?}")))?;
            let w: f64 = f[2].parse().map_err(|_| corrupt(format!("bad edge line {line:?}")))?;
            if u >= v || v as usize >= nodes {
                return Err(corrupt(format!("edge {u}-{v} out of order or range")));
            }
            if prev.is_some_and(|p| p >= (u, v)) {
                return Err(corrupt(format!("edges not strictly ascending at {u}-{v}")));
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(corrupt(format!("non-positive weight on edge {u}-{v}")));
            }
            prev = Some((u, v));
            adjacency[u as usize].push((NodeId(v), w));
            adjacency[v as usize].push((NodeId(u), w));
        }
        if let Some(Ok(extra)) = lines.next() {
            if !extra.is_empty() {
                return Err(corrupt("trailing data after edge list".into()));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        let g = Self::assemble(terms, index, adjacency);
        if g.total_weight.to_bits() != declared_w.to_bits() {
            return Err(corrupt(format!(
                "declared W={declared_w:?} but edges sum to {:?}",
                g.total_weight
            )));
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        Self::read_snapshot(BufReader::new(f))
    }
}

/// Returns true when the first line of `path` is a graph snapshot header.
pub fn is_snapshot(path: &Path) -> Result<bool, GraphError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(|e| io_err(path, e))?;
    Ok(first.starts_with("#cooccurrence-graph"))
}

fn parse_header(header: &str) -> Result<(usize, usize, f64), GraphError> {
    let corrupt = || GraphError::Corrupt(format!("bad header {header:?}"));
    let mut parts = header.split('\t');
    if parts.next() != Some("#cooccurrence-graph") {
        return Err(corrupt());
    }
    let mut field =
        |key: &str| -> Result<&str, GraphError> { parts.next().and_then(|p| p.strip_prefix(key)).ok_or_else(corrupt) };
    let nodes = field("nodes=")?.parse().map_err(|_| corrupt())?;
    let edges = field("edges=")?.parse().map_err(|_| corrupt())?;
    let w = field("W=")?.parse().map_err(|_| corrupt())?;
    Ok((nodes, edges, w))
}

fn io_err(path: &Path, source: io::Error) -> GraphError {
    GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// PPMI of one edge from its weight, the endpoint strengths and `W`.
pub fn ppmi_value(w: f64, strength_u: f64, strength_v: f64, total: f64) -> f64 {
    let p_uv = w / total;
    let p_u = strength_u / (2.0 * total);
    let p_v = strength_v / (2.0 * total);
    (p_uv / (p_u * p_v)).log2().max(0.0)
}
