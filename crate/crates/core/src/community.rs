//! Weighted asynchronous label propagation and partition utilities.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{CooccurrenceGraph, NodeId};

pub type CommunityId = u32;

/// Relative tolerance under which two label votes count as tied. Votes are
/// float sums, so exact equality would make ties depend on summation order.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("label propagation needs a graph with at least one node")]
    EmptyGraph,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid partition: {0}")]
    Invalid(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Node to community assignment with dense community ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<CommunityId>,
    members: Vec<Vec<NodeId>>,
}

impl Partition {
    /// Compacts arbitrary labels to dense ids in order of first appearance
    /// over ascending node ids.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut remap: HashMap<L, CommunityId> = HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut members: Vec<Vec<NodeId>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let next = remap.len() as CommunityId;
            let c = *remap.entry(l).or_insert(next);
            if c as usize == members.len() {
                members.push(Vec::new());
            }
            members[c as usize].push(NodeId(i as u32));
            assignment.push(c);
        }
        Self { assignment, members }
    }

    /// Validates that ids are dense and every community is non-empty.
    pub fn from_assignment(assignment: Vec<CommunityId>) -> Result<Self, CommunityError> {
        let n = assignment.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); n];
        for (i, &c) in assignment.iter().enumerate() {
            members[c as usize].push(NodeId(i as u32));
        }
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(CommunityError::Invalid(format!(
                "community ids not contiguous: {c} is empty"
            )));
        }
        Ok(Self { assignment, members })
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.members.len()
    }

    pub fn community_of(&self, u: NodeId) -> CommunityId {
        self.assignment[u.index()]
    }

    pub fn assignment(&self) -> &[CommunityId] {
        &self.assignment
    }

    /// Members of `c` in ascending node order.
    pub fn members(&self, c: CommunityId) -> &[NodeId] {
        &self.members[c as usize]
    }

    pub fn communities(&self) -> impl Iterator<Item = (CommunityId, &[NodeId])> {
        self.members
            .iter()
            .enumerate()
            .map(|(c, m)| (c as CommunityId, m.as_slice()))
    }

    /// Writes `term\tcommunity_id` rows in node order.
    pub fn write_tsv<W: Write>(&self, g: &CooccurrenceGraph, mut w: W) -> io::Result<()> {
        for u in g.nodes() {
            writeln!(w, "{}\t{}", g.term(u), self.community_of(u))?;
        }
        w.flush()
    }

    pub fn save(&self, g: &CooccurrenceGraph, path: &Path) -> Result<(), CommunityError> {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        self.write_tsv(g, BufWriter::new(f)).map_err(|e| io_err(path, e))
    }

    /// Reads a partition file against `g`. Every node must be assigned
    /// exactly once.
    pub fn read_tsv<R: BufRead>(g: &CooccurrenceGraph, r: R) -> Result<Self, CommunityError> {
        let mut assignment: Vec<Option<CommunityId>> = vec![None; g.node_count()];
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let parse = |reason: String| CommunityError::Parse { line: line_no, reason };
            let line = line.map_err(|e| parse(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (term, cid) = line
                .split_once('\t')
                .ok_or_else(|| parse("expected term<TAB>community_id".into()))?;
            let cid: CommunityId = cid.parse().map_err(|_| parse(format!("bad community id {cid:?}")))?;
            let u = g
                .node(term)
                .ok_or_else(|| parse(format!("term {term:?} not in graph")))?;
            if assignment[u.index()].replace(cid).is_some() {
                return Err(parse(format!("term {term:?} assigned twice")));
            }
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| CommunityError::Invalid(format!("term {:?} unassigned", g.terms()[i]))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_assignment(assignment)
    }

    pub fn load(g: &CooccurrenceGraph, path: &Path) -> Result<Self, CommunityError> {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        Self::read_tsv(g, BufReader::new(f))
    }
}

fn io_err(path: &Path, source: io::Error) -> CommunityError {
    CommunityError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpConfig {
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_sweeps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOutcome {
    pub partition: Partition,
    pub converged: bool,
    pub sweeps: usize,
}

/// Accumulates weighted label votes around one node without reallocating.
struct VoteTable {
    votes: Vec<f64>,
    touched: Vec<u32>,
}

impl VoteTable {
    fn new(n: usize) -> Self {
        Self {
            votes: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    /// Tallies the neighbor votes of `u`, returning the maximum vote, and
    /// leaves the maximizing labels in `best` in ascending order.
    fn tally(&mut self, g: &CooccurrenceGraph, labels: &[u32], u: NodeId, best: &mut Vec<u32>) -> f64 {
        for &(v, w) in g.neighbors(u) {
            let l = labels[v.index()];
            if self.votes[l as usize] == 0.0 {
                self.touched.push(l);
            }
            self.votes[l as usize] += w;
        }
        let max = self.touched.iter().map(|&l| self.votes[l as usize]).fold(0.0, f64::max);
        best.clear();
        for &l in &self.touched {
            if is_maximal(self.votes[l as usize], max) {
                best.push(l);
            }
            self.votes[l as usize] = 0.0;
        }
        self.touched.clear();
        best.sort_unstable();
        max
    }
}

#[inline]
fn is_maximal(vote: f64, max: f64) -> bool {
    vote >= max - TIE_TOLERANCE * max
}

/// Asynchronous weighted label propagation.
///
/// Every node starts in its own community. Each sweep visits the nodes in a
/// fresh seeded random order and moves each one to the label with the largest
/// total edge weight among its neighbors. A node keeps its current label when
/// that label is among the maximizers; other ties are broken uniformly at
/// random. The run converges on the first sweep without a change, which is
/// exactly the state where every labelled node holds a majority label.
pub fn label_propagation(g: &CooccurrenceGraph, config: &LpConfig) -> Result<LpOutcome, CommunityError> {
    if g.is_empty() {
        return Err(CommunityError::EmptyGraph);
    }
    if config.max_sweeps == 0 {
        return Err(CommunityError::Config("max_sweeps must be >= 1".into()));
    }
    let n = g.node_count();
    let mut labels: Vec<u32> = (0..n as u32).collect();
    let mut order: Vec<NodeId> = g.nodes().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut table = VoteTable::new(n);
    let mut best = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        order.shuffle(&mut rng);
        let mut changes = 0usize;
        for &u in &order {
            if g.neighbors(u).is_empty() {
                continue;
            }
            table.tally(g, &labels, u, &mut best);
            let current = labels[u.index()];
            if best.binary_search(&current).is_ok() {
                continue;
            }
            let pick = if best.len() == 1 {
                best[0]
            } else {
                best[rng.gen_range(0..best.len())]
            };
            labels[u.index()] = pick;
            changes += 1;
        }
        log::trace!("label propagation sweep {sweeps}: {changes} changes");
        if changes == 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("label propagation did not converge within {} sweeps", config.max_sweeps);
    }
    Ok(LpOutcome {
        partition: Partition::from_labels(&labels),
        converged,
        sweeps,
    })
}

/// True iff every node with neighbors holds a label attaining the maximum
/// weighted vote among its neighbors' labels.
pub fn verify_converged(g: &CooccurrenceGraph, p: &Partition) -> bool {
    if p.node_count() != g.node_count() {
        return false;
    }
    let labels = p.assignment();
    let mut table = VoteTable::new(p.community_count().max(1));
    let mut best = Vec::new();
    g.nodes().all(|u| {
        if g.neighbors(u).is_empty() {
            return true;
        }
        table.tally(g, labels, u, &mut best);
        best.binary_search(&labels[u.index()]).is_ok()
    })
}

/// Community size histogram: size to number of communities of that size.
pub fn size_distribution(p: &Partition) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for (_, m) in p.communities() {
        *hist.entry(m.len()).or_insert(0) += 1;
    }
    hist
}

pub fn write_sizes_tsv<W: Write>(hist: &BTreeMap<usize, usize>, mut w: W) -> io::Result<()> {
    for (size, count) in hist {
        writeln!(w, "{size}\t{count}")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(edges: &[(&str, &str)]) -> CooccurrenceGraph {
        CooccurrenceGraph::from_weighted_edges(edges.iter().map(|&(a, b)| (a, b, 1.0))).unwrap()
    }

    fn two_cliques() -> CooccurrenceGraph {
        let mut e = Vec::new();
        for side in ["l", "r"] {
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((format!("{side}{i}"), format!("{side}{j}")));
                }
            }
        }
        e.push(("l0".into(), "r0".into()));
        CooccurrenceGraph::from_weighted_edges(e.iter().map(|(a, b)| (a.as_str(), b.as_str(), 1.0))).unwrap()
    }

    #[test]
    fn single_edge_merges() {
        let g = unit(&[("a", "b")]);
        for seed in 0..20 {
            let out = label_propagation(&g, &LpConfig { seed, max_sweeps: 100 }).unwrap();
            assert!(out.converged);
            assert_eq!(out.partition.community_count(), 1);
        }
    }

    #[test]
    fn triangle_merges() {
        let g = unit(&[("a", "b"), ("b", "c"), ("a", "c")]);
        for seed in 0..50 {
            let out = label_propagation(&g, &LpConfig { seed, max_sweeps: 100 }).unwrap();
            assert!(out.converged);
            assert_eq!(out.partition.community_count(), 1);
        }
    }

    #[test]
    fn bridged_cliques_split() {
        let g = two_cliques();
        let l: Vec<NodeId> = (0..4).map(|i| g.node(&format!("l{i}")).unwrap()).collect();
        let r: Vec<NodeId> = (0..4).map(|i| g.node(&format!("r{i}")).unwrap()).collect();
        let mut split = 0;
        for seed in 0..100 {
            let out = label_propagation(&g, &LpConfig { seed, max_sweeps: 100 }).unwrap();
            assert!(out.converged);
            assert!(verify_converged(&g, &out.partition));
            let p = &out.partition;
            let left_label = p.community_of(l[0]);
            let right_label = p.community_of(r[0]);
            let left_whole = l.iter().all(|&u| p.community_of(u) == left_label);
            let right_whole = r.iter().all(|&u| p.community_of(u) == right_label);
            if left_whole && right_whole && left_label != right_label {
                split += 1;
            }
        }
        assert!(split >= 90, "cliques split in only {split}/100 runs");
    }

    #[test]
    fn isolated_nodes_keep_singletons() {
        let g = unit(&[("a", "b"), ("c", "d")]).filter_map(|_| true, |u, _, w| (u.0 == 0).then_some(w));
        let out = label_propagation(&g, &LpConfig::default()).unwrap();
        assert_eq!(out.partition.community_count(), 3);
        assert!(out.converged);
    }

    #[test]
    fn empty_graph_and_bad_config() {
        assert!(matches!(
            label_propagation(&CooccurrenceGraph::empty(), &LpConfig::default()),
            Err(CommunityError::EmptyGraph)
        ));
        let g = unit(&[("a", "b")]);
        assert!(label_propagation(&g, &LpConfig { seed: 0, max_sweeps: 0 }).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = two_cliques();
        let out = label_propagation(&g, &LpConfig { seed: 1, max_sweeps: 1 }).unwrap();
        assert_eq!(out.sweeps, 1);
        assert!(!out.converged);
        assert_eq!(out.partition.node_count(), 8);
    }

    #[test]
    fn verify_examples() {
        let g = two_cliques();
        let labels: Vec<u32> = g.terms().iter().map(|t| t.starts_with('r') as u32).collect();
        assert!(verify_converged(&g, &Partition::from_labels(&labels)));

        // Each node's own label gets no vote from its two neighbors.
        let tri = unit(&[("a", "b"), ("b", "c"), ("a", "c")]);
        assert!(!verify_converged(&tri, &Partition::from_labels(&[0, 1, 2])));
        // A path cut in the middle is a tie at b and c: a trivial fixpoint.
        let p4 = unit(&[("a", "b"), ("b", "c"), ("c", "d")]);
        assert!(verify_converged(&p4, &Partition::from_labels(&[0, 0, 1, 1])));

        let path = unit(&[("a", "b"), ("b", "c")]);
        assert!(!verify_converged(&path, &Partition::from_labels(&[1, 2, 2])));
        assert!(verify_converged(&path, &Partition::from_labels(&[2, 2, 2])));
    }

    #[test]
    fn size_histogram() {
        let p = Partition::from_labels(&[7, 7, 3]);
        assert_eq!(size_distribution(&p), BTreeMap::from([(1, 1), (2, 1)]));
        assert!(size_distribution(&Partition::from_labels::<u32>(&[])).is_empty());
        let mut buf = Vec::new();
        write_sizes_tsv(&size_distribution(&p), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1\t1\n2\t1\n");
    }

    #[test]
    fn compaction_is_dense_and_inverse() {
        let p = Partition::from_labels(&[9, 4, 9, 1, 4]);
        assert_eq!(p.assignment(), &[0, 1, 0, 2, 1]);
        for (c, m) in p.communities() {
            assert!(m.iter().all(|&u| p.community_of(u) == c));
        }
        assert!(Partition::from_assignment(vec![0, 2]).is_err());
    }

    #[test]
    fn partition_file_round_trip() {
        let g = two_cliques();
        let out = label_propagation(&g, &LpConfig::default()).unwrap();
        let mut buf = Vec::new();
        out.partition.write_tsv(&g, &mut buf).unwrap();
        assert_eq!(Partition::read_tsv(&g, &buf[..]).unwrap(), out.partition);
        assert!(Partition::read_tsv(&g, &b"l0\t0\n"[..]).is_err());
        assert!(Partition::read_tsv(&g, &b"zz\t0\n"[..]).is_err());
    }
}
