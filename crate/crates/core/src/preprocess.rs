//! Graph pruning: PPMI edge filtering, k-core extraction and removal of the
//! highest-degree nodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ppmi_value, CooccurrenceGraph, NodeId};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid stage order {0:?}; expected a permutation of filter,ntop,kcore starting with filter")]
    BadOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PpmiFilter,
    RemoveTopDegree,
    KCore,
}

impl Stage {
    fn key(self) -> &'static str {
        match self {
            Stage::PpmiFilter => "filter",
            Stage::RemoveTopDegree => "ntop",
            Stage::KCore => "kcore",
        }
    }
}

/// Order in which the three pruning stages run. PPMI filtering always comes
/// first since it needs the raw count marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageOrder {
    /// filter, ntop, kcore: the final graph satisfies the k-core degree bound.
    #[default]
    NtopThenKCore,
    /// filter, kcore, ntop: the order the stages are usually listed in.
    KCoreThenNtop,
}

impl StageOrder {
    pub fn stages(self) -> [Stage; 3] {
        match self {
            StageOrder::NtopThenKCore => [Stage::PpmiFilter, Stage::RemoveTopDegree, Stage::KCore],
            StageOrder::KCoreThenNtop => [Stage::PpmiFilter, Stage::KCore, Stage::RemoveTopDegree],
        }
    }
}

impl fmt::Display for StageOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<&str> = self.stages().iter().map(|s| s.key()).collect();
        f.write_str(&keys.join(","))
    }
}

impl FromStr for StageOrder {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match norm.as_str() {
            "filter,ntop,kcore" => Ok(StageOrder::NtopThenKCore),
            "filter,kcore,ntop" => Ok(StageOrder::KCoreThenNtop),
            _ => Err(PreprocessError::BadOrder(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub k: usize,
    pub ntop: usize,
    pub order: StageOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            k: 10,
            ntop: 200,
            order: StageOrder::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub order: String,
    pub k: usize,
    pub ntop: usize,
    pub stages: Vec<StageReport>,
}

/// Keeps the edges with strictly positive PPMI (against the input graph's
/// marginals), reweighted to that PPMI, and drops nodes left without edges.
pub fn ppmi_filter(g: &CooccurrenceGraph) -> CooccurrenceGraph {
    let total = g.total_weight();
    let strength = |u: NodeId| g.weighted_degree(u).expect("node in graph");
    let reweighted = g.filter_map(
        |_| true,
        |u, v, w| {
            let p = ppmi_value(w, strength(u), strength(v), total);
            (p > 0.0).then_some(p)
        },
    );
    reweighted.without_isolated()
}

/// Maximal subgraph in which every node has at least `k` neighbors.
pub fn k_core(g: &CooccurrenceGraph, k: usize) -> CooccurrenceGraph {
    let mut degree: Vec<usize> = g.nodes().map(|u| g.neighbors(u).len()).collect();
    let mut removed = vec![false; degree.len()];
    let mut stack: Vec<NodeId> = g.nodes().filter(|u| degree[u.index()] < k).collect();
    for u in &stack {
        removed[u.index()] = true;
    }
    while let Some(u) = stack.pop() {
        for &(v, _) in g.neighbors(u) {
            let vi = v.index();
            if removed[vi] {
                continue;
            }
            degree[vi] -= 1;
            if degree[vi] < k {
                removed[vi] = true;
                stack.push(v);
            }
        }
    }
    g.filter_map(|u| !removed[u.index()], |_, _, w| Some(w))
}

/// Removes the `ntop` nodes of highest unweighted degree (ties by ascending
/// id). Nodes isolated by the removal are kept.
pub fn remove_top_degree(g: &CooccurrenceGraph, ntop: usize) -> CooccurrenceGraph {
    if ntop == 0 {
        return g.clone();
    }
    let mut ranked: Vec<NodeId> = g.nodes().collect();
    ranked.sort_by(|&a, &b| g.neighbors(b).len().cmp(&g.neighbors(a).len()).then(a.cmp(&b)));
    let mut drop = vec![false; g.node_count()];
    for u in ranked.into_iter().take(ntop) {
        drop[u.index()] = true;
    }
    g.filter_map(|u| !drop[u.index()], |_, _, w| Some(w))
}

pub fn preprocess_pipeline(g: &CooccurrenceGraph, config: &PreprocessConfig) -> (CooccurrenceGraph, PreprocessReport) {
    let mut current = g.clone();
    let mut stages = Vec::with_capacity(3);
    for stage in config.order.stages() {
        let next = match stage {
            Stage::PpmiFilter => ppmi_filter(&current),
            Stage::RemoveTopDegree => remove_top_degree(&current, config.ntop),
            Stage::KCore => k_core(&current, config.k),
        };
        log::debug!(
            "{:?}: {} -> {} nodes, {} -> {} edges",
            stage,
            current.node_count(),
            next.node_count(),
            current.edge_count(),
            next.edge_count()
        );
        stages.push(StageReport {
            stage,
            nodes_before: current.node_count(),
            nodes_after: next.node_count(),
            edges_before: current.edge_count(),
            edges_after: next.edge_count(),
        });
        current = next;
    }
    let report = PreprocessReport {
        order: config.order.to_string(),
        k: config.k,
        ntop: config.ntop,
        stages,
    };
    (current, report)
}
