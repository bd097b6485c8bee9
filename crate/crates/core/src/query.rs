//! Exact cosine nearest-neighbor search and per-dimension explanations.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{self, Write};

use thiserror::Error;

use crate::community::CommunityId;
use crate::embedding::{EmbeddingModel, SparseEmbedding};
use crate::numfmt::format_sig;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("unknown term {term:?}{}", suggest(.suggestions))]
    UnknownTerm { term: String, suggestions: Vec<String> },
    #[error("community {0} out of range (dim {1})")]
    OutOfRange(CommunityId, usize),
    #[error("{0} must be >= 1")]
    ZeroCount(&'static str),
}

fn suggest(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", s.join(", "))
    }
}

/// Cosine similarity, or `None` when either vector has zero norm.
pub fn cosine(a: &SparseEmbedding, b: &SparseEmbedding) -> Result<Option<f64>, QueryError> {
    if a.dim() != b.dim() {
        return Err(QueryError::DimMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(None);
    }
    Ok(Some(sparse_dot(a.entries(), b.entries()) / (na * nb)))
}

/// Merge-join dot product, summed in ascending component order.
fn sparse_dot(a: &[(CommunityId, f64)], b: &[(CommunityId, f64)]) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryTarget {
    Term(String),
    Vector(SparseEmbedding),
    Canonical(CommunityId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    pub query: String,
    /// Sorted by cosine descending, then term ascending.
    pub neighbors: Vec<(String, f64)>,
}

impl NeighborResult {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (t, c) in &self.neighbors {
            writeln!(w, "{t}\t{c:.6}")?;
        }
        w.flush()
    }
}

/// Ranking order shared by every neighbor list.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .expect("cosines are finite")
        .then_with(|| a.0.cmp(&b.0))
}

/// Inverted index over the model's sparse components. Produces exactly the
/// scores of a full cosine scan; it only skips the multiplications that
/// would contribute zero.
pub struct NeighborIndex<'a> {
    model: &'a EmbeddingModel,
    postings: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(model: &'a EmbeddingModel) -> Self {
        let mut postings = vec![Vec::new(); model.dim()];
        for (row, v) in model.vectors().iter().enumerate() {
            for &(c, x) in v.entries() {
                postings[c as usize].push((row as u32, x));
            }
        }
        let norms = model.vectors().iter().map(SparseEmbedding::norm).collect();
        Self { model, postings, norms }
    }

    pub fn model(&self) -> &EmbeddingModel {
        self.model
    }

    pub fn resolve(&self, target: &QueryTarget) -> Result<(SparseEmbedding, Option<usize>, String), QueryError> {
        match target {
            QueryTarget::Term(t) => {
                let row = self.model.index_of(t).ok_or_else(|| unknown_term(self.model, t))?;
                Ok((self.model.vectors()[row].clone(), Some(row), t.clone()))
            }
            QueryTarget::Vector(v) => {
                if v.dim() != self.model.dim() {
                    return Err(QueryError::DimMismatch(v.dim(), self.model.dim()));
                }
                Ok((v.clone(), None, "<vector>".to_string()))
            }
            QueryTarget::Canonical(c) => Ok((canonical_vector(self.model, *c)?, None, format!("<dim {c}>"))),
        }
    }

    /// Top `topk` vocabulary words by cosine. A term query excludes itself;
    /// zero-norm vectors are never ranked.
    pub fn nearest(&self, target: &QueryTarget, topk: usize) -> Result<NeighborResult, QueryError> {
        if topk == 0 {
            return Err(QueryError::ZeroCount("topk"));
        }
        let (q, exclude, query) = self.resolve(target)?;
        let qn = q.norm();
        if qn == 0.0 {
            return Ok(NeighborResult {
                query,
                neighbors: Vec::new(),
            });
        }
        let n = self.norms.len();
        let mut dots = vec![0.0f64; n];
        for &(c, qx) in q.entries() {
            for &(row, x) in &self.postings[c as usize] {
                dots[row as usize] += qx * x;
            }
        }
        let mut scored: Vec<(String, f64)> = (0..n)
            .filter(|&r| self.norms[r] != 0.0 && Some(r) != exclude)
            .map(|r| (self.model.terms()[r].clone(), dots[r] / (qn * self.norms[r])))
            .collect();
        let k = topk.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(NeighborResult {
            query,
            neighbors: scored,
        })
    }
}

pub fn nearest(model: &EmbeddingModel, target: &QueryTarget, topk: usize) -> Result<NeighborResult, QueryError> {
    NeighborIndex::new(model).nearest(target, topk)
}

fn unknown_term(model: &EmbeddingModel, term: &str) -> QueryError {
    let mut scored: Vec<(usize, &String)> = model
        .terms()
        .iter()
        .map(|t| (strsim::levenshtein(term, t), t))
        .filter(|&(d, _)| d <= 3)
        .collect();
    scored.sort();
    QueryError::UnknownTerm {
        term: term.to_string(),
        suggestions: scored.into_iter().take(5).map(|(_, t)| t.clone()).collect(),
    }
}

/// Unit vector along community `c`.
pub fn canonical_vector(model: &EmbeddingModel, c: CommunityId) -> Result<SparseEmbedding, QueryError> {
    if c as usize >= model.dim() {
        return Err(QueryError::OutOfRange(c, model.dim()));
    }
    Ok(SparseEmbedding::new(model.dim(), vec![(c, 1.0)]).expect("valid basis vector"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainRow {
    pub dim: CommunityId,
    pub labels: Vec<String>,
    /// One value per explained term, in input order; 0 where absent.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainTable {
    pub terms: Vec<String>,
    pub rows: Vec<ExplainRow>,
}

impl ExplainTable {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "dim\tlabels\t{}", self.terms.join("\t"))?;
        for r in &self.rows {
            write!(w, "{}\t{}", r.dim, r.labels.join(","))?;
            for v in &r.values {
                write!(w, "\t{}", format_sig(*v, 6))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Each term's `topdims` largest-magnitude components, merged into one table.
/// Rows follow the terms in order, each term's new dimensions by decreasing
/// magnitude.
pub fn explain(model: &EmbeddingModel, terms: &[&str], topdims: usize) -> Result<ExplainTable, QueryError> {
    if topdims == 0 {
        return Err(QueryError::ZeroCount("topdims"));
    }
    let vectors = terms
        .iter()
        .map(|t| model.vector(t).ok_or_else(|| unknown_term(model, t)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    let mut dims = Vec::new();
    for v in &vectors {
        let mut comps: Vec<(CommunityId, f64)> = v.entries().to_vec();
        comps.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        for (c, _) in comps.into_iter().take(topdims) {
            if seen.insert(c) {
                dims.push(c);
            }
        }
    }
    let rows = dims
        .into_iter()
        .map(|c| ExplainRow {
            dim: c,
            labels: model.labels(c).to_vec(),
            values: vectors.iter().map(|v| v.get(c)).collect(),
        })
        .collect();
    Ok(ExplainTable {
        terms: terms.iter().map(|t| t.to_string()).collect(),
        rows,
    })
}
