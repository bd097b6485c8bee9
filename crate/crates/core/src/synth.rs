//! Seeded synthetic data: planted-partition graphs and topic corpora with a
//! known ground truth, for benchmarks and tests.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::CooccurrenceGraph;

/// Random graph with `blocks` groups of `block_size` nodes: each intra-block
/// pair is linked with probability `p_in`, each inter-block pair with
/// `p_out`, all with unit weight. Returns the graph (isolated nodes are
/// absent) and the planted block of each node id.
pub fn planted_partition(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (CooccurrenceGraph, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..blocks * block_size)
        .map(|i| format!("b{}_{:04}", i / block_size, i % block_size))
        .collect();
    let mut edges = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let p = if i / block_size == j / block_size { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((names[i].as_str(), names[j].as_str(), 1.0));
            }
        }
    }
    let g = CooccurrenceGraph::from_weighted_edges(edges).expect("generated edges are valid");
    let blocks_of = g
        .terms()
        .iter()
        .map(|t| t[1..t.find('_').unwrap()].parse().unwrap())
        .collect();
    (g, blocks_of)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpus {
    /// One whitespace-tokenized document per entry.
    pub documents: Vec<String>,
    /// Every vocabulary word with its topic.
    pub vocabulary: Vec<(String, usize)>,
}

/// Documents that each draw `doc_len` tokens from a single topic. Topics
/// have disjoint vocabularies of `words_per_topic` words; within a topic,
/// word `r` is drawn with probability proportional to `1 / (r + 1)^zipf`.
pub fn topic_corpus(
    topics: usize,
    words_per_topic: usize,
    documents: usize,
    doc_len: usize,
    zipf: f64,
    seed: u64,
) -> TopicCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<Vec<String>> = (0..topics)
        .map(|t| (0..words_per_topic).map(|w| format!("t{t}w{w:03}")).collect())
        .collect();
    let freq =
        WeightedIndex::new((0..words_per_topic).map(|r| 1.0 / ((r + 1) as f64).powf(zipf))).expect("positive weights");
    let docs = (0..documents)
        .map(|_| {
            let t = rng.gen_range(0..topics);
            (0..doc_len)
                .map(|_| words[t][freq.sample(&mut rng)].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let vocabulary = words
        .into_iter()
        .enumerate()
        .flat_map(|(t, ws)| ws.into_iter().map(move |w| (w, t)))
        .collect();
    TopicCorpus {
        documents: docs,
        vocabulary,
    }
}
