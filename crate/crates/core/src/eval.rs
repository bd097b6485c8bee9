//! Intrinsic evaluation: word-similarity benchmarks scored by Spearman
//! correlation, categorization benchmarks scored by clustering purity.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::io::{self, BufRead};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingModel, SparseEmbedding};
use crate::query::cosine;

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("constant input has no rank variance")]
    Constant,
    #[error("item sets differ")]
    ItemMismatch,
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooFew(x.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// `(1/N) * sum over clusters of the count of the cluster's majority class`.
pub fn purity<I, K, C>(clusters: &HashMap<I, K>, gold: &HashMap<I, C>) -> Result<f64, EvalError>
where
    I: Eq + Hash,
    K: Eq + Hash,
    C: Eq + Hash,
{
    if clusters.len() != gold.len() || clusters.keys().any(|k| !gold.contains_key(k)) {
        return Err(EvalError::ItemMismatch);
    }
    if clusters.is_empty() {
        return Err(EvalError::TooFew(0));
    }
    let mut table: HashMap<&K, HashMap<&C, usize>> = HashMap::new();
    for (item, k) in clusters {
        *table.entry(k).or_default().entry(&gold[item]).or_insert(0) += 1;
    }
    let majority: usize = table.values().map(|row| row.values().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / clusters.len() as f64)
}

/// Normalized mutual information between two labelings of the same items,
/// normalized by the arithmetic mean of the two entropies. Two trivial
/// (single-cluster) labelings score 1.
pub fn nmi<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::TooFew(0));
    }
    let n = a.len() as f64;
    let mut ca: HashMap<&A, f64> = HashMap::new();
    let mut cb: HashMap<&B, f64> = HashMap::new();
    let mut joint: HashMap<(&A, &B), f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_insert(0.0) += 1.0;
        *cb.entry(y).or_insert(0.0) += 1.0;
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
    }
    let entropy = |counts: &mut dyn Iterator<Item = f64>| -> f64 {
        counts
            .map(|c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = entropy(&mut ca.values().copied());
    let hb = entropy(&mut cb.values().copied());
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|((x, y), &c)| {
            let pxy = c / n;
            pxy * (pxy / ((ca[x] / n) * (cb[y] / n))).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    pub fn new(pairs: Vec<(String, String, f64)>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for (a, b, s) in &pairs {
            if !s.is_finite() {
                return Err(EvalError::Dataset(format!("non-finite score for {a}/{b}")));
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(EvalError::Dataset(format!("duplicate pair {a}/{b}")));
            }
        }
        Ok(Self { pairs })
    }

    /// `wordA\twordB\tscore` rows.
    pub fn read_tsv<R: BufRead>(r: R, lowercase: bool) -> Result<Self, EvalError> {
        let mut pairs = Vec::new();
        for (line_no, fields) in tsv_rows(r)? {
            if fields.len() != 3 {
                return Err(EvalError::Parse {
                    line: line_no,
                    reason: "expected 3 fields".into(),
                });
            }
            let score: f64 = fields[2].trim().parse().map_err(|_| EvalError::Parse {
                line: line_no,
                reason: format!("bad score {:?}", fields[2]),
            })?;
            pairs.push((fold(&fields[0], lowercase), fold(&fields[1], lowercase), score));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path, lowercase: bool) -> Result<Self, EvalError> {
        Self::read_tsv(open(path)?, lowercase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorizationDataset {
    pub items: Vec<(String, String)>,
}

impl CategorizationDataset {
    pub fn new(items: Vec<(String, String)>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for (w, _) in &items {
            if !seen.insert(w) {
                return Err(EvalError::Dataset(format!("word {w:?} listed twice")));
            }
        }
        let cats: HashSet<&String> = items.iter().map(|(_, c)| c).collect();
        if cats.len() < 2 {
            return Err(EvalError::Dataset("need at least 2 categories".into()));
        }
        Ok(Self { items })
    }

    /// `word\tcategory` rows.
    pub fn read_tsv<R: BufRead>(r: R, lowercase: bool) -> Result<Self, EvalError> {
        let mut items = Vec::new();
        for (line_no, fields) in tsv_rows(r)? {
            if fields.len() != 2 {
                return Err(EvalError::Parse {
                    line: line_no,
                    reason: "expected 2 fields".into(),
                });
            }
            items.push((fold(&fields[0], lowercase), fields[1].clone()));
        }
        Self::new(items)
    }

    pub fn load(path: &Path, lowercase: bool) -> Result<Self, EvalError> {
        Self::read_tsv(open(path)?, lowercase)
    }
}

fn fold(s: &str, lowercase: bool) -> String {
    if lowercase {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

fn tsv_rows<R: BufRead>(r: R) -> Result<Vec<(usize, Vec<String>)>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((i + 1, line.split('\t').map(str::to_string).collect()));
    }
    Ok(out)
}

fn open(path: &Path) -> Result<io::BufReader<std::fs::File>, EvalError> {
    std::fs::File::open(path)
        .map(io::BufReader::new)
        .map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: String,
    pub value: f64,
    pub coverage: f64,
    pub n_kept: usize,
    /// Cluster count, reported alongside purity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_clusters: Option<usize>,
}

/// Vector of `word` if it is in the vocabulary and has nonzero norm.
fn usable<'m>(model: &'m EmbeddingModel, word: &str) -> Option<&'m SparseEmbedding> {
    model.vector(word).filter(|v| v.nnz() > 0)
}

/// Spearman correlation between human scores and model cosines over the
/// pairs whose words both have usable vectors.
pub fn eval_similarity(model: &EmbeddingModel, ds: &SimilarityDataset) -> Result<EvalResult, EvalError> {
    let mut human = Vec::new();
    let mut predicted = Vec::new();
    for (a, b, s) in &ds.pairs {
        if let (Some(va), Some(vb)) = (usable(model, a), usable(model, b)) {
            let c = cosine(va, vb)
                .expect("model vectors share a dimension")
                .expect("usable vectors have nonzero norm");
            human.push(*s);
            predicted.push(c);
        }
    }
    if human.len() < 2 {
        return Err(EvalError::TooFew(human.len()));
    }
    Ok(EvalResult {
        metric: "spearman".into(),
        value: spearman(&human, &predicted)?,
        coverage: human.len() as f64 / ds.pairs.len() as f64,
        n_kept: human.len(),
        n_clusters: None,
    })
}

/// Clusters the dataset's usable vectors with seeded spherical k-means
/// (k = number of gold categories present) and scores purity.
pub fn eval_categorization(
    model: &EmbeddingModel,
    ds: &CategorizationDataset,
    seed: u64,
) -> Result<EvalResult, EvalError> {
    let kept: Vec<(&str, &str, &SparseEmbedding)> = ds
        .items
        .iter()
        .filter_map(|(w, c)| usable(model, w).map(|v| (w.as_str(), c.as_str(), v)))
        .collect();
    let cats: HashSet<&str> = kept.iter().map(|k| k.1).collect();
    if kept.len() < 2 || cats.len() < 2 {
        return Err(EvalError::Dataset(format!(
            "{} usable words spanning {} categories; need >= 2 of each",
            kept.len(),
            cats.len()
        )));
    }
    let points: Vec<Vec<(u32, f64)>> = kept.iter().map(|k| unit_entries(k.2)).collect();
    let assignment = spherical_kmeans(&points, model.dim(), cats.len(), seed);
    let clusters: HashMap<&str, usize> = kept.iter().zip(&assignment).map(|(k, &a)| (k.0, a)).collect();
    let gold: HashMap<&str, &str> = kept.iter().map(|k| (k.0, k.1)).collect();
    let used: HashSet<usize> = assignment.iter().copied().collect();
    Ok(EvalResult {
        metric: "purity".into(),
        value: purity(&clusters, &gold)?,
        coverage: kept.len() as f64 / ds.items.len() as f64,
        n_kept: kept.len(),
        n_clusters: Some(used.len()),
    })
}

fn unit_entries(v: &SparseEmbedding) -> Vec<(u32, f64)> {
    let n = v.norm();
    v.entries().iter().map(|&(c, x)| (c, x / n)).collect()
}

fn dot_dense(p: &[(u32, f64)], centroid: &[f64]) -> f64 {
    p.iter().map(|&(c, x)| x * centroid[c as usize]).sum()
}

/// Spherical k-means on unit-norm sparse points. Runs [`KMEANS_RESTARTS`]
/// seeded restarts (in parallel) and keeps the one with the largest total
/// point-to-centroid cosine, breaking ties by restart index.
pub fn spherical_kmeans(points: &[Vec<(u32, f64)>], dim: usize, k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1 && !points.is_empty());
    let k = k.min(points.len());
    let runs: Vec<(f64, Vec<usize>)> = (0..KMEANS_RESTARTS as u64)
        .into_par_iter()
        .map(|r| kmeans_once(points, dim, k, seed.wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15))))
        .collect();
    runs.into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(j.cmp(i)))
        .map(|(_, (_, assign))| assign)
        .expect("at least one restart")
}

fn kmeans_once(points: &[Vec<(u32, f64)>], dim: usize, k: usize, seed: u64) -> (f64, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();

    // k-means++ seeding with cosine distance 1 - cos
    let mut centers: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut best_sim: Vec<f64> = vec![f64::NEG_INFINITY; n];
    while centers.len() < k {
        let last = densify(&points[*centers.last().unwrap()], dim);
        for (i, p) in points.iter().enumerate() {
            best_sim[i] = best_sim[i].max(dot_dense(p, &last));
        }
        let weights: Vec<f64> = best_sim.iter().map(|s| (1.0 - s).max(0.0).powi(2)).collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if t < *w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.push(next);
    }
    let mut centroids: Vec<Vec<f64>> = centers.iter().map(|&i| densify(&points[i], dim)).collect();
    let mut assign = vec![usize::MAX; n];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut sims = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (best, sim) = centroids
                .iter()
                .enumerate()
                .map(|(j, c)| (j, dot_dense(p, c)))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            sims[i] = sim;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // refill empty clusters with the worst-fitting points
        let mut sizes = vec![0usize; k];
        for &a in &assign {
            sizes[a] += 1;
        }
        for j in 0..k {
            if sizes[j] == 0 {
                let worst = (0..n)
                    .filter(|&i| sizes[assign[i]] > 1)
                    .min_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)));
                if let Some(i) = worst {
                    sizes[assign[i]] -= 1;
                    assign[i] = j;
                    sizes[j] = 1;
                    sims[i] = 1.0;
                    changed = true;
                }
            }
        }
        centroids = vec![vec![0.0; dim]; k];
        for (p, &a) in points.iter().zip(&assign) {
            for &(c, x) in p {
                centroids[a][c as usize] += x;
            }
        }
        for c in &mut centroids {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                c.iter_mut().for_each(|x| *x /= norm);
            }
        }
        if !changed {
            break;
        }
    }
    let objective = points
        .iter()
        .zip(&assign)
        .map(|(p, &a)| dot_dense(p, &centroids[a]))
        .sum();
    (objective, assign)
}

fn densify(p: &[(u32, f64)], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(c, x) in p {
        out[c as usize] = x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() <= 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() <= 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(EvalError::LengthMismatch(2, 1))
        ));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(EvalError::TooFew(1))));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::Constant)
        ));
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn purity_examples() {
        let items = ["a", "b", "c", "d", "e"];
        let gold: HashMap<&str, &str> = items.iter().map(|&i| (i, if i < "c" { "X" } else { "Y" })).collect();
        let clusters: HashMap<&str, u32> = items.iter().map(|&i| (i, (i > "c") as u32)).collect();
        assert!((purity(&clusters, &gold).unwrap() - 0.8).abs() <= 1e-12);
        assert_eq!(purity(&gold, &gold).unwrap(), 1.0);
        let singletons: HashMap<&str, &str> = items.iter().map(|&i| (i, i)).collect();
        assert_eq!(purity(&singletons, &gold).unwrap(), 1.0);
        let partial: HashMap<&str, u32> = [("a", 0)].into();
        assert!(matches!(purity(&partial, &gold), Err(EvalError::ItemMismatch)));
    }

    #[test]
    fn nmi_bounds() {
        assert!((nmi(&[0, 0, 1, 1], &[5, 5, 9, 9]).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[0, 0], &[1, 1]).unwrap(), 1.0);
        let v = nmi(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    fn model(rows: &[(&str, &[(u32, f64)])], dim: usize) -> EmbeddingModel {
        EmbeddingModel::from_parts(
            rows.iter().map(|r| r.0.to_string()).collect(),
            rows.iter()
                .map(|r| SparseEmbedding::new(dim, r.1.to_vec()).unwrap())
                .collect(),
            dim,
        )
        .unwrap()
    }

    #[test]
    fn similarity_coverage_and_exactness() {
        let m = model(
            &[
                ("a", &[(0, 1.0)]),
                ("b", &[(0, 1.0), (1, 0.2)]),
                ("c", &[(0, 1.0), (1, 1.0)]),
                ("d", &[(1, 1.0)]),
                ("z", &[]),
            ],
            2,
        );
        let ds = SimilarityDataset::new(vec![
            ("a".into(), "b".into(), 9.0),
            ("a".into(), "c".into(), 5.0),
            ("a".into(), "d".into(), 1.0),
            ("a".into(), "oov".into(), 3.0),
        ])
        .unwrap();
        let r = eval_similarity(&m, &ds).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.coverage, 0.75);
        assert_eq!(r.n_kept, 3);

        let zero = SimilarityDataset::new(vec![("a".into(), "z".into(), 1.0), ("a".into(), "b".into(), 2.0)]).unwrap();
        assert!(matches!(eval_similarity(&m, &zero), Err(EvalError::TooFew(1))));
    }

    #[test]
    fn dataset_validation() {
        assert!(SimilarityDataset::new(vec![("a".into(), "b".into(), 1.0), ("b".into(), "a".into(), 2.0)]).is_err());
        assert!(SimilarityDataset::new(vec![("a".into(), "b".into(), f64::NAN)]).is_err());
        assert!(CategorizationDataset::new(vec![("a".into(), "x".into()), ("b".into(), "x".into())]).is_err());
        assert!(CategorizationDataset::new(vec![("a".into(), "x".into()), ("a".into(), "y".into())]).is_err());
        let ds = SimilarityDataset::read_tsv(&b"Tiger\tcat\t7.35\n# comment\n\nbook\tpaper\t7.46\n"[..], true).unwrap();
        assert_eq!(ds.pairs[0].0, "tiger");
        assert!(SimilarityDataset::read_tsv(&b"a\tb\n"[..], true).is_err());
    }

    #[test]
    fn separated_categories_are_recovered() {
        let rows: Vec<(String, Vec<(u32, f64)>)> = (0..10)
            .map(|i| {
                let cat = i % 2;
                let base = cat * 3;
                (
                    format!("w{i}"),
                    vec![(base, 1.0), (base + 1, 0.1 * (i as f64 + 1.0)), (base + 2, 0.3)],
                )
            })
            .collect();
        let m = EmbeddingModel::from_parts(
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter()
                .map(|r| SparseEmbedding::new(6, r.1.clone()).unwrap())
                .collect(),
            6,
        )
        .unwrap();
        let ds = CategorizationDataset::new(
            (0..10)
                .map(|i| (format!("w{i}"), format!("c{}", i % 2)))
                .chain([("oov".to_string(), "c0".to_string())])
                .collect(),
        )
        .unwrap();
        for seed in 0..5 {
            let r = eval_categorization(&m, &ds, seed).unwrap();
            assert_eq!(r.value, 1.0);
            assert!((r.coverage - 10.0 / 11.0).abs() < 1e-12);
            assert_eq!(r, eval_categorization(&m, &ds, seed).unwrap());
        }
    }

    #[test]
    fn identical_vectors_hit_majority_bound() {
        let rows: Vec<(String, &[(u32, f64)])> = (0..7).map(|i| (format!("w{i}"), &[(0u32, 1.0f64)][..])).collect();
        let m = EmbeddingModel::from_parts(
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter()
                .map(|r| SparseEmbedding::new(1, r.1.to_vec()).unwrap())
                .collect(),
            1,
        )
        .unwrap();
        let ds = CategorizationDataset::new(
            (0..7)
                .map(|i| (format!("w{i}"), format!("c{}", (i < 5) as u8)))
                .collect(),
        )
        .unwrap();
        let r = eval_categorization(&m, &ds, 3).unwrap();
        assert!(r.value >= 5.0 / 7.0 - 1e-12);
    }

    proptest! {
        #[test]
        fn spearman_monotone_invariance(
            xs in prop::collection::vec(0.1f64..100.0, 3..30),
            ys in prop::collection::vec(0.1f64..100.0, 30),
        ) {
            let ys = &ys[..xs.len()];
            if let Ok(base) = spearman(&xs, ys) {
                let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
                let cube: Vec<f64> = ys.iter().map(|y| y * y * y).collect();
                prop_assert!((spearman(&lin, ys).unwrap() - base).abs() <= 1e-12);
                prop_assert!((spearman(&xs, &cube).unwrap() - base).abs() <= 1e-12);
            }
        }

        #[test]
        fn purity_relabel_invariance(labels in prop::collection::vec((0u8..4, 0u8..3), 1..40)) {
            let clusters: HashMap<usize, u8> = labels.iter().enumerate().map(|(i, l)| (i, l.0)).collect();
            let gold: HashMap<usize, u8> = labels.iter().enumerate().map(|(i, l)| (i, l.1)).collect();
            let renamed_c: HashMap<usize, String> = clusters.iter().map(|(&i, &c)| (i, format!("k{}", 7 - c))).collect();
            let renamed_g: HashMap<usize, String> = gold.iter().map(|(&i, &g)| (i, format!("g{}", g * 5))).collect();
            let p = purity(&clusters, &gold).unwrap();
            prop_assert_eq!(p, purity(&renamed_c, &renamed_g).unwrap());
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }
}
