//! Corpus ingestion: n-gram style co-occurrence records or raw text in,
//! aggregated unordered pair counts out.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid ingest config: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// One (term, context, year, count) observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccRecord {
    pub term: String,
    pub context: String,
    pub year: i32,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    /// Context window size `f`; pairs up to `f - 1` positions apart co-occur.
    pub window: usize,
    pub min_year: i32,
    pub lowercase: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            window: 5,
            min_year: 1980,
            lowercase: true,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(2..=5).contains(&self.window) {
            return Err(IngestError::Config(format!(
                "window must be in [2,5], got {}",
                self.window
            )));
        }
        if self.min_year < 0 {
            return Err(IngestError::Config(format!(
                "min_year must be >= 0, got {}",
                self.min_year
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Records,
    Text,
}

/// Parses one `term\tcontext\tyear\tcount` line. `line_no` is 1-based and
/// only used for error reporting. Fields beyond the fourth are ignored.
pub fn parse_record_line(line: &str, line_no: usize, lowercase: bool) -> Result<CooccRecord, IngestError> {
    let err = |reason: String| IngestError::Parse { line: line_no, reason };
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 4 {
        return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
    }
    let token = |s: &str, what: &str| -> Result<String, IngestError> {
        if s.is_empty() {
            return Err(err(format!("empty {what}")));
        }
        if s.chars().any(char::is_whitespace) {
            return Err(err(format!("{what} {s:?} contains whitespace")));
        }
        Ok(if lowercase { s.to_lowercase() } else { s.to_string() })
    };
    let term = token(fields[0], "term")?;
    let context = token(fields[1], "context")?;
    let year: i32 = fields[2]
        .trim()
        .parse()
        .map_err(|_| err(format!("year {:?} is not an integer", fields[2])))?;
    let count: i64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| err(format!("count {:?} is not an integer", fields[3])))?;
    if count <= 0 {
        return Err(err(format!("count must be positive, got {count}")));
    }
    Ok(CooccRecord {
        term,
        context,
        year,
        count: count as u64,
    })
}

/// Aggregated co-occurrence counts keyed by unordered pair.
///
/// Keys are canonical: the lexicographically smaller term comes first and
/// the two terms always differ.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCounts {
    counts: HashMap<(String, String), u64>,
}

impl PairCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` to the unordered pair `{a, b}`. Self-pairs are ignored.
    pub fn add(&mut self, a: &str, b: &str, count: u64) {
        if a == b || count == 0 {
            return;
        }
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        *self.counts.entry(key).or_insert(0) += count;
    }

    pub fn get(&self, a: &str, b: &str) -> Option<u64> {
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.counts.get(&key).copied()
    }

    /// Shard merge. Associative and commutative.
    pub fn merge(mut self, other: PairCounts) -> PairCounts {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, v) in small {
            *big.entry(k).or_insert(0) += v;
        }
        PairCounts { counts: big }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts.iter().map(|((a, b), &c)| (a.as_str(), b.as_str(), c))
    }

    /// Entries sorted by `(termA, termB)`.
    pub fn sorted(&self) -> Vec<(&str, &str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        v
    }

    /// Writes the canonical `termA\ttermB\tcount` edge list.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (a, b, c) in self.sorted() {
            writeln!(w, "{a}\t{b}\t{c}")?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        self.write_tsv(BufWriter::new(f)).map_err(|e| io_err(path, e))
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<PairCounts, IngestError> {
        let mut out = PairCounts::new();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| IngestError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(IngestError::Parse {
                    line: line_no,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let count: u64 = fields[2].parse().map_err(|_| IngestError::Parse {
                line: line_no,
                reason: format!("count {:?} is not a non-negative integer", fields[2]),
            })?;
            if count == 0 {
                return Err(IngestError::Parse {
                    line: line_no,
                    reason: "count must be positive".into(),
                });
            }
            if fields[0] == fields[1] {
                return Err(IngestError::Parse {
                    line: line_no,
                    reason: format!("self-pair {:?}", fields[0]),
                });
            }
            out.add(fields[0], fields[1], count);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<PairCounts, IngestError> {
        let r = open_maybe_gz(path)?;
        PairCounts::read_tsv(r)
    }
}

/// Sliding-window co-occurrence extraction: every pair at distance
/// `1..window` gains one count; identical tokens are skipped.
pub fn cooccurrences_from_tokens<S: AsRef<str>>(tokens: &[S], window: usize) -> PairCounts {
    let mut out = PairCounts::new();
    add_window_pairs(&mut out, tokens, window);
    out
}

fn add_window_pairs<S: AsRef<str>>(out: &mut PairCounts, tokens: &[S], window: usize) {
    for i in 0..tokens.len() {
        let a = tokens[i].as_ref();
        for d in 1..window {
            match tokens.get(i + d) {
                Some(b) => out.add(a, b.as_ref(), 1),
                None => break,
            }
        }
    }
}

/// Year filter plus summation over years, per unordered pair.
pub fn aggregate<I>(records: I, config: &IngestConfig) -> PairCounts
where
    I: IntoIterator<Item = CooccRecord>,
{
    let mut out = PairCounts::new();
    for r in records {
        if r.year < config.min_year {
            continue;
        }
        out.add(&r.term, &r.context, r.count);
    }
    out
}

/// Aggregates independent shards in parallel and merges them by count
/// addition. Gives the same map as [`aggregate`] over the concatenation.
pub fn aggregate_sharded(shards: Vec<Vec<CooccRecord>>, config: &IngestConfig) -> PairCounts {
    shards
        .into_par_iter()
        .map(|shard| aggregate(shard, config))
        .reduce(PairCounts::new, PairCounts::merge)
}

/// Whitespace tokenization of one document line.
pub fn tokenize(line: &str, lowercase: bool) -> Vec<String> {
    line.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// Co-occurrences of a text corpus with one document per line. Documents are
/// windowed independently and processed in parallel.
pub fn cooccurrences_from_documents<S: AsRef<str> + Sync>(docs: &[S], config: &IngestConfig) -> PairCounts {
    docs.par_chunks(256)
        .map(|chunk| {
            let mut acc = PairCounts::new();
            for doc in chunk {
                let tokens = tokenize(doc.as_ref(), config.lowercase);
                add_window_pairs(&mut acc, &tokens, config.window);
            }
            acc
        })
        .reduce(PairCounts::new, PairCounts::merge)
}

fn io_err(path: &Path, source: io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Opens a file, transparently decompressing gzip (detected by magic bytes).
pub fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>, IngestError> {
    let mut f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut magic = [0u8; 2];
    let n = f.read(&mut magic).map_err(|e| io_err(path, e))?;
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(f))))
    } else {
        Ok(Box::new(BufReader::new(f)))
    }
}

pub fn read_records(path: &Path, lowercase: bool) -> Result<Vec<CooccRecord>, IngestError> {
    let r = open_maybe_gz(path)?;
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record_line(&line, i + 1, lowercase)?);
    }
    Ok(out)
}

/// Ingests every input file into one aggregated count map. Each file is a
/// shard.
pub fn ingest_files(paths: &[&Path], format: InputFormat, config: &IngestConfig) -> Result<PairCounts, IngestError> {
    config.validate()?;
    match format {
        InputFormat::Records => {
            let shards = paths
                .iter()
                .map(|p| read_records(p, config.lowercase))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(aggregate_sharded(shards, config))
        }
        InputFormat::Text => {
            let mut out = PairCounts::new();
            for p in paths {
                let r = open_maybe_gz(p)?;
                let docs = r.lines().collect::<Result<Vec<_>, _>>().map_err(|e| io_err(p, e))?;
                out = out.merge(cooccurrences_from_documents(&docs, config));
            }
            Ok(out)
        }
    }
}
