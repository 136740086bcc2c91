//! All-against-all verification: pair generation, distance metrics and
//! genuine/impostor score assembly.
//!
//! Cosine distance satisfies `d(a, a) = 0` and symmetry but is not a metric:
//! `d(a, 2a) = 0` for `a != 2a`, and the triangle inequality can fail. No
//! metric axioms are enforced here beyond what each formula provides.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::embed::EmbeddingSet;
use crate::numfmt::sig9;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector: cosine distance undefined")]
    ZeroNorm,
    #[error("both vectors are zero: jaccard distance undefined")]
    BothZero,
    #[error("variances must be strictly positive (dimension {0})")]
    NonPositiveVariance(usize),
    #[error("need at least {needed} entries, got {got}")]
    TooFewEntries { needed: usize, got: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("id {0:?} has no embedding")]
    MissingId(String),
    #[error("pair ({a}, {b}): {source}")]
    Pair {
        a: String,
        b: String,
        #[source]
        source: Box<VerifyError>,
    },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, VerifyError>;

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(VerifyError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// `1 - <a, b> / (|a| |b|)`, clamped into `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(VerifyError::ZeroNorm);
    }
    Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0))
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

pub fn manhattan_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Diagonal Mahalanobis distance `sqrt(sum((a - b)^2 / var))`.
pub fn mahalanobis_distance(a: &[f64], b: &[f64], variances: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    check_dims(a, variances)?;
    if let Some(i) = variances.iter().position(|&v| !(v > 0.0)) {
        return Err(VerifyError::NonPositiveVariance(i));
    }
    Ok(a.iter()
        .zip(b)
        .zip(variances)
        .map(|((x, y), v)| (x - y) * (x - y) / v)
        .sum::<f64>()
        .sqrt())
}

/// Tanimoto form `1 - <a, b> / (|a|^2 + |b|^2 - <a, b>)`.
pub fn jaccard_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = na + nb - dot;
    if na == 0.0 && nb == 0.0 {
        return Err(VerifyError::BothZero);
    }
    Ok((1.0 - dot / denom).max(0.0))
}

/// Per-dimension population variance plus `epsilon`.
pub fn estimate_variances(set: &EmbeddingSet, epsilon: f64) -> Result<Vec<f64>> {
    let entries = set.entries();
    if entries.len() < 2 {
        return Err(VerifyError::TooFewEntries {
            needed: 2,
            got: entries.len(),
        });
    }
    let n = entries.len() as f64;
    let mut mean = vec![0.0; set.dim()];
    for e in entries {
        for (m, v) in mean.iter_mut().zip(&e.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; set.dim()];
    for e in entries {
        for ((s, v), m) in var.iter_mut().zip(&e.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(var.into_iter().map(|s| s / n + epsilon).collect())
}

pub const DEFAULT_VARIANCE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Cosine,
    Euclidean,
    Manhattan,
    Mahalanobis,
    Jaccard,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Cosine,
        MetricKind::Euclidean,
        MetricKind::Manhattan,
        MetricKind::Mahalanobis,
        MetricKind::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cosine => "cosine",
            MetricKind::Euclidean => "euclidean",
            MetricKind::Manhattan => "manhattan",
            MetricKind::Mahalanobis => "mahalanobis",
            MetricKind::Jaccard => "jaccard",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| VerifyError::UnknownMetric(s.to_string()))
    }
}

/// A distance function ready to evaluate; Mahalanobis carries its variances.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceMetric {
    Cosine,
    Euclidean,
    Manhattan,
    Mahalanobis { variances: Vec<f64> },
    Jaccard,
}

impl DistanceMetric {
    pub fn mahalanobis(variances: Vec<f64>) -> Result<Self> {
        if let Some(i) = variances.iter().position(|&v| !(v > 0.0)) {
            return Err(VerifyError::NonPositiveVariance(i));
        }
        Ok(DistanceMetric::Mahalanobis { variances })
    }

    /// Builds the metric, estimating Mahalanobis variances from `set`.
    pub fn for_set(kind: MetricKind, set: &EmbeddingSet) -> Result<Self> {
        Ok(match kind {
            MetricKind::Cosine => DistanceMetric::Cosine,
            MetricKind::Euclidean => DistanceMetric::Euclidean,
            MetricKind::Manhattan => DistanceMetric::Manhattan,
            MetricKind::Jaccard => DistanceMetric::Jaccard,
            MetricKind::Mahalanobis => {
                DistanceMetric::mahalanobis(estimate_variances(set, DEFAULT_VARIANCE_EPSILON)?)?
            }
        })
    }

    pub fn kind(&self) -> MetricKind {
        match self {
            DistanceMetric::Cosine => MetricKind::Cosine,
            DistanceMetric::Euclidean => MetricKind::Euclidean,
            DistanceMetric::Manhattan => MetricKind::Manhattan,
            DistanceMetric::Mahalanobis { .. } => MetricKind::Mahalanobis,
            DistanceMetric::Jaccard => MetricKind::Jaccard,
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            DistanceMetric::Cosine => cosine_distance(a, b),
            DistanceMetric::Euclidean => euclidean_distance(a, b),
            DistanceMetric::Manhattan => manhattan_distance(a, b),
            DistanceMetric::Mahalanobis { variances } => mahalanobis_distance(a, b, variances),
            DistanceMetric::Jaccard => jaccard_distance(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Genuine,
    Impostor,
}

impl PairKind {
    pub fn name(self) -> &'static str {
        match self {
            PairKind::Genuine => "genuine",
            PairKind::Impostor => "impostor",
        }
    }
}

/// Unordered pair of enrolled ids, stored as indices into the protocol's
/// id table with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub a: u32,
    pub b: u32,
    pub kind: PairKind,
}

/// Every unordered pair of distinct ids, ordered lexicographically by
/// `(id_a, id_b)` with `id_a < id_b`.
#[derive(Debug, Clone)]
pub struct PairProtocol {
    ids: Vec<String>,
    labels: Vec<String>,
    pairs: Vec<Pair>,
    intra: usize,
}

impl PairProtocol {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn intra_count(&self) -> usize {
        self.intra
    }

    pub fn inter_count(&self) -> usize {
        self.pairs.len() - self.intra
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair_ids(&self, p: &Pair) -> (&str, &str) {
        (&self.ids[p.a as usize], &self.ids[p.b as usize])
    }

    pub fn intra_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs
            .iter()
            .filter(|p| p.kind == PairKind::Genuine)
            .map(|p| self.pair_ids(p))
    }

    pub fn inter_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs
            .iter()
            .filter(|p| p.kind == PairKind::Impostor)
            .map(|p| self.pair_ids(p))
    }
}

pub fn generate_pairs<S: AsRef<str>, L: AsRef<str>>(labels: &[(S, L)]) -> Result<PairProtocol> {
    if labels.len() < 2 {
        return Err(VerifyError::TooFewEntries {
            needed: 2,
            got: labels.len(),
        });
    }
    let mut rows: Vec<(&str, &str)> = labels.iter().map(|(i, l)| (i.as_ref(), l.as_ref())).collect();
    rows.sort_unstable_by(|x, y| x.0.cmp(y.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(VerifyError::DuplicateId(w[0].0.to_string()));
    }
    let n = rows.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut intra = 0;
    for i in 0..n {
        for j in i + 1..n {
            let kind = if rows[i].1 == rows[j].1 {
                intra += 1;
                PairKind::Genuine
            } else {
                PairKind::Impostor
            };
            pairs.push(Pair {
                a: i as u32,
                b: j as u32,
                kind,
            });
        }
    }
    Ok(PairProtocol {
        ids: rows.iter().map(|r| r.0.to_string()).collect(),
        labels: rows.iter().map(|r| r.1.to_string()).collect(),
        pairs,
        intra,
    })
}

/// Dissimilarity scores of intra-class (genuine) and inter-class (impostor)
/// pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub metric: MetricKind,
}

/// Distances for every protocol pair, in protocol order.
pub fn score_all(
    protocol: &PairProtocol,
    embeddings: &EmbeddingSet,
    metric: &DistanceMetric,
) -> Result<Vec<f64>> {
    let index: HashMap<&str, usize> = embeddings
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let slots: Vec<usize> = protocol
        .ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| VerifyError::MissingId(id.clone()))
        })
        .collect::<Result<_>>()?;
    let entries = embeddings.entries();
    protocol
        .pairs
        .par_iter()
        .map(|p| {
            let a = &entries[slots[p.a as usize]].values;
            let b = &entries[slots[p.b as usize]].values;
            metric.distance(a, b).map_err(|e| {
                let (ia, ib) = protocol.pair_ids(p);
                VerifyError::Pair {
                    a: ia.to_string(),
                    b: ib.to_string(),
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Splits protocol-ordered scores into genuine and impostor lists.
pub fn split_scores(protocol: &PairProtocol, scores: &[f64], metric: MetricKind) -> ScoreSet {
    assert_eq!(scores.len(), protocol.len(), "one score per protocol pair");
    let mut genuine = Vec::with_capacity(protocol.intra_count());
    let mut impostor = Vec::with_capacity(protocol.inter_count());
    for (p, &s) in protocol.pairs.iter().zip(scores) {
        match p.kind {
            PairKind::Genuine => genuine.push(s),
            PairKind::Impostor => impostor.push(s),
        }
    }
    ScoreSet {
        genuine,
        impostor,
        metric,
    }
}

pub fn score_pairs(
    protocol: &PairProtocol,
    embeddings: &EmbeddingSet,
    metric: &DistanceMetric,
) -> Result<ScoreSet> {
    let scores = score_all(protocol, embeddings, metric)?;
    Ok(split_scores(protocol, &scores, metric.kind()))
}

/// Writes `SCORES v1 metric=<name>` followed by `id_a,id_b,kind,score` rows
/// in protocol order.
pub fn write_score_file(
    path: impl AsRef<Path>,
    protocol: &PairProtocol,
    scores: &[f64],
    metric: MetricKind,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| VerifyError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "SCORES v1 metric={}", metric.name()).map_err(io_err)?;
    for (p, &s) in protocol.pairs.iter().zip(scores) {
        let (a, b) = protocol.pair_ids(p);
        writeln!(w, "{a},{b},{},{}", p.kind.name(), sig9(s)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Unique class labels in a protocol.
pub fn class_count(protocol: &PairProtocol) -> usize {
    protocol.labels.iter().collect::<HashSet<_>>().len()
}
