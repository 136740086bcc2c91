//! Embedding vectors: the deterministic block-statistics baseline embedder and
//! the `EMB v1` text file format used to exchange externally computed features.
//!
//! File layout (UTF-8):
//!
//! ```text
//! EMB v1 dim=<D> count=<N>
//! <id>,<class_label>,<v1>,...,<vD>      (N rows)
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::numfmt::sig9;
use crate::raster::Raster;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0:?}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} features, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-finite feature {token:?}")]
    NonFinite { line: usize, token: String },
    #[error("line {line}: cannot parse feature {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: missing id or class label")]
    MissingField { line: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("header declares {declared} rows, file has {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("id or label {0:?} contains a separator")]
    BadToken(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub id: String,
    pub class_label: String,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(id: impl Into<String>, class_label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            class_label: class_label.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector is left unchanged.
    pub fn l2_normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    Baseline,
    ExternalFile,
}

/// Embeddings sharing one dimension, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    entries: Vec<EmbeddingVector>,
    source: EmbeddingSource,
}

impl EmbeddingSet {
    pub fn new(
        dim: usize,
        entries: Vec<EmbeddingVector>,
        source: EmbeddingSource,
    ) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Invalid("dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.values.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    line: i + 2,
                    expected: dim,
                    found: e.values.len(),
                });
            }
            if let Some(v) = e.values.iter().find(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite {
                    line: i + 2,
                    token: v.to_string(),
                });
            }
            if !seen.insert(e.id.as_str()) {
                return Err(EmbedError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self {
            dim,
            entries,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[EmbeddingVector] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<EmbeddingVector> {
        self.entries
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Block statistics over an 8x8 grid: per block the mean intensity, the
/// intensity standard deviation, and the mean absolute horizontal and
/// vertical Sobel responses, each scaled into `[0, 1]`. Blocks are emitted
/// in row-major order, giving 256 features.
#[derive(Debug, Clone, Copy)]
pub struct BaselineEmbedder {
    pub size: usize,
}

impl Default for BaselineEmbedder {
    fn default() -> Self {
        Self {
            size: crate::preprocess::DEFAULT_FINAL_SIZE,
        }
    }
}

const GRID: usize = 8;
const SOBEL_SCALE: f64 = 1.0 / (4.0 * 255.0);

impl BaselineEmbedder {
    pub fn new(size: usize) -> Result<Self, EmbedError> {
        if size == 0 || !size.is_multiple_of(GRID) {
            return Err(EmbedError::Invalid(format!(
                "input size {size} is not a positive multiple of {GRID}"
            )));
        }
        Ok(Self { size })
    }

    pub fn dim(&self) -> usize {
        GRID * GRID * 4
    }

    pub fn features(&self, image: &Raster) -> Result<Vec<f64>, EmbedError> {
        if image.width() != self.size || image.height() != self.size {
            return Err(EmbedError::Invalid(format!(
                "baseline embedder expects {s}x{s} input, got {}x{}",
                image.width(),
                image.height(),
                s = self.size
            )));
        }
        let gray = image.to_gray();
        let n = self.size;
        let px = |x: i64, y: i64| -> f64 {
            let x = x.clamp(0, n as i64 - 1) as usize;
            let y = y.clamp(0, n as i64 - 1) as usize;
            gray.get(x, y, 0) as f64
        };

        let block = n / GRID;
        let area = (block * block) as f64;
        let mut out = Vec::with_capacity(self.dim());
        for by in 0..GRID {
            for bx in 0..GRID {
                let (mut sum, mut sum_sq, mut gx_sum, mut gy_sum) = (0.0, 0.0, 0.0, 0.0);
                for y in by * block..(by + 1) * block {
                    for x in bx * block..(bx + 1) * block {
                        let v = gray.get(x, y, 0) as f64;
                        sum += v;
                        sum_sq += v * v;
                        let (x, y) = (x as i64, y as i64);
                        let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                            - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
                        let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                            - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
                        gx_sum += gx.abs() * SOBEL_SCALE;
                        gy_sum += gy.abs() * SOBEL_SCALE;
                    }
                }
                let mean = sum / area;
                let var = (sum_sq / area - mean * mean).max(0.0);
                out.push(mean / 255.0);
                // the largest possible spread of values in [0, 255] is 127.5
                out.push((var.sqrt() / 127.5).min(1.0));
                out.push(gx_sum / area);
                out.push(gy_sum / area);
            }
        }
        Ok(out)
    }

    pub fn embed(
        &self,
        id: impl Into<String>,
        class_label: impl Into<String>,
        image: &Raster,
    ) -> Result<EmbeddingVector, EmbedError> {
        Ok(EmbeddingVector::new(id, class_label, self.features(image)?))
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet, EmbedError> {
    let path = path.as_ref();
    let io_err = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    parse_embeddings(BufReader::new(file)).map_err(|e| match e {
        EmbedError::Io { source, .. } => io_err(source),
        other => other,
    })
}

/// Parses `EMB v1` content from any reader.
pub fn parse_embeddings(reader: impl BufRead) -> Result<EmbeddingSet, EmbedError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|source| EmbedError::Io {
            path: PathBuf::new(),
            source,
        })?,
        None => return Err(EmbedError::MalformedHeader(String::new())),
    };
    let (dim, count) = parse_header(&header)?;

    let mut entries = Vec::with_capacity(count);
    let mut seen = HashSet::with_capacity(count);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|source| EmbedError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (id, label) = match (fields.next(), fields.next()) {
            (Some(id), Some(label)) if !id.is_empty() => (id, label),
            _ => return Err(EmbedError::MissingField { line: line_no }),
        };
        let mut values = Vec::with_capacity(dim);
        for token in fields {
            let v: f64 = token.trim().parse().map_err(|_| EmbedError::BadNumber {
                line: line_no,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(EmbedError::NonFinite {
                    line: line_no,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(EmbedError::DuplicateId(id.to_string()));
        }
        entries.push(EmbeddingVector::new(id, label, values));
    }
    if entries.len() != count {
        return Err(EmbedError::CountMismatch {
            declared: count,
            found: entries.len(),
        });
    }
    EmbeddingSet::new(dim, entries, EmbeddingSource::ExternalFile)
}

fn parse_header(header: &str) -> Result<(usize, usize), EmbedError> {
    let bad = || EmbedError::MalformedHeader(header.to_string());
    let tokens: Vec<&str> = header.split(' ').collect();
    match tokens.as_slice() {
        ["EMB", "v1", dim, count] => {
            let dim: usize = dim
                .strip_prefix("dim=")
                .and_then(|d| d.parse().ok())
                .ok_or_else(bad)?;
            let count: usize = count
                .strip_prefix("count=")
                .and_then(|c| c.parse().ok())
                .ok_or_else(bad)?;
            if dim == 0 {
                return Err(bad());
            }
            Ok((dim, count))
        }
        _ => Err(bad()),
    }
}

/// Serializes a set in `EMB v1` format with 9 significant digits per value.
pub fn format_embeddings(set: &EmbeddingSet) -> Result<String, EmbedError> {
    let mut out = format!("EMB v1 dim={} count={}\n", set.dim, set.entries.len());
    for e in &set.entries {
        for token in [&e.id, &e.class_label] {
            if token.contains([',', '\n', '\r']) {
                return Err(EmbedError::BadToken(token.clone()));
            }
        }
        out.push_str(&e.id);
        out.push(',');
        out.push_str(&e.class_label);
        for v in &e.values {
            let _ = write!(out, ",{}", sig9(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), EmbedError> {
    let path = path.as_ref();
    let text = format_embeddings(set)?;
    let io_err = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    w.write_all(text.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_of(feature_index: usize) -> (usize, usize, usize) {
        let block = feature_index / 4;
        (block / GRID, block % GRID, feature_index % 4)
    }

    #[test]
    fn constant_image_features() {
        let f = BaselineEmbedder::default()
            .features(&Raster::filled(224, 224, 1, 128))
            .unwrap();
        assert_eq!(f.len(), 256);
        for (i, v) in f.iter().enumerate() {
            let (_, _, stat) = block_of(i);
            if stat == 0 {
                assert!((v - 128.0 / 255.0).abs() < 1e-12);
                assert!((v - 0.502).abs() < 1e-3);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn black_image_is_zero_vector() {
        let f = BaselineEmbedder::default()
            .features(&Raster::filled(224, 224, 3, 0))
            .unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge() {
        let img = Raster::from_fn_gray(224, 224, |x, _| if x < 112 { 0 } else { 255 });
        let f = BaselineEmbedder::default().features(&img).unwrap();
        // direct oracle: |gx| = 4*255 on columns 111 and 112 only
        for (i, v) in f.iter().enumerate() {
            let (_, bx, stat) = block_of(i);
            match stat {
                0 => assert_eq!(*v, if bx < 4 { 0.0 } else { 1.0 }),
                1 | 3 => assert_eq!(*v, 0.0),
                _ => {
                    if bx == 3 || bx == 4 {
                        // one edge column of 28 at full response
                        assert!((v - 1.0 / 28.0).abs() < 1e-12, "block {bx}: {v}");
                    } else {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn features_bounded_and_deterministic() {
        let img = Raster::from_fn_gray(224, 224, |x, y| if (x / 3 + y / 5) % 2 == 0 { 255 } else { 0 });
        let e = BaselineEmbedder::default();
        let a = e.features(&img).unwrap();
        assert_eq!(a, e.features(&img).unwrap());
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn wrong_size_rejected() {
        assert!(BaselineEmbedder::default()
            .features(&Raster::filled(100, 224, 1, 0))
            .is_err());
        assert!(BaselineEmbedder::new(100).is_err());
    }

    #[test]
    fn header_parsing() {
        assert_eq!(parse_header("EMB v1 dim=4 count=3").unwrap(), (4, 3));
        for bad in [
            "EMB v2 dim=4 count=3",
            "EMB v1 dim=4",
            "EMB  v1 dim=4 count=3",
            "emb v1 dim=4 count=3",
            "EMB v1 dim=0 count=3",
            "EMB v1 count=3 dim=4",
        ] {
            assert!(parse_header(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_errors_name_the_row() {
        let short = "EMB v1 dim=4 count=2\na,x,1,2,3,4\nb,y,1,2,3\n";
        match parse_embeddings(short.as_bytes()) {
            Err(EmbedError::DimensionMismatch { line, expected, found }) => {
                assert_eq!((line, expected, found), (3, 4, 3))
            }
            other => panic!("{other:?}"),
        }
        let nan = "EMB v1 dim=2 count=1\na,x,NaN,1\n";
        let err = parse_embeddings(nan.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-finite feature"), "{err}");
        let dup = "EMB v1 dim=1 count=2\na,x,1\na,y,2\n";
        assert!(matches!(parse_embeddings(dup.as_bytes()), Err(EmbedError::DuplicateId(_))));
        let count = "EMB v1 dim=1 count=3\na,x,1\n";
        assert!(matches!(parse_embeddings(count.as_bytes()), Err(EmbedError::CountMismatch { .. })));
    }

    #[test]
    fn empty_set_round_trip() {
        let set = EmbeddingSet::new(256, vec![], EmbeddingSource::Baseline).unwrap();
        let text = format_embeddings(&set).unwrap();
        assert_eq!(text, "EMB v1 dim=256 count=0\n");
        let back = parse_embeddings(text.as_bytes()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 256);
    }

    #[test]
    fn set_invariants() {
        let a = EmbeddingVector::new("a", "x", vec![1.0, 2.0]);
        let b = EmbeddingVector::new("a", "y", vec![1.0, 2.0]);
        assert!(EmbeddingSet::new(2, vec![a.clone(), b], EmbeddingSource::Baseline).is_err());
        let c = EmbeddingVector::new("c", "y", vec![1.0]);
        assert!(EmbeddingSet::new(2, vec![a.clone(), c], EmbeddingSource::Baseline).is_err());
        let d = EmbeddingVector::new("d", "y", vec![1.0, f64::INFINITY]);
        assert!(EmbeddingSet::new(2, vec![a, d], EmbeddingSource::Baseline).is_err());
        let bad = EmbeddingVector::new("a,b", "y", vec![1.0]);
        let set = EmbeddingSet::new(1, vec![bad], EmbeddingSource::Baseline).unwrap();
        assert!(format_embeddings(&set).is_err());
    }
}
