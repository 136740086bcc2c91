//! Dataset manifests: CSV with header
//! `id,image_path,mask_path,class_label,split,angle_deg`.
//!
//! Relative paths resolve against the directory holding the manifest.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(CliError::Manifest(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub image_path: String,
    #[serde(default)]
    pub mask_path: String,
    pub class_label: String,
    pub split: Split,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    base_dir: PathBuf,
    rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, rows: Vec<ManifestRow>) -> Result<Self, CliError> {
        let m = Self {
            base_dir: base_dir.into(),
            rows,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut seen = HashSet::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.id.is_empty() {
                return Err(CliError::Manifest(format!("row {}: empty id", i + 1)));
            }
            if r.class_label.is_empty() {
                return Err(CliError::Manifest(format!("row {}: empty class label", i + 1)));
            }
            if r.image_path.is_empty() {
                return Err(CliError::Manifest(format!("row {}: empty image path", i + 1)));
            }
            if !r.angle_deg.is_finite() {
                return Err(CliError::Manifest(format!("row {}: non-finite angle", i + 1)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(CliError::Manifest(format!("duplicate id {:?}", r.id)));
            }
        }
        Ok(())
    }

    /// Parses and validates the table. File existence is checked per row by
    /// the stages, so one missing file does not reject the whole manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let rows = reader
            .deserialize()
            .collect::<Result<Vec<ManifestRow>, _>>()
            .map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CliError> {
        let path = path.as_ref();
        let wrap = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        if self.rows.is_empty() {
            w.write_record(["id", "image_path", "mask_path", "class_label", "split", "angle_deg"])
                .map_err(wrap)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(wrap)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn image_path(&self, row: &ManifestRow) -> PathBuf {
        self.resolve(&row.image_path)
    }

    pub fn mask_path(&self, row: &ManifestRow) -> Option<PathBuf> {
        (!row.mask_path.is_empty()).then(|| self.resolve(&row.mask_path))
    }

    /// Ids of rows whose image or mask file is absent.
    pub fn missing_files(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| {
                !self.image_path(r).is_file() || self.mask_path(r).is_some_and(|m| !m.is_file())
            })
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn count_split(&self, split: Split) -> usize {
        self.rows.iter().filter(|r| r.split == split).count()
    }
}
