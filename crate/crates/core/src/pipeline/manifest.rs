use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::split::{random_split, stratified_split, Split};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub image_id: String,
    pub class: String,
}

/// Labeled image list. Labels are 1-based positions in `classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub classes: Vec<String>,
    labels: Vec<usize>,
}

impl DatasetManifest {
    /// Builds a manifest; with `classes = None` the class order is first
    /// appearance.
    pub fn new(entries: Vec<ManifestEntry>, classes: Option<Vec<String>>) -> Result<Self> {
        let classes = match classes {
            Some(c) => c,
            None => {
                let mut seen: Vec<String> = Vec::new();
                for e in &entries {
                    if !seen.contains(&e.class) {
                        seen.push(e.class.clone());
                    }
                }
                seen
            }
        };
        if classes.len() < 2 {
            return Err(Error::Config(format!(
                "manifest needs at least 2 classes, found {}",
                classes.len()
            )));
        }
        let mut labels = Vec::with_capacity(entries.len());
        let mut ids = std::collections::HashSet::new();
        for e in &entries {
            let l = classes
                .iter()
                .position(|c| *c == e.class)
                .ok_or_else(|| Error::Config(format!("image '{}' has unlisted class '{}'", e.image_id, e.class)))?;
            if !ids.insert(e.image_id.as_str()) {
                return Err(Error::Config(format!("duplicate image_id '{}'", e.image_id)));
            }
            labels.push(l + 1);
        }
        Ok(Self { entries, classes, labels })
    }

    /// Reads `path,image_id,class` CSV; relative paths resolve against the
    /// manifest's directory.
    pub fn load(path: &Path, classes: Option<Vec<String>>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Self::parse(&text)?;
        for e in &mut entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        Self::new(entries, classes)
    }

    pub fn parse(text: &str) -> Result<Vec<ManifestEntry>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).unwrap())
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            entries: idx.iter().map(|&i| self.entries[i].clone()).collect(),
            classes: self.classes.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn split_indices(&self, fraction: f64, seed: u64, stratified: bool) -> Result<Split> {
        if stratified {
            stratified_split(&self.labels, self.k(), fraction, seed)
        } else {
            random_split(self.len(), fraction, seed)
        }
    }

    /// Train and test manifests.
    pub fn split(&self, fraction: f64, seed: u64, stratified: bool) -> Result<(Self, Self)> {
        let s = self.split_indices(fraction, seed, stratified)?;
        Ok((self.subset(&s.train), self.subset(&s.test)))
    }
}
