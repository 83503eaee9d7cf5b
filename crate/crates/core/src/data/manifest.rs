use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::check_spatial;
use crate::error::{Error, Result};
use crate::image::BitDepth;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub image: PathBuf,
    pub mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

/// Image/mask pairs plus the resolution every sample is resized to.
/// Relative paths resolve against `root`, the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub items: Vec<ManifestItem>,
    pub width: usize,
    pub height: usize,
    /// Bit depth of the source images (8 or 16).
    pub depth: u32,
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if BitDepth::from_bits(self.depth).is_none() {
            return Err(Error::invalid(format!("manifest depth must be 8 or 16, got {}", self.depth)));
        }
        if self.items.is_empty() {
            return Err(Error::invalid("manifest lists no items"));
        }
        check_spatial(self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Group labels, with ungrouped items standing alone.
    pub fn groups(&self) -> Option<Vec<String>> {
        if self.items.iter().all(|i| i.group.is_none()) {
            return None;
        }
        Some(
            self.items
                .iter()
                .enumerate()
                .map(|(k, i)| i.group.clone().unwrap_or_else(|| format!("#{k}")))
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| Error::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(
            &p,
            r#"{"items":[{"image":"a.pgm","mask":"b.pgm","group":"P1"},{"image":"c.pgm","mask":"d.pgm"}],
               "width":32,"height":16,"depth":16}"#,
        )
        .unwrap();
        let m = DatasetManifest::load(&p).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.resolve(Path::new("a.pgm")), dir.path().join("a.pgm"));
        assert_eq!(m.groups().unwrap(), vec!["P1".to_string(), "#1".to_string()]);
    }

    #[test]
    fn rejects_bad_resolution_and_depth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"items":[{"image":"a","mask":"b"}],"width":30,"height":16,"depth":8}"#).unwrap();
        assert!(DatasetManifest::load(&p).unwrap_err().is_data_error());
        fs::write(&p, r#"{"items":[{"image":"a","mask":"b"}],"width":32,"height":16,"depth":12}"#).unwrap();
        assert!(DatasetManifest::load(&p).is_err());
        fs::write(&p, "{").unwrap();
        assert!(DatasetManifest::load(&p).unwrap_err().to_string().contains("line"));
    }
}
