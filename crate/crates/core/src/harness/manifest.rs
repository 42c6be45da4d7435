use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simulated item. Paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub item_id: String,
    pub clean_path: String,
    pub degraded_path: String,
    /// JSON array of the parameters drawn for each distortion.
    pub applied_params: String,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
}

impl CorpusManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.item_id.as_str()) {
                return Err(Error::Config(format!("duplicate item_id {}", r.item_id)));
            }
            for p in [&r.clean_path, &r.degraded_path] {
                if Path::new(p).is_absolute() {
                    return Err(Error::Config(format!("manifest path {p} must be relative")));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record([
                "item_id",
                "clean_path",
                "degraded_path",
                "applied_params",
                "duration_s",
                "sample_rate",
                "config_hash",
            ])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
        Self::new(rows)
    }
}

/// Resolves a manifest-relative path.
pub fn manifest_path(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new("")).join(rel)
}

/// Forward-slash relative path of `p` under `base`.
pub fn relative_to(p: &Path, base: &Path) -> Result<String> {
    let rel = p
        .strip_prefix(base)
        .map_err(|_| Error::Config(format!("{} is not under {}", p.display(), base.display())))?;
    Ok(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str) -> ManifestRow {
        ManifestRow {
            item_id: id.into(),
            clean_path: format!("clean/{id}.wav"),
            degraded_path: format!("degraded/{id}.wav"),
            applied_params: r#"[{"kind":"clip","eta":0.25}]"#.into(),
            duration_s: 3.0,
            sample_rate: 44100,
            config_hash: "ab".repeat(32),
        }
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = CorpusManifest::new(vec![row("a"), row("b")]).unwrap();
        m.write(&p).unwrap();
        assert_eq!(CorpusManifest::read(&p).unwrap(), m);
        assert_eq!(manifest_path(&p, "clean/a.wav"), dir.path().join("clean/a.wav"));
    }

    #[test]
    fn empty_manifest_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        CorpusManifest::default().write(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("item_id,"));
        assert!(CorpusManifest::read(&p).unwrap().is_empty());
    }

    #[test]
    fn rejects_duplicates_and_absolute_paths() {
        assert!(CorpusManifest::new(vec![row("a"), row("a")]).is_err());
        let mut r = row("a");
        r.clean_path = "/abs/a.wav".into();
        assert!(CorpusManifest::new(vec![r]).is_err());
    }

    #[test]
    fn relative_paths() {
        assert_eq!(relative_to(Path::new("/r/x/y.wav"), Path::new("/r")).unwrap(), "x/y.wav");
        assert!(relative_to(Path::new("/q/y.wav"), Path::new("/r")).is_err());
    }
}
