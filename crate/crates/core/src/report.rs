//! Artifact emission: CSV tables, PGM images and the JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Renders a float with at least six significant digits and never fewer
/// than six decimals in the ordinary range, so `-4.683` becomes
/// `"-4.683000"`. Very small or very large magnitudes switch to exponent
/// form.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.000000".into();
    }
    let mag = x.abs();
    if !(1e-4..1e15).contains(&mag) {
        return format!("{x:.5e}");
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (5 - exponent).max(6) as usize;
    format!("{x:.decimals$}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the report directory, with '/' separators.
    pub path: String,
    pub kind: String,
    pub representation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub representation: Option<String>,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
    pub stages: Vec<StageStatus>,
}

impl Manifest {
    pub fn failed_stages(&self) -> impl Iterator<Item = &StageStatus> {
        self.stages.iter().filter(|s| !s.ok)
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes artifacts into one directory and keeps the manifest in step.
#[derive(Debug)]
pub struct Report {
    dir: PathBuf,
    manifest: Manifest,
}

impl Report {
    pub fn create(dir: &Path, seed: u64, config_hash: String) -> Result<Report> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Report {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                seed,
                config_hash,
                artifacts: Vec::new(),
                stages: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn target(&mut self, rel: &str, kind: &str, representation: Option<&str>) -> Result<PathBuf> {
        if self.manifest.artifacts.iter().any(|a| a.path == rel) {
            return Err(Error::InvalidConfig(format!("artifact {rel} emitted twice")));
        }
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            kind: kind.to_string(),
            representation: representation.map(str::to_string),
        });
        Ok(path)
    }

    pub fn write_table(
        &mut self,
        rel: &str,
        kind: &str,
        representation: Option<&str>,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<()> {
        let path = self.target(rel, kind, representation)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
        w.write_record(header).map_err(|e| Error::io(&path, e.into()))?;
        for row in rows {
            w.write_record(row).map_err(|e| Error::io(&path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn write_bytes(&mut self, rel: &str, kind: &str, representation: Option<&str>, bytes: &[u8]) -> Result<()> {
        let path = self.target(rel, kind, representation)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        rel: &str,
        kind: &str,
        representation: Option<&str>,
        value: &T,
    ) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_bytes(rel, kind, representation, text.as_bytes())
    }

    /// Records a stage outcome; `error` is `None` on success.
    pub fn record_stage(&mut self, stage: &str, representation: Option<&str>, error: Option<String>) {
        self.manifest.stages.push(StageStatus {
            stage: stage.to_string(),
            representation: representation.map(str::to_string),
            ok: error.is_none(),
            error,
        });
    }

    /// Writes the manifest and returns it.
    pub fn finish(self) -> Result<Manifest> {
        let path = self.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}
