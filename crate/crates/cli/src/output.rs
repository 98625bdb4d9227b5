//! Run directory bookkeeping: CSV files with a provenance comment, JSON
//! artifacts, and the checksummed manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Each command seals its outputs into its own manifest.
pub fn manifest_name(command: &str) -> String {
    format!("manifest_{command}.json")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub files: Vec<FileEntry>,
    pub started_unix_secs: u64,
    pub elapsed_ms: u64,
}

impl RunManifest {
    pub fn load(dir: &Path, command: &str) -> Result<Self> {
        let text = fs::read_to_string(dir.join(manifest_name(command)))
            .with_context(|| format!("reading manifest in {}", dir.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn checksum(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.path == name)
            .map(|f| f.sha256.as_str())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects every file a command writes, then seals them into a manifest.
pub struct RunDir {
    root: PathBuf,
    config_hash: String,
    written: Vec<PathBuf>,
    started: SystemTime,
    clock: Instant,
}

impl RunDir {
    pub fn create(root: &Path, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: config_hash.to_string(),
            written: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        Ok(path)
    }

    /// Writes `# config_hash=...`, the header, then the rows.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.target(name)?;
        let mut buf = format!("# config_hash={}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.target(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.target(name)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn finish(self, command: &str) -> Result<RunManifest> {
        let mut files = Vec::with_capacity(self.written.len());
        for path in &self.written {
            let rel = path.strip_prefix(&self.root).unwrap_or(path);
            files.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(path)?,
                bytes: fs::metadata(path)?.len(),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: self.config_hash.clone(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            files,
            started_unix_secs: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_ms: self.clock.elapsed().as_millis() as u64,
        };
        let mut f = fs::File::create(self.root.join(manifest_name(command)))?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        Ok(manifest)
    }
}

/// Reads a CSV written by [`RunDir::write_csv`], skipping comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_carries_hash_comment_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path(), "abc123").unwrap();
        let path = run
            .write_csv("t.csv", &["a", "b"], vec![vec!["1", "x"], vec!["2", "y"]])
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_hash=abc123\na,b\n"));
        let (h, rows) = read_csv(&path).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1", "x"], vec!["2", "y"]]);
        let m = run.finish("test").unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.checksum("t.csv").unwrap(), sha256_file(&path).unwrap());
        assert_eq!(RunManifest::load(dir.path(), "test").unwrap(), m);
    }
}
