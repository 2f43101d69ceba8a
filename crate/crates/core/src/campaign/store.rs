//! Append-only JSON-lines persistence for run records, one file per
//! landscape. Records are identified by (landscape digest, model id, seed,
//! config digest); reopening a store indexes what exists so grids resume.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::campaign::RunRecord;
use crate::error::{Error, Result};

/// Identity of one run within a store.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub landscape_digest: String,
    pub model_id: String,
    pub seed: u64,
    pub config_digest: String,
}

impl RunKey {
    pub fn of(record: &RunRecord) -> Self {
        Self {
            landscape_digest: record.landscape_digest.clone(),
            model_id: record.model_id.clone(),
            seed: record.seed,
            config_digest: record.config_digest.clone(),
        }
    }
}

/// Keep landscape names filesystem-safe without losing readability.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
    index: HashSet<RunKey>,
}

impl RunStore {
    /// Open (creating if needed) the store directory and index every record
    /// already on disk. Unparseable lines are skipped with a warning; a
    /// crash mid-append leaves at most one such line.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut index = HashSet::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RunRecord>(line) {
                    Ok(record) => {
                        index.insert(RunKey::of(&record));
                    }
                    Err(e) => eprintln!(
                        "warning: skipping corrupt record {}:{}: {e}",
                        path.display(),
                        lineno + 1
                    ),
                }
            }
        }
        Ok(Self { dir, index })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn contains(&self, key: &RunKey) -> bool {
        self.index.contains(key)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Append one record as a single JSON line (one write call, so a crash
    /// cannot interleave records) and index it.
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let key = RunKey::of(record);
        if self.index.contains(&key) {
            return Err(Error::Store(format!(
                "duplicate run {} seed {} for landscape {}",
                key.model_id, key.seed, record.landscape
            )));
        }
        let path = self
            .dir
            .join(format!("{}.jsonl", sanitize(&record.landscape)));
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        self.index.insert(key);
        Ok(())
    }

    /// Every record in the store, ordered by file name then file position.
    pub fn load_all(&self) -> Result<Vec<RunRecord>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("jsonl"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            for line in text.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                if let Ok(record) = serde_json::from_str::<RunRecord>(line) {
                    out.push(record);
                }
            }
        }
        Ok(out)
    }
}
