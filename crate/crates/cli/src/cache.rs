//! Content-addressed result cache.
//!
//! Entries live at `<dir>/<stage>/<sha256>.json`, keyed by the hash of the
//! stage name, the artifact version and the canonical JSON of the inputs.
//! Entries are written to a temporary file and renamed into place, so a
//! reader never sees a partial entry. Unreadable entries are recomputed.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::output::VERSION;

#[derive(Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

static TEMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

pub fn key<K: Serialize>(stage: &str, inputs: &K) -> String {
    let json = serde_json::to_string(inputs).expect("cache keys serialize");
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(VERSION.as_bytes());
    h.update([0]);
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, ..Self::default() }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn entry(&self, stage: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(stage).join(format!("{key}.json")))
    }

    /// Returns the cached value for `inputs`, or computes and stores it.
    /// Errors are never cached.
    pub fn get_or_compute<K, V, F>(&self, stage: &str, inputs: &K, compute: F) -> CliResult<V>
    where
        K: Serialize,
        V: Serialize + DeserializeOwned,
        F: FnOnce() -> CliResult<V>,
    {
        let Some(path) = self.entry(stage, &key(stage, inputs)) else {
            return compute();
        };
        if let Some(v) = std::fs::read(&path).ok().and_then(|b| serde_json::from_slice(&b).ok()) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = compute()?;
        store(&path, &serde_json::to_vec(&value).expect("cache values serialize"))?;
        Ok(value)
    }
}

fn store(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().expect("entries live in a stage directory");
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{}.{}.{n}.tmp", path.file_name().unwrap().to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(format!("renaming {}", tmp.display()), e))
}
