//! Content-addressed response cache.
//!
//! Each entry is one JSON file named by its request hash. Writes go
//! through a unique temporary file followed by a rename, so concurrent
//! writers of the same key cannot leave a torn entry behind — last
//! rename wins and both writers produced identical content anyway.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// One cached response, stored as pretty-stable JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub response: String,
    /// Seconds since the Unix epoch at write time.
    pub created_at: u64,
}

/// Directory-backed cache keyed by hex digests.
pub struct FileCache {
    dir: PathBuf,
}

impl FileCache {
    /// Opens (and creates, if needed) the cache directory.
    pub fn new(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(FileCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Returns the cached response, or `None` on miss or an unreadable
    /// entry (treated as a miss; the caller will overwrite it).
    pub fn get(&self, key: &str) -> Option<String> {
        let text = fs::read_to_string(self.entry_path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        (entry.key == key).then_some(entry.response)
    }

    /// Stores a response atomically (write to temp file, then rename).
    pub fn put(&self, key: &str, response: &str) -> io::Result<()> {
        let entry = CacheEntry {
            key: key.to_string(),
            response: response.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let json = serde_json::to_string(&entry).map_err(io::Error::other)?;
        let tmp = self.dir.join(format!(
            ".{key}.tmp.{}.{}",
            std::process::id(),
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.subsec_nanos()).unwrap_or(0)
        ));
        fs::write(&tmp, json)?;
        fs::rename(&tmp, self.entry_path(key))
    }
}
