use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AnnotateError, AnnotationRecord, ChatParams};
use crate::hashing::sha256_hex;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    publication_id: &'a str,
    prompt_id: &'a str,
    prompt_checksum: &'a str,
    params: &'a ChatParams,
}

/// SHA-256 over the canonical JSON of publication id, prompt id, prompt file
/// checksum and sampling parameters.
pub fn cache_key(publication_id: &str, prompt_id: &str, prompt_checksum: &str, params: &ChatParams) -> String {
    let material = KeyMaterial {
        publication_id,
        prompt_id,
        prompt_checksum,
        params,
    };
    sha256_hex(&serde_json::to_vec(&material).expect("key material serializes"))
}

/// One JSON record per key. Writes go to a temp file in the same directory
/// and are renamed into place, so readers never see a partial entry.
#[derive(Debug, Clone)]
pub struct AnnotationCache {
    dir: PathBuf,
}

impl AnnotationCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, AnnotateError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| AnnotateError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss; corrupt entries are logged.
    pub fn get(&self, key: &str) -> Option<AnnotationRecord> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, record: &AnnotationRecord) -> Result<(), AnnotateError> {
        let fail = |e: &dyn std::fmt::Display| AnnotateError::Cache(format!("{}: {e}", self.path(key).display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| fail(&e))?;
        serde_json::to_writer(&mut tmp, record).map_err(|e| fail(&e))?;
        tmp.write_all(b"\n").map_err(|e| fail(&e))?;
        tmp.persist(self.path(key)).map_err(|e| fail(&e))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
