//! File-backed session documents.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use planverify_core::replan::Session;

#[derive(Debug)]
pub enum StoreError {
    Io(io::Error),
    Corrupt { path: PathBuf, detail: String },
}

impl std::fmt::Display for StoreError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StoreError::Io(e) => write!(f, "store I/O error: {e}"),
            StoreError::Corrupt { path, detail } => {
                write!(
                    f,
                    "unreadable session document {}: {detail}",
                    path.display()
                )
            }
        }
    }
}

impl std::error::Error for StoreError {}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        StoreError::Io(e)
    }
}

/// Session ids double as file names.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Documents on disk plus an in-memory copy. The cache only ever holds
/// documents that have been durably written.
#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    cache: RwLock<BTreeMap<String, Session>>,
}

impl SessionStore {
    /// Loads every `*.json` document under `root`, creating it if needed.
    /// Leftover temporary files from an interrupted write are ignored.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut cache = BTreeMap::new();
        for entry in fs::read_dir(&root)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let session: Session =
                serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    detail: e.to_string(),
                })?;
            cache.insert(session.id.clone(), session);
        }
        Ok(SessionStore {
            root,
            cache: RwLock::new(cache),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    pub fn get(&self, id: &str) -> Option<Session> {
        self.cache
            .read()
            .expect("store lock poisoned")
            .get(id)
            .cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.cache
            .read()
            .expect("store lock poisoned")
            .contains_key(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.cache
            .read()
            .expect("store lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Write-then-rename; the cache is updated only after the rename.
    pub fn put(&self, session: &Session) -> Result<(), StoreError> {
        let doc = serde_json::to_vec_pretty(session).map_err(|e| StoreError::Corrupt {
            path: self.path_of(&session.id),
            detail: e.to_string(),
        })?;
        let tmp = self.root.join(format!(".{}.json.tmp", session.id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&doc)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path_of(&session.id))?;
        self.cache
            .write()
            .expect("store lock poisoned")
            .insert(session.id.clone(), session.clone());
        Ok(())
    }
}
