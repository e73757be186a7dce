//! On-disk archives: JSONL records with a schema version, images stored
//! once under their SHA-256, and SFT-style training examples whose segment
//! masks are fixed by role.

mod records;
mod training;

pub use records::{DiagnosticRecord, TaskRecord, TrajectoryRecord, TurnRecord};
pub use training::{mask_fraction, to_training_example, Role, TrainingExample, TrainingSegment};

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, Weak};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::raster::{read_ppm, write_ppm, Raster};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: corrupt record: {message}")]
    CorruptRecord { path: String, line: usize, message: String },
    #[error("{path}: checksum mismatch (expected {expected}, found {actual})")]
    ChecksumMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("trajectory for '{0}' has not terminated")]
    NotTerminated(String),
    #[error("invalid record: {0}")]
    Invalid(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` via a temporary file in the same directory and
/// a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// A stored image: path relative to the store root plus its checksum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: String,
    pub sha256: String,
}

/// Content-addressed PPM files under `<root>/images/`. Loads are
/// deduplicated: while an image is alive, further references to it share
/// the allocation.
#[derive(Debug)]
pub struct ImageStore {
    root: PathBuf,
    cache: Mutex<HashMap<String, Weak<Raster>>>,
}

impl ImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put(&self, img: &Raster) -> Result<ImageRef, StoreError> {
        let bytes = write_ppm(img);
        let sha = sha256_hex(&bytes);
        let rel = format!("images/{sha}.ppm");
        let path = self.root.join(&rel);
        if !path.exists() {
            write_atomic(&path, &bytes)?;
        }
        Ok(ImageRef { path: rel, sha256: sha })
    }

    pub fn get(&self, r: &ImageRef) -> Result<Arc<Raster>, StoreError> {
        if let Some(img) = self.cache.lock().unwrap().get(&r.sha256).and_then(Weak::upgrade) {
            return Ok(img);
        }
        let path = self.root.join(&r.path);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let actual = sha256_hex(&bytes);
        if actual != r.sha256 {
            return Err(StoreError::ChecksumMismatch {
                path: path.display().to_string(),
                expected: r.sha256.clone(),
                actual,
            });
        }
        let img = Arc::new(read_ppm(&bytes).map_err(|e| io_err(&path, e))?);
        let mut cache = self.cache.lock().unwrap();
        cache.retain(|_, w| w.strong_count() > 0);
        cache.insert(r.sha256.clone(), Arc::downgrade(&img));
        Ok(img)
    }
}

#[derive(Serialize)]
struct VersionedOut<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a T,
}

#[derive(Deserialize)]
struct VersionedIn<T> {
    schema_version: u32,
    #[serde(flatten)]
    record: T,
}

/// One JSON line (with trailing newline) for `record`. Field order follows
/// the struct definition, so equal records serialize to equal bytes.
pub fn to_jsonl_line<T: Serialize>(record: &T) -> Result<String, StoreError> {
    let mut s = serde_json::to_string(&VersionedOut {
        schema_version: SCHEMA_VERSION,
        record,
    })
    .map_err(|e| StoreError::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), StoreError> {
    let mut out = String::new();
    for r in records {
        out += &to_jsonl_line(r)?;
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| StoreError::CorruptRecord {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let v: VersionedIn<T> = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(corrupt(format!("unsupported schema version {}", v.schema_version)));
        }
        out.push(v.record);
    }
    Ok(out)
}

/// A directory holding JSONL manifests and the shared image store.
#[derive(Debug)]
pub struct Store {
    images: ImageStore,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("images")).map_err(|e| io_err(&root, e))?;
        Ok(Self {
            images: ImageStore::new(root),
        })
    }

    pub fn root(&self) -> &Path {
        self.images.root()
    }

    pub fn images(&self) -> &ImageStore {
        &self.images
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root().join(name)
    }

    pub fn write<'a, T: Serialize + 'a>(&self, name: &str, records: impl IntoIterator<Item = &'a T>) -> Result<(), StoreError> {
        write_jsonl(&self.path(name), records)
    }

    pub fn read<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, StoreError> {
        read_jsonl(&self.path(name))
    }
}
