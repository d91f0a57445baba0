//! On-disk artifact staging: `uploads/` for raw inputs, `adjusted/` for
//! mapping outputs, `processed/` for merged datasets and the working OCEL
//! store, plus the job ledger.

mod columnar;
mod ledger;

pub use columnar::{read_columnar, write_columnar, Cell, ColumnDef, ColumnType, ColumnarTable};
pub use ledger::{JobKind, JobRecord, JobStatus, Ledger};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("an empty row set needs explicit column declarations")]
    SchemaRequired,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("refusing to stage zero-byte file {0}")]
    EmptyUpload(String),
    #[error("content hash mismatch for {path}: expected {expected}, found {actual}")]
    HashMismatch { path: PathBuf, expected: String, actual: String },
    #[error("{0} not found in workspace")]
    NotFound(String),
    #[error("ledger: {0}")]
    Ledger(String),
    #[error(transparent)]
    Parquet(#[from] parquet::errors::ParquetError),
    #[error(transparent)]
    Arrow(#[from] arrow_schema::ArrowError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WorkspaceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Adjusted,
    Processed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedFile {
    /// SHA-256 of the content, hex.
    pub hash: String,
    pub path: PathBuf,
    pub original_name: String,
    /// The content was already staged.
    pub deduplicated: bool,
}

/// Outcome of [`Workspace::run_job`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub record: JobRecord,
    /// The job was answered from an earlier identical run.
    pub replayed: bool,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub const UPLOADS: &'static str = "uploads";
    pub const ADJUSTED: &'static str = "adjusted";
    pub const PROCESSED: &'static str = "processed";
    pub const LEDGER: &'static str = "ledger.jsonl";

    /// Creates the directory layout under `root`. Idempotent.
    pub fn init(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in [Self::UPLOADS, Self::ADJUSTED, Self::PROCESSED] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Workspace { root: std::fs::canonicalize(root)? })
    }

    /// Opens an initialized workspace.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in [Self::UPLOADS, Self::ADJUSTED, Self::PROCESSED] {
            if !root.join(sub).is_dir() {
                return Err(WorkspaceError::NotFound(format!("{}/{sub}", root.display())));
            }
        }
        Ok(Workspace { root: std::fs::canonicalize(root)? })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(match stage {
            Stage::Adjusted => Self::ADJUSTED,
            Stage::Processed => Self::PROCESSED,
        })
    }

    pub fn uploads(&self) -> PathBuf {
        self.root.join(Self::UPLOADS)
    }

    pub fn ledger(&self) -> Ledger {
        Ledger::new(self.root.join(Self::LEDGER))
    }

    /// Path relative to the workspace root, for ledger entries.
    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().into_owned()
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    /// Copies `file` into `uploads/` under its content hash.
    pub fn stage_upload(&self, file: &Path) -> Result<StagedFile> {
        let bytes = std::fs::read(file)?;
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.stage_bytes(&bytes, &name)
    }

    pub fn stage_bytes(&self, bytes: &[u8], original_name: &str) -> Result<StagedFile> {
        if bytes.is_empty() {
            return Err(WorkspaceError::EmptyUpload(original_name.to_string()));
        }
        let hash = sha256_hex(bytes);
        let ext = Path::new(original_name)
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .filter(|e| !e.is_empty() && e.chars().all(|c| c.is_ascii_alphanumeric()))
            .unwrap_or_else(|| "bin".into());
        let path = self.uploads().join(format!("{hash}.{ext}"));
        let deduplicated = path.exists();
        if !deduplicated {
            let tmp = path.with_extension("partial");
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &path)?;
        }
        let ledger = self.ledger();
        let mut job = ledger.open_job(JobKind::Ingest, vec![hash.clone()])?;
        ledger.advance(&mut job, JobStatus::Running, vec![], None)?;
        ledger.advance(&mut job, JobStatus::Done, vec![self.relative(&path)], Some(original_name.to_string()))?;
        Ok(StagedFile { hash, path, original_name: original_name.to_string(), deduplicated })
    }

    /// Location of a staged upload by content hash.
    pub fn staged_path(&self, hash: &str) -> Result<PathBuf> {
        let prefix = format!("{hash}.");
        for entry in std::fs::read_dir(self.uploads())? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with(&prefix) && !name.ends_with(".partial") {
                return Ok(entry.path());
            }
        }
        Err(WorkspaceError::NotFound(format!("upload {hash}")))
    }

    /// Reads a staged upload, re-checking its content hash.
    pub fn read_staged(&self, hash: &str) -> Result<Vec<u8>> {
        let path = self.staged_path(hash)?;
        let bytes = std::fs::read(&path)?;
        let actual = sha256_hex(&bytes);
        if actual != hash {
            return Err(WorkspaceError::HashMismatch { path, expected: hash.to_string(), actual });
        }
        Ok(bytes)
    }

    pub fn store_columnar(&self, stage: Stage, name: &str, table: &ColumnarTable) -> Result<PathBuf> {
        let path = self.dir(stage).join(format!("{name}.parquet"));
        write_columnar(&path, table)?;
        Ok(path)
    }

    /// Runs `work` as a ledger job. A finished job of the same kind over
    /// identical inputs is replayed instead: `work` is not called and the
    /// earlier outputs are returned.
    pub fn run_job<E, F>(&self, kind: JobKind, inputs: Vec<String>, work: F) -> Result<JobOutcome, E>
    where
        E: From<WorkspaceError> + std::fmt::Display,
        F: FnOnce(&JobRecord) -> Result<Vec<String>, E>,
    {
        let ledger = self.ledger();
        if let Some(prev) = ledger.find_done(kind, &inputs)? {
            if prev.outputs.iter().all(|p| self.resolve(p).exists()) {
                return Ok(JobOutcome { record: prev, replayed: true });
            }
        }
        let mut job = ledger.open_job(kind, inputs)?;
        ledger.advance(&mut job, JobStatus::Running, vec![], None)?;
        match work(&job) {
            Ok(outputs) => {
                ledger.advance(&mut job, JobStatus::Done, outputs, None)?;
                Ok(JobOutcome { record: job, replayed: false })
            }
            Err(e) => {
                ledger.advance(&mut job, JobStatus::Failed, vec![], Some(e.to_string()))?;
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path()).unwrap();
        for sub in ["uploads", "adjusted", "processed"] {
            assert!(dir.path().join(sub).is_dir());
        }
        std::fs::write(ws.uploads().join("keep"), b"x").unwrap();
        Workspace::init(dir.path()).unwrap();
        assert!(ws.uploads().join("keep").exists());
        assert!(Workspace::open(dir.path()).is_ok());
    }

    #[test]
    fn unwritable_root_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        std::fs::write(&file, b"x").unwrap();
        assert!(matches!(Workspace::init(&file), Err(WorkspaceError::Io(_))));
    }

    #[test]
    fn identical_uploads_dedupe_but_are_both_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path()).unwrap();
        let a = ws.stage_bytes(b"same bytes", "a.csv").unwrap();
        let b = ws.stage_bytes(b"same bytes", "b.csv").unwrap();
        let c = ws.stage_bytes(b"other bytes", "c.csv").unwrap();
        assert_eq!(a.path, b.path);
        assert!(!a.deduplicated && b.deduplicated);
        assert_ne!(a.hash, c.hash);
        assert_eq!(std::fs::read_dir(ws.uploads()).unwrap().count(), 2);
        let refs = ws.ledger().jobs().unwrap().into_iter().filter(|j| j.inputs == [a.hash.clone()]).count();
        assert_eq!(refs, 2);
        assert!(matches!(ws.stage_bytes(b"", "empty.csv"), Err(WorkspaceError::EmptyUpload(_))));
    }

    #[test]
    fn tampered_upload_fails_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path()).unwrap();
        let staged = ws.stage_bytes(b"device_id,value\nd1,3\n", "r.csv").unwrap();
        assert_eq!(ws.read_staged(&staged.hash).unwrap(), b"device_id,value\nd1,3\n");
        let mut bytes = std::fs::read(&staged.path).unwrap();
        bytes[3] ^= 0x01;
        std::fs::write(&staged.path, bytes).unwrap();
        assert!(matches!(ws.read_staged(&staged.hash), Err(WorkspaceError::HashMismatch { .. })));
    }

    #[test]
    fn done_jobs_replay() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path()).unwrap();
        let mut calls = 0;
        let run = |calls: &mut i32| {
            ws.run_job::<WorkspaceError, _>(JobKind::Normalize, vec!["h1".into()], |_| {
                *calls += 1;
                std::fs::write(ws.dir(Stage::Adjusted).join("out"), b"1")?;
                Ok(vec!["adjusted/out".into()])
            })
            .unwrap()
        };
        let first = run(&mut calls);
        let second = run(&mut calls);
        assert_eq!(calls, 1);
        assert!(!first.replayed && second.replayed);
        assert_eq!(first.record.job_id, second.record.job_id);
        assert_eq!(second.record.outputs, ["adjusted/out"]);
    }
}
