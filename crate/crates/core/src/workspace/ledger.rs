//! Append-only job ledger persisted as JSON lines.
//!
//! Every status change appends a full snapshot of the job; the current
//! state of a job is its last line.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, WorkspaceError};
use crate::ocel::lease;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Ingest,
    Normalize,
    Explore,
    Integrate,
}

impl JobKind {
    fn prefix(self) -> &'static str {
        match self {
            JobKind::Ingest => "ingest",
            JobKind::Normalize => "normalize",
            JobKind::Explore => "explore",
            JobKind::Integrate => "integrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    fn may_follow(self, prev: Option<JobStatus>) -> bool {
        use JobStatus::*;
        matches!((prev, self), (None, Pending) | (Some(Pending), Running) | (Some(Running), Done | Failed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: JobKind,
    /// Content hashes of every input.
    pub inputs: Vec<String>,
    /// Workspace-relative output paths.
    pub outputs: Vec<String>,
    pub status: JobStatus,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

pub(crate) fn now() -> Timestamp {
    Timestamp::from_millis(chrono::Utc::now().timestamp_millis())
}

#[derive(Debug, Clone)]
pub struct Ledger {
    path: PathBuf,
}

impl Ledger {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Ledger { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Every line of the ledger in append order.
    pub fn entries(&self) -> Result<Vec<JobRecord>> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| WorkspaceError::Ledger(format!("line {}: {e}", n + 1)))?,
            );
        }
        Ok(out)
    }

    /// Latest state of every job, in creation order.
    pub fn jobs(&self) -> Result<Vec<JobRecord>> {
        let mut order = Vec::new();
        let mut latest: HashMap<String, JobRecord> = HashMap::new();
        for rec in self.entries()? {
            if !latest.contains_key(&rec.job_id) {
                order.push(rec.job_id.clone());
            }
            latest.insert(rec.job_id.clone(), rec);
        }
        Ok(order.into_iter().map(|id| latest.remove(&id).expect("present")).collect())
    }

    pub fn job(&self, job_id: &str) -> Result<Option<JobRecord>> {
        Ok(self.jobs()?.into_iter().find(|j| j.job_id == job_id))
    }

    /// A finished job of `kind` over exactly these inputs.
    pub fn find_done(&self, kind: JobKind, inputs: &[String]) -> Result<Option<JobRecord>> {
        Ok(self
            .jobs()?
            .into_iter()
            .rev()
            .find(|j| j.kind == kind && j.status == JobStatus::Done && j.inputs == inputs))
    }

    /// Appends `record` after checking its status transition.
    pub fn append(&self, record: &JobRecord) -> Result<()> {
        let _guard = lease::write(&self.path);
        let prev = self.job(&record.job_id)?.map(|j| j.status);
        if !record.status.may_follow(prev) {
            return Err(WorkspaceError::Ledger(format!(
                "job {} cannot move from {prev:?} to {:?}",
                record.job_id, record.status
            )));
        }
        let mut line = serde_json::to_string(record).map_err(|e| WorkspaceError::Ledger(e.to_string()))?;
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    /// Creates a pending job with a fresh id.
    pub fn open_job(&self, kind: JobKind, inputs: Vec<String>) -> Result<JobRecord> {
        let _guard = lease::write(&self.path.with_extension("ids"));
        let seq = self.jobs()?.len() + 1;
        let t = now();
        let rec = JobRecord {
            job_id: format!("{}-{seq:06}", kind.prefix()),
            kind,
            inputs,
            outputs: Vec::new(),
            status: JobStatus::Pending,
            created_at: t,
            updated_at: t,
            detail: None,
        };
        self.append(&rec)?;
        Ok(rec)
    }

    pub fn advance(
        &self,
        record: &mut JobRecord,
        status: JobStatus,
        outputs: Vec<String>,
        detail: Option<String>,
    ) -> Result<()> {
        let mut next = record.clone();
        next.status = status;
        if !outputs.is_empty() {
            next.outputs = outputs;
        }
        next.detail = detail.or(next.detail);
        next.updated_at = now();
        self.append(&next)?;
        *record = next;
        Ok(())
    }
}
