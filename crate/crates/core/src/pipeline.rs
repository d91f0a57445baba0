//! Workspace-level operations shared by the command line and HTTP frontends.
//!
//! Layout under a workspace root:
//!
//! ```text
//! uploads/<sha256>.<ext>            raw uploads, content-addressed
//! adjusted/<id>.parquet             normalized readings of one upload
//! adjusted/<id>.rejects.parquet     rejected rows of that upload
//! processed/iot_readings.parquet    union of all adjusted datasets
//! processed/ocel.sqlite             working OCEL store
//! processed/plans/<plan_id>.json    saved enrichment plans
//! ledger.jsonl                      job ledger
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::{json_digest, sha256_hex};
use crate::error::Error;
use crate::integrate::{self, EnrichmentPlan, EnrichmentReport, IntegrationSpec};
use crate::iot::{
    device_summary, infer_mapping, normalize, readings_from_columnar, readings_to_columnar, ColumnMapping,
    DeviceSummary, MappingSuggestion, NormalizedReading, Reject, Table,
};
use crate::ocel::{
    self, apply_additions_with, directly_follows, lease, load_ocel, log_statistics, validate_ocel, ApplyOptions,
    DfgEdge, OcelError, OcelLog, OcelStats, Violation,
};
use crate::workspace::{
    read_columnar, Cell, ColumnDef, ColumnType, ColumnarTable, JobKind, JobStatus, Stage, StagedFile, Workspace,
};

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const READINGS_FILE: &str = "iot_readings.parquet";
pub const OCEL_FILE: &str = "ocel.sqlite";
pub const PLANS_DIR: &str = "plans";
const REJECTS_SUFFIX: &str = ".rejects.parquet";

pub fn readings_path(ws: &Workspace) -> PathBuf {
    ws.dir(Stage::Processed).join(READINGS_FILE)
}

pub fn ocel_path(ws: &Workspace) -> PathBuf {
    ws.dir(Stage::Processed).join(OCEL_FILE)
}

fn plans_dir(ws: &Workspace) -> PathBuf {
    ws.dir(Stage::Processed).join(PLANS_DIR)
}

/// Delimiter of a text table: the most frequent of `,`, `;`, tab and `|`
/// in the first line.
pub fn sniff_delimiter(bytes: &[u8]) -> u8 {
    let first = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let mut best = b',';
    let mut best_count = 0;
    for d in *b",;\t|" {
        let count = first.iter().filter(|b| **b == d).count();
        if count > best_count {
            best = d;
            best_count = count;
        }
    }
    best
}

/// Parses a staged upload as a table.
pub fn load_table(ws: &Workspace, upload: &str) -> Result<Table> {
    let path = ws.staged_path(upload)?;
    let bytes = ws.read_staged(upload)?;
    if path.extension().is_some_and(|e| e == "parquet") {
        return Ok(Table::from_path(&path, b',')?);
    }
    Ok(Table::read_delimited(bytes.as_slice(), sniff_delimiter(&bytes))?)
}

pub fn stage(ws: &Workspace, bytes: &[u8], name: &str) -> Result<StagedFile> {
    Ok(ws.stage_bytes(bytes, name)?)
}

pub fn infer(ws: &Workspace, upload: &str) -> Result<MappingSuggestion> {
    Ok(infer_mapping(&load_table(ws, upload)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeOutcome {
    pub job_id: String,
    pub replayed: bool,
    pub upload: String,
    /// Workspace-relative path of the adjusted dataset.
    pub dataset: String,
    pub input_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejects: Vec<Reject>,
    pub flags: Vec<String>,
}

fn rejects_table(rejects: &[Reject]) -> Result<ColumnarTable> {
    let mut t = ColumnarTable::with_columns(vec![
        ColumnDef::new("source_row", ColumnType::Int64),
        ColumnDef::new("reason", ColumnType::Utf8),
        ColumnDef::new("detail", ColumnType::Utf8),
    ]);
    for r in rejects {
        t.push_row(vec![
            Cell::Int64(r.source_row as i64),
            Cell::Utf8(r.reason.code().to_string()),
            Cell::Utf8(r.detail.clone()),
        ])?;
    }
    Ok(t)
}

/// Normalizes a staged upload into `adjusted/` and rebuilds the merged
/// readings. A repeat over the same upload and mapping is replayed.
pub fn normalize_upload(ws: &Workspace, upload: &str, mapping: &ColumnMapping) -> Result<NormalizeOutcome> {
    let table = load_table(ws, upload)?;
    mapping.validate_for(&table)?;
    let result = normalize(&table, mapping)?;
    let id: String = upload.chars().take(16).collect();
    let dataset = ws.dir(Stage::Adjusted).join(format!("{id}.parquet"));
    let inputs = vec![upload.to_string(), json_digest(mapping)];
    let outcome = ws.run_job(JobKind::Normalize, inputs, |_| -> Result<Vec<String>> {
        ws.store_columnar(Stage::Adjusted, &id, &readings_to_columnar(&result.readings))?;
        let rejects = ws.store_columnar(Stage::Adjusted, &format!("{id}.rejects"), &rejects_table(&result.rejects)?)?;
        let merged = rebuild_readings(ws)?;
        Ok(vec![ws.relative(&dataset), ws.relative(&rejects), ws.relative(&merged)])
    })?;
    Ok(NormalizeOutcome {
        job_id: outcome.record.job_id,
        replayed: outcome.replayed,
        upload: upload.to_string(),
        dataset: ws.relative(&dataset),
        input_rows: result.input_rows(),
        accepted: result.readings.len(),
        rejected: result.rejects.len(),
        flags: result.flags(),
        rejects: result.rejects,
    })
}

/// Rewrites `processed/iot_readings.parquet` as the union of every
/// adjusted dataset, in file-name order.
pub fn rebuild_readings(ws: &Workspace) -> Result<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(ws.dir(Stage::Adjusted))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            name.ends_with(".parquet") && !name.ends_with(REJECTS_SUFFIX)
        })
        .collect();
    files.sort();
    let mut all = Vec::new();
    for f in files {
        all.extend(readings_from_columnar(&read_columnar(&f)?)?);
    }
    Ok(ws.store_columnar(Stage::Processed, READINGS_FILE.trim_end_matches(".parquet"), &readings_to_columnar(&all))?)
}

/// All merged readings; empty before the first normalization.
pub fn readings(ws: &Workspace) -> Result<Vec<NormalizedReading>> {
    let path = readings_path(ws);
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(readings_from_columnar(&read_columnar(&path)?)?)
}

pub fn summary(ws: &Workspace) -> Result<DeviceSummary> {
    Ok(device_summary(&readings(ws)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcelImport {
    pub upload: String,
    pub content_hash: String,
    pub stats: OcelStats,
    pub violations: Vec<Violation>,
}

/// Stages an OCEL store, checks it loads and makes it the working store.
pub fn import_ocel(ws: &Workspace, bytes: &[u8], name: &str, no_wait: bool) -> Result<OcelImport> {
    let staged = ws.stage_bytes(bytes, name)?;
    let log = load_ocel(&staged.path)?;
    let target = ocel_path(ws);
    let _guard = if no_wait {
        lease::try_write(&target).ok_or_else(|| OcelError::LeaseHeld(target.clone()))?
    } else {
        lease::write(&target)
    };
    let tmp = target.with_extension("partial");
    std::fs::copy(&staged.path, &tmp)?;
    std::fs::rename(&tmp, &target)?;
    Ok(OcelImport {
        upload: staged.hash.clone(),
        content_hash: staged.hash,
        stats: log_statistics(&log),
        violations: validate_ocel(&log),
    })
}

pub fn load_working(ws: &Workspace) -> Result<OcelLog> {
    let path = ocel_path(ws);
    if !path.exists() {
        return Err(Error::NotFound("working OCEL store (import one first)".into()));
    }
    Ok(load_ocel(path)?)
}

pub fn stats(ws: &Workspace) -> Result<OcelStats> {
    Ok(log_statistics(&load_working(ws)?))
}

pub fn dfg(ws: &Workspace, object_type: &str) -> Result<Vec<DfgEdge>> {
    Ok(directly_follows(&load_working(ws)?, object_type)?)
}

pub fn validate(ws: &Workspace) -> Result<Vec<Violation>> {
    Ok(validate_ocel(&load_working(ws)?))
}

/// Bytes and SHA-256 of the working store, read under a lease.
pub fn download_ocel(ws: &Workspace) -> Result<(Vec<u8>, String)> {
    let path = ocel_path(ws);
    if !path.exists() {
        return Err(Error::NotFound("working OCEL store".into()));
    }
    let _guard = lease::read(&path);
    let bytes = std::fs::read(&path)?;
    let hash = sha256_hex(&bytes);
    Ok((bytes, hash))
}

fn file_hash(path: &Path) -> Result<String> {
    if !path.exists() {
        return Ok("absent".into());
    }
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Plans `spec` against the working store and merged readings, saving the
/// plan under its id.
pub fn plan(ws: &Workspace, spec: &IntegrationSpec, preview_limit: usize) -> Result<EnrichmentPlan> {
    let log = load_working(ws)?;
    let plan = integrate::plan_with_limit(spec, &log, &readings(ws)?, preview_limit)?;
    std::fs::create_dir_all(plans_dir(ws))?;
    let path = plans_dir(ws).join(format!("{}.json", plan.plan_id));
    std::fs::write(path, serde_json::to_vec_pretty(&plan)?)?;
    Ok(plan)
}

pub fn load_plan(ws: &Workspace, plan_id: &str) -> Result<EnrichmentPlan> {
    if plan_id.is_empty() || !plan_id.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(Error::NotFound(format!("plan {plan_id:?}")));
    }
    let path = plans_dir(ws).join(format!("{plan_id}.json"));
    match std::fs::read(&path) {
        Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(format!("plan {plan_id:?}"))),
        Err(e) => Err(e.into()),
    }
}

pub fn list_plans(ws: &Workspace) -> Result<Vec<EnrichmentPlan>> {
    let dir = plans_dir(ws);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    paths.iter().map(|p| Ok(serde_json::from_slice(&std::fs::read(p)?)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteOutcome {
    pub job_id: String,
    pub report: EnrichmentReport,
    pub store_hash_before: String,
    pub store_hash_after: String,
}

/// Executes a saved plan against the working store as an `integrate` job.
pub fn execute_plan(ws: &Workspace, plan_id: &str, options: &ApplyOptions) -> Result<ExecuteOutcome> {
    let plan = load_plan(ws, plan_id)?;
    let path = ocel_path(ws);
    if options.no_wait && lease::is_write_locked(&path) {
        return Err(OcelError::LeaseHeld(path).into());
    }
    let before = file_hash(&path)?;
    let inputs = vec![plan.plan_id.clone(), before.clone(), file_hash(&readings_path(ws))?];
    let ledger = ws.ledger();
    let mut job = ledger.open_job(JobKind::Integrate, inputs)?;
    ledger.advance(&mut job, JobStatus::Running, vec![], None)?;
    let run = || -> Result<EnrichmentReport> {
        let log = load_working(ws)?;
        let (additions, report) = integrate::execute(&plan, &log, &readings(ws)?)?;
        let receipt = apply_additions_with(&path, &additions, options)?;
        if !report.matches_receipt(&receipt) {
            return Err(Error::Ocel(ocel::OcelError::InvalidAdditions(format!(
                "store applied {receipt:?}, plan expected {report:?}"
            ))));
        }
        Ok(report)
    };
    match run() {
        Ok(report) => {
            let detail = serde_json::to_string(&report)?;
            ledger.advance(&mut job, JobStatus::Done, vec![ws.relative(&path)], Some(detail))?;
            Ok(ExecuteOutcome { job_id: job.job_id, report, store_hash_before: before, store_hash_after: file_hash(&path)? })
        }
        Err(e) => {
            ledger.advance(&mut job, JobStatus::Failed, vec![], Some(e.to_string()))?;
            Err(e)
        }
    }
}
