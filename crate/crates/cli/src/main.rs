//! `ocelink`: scripting front end over the pipeline operations.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocelink_core::integrate::DEFAULT_PREVIEW_LIMIT;
use ocelink_core::ocel::ApplyOptions;
use ocelink_core::scenario::{generate, ScenarioParams};
use ocelink_core::{pipeline, ColumnMapping, Error, IntegrationSpec, Workspace};
use serde::{Deserialize, Serialize};

const DEFAULT_CONFIG: &str = "ocelink.toml";

#[derive(Debug, Parser)]
#[command(name = "ocelink", version, about = "Enrich object-centric event logs with IoT readings")]
struct Cli {
    /// Workspace directory.
    #[arg(long, short = 'w', global = true, env = "OCELINK_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Configuration file; `./ocelink.toml` is read when present.
    #[arg(long, global = true, env = "OCELINK_CONFIG")]
    config: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Workspace management.
    #[command(subcommand)]
    Ws(WsCommand),
    /// IoT file ingestion.
    #[command(subcommand)]
    Iot(IotCommand),
    /// OCEL store inspection.
    #[command(subcommand)]
    Ocel(OcelCommand),
    /// Plan and execute enrichments.
    #[command(subcommand)]
    Integrate(IntegrateCommand),
    /// Synthetic scenario data.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum WsCommand {
    /// Create the workspace layout.
    Init,
}

#[derive(Debug, Subcommand)]
enum IotCommand {
    /// Stage a file and normalize it with a mapping.
    Ingest {
        file: PathBuf,
        /// Column mapping document; inferred from the header when omitted.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Suggest a mapping for a file without ingesting it.
    Infer { file: PathBuf },
    /// Per device type summary of the merged readings.
    Summary,
}

#[derive(Debug, Subcommand)]
enum OcelCommand {
    /// Replace the working store with an OCEL 2.0 SQLite file.
    Import {
        file: PathBuf,
        /// Fail instead of waiting for a held lease.
        #[arg(long)]
        no_wait: bool,
    },
    Stats,
    /// Directly-follows edges for one object type.
    Dfg {
        #[arg(long)]
        object_type: String,
    },
    /// Schema and referential violations of the working store.
    Validate,
    /// Copy the working store to a file.
    Export { out: PathBuf },
}

#[derive(Debug, Subcommand)]
enum IntegrateCommand {
    /// Preview an enrichment spec and save the plan.
    Plan {
        #[arg(long)]
        spec: PathBuf,
        /// Number of preview rows.
        #[arg(long, default_value_t = DEFAULT_PREVIEW_LIMIT)]
        preview: usize,
    },
    /// Execute a saved plan against the working store.
    Run {
        #[arg(long)]
        plan: String,
        #[arg(long)]
        no_wait: bool,
    },
    /// List saved plans.
    Plans,
}

#[derive(Debug, Subcommand)]
enum ScenarioCommand {
    /// Write a truck weighing scenario and its ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    trucks: Option<usize>,
    #[arg(long)]
    corruption_rate: Option<f64>,
    #[arg(long)]
    anomaly_rate: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "scenario")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "OCELINK_PORT")]
    port: Option<u16>,
    #[arg(long, env = "OCELINK_BIND")]
    bind: Option<String>,
    /// Directory holding the served workspaces.
    #[arg(long, env = "OCELINK_BASE_DIR")]
    base_dir: Option<PathBuf>,
    /// Shared bearer token.
    #[arg(long, env = "OCELINK_TOKEN")]
    token: Option<String>,
    #[arg(long, env = "OCELINK_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

/// Values read from the configuration file; flags and environment win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    workspace: Option<PathBuf>,
    #[serde(default)]
    serve: ServeConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServeConfig {
    port: Option<u16>,
    bind: Option<String>,
    base_dir: Option<PathBuf>,
    token: Option<String>,
    cors_origin: Option<String>,
}

/// Error report written to stderr.
#[derive(Debug, Serialize)]
struct Failure {
    code: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    exit_code: i32,
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        Failure {
            code: e.code().to_string(),
            message: e.to_string(),
            field: e.field().map(str::to_string),
            exit_code: e.class().exit_code(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let failure = Failure::from(&e);
            if json {
                eprintln!("{}", serde_json::to_string(&failure).expect("failure serializes"));
            } else {
                match &failure.field {
                    Some(f) => eprintln!("error[{}] at {f}: {}", failure.code, failure.message),
                    None => eprintln!("error[{}]: {}", failure.code, failure.message),
                }
            }
            ExitCode::from(failure.exit_code as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Error> {
    let (path, required) = match path {
        Some(p) => (p.to_path_buf(), true),
        None => (PathBuf::from(DEFAULT_CONFIG), false),
    };
    if !path.exists() {
        return if required { Err(Error::NotFound(format!("config file {}", path.display()))) } else { Ok(FileConfig::default()) };
    }
    let text = std::fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| Error::invalid("config", format!("{}: {}", path.display(), e.message())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

struct Ctx {
    json: bool,
    workspace: Option<PathBuf>,
}

impl Ctx {
    fn workspace(&self) -> Result<Workspace, Error> {
        let dir = self.workspace.as_ref().ok_or_else(|| {
            Error::invalid("workspace", "no workspace: pass --workspace, set OCELINK_WORKSPACE or add it to ocelink.toml")
        })?;
        Ok(Workspace::open(dir)?)
    }

    /// Prints `value` as JSON, or `human` otherwise.
    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce(&T) -> String) -> Result<(), Error> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            println!("{}", human(value));
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = load_config(cli.config.as_deref())?;
    let ctx = Ctx { json: cli.json, workspace: cli.workspace.or(config.workspace) };
    match cli.command {
        Command::Ws(WsCommand::Init) => {
            let dir = ctx.workspace.clone().ok_or_else(|| Error::invalid("workspace", "no workspace directory given"))?;
            let ws = Workspace::init(dir)?;
            ctx.emit(&serde_json::json!({ "workspace": ws.root() }), |_| format!("initialized {}", ws.root().display()))
        }
        Command::Iot(cmd) => iot(&ctx, cmd),
        Command::Ocel(cmd) => ocel(&ctx, cmd),
        Command::Integrate(cmd) => integrate(&ctx, cmd),
        Command::Scenario(ScenarioCommand::Generate(args)) => scenario(&ctx, args),
        Command::Serve(args) => serve(args, config.serve),
    }
}

fn iot(ctx: &Ctx, cmd: IotCommand) -> Result<(), Error> {
    let ws = ctx.workspace()?;
    match cmd {
        IotCommand::Ingest { file, mapping } => {
            let staged = pipeline::stage(&ws, &std::fs::read(&file)?, &file_name(&file))?;
            let mapping: ColumnMapping = match mapping {
                Some(path) => read_json(&path)?,
                None => pipeline::infer(&ws, &staged.hash)?.mapping,
            };
            let out = pipeline::normalize_upload(&ws, &staged.hash, &mapping)?;
            ctx.emit(&out, |o| {
                let mut s = format!(
                    "{}: {} rows, {} accepted, {} rejected{}",
                    o.upload,
                    o.input_rows,
                    o.accepted,
                    o.rejected,
                    if o.replayed { " (replayed)" } else { "" }
                );
                for r in &o.rejects {
                    s.push_str(&format!("\n  row {}: {}", r.source_row, r.reason.code()));
                }
                s
            })
        }
        IotCommand::Infer { file } => {
            let staged = pipeline::stage(&ws, &std::fs::read(&file)?, &file_name(&file))?;
            let suggestion = pipeline::infer(&ws, &staged.hash)?;
            ctx.emit(&suggestion, |s| serde_json::to_string_pretty(s).expect("suggestion serializes"))
        }
        IotCommand::Summary => {
            let summary = pipeline::summary(&ws)?;
            ctx.emit(&summary, |s| serde_json::to_string_pretty(s).expect("summary serializes"))
        }
    }
}

fn ocel(ctx: &Ctx, cmd: OcelCommand) -> Result<(), Error> {
    let ws = ctx.workspace()?;
    match cmd {
        OcelCommand::Import { file, no_wait } => {
            let out = pipeline::import_ocel(&ws, &std::fs::read(&file)?, &file_name(&file), no_wait)?;
            ctx.emit(&out, |o| {
                format!(
                    "imported {} ({} events, {} objects, {} violations)",
                    o.upload, o.stats.event_count, o.stats.object_count, o.violations.len()
                )
            })
        }
        OcelCommand::Stats => {
            let stats = pipeline::stats(&ws)?;
            ctx.emit(&stats, |s| serde_json::to_string_pretty(s).expect("stats serialize"))
        }
        OcelCommand::Dfg { object_type } => {
            let edges = pipeline::dfg(&ws, &object_type)?;
            ctx.emit(&edges, |edges| {
                edges.iter().map(|e| format!("{} -> {}\t{}", e.from_activity, e.to_activity, e.frequency)).collect::<Vec<_>>().join("\n")
            })
        }
        OcelCommand::Validate => {
            let violations = pipeline::validate(&ws)?;
            ctx.emit(&violations, |v| {
                if v.is_empty() {
                    "no violations".into()
                } else {
                    v.iter().map(|x| serde_json::to_string(x).expect("violation serializes")).collect::<Vec<_>>().join("\n")
                }
            })
        }
        OcelCommand::Export { out } => {
            let (bytes, hash) = pipeline::download_ocel(&ws)?;
            std::fs::write(&out, bytes)?;
            ctx.emit(&serde_json::json!({ "path": out, "content_hash": hash }), |_| format!("{} {hash}", out.display()))
        }
    }
}

fn integrate(ctx: &Ctx, cmd: IntegrateCommand) -> Result<(), Error> {
    let ws = ctx.workspace()?;
    match cmd {
        IntegrateCommand::Plan { spec, preview } => {
            let spec: IntegrationSpec = read_json(&spec)?;
            let plan = pipeline::plan(&ws, &spec, preview)?;
            ctx.emit(&plan, |p| {
                let mut s = format!(
                    "plan {}: {} values over {} targets, {} unmatched targets, {} unmatched readings",
                    p.plan_id,
                    p.total_values,
                    p.match_groups.len(),
                    p.unmatched_target_count,
                    p.unmatched_reading_count
                );
                for v in &p.preview {
                    s.push_str(&format!("\n  {}\t{}\t{}", v.target_id, v.time, serde_json::to_string(&v.value).unwrap_or_default()));
                }
                for w in &p.warnings {
                    s.push_str(&format!("\nwarning: {w}"));
                }
                s
            })
        }
        IntegrateCommand::Run { plan, no_wait } => {
            let out = pipeline::execute_plan(&ws, &plan, &ApplyOptions { no_wait, ..Default::default() })?;
            ctx.emit(&out, |o| {
                format!(
                    "job {}: {} attribute writes, {} objects added, {} relations added; store {}",
                    o.job_id, o.report.attribute_writes, o.report.objects_added, o.report.relations_added, o.store_hash_after
                )
            })
        }
        IntegrateCommand::Plans => {
            let plans = pipeline::list_plans(&ws)?;
            ctx.emit(&plans, |ps| {
                ps.iter()
                    .map(|p| format!("{}\t{}\t{}", p.plan_id, p.spec.attribute_name, p.spec.target))
                    .collect::<Vec<_>>()
                    .join("\n")
            })
        }
    }
}

fn scenario(ctx: &Ctx, args: GenerateArgs) -> Result<(), Error> {
    let mut params = ScenarioParams { seed: args.seed, ..Default::default() };
    if let Some(t) = args.trucks {
        params.trucks = t;
    }
    if let Some(r) = args.corruption_rate {
        params.corruption_rate = r;
    }
    if let Some(r) = args.anomaly_rate {
        params.anomaly_rate = r;
    }
    let scenario = generate(&params)?;
    let files = scenario.write_to(&args.out)?;
    ctx.emit(&files, |f| {
        format!(
            "{}\n{}\n{}\n{}\n{} anomalous trucks",
            f.ocel.display(),
            f.gps.display(),
            f.weights.display(),
            f.truth.display(),
            scenario.truth.anomalous_trucks.len()
        )
    })
}

fn serve(args: ServeArgs, file: ServeConfig) -> Result<(), Error> {
    let port = args.port.or(file.port).unwrap_or(8080);
    let bind = args.bind.or(file.bind).unwrap_or_else(|| "127.0.0.1".into());
    let addr: SocketAddr = format!("{bind}:{port}").parse().map_err(|_| Error::invalid("bind", format!("bad address {bind}:{port}")))?;
    let config = ocelink_server::ServerConfig {
        base_dir: args.base_dir.or(file.base_dir).unwrap_or_else(|| PathBuf::from(".")),
        token: args.token.or(file.token),
        cors_origin: args.cors_origin.or(file.cors_origin),
    };
    std::fs::create_dir_all(&config.base_dir)?;
    eprintln!("listening on http://{addr}{}", ocelink_server::BASE_PATH);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ocelink_server::serve(config, addr))?;
    Ok(())
}
