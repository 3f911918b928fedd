//! The `semcache` command line.
//!
//! Exit status is 0 on success, 2 for bad arguments or configuration and 1
//! for failures while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codec::{EntityKind, MetadataCodec, MetadataDescriptor};
use crate::config::{ConfigError, ModeSelection, Overrides, ResolvedScenario, ScenarioFile};
use crate::experiments::{
    reference, run_sweep, SweepPoints, SweepSpec, SweepTable, SweepVariable, Workload,
};
use crate::kb::KnowledgeBase;
use crate::metrics::{format_pct, improvement};
use crate::sim::CacheLocation;
use crate::workload::{
    generate_trace, load_trace_file, write_trace, GapDistribution, SyntheticSpec,
};

#[derive(Debug, Parser)]
#[command(
    name = "semcache",
    version,
    about = "Semantic caching and prefetching simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and report hit ratio, latency and overhead.
    Simulate(SimulateArgs),
    /// Run both caching modes over a grid of one variable.
    Sweep(SweepArgs),
    /// Write a synthetic request trace.
    GenTrace(GenTraceArgs),
    /// Check a knowledge base file and print its size.
    ValidateKb { path: PathBuf },
    /// Encode or decode hop-by-hop metadata headers.
    #[command(subcommand)]
    Codec(CodecCommand),
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// TOML scenario file; command-line values override it.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Knowledge base file [default: bundled reference knowledge base]
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Request trace CSV [default: synthesized from the workload settings]
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Cache node: enodeb, sgw or pgw [default: enodeb]
    #[arg(long, value_parser = parse_location)]
    pub cache_location: Option<CacheLocation>,
    /// Cache capacity, e.g. 20MB or 500kB (decimal units) [default: 20MB]
    #[arg(long, value_parser = parse_bytes)]
    pub cache_size: Option<u64>,
    /// Seed [default: scenario file, then $SEMCACHE_SEED, then 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability a synthetic user follows a knowledge-base relation [default: 0.6]
    #[arg(long)]
    pub p_follow: Option<f64>,
    /// Number of synthetic users [default: 20]
    #[arg(long)]
    pub users: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Caching mode(s) to run [default: both]
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Write the metrics CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one JSON line per request here.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// user-count, cache-size or cache-location
    #[arg(long, value_parser = clap::value_parser!(SweepVariable))]
    pub variable: SweepVariable,
    /// Comma-separated grid [default: 1,2,5,10,20 users; 5,10,20,50,100 MB; enodeb,sgw,pgw]
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Repeat the sweep with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub repeat: u32,
    /// Write the sweep CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Knowledge base file [default: bundled reference knowledge base]
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long, default_value_t = reference::USERS)]
    pub users: u32,
    #[arg(long, default_value_t = 20)]
    pub requests_min: u32,
    #[arg(long, default_value_t = 30)]
    pub requests_max: u32,
    #[arg(long, default_value_t = reference::P_FOLLOW)]
    pub p_follow: f64,
    #[arg(long, default_value_t = 5_000)]
    pub gap_min_ms: u64,
    #[arg(long, default_value_t = 30_000)]
    pub gap_max_ms: u64,
    #[arg(long, default_value_t = reference::CELLS)]
    pub cells: u32,
    /// Seed [default: $SEMCACHE_SEED, then 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CodecCommand {
    /// Print the hex wire form of a metadata header.
    Encode {
        #[arg(long)]
        iri: String,
        #[arg(long, default_value = "person", value_parser = parse_kind)]
        kind: EntityKind,
        #[arg(long, default_value_t = crate::codec::DEFAULT_OPTION_TYPE)]
        option_type: u8,
    },
    /// Decode a hex wire header and print its kind and IRI.
    Decode {
        hex: String,
        #[arg(long, default_value_t = crate::codec::DEFAULT_OPTION_TYPE)]
        option_type: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Semantic,
    Traditional,
    Both,
}

impl From<ModeArg> for ModeSelection {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Semantic => ModeSelection::Semantic,
            ModeArg::Traditional => ModeSelection::Traditional,
            ModeArg::Both => ModeSelection::Both,
        }
    }
}

fn parse_location(s: &str) -> Result<CacheLocation, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<EntityKind, String> {
    s.parse::<EntityKind>().map_err(|e| e.to_string())
}

/// Byte counts with optional decimal suffix: `500`, `64kB`, `20MB`, `1GB`.
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let scale = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "kb" | "k" => 1e3,
        "mb" | "m" => 1e6,
        "gb" | "g" => 1e9,
        _ => return Err(format!("unknown size unit in `{s}`")),
    };
    let value: f64 = num.parse().map_err(|_| format!("invalid size `{s}`"))?;
    Ok((value * scale).round() as u64)
}

enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args, out),
        Command::Sweep(args) => sweep(args, out),
        Command::GenTrace(args) => gen_trace(args, out),
        Command::ValidateKb { path } => validate_kb(&path, out),
        Command::Codec(cmd) => codec(cmd, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            let _ = writeln!(err, "error: invalid configuration: {e}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn resolve(args: &ScenarioArgs, mode: Option<ModeArg>) -> Result<ResolvedScenario, ConfigError> {
    let file = match &args.scenario {
        Some(path) => ScenarioFile::load(path)?,
        None => ScenarioFile::default(),
    };
    file.resolve(&Overrides {
        kb: args.kb.clone(),
        trace: args.trace.clone(),
        mode: mode.map(Into::into),
        cache_location: args.cache_location,
        cache_size: args.cache_size,
        seed: args.seed,
        p_follow: args.p_follow,
        users: args.users,
    })
}

fn load_kb(path: Option<&Path>) -> Result<KnowledgeBase, ConfigError> {
    match path {
        None => Ok(reference::knowledge_base()),
        Some(p) => KnowledgeBase::load(p)
            .map_err(|e| ConfigError::new("kb", format!("{}: {e}", p.display()))),
    }
}

/// Loads the knowledge base and, if configured, the trace file. An explicit
/// user count keeps only the first `users` users of a file trace.
fn materialize(
    resolved: &mut ResolvedScenario,
    users: Option<u32>,
) -> Result<KnowledgeBase, ConfigError> {
    let kb = load_kb(resolved.kb_path.as_deref())?;
    if let Some(path) = &resolved.trace_path {
        let trace = load_trace_file(path)
            .map_err(|e| ConfigError::new("trace", format!("{}: {e}", path.display())))?;
        resolved.scenario.workload = Workload::Trace(trace);
        if let Some(users) = users {
            resolved.scenario = resolved.scenario.with_users(users);
        }
    }
    Ok(kb)
}

/// Writes through a temporary file in the destination directory so readers
/// never see a partial file.
fn write_atomically(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let mut resolved = resolve(&args.scenario, args.mode)?;
    let kb = materialize(&mut resolved, args.scenario.users)?;
    let scenario = &resolved.scenario;
    let trace = scenario
        .trace(&kb)
        .map_err(|e| ConfigError::new("workload", e.to_string()))?;

    let mut outputs = Vec::new();
    for &mode in &resolved.modes {
        let output = scenario
            .run_trace(&kb, &trace, mode)
            .with_context(|| format!("{mode} run failed"))?;
        outputs.push(output);
    }

    for output in &outputs {
        writeln!(out, "{}", output.report).map_err(anyhow::Error::from)?;
    }
    if let [a, b] = outputs.as_slice() {
        if let Ok(imp) = improvement(&a.report, &b.report) {
            writeln!(
                out,
                "semantic over traditional: hit ratio +{}%, latency -{}%",
                format_pct(imp.hit_ratio_increase_pct),
                format_pct(imp.latency_decrease_pct)
            )
            .map_err(anyhow::Error::from)?;
        }
    }

    if let Some(path) = &args.out {
        write_atomically(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(crate::metrics::MetricsReport::CSV_COLUMNS)?;
            for output in &outputs {
                csv.write_record(output.report.csv_values())?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    if let Some(path) = &args.records {
        write_atomically(path, |w| {
            for output in &outputs {
                for record in &output.records {
                    let line = serde_json::json!({
                        "mode": output.report.mode,
                        "record": record,
                        "latency_ms": record.latency().as_millis_f64(),
                    });
                    writeln!(w, "{line}")?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn sweep_points(variable: SweepVariable, values: &[String]) -> Result<SweepPoints, ConfigError> {
    if values.is_empty() {
        return Ok(SweepPoints::default_for(variable));
    }
    let bad = |v: &str, why: String| ConfigError::new("values", format!("`{v}`: {why}"));
    Ok(match variable {
        SweepVariable::UserCount => SweepPoints::UserCount(
            values
                .iter()
                .map(|v| v.trim().parse::<u32>().map_err(|e| bad(v, e.to_string())))
                .collect::<Result<_, _>>()?,
        ),
        SweepVariable::CacheSize => SweepPoints::CacheSize(
            values
                .iter()
                .map(|v| {
                    // bare numbers are megabytes here
                    match v.trim().parse::<f64>() {
                        Ok(mb) => Ok((mb * crate::experiments::MB as f64).round() as u64),
                        Err(_) => parse_bytes(v).map_err(|e| bad(v, e)),
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
        SweepVariable::CacheLocation => SweepPoints::CacheLocation(
            values
                .iter()
                .map(|v| v.trim().parse::<CacheLocation>().map_err(|e| bad(v, e)))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn sweep(args: SweepArgs, out: &mut dyn Write) -> CliResult {
    let mut resolved = resolve(&args.scenario, None)?;
    let kb = materialize(&mut resolved, args.scenario.users)?;
    let points = sweep_points(args.variable, &args.values)?;
    if args.repeat == 0 {
        return Err(ConfigError::new("repeat", "must be at least 1").into());
    }
    if args.jobs == Some(0) {
        return Err(ConfigError::new("jobs", "must be at least 1").into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("cannot start worker threads")?;

    let base_seed = resolved.scenario.seed;
    let mut tables: Vec<SweepTable> = Vec::new();
    for i in 0..args.repeat {
        let mut base = resolved.scenario.clone();
        base.seed = base_seed.wrapping_add(u64::from(i));
        let spec = SweepSpec {
            base,
            points: points.clone(),
        };
        let table = pool
            .install(|| run_sweep(&spec, &kb))
            .map_err(anyhow::Error::from)?;
        writeln!(out, "seed {}", spec.base.seed).map_err(anyhow::Error::from)?;
        write!(out, "{}", table.summary()).map_err(anyhow::Error::from)?;
        tables.push(table);
    }

    if let Some(path) = &args.out {
        write_atomically(path, |w| {
            let mut first = true;
            for table in &tables {
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                let text = String::from_utf8(buf)?;
                let body = if first {
                    text.as_str()
                } else {
                    text.split_once('\n').map_or("", |(_, rest)| rest)
                };
                w.write_all(body.as_bytes())?;
                first = false;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn gen_trace(args: GenTraceArgs, out: &mut dyn Write) -> CliResult {
    let seed = match args.seed {
        Some(s) => s,
        None => {
            ScenarioFile::default()
                .resolve(&Overrides::default())?
                .scenario
                .seed
        }
    };
    if args.gap_min_ms > args.gap_max_ms {
        return Err(ConfigError::new("gap-min-ms", "must not exceed --gap-max-ms").into());
    }
    let spec = SyntheticSpec {
        users: args.users,
        requests_min: args.requests_min,
        requests_max: args.requests_max,
        p_follow: args.p_follow,
        gap: GapDistribution::from_range_ms(args.gap_min_ms, args.gap_max_ms),
        cells: args.cells,
        seed,
    };
    spec.validate()
        .map_err(|e| ConfigError::new("workload", e.to_string()))?;
    let kb = load_kb(args.kb.as_deref())?;
    let trace = generate_trace(&kb, &spec).context("trace generation failed")?;
    match &args.out {
        Some(path) => write_atomically(path, |w| Ok(write_trace(w, &trace)?))?,
        None => write_trace(out, &trace).map_err(anyhow::Error::from)?,
    }
    Ok(())
}

fn validate_kb(path: &Path, out: &mut dyn Write) -> CliResult {
    let kb = KnowledgeBase::load(path).map_err(|e| {
        let text = e.to_string();
        anyhow::anyhow!(match e.line() {
            Some(line) => {
                let prefix = format!("line {line}: ");
                let message = text.strip_prefix(&prefix).unwrap_or(&text);
                format!("{}:{line}: {message}", path.display())
            }
            None => format!("{}: {text}", path.display()),
        })
    })?;
    writeln!(
        out,
        "{}: {} entities, {} triples, {} content bytes",
        path.display(),
        kb.entity_count(),
        kb.triple_count(),
        kb.total_content_bytes()
    )
    .map_err(anyhow::Error::from)?;
    Ok(())
}

fn codec(cmd: CodecCommand, out: &mut dyn Write) -> CliResult {
    match cmd {
        CodecCommand::Encode {
            iri,
            kind,
            option_type,
        } => {
            let header = MetadataCodec::with_option_type(option_type)
                .encode(&MetadataDescriptor::new(iri, kind))
                .context("cannot encode")?;
            writeln!(out, "{}", hex::encode(header.to_bytes())).map_err(anyhow::Error::from)?;
        }
        CodecCommand::Decode {
            hex: text,
            option_type,
        } => {
            let bytes =
                hex::decode(text.trim()).map_err(|e| ConfigError::new("hex", e.to_string()))?;
            let descriptor = MetadataCodec::with_option_type(option_type)
                .decode_bytes(&bytes)
                .context("cannot decode")?;
            writeln!(out, "{}\t{}", descriptor.entity_kind, descriptor.entity_iri)
                .map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}
