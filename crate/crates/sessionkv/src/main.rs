use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use sessionkv::bench::{run_bench, RetryPolicy, Transport};
use sessionkv::programs::parse_application;
use sessionkv::report::{write_report, Row};
use sessionkv::workload::WorkloadParams;
use sessionkv_core::kernel::{Application, Value};
use sessionkv_core::protocols::{
    make_protocol, LabelingConfig, Mutation, ProtocolDefinition, ProtocolName, StoreBackend,
};
use sessionkv_core::refinement::{
    battery, check_convergence, check_hierarchy, check_trace_inclusion, Counterexample, Domains,
    Verdict,
};
use sessionkv_core::semantics::{run_random, ExploreError};

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "sessionkv", version, about = "Replicated key-value consistency workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the protocol and store registries
    List,
    /// Run one seeded random execution and print its canonical history
    Simulate(SimulateArgs),
    /// Trace-inclusion, convergence, and hierarchy checking
    #[command(subcommand)]
    Check(CheckCmd),
    /// Run one benchmark cell and emit a CSV row
    Bench(BenchArgs),
    /// Run a put-rate grid of benchmark cells into a CSV file
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "relaxed")]
    protocol: String,
    #[arg(long, default_value = "tree")]
    store: String,
    /// Battery entry name or a program file path
    #[arg(long, default_value = "read_own_write")]
    app: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    replicas: u64,
    /// Label universe size for lcc_spec
    #[arg(long, default_value_t = 3)]
    labels: u64,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// Also write the history to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Bounded trace inclusion of one protocol into another
    Refinement(RefinementArgs),
    /// Convergence of one protocol on one application
    Convergence(ConvergenceArgs),
    /// All thirteen refinement edges over the default battery
    Hierarchy(HierarchyArgs),
}

#[derive(Args)]
struct RefinementArgs {
    /// Lower (implementation) protocol
    #[arg(long = "impl")]
    lower: String,
    /// Upper (specification) protocol
    #[arg(long = "spec")]
    upper: String,
    #[arg(long, default_value = "read_own_write")]
    app: String,
    #[arg(long, default_value = "tree")]
    store: String,
    #[arg(long, default_value_t = 20)]
    bound: usize,
    #[arg(long, default_value_t = 2)]
    replicas: u64,
    #[arg(long, default_value_t = 3)]
    labels: u64,
    /// Guard mutation applied to the implementation side
    #[arg(long)]
    mutate: Option<String>,
    /// Directory for counterexample history and replay files
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    protocol: String,
    #[arg(long, default_value = "single_writer")]
    app: String,
    #[arg(long, default_value = "tree")]
    store: String,
    #[arg(long, default_value_t = 20)]
    bound: usize,
    #[arg(long, default_value_t = 2)]
    replicas: u64,
    #[arg(long, default_value_t = 3)]
    labels: u64,
}

#[derive(Args)]
struct HierarchyArgs {
    #[arg(long, default_value_t = 20)]
    bound: usize,
    #[arg(long, default_value_t = 2)]
    replicas: u64,
    /// One line per (edge, application) instead of one per edge
    #[arg(long)]
    per_app: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    protocol: String,
    #[arg(long, default_value = "tree")]
    store: String,
    #[arg(long, default_value = "inmemory")]
    transport: String,
    /// none, fixed, or exponential
    #[arg(long, default_value = "fixed")]
    retry: String,
    #[arg(long, default_value_t = 0.5)]
    put_rate: f64,
    /// Total operations across all workers
    #[arg(long, default_value_t = 4000)]
    n: u64,
    #[arg(long, default_value_t = 4)]
    workers: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    key_range: u64,
    #[arg(long, default_value_t = 100_000)]
    val_range: u64,
    #[arg(long, default_value_t = 2)]
    replicas: u64,
    #[arg(long, default_value_t = 3)]
    labels: u64,
    /// Wall-clock cap in seconds
    #[arg(long, default_value_t = 180)]
    wall_cap: u64,
    /// Write the CSV to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cell: BenchArgs,
    /// Comma-separated put rates in percent, e.g. 10,20,30
    #[arg(long, value_delimiter = ',', default_value = "10,30,50,70,90")]
    put_rates: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    reps: u64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum CliError {
    Usage(String),
    Resource(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Resource(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Resource(e.to_string())
    }
}

impl From<ExploreError> for CliError {
    fn from(e: ExploreError) -> CliError {
        CliError::Resource(format!("exploration failed: {e:?}"))
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::List => {
            println!("protocols:");
            for p in ProtocolName::ALL {
                println!("  {}", p.name());
            }
            println!("stores:");
            for s in StoreBackend::ALL {
                println!("  {}", s.name());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate(a) => simulate(a),
        Cmd::Check(CheckCmd::Refinement(a)) => refinement(a),
        Cmd::Check(CheckCmd::Convergence(a)) => convergence(a),
        Cmd::Check(CheckCmd::Hierarchy(a)) => hierarchy(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Sweep(a) => sweep(a),
    }
}

fn parse_protocol(s: &str) -> Result<ProtocolName, CliError> {
    ProtocolName::parse(s).ok_or_else(|| CliError::Usage(format!("unknown protocol `{s}`")))
}

fn parse_store(s: &str) -> Result<StoreBackend, CliError> {
    StoreBackend::parse(s).ok_or_else(|| CliError::Usage(format!("unknown store `{s}`")))
}

fn build_protocol(
    name: &str,
    store: &str,
    labels: u64,
    mutate: Option<&str>,
) -> Result<ProtocolDefinition, CliError> {
    let name = parse_protocol(name)?;
    let store = parse_store(store)?;
    let labeling = (name == ProtocolName::LccSpec).then(|| LabelingConfig::all_labels(labels));
    let mut proto = make_protocol(name, store, labeling)
        .map_err(|e| CliError::Usage(format!("cannot configure {}: {e:?}", name.name())))?;
    if let Some(m) = mutate {
        let m = Mutation::parse(m)
            .ok_or_else(|| CliError::Usage(format!("unknown mutation `{m}`")))?;
        proto = proto.with_mutation(m);
    }
    Ok(proto)
}

/// Battery entry by name, or a program file.
fn load_app(source: &str) -> Result<Application, CliError> {
    if let Some((_, app)) = battery().into_iter().find(|(n, _)| *n == source) {
        return Ok(app);
    }
    if Path::new(source).exists() {
        let text = std::fs::read_to_string(source)?;
        return parse_application(&text)
            .map_err(|e| CliError::Usage(format!("{source}: {e}")));
    }
    let names: Vec<&str> = battery().iter().map(|(n, _)| *n).collect();
    Err(CliError::Usage(format!(
        "`{source}` is neither a battery entry ({}) nor a program file",
        names.join(", ")
    )))
}

fn replica_ids(n: u64) -> Result<Vec<sessionkv_core::kernel::ReplicaId>, CliError> {
    if n == 0 {
        return Err(CliError::Usage("at least one replica is required".into()));
    }
    Ok((1..=n).map(sessionkv_core::kernel::ReplicaId).collect())
}

fn simulate(a: SimulateArgs) -> Result<ExitCode, CliError> {
    let proto = build_protocol(&a.protocol, &a.store, a.labels, None)?;
    let app = load_app(&a.app)?;
    let replicas = replica_ids(a.replicas)?;
    let outcome = run_random(&proto, &app, Value(0), &replicas, a.seed, a.max_steps)
        .map_err(|e| CliError::Usage(format!("invalid application: {e}")))?;
    let mut text = String::new();
    for label in &outcome.history {
        text.push_str(&label.render());
        text.push('\n');
    }
    text.push_str(&format!("# quiescent={}\n", outcome.quiescent));
    print!("{text}");
    if let Some(path) = a.out {
        std::fs::write(&path, text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict_word(v: &Verdict) -> &'static str {
    if !v.holds {
        "violation"
    } else if v.truncated {
        "truncated"
    } else {
        "holds"
    }
}

fn write_counterexample(
    dir: &Path,
    stem: &str,
    ce: &Counterexample,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(dir)?;
    let history_path = dir.join(format!("{stem}.history"));
    let mut text = String::new();
    for label in &ce.ext {
        text.push_str(&label.render());
        text.push('\n');
    }
    std::fs::write(&history_path, text)?;
    let choices_path = dir.join(format!("{stem}.choices"));
    let lines: Vec<String> = ce.choices.iter().map(|c| c.to_string()).collect();
    std::fs::write(&choices_path, lines.join("\n") + "\n")?;
    Ok((history_path, choices_path))
}

fn refinement(a: RefinementArgs) -> Result<ExitCode, CliError> {
    let lower = build_protocol(&a.lower, &a.store, a.labels, a.mutate.as_deref())?;
    let upper = build_protocol(&a.upper, &a.store, a.labels, None)?;
    let app = load_app(&a.app)?;
    let replicas = replica_ids(a.replicas)?;
    let verdict = check_trace_inclusion(&lower, &upper, &app, &replicas, a.bound)?;
    println!(
        "edge={}->{} app={} verdict={} steps={}",
        lower.name.name(),
        upper.name.name(),
        a.app,
        verdict_word(&verdict),
        verdict.bound
    );
    if let Some(ce) = &verdict.counterexample {
        for label in &ce.ext {
            println!("  {}", label.render());
        }
        let stem = format!("counterexample_{}_{}", lower.name.name(), upper.name.name());
        let (h, c) = write_counterexample(&a.out_dir, &stem, ce)?;
        println!("counterexample written to {} and {}", h.display(), c.display());
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(ExitCode::SUCCESS)
}

fn convergence(a: ConvergenceArgs) -> Result<ExitCode, CliError> {
    let proto = build_protocol(&a.protocol, &a.store, a.labels, None)?;
    let app = load_app(&a.app)?;
    let replicas = replica_ids(a.replicas)?;
    let verdict = check_convergence(&proto, &app, &replicas, a.bound)?;
    println!(
        "convergence protocol={} app={} verdict={} steps={}",
        proto.name.name(),
        a.app,
        verdict_word(&verdict),
        verdict.bound
    );
    if let Some(ce) = &verdict.counterexample {
        for label in &ce.ext {
            println!("  {}", label.render());
        }
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(ExitCode::SUCCESS)
}

fn hierarchy(a: HierarchyArgs) -> Result<ExitCode, CliError> {
    let domains = Domains { replicas: a.replicas, ..Domains::default() };
    let report = check_hierarchy(&domains, a.bound)?;
    let mut all_hold = true;
    if a.per_app {
        for line in &report {
            println!(
                "edge={}->{} app={} verdict={} steps={}",
                line.edge.lower.name(),
                line.edge.upper.name(),
                line.app,
                verdict_word(&line.verdict),
                line.verdict.bound
            );
            all_hold &= line.verdict.holds;
        }
    } else {
        // one line per edge over the whole battery; a violation names the
        // first offending application
        let mut edges: Vec<_> = Vec::new();
        for line in &report {
            if !edges.contains(&line.edge) {
                edges.push(line.edge);
            }
        }
        for edge in edges {
            let lines: Vec<_> = report.iter().filter(|l| l.edge == edge).collect();
            let bad = lines.iter().find(|l| !l.verdict.holds);
            let truncated = lines.iter().any(|l| l.verdict.truncated);
            let (app, word) = match bad {
                Some(l) => (l.app.as_str(), "violation"),
                None if truncated => ("battery", "truncated"),
                None => ("battery", "holds"),
            };
            println!(
                "edge={}->{} app={} verdict={} steps={}",
                edge.lower.name(),
                edge.upper.name(),
                app,
                word,
                a.bound
            );
            all_hold &= bad.is_none();
        }
    }
    Ok(if all_hold { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
}

struct Cell {
    proto: ProtocolDefinition,
    transport: Transport,
    retry: RetryPolicy,
    replicas: u64,
    wall_cap: Duration,
}

fn build_cell(a: &BenchArgs) -> Result<Cell, CliError> {
    Ok(Cell {
        proto: build_protocol(&a.protocol, &a.store, a.labels, None)?,
        transport: Transport::parse(&a.transport)
            .ok_or_else(|| CliError::Usage(format!("unknown transport `{}`", a.transport)))?,
        retry: RetryPolicy::parse(&a.retry)
            .ok_or_else(|| CliError::Usage(format!("unknown retry policy `{}`", a.retry)))?,
        replicas: a.replicas,
        wall_cap: Duration::from_secs(a.wall_cap),
    })
}

fn cell_params(a: &BenchArgs, put_rate: f64, seed: u64) -> Result<WorkloadParams, CliError> {
    if !(0.0..=1.0).contains(&put_rate) {
        return Err(CliError::Usage(format!("put rate {put_rate} is outside [0,1]")));
    }
    if a.workers == 0 {
        return Err(CliError::Usage("at least one worker is required".into()));
    }
    if a.key_range > a.val_range {
        return Err(CliError::Usage("key range must not exceed value range".into()));
    }
    Ok(WorkloadParams {
        num_workers: a.workers,
        ops_per_worker: a.n.div_ceil(a.workers),
        put_rate,
        key_range: a.key_range,
        val_range: a.val_range,
        seed,
    })
}

fn run_cell(cell: &Cell, params: &WorkloadParams) -> Result<Row, CliError> {
    let report = run_bench(&cell.proto, cell.transport, cell.retry, params, cell.replicas, cell.wall_cap)
        .map_err(|e| CliError::Resource(e.to_string()))?;
    Ok(Row {
        protocol: cell.proto.name.name().to_string(),
        store: cell.proto.store.name().to_string(),
        transport: cell.transport.name().to_string(),
        put_rate: params.put_rate,
        n_ops: params.total_ops(),
        workers: params.num_workers,
        seed: params.seed,
        throughput_ops_s: report.throughput_ops_s,
        p50_us: report.p50_us,
        p95_us: report.p95_us,
        p99_us: report.p99_us,
        peak_mem_bytes: report.peak_mem_bytes,
        stalled: report.stalled,
        retries: report.retries,
    })
}

fn bench(a: BenchArgs) -> Result<ExitCode, CliError> {
    let cell = build_cell(&a)?;
    let params = cell_params(&a, a.put_rate, a.seed)?;
    let row = run_cell(&cell, &params)?;
    emit_rows(&[row], a.out.as_deref(), "bench")?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs) -> Result<ExitCode, CliError> {
    let cell = build_cell(&a.cell)?;
    let mut rows = Vec::new();
    for &pct in &a.put_rates {
        if pct > 100 {
            return Err(CliError::Usage(format!("put rate {pct}% is outside [0,100]")));
        }
        for rep in 0..a.reps {
            let params = cell_params(&a.cell, pct as f64 / 100.0, a.cell.seed + rep)?;
            rows.push(run_cell(&cell, &params)?);
        }
    }
    emit_rows(&rows, a.cell.out.as_deref(), "sweep")?;
    Ok(ExitCode::SUCCESS)
}

/// Writes rows to the requested file, to `$SESSIONKV_BENCH_DIR/<stem>.csv`
/// when the variable is set, or to stdout.
fn emit_rows(rows: &[Row], out: Option<&Path>, stem: &str) -> Result<(), CliError> {
    let path = match out {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os("SESSIONKV_BENCH_DIR")
            .map(|dir| PathBuf::from(dir).join(format!("{stem}.csv"))),
    };
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let file = std::fs::File::create(&path)
                .map_err(|e| CliError::Resource(format!("{}: {e}", path.display())))?;
            write_report(std::io::BufWriter::new(file), rows)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_report(&mut lock, rows)?;
            lock.flush()?;
        }
    }
    Ok(())
}
