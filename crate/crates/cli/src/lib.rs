//! The `dqm` command line: simulations, verification suites, the spin
//! sweep, phase retrieval and the session server.
//!
//! Exit codes are 0 on success, 2 for usage or input errors and 3 when a
//! verification or convergence check fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dqm_core::lab::{retrieve_phases, spin_sweep, PhaseRetrievalProblem, PhaseSolution, SpinRow};
use dqm_core::simulator::{builtin_scenario, run, ExperimentScript, Mode, RunReport};
use dqm_core::verify::{verify, Suite, VerifyReport};
use dqm_core::RandomStream;
use dqm_service::{Service, ServiceConfig};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FAILED: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "dqm",
    version,
    about = "Measurement simulations and checks for small quantum systems"
)]
pub struct Cli {
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a measurement script many times and report frequencies and invalidations.
    Simulate {
        /// table1-pair, spin-zx or fourier-n
        #[arg(long)]
        scenario: String,
        /// Comma-separated measurement names, e.g. A,B,A
        #[arg(long)]
        script: String,
        #[arg(long, default_value = "interaction")]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Dimension for fourier-n.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Run the invariant suites.
    Verify {
        /// all, born, mub, real-search, phase, spin or simulator
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Tabulate the spin-½ transition probability over two full turns.
    Spin {
        /// Angle step in degrees, in (0, 90].
        #[arg(long, default_value_t = 15.0)]
        step: f64,
    },
    /// Recover relative phases from two moduli distributions.
    PhaseRetrieve {
        /// JSON problem file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
    },
    /// Serve the session API until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Include the state vector in session responses.
        #[arg(long)]
        reveal_state: bool,
        /// Load sessions from this file on start and save them on exit.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Restrict CORS to this origin.
        #[arg(long)]
        allowed_origin: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Runs a parsed command line and returns the process exit code.
pub fn run_cli(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Simulate {
            ref scenario,
            ref script,
            mode,
            trials,
            dim,
        } => simulate(&cli, scenario, script, mode, trials, dim),
        Command::Verify { suite } => verify_suite(&cli, suite),
        Command::Spin { step } => spin(&cli, step),
        Command::PhaseRetrieve { ref input, restarts } => phase_retrieve(&cli, input, restarts),
        Command::Serve {
            port,
            ref host,
            reveal_state,
            ref snapshot,
            ref allowed_origin,
        } => {
            let config = ServiceConfig {
                reveal_state,
                snapshot_path: snapshot.clone(),
                allowed_origin: allowed_origin.clone(),
            };
            serve(host, port, config, cli.format == Some(Format::Json))
        }
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Usage(format!("cannot write {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(cli: &Cli, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    let mut out = open_output(cli.output.as_deref())?;
    body(&mut out)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Usage(format!("output failed: {e}")))
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn simulate(cli: &Cli, scenario: &str, script: &str, mode: Mode, trials: usize, dim: Option<usize>) -> CliResult<u8> {
    let scenario = builtin_scenario(scenario, dim).map_err(CliError::usage)?;
    let script = ExperimentScript::parse(script).map_err(CliError::usage)?;
    let report = run(&scenario, &script, mode, trials, cli.seed).map_err(CliError::usage)?;
    emit(cli, |out| match cli.format.unwrap_or(Format::Text) {
        Format::Json => write_json(out, &report),
        Format::Csv => report.write_csv(out).map_err(io::Error::other),
        Format::Text => write_run_text(out, &report),
    })?;
    Ok(EXIT_OK)
}

fn write_run_text(out: &mut dyn Write, report: &RunReport) -> io::Result<()> {
    writeln!(
        out,
        "# seed={} scenario={} mode={} trials={}",
        report.seed, report.scenario, report.mode, report.trials
    )?;
    writeln!(out, "script: {}", report.script.join(","))?;
    for step in &report.aggregate {
        let parts: Vec<String> = step
            .frequencies
            .iter()
            .map(|f| format!("{}={:.4} ({})", f.label, f.frequency, f.count))
            .collect();
        writeln!(out, "step {} {}: {}", step.step, step.measurement, parts.join(" "))?;
    }
    for stat in &report.invalidation {
        writeln!(
            out,
            "invalidation {} after [{}]: {}/{} = {:.4}",
            stat.measurement,
            stat.intervening.join(","),
            stat.invalidations,
            stat.opportunities,
            stat.rate
        )?;
    }
    for effect in &report.order_effect {
        writeln!(
            out,
            "order effect {},{} probe {}: tv={:.4}",
            effect.first, effect.second, effect.probe, effect.tv_distance
        )?;
    }
    writeln!(out, "total invalidations: {}", report.total_invalidations())
}

fn verify_suite(cli: &Cli, suite: Suite) -> CliResult<u8> {
    let report = verify(suite, cli.seed).map_err(CliError::usage)?;
    emit(cli, |out| match cli.format.unwrap_or(Format::Text) {
        Format::Json => write_json(out, &report),
        Format::Csv => write_verify_csv(out, &report),
        Format::Text => write_verify_text(out, &report),
    })?;
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn write_verify_csv(out: &mut dyn Write, report: &VerifyReport) -> io::Result<()> {
    writeln!(out, "# seed={} suite={}", report.seed, report.suite)?;
    let mut writer = csv_writer(out);
    writer.write_record(["suite", "check", "passed", "detail"])?;
    for c in &report.checks {
        writer.write_record([
            c.suite.to_string(),
            c.name.clone(),
            c.passed.to_string(),
            c.detail.clone(),
        ])?;
    }
    writer.flush()
}

fn write_verify_text(out: &mut dyn Write, report: &VerifyReport) -> io::Result<()> {
    writeln!(out, "# seed={} suite={}", report.seed, report.suite)?;
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{mark} {}/{}: {}", c.suite, c.name, c.detail)?;
    }
    if let Some(rows) = &report.feasibility {
        writeln!(out, "real equal-modulus feasibility:")?;
        for row in rows {
            writeln!(
                out,
                "  n={} {} ({} of {} sign matrices orthogonal)",
                row.n,
                if row.feasible { "yes" } else { "no" },
                row.orthogonal,
                row.candidates
            )?;
        }
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        writeln!(out, "all {} checks passed", report.checks.len())
    } else {
        writeln!(out, "{failed} of {} checks failed", report.checks.len())
    }
}

#[derive(Serialize)]
struct SpinReport<'a> {
    step_degrees: f64,
    rows: &'a [SpinRow],
}

fn spin(cli: &Cli, step: f64) -> CliResult<u8> {
    let rows = spin_sweep(step).map_err(CliError::usage)?;
    emit(cli, |out| match cli.format.unwrap_or(Format::Csv) {
        Format::Json => write_json(
            out,
            &SpinReport {
                step_degrees: step,
                rows: &rows,
            },
        ),
        Format::Csv => {
            let mut writer = csv_writer(out);
            for row in &rows {
                writer.serialize(row)?;
            }
            writer.flush()
        }
        Format::Text => {
            writeln!(
                out,
                "{:>10} {:>10} {:>10} {:>10} {:>8}",
                "theta", "half", "psi_up", "psi_down", "P(up)"
            )?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>10.3} {:>10.3} {:>10.6} {:>10.6} {:>8.6}",
                    r.theta_physical_deg, r.phase_space_angle_deg, r.psi_z_up, r.psi_z_down, r.p_z_up
                )?;
            }
            Ok(())
        }
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SeededSolution<'a> {
    seed: u64,
    #[serde(flatten)]
    solution: &'a PhaseSolution,
}

fn phase_retrieve(cli: &Cli, input: &Path, restarts: usize) -> CliResult<u8> {
    if restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let text =
        std::fs::read_to_string(input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let problem: PhaseRetrievalProblem = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid problem in {}: {e}", input.display())))?;
    let solution = retrieve_phases(&problem, restarts, &mut RandomStream::new(cli.seed));
    emit(cli, |out| match cli.format.unwrap_or(Format::Json) {
        Format::Json => write_json(
            out,
            &SeededSolution {
                seed: cli.seed,
                solution: &solution,
            },
        ),
        Format::Csv => {
            writeln!(
                out,
                "# seed={} residual={:e} converged={}",
                cli.seed, solution.residual, solution.converged
            )?;
            let mut writer = csv_writer(out);
            writer.write_record(["index", "phase"])?;
            for (k, p) in solution.phases.iter().enumerate() {
                writer.write_record([k.to_string(), p.to_string()])?;
            }
            writer.flush()
        }
        Format::Text => {
            writeln!(out, "# seed={}", cli.seed)?;
            writeln!(out, "converged: {}", if solution.converged { "yes" } else { "no" })?;
            writeln!(out, "residual: {:e}", solution.residual)?;
            let phases: Vec<String> = solution.phases.iter().map(|p| format!("{p:.9}")).collect();
            writeln!(out, "phases: {}", phases.join(" "))?;
            writeln!(out, "distinct solutions: {}", solution.distinct_solutions.len())
        }
    })?;
    Ok(if solution.converged { EXIT_OK } else { EXIT_FAILED })
}

fn init_logging(json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn serve(host: &str, port: u16, config: ServiceConfig, json_logs: bool) -> CliResult<u8> {
    init_logging(json_logs);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::usage)?;
    runtime.block_on(async {
        let service = Service::new(config).map_err(|e| CliError::Usage(format!("cannot load snapshot: {e}")))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(CliError::usage)?;
        eprintln!("listening on http://{local}");
        service
            .serve(listener, shutdown_signal())
            .await
            .map_err(CliError::usage)?;
        eprintln!("shut down cleanly");
        Ok(EXIT_OK)
    })
}
