//! `memsolve` command-line driver.
//!
//! Exit codes: 0 success, 2 input error, 3 unsupported feature, 4 internal
//! failure. Every file written under `--out` gets a sibling
//! `<out>.manifest.json`.

mod manifest;

pub use manifest::{ResolvedConfig, RunManifest};

use clap::{Args, Parser, Subcommand, ValueEnum};
use memsolve::compiler::{compile, parse_spec, EquationSpec};
use memsolve::netlist::format::{parse_netlist, write_netlist};
use memsolve::netlist::{lower, Netlist, OdeSystem};
use memsolve::oracle::{convergence_study, solve_ide, IdeSpec, OracleError};
use memsolve::solver::{simulate, SimConfig, DEFAULT_DT, DEFAULT_LN_FLOOR};
use memsolve::tolerance::{stability_run, Distribution, ToleranceConfig, DEFAULT_SEED};
use memsolve::waveform::{relative_error, Waveform};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;
/// Caps the worker count of the stability command.
pub const THREADS_ENV: &str = "MEMSOLVE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "memsolve",
    version,
    about = "Compile and simulate memristive analog-computer circuits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile an equation spec file into a netlist.
    Compile(CompileArgs),
    /// Simulate a netlist and write its waveform as CSV.
    Simulate(SimulateArgs),
    /// Solve the spec's equation directly, without a circuit.
    Oracle(OracleArgs),
    /// Monte Carlo component-tolerance study of a netlist.
    Stability(StabilityArgs),
    /// Step-halving study of the direct solver.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output path; prints to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress informational output.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct Grid {
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long)]
    pub t_end: f64,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    pub spec: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub netlist: PathBuf,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub common: Common,
    /// Extra channels to record: node names or `omega:<id>`.
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    /// Lower bound applied to `ln` arguments.
    #[arg(long, default_value_t = DEFAULT_LN_FLOOR)]
    pub ln_floor: f64,
    /// Also write a gnuplot script `<out>.gp`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub spec: PathBuf,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub common: Common,
    /// Circuit waveform CSV to compare against on the `output` channel.
    #[arg(long)]
    pub against: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    TruncatedGaussian,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Uniform => Distribution::Uniform,
            DistributionArg::TruncatedGaussian => Distribution::TruncatedGaussian,
        }
    }
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    pub netlist: PathBuf,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub common: Common,
    /// Maximum relative component error.
    #[arg(long, default_value_t = 0.10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DistributionArg::Uniform)]
    pub distribution: DistributionArg,
    #[arg(long, default_value_t = DEFAULT_LN_FLOOR)]
    pub ln_floor: f64,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    pub spec: PathBuf,
    /// Strictly decreasing step sizes, each dividing `--t-end`.
    #[arg(long, value_delimiter = ',', default_values_t = [4e-3, 2e-3, 1e-3])]
    pub dts: Vec<f64>,
    #[arg(long)]
    pub t_end: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Unsupported(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Unsupported(_) => EXIT_UNSUPPORTED,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Unsupported(m) | Failure::Internal(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &argv) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Outcome {
    match command {
        Command::Compile(a) => cmd_compile(a, argv),
        Command::Simulate(a) => cmd_simulate(a, argv),
        Command::Oracle(a) => cmd_oracle(a, argv),
        Command::Stability(a) => cmd_stability(a, argv),
        Command::Convergence(a) => cmd_convergence(a, argv),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Result<EquationSpec, Failure> {
    parse_spec(&read(path)?).map_err(|e| match e.line {
        Some(l) => Failure::Input(format!("{}:{l}: {}", path.display(), e.message)),
        None => Failure::Input(format!("{}: {}", path.display(), e.message)),
    })
}

fn read_netlist(path: &Path) -> Result<(Netlist, OdeSystem), Failure> {
    let net = parse_netlist(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}:{}: {}", path.display(), e.line, e.message)))?;
    let sys = lower(&net).map_err(|diags| {
        let mut msg = format!("{}: invalid netlist", path.display());
        for d in diags {
            write!(msg, "\n  {d}").unwrap();
        }
        Failure::Input(msg)
    })?;
    Ok((net, sys))
}

fn oracle_failure(e: OracleError) -> Failure {
    match e {
        OracleError::Unsupported(_) => Failure::Unsupported(e.to_string()),
        OracleError::Grid(_) => Failure::Input(e.to_string()),
        _ => Failure::Internal(e.to_string()),
    }
}

/// Write `contents` to `--out` with its manifest, or to stdout.
fn emit(common: &Common, contents: &str, mut manifest: RunManifest, extra: &[(PathBuf, String)]) -> Outcome {
    let Some(out) = &common.out else {
        print!("{contents}");
        return Ok(());
    };
    write(out, contents)?;
    manifest.outputs.push(out.clone());
    for (path, text) in extra {
        write(path, text)?;
        manifest.outputs.push(path.clone());
    }
    manifest.outputs.push(RunManifest::path_for(out));
    manifest
        .write(out)
        .map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Gnuplot script drawing the listed columns (1-based, `t` is column 1).
fn gnuplot_script(data: &Path, title: &str, columns: &[(usize, &str)]) -> String {
    let file = data
        .file_name()
        .map_or_else(|| data.display().to_string(), |f| f.to_string_lossy().into_owned());
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set title '{title}'").unwrap();
    writeln!(s, "set xlabel 't'").unwrap();
    let plots: Vec<String> = columns
        .iter()
        .map(|(c, name)| format!("'{file}' using 1:{c} skip 1 with lines title '{name}'"))
        .collect();
    writeln!(s, "plot {}", plots.join(", \\\n     ")).unwrap();
    s
}

fn info(common: &Common, line: impl AsRef<str>) {
    if !common.quiet {
        // Keep stdout clean when the artifact itself goes there.
        if common.out.is_some() {
            println!("{}", line.as_ref());
        } else {
            eprintln!("{}", line.as_ref());
        }
    }
}

fn cmd_compile(a: CompileArgs, argv: &[String]) -> Outcome {
    let spec = read_spec(&a.spec)?;
    let net = compile(&spec).map_err(|e| {
        if e.is_unsupported() {
            Failure::Unsupported(format!("{}: {e}", a.spec.display()))
        } else {
            Failure::Input(format!("{}: {e}", a.spec.display()))
        }
    })?;
    let mut m = RunManifest::new("compile", argv);
    m.inputs.push(a.spec.clone());
    emit(&a.common, &write_netlist(&net), m, &[])?;
    info(
        &a.common,
        format!("{} family, {} elements", spec.family(), net.elements.len()),
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, argv: &[String]) -> Outcome {
    let (_, sys) = read_netlist(&a.netlist)?;
    let channels: Vec<&str> = a.channels.iter().map(String::as_str).collect();
    let cfg = SimConfig {
        ln_floor: a.ln_floor,
        ..SimConfig::new(a.grid.dt, a.grid.t_end).recording(&channels)
    };
    let run = simulate(&sys, &cfg).map_err(|e| Failure::Input(e.to_string()))?;

    let mut m = RunManifest::new("simulate", argv);
    m.inputs.push(a.netlist.clone());
    m.config = ResolvedConfig {
        dt: Some(a.grid.dt),
        t_end: Some(a.grid.t_end),
        ln_floor: Some(a.ln_floor),
        ..ResolvedConfig::default()
    };
    if let Some(b) = run.blow_up {
        let note = format!(
            "solution exceeded the representable range; waveform truncated at step {} (t = {})",
            b.step, b.t
        );
        eprintln!("warning: {note}");
        m.notes.push(note);
    }
    m.notes
        .push(format!("passivity_violation_steps={}", run.passivity_violation_steps));
    m.notes
        .push(format!("ln_clamp_activations={}", run.ln_clamp_activations));

    let mut extra = Vec::new();
    if let (true, Some(out)) = (a.plot, &a.common.out) {
        let cols: Vec<(usize, &str)> = run
            .waveform
            .channel_names()
            .iter()
            .enumerate()
            .map(|(i, n)| (i + 2, n.as_str()))
            .collect();
        extra.push((sibling(out, ".gp"), gnuplot_script(out, "circuit waveform", &cols)));
    }
    emit(&a.common, &run.waveform.to_csv_string(), m, &extra)?;
    info(&a.common, format!("samples: {}", run.waveform.len()));
    info(
        &a.common,
        format!("passivity_violation_steps: {}", run.passivity_violation_steps),
    );
    info(&a.common, format!("ln_clamp_activations: {}", run.ln_clamp_activations));
    if run.passivity_violation_steps > 0 {
        eprintln!(
            "warning: negative memductance during {} steps; a passive memristor cannot realize this",
            run.passivity_violation_steps
        );
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs, argv: &[String]) -> Outcome {
    let spec = read_spec(&a.spec)?;
    let ide = IdeSpec::from_equation(&spec).map_err(oracle_failure)?;
    let run = solve_ide(&ide, a.grid.dt, a.grid.t_end).map_err(oracle_failure)?;

    let deviation = match &a.against {
        Some(path) => {
            let text = read(path)?;
            let circuit =
                Waveform::read_csv(text.as_bytes()).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let err = relative_error(&circuit, &run.waveform, "output")
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Some(err.max())
        }
        None => None,
    };

    let mut m = RunManifest::new("oracle", argv);
    m.inputs.push(a.spec.clone());
    m.inputs.extend(a.against.clone());
    m.config = ResolvedConfig {
        dt: Some(a.grid.dt),
        t_end: Some(a.grid.t_end),
        ..ResolvedConfig::default()
    };
    if let Some(t) = run.blow_up_at {
        let note = format!("solution exceeded the representable range; waveform truncated at t = {t}");
        eprintln!("warning: {note}");
        m.notes.push(note);
    }
    if let Some(d) = deviation {
        m.notes.push(format!("max_relative_deviation={d:e}"));
    }
    let mut extra = Vec::new();
    if let (true, Some(out)) = (a.plot, &a.common.out) {
        extra.push((
            sibling(out, ".gp"),
            gnuplot_script(out, "direct solution", &[(2, "output")]),
        ));
    }
    emit(&a.common, &run.waveform.to_csv_string(), m, &extra)?;
    if let Some(d) = deviation {
        // Always shown: it is the result the caller asked for.
        println!("max_relative_deviation: {d:.6e}");
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Input(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Internal(e.to_string()))
}

fn cmd_stability(a: StabilityArgs, argv: &[String]) -> Outcome {
    let (net, _) = read_netlist(&a.netlist)?;
    let cfg = ToleranceConfig {
        max_relative_error: a.tolerance,
        iterations: a.iterations,
        master_seed: a.seed,
        distribution: a.distribution.into(),
        ..ToleranceConfig::default()
    };
    let sim = SimConfig {
        ln_floor: a.ln_floor,
        ..SimConfig::new(a.grid.dt, a.grid.t_end)
    };
    let pool = thread_pool()?;
    let report = pool
        .install(|| stability_run(&net, &cfg, &sim))
        .map_err(|e| Failure::Input(e.to_string()))?;

    let mut m = RunManifest::new("stability", argv);
    m.inputs.push(a.netlist.clone());
    m.config = ResolvedConfig {
        dt: Some(a.grid.dt),
        t_end: Some(a.grid.t_end),
        seed: Some(a.seed),
        tolerance: Some(a.tolerance),
        iterations: Some(a.iterations),
        distribution: Some(cfg.distribution.name().into()),
        ln_floor: Some(a.ln_floor),
        ..ResolvedConfig::default()
    };
    if report.unstable {
        m.notes.push("unstable: too many iterations blew up or failed".into());
    }
    let summary = report.summary();
    let mut extra = Vec::new();
    if let Some(out) = &a.common.out {
        extra.push((sibling(out, ".summary.txt"), summary.clone()));
        if a.plot {
            let cols = [(2, "mean"), (3, "p10"), (4, "p90")];
            extra.push((sibling(out, ".gp"), gnuplot_script(out, "relative error", &cols)));
        }
    }
    emit(&a.common, &report.to_csv_string(), m, &extra)?;
    if !a.common.quiet {
        eprint!("{summary}");
    }
    let terminal = report.terminal_mean().map_or("n/a".into(), |x| format!("{x:.6e}"));
    if a.common.out.is_some() || !a.common.quiet {
        println!("terminal_mean_rel_err: {terminal}");
    }
    Ok(())
}

fn cmd_convergence(a: ConvergenceArgs, argv: &[String]) -> Outcome {
    let spec = read_spec(&a.spec)?;
    let ide = IdeSpec::from_equation(&spec).map_err(oracle_failure)?;
    let table = convergence_study(&ide, &a.dts, a.t_end).map_err(oracle_failure)?;

    let mut csv = String::from("dt,terminal,richardson\n");
    for r in &table.rows {
        let rich = r.richardson.map_or(String::new(), |x| format!("{x:.12e}"));
        writeln!(csv, "{:.12e},{:.12e},{rich}", r.dt, r.terminal).unwrap();
    }
    let mut m = RunManifest::new("convergence", argv);
    m.inputs.push(a.spec.clone());
    m.config = ResolvedConfig {
        t_end: Some(a.t_end),
        dts: a.dts.clone(),
        ..ResolvedConfig::default()
    };
    if let Some(p) = table.observed_order {
        m.notes.push(format!("observed_order={p}"));
    }
    emit(&a.common, &csv, m, &[])?;
    let order = table.observed_order.map_or("n/a".into(), |p| format!("{p:.4}"));
    info(&a.common, format!("observed_order: {order}"));
    Ok(())
}
