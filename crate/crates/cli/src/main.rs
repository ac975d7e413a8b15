//! `eiv`: command-line front end for the simulation designs and the
//! real-data bootstrap analysis.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use eiv_core::analyze::{analyze_dataset, render_report, AnalysisOptions, ColumnSpec};
use eiv_core::simlab::{
    builtin_scenario, builtin_scenarios, emit_table, run_scenario_with_progress, OutputFormat,
    ScenarioConfig,
};
use eiv_core::{Error, ErrorKind, Estimator};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "eiv", version, about = "Robust regression under errors in variables", arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed (defaults to the scenario seed, 20200301 for builtins)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format: csv or json
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    /// Write output here instead of standard output; a run manifest is written next to it
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite an existing --out file
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a builtin or JSON-defined simulation design
    Simulate(SimulateArgs),
    /// Run a builtin design with its reference settings
    Table(TableArgs),
    /// Fit OLS and a robust estimator to a CSV file with bootstrap standard errors
    Analyze(AnalyzeArgs),
    /// List the builtin designs
    ListScenarios,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Builtin name (table2 ... table7, appendix) or path to a JSON scenario
    #[arg(long)]
    scenario: String,
    /// Sample sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Replications per sample size
    #[arg(long)]
    reps: Option<usize>,
    /// Estimators, comma separated (e.g. ols,mm,detmcd,dets)
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// 2 ... 7 or appendix
    which: String,
    /// Replications per sample size
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Input CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Response column
    #[arg(long)]
    response: String,
    /// Regressor columns, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    regressors: Vec<String>,
    /// Columns to log: all, none, or a comma-separated list
    #[arg(long, default_value = "all")]
    log: String,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 1000)]
    boot: usize,
    /// Robust estimator to bootstrap
    #[arg(long, default_value = "DetMCD")]
    estimator: Estimator,
    /// Reference estimator for the difference
    #[arg(long, default_value = "OLS")]
    compare: Estimator,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command_line: String,
    seed: u64,
    id: String,
    started_at: String,
    finished_at: String,
    artifacts: Vec<PathBuf>,
    version: String,
}

struct Output {
    body: String,
    seed: u64,
    id: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(out) = &g.out {
        if out.exists() && !g.force {
            return Err(Failure::Usage(format!(
                "{} exists; pass --force to overwrite",
                out.display()
            )));
        }
    }
    let started = now();
    let output = match &cli.command {
        Command::ListScenarios => {
            print!("{}", list_scenarios());
            return Ok(());
        }
        Command::Simulate(a) => {
            let mut cfg = load_scenario(&a.scenario)?;
            if let Some(n) = &a.n {
                cfg.n = n.clone();
            }
            if let Some(e) = &a.estimators {
                cfg.estimators = e.clone();
            }
            simulate(cfg, a.reps, g)?
        }
        Command::Table(a) => {
            let cfg = builtin_scenario(&a.which)?;
            simulate(cfg, a.reps, g)?
        }
        Command::Analyze(a) => analyze(a, g)?,
    };
    match &g.out {
        None => print!("{}", output.body),
        Some(out) => {
            std::fs::write(out, &output.body)?;
            let manifest = RunManifest {
                command_line: command_line(),
                seed: output.seed,
                id: output.id,
                started_at: started,
                finished_at: now(),
                artifacts: vec![out.clone()],
                version: env!("CARGO_PKG_VERSION").into(),
            };
            let path = manifest_path(out);
            let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
            std::fs::write(&path, text + "\n")?;
            eprintln!("wrote {} and {}", out.display(), path.display());
        }
    }
    Ok(())
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| {
            std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
        })?;
        Ok(ScenarioConfig::from_json(&text)?)
    } else {
        Ok(builtin_scenario(arg)?)
    }
}

fn simulate(mut cfg: ScenarioConfig, reps: Option<usize>, g: &Global) -> Result<Output, Failure> {
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let name = cfg.name.clone();
    let step = (cfg.replications / 10).max(1);
    let rows = run_scenario_with_progress(&cfg, &|n, done, total| {
        if done % step == 0 || done == total {
            eprintln!("[{name} n={n}] {done}/{total}");
        }
    })?;
    Ok(Output {
        body: emit_table(&rows, g.format)?,
        seed: cfg.seed,
        id: cfg.name,
    })
}

fn analyze(a: &AnalyzeArgs, g: &Global) -> Result<Output, Failure> {
    let regressors: Vec<&str> = a.regressors.iter().map(String::as_str).collect();
    let mut spec = ColumnSpec::new(&a.response, &regressors);
    match a.log.trim().to_ascii_lowercase().as_str() {
        "all" => spec = spec.log_all(),
        "none" => {}
        _ => {
            spec.log_transform = a
                .log
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect()
        }
    }
    let opts = AnalysisOptions {
        estimator: a.estimator,
        compare: a.compare,
        n_boot: a.boot,
        seed: g.seed.unwrap_or(AnalysisOptions::default().seed),
    };
    if !a.data.is_file() {
        let e = std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", a.data.display()),
        );
        return Err(e.into());
    }
    eprintln!("[analyze] {} with {} bootstrap resamples", a.data.display(), a.boot);
    let report = analyze_dataset(&a.data, &spec, &opts)?;
    Ok(Output {
        body: render_report(&report, g.format)?,
        seed: opts.seed,
        id: a.data.display().to_string(),
    })
}

fn list_scenarios() -> String {
    let mut out = String::new();
    for s in builtin_scenarios() {
        let n: Vec<String> = s.n.iter().map(usize::to_string).collect();
        let e: Vec<&str> = s.estimators.iter().map(|e| e.name()).collect();
        out += &format!(
            "{}\tn={}\treps={}\testimators={}\n",
            s.name,
            n.join(","),
            s.replications,
            e.join(",")
        );
    }
    out
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn command_line() -> String {
    std::env::args()
        .map(|a| {
            if a.is_empty() || a.contains(|c: char| c.is_whitespace() || c == '\'' || c == '"') {
                format!("'{}'", a.replace('\'', r"'\''"))
            } else {
                a
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
