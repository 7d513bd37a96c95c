use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use amplify::analysis::{analyze, threshold_summary};
use amplify::ensemble::run_ensemble;
use amplify::estimate::estimate_norm_series;
use amplify::export::{render, to_json, write_file, ExportFormat};
use amplify::intervention::{compare_regimes, parse_intervention};
use amplify::portrait::{phase_portrait, Grid, PortraitOptions};
use amplify::presets::{load_preset, PRESET_IDS};
use amplify::propositions::{check_all, check_proposition, parse_override, CheckOptions, PropositionId};
use amplify::scenario::{parse_scenario, ScenarioFile};
use amplify::spectral::build_expectation_map;
use amplify::{Error, FieldError};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "amplify", version, about = "Simulate and analyze amplified inequity processes")]
struct Cli {
    /// Worker threads for Monte Carlo runs (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's ensemble and export its norm series.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Eigenvalues, spectral radius, classification and thresholds.
    Analyze { scenario: PathBuf },
    /// Zero-shock phase portrait of a two-dimensional system.
    Portrait {
        scenario: PathBuf,
        /// Initial conditions per side of the unit grid.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the proposition checks and write one evidence file per check.
    Verify {
        /// P1..P8 or "all".
        #[arg(long, default_value = "all")]
        prop: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Parameter override, key=value (repeatable).
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long, default_value = "evidence")]
        evidence_dir: PathBuf,
    },
    /// Compare the status quo with a disrupt or exploit intervention.
    Intervene {
        scenario: PathBuf,
        #[arg(long)]
        intervention: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical parameter values for the scenario's amplifiers.
    Thresholds { scenario: PathBuf },
    /// Print or save a built-in scenario.
    Preset {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Usage(e.to_string()),
            Error::Scenario(fields) => Failure::Validation(format_fields(&fields)),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn format_fields(fields: &[FieldError]) -> String {
    let mut s = String::from("invalid document:");
    for f in fields {
        s.push_str(&format!("\n  {f}"));
    }
    s
}

type CliResult = Result<(), Failure>;

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("RUN_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("RUN_SEED must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ScenarioFile, Failure> {
    let mut s = parse_scenario(&read(path)?)?;
    if let Some(seed) = env_seed()? {
        s.seed = seed;
    }
    Ok(s)
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(path: &Path, paths: Option<usize>, seed: Option<u64>, out: Option<&Path>, format: Format) -> CliResult {
    let mut s = load_scenario(path)?;
    if let Some(p) = paths {
        s.paths = p;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let spec = s.system()?;
    let ens = run_ensemble(&spec, &s.initial()?, &s.ensemble_config())?;
    let series = estimate_norm_series(&ens, s.norm, s.mode);
    let format = match format {
        Format::Csv => ExportFormat::Csv,
        Format::Json => ExportFormat::Json,
    };
    emit(&render(&series, format)?, out)
}

fn portrait(path: &Path, grid: usize, duration: f64, step: f64, out: Option<&Path>) -> CliResult {
    let s = load_scenario(path)?;
    let map = build_expectation_map(&s.system()?)?;
    if grid == 0 {
        return Err(Failure::Usage("--grid must be at least 1".into()));
    }
    let opts = PortraitOptions { duration, step, ..PortraitOptions::default() };
    let p = phase_portrait(&map, &Grid::unit(grid), opts)?;
    emit(&render(&p, ExportFormat::Csv)?, out)
}

fn verify(prop: &str, seed: Option<u64>, paths: Option<usize>, overrides: &[String], dir: &Path) -> CliResult {
    let mut opts = CheckOptions::default();
    if let Some(s) = seed.or(env_seed()?) {
        opts.seed = s;
    }
    if let Some(p) = paths {
        opts.paths = p;
    }
    for o in overrides {
        let (k, v) = parse_override(o).map_err(|e| Failure::Usage(e.to_string()))?;
        opts.overrides.insert(k, v);
    }
    let checks = if prop.eq_ignore_ascii_case("all") {
        check_all(&opts)?
    } else {
        let id: PropositionId = prop.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        vec![check_proposition(id, &opts)?]
    };
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut failed = Vec::new();
    for c in &checks {
        write_file(&dir.join(format!("{}.json", c.id)), &to_json(c)?)?;
        println!(
            "{} {} rho={:.6} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.evidence.spectral_radius,
            c.statement
        );
        if !c.passed {
            failed.push(c.id.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join(", "))))
    }
}

fn intervene(path: &Path, intervention: &Path, out: Option<&Path>) -> CliResult {
    let s = load_scenario(path)?;
    let iv = parse_intervention(&read(intervention)?)?;
    let report = compare_regimes(&s.system()?, &s.initial()?, &iv, &s.ensemble_config(), s.norm, s.interval)?;
    emit(&to_json(&report)?, out)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate { scenario, paths, seed, out, format } => {
            simulate(&scenario, paths, seed, out.as_deref(), format)
        }
        Command::Analyze { scenario } => {
            let s = load_scenario(&scenario)?;
            emit(&to_json(&analyze(&s.system()?)?)?, None)
        }
        Command::Portrait { scenario, grid, duration, step, out } => {
            portrait(&scenario, grid, duration, step, out.as_deref())
        }
        Command::Verify { prop, seed, paths, overrides, evidence_dir } => {
            verify(&prop, seed, paths, &overrides, &evidence_dir)
        }
        Command::Intervene { scenario, intervention, out } => intervene(&scenario, &intervention, out.as_deref()),
        Command::Thresholds { scenario } => {
            let s = load_scenario(&scenario)?;
            emit(&to_json(&threshold_summary(&s.system()?)?)?, None)
        }
        Command::Preset { id, out } => {
            let s = load_preset(&id).map_err(|_| {
                Failure::Usage(format!("unknown preset `{id}`; known: {}", PRESET_IDS.join(", ")))
            })?;
            let mut text = s.to_json();
            text.push('\n');
            emit(&text, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}
