//! `cp1b`: runs one experiment from a config file and writes `report.json`,
//! CSV files, `config.echo.toml` and `manifest.json` into the output
//! directory.
//!
//! Exit status: 0 on success, 2 on a config or validation error, 3 on a
//! runtime failure (including a failed self-test).

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use cp1_brownian::Error;
use serde_json::json;

use config::RunFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Sub {
    Walk,
    Lyapunov,
    Contraction,
    Bm,
    Fls,
    Dichotomy,
    Cesaro,
    Harmonic,
    Ek,
    Occupation,
    Selftest,
}

impl Sub {
    fn name(self) -> &'static str {
        match self {
            Sub::Walk => "walk",
            Sub::Lyapunov => "lyapunov",
            Sub::Contraction => "contraction",
            Sub::Bm => "bm",
            Sub::Fls => "fls",
            Sub::Dichotomy => "dichotomy",
            Sub::Cesaro => "cesaro",
            Sub::Harmonic => "harmonic",
            Sub::Ek => "ek",
            Sub::Occupation => "occupation",
            Sub::Selftest => "selftest",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cp1b", version, about = "Brownian paths, random walks and developing maps on CP1")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Sub,
    /// TOML config (JSON when the name ends in .json). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "CP1B_OUT_DIR")]
    out: Option<PathBuf>,
    /// Overrides the seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing report files.
    #[arg(long)]
    force: bool,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

const DEFAULT_SEED: u64 = 20261016;
const MANIFEST_SCHEMA: &str = "cp1b-manifest/1";

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = format!("{}: {e}", e.name());
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidMeasure(_)
            | Error::WindowInvalid { .. }
            | Error::StepTooLarge(_)
            | Error::StartOutsideDisc(_)
            | Error::BadRadii(_)
            | Error::InvalidFlsConfig(_)
            | Error::StartOutsideV { .. }
            | Error::UnsupportedStructure(_)
            | Error::EmptyTail(_)
            | Error::UnknownSymbol(_)
            | Error::SingularMatrix { .. } => Failure::Validation(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

fn load<T: RunFile + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => load_required(Some(p)),
    }
}

fn load_required<T: RunFile>(path: Option<&Path>) -> Result<T, Failure> {
    let (text, json) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", p.display())))?,
            p.extension().is_some_and(|x| x == "json"),
        ),
        None => (String::new(), false),
    };
    config::parse(&text, json).map_err(|e| {
        let at = path.map(|p| p.display().to_string()).unwrap_or_else(|| "<default config>".into());
        Failure::Validation(format!("ConfigInvalid in {at}: {e}"))
    })
}

struct Prepared<T> {
    cfg: T,
    seed: u64,
}

fn prepare<T: RunFile>(mut cfg: T, cli: &Cli) -> Result<Prepared<T>, Failure> {
    let seed = cli.seed.or(cfg.seed()).unwrap_or(DEFAULT_SEED);
    cfg.set_seed(seed);
    if let Some(w) = cfg.workers() {
        if w == 0 {
            return Err(Failure::Validation("ConfigInvalid: workers must be positive".into()));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    Ok(Prepared { cfg, seed })
}

fn execute<T: RunFile>(
    cli: &Cli,
    p: Prepared<T>,
    run: impl FnOnce(&T, u64) -> cp1_brownian::Result<commands::Output>,
) -> Result<bool, Failure> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("cp1b-out").join(cli.subcommand.name()));
    let echo = toml::to_string(&p.cfg).map_err(|e| Failure::Runtime(format!("cannot echo config: {e}")))?;
    let started = Instant::now();
    if cli.verbose > 0 {
        eprintln!("cp1b {}: seed {}, writing to {}", cli.subcommand.name(), p.seed, out.display());
    }
    let result = run(&p.cfg, p.seed)?;
    let mut files: Vec<(String, Vec<u8>)> = vec![(
        "report.json".into(),
        serde_json::to_vec_pretty(&result.report).map_err(|e| Failure::Runtime(e.to_string()))?,
    )];
    files.extend(result.csvs);
    files.push(("config.echo.toml".into(), echo.into_bytes()));
    let manifest = json!({
        "schema": MANIFEST_SCHEMA,
        "subcommand": cli.subcommand.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": p.seed,
        "config": serde_json::to_value(&p.cfg).map_err(|e| Failure::Runtime(e.to_string()))?,
        "config_echo": "config.echo.toml",
        "files": files.iter().map(|(n, b)| json!({"name": n, "bytes": b.len()})).collect::<Vec<_>>(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "passed": result.ok,
    });
    files.push(("manifest.json".into(), serde_json::to_vec_pretty(&manifest).expect("json")));
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("Io: cannot create {}: {e}", out.display())))?;
    for (name, bytes) in &files {
        std::fs::write(out.join(name), bytes).map_err(|e| Failure::Runtime(format!("Io: {name}: {e}")))?;
    }
    if cli.verbose > 0 {
        eprintln!("cp1b {}: done in {:.2}s", cli.subcommand.name(), started.elapsed().as_secs_f64());
    }
    Ok(result.ok)
}

fn check_overwrite(cli: &Cli) -> Result<(), Failure> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("cp1b-out").join(cli.subcommand.name()));
    if !cli.force && out.join("report.json").exists() {
        return Err(Failure::Validation(format!(
            "refusing to overwrite {}; pass --force",
            out.join("report.json").display()
        )));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<bool, Failure> {
    check_overwrite(cli)?;
    let path = cli.config.as_deref();
    match cli.subcommand {
        Sub::Walk | Sub::Lyapunov | Sub::Contraction => {
            let p = prepare(load::<config::WalkFile>(path)?, cli)?;
            let run = match cli.subcommand {
                Sub::Walk => commands::walk,
                Sub::Lyapunov => commands::lyapunov,
                _ => commands::contraction,
            };
            execute(cli, p, run)
        }
        Sub::Bm => {
            let p = prepare(load_required::<config::BmFile>(path)?, cli)?;
            execute(cli, p, commands::bm)
        }
        Sub::Fls => {
            let p = prepare(load_required::<config::FlsFile>(path)?, cli)?;
            execute(cli, p, commands::fls)
        }
        Sub::Dichotomy | Sub::Cesaro | Sub::Harmonic | Sub::Ek | Sub::Occupation => {
            let p = prepare(load::<config::ExperimentFile>(path)?, cli)?;
            p.cfg.experiment.validate()?;
            let name = cli.subcommand.name();
            execute(cli, p, |c, _| commands::experiment(name, c))
        }
        Sub::Selftest => {
            let p = prepare(load::<config::SelftestFile>(path)?, cli)?;
            execute(cli, p, commands::selftest)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: {} checks failed; see report.json", cli.subcommand.name());
            ExitCode::from(3)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
