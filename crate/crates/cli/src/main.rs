//! `nanoring`: run ring-emitter experiments from a JSON config or flags.
//!
//! ```text
//! nanoring spectrum --n 8 --d 0.1 --pol transverse
//! nanoring scaling --manifold 1 --d 0.05,0.1 --n 4..16
//! nanoring disorder --n 8 --d 0.4 --kind radial --max-shift 0.4d --realizations 100 --seed 7
//! nanoring validate --config run.json
//! ```
//!
//! Flags override values from `--config`. Results, the echoed config and a
//! `manifest.json` land in `--output-dir`. Exit status is 0 on success, 1 for
//! configuration errors and 2 when the computation fails.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, ConfigFile, Grid, Threads};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(name = "nanoring", version, about = "Collective radiation of dipole-coupled emitter rings")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Single- or two-excitation eigenmodes of one ring.
    Spectrum(Opts),
    /// Mode shifts and rates as the dipoles tilt out of the ring plane.
    AngleSweep(Opts),
    /// Smallest decay rate against ring size, with exponential fits.
    Scaling(Opts),
    /// Subradiant decay averaged over positional disorder.
    Disorder(Opts),
    /// Wave-packet transfer between two rings and mode-coupling tables.
    Transport(Opts),
    /// Best coupling efficiency against ring separation.
    Efficiency(Opts),
    /// Emitted intensity on a far-field sphere or a near-field plane.
    Field(Opts),
    /// Run the command named in the config file.
    Run(Opts),
    /// Check a configuration and report injected defaults without running.
    Validate(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment for `run` and `validate` when the file names none.
    #[arg(long)]
    command: Option<String>,
    /// Sites per ring (grid for `scaling`).
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Sites on the second ring.
    #[arg(long)]
    n2: Option<usize>,
    /// Nearest-neighbour spacing in wavelengths (grid for `scaling`).
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    /// transverse, tangential, radial, magic or tilted:<phi>.
    #[arg(long)]
    pol: Option<String>,
    /// Tilt angles for `angle-sweep`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long)]
    manifold: Option<u8>,
    /// angular, radial or vertical.
    #[arg(long)]
    kind: Option<String>,
    /// Disorder amplitudes; `0.4d` means 0.4 times the spacing.
    #[arg(long, allow_hyphen_values = true)]
    max_shift: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    n_times: Option<usize>,
    /// Minimal site distance between two rings.
    #[arg(long, allow_hyphen_values = true)]
    gap: Option<f64>,
    /// Ring separations for `efficiency`.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    target_m: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    dtheta: Option<f64>,
    /// ring, two-ring or lhc.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    n_outer: Option<usize>,
    #[arg(long)]
    n_rings_outer: Option<usize>,
    /// super or sub, per ring or once for all.
    #[arg(long)]
    state: Option<String>,
    /// sphere or plane.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z_offset: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    extent: Option<f64>,
    /// Grid points as `a,b`.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Worker count or `auto`; falls back to NANORING_THREADS.
    #[arg(long)]
    threads: Option<String>,
}

enum Failure {
    Config(Vec<String>),
    Numerical(String),
}

fn load(opts: &Opts) -> Result<ConfigFile, Failure> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?;
            ConfigFile::from_json(&text).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?
        }
        None => ConfigFile::default(),
    };
    let grid = |s: &Option<String>| s.clone().map(Grid::Text);
    macro_rules! set {
        ($($field:ident = $value:expr),* $(,)?) => {
            $(if let Some(v) = $value { cfg.$field = Some(v); })*
        };
    }
    set!(
        command = opts.command.clone(),
        n = grid(&opts.n),
        n2 = opts.n2,
        d = grid(&opts.d),
        pol = opts.pol.clone(),
        phi = grid(&opts.phi),
        manifold = opts.manifold,
        kind = opts.kind.clone(),
        max_shift = grid(&opts.max_shift),
        realizations = opts.realizations,
        seed = opts.seed,
        t_min = opts.t_min,
        t_max = opts.t_max,
        n_times = opts.n_times,
        gap = opts.gap,
        x = grid(&opts.x),
        m = opts.m,
        target_m = opts.target_m,
        dtheta = opts.dtheta,
        layout = opts.layout.clone(),
        n_outer = opts.n_outer,
        n_rings_outer = opts.n_rings_outer,
        state = opts.state.clone(),
        map = opts.map.clone(),
        radius = opts.radius,
        z_offset = opts.z_offset,
        extent = opts.extent,
        output_dir = opts.output_dir.clone(),
    );
    if let Some(r) = &opts.resolution {
        cfg.resolution = Some(parse_pair(r).map_err(|e| Failure::Config(vec![format!("resolution: {e}")]))?);
    }
    if let Some(t) = &opts.threads {
        cfg.threads = Some(t.parse::<Threads>().map_err(|e| Failure::Config(vec![format!("threads: {e}")]))?);
    }
    Ok(cfg)
}

fn parse_pair(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok([a, b]),
            _ => Err(format!("expected two counts, got '{s}'")),
        },
        _ => Err(format!("expected two counts, got '{s}'")),
    }
}

fn resolve_command(cfg: &ConfigFile, requested: Option<Command>) -> Result<Command, Failure> {
    match (requested, cfg.command.as_deref()) {
        (Some(c), _) => Ok(c),
        (None, Some(name)) => name.parse().map_err(|e| Failure::Config(vec![format!("command: {e}")])),
        (None, None) => Err(Failure::Config(vec!["command: is required for run and validate".into()])),
    }
}

/// Worker count from the config, else NANORING_THREADS, else all cores.
fn thread_count(cfg: &ConfigFile) -> Result<usize, Failure> {
    let auto = || std::thread::available_parallelism().map_or(1, |n| n.get());
    match cfg.threads {
        Some(Threads::Count(n)) => Ok(n),
        Some(Threads::Auto(_)) | None => match std::env::var("NANORING_THREADS") {
            Ok(v) => match v.parse::<Threads>() {
                Ok(Threads::Count(n)) if n > 0 => Ok(n),
                Ok(_) if v.trim() == "auto" => Ok(auto()),
                _ => Err(Failure::Config(vec![format!("NANORING_THREADS: expected a positive count or 'auto', got '{v}'")])),
            },
            Err(_) => Ok(auto()),
        },
    }
}

fn experiment(opts: &Opts, requested: Option<Command>) -> Result<(), Failure> {
    let mut cfg = load(opts)?;
    let cmd = resolve_command(&cfg, requested)?;
    for field in cfg.unused_fields(cmd) {
        log::warn!("{field} is not used by {cmd}");
    }
    cfg.inject_defaults(cmd);
    let plan = cfg.plan(cmd).map_err(Failure::Config)?;
    let threads = thread_count(&cfg)?;
    let dir = cfg.output_dir.clone().expect("default injected");
    let outcome = run::execute(&plan, &cfg, &dir, threads).map_err(|e| Failure::Numerical(e.to_string()))?;
    match outcome.error {
        None => {
            log::info!("wrote {} files to {}", outcome.files.len(), dir.display());
            Ok(())
        }
        Some(e) => Err(Failure::Numerical(format!("{e} (partial results and manifest in {})", dir.display()))),
    }
}

fn validate(opts: &Opts) -> Result<(), Failure> {
    let mut cfg = load(opts)?;
    let cmd = resolve_command(&cfg, None)?;
    let unused = cfg.unused_fields(cmd);
    let notes = cfg.inject_defaults(cmd);
    let plan = cfg.plan(cmd);
    if let Err(Failure::Config(errors)) = thread_count(&cfg) {
        return Err(Failure::Config(errors));
    }
    match plan {
        Ok(_) => {
            println!("OK");
            for n in notes {
                println!("default injected: {n}");
            }
            for f in unused {
                println!("warning: {f} is not used by {cmd}");
            }
            Ok(())
        }
        Err(errors) => Err(Failure::Config(errors)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Sub::Spectrum(o) => experiment(o, Some(Command::Spectrum)),
        Sub::AngleSweep(o) => experiment(o, Some(Command::AngleSweep)),
        Sub::Scaling(o) => experiment(o, Some(Command::Scaling)),
        Sub::Disorder(o) => experiment(o, Some(Command::Disorder)),
        Sub::Transport(o) => experiment(o, Some(Command::Transport)),
        Sub::Efficiency(o) => experiment(o, Some(Command::Efficiency)),
        Sub::Field(o) => experiment(o, Some(Command::Field)),
        Sub::Run(o) => experiment(o, None),
        Sub::Validate(o) => validate(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errors)) => {
            eprintln!("invalid configuration:");
            for e in errors {
                eprintln!("  {e}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
