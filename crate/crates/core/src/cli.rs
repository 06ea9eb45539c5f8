//! Command-line front end.
//!
//! Settings come from flags, from an optional `key=value` file (`--config`),
//! and from a preset, in that order of precedence.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::boundary::BoundaryMode;
use crate::convergence::{run_study, validate_h_list, ConvergenceStudy};
use crate::error::PricingError;
use crate::grid::Grid;
use crate::model::MarketParams;
use crate::oracles::{bs_european_put, crr_american_put, BinomialSpec, BENCHMARK_STEPS};
use crate::solver::{march, SolveReport, SolverConfig, StepRecord, SystemKind};

const DEFAULT_H: f64 = 0.01;
const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_XMAX: f64 = 3.0;
const DEFAULT_K: f64 = 1e-4;
const DEFAULT_CONVERGENCE_K: f64 = 1e-5;
const DEFAULT_H_LIST: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

pub const BOUNDARY_HEADER: &str = "tau,k,e_u,accepted,s_f";
pub const PROFILE_HEADER: &str = "x,S,V,delta,gamma,speed";
pub const CONVERGENCE_HEADER: &str = "h,asset_error,asset_order,delta_error,delta_order";
pub const COMPARE_HEADER: &str = "spot,rkf,rk4,binomial,european";
pub const SWEEP_HEADER: &str = "param,value,max_step,min_step,accepted,rejected,s_f";

#[derive(Debug, Parser)]
#[command(
    name = "frontfix",
    version,
    about = "American put pricer on a front-fixed grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March one configuration to expiry and report boundary, values and Greeks.
    Solve(CommonArgs),
    /// Fixed-step spatial convergence study on halved grids.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated grid sizes, strictly decreasing by factors of 2.
        #[arg(long, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
    },
    /// Adaptive, fixed-step and binomial prices side by side.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Binomial lattice steps.
        #[arg(long)]
        binomial_steps: Option<usize>,
        /// Tolerances for a step-size sweep at the configured h.
        #[arg(long, value_delimiter = ',')]
        tol_sweep: Option<Vec<f64>>,
        /// Grid sizes for a step-size sweep at the configured tolerance.
        #[arg(long, value_delimiter = ',')]
        h_sweep: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Example1,
    Example2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Rkf,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    Full,
    AssetOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    Extrapolated,
    Baseline,
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// File of `key=value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    expiry: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Grid size in log-moneyness.
    #[arg(long)]
    h: Option<f64>,
    /// Truncated far field in log-moneyness.
    #[arg(long)]
    xmax: Option<f64>,
    /// Tolerance of the adaptive scheme.
    #[arg(long)]
    tol: Option<f64>,
    /// Fixed step of the RK4 scheme.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, value_enum)]
    system: Option<SystemArg>,
    /// Sampling distance of the boundary expansion, in grid steps.
    #[arg(long)]
    xbar_mult: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Comma-separated spots for the value table.
    #[arg(long, value_delimiter = ',')]
    spots: Option<Vec<f64>>,
    /// Directory for CSV output; nothing is written without it.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: MarketParams,
    pub x_max: f64,
    pub h: f64,
    pub tol: f64,
    pub k: f64,
    pub use_rk4: bool,
    pub system: SystemKind,
    pub boundary_mode: BoundaryMode,
    pub xbar_multiple: usize,
    pub spots: Vec<f64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn solver_config(&self, rk4: bool) -> SolverConfig {
        let base = if rk4 {
            SolverConfig::rk4(self.k)
        } else {
            SolverConfig::rkf(self.tol)
        };
        SolverConfig {
            xbar_multiple: self.xbar_multiple,
            ..base
                .with_system(self.system)
                .with_boundary_mode(self.boundary_mode)
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.x_max, self.h)?)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Pricing(PricingError),
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Pricing(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        CliError::Pricing(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pricing(PricingError::InvalidParameter { .. } | PricingError::Domain(_)) => 2,
            CliError::Pricing(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Entry point of the binary.
pub fn run() -> i32 {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    run_from(std::env::args_os(), &mut out)
}

/// Parses `args` (program name first) and runs the command, writing reports to `out`.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Solve(common) => resolve(common).and_then(|cfg| cmd_solve(&cfg, out)),
        Command::Convergence { common, h_list } => {
            resolve_with_file(common).and_then(|(cfg, file)| {
                let h_list = match h_list {
                    Some(list) => list,
                    None => match file.get("h-list") {
                        Some(v) => parse_list("h-list", v)?,
                        None => DEFAULT_H_LIST.to_vec(),
                    },
                };
                let k = if cfg.k_explicit {
                    cfg.run.k
                } else {
                    DEFAULT_CONVERGENCE_K
                };
                cmd_convergence(&cfg.run, &h_list, k, out)
            })
        }
        Command::Compare {
            common,
            binomial_steps,
            tol_sweep,
            h_sweep,
        } => resolve_with_file(common).and_then(|(cfg, file)| {
            let steps = match binomial_steps {
                Some(s) => s,
                None => match file.get("binomial-steps") {
                    Some(v) => parse_value("binomial-steps", v)?,
                    None => BENCHMARK_STEPS,
                },
            };
            let tol_sweep = match tol_sweep {
                Some(l) => l,
                None => match file.get("tol-sweep") {
                    Some(v) => parse_list("tol-sweep", v)?,
                    None => Vec::new(),
                },
            };
            let h_sweep = match h_sweep {
                Some(l) => l,
                None => match file.get("h-sweep") {
                    Some(v) => parse_list("h-sweep", v)?,
                    None => Vec::new(),
                },
            };
            cmd_compare(&cfg.run, steps, &tol_sweep, &h_sweep, out)
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `frontfix --help` for usage");
            }
            e.exit_code()
        }
    }
}

const FILE_KEYS: [&str; 20] = [
    "preset",
    "strike",
    "expiry",
    "rate",
    "sigma",
    "h",
    "xmax",
    "tol",
    "k",
    "method",
    "system",
    "xbar-mult",
    "boundary",
    "spots",
    "out-dir",
    "h-list",
    "binomial-steps",
    "tol-sweep",
    "h-sweep",
    "config",
];

/// Reads `key = value` lines; `#` starts a comment. Underscores in keys are
/// treated as dashes.
pub fn parse_config_text(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config line {}: expected key=value, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim().replace('_', "-");
        if !FILE_KEYS.contains(&key.as_str()) || key == "config" {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key `{key}`",
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|s| parse_value(key, s.trim())).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, CliError> {
    T::from_str(v, true).map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
}

struct Resolved {
    run: RunConfig,
    k_explicit: bool,
}

fn resolve(common: CommonArgs) -> Result<RunConfig, CliError> {
    resolve_with_file(common).map(|(r, _)| r.run)
}

fn resolve_with_file(mut a: CommonArgs) -> Result<(Resolved, HashMap<String, String>), CliError> {
    let file = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config_text(&text)?
        }
        None => HashMap::new(),
    };
    macro_rules! fill {
        ($field:ident, $key:literal, $parse:ident) => {
            if a.$field.is_none() {
                if let Some(v) = file.get($key) {
                    a.$field = Some($parse($key, v)?);
                }
            }
        };
    }
    fill!(preset, "preset", parse_enum);
    fill!(strike, "strike", parse_value);
    fill!(expiry, "expiry", parse_value);
    fill!(rate, "rate", parse_value);
    fill!(sigma, "sigma", parse_value);
    fill!(h, "h", parse_value);
    fill!(xmax, "xmax", parse_value);
    fill!(tol, "tol", parse_value);
    fill!(k, "k", parse_value);
    fill!(method, "method", parse_enum);
    fill!(system, "system", parse_enum);
    fill!(xbar_mult, "xbar-mult", parse_value);
    fill!(boundary, "boundary", parse_enum);
    fill!(spots, "spots", parse_list);
    if a.out_dir.is_none() {
        a.out_dir = file.get("out-dir").map(PathBuf::from);
    }

    let preset = a.preset.map(|p| match p {
        Preset::Example1 => MarketParams::example1(),
        Preset::Example2 => MarketParams::example2(),
    });
    let pick = |flag: Option<f64>, from_preset: Option<f64>, name: &str| {
        flag.or(from_preset)
            .ok_or_else(|| CliError::Usage(format!("missing --{name} (or use --preset)")))
    };
    let params = MarketParams::new(
        pick(a.strike, preset.map(|p| p.strike), "strike")?,
        pick(a.expiry, preset.map(|p| p.expiry), "expiry")?,
        pick(a.rate, preset.map(|p| p.rate), "rate")?,
        pick(a.sigma, preset.map(|p| p.sigma), "sigma")?,
    )?;
    let xbar_multiple = a.xbar_mult.unwrap_or(2);
    if xbar_multiple == 0 {
        return Err(CliError::Usage("--xbar-mult must be at least 1".into()));
    }
    let spots = a.spots.unwrap_or_else(|| {
        [8.0, 9.0, 10.0, 11.0, 12.0]
            .iter()
            .map(|f| f * params.strike / 10.0)
            .collect()
    });
    if let Some(bad) = spots.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage(format!(
            "spots must be positive, got {bad}"
        )));
    }
    let run = RunConfig {
        params,
        x_max: a.xmax.unwrap_or(DEFAULT_XMAX),
        h: a.h.unwrap_or(DEFAULT_H),
        tol: a.tol.unwrap_or(DEFAULT_TOL),
        k: a.k.unwrap_or(DEFAULT_K),
        use_rk4: a.method == Some(Method::Rk4),
        system: match a.system {
            Some(SystemArg::AssetOnly) => SystemKind::AssetOnly,
            _ => SystemKind::Full,
        },
        boundary_mode: match a.boundary {
            Some(BoundaryArg::Baseline) => BoundaryMode::Baseline,
            _ => BoundaryMode::Extrapolated,
        },
        xbar_multiple,
        spots,
        out_dir: a.out_dir,
    };
    Ok((
        Resolved {
            run,
            k_explicit: a.k.is_some(),
        },
        file,
    ))
}

fn system_name(s: SystemKind) -> &'static str {
    match s {
        SystemKind::Full => "full",
        SystemKind::AssetOnly => "asset-only",
    }
}

fn scheme_label(cfg: &RunConfig, rk4: bool) -> String {
    if rk4 {
        format!("rk4 k={:e}", cfg.k)
    } else {
        format!("rkf tol={:e}", cfg.tol)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the per-step trace with the documented header.
pub fn write_boundary_csv(path: &Path, trace: &[StepRecord]) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{BOUNDARY_HEADER}")?;
    for r in trace {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.tau,
            r.k,
            r.e_u,
            u8::from(r.accepted),
            r.s_f
        )?;
    }
    f.flush()
}

/// Writes the final profile in physical variables.
pub fn write_profile_csv(path: &Path, report: &SolveReport) -> io::Result<()> {
    let p = &report.profile;
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{PROFILE_HEADER}")?;
    for i in 0..p.len() {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            p.x[i], p.spot[i], p.value[i], p.delta[i], p.gamma[i], p.speed[i]
        )?;
    }
    f.flush()
}

fn write_params(out: &mut dyn Write, cfg: &RunConfig) -> io::Result<()> {
    let p = &cfg.params;
    writeln!(
        out,
        "K = {}  T = {}  r = {}  sigma = {}",
        p.strike, p.expiry, p.rate, p.sigma
    )?;
    writeln!(
        out,
        "grid: x_max = {}  h = {}  system = {}  xbar = {}h",
        cfg.x_max,
        cfg.h,
        system_name(cfg.system),
        cfg.xbar_multiple
    )
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let report = march(&cfg.params, &grid, &cfg.solver_config(cfg.use_rk4))?;
    if let Some(dir) = &cfg.out_dir {
        create_out_dir(dir)?;
        write_boundary_csv(&dir.join("boundary.csv"), &report.trace)?;
        write_profile_csv(&dir.join("profile.csv"), &report)?;
    }

    write_params(out, cfg)?;
    writeln!(out, "scheme: {}", scheme_label(cfg, cfg.use_rk4))?;
    writeln!(out)?;
    let st = &report.stats;
    writeln!(out, "{:<22}{:.6}", "s_f(T)", report.boundary())?;
    writeln!(out, "{:<22}{}", "accepted steps", st.accepted)?;
    writeln!(out, "{:<22}{}", "rejected steps", st.rejected)?;
    writeln!(out, "{:<22}{}", "guard shrinks", st.guard_shrinks)?;
    writeln!(out, "{:<22}{:.3e}", "max accepted step", st.max_step)?;
    writeln!(out, "{:<22}{:.3e}", "min accepted step", st.min_step)?;
    writeln!(
        out,
        "{:<22}{:.3e}",
        "max accepted e_u", st.max_accepted_error
    )?;
    writeln!(out, "{:<22}{}", "violations", report.violations)?;
    writeln!(out, "{:<22}{:.3}s", "wall time", secs(report.wall_time))?;
    writeln!(out)?;
    writeln!(out, "{:>12} {:>14}", "S", "V")?;
    for &s in &cfg.spots {
        writeln!(out, "{:>12.4} {:>14.6}", s, report.value_at(s)?)?;
    }
    if let Some(dir) = &cfg.out_dir {
        writeln!(
            out,
            "\nwrote {} and {}",
            dir.join("boundary.csv").display(),
            dir.join("profile.csv").display()
        )?;
    }
    Ok(())
}

pub fn cmd_convergence(
    cfg: &RunConfig,
    h_list: &[f64],
    k: f64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    validate_h_list(h_list)?;
    let config = SolverConfig {
        xbar_multiple: cfg.xbar_multiple,
        ..SolverConfig::rk4(k)
            .with_system(cfg.system)
            .with_boundary_mode(cfg.boundary_mode)
    };
    let started = Instant::now();
    let study = run_study(&cfg.params, cfg.x_max, h_list, &config)?;
    let elapsed = started.elapsed();
    write_params(out, cfg)?;
    writeln!(
        out,
        "scheme: rk4 k={k:e}  reference h = {}",
        study.reference_h
    )?;
    writeln!(out)?;
    writeln!(
        out,
        "{:>10} {:>14} {:>8} {:>14} {:>8}",
        "h", "asset error", "order", "delta error", "order"
    )?;
    let fmt_order = |o: Option<f64>| o.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    for l in &study.levels {
        writeln!(
            out,
            "{:>10} {:>14.4e} {:>8} {:>14.4e} {:>8}",
            l.h,
            l.asset_error,
            fmt_order(l.asset_order),
            l.delta_error,
            fmt_order(l.delta_order)
        )?;
    }
    writeln!(
        out,
        "\naverage order: asset {:.3}  delta {:.3}",
        study.average_asset_order, study.average_delta_order
    )?;
    writeln!(out, "wall time {:.3}s", secs(elapsed))?;
    if let Some(dir) = &cfg.out_dir {
        create_out_dir(dir)?;
        write_convergence_csv(&dir.join("convergence.csv"), &study)?;
        writeln!(out, "wrote {}", dir.join("convergence.csv").display())?;
    }
    Ok(())
}

pub fn write_convergence_csv(path: &Path, study: &ConvergenceStudy) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{CONVERGENCE_HEADER}")?;
    let opt = |o: Option<f64>| o.map_or_else(String::new, |v| v.to_string());
    for l in &study.levels {
        writeln!(
            f,
            "{},{},{},{},{}",
            l.h,
            l.asset_error,
            opt(l.asset_order),
            l.delta_error,
            opt(l.delta_order)
        )?;
    }
    f.flush()
}

struct SweepRow {
    param: &'static str,
    value: f64,
    report: SolveReport,
}

fn run_sweep(
    cfg: &RunConfig,
    tol_sweep: &[f64],
    h_sweep: &[f64],
) -> Result<Vec<SweepRow>, CliError> {
    let mut jobs: Vec<(&'static str, f64, Grid, SolverConfig)> = Vec::new();
    for &tol in tol_sweep {
        let sc = SolverConfig {
            scheme: crate::solver::TimeScheme::Rkf { tol },
            ..cfg.solver_config(false)
        };
        jobs.push(("tol", tol, cfg.grid()?, sc));
    }
    for &h in h_sweep {
        jobs.push(("h", h, Grid::new(cfg.x_max, h)?, cfg.solver_config(false)));
    }
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(_, _, grid, sc)| scope.spawn(move || march(&cfg.params, grid, sc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });
    jobs.iter()
        .zip(results)
        .map(|((param, value, _, _), r)| {
            Ok(SweepRow {
                param,
                value: *value,
                report: r?,
            })
        })
        .collect()
}

pub fn cmd_compare(
    cfg: &RunConfig,
    binomial_steps: usize,
    tol_sweep: &[f64],
    h_sweep: &[f64],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let rkf_cfg = cfg.solver_config(false);
    let rk4_cfg = cfg.solver_config(true);
    let (rkf, rk4, lattice) = std::thread::scope(|scope| {
        let rkf = scope.spawn(|| march(&cfg.params, &grid, &rkf_cfg));
        let rk4 = scope.spawn(|| march(&cfg.params, &grid, &rk4_cfg));
        let lattice = scope.spawn(|| {
            let started = Instant::now();
            let prices = cfg
                .spots
                .iter()
                .map(|&s| crr_american_put(&BinomialSpec::new(cfg.params, s, binomial_steps)))
                .collect::<crate::error::Result<Vec<f64>>>();
            prices.map(|p| (p, started.elapsed()))
        });
        (
            rkf.join().expect("rkf thread panicked"),
            rk4.join().expect("rk4 thread panicked"),
            lattice.join().expect("binomial thread panicked"),
        )
    });
    let (rkf, rk4, (binomial, binomial_time)) = (rkf?, rk4?, lattice?);

    write_params(out, cfg)?;
    writeln!(
        out,
        "schemes: {} | {} | binomial {} steps",
        scheme_label(cfg, false),
        scheme_label(cfg, true),
        binomial_steps
    )?;
    writeln!(out)?;
    writeln!(
        out,
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "S", "rkf", "rk4", "binomial", "european", "rkf-binom"
    )?;
    let mut rows = Vec::new();
    for (i, &s) in cfg.spots.iter().enumerate() {
        let a = rkf.value_at(s)?;
        let b = rk4.value_at(s)?;
        let eu = bs_european_put(&cfg.params, s)?;
        writeln!(
            out,
            "{:>10.4} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.2e}",
            s,
            a,
            b,
            binomial[i],
            eu,
            a - binomial[i]
        )?;
        rows.push((s, a, b, binomial[i], eu));
    }
    writeln!(out)?;
    writeln!(
        out,
        "{:<10} {:>12} {:>12} {:>12} {:>10}",
        "", "s_f(T)", "max step", "min step", "wall"
    )?;
    for (name, r) in [("rkf", &rkf), ("rk4", &rk4)] {
        writeln!(
            out,
            "{:<10} {:>12.6} {:>12.3e} {:>12.3e} {:>9.3}s",
            name,
            r.boundary(),
            r.stats.max_step,
            r.stats.min_step,
            secs(r.wall_time)
        )?;
    }
    writeln!(
        out,
        "{:<10} {:>12} {:>12} {:>12} {:>9.3}s",
        "binomial",
        "",
        "",
        "",
        secs(binomial_time)
    )?;

    let sweep = run_sweep(cfg, tol_sweep, h_sweep)?;
    if !sweep.is_empty() {
        writeln!(out)?;
        writeln!(
            out,
            "{:<6} {:>10} {:>12} {:>12} {:>9} {:>9} {:>12}",
            "sweep", "value", "max step", "min step", "accepted", "rejected", "s_f(T)"
        )?;
        for row in &sweep {
            let st = &row.report.stats;
            writeln!(
                out,
                "{:<6} {:>10e} {:>12.3e} {:>12.3e} {:>9} {:>9} {:>12.6}",
                row.param,
                row.value,
                st.max_step,
                st.min_step,
                st.accepted,
                st.rejected,
                row.report.boundary()
            )?;
        }
    }

    if let Some(dir) = &cfg.out_dir {
        create_out_dir(dir)?;
        let path = dir.join("compare.csv");
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "{COMPARE_HEADER}")?;
        for (s, a, b, c, d) in rows {
            writeln!(f, "{s},{a},{b},{c},{d}")?;
        }
        f.flush()?;
        if !sweep.is_empty() {
            let path = dir.join("sweep.csv");
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            writeln!(f, "{SWEEP_HEADER}")?;
            for row in &sweep {
                let st = &row.report.stats;
                writeln!(
                    f,
                    "{},{},{},{},{},{},{}",
                    row.param,
                    row.value,
                    st.max_step,
                    st.min_step,
                    st.accepted,
                    st.rejected,
                    row.report.boundary()
                )?;
            }
            f.flush()?;
        }
        writeln!(out, "\nwrote CSV files to {}", dir.display())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("frontfix")
            .chain(list.iter().copied())
            .map(String::from)
            .collect()
    }

    fn common(list: &[&str]) -> CommonArgs {
        match Cli::try_parse_from(args(&[&["solve"], list].concat()))
            .unwrap()
            .command
        {
            Command::Solve(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn config_text_parsing() {
        let map = parse_config_text("# header\nstrike = 95 # trailing\n\nxbar_mult=3\n").unwrap();
        assert_eq!(map["strike"], "95");
        assert_eq!(map["xbar-mult"], "3");
        assert!(parse_config_text("nonsense").is_err());
        assert!(parse_config_text("colour = red").is_err());
    }

    #[test]
    fn preset_defaults() {
        let cfg = resolve(common(&["--preset", "example2"])).unwrap();
        assert_eq!(cfg.params, MarketParams::example2());
        assert_eq!(
            (cfg.h, cfg.tol, cfg.x_max, cfg.xbar_multiple),
            (0.01, 1e-8, 3.0, 2)
        );
        assert!(!cfg.use_rk4);
        assert_eq!(cfg.system, SystemKind::Full);
        assert_eq!(cfg.spots, vec![80.0, 90.0, 100.0, 110.0, 120.0]);
    }

    #[test]
    fn flags_override_preset_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "preset = example1\nsigma = 0.25\nh = 0.05\nmethod = rk4\n",
        )
        .unwrap();
        let cfg = resolve(common(&[
            "--config",
            path.to_str().unwrap(),
            "--h",
            "0.02",
            "--system",
            "asset-only",
        ]))
        .unwrap();
        assert_eq!(cfg.params.strike, 100.0);
        assert_eq!(cfg.params.sigma, 0.25);
        assert_eq!(cfg.h, 0.02);
        assert!(cfg.use_rk4);
        assert_eq!(cfg.system, SystemKind::AssetOnly);
    }

    #[test]
    fn missing_market_parameter_is_a_usage_error() {
        let err = resolve(common(&[
            "--strike", "100", "--expiry", "1", "--rate", "0.05",
        ]))
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = resolve(common(&["--preset", "example1", "--sigma=-1"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
        let abort = PricingError::GuardExhausted {
            tau: 0.0,
            step: 1e-13,
            k_min: 1e-12,
        };
        assert_eq!(CliError::from(abort).exit_code(), 3);
        let nan = PricingError::NonFinite {
            field: "u",
            tau: 0.1,
        };
        assert_eq!(CliError::from(nan).exit_code(), 3);
    }

    #[test]
    fn repeated_h_is_rejected_before_any_march() {
        let mut sink = Vec::new();
        let code = run_from(
            args(&[
                "convergence",
                "--preset",
                "example1",
                "--h-list",
                "0.1,0.1,0.05",
            ]),
            &mut sink,
        );
        assert_eq!(code, 2);
        assert!(sink.is_empty());
    }
}
