mod config;
mod manifest;
mod oracle;
mod pipeline;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::error;
use ttn_gibbs::entanglement::{fit_cft_intermediate, fit_low_temperature, OffsetModel, Window, CFT_WINDOW, LOW_T_WINDOW};
use ttn_gibbs::gibbs::t_max_scan;

use crate::config::{SchemaError, Task};
use crate::pipeline::Run;
use crate::table::{read_columns, Cell, Table};

#[derive(Parser)]
#[command(name = "gibbs", version, about = "Low-temperature Gibbs states from tree tensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task listed in the config.
    Run { config: PathBuf },
    /// Write only the exact reference tables of the configured model.
    Oracle { config: PathBuf },
    /// Fit a negativity table (columns T and epsilon_s) and print the parameters as CSV.
    Fit {
        table: PathBuf,
        #[arg(long, value_enum)]
        kind: FitArg,
        /// Subsystem length entering λ = π l T.
        #[arg(long)]
        l: usize,
        /// Central charge held fixed in the low-temperature fit.
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        /// Inclusive λ window as `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = OffsetArg::Constant)]
        offset: OffsetArg,
        /// Column holding the fitted quantity.
        #[arg(long, default_value = "epsilon_s")]
        column: String,
    },
    /// Largest temperature below which two free-energy tables agree within eps.
    Tmax {
        method: PathBuf,
        exact: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Free-energy column of the method table.
        #[arg(long, default_value = "F")]
        column: String,
        /// Free-energy column of the exact table.
        #[arg(long, default_value = "F")]
        exact_column: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitArg {
    Cft,
    #[value(name = "lowT")]
    LowT,
}

#[derive(Clone, Copy, ValueEnum)]
enum OffsetArg {
    Constant,
    Linear,
}

fn read_config(path: &Path) -> anyhow::Result<(config::RunConfig, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = config::load(path)?;
    Ok((cfg, bytes))
}

fn run(path: &Path, only_oracle: bool) -> anyhow::Result<()> {
    let (cfg, bytes) = read_config(path)?;
    let tasks = if only_oracle { vec![Task::Oracle] } else { cfg.tasks.run.clone() };
    let mut run = Run::new(cfg, &bytes)?;
    run.execute(&tasks)?;
    eprintln!("results in {}", run.out_dir().display());
    Ok(())
}

fn fit(
    path: &Path,
    kind: FitArg,
    l: usize,
    c: f64,
    window: Option<Vec<f64>>,
    offset: OffsetArg,
    column: &str,
) -> anyhow::Result<()> {
    let cols = read_columns(path, &["T", column])?;
    let data: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
    let window = match window {
        Some(w) => Window::new(w[0], w[1]).map_err(|e| SchemaError { path: "--window".into(), message: e.to_string() })?,
        None => match kind {
            FitArg::Cft => CFT_WINDOW,
            FitArg::LowT => LOW_T_WINDOW,
        },
    };
    let result = match kind {
        FitArg::Cft => {
            let offset = match offset {
                OffsetArg::Constant => OffsetModel::Constant,
                OffsetArg::Linear => OffsetModel::Linear,
            };
            fit_cft_intermediate(&data, l, window, offset)?
        }
        FitArg::LowT => fit_low_temperature(&data, l, c, window)?,
    };
    let mut t = Table::new(&["parameter", "value", "std_error", "residual_norm", "n_points"]);
    for ((name, v), se) in result.names.iter().zip(&result.values).zip(&result.std_errors) {
        t.push(vec![name.as_str().into(), (*v).into(), (*se).into(), result.residual_norm.into(), result.n_points.into()]);
    }
    print!("{}", String::from_utf8(t.to_bytes()?)?);
    Ok(())
}

fn tmax(method: &Path, exact: &Path, eps: f64, column: &str, exact_column: &str) -> anyhow::Result<()> {
    if !(eps > 0.0) {
        bail!(SchemaError { path: "--eps".into(), message: "must be positive".into() });
    }
    let m = read_columns(method, &["T", column])?;
    let e = read_columns(exact, &["T", exact_column])?;
    if m[0] != e[0] {
        bail!(SchemaError { path: exact.display().to_string(), message: "temperature grids differ".into() });
    }
    let t_max = t_max_scan(&m[0], &m[1], &e[1], eps)?;
    let mut t = Table::new(&["eps", "T_max"]);
    t.push(vec![Cell::from(eps), Cell::from(t_max)]);
    print!("{}", String::from_utf8(t.to_bytes()?)?);
    Ok(())
}

/// 2 for bad input, 1 for I/O, 3 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<SchemaError>().is_some() || cause.downcast_ref::<clap::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ttn_gibbs::Error>() {
            return match e {
                ttn_gibbs::Error::Io(_) => 1,
                e if e.is_usage() => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 1;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("GIBBS_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("thread pool: {e}");
        }
    }
    let res = match cli.command {
        Command::Run { config } => run(&config, false),
        Command::Oracle { config } => run(&config, true),
        Command::Fit { table, kind, l, c, window, offset, column } => fit(&table, kind, l, c, window, offset, &column),
        Command::Tmax { method, exact, eps, column, exact_column } => tmax(&method, &exact, eps, &column, &exact_column),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
