//! `mkg`: run, converge, oracle, asys and report subcommands.
//!
//! Exit status: 0 when every criterion passes, 1 when any fails (or a run
//! aborts), 2 for configuration and usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mkg_core::config::{load_config, load_unvalidated, RunConfig};
use mkg_core::pipeline::{self, Status};
use mkg_core::{oracle, MkgError};

#[derive(Parser)]
#[command(
    name = "mkg",
    version,
    about = "Spherically symmetric Maxwell-Klein-Gordon runs and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: data, evolution, extraction, interior and report.
    Run {
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study at h, h/2, ... starting from the configured grid.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Overrides the Courant number; values above the stable range are
        /// allowed here and reported per level.
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference-solver self-check by name, or `all`.
    Oracle { case: String },
    /// Asymptotic-system battery.
    Asys {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a stored run and check the consistency of its files.
    Report { dir: PathBuf },
}

const OK: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

fn finish(e: &MkgError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if matches!(e, MkgError::Config(_)) { USAGE } else { FAIL })
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<RunConfig, MkgError> {
    let mut cfg = load_config(path)?;
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    Ok(cfg)
}

fn run(config: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(config, out) {
        Ok(c) => c,
        Err(e) => return finish(&e),
    };
    match pipeline::run_pipeline(&cfg) {
        Ok(rep) => {
            print!("{}", rep.render_text());
            println!("outputs in {}", cfg.output.dir.display());
            ExitCode::from(if rep.all_pass() { OK } else { FAIL })
        }
        Err(e) => {
            eprintln!(
                "run aborted; partial outputs and a FAILED marker in {}",
                cfg.output.dir.display()
            );
            finish(&e)
        }
    }
}

fn converge(config: &Path, levels: usize, cfl: Option<f64>, out: Option<PathBuf>) -> ExitCode {
    // the study validates everything except the Courant number itself, so
    // that an unstable one can be demonstrated
    let mut cfg = match load_unvalidated(config) {
        Ok(c) => c,
        Err(e) => return finish(&e),
    };
    if let Some(c) = cfl {
        cfg.scheme.cfl = c;
    }
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    match pipeline::convergence_study(&cfg, levels) {
        Ok(t) => {
            println!(
                "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
                "n_cells", "h", "free_wave", "lorenz", "charge", "frame_id"
            );
            for l in &t.levels {
                println!(
                    "{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}{}",
                    l.n_cells,
                    l.h,
                    l.free_wave_err,
                    l.lorenz_sup,
                    l.charge_drift,
                    l.frame_identity_sup,
                    l.failure.as_ref().map(|f| format!("  UNSTABLE: {f}")).unwrap_or_default()
                );
            }
            for o in &t.orders {
                let p: Vec<String> = o.orders.iter().map(|v| format!("{v:.3}")).collect();
                println!("order {:<15} [{}] {}", o.quantity, p.join(", "), o.note);
            }
            if let Err(e) = std::fs::create_dir_all(&cfg.output.dir)
                .map_err(MkgError::from)
                .and_then(|_| t.csv(&cfg.hash()).write(&cfg.output.dir.join("convergence.csv")))
            {
                return finish(&e);
            }
            let ok = !t.any_unstable() && t.orders.iter().all(|o| o.monotone);
            ExitCode::from(if ok { OK } else { FAIL })
        }
        Err(e) => finish(&e),
    }
}

fn oracle_case(case: &str) -> ExitCode {
    let names: Vec<&str> = if case == "all" {
        oracle::ORACLE_CASES.to_vec()
    } else {
        vec![case]
    };
    let mut ok = true;
    for n in names {
        match oracle::run_case(n) {
            Ok(c) => {
                println!(
                    "{} {} measured {:.6e} tolerance {:.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance
                );
                ok &= c.pass;
            }
            Err(MkgError::Config(m)) => {
                eprintln!("error: {m}; cases: {}, all", oracle::ORACLE_CASES.join(", "));
                return ExitCode::from(USAGE);
            }
            Err(e) => {
                println!("FAIL {n}: {e}");
                ok = false;
            }
        }
    }
    ExitCode::from(if ok { OK } else { FAIL })
}

fn asys(config: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(config, out) {
        Ok(c) => c,
        Err(e) => return finish(&e),
    };
    match pipeline::run_asymptotic(&cfg) {
        Ok((c, _)) => {
            println!("[{}] {}", c.status, c.name);
            for k in &c.checks {
                println!(
                    "  {:<7} {} = {:.6e} ({} {:.3e})",
                    k.status.to_string(),
                    k.name,
                    k.measured,
                    k.relation,
                    k.tolerance
                );
            }
            ExitCode::from(if c.status == Status::Fail { FAIL } else { OK })
        }
        Err(e) => finish(&e),
    }
}

fn report(dir: &Path) -> ExitCode {
    match pipeline::rerender(dir) {
        Ok(r) => {
            print!("{}", r.text);
            for p in &r.problems {
                println!("inconsistent: {p}");
            }
            ExitCode::from(if r.all_pass && r.problems.is_empty() { OK } else { FAIL })
        }
        Err(e) => {
            eprintln!("error: cannot re-render {}: {e}", dir.display());
            ExitCode::from(USAGE)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Converge {
            config,
            levels,
            cfl,
            out,
        } => converge(&config, levels, cfl, out),
        Command::Oracle { case } => oracle_case(&case),
        Command::Asys { config, out } => asys(&config, out),
        Command::Report { dir } => report(&dir),
    }
}
