//! `hjrate`: solve, sweep, check and report from a TOML run config.
//!
//! Exit codes: 0 success, 2 configuration or file error, 3 solver failure,
//! 4 a certificate or an applicable verdict failed.

mod config;
mod fields;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hjrate::experiments::{plot_data, plot_script, report_csv, run_sweep};
use hjrate::hj_first_order::solve_first_order;
use hjrate::hj_viscous::solve_maximal_viscous;
use hjrate::{build_grid, Error};

use config::RunConfig;
use fields::{Check, Status};

const SWEEP_CSV: &str = "sweep.csv";
const PLOT_DATA: &str = "sweep.dat";
const PLOT_SCRIPT: &str = "sweep.gp";
const PLOT_IMAGE: &str = "sweep.png";

#[derive(Parser)]
#[command(name = "hjrate", version, about = "Vanishing-viscosity rates for superquadratic state-constrained HJ equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the field and its certificate.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Viscosity of the maximal viscous solution to compute.
        #[arg(long, value_name = "X", conflicts_with = "first_order", required_unless_present = "first_order")]
        epsilon: Option<f64>,
        /// Solve the first-order problem instead.
        #[arg(long)]
        first_order: bool,
    },
    /// Run the epsilon sweep and write the rate report.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute certificates on stored fields.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Summarize the artifacts in the output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
    Verdict(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verdict(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Solver(_) => "solver",
            Failure::Verdict(_) => "verdict",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Verdict(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. }
            | Error::LadderExhausted { .. }
            | Error::NotOnBoundary { .. }
            | Error::OutsideSmoothBand { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

struct Ctx {
    cfg: RunConfig,
    dir: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(dir) = &common.output {
            cfg.output.directory = dir.clone();
        }
        if let Some(n) = common.workers {
            if n == 0 {
                return Err(Failure::Config("--workers must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
        let dir = cfg.output.directory.clone();
        Ok(Self { cfg, dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))
    }
}

fn summarize(checks: &[Check]) -> Result<(), Failure> {
    let failed: Vec<&str> = checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("failed checks: {}", failed.join(", "))))
    }
}

fn print_checks(label: &str, checks: &[Check]) {
    for c in checks {
        println!("{label} {:<24} {:<5} value {:.6e} bound {:.6e}", c.name, c.status.as_str(), c.value, c.bound);
    }
}

fn solve(ctx: &Ctx, epsilon: Option<f64>) -> Result<(), Failure> {
    let eps = epsilon.unwrap_or(0.0);
    if epsilon.is_some() && !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::Config(format!("--epsilon must be positive, got {eps}")));
    }
    let spec = ctx.cfg.spec(eps)?;
    let grid = Arc::new(build_grid(&spec.domain, ctx.cfg.grid_step(eps)?)?);
    let (u, checks, field, cert) = if epsilon.is_some() {
        let r = solve_maximal_viscous(&spec, &grid, &ctx.cfg.viscous_scheme())?;
        let checks = fields::viscous_checks(&r.u_eps, &spec)?;
        (r.u_eps, checks, fields::VISCOUS_FIELD, fields::VISCOUS_CERT)
    } else {
        let r = solve_first_order(&spec, &grid, &ctx.cfg.first_order_scheme())?;
        let checks = fields::first_order_checks(&r.u, &spec)?;
        (r.u, checks, fields::FIRST_ORDER_FIELD, fields::FIRST_ORDER_CERT)
    };
    ctx.write(field, &fields::write_field(&u, eps, &ctx.cfg))?;
    ctx.write(cert, &fields::certificate_text(&checks, &ctx.cfg, "hjrate certificate"))?;
    println!("wrote {} ({} nodes, h = {:e})", ctx.dir.join(field).display(), grid.n_active(), grid.h());
    print_checks(cert, &checks);
    summarize(&checks)
}

fn sweep(ctx: &Ctx) -> Result<(), Failure> {
    let report = run_sweep(&ctx.cfg.plan()?)?;
    let head = fields::header("hjrate sweep", &ctx.cfg);
    ctx.write(SWEEP_CSV, &format!("{head}{}", report_csv(&report)))?;
    if ctx.cfg.output.emit_plot {
        ctx.write(PLOT_DATA, &format!("{head}{}", plot_data(&report)))?;
        ctx.write(PLOT_SCRIPT, &format!("{head}{}", plot_script(&report, PLOT_DATA, PLOT_IMAGE)))?;
    }
    println!("wrote {}", ctx.dir.join(SWEEP_CSV).display());
    if let Some(fit) = report.fit {
        println!("fitted slope {:.4} (r^2 {:.4}, {} rows)", fit.slope, fit.r_squared, fit.rows_used);
    }
    for v in &report.verdicts {
        println!("{:<12} {:<16} {}", v.name, v.outcome.as_str(), v.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.verdicts.iter().filter(|v| !v.acceptable()).map(|v| v.name).collect();
        Err(Failure::Verdict(format!("verdicts not passed: {}", failed.join(", "))))
    }
}

fn check(ctx: &Ctx) -> Result<(), Failure> {
    let mut all = Vec::new();
    let mut found = false;
    for (field, cert, viscous) in [
        (fields::FIRST_ORDER_FIELD, fields::FIRST_ORDER_CERT, false),
        (fields::VISCOUS_FIELD, fields::VISCOUS_CERT, true),
    ] {
        let path = ctx.dir.join(field);
        if !path.exists() {
            continue;
        }
        found = true;
        let stored = fields::read_field(&path)?;
        let (spec, u) = fields::restore(&stored, &ctx.cfg)?;
        let checks = if viscous { fields::viscous_checks(&u, &spec)? } else { fields::first_order_checks(&u, &spec)? };
        let text = fields::certificate_text(&checks, &ctx.cfg, "hjrate certificate");
        let same = std::fs::read_to_string(ctx.dir.join(cert)).map(|s| s == text).unwrap_or(false);
        println!("{cert}: {}", if same { "matches stored certificate" } else { "differs from stored certificate" });
        print_checks(cert, &checks);
        all.extend(checks);
    }
    if !found {
        return Err(Failure::Config(format!("no field files in {}; run `hjrate solve` first", ctx.dir.display())));
    }
    summarize(&all)
}

fn report(ctx: &Ctx) -> Result<(), Failure> {
    let mut out = String::new();
    let mut found = false;
    let mut failed = Vec::new();
    let csv = ctx.dir.join(SWEEP_CSV);
    if let Ok(text) = std::fs::read_to_string(&csv) {
        found = true;
        let mut rows = 0;
        let _ = writeln!(out, "{}", csv.display());
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let cells: Vec<&str> = line.splitn(5, ',').collect();
            match cells.as_slice() {
                ["verdict", name, outcome, ineq, detail] => {
                    let _ = writeln!(out, "  {name:<12} {outcome:<16} {} {}", ineq.trim_matches('"'), detail.trim_matches('"'));
                    if matches!(*outcome, "fail" | "inconclusive-fit") {
                        failed.push(name.to_string());
                    }
                }
                [key @ ("fitted_slope" | "r_squared" | "Lambda_lower" | "Lambda_upper"), value] => {
                    let _ = writeln!(out, "  {key} = {value}");
                }
                [eps, ..] if eps.parse::<f64>().is_ok() => rows += 1,
                _ => {}
            }
        }
        let _ = writeln!(out, "  rows = {rows}");
    }
    for cert in [fields::FIRST_ORDER_CERT, fields::VISCOUS_CERT] {
        let path = ctx.dir.join(cert);
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        found = true;
        let _ = writeln!(out, "{}", path.display());
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if let [name, _, _, status] = cells.as_slice() {
                let _ = writeln!(out, "  {name:<24} {status}");
                if *status == "FAIL" {
                    failed.push(name.to_string());
                }
            }
        }
    }
    if !found {
        return Err(Failure::Config(format!("nothing to report in {}", ctx.dir.display())));
    }
    print!("{out}");
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("failed: {}", failed.join(", "))))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { common, epsilon, first_order } => {
            let ctx = Ctx::new(&common)?;
            solve(&ctx, if first_order { None } else { epsilon })
        }
        Command::Sweep { common } => sweep(&Ctx::new(&common)?),
        Command::Check { common } => check(&Ctx::new(&common)?),
        Command::Report { common } => report(&Ctx::new(&common)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hjrate-error code={} kind={} message={:?}", f.code(), f.kind(), f.message());
            ExitCode::from(f.code())
        }
    }
}
