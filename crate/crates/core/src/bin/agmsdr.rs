use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use agmsdr::bench::{
    compare, run_pd, run_spec, write_compare_csv, write_pd_csv, write_run_csv, Align, BenchError, ConstraintFile,
    Method, ProblemKind, ProblemSpec, RunSpec,
};
use agmsdr::primal_dual::PdConfig;

#[derive(Parser)]
#[command(
    name = "agmsdr",
    version,
    about = "Accelerated methods with small-dimensional relaxation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one problem and write its trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Method,
    },
    /// Run several methods on one problem and write a long-format trace.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Repeat for each method to compare.
        #[arg(long, required = true)]
        method: Vec<Method>,
        /// iterations, oracle_calls or time.
        #[arg(long, default_value = "iterations")]
        align: Align,
    },
    /// Solve a linearly constrained problem through its dual.
    Pd {
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long = "max-iter", default_value_t = 5000)]
        max_iter: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: usize,
    #[arg(long = "grad-tol")]
    grad_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Fill the time_s column (makes the output run-dependent).
    #[arg(long = "wall-time")]
    wall_time: bool,
}

impl Common {
    fn spec(&self, method: Method) -> RunSpec {
        RunSpec {
            problem: ProblemSpec {
                kind: self.problem,
                n: self.n,
                l: self.l,
                mu: self.mu,
                seed: self.seed,
            },
            method,
            eps: self.eps,
            gamma: self.gamma,
            radius: self.r,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
        }
    }
}

fn open_output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn init_logging() {
    let level = std::env::var("AGMSDR_LOG").unwrap_or_else(|_| "off".into());
    let filter = match level.as_str() {
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new()
        .filter_level(filter)
        .target(env_logger::Target::Stderr)
        .init();
}

fn execute(cmd: Command) -> Result<(), BenchError> {
    match cmd {
        Command::Run { common, method } => {
            let trace = run_spec(&common.spec(method))?;
            info!(
                "{} on {}: {:?}, f = {:e}",
                trace.method, trace.problem, trace.status, trace.f_final
            );
            let mut out = open_output(&common.csv)?;
            write_run_csv(&mut out, &trace.rows, common.wall_time)?;
            out.flush()?;
        }
        Command::Compare { common, method, align } => {
            let specs: Vec<RunSpec> = method.iter().map(|m| common.spec(*m)).collect();
            let runs = compare(&specs)?;
            for r in &runs {
                info!("{} on {}: {:?}, f = {:e}", r.method, r.problem, r.status, r.f_final);
            }
            let mut out = open_output(&common.csv)?;
            write_compare_csv(&mut out, &runs, align, common.wall_time)?;
            out.flush()?;
        }
        Command::Pd {
            constraints,
            eps,
            max_iter,
            csv,
        } => {
            let text = std::fs::read_to_string(&constraints)
                .map_err(|e| BenchError::Usage(format!("{}: {e}", constraints.display())))?;
            let file = ConstraintFile::parse(&text)?;
            let rep = run_pd(&file, &PdConfig::new(eps, eps, max_iter))?;
            info!("primal-dual: {:?}, gap {:e}, feas {:e}", rep.status, rep.gap, rep.feas);
            if rep.diverging {
                eprintln!("warning: dual iterates diverge; the constraints look infeasible");
            }
            let mut out = open_output(&csv)?;
            write_pd_csv(&mut out, &rep)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
