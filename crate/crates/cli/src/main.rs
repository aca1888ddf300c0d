//! `galbrun`: single solves, convergence studies, inf-sup tables, Mach
//! admissibility reports and mesh summaries driven by JSON config files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use galbrun_cli::error::{CliError, Result};
use galbrun_cli::{commands, config};

#[derive(Parser)]
#[command(name = "galbrun", version, about = "Finite element studies of the damped time-harmonic Galbrun equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Size of the worker pool; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write `solution.json`.
    Solve(Io),
    /// Run a convergence study and write its CSV.
    Convergence {
        #[command(flatten)]
        io: Io,
        /// Also write the log-log plot.
        #[arg(long)]
        svg: bool,
    },
    /// Tabulate discrete inf-sup constants.
    Infsup(Io),
    /// Report the Mach-number admissibility bound and write `mach.json`.
    Mach(Io),
    /// Summarize a generated mesh; writes `mesh.json` when `--out` is given.
    MeshInfo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve(io) => {
            let cfg = config::load_solve(&io.config)?;
            println!("{}", commands::solve(&cfg, &io.out)?);
        }
        Command::Convergence { io, svg } => {
            let study = config::load_study(&io.config)?;
            for line in commands::convergence(&study, &io.out, svg)? {
                println!("{line}");
            }
        }
        Command::Infsup(io) => {
            let cfg = config::load_infsup(&io.config)?;
            let lines = commands::infsup(&cfg, &io.out)?;
            for line in &lines {
                println!("{line}");
            }
            if lines.iter().any(|l| l.contains("WARNING")) {
                eprintln!("warning: some pairs are not inf-sup stable");
            }
        }
        Command::Mach(io) => {
            let cfg = config::load_mach(&io.config)?;
            let r = commands::mach(&cfg, &io.out)?;
            println!("mach_sq = {:.6e}", r.mach_sq);
            println!("c_m = {:.6e}, theta = {:.6e}", r.c_m, r.theta);
            println!("bound (homogeneous) = {:.6e}", r.bound_homogeneous);
            println!("bound (heterogeneous) = {:.6e}", r.bound_heterogeneous);
            println!("admissible = {}", r.admissible);
        }
        Command::MeshInfo { config, out } => {
            let cfg = config::load_mesh(&config)?;
            let s = commands::mesh_info(&cfg, out.as_deref())?;
            println!("vertices = {}", s.vertices);
            println!("triangles = {}", s.triangles);
            println!("boundary edges = {}", s.boundary_edges);
            println!("periodic pairs = {}", s.periodic_pairs);
            println!("h_max = {:.6}", s.h_max);
            println!("min angle = {:.3} deg", s.min_angle_degrees);
            println!("area = {:.12}", s.area);
            println!("valid = {}", s.valid);
        }
    }
    Ok(())
}

fn with_workers(workers: Option<usize>, f: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io { path: Path::new("<thread pool>").into(), source: std::io::Error::other(e) })?;
    pool.install(f)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_workers(cli.workers, || run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("galbrun: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
