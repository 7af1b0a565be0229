use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mllg_core::check::{run_checks, SUITES};
use mllg_core::ensemble::{convergence_study, run_ensemble};
use mllg_core::mesh::{build_cube_mesh, obtuse_variant, verify_offdiagonal_condition, Aabb};
use mllg_core::output::{error_csv, manifest, plot_script, write_ensemble_outputs, write_file};
use mllg_core::{Error, Result, SimConfig};

#[derive(Parser)]
#[command(
    name = "mllg",
    version,
    about = "Stochastic Maxwell-LLG finite element experiments"
)]
struct Cli {
    /// Configuration file with one `key = value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (same as `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    retain_paths: Option<usize>,
    /// Permit theta < 1/2 with k >= h^2/2.
    #[arg(long, global = true)]
    allow_unstable_theta: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the self-check suites and print a pass/fail table.
    Check {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Option<String>,
    },
    /// Print mesh statistics for the configured `n`.
    MeshInfo {
        /// Write a plain-text mesh dump to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Simulate the first path of the ensemble.
    Run,
    /// Simulate `L` paths and write energy traces and per-path errors.
    Ensemble,
    /// One ensemble per (n, k ratio) pair; writes error.csv.
    Convergence,
}

impl Cli {
    fn resolve_config(&self) -> Result<SimConfig> {
        let mut overrides = self.set.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", out.display()));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        if let Some(r) = self.retain_paths {
            overrides.push(format!("retain_paths={r}"));
        }
        if self.allow_unstable_theta {
            overrides.push("allow_unstable_theta=true".into());
        }
        match &self.config {
            Some(path) => SimConfig::from_file(path, &overrides),
            None => SimConfig::parse_with_overrides("", &overrides),
        }
    }
}

fn check(cfg: &SimConfig, suite: Option<&str>) -> Result<bool> {
    let reports = run_checks(cfg, suite)?;
    println!("{:<12} {:<6} detail", "suite", "result");
    for r in &reports {
        println!(
            "{:<12} {:<6} {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn mesh_info(cfg: &SimConfig, dump: Option<&PathBuf>) -> Result<()> {
    let mut mesh = build_cube_mesh(cfg.n, Aabb::unit_cube(), None)?;
    if cfg.obtuse_mesh {
        mesh = obtuse_variant(&mesh)?;
    }
    let cond = verify_offdiagonal_condition(&mesh);
    println!("n               {}", cfg.n);
    println!("h               {:.16e}", mesh.h);
    println!("vertices        {}", mesh.num_vertices());
    println!("edges           {}", mesh.num_edges());
    println!("tets            {}", mesh.num_tets());
    println!("magnet vertices {}", mesh.num_magnet_vertices());
    println!("LLG unknowns    {}", 2 * mesh.num_magnet_vertices());
    println!("Maxwell unknowns {}", mesh.num_edges());
    println!(
        "stiffness sign  {} (max off-diagonal {:.3e})",
        if cond.pass { "ok" } else { "violated" },
        cond.worst_entry
    );
    if let Some(path) = dump {
        mesh.dump_to_file(path)?;
        println!("dump            {}", path.display());
    }
    Ok(())
}

fn simulate(cfg: &SimConfig) -> Result<()> {
    let res = run_ensemble(cfg)?;
    for path in write_ensemble_outputs(&cfg.output_dir, cfg, &res)? {
        println!("wrote {}", path.display());
    }
    println!(
        "mean sphere error (squared) {:.16e} over {} path(s)",
        res.mean_sphere_error_sq, res.paths
    );
    Ok(())
}

fn convergence(cfg: &SimConfig) -> Result<()> {
    let rows = convergence_study(cfg)?;
    for r in &rows {
        println!(
            "n={} k={:.4e} E={:.6e} ({:.2}s)",
            r.n, r.k, r.mean_sphere_error_sq, r.wallclock_s
        );
    }
    let dir = &cfg.output_dir;
    for path in [
        write_file(dir, "error.csv", &error_csv(&rows))?,
        write_file(dir, "plot.gp", &plot_script(0))?,
        write_file(dir, "manifest.txt", &manifest(cfg, &[]))?,
    ] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::Check { suite } => check(&cfg, suite.as_deref()),
        Command::MeshInfo { dump } => mesh_info(&cfg, dump.as_ref()).map(|_| true),
        Command::Run => {
            let single = SimConfig {
                paths: 1,
                retain_paths: 1,
                ..cfg
            };
            simulate(&single).map(|_| true)
        }
        Command::Ensemble => simulate(&cfg).map(|_| true),
        Command::Convergence => convergence(&cfg).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
