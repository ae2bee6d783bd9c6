//! Command-line front end.
//!
//! Exit status is 0 on success, 1 when a property check fails or an oracle
//! root goes unmatched, and 2 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use eigenwave::analysis::WaveClass;
use eigenwave::config::SolverConfig;
use eigenwave::mesh::{save_mesh, EdgeTag};
use eigenwave::oracle::roots_csv;
use eigenwave::output::to_json;
use eigenwave::pipeline::{build_mesh, oracle_roots, run, sweep, write_run, write_sweep, RunResult};

#[derive(Parser)]
#[command(
    name = "eigenwave",
    version,
    about = "Normal-wave spectra of shielded dielectric waveguides"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured mesh and write it as mesh.txt.
    Mesh(Common),
    /// Solve, classify, verify and compare with the oracle.
    Solve(Common),
    /// Solve and write only the property report.
    Verify(Common),
    /// Write the analytic reference roots for the configuration.
    Oracle(Common),
    /// Solve over a range of eps2 and track dispersion branches.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiply the configured cell counts by this factor.
    #[arg(long)]
    refine: Option<usize>,
    /// Run on a single worker thread.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads; 0 lets the runtime choose.
    #[arg(long, env = "EIGENWAVE_THREADS", default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn load(&self) -> eigenwave::Result<(SolverConfig, PathBuf)> {
        let mut cfg = SolverConfig::from_file(&self.config)?;
        if let Some(k) = self.refine {
            if k == 0 {
                return Err(eigenwave::Error::Config {
                    line: None,
                    msg: "--refine must be >= 1".into(),
                });
            }
            cfg.solver.refinement = k;
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        let threads = if self.deterministic { 1 } else { self.threads };
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        Ok((cfg, out))
    }
}

fn summarize(r: &RunResult) {
    if let Some(s) = &r.spectrum {
        let counts: Vec<String> = WaveClass::ALL
            .iter()
            .map(|c| format!("{}={}", c.as_str(), s.counts.get(*c)))
            .collect();
        println!(
            "eigenvalues: {} ({}), max |Re gamma| = {:.6}",
            s.len(),
            counts.join(" "),
            s.max_abs_re
        );
        println!(
            "exclusion interval: [{:.6}, {:.6}]",
            s.exclusion.lower, s.exclusion.upper
        );
    }
    for c in r.report.failures() {
        println!("FAILED {}: margin {:e}, threshold {:e}", c.name, c.margin, c.threshold);
    }
    println!(
        "property checks: {} ({} of {})",
        if r.report.pass { "pass" } else { "FAIL" },
        r.report.checks.iter().filter(|c| c.pass).count(),
        r.report.checks.len()
    );
    if !r.oracle.is_empty() {
        let compared = r.oracle.iter().filter(|m| m.compared).count();
        println!("oracle: {} compared, {} mismatched", compared, r.oracle_mismatches());
    }
}

fn execute(cli: Cli) -> eigenwave::Result<bool> {
    let start = Instant::now();
    let ok = match &cli.command {
        Command::Mesh(c) => {
            let (cfg, out) = c.load()?;
            let mesh = build_mesh(&cfg)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("mesh.txt"), save_mesh(&mesh))?;
            println!(
                "mesh: {} nodes, {} triangles, {} interface edges",
                mesh.num_nodes(),
                mesh.triangles.len(),
                mesh.count_edges(EdgeTag::Gamma)
            );
            true
        }
        Command::Solve(c) => {
            let (cfg, out) = c.load()?;
            let r = run(&cfg)?;
            write_run(&r, &out)?;
            summarize(&r);
            r.success()
        }
        Command::Verify(c) => {
            let (cfg, out) = c.load()?;
            let r = run(&cfg)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.json"), to_json(&r.report)?)?;
            summarize(&r);
            r.report.pass
        }
        Command::Oracle(c) => {
            let (cfg, out) = c.load()?;
            let roots = oracle_roots(&cfg);
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("oracle_roots.csv"), roots_csv(&roots)?)?;
            println!("oracle: {} roots", roots.len());
            true
        }
        Command::Sweep(c) => {
            let (cfg, out) = c.load()?;
            let s = sweep(&cfg)?;
            write_sweep(&s, &out)?;
            for (e, r) in s.eps2.iter().zip(&s.runs) {
                println!("eps2 = {e}: {}", if r.success() { "pass" } else { "FAIL" });
            }
            println!("branches: {}", s.branches.len());
            s.success()
        }
    };
    eprintln!("elapsed: {:.2} s", start.elapsed().as_secs_f64());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
