use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use wavemap_cli::experiment::{run_single, run_sweep, verify, RunError, Status};
use wavemap_cli::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "wavemap", version, about = "Minimize the weighted space-time functional and check the wave-map limit")]
struct Cli {
    /// Write wall_time = 0 so repeated runs give byte-identical artifacts.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for one eps and write its artifacts.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve for a descending list of eps and judge the trends.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run the diagnostics on a stored field (its JSON sidecar).
    Verify {
        #[arg(long)]
        field: PathBuf,
        /// Output directory (default: `verify/` next to the field).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: &Cli) -> Result<Status> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Solve { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let out = run_single(&cfg, cli.deterministic)?;
            let leg = &out.leg;
            match &leg.summary {
                Some(s) => eprintln!(
                    "[solve] eps {}: {:?} after {} iterations, I = {:.6e} (I/eps^2 = {:.6})",
                    leg.eps, s.termination, s.iterations, s.final_value.total, s.final_over_eps2
                ),
                None => eprintln!("[solve] eps {}: no result", leg.eps),
            }
            for b in leg.bounds.iter().filter(|b| !b.pass) {
                eprintln!("[solve] bound {} fails: ratio {:.4}", b.name, b.ratio);
            }
            if let Some(e) = &leg.error {
                eprintln!("[solve] {e}");
            }
            eprintln!("[solve] {:?}; artifacts in {}", out.status, leg.dir.display());
            Ok(out.status)
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let out = run_sweep(&cfg, cli.deterministic)?;
            for r in &out.summary.rows {
                eprintln!(
                    "[sweep] eps {}: {:?} I/eps^2 {} oracle {}",
                    r.eps,
                    r.status,
                    r.functional_over_eps2.map(|v| format!("{v:.6}")).unwrap_or("-".into()),
                    r.oracle_l2.map(|v| format!("{v:.4e}")).unwrap_or("-".into()),
                );
            }
            for v in &out.summary.verdicts {
                eprintln!("[sweep] {} {}: {}", if v.pass { "ok  " } else { "FAIL" }, v.name, v.detail);
            }
            eprintln!("[sweep] {:?}; artifacts in {}", out.summary.status, cfg.output_dir.display());
            Ok(out.summary.status)
        }
        Command::Verify { field, out } => {
            let v = verify(field, out.as_deref())?;
            for b in v.bounds.iter().filter(|b| !b.pass) {
                eprintln!("[verify] bound {} fails: ratio {:.4}", b.name, b.ratio);
            }
            eprintln!("[verify] {:?}; report in {}", v.status, v.out_dir.display());
            Ok(v.status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<RunError>()
                .map(RunError::exit_code)
                .unwrap_or(2);
            ExitCode::from(code)
        }
    }
}
