//! `smhd`: batch front end for mild-solution runs, property suites and
//! kernel tables.
//!
//! Exit status: 0 success, 1 I/O or internal error, 2 bad configuration or
//! unknown suite, 3 no local window (or failed global gate), 4 Picard
//! non-convergence, 5 ensemble with failed members. Any failed `verify`
//! check also exits with 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smhd::config::RunConfig;
use smhd::driver::{run_ensemble, run_simulate};
use smhd::oseen::{kernel_table, write_kernel_csv};
use smhd::verify::run_suite;
use smhd::Error;

/// Environment variable overriding the configured output directory.
const OUT_ENV: &str = "MHD_OUT";

#[derive(Parser)]
#[command(name = "smhd", version, about = "Stochastic MHD mild solutions by Picard iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding `noise.seed`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding `MHD_OUT` and `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Realization count, overriding `noise.realizations`.
    #[arg(long, value_name = "N")]
    realizations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every realization and write norm traces and summaries.
    Simulate(Common),
    /// Run a property suite and print one line per check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// semigroup, interpolation, bilinear, kernel, noise or all.
        #[arg(long, value_name = "NAME", default_value = "all")]
        suite: String,
    },
    /// Parallel realizations aggregated into expectation norms.
    Ensemble(Common),
    /// Oseen kernel values with scaling residuals and decay products.
    KernelTable {
        #[command(flatten)]
        common: Common,
        /// Times at which the kernel is tabulated.
        #[arg(long, value_delimiter = ',', default_value = "0.25,1,4")]
        times: Vec<f64>,
        /// Radii along the direction.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,1,3,10")]
        radii: Vec<f64>,
        /// Direction of the radial ray (normalized).
        #[arg(long, value_delimiter = ',', num_args = 3, default_value = "1,1,1")]
        direction: Vec<f64>,
    },
}

impl Common {
    fn load(&self) -> smhd::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.noise.seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.noise.realizations = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => cfg.output.dir.clone(),
        }
    }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> smhd::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

fn run(cli: Cli) -> smhd::Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let out = c.out_dir(&cfg);
            let s = run_simulate(&cfg, &out)?;
            write_config(&out, &cfg)?;
            for f in &s.failures {
                eprintln!("realization {} (seed {}): {}", f.realization, f.seed, f.error);
            }
            println!("{} realizations converged, {} failed; outputs in {}", s.outcomes, s.failures.len(), out.display());
            Ok(s.exit_code)
        }
        Command::Ensemble(c) => {
            let cfg = c.load()?;
            let out = c.out_dir(&cfg);
            let (s, rows) = run_ensemble(&cfg, &out)?;
            write_config(&out, &cfg)?;
            for f in &s.failures {
                eprintln!("realization {} (seed {}): {}", f.realization, f.seed, f.error);
            }
            for r in &rows {
                println!("{} {}: {:.6e} ± {:.2e} ({} samples)", r.field, r.quantity, r.value, r.std_error, r.samples);
            }
            Ok(s.exit_code)
        }
        Command::Verify { common, suite } => {
            let cfg = common.load()?;
            let checks = run_suite(&suite, &cfg)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
        }
        Command::KernelTable {
            common,
            times,
            radii,
            direction,
        } => {
            let cfg = common.load()?;
            let out = common.out_dir(&cfg);
            let d: [f64; 3] = direction
                .try_into()
                .map_err(|_| Error::Config("direction needs three components".into()))?;
            let rows = kernel_table(&times, &radii, d).map_err(|e| Error::Config(e.to_string()))?;
            fs::create_dir_all(&out)?;
            let path = out.join("kernel_table.csv");
            write_kernel_csv(&rows, fs::File::create(&path)?)?;
            println!("{} rows written to {}", rows.len(), path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
