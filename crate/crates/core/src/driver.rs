//! Run orchestration behind the command line: per-realization solves,
//! ensembles and artifact writing.
//!
//! Realization `r` draws its noise from `split_seed(noise.seed, r)`.
//! Realizations run in parallel; every artifact is written afterwards from
//! the calling thread in realization order, so outputs do not depend on the
//! thread count.
//!
//! Artifacts of `simulate` in the output directory:
//!
//! - `contraction.csv`: one row per realization with `realization, seed,
//!   status, t0, epsilon, apriori_epsilon, c_estimate, product, iterations,
//!   final_residual, max_ratio, residual_v, residual_w, max_divergence`.
//! - `iterations_r{r}.csv`: `iteration, diff, ratio` per Picard step.
//! - `norms_r{r}_{v,w,u,b}.csv`: per-time norm traces (see [`NormReport`]).
//! - `snapshot_r{r}_n{step}.mhdf`: members `u`, `b` at requested times.
//! - `failures.csv` when any realization fails: `realization, seed, exit_code, error`.
//!
//! `ensemble` writes `members.csv` (per-realization norms), `ensemble.csv`
//! (`field, quantity, value, std_error, samples`) and `failures.csv`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{RunConfig, SolveMode};
use crate::error::{Error, Result};
use crate::fields::ForcingSchedule;
use crate::noise::{sample_increments, split_seed};
use crate::norms::{expectation_norm, spacetime_norms, NormReport};
use crate::operators::DuhamelRule;
use crate::output::{csv_writer, fmt_f64};
use crate::snapshot::save_snapshot;
use crate::solver::{
    apriori_epsilon, check_global_smallness, elsasser_forcing, elsasser_from_physical, estimate_bilinear_constant,
    find_local_t0, linear_part, mild_residual, picard_solve, ElsasserData, PicardOptions, SampleFamily,
};
use crate::spectral::{GridSpec, SpectralVectorField};

pub const FIELD_NAMES: [&str; 4] = ["v", "w", "u", "b"];

/// Validated configuration with its data built.
#[derive(Clone, Debug)]
pub struct Problem {
    pub config: RunConfig,
    pub spec: GridSpec,
    pub data: ElsasserData,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.grid_spec()?;
        let (grid, k, base) = (spec.grid, config.noise.k, &config.base_dir);
        let u0 = config.data.u0.field(grid, base)?;
        let b0 = config.data.b0.field(grid, base)?;
        let g1 = config.forcing.g1.forcing(grid, k, base)?;
        let g2 = config.forcing.g2.forcing(grid, k, base)?;
        let (v0, w0) = elsasser_from_physical(&u0, &b0);
        let (big1, big2) = elsasser_forcing(&g1, &g2)?;
        let data = ElsasserData::new(v0, w0, ForcingSchedule::Constant(big1), ForcingSchedule::Constant(big2))
            .map_err(|e| Error::Config(format!("initial data: {e}")))?;
        Ok(Self {
            config: config.clone(),
            spec,
            data,
        })
    }

    /// Configured `c_hat`, or the sampled estimate on this grid and mesh with
    /// the smaller viscosity.
    pub fn bilinear_constant(&self) -> Result<f64> {
        if let Some(c) = self.config.solver.c_hat {
            return Ok(c);
        }
        let s = &self.config.solver;
        let est = estimate_bilinear_constant(
            s.bilinear_samples,
            s.bilinear_seed,
            s.norm,
            self.spec.grid,
            self.spec.mesh,
            self.spec.nu1.min(self.spec.nu2),
            SampleFamily::for_grid(self.spec.grid),
        )?;
        Ok(est.c_hat)
    }

    pub fn realization_seed(&self, r: usize) -> u64 {
        split_seed(self.config.noise.seed, r as u64)
    }
}

/// Everything kept from one successful realization.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub realization: usize,
    pub seed: u64,
    pub t0: f64,
    pub epsilon: f64,
    pub apriori_epsilon: f64,
    pub c_estimate: f64,
    pub product: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub max_ratio: f64,
    pub residual: (f64, f64),
    pub max_divergence: f64,
    pub diffs: Vec<f64>,
    /// Norm reports of `v, w, u, b`.
    pub norms: [NormReport; 4],
    /// `(step, [u, b])` at the requested snapshot times inside the window.
    pub snapshots: Vec<(usize, [SpectralVectorField; 2])>,
}

#[derive(Debug)]
pub struct Failure {
    pub realization: usize,
    pub seed: u64,
    pub error: Error,
}

/// The whole pipeline for realization `r`: noise, linear part, local window
/// or global gate, Picard iteration, mild residual and norms.
pub fn solve_realization(p: &Problem, c_hat: f64, r: usize) -> Result<Outcome> {
    let cfg = &p.config;
    let mesh = p.spec.mesh;
    let seed = p.realization_seed(r);
    let noise = sample_increments(seed, mesh.steps(), cfg.noise.k, mesh.dt())?;
    let (v1, w1) = linear_part(&p.data, &noise, &p.spec)?;
    let tag = cfg.solver.norm;
    let (v1, w1) = match cfg.solver.mode {
        SolveMode::Local => {
            let win = find_local_t0(&v1, &w1, c_hat, cfg.solver.margin, tag)?;
            if win.steps == mesh.steps() {
                (v1, w1)
            } else {
                (v1.truncated(win.steps)?, w1.truncated(win.steps)?)
            }
        }
        SolveMode::Global => {
            let gate = check_global_smallness(&p.data, mesh, c_hat, tag)?;
            if !gate.passed {
                return Err(Error::SmallnessViolated { product: gate.product });
            }
            (v1, w1)
        }
    };
    let opts = PicardOptions {
        norm: tag,
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        nonlinear: true,
    };
    let state = picard_solve(&v1, &w1, p.spec.nu1, p.spec.nu2, opts)?;
    let report = state.report(c_hat);
    let residual = mild_residual(&state, DuhamelRule::LinearEtd)?;
    let (u, b) = state.physical()?;
    let norms = [
        spacetime_norms(&state.v)?,
        spacetime_norms(&state.w)?,
        spacetime_norms(&u)?,
        spacetime_norms(&b)?,
    ];
    let window = state.v.mesh();
    let mut snapshots = Vec::new();
    for &t in &cfg.output.snapshot_times {
        let step = (t / window.dt()).round() as usize;
        if step <= window.steps() && !snapshots.iter().any(|(s, _)| *s == step) {
            snapshots.push((step, [u.state(step).clone(), b.state(step).clone()]));
        }
    }
    Ok(Outcome {
        realization: r,
        seed,
        t0: window.horizon(),
        epsilon: report.epsilon,
        apriori_epsilon: apriori_epsilon(&p.data, mesh, tag)?,
        c_estimate: c_hat,
        product: report.product,
        iterations: report.iterations,
        final_residual: report.final_residual,
        max_ratio: report.max_ratio,
        residual,
        max_divergence: state.max_divergence,
        diffs: state.diffs.clone(),
        norms,
        snapshots,
    })
}

/// Outcomes and failures of `realizations` solves, in realization order.
pub fn solve_all(p: &Problem, c_hat: f64, realizations: usize) -> (Vec<Outcome>, Vec<Failure>) {
    let results: Vec<(usize, Result<Outcome>)> =
        (0..realizations).into_par_iter().map(|r| (r, solve_realization(p, c_hat, r))).collect();
    let (mut ok, mut failed) = (Vec::new(), Vec::new());
    for (r, res) in results {
        match res {
            Ok(o) => ok.push(o),
            Err(error) => failed.push(Failure {
                realization: r,
                seed: p.realization_seed(r),
                error,
            }),
        }
    }
    (ok, failed)
}

/// Exit status and what was written.
#[derive(Debug)]
pub struct RunSummary {
    pub exit_code: i32,
    pub outcomes: usize,
    pub failures: Vec<Failure>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_failures(dir: &Path, failures: &[Failure]) -> Result<()> {
    let mut w = csv_writer(create(dir, "failures.csv")?);
    w.write_record(["realization", "seed", "exit_code", "error"])?;
    for f in failures {
        w.write_record([
            f.realization.to_string(),
            f.seed.to_string(),
            f.error.exit_code().to_string(),
            f.error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outcome(dir: &Path, o: &Outcome, csv: bool) -> Result<()> {
    if csv {
        let mut w = csv_writer(create(dir, &format!("iterations_r{}.csv", o.realization))?);
        w.write_record(["iteration", "diff", "ratio"])?;
        for (i, d) in o.diffs.iter().enumerate() {
            let ratio = if i == 0 || o.diffs[i - 1] == 0.0 { f64::NAN } else { d / o.diffs[i - 1] };
            w.write_record([(i + 1).to_string(), fmt_f64(*d), fmt_f64(ratio)])?;
        }
        w.flush()?;
        for (name, report) in FIELD_NAMES.iter().zip(&o.norms) {
            report.write_csv(create(dir, &format!("norms_r{}_{name}.csv", o.realization))?)?;
        }
    }
    for (step, members) in &o.snapshots {
        save_snapshot(&dir.join(format!("snapshot_r{}_n{step}.mhdf", o.realization)), members)?;
    }
    Ok(())
}

fn summary_row(o: &Outcome) -> Vec<String> {
    let mut row = vec![o.realization.to_string(), o.seed.to_string(), "converged".to_string()];
    for x in [o.t0, o.epsilon, o.apriori_epsilon, o.c_estimate, o.product] {
        row.push(fmt_f64(x));
    }
    row.push(o.iterations.to_string());
    for x in [o.final_residual, o.max_ratio, o.residual.0, o.residual.1, o.max_divergence] {
        row.push(fmt_f64(x));
    }
    row
}

fn first_exit_code(failures: &[Failure]) -> i32 {
    failures.first().map_or(0, |f| f.error.exit_code())
}

/// `simulate`: solve every realization and write the artifacts.
pub fn run_simulate(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    let p = Problem::new(config)?;
    let c_hat = p.bilinear_constant()?;
    let (outcomes, failures) = solve_all(&p, c_hat, config.noise.realizations);
    fs::create_dir_all(out)?;
    let mut w = csv_writer(create(out, "contraction.csv")?);
    w.write_record([
        "realization", "seed", "status", "t0", "epsilon", "apriori_epsilon", "c_estimate", "product",
        "iterations", "final_residual", "max_ratio", "residual_v", "residual_w", "max_divergence",
    ])?;
    let mut rows: Vec<(usize, Vec<String>)> = outcomes.iter().map(|o| (o.realization, summary_row(o))).collect();
    for f in &failures {
        let mut row = vec![f.realization.to_string(), f.seed.to_string(), format!("failed({})", f.error.exit_code())];
        row.resize(14, String::new());
        rows.push((f.realization, row));
    }
    rows.sort_by_key(|(r, _)| *r);
    for (_, row) in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    for o in &outcomes {
        write_outcome(out, o, config.output.csv)?;
    }
    if !failures.is_empty() {
        write_failures(out, &failures)?;
    }
    Ok(RunSummary {
        exit_code: first_exit_code(&failures),
        outcomes: outcomes.len(),
        failures,
    })
}

/// Monte Carlo statistics per field: `E sup ‖·‖²_{Ḣ^{1/2}}` (as a first
/// moment) and the `𝕃₅` norm `(E ‖·‖⁵_{L₅})^{1/5}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRow {
    pub field: &'static str,
    pub quantity: &'static str,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn aggregate(outcomes: &[Outcome]) -> Result<Vec<EnsembleRow>> {
    let mut rows = Vec::new();
    for (i, field) in FIELD_NAMES.iter().enumerate() {
        let sup: Vec<f64> = outcomes.iter().map(|o| o.norms[i].sup_h12.powi(2)).collect();
        let l5: Vec<f64> = outcomes.iter().map(|o| o.norms[i].l5()).collect();
        for (quantity, values, p) in [("sup_h12_sq", sup, 1.0), ("l5", l5, 5.0)] {
            let e = expectation_norm(&values, p)?;
            rows.push(EnsembleRow {
                field,
                quantity,
                value: e.value,
                std_error: e.std_error,
                samples: e.samples,
            });
        }
    }
    Ok(rows)
}

/// `ensemble`: parallel solves, one summary table. Any failed member gives
/// exit status 5 and `failures.csv`; the summary then covers the survivors.
pub fn run_ensemble(config: &RunConfig, out: &Path) -> Result<(RunSummary, Vec<EnsembleRow>)> {
    if config.noise.realizations < 2 {
        return Err(Error::Config("ensemble needs at least 2 realizations".into()));
    }
    let p = Problem::new(config)?;
    let c_hat = p.bilinear_constant()?;
    let (outcomes, failures) = solve_all(&p, c_hat, config.noise.realizations);
    fs::create_dir_all(out)?;
    let mut w = csv_writer(create(out, "members.csv")?);
    let mut header = vec!["realization".to_string(), "seed".to_string(), "t0".to_string()];
    for f in FIELD_NAMES {
        header.push(format!("sup_h12_{f}"));
        header.push(format!("l5_{f}"));
    }
    w.write_record(&header)?;
    for o in &outcomes {
        let mut row = vec![o.realization.to_string(), o.seed.to_string(), fmt_f64(o.t0)];
        for r in &o.norms {
            row.push(fmt_f64(r.sup_h12));
            row.push(fmt_f64(r.l5()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let rows = if outcomes.len() >= 2 { aggregate(&outcomes)? } else { Vec::new() };
    let mut w = csv_writer(create(out, "ensemble.csv")?);
    w.write_record(["field", "quantity", "value", "std_error", "samples"])?;
    for r in &rows {
        w.write_record([
            r.field.to_string(),
            r.quantity.to_string(),
            fmt_f64(r.value),
            fmt_f64(r.std_error),
            r.samples.to_string(),
        ])?;
    }
    w.flush()?;
    if !failures.is_empty() {
        write_failures(out, &failures)?;
    }
    let exit_code = if failures.is_empty() { 0 } else { 5 };
    Ok((
        RunSummary {
            exit_code,
            outcomes: outcomes.len(),
            failures,
        },
        rows,
    ))
}
