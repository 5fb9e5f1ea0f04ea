//! Property suites behind `smhd verify`. Each check reports a measured value
//! against its bound.

use std::f64::consts::PI;
use std::fmt;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fields::{random_solenoidal, single_mode, FieldHistory, ForcingSchedule, ForcingSequence};
use crate::noise::{ou_variance, OuSampler};
use crate::norms::{gap_of, hilbert_seminorm, spacetime_norms_with, NormSelection};
use crate::operators::heat_propagate;
use crate::oseen::{
    decay_constant, kernel_component, kernel_fourier_oracle, kernel_max_abs, scaling_residual, KernelPoint,
    OracleOptions, SWEEP_DIRECTIONS,
};
use crate::quadrature::gauss_kronrod_15;
use crate::solver::{estimate_bilinear_constant, NormTag, SampleFamily};
use crate::special::gamma_eleven_halves;
use crate::spectral::{Grid, TimeMesh};

pub const SUITES: [&str; 5] = ["semigroup", "interpolation", "bilinear", "kernel", "noise"];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub value: f64,
    /// Human-readable acceptance condition on `value`.
    pub bound: String,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: {:.6e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.bound
        )
    }
}

fn check(suite: &'static str, name: &'static str, value: f64, bound: String, passed: bool) -> Check {
    Check {
        suite,
        name,
        value,
        bound,
        passed,
    }
}

/// Suites named by `suite` (`all` expands to every suite).
pub fn run_suite(suite: &str, cfg: &RunConfig) -> Result<Vec<Check>> {
    if suite == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(run_suite(s, cfg)?);
        }
        return Ok(out);
    }
    match suite {
        "semigroup" => semigroup(cfg),
        "interpolation" => interpolation(cfg),
        "bilinear" => bilinear(cfg),
        "kernel" => kernel(),
        "noise" => noise(),
        other => Err(Error::Config(format!(
            "unknown suite {other:?}; expected one of {} or all",
            SUITES.join(", ")
        ))),
    }
}

/// `ν ∫₀^∞ ‖S(t)u₀‖²_{Ḣ^{3/2}} dt / ‖u₀‖²_{Ḣ^{1/2}} = 1/2`.
fn semigroup(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = cfg.grid_spec()?;
    let (g, nu) = (spec.grid, spec.nu1);
    let kmax = (g.n() - 1) / 3;
    let slow = nu * g.laplacian_symbol([1, 0, 0]);
    let mut edges = vec![0.0];
    edges.extend((-6..=2).map(|e| 4f64.powi(e) / slow));
    edges.push(40.0 / slow);
    let mut worst = 0.0_f64;
    for seed in 0..5u64 {
        let u0 = random_solenoidal(g, 1000 + seed, 1.0, kmax)?;
        let den = hilbert_seminorm(&u0, 0.5)?.powi(2);
        let mut f = |t: f64| {
            heat_propagate(t, nu, &u0)
                .and_then(|s| hilbert_seminorm(&s, 1.5))
                .map_or(f64::NAN, |x| x * x)
        };
        let num: f64 = edges.windows(2).map(|w| gauss_kronrod_15(&mut f, w[0], w[1]).0).sum();
        worst = worst.max((nu * num / den / 0.5 - 1.0).abs());
    }
    Ok(vec![check(
        "semigroup",
        "smoothing_constant_deviation",
        worst,
        "relative deviation from 1/2 <= 1e-4".into(),
        worst <= 1e-4,
    )])
}

fn interpolation(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = cfg.grid_spec()?;
    let (g, mesh) = (spec.grid, spec.mesh);
    let kmax = (g.n() - 1) / 3;
    let mut worst = 0.0_f64;
    for h in 0..100u64 {
        let states = (0..=mesh.steps())
            .map(|n| random_solenoidal(g, 50_000 + 1000 * h + n as u64, (h % 4) as f64, 1 + h as usize % kmax))
            .collect::<Result<Vec<_>>>()?;
        let r = spacetime_norms_with(&FieldHistory::new(mesh, states)?, NormSelection::Hilbert)?;
        worst = worst.max(gap_of(&r)?);
    }
    let f = single_mode(g, [1, 1, 0], [1.0, -1.0, 0.5], 1.0)?;
    let r = spacetime_norms_with(&FieldHistory::constant(&f, mesh), NormSelection::Hilbert)?;
    let eq = (gap_of(&r)? - 1.0).abs();
    Ok(vec![
        check("interpolation", "max_ratio", worst, "<= 1 + 1e-10 over 100 fields".into(), worst <= 1.0 + 1e-10),
        check("interpolation", "single_mode_equality", eq, "|ratio - 1| <= 1e-12".into(), eq <= 1e-12),
    ])
}

fn bilinear(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = cfg.grid_spec()?;
    let fam = SampleFamily::for_grid(spec.grid);
    let nu = spec.nu1.min(spec.nu2);
    let seed = cfg.solver.bilinear_seed;
    let mut out = Vec::new();
    for (tag, name) in [(NormTag::X2, "c10_x1_over_x2x2"), (NormTag::L5, "c11_l5")] {
        let small = estimate_bilinear_constant(10, seed, tag, spec.grid, spec.mesh, nu, fam)?.c_hat;
        let large = estimate_bilinear_constant(40, seed.wrapping_add(1), tag, spec.grid, spec.mesh, nu, fam)?.c_hat;
        let spread = (small / large - 1.0).abs();
        out.push(check(
            "bilinear",
            name,
            large,
            format!("finite; 10 vs 40 samples differ by {:.1}% <= 15%", 100.0 * spread),
            large.is_finite() && large > 0.0 && spread <= 0.15,
        ));
    }
    Ok(out)
}

fn kernel() -> Result<Vec<Check>> {
    let mut scaling = 0.0_f64;
    for lt in -4..=4 {
        for lr in -4..=4 {
            let (t, r) = (10f64.powf(lt as f64 / 2.0), 10f64.powf(lr as f64 / 2.0));
            scaling = scaling.max(scaling_residual(t, [0.6 * r, -0.48 * r, 0.64 * r])?);
        }
    }
    let mut oracle = 0.0_f64;
    for (i, r) in [0.4, 1.0, 2.5].into_iter().enumerate() {
        let x = [r * 0.6, r * 0.8, 0.0];
        let p = KernelPoint { t: 1.0, x, idx: [[0, 0, 0], [0, 1, 2], [1, 1, 0]][i] };
        let d = (kernel_component(p)? - kernel_fourier_oracle(p, OracleOptions::default())?).norm();
        oracle = oracle.max(d / kernel_max_abs(1.0, x)?);
    }
    let decay = decay_constant(2000, &SWEEP_DIRECTIONS)?;
    let gamma = (gamma_eleven_halves(50.0)? - 945.0 / 32.0 * PI.sqrt()).abs();
    Ok(vec![
        check("kernel", "scaling_residual", scaling, "<= 1e-12".into(), scaling <= 1e-12),
        check("kernel", "fourier_oracle", oracle, "relative <= 1e-6".into(), oracle <= 1e-6),
        check("kernel", "decay_constant", decay, "sup (1+|x|)^4 |K(1,x)| finite".into(), decay.is_finite()),
        check("kernel", "gamma_11_2_at_50", gamma, "<= 1e-9".into(), gamma <= 1e-9),
    ])
}

/// Itô isometry per mode for the exact sampler, 2000 samples.
fn noise() -> Result<Vec<Check>> {
    let g = Grid::new(8, 2.0 * PI)?;
    let forcing = ForcingSequence::random(g, 2, 77, 0.5, 2, 1.0)?;
    let nu = 0.5;
    let mesh = TimeMesh::new(1.0 / 8.0, 1.0)?;
    let sampler = OuSampler::new(&ForcingSchedule::Constant(forcing.clone()), nu, mesh)?;
    let modes: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 1], [2, 1, 0]];
    let samples = 2000u64;
    let mut sums = [[0.0_f64; 2]; 3];
    for s in 0..samples {
        let z = sampler.sample(700_000 + s)?;
        for (m, k) in modes.iter().enumerate() {
            let x = z.last().at(*k)[0].norm_sqr();
            sums[m][0] += x;
            sums[m][1] += x * x;
        }
    }
    let mut worst = 0.0_f64;
    for (m, k) in modes.iter().enumerate() {
        let weight: f64 = forcing.members().iter().map(|f| f.at(*k)[0].norm_sqr()).sum();
        let expected = weight * ou_variance(nu * g.laplacian_symbol(*k), mesh.horizon());
        let mean = sums[m][0] / samples as f64;
        let var = sums[m][1] / samples as f64 - mean * mean;
        worst = worst.max((mean - expected).abs() / (var / samples as f64).sqrt());
    }
    Ok(vec![check(
        "noise",
        "ito_isometry_z_score",
        worst,
        "max |z| over 3 modes <= 3".into(),
        worst <= 3.0,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.n = 8;
        c.grid.dt = 1.0 / 8.0;
        c.grid.t = 0.5;
        c
    }

    #[test]
    fn suites_pass_on_a_small_grid() {
        for s in ["semigroup", "interpolation", "kernel"] {
            let checks = run_suite(s, &small()).unwrap();
            assert!(!checks.is_empty());
            assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        }
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(run_suite("bogus", &small()), Err(Error::Config(_))));
    }

    #[test]
    fn display_line() {
        let c = check("kernel", "x", 0.5, "<= 1".into(), true);
        assert_eq!(c.to_string(), "PASS kernel/x: 5.000000e-1 (<= 1)");
    }
}
