use std::f64::consts::PI;

use smhd::config::{FieldConfig, Preset, RunConfig};
use smhd::driver::{aggregate, solve_all, Problem};
use smhd::fields::{random_solenoidal, ForcingSchedule, ForcingSequence};
use smhd::noise::{em_variance, sample_increments};
use smhd::solver::{
    check_global_smallness, elsasser_from_physical, estimate_bilinear_constant, linear_part, pair_norm,
    picard_solve, picard_solve_from, x1_norm, ElsasserData, NormTag, PicardOptions, SampleFamily,
};
use smhd::{FieldHistory, GridSpec, SpectralVectorField};

fn data(spec: &GridSpec, seed: u64, k: usize, force: f64) -> ElsasserData {
    let g = spec.grid;
    let u0 = random_solenoidal(g, seed, 1.0, 1).unwrap();
    let b0 = random_solenoidal(g, seed + 1, 1.0, 1).unwrap().scaled(0.5);
    let (v0, w0) = elsasser_from_physical(&u0, &b0);
    let g1 = ForcingSequence::random(g, k, seed + 2, 1.0, 1, force).unwrap();
    let g2 = ForcingSequence::random(g, k, seed + 3, 1.0, 1, force).unwrap();
    ElsasserData::new(v0, w0, ForcingSchedule::Constant(g1), ForcingSchedule::Constant(g2)).unwrap()
}

fn c_hat(spec: &GridSpec) -> f64 {
    estimate_bilinear_constant(8, 3, NormTag::X2, spec.grid, spec.mesh, 1.0, SampleFamily::for_grid(spec.grid))
        .unwrap()
        .c_hat
}

#[test]
fn fixed_point_is_unique_in_the_ball() {
    let spec = GridSpec::new(12, 2.0 * PI, 1.0 / 32.0, 0.25, 1.0, 1.0).unwrap();
    let c = c_hat(&spec);
    let base = data(&spec, 40, 2, 0.5);
    let noise = sample_increments(9, spec.mesh.steps(), 2, spec.mesh.dt()).unwrap();
    let (v1, w1) = linear_part(&base, &noise, &spec).unwrap();
    let alpha = 0.5 / (4.0 * c * pair_norm(&v1, &w1, NormTag::X2).unwrap());
    let (v1, w1) = linear_part(&base.scaled(alpha), &noise, &spec).unwrap();
    let eps = pair_norm(&v1, &w1, NormTag::X2).unwrap();
    let opts = PicardOptions { tol: 1e-11, ..PicardOptions::default() };
    let a = picard_solve(&v1, &w1, 1.0, 1.0, opts).unwrap();

    // a second start inside the 2ε ball, away from (v¹, w¹)
    let bump = random_solenoidal(spec.grid, 77, 1.0, 3).unwrap();
    let hist = FieldHistory::constant(&bump, spec.mesh);
    let scale = 0.4 * eps / pair_norm(&hist, &hist, NormTag::X2).unwrap();
    let v_start = v1.combine(scale, &hist).unwrap();
    let w_start = w1.combine(-scale, &hist).unwrap();
    assert!(pair_norm(&v_start, &w_start, NormTag::X2).unwrap() <= 2.0 * eps);
    let b = picard_solve_from(&v1, &w1, &v_start, &w_start, 1.0, 1.0, opts).unwrap();
    let gap = pair_norm(&a.v.combine(-1.0, &b.v).unwrap(), &a.w.combine(-1.0, &b.w).unwrap(), NormTag::X2).unwrap();
    assert!(gap <= 10.0 * opts.tol * eps, "gap {gap:.3e} vs eps {eps:.3e}");
}

#[test]
fn linear_part_vanishes_as_horizon_shrinks() {
    let spec = GridSpec::new(8, 2.0 * PI, 1.0 / 256.0, 1.0, 1.0, 1.0).unwrap();
    let d = data(&spec, 3, 2, 1.0);
    let noise = sample_increments(4, spec.mesh.steps(), 2, spec.mesh.dt()).unwrap();
    let (v1, w1) = linear_part(&d, &noise, &spec).unwrap();
    let norms: Vec<f64> = [256, 64, 16]
        .iter()
        .map(|&s| pair_norm(&v1.truncated(s).unwrap(), &w1.truncated(s).unwrap(), NormTag::X2).unwrap())
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    assert!(norms[2] < 0.75 * norms[0]);
}

#[test]
fn halving_amplitude_halves_epsilon_and_speeds_convergence() {
    let spec = GridSpec::new(12, 2.0 * PI, 1.0 / 32.0, 0.25, 1.0, 1.0).unwrap();
    let c = c_hat(&spec);
    let base = data(&spec, 60, 2, 0.5);
    let noise = sample_increments(2, spec.mesh.steps(), 2, spec.mesh.dt()).unwrap();
    let (v1, w1) = linear_part(&base, &noise, &spec).unwrap();
    let alpha = 0.9 / (4.0 * c * pair_norm(&v1, &w1, NormTag::X2).unwrap());
    let mut runs = Vec::new();
    for a in [alpha, alpha / 2.0] {
        let (v1, w1) = linear_part(&base.scaled(a), &noise, &spec).unwrap();
        runs.push(picard_solve(&v1, &w1, 1.0, 1.0, PicardOptions::default()).unwrap());
    }
    assert!((runs[1].epsilon / runs[0].epsilon - 0.5).abs() < 1e-12);
    assert!(runs[1].iterations < runs[0].iterations);
    assert!(runs[1].max_ratio() < runs[0].max_ratio());
}

/// Variance of each linear-part coefficient against the Euler–Maruyama law
/// of the implemented scheme.
#[test]
fn linear_part_has_the_scheme_variance() {
    let spec = GridSpec::new(8, 2.0 * PI, 1.0 / 16.0, 0.5, 1.0, 1.0).unwrap();
    let g = spec.grid;
    let forcing = ForcingSequence::random(g, 2, 5, 0.5, 2, 1.0).unwrap();
    let zero = SpectralVectorField::zeros(g);
    let d = ElsasserData::new(
        zero.clone(),
        zero,
        ForcingSchedule::Constant(forcing.clone()),
        ForcingSchedule::Constant(forcing.clone()),
    )
    .unwrap();
    let modes: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 1], [2, 1, 0]];
    let samples = 4000;
    let mut sums = [[0.0_f64; 2]; 3];
    for s in 0..samples {
        let noise = sample_increments(10_000 + s as u64, spec.mesh.steps(), 2, spec.mesh.dt()).unwrap();
        let (v1, _) = linear_part(&d, &noise, &spec).unwrap();
        for (m, k) in modes.iter().enumerate() {
            let x = v1.last().at(*k)[2].norm_sqr();
            sums[m][0] += x;
            sums[m][1] += x * x;
        }
    }
    for (m, k) in modes.iter().enumerate() {
        let weight: f64 = forcing.members().iter().map(|f| f.at(*k)[2].norm_sqr()).sum();
        let expected = weight * em_variance(g.laplacian_symbol(*k), spec.mesh.dt(), spec.mesh.steps());
        let mean = sums[m][0] / samples as f64;
        let se = ((sums[m][1] / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "mode {k:?}: {mean} vs {expected} (se {se})");
    }
}

#[test]
fn global_solution_stays_in_the_ball_as_the_horizon_doubles() {
    let probe = GridSpec::new(8, 2.0 * PI, 1.0 / 32.0, 0.25, 1.0, 1.0).unwrap();
    let c = c_hat(&probe);
    let g = probe.grid;
    let u0 = random_solenoidal(g, 90, 1.0, 2).unwrap();
    let b0 = random_solenoidal(g, 91, 1.0, 2).unwrap().scaled(0.5);
    let (v0, w0) = elsasser_from_physical(&u0, &b0);
    let zero = ForcingSchedule::zeros(g, 1).unwrap();
    let unit = ElsasserData::new(v0, w0, zero.clone(), zero).unwrap();
    let one = check_global_smallness(&unit, probe.mesh, c, NormTag::X2).unwrap();
    let d = unit.scaled(0.5 / one.product);
    for t in [1.0, 2.0, 4.0] {
        let spec = GridSpec::new(8, 2.0 * PI, 1.0 / 32.0, t, 1.0, 1.0).unwrap();
        let gate = check_global_smallness(&d, spec.mesh, c, NormTag::X2).unwrap();
        assert!(gate.passed && (gate.product - 0.5).abs() < 1e-12);
        let noise = sample_increments(1, spec.mesh.steps(), 1, spec.mesh.dt()).unwrap();
        let (v1, w1) = linear_part(&d, &noise, &spec).unwrap();
        let st = picard_solve(&v1, &w1, 1.0, 1.0, PicardOptions::default()).unwrap();
        let x1 = x1_norm(&st.v).unwrap() + x1_norm(&st.w).unwrap();
        assert!(x1 <= 2.0 * gate.epsilon, "T = {t}: {x1} vs {}", gate.epsilon);
    }
}

#[test]
fn ensemble_standard_error_shrinks_like_root_two() {
    let mut cfg = RunConfig::default();
    cfg.grid.n = 8;
    cfg.grid.dt = 1.0 / 16.0;
    cfg.grid.t = 0.25;
    cfg.noise.k = 2;
    cfg.data.u0 = FieldConfig::preset(Preset::TaylorGreen, 0.05);
    cfg.forcing.g1 = FieldConfig { seed: 2, ..FieldConfig::preset(Preset::Random, 0.05) };
    cfg.solver.c_hat = Some(1e-3);
    let p = Problem::new(&cfg).unwrap();
    let (all, failed) = solve_all(&p, 1e-3, 200);
    assert!(failed.is_empty());
    let se = |n: usize| {
        let rows = aggregate(&all[..n]).unwrap();
        rows.iter().find(|r| r.field == "u" && r.quantity == "l5").unwrap().std_error
    };
    let ratio = se(100) / se(200);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.2, "ratio {ratio}");
}
