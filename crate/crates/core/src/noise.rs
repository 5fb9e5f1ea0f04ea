//! Wiener increments and the stochastic convolution `∫₀ᵗ S(t−s) Gᵏ dwᵏ_s`.
//!
//! Random numbers come from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64`; Gaussian draws use `rand_distr::StandardNormal`.
//! Ensemble members obtain sub-seeds through [`split_seed`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fields::{FieldHistory, ForcingSchedule, ForcingSequence};
use crate::operators::heat_factors;
use crate::spectral::{SpectralVectorField, TimeMesh};

/// Sub-seed for stream `index` of `master`: the SplitMix64 finaliser applied
/// to `master ⊕ (index + 1)·0x9E3779B97F4A7C15`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Table of Brownian increments `Δwᵏₙ ~ N(0, dt)`, `n = 1..=M`, `κ = 0..K`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    seed: u64,
    dt: f64,
    steps: usize,
    directions: usize,
    increments: Vec<f64>,
}

/// Draw `M·K` increments, step-major (all directions of step 1 first).
pub fn sample_increments(seed: u64, steps: usize, directions: usize, dt: f64) -> Result<NoiseRealization> {
    if steps == 0 || directions == 0 {
        return Err(Error::InvalidArgument("noise table needs M, K >= 1".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sd = dt.sqrt();
    let increments = (0..steps * directions)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sd
        })
        .collect();
    Ok(NoiseRealization {
        seed,
        dt,
        steps,
        directions,
        increments,
    })
}

impl NoiseRealization {
    /// Table from explicit increments, step-major.
    pub fn from_increments(seed: u64, dt: f64, directions: usize, increments: Vec<f64>) -> Result<Self> {
        if directions == 0 || increments.is_empty() || increments.len() % directions != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} increments do not fill a table with {directions} directions",
                increments.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            seed,
            dt,
            steps: increments.len() / directions,
            directions,
            increments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    /// `Δwᵏₙ = w(tₙ) − w(tₙ₋₁)` for `n ≥ 1`.
    pub fn increment(&self, n: usize, kappa: usize) -> f64 {
        assert!(n >= 1 && n <= self.steps, "step {n} out of range");
        self.increments[(n - 1) * self.directions + kappa]
    }

    /// Brownian path `wᵏ(tₙ)`, `n = 0..=M`.
    pub fn path(&self, kappa: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        w.push(acc);
        for n in 1..=self.steps {
            acc += self.increment(n, kappa);
            w.push(acc);
        }
        w
    }

    /// First `steps` rows of the table.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} noise steps to {steps}",
                self.steps
            )));
        }
        Ok(Self {
            seed: self.seed,
            dt: self.dt,
            steps,
            directions: self.directions,
            increments: self.increments[..steps * self.directions].to_vec(),
        })
    }

    /// The same table with every increment multiplied by zero, which keeps
    /// the shape for noise-free runs.
    pub fn silenced(&self) -> Self {
        Self {
            increments: vec![0.0; self.increments.len()],
            ..self.clone()
        }
    }
}

fn check_shapes(g: &ForcingSchedule, noise: &NoiseRealization, mesh: TimeMesh) -> Result<()> {
    if g.directions() != noise.directions() {
        return Err(Error::DirectionMismatch {
            noise: noise.directions(),
            forcing: g.directions(),
        });
    }
    if noise.steps() != mesh.steps() {
        return Err(Error::SizeMismatch {
            expected: mesh.steps(),
            got: noise.steps(),
        });
    }
    if (noise.dt() - mesh.dt()).abs() > 1e-15 * mesh.dt() {
        return Err(Error::MeshMismatch);
    }
    if let Some(len) = g.len() {
        if len < mesh.steps() {
            return Err(Error::SizeMismatch {
                expected: mesh.steps(),
                got: len,
            });
        }
    }
    Ok(())
}

/// Left-point Itô (Euler–Maruyama) exponential scheme
/// `Zₙ = S(dt)(Zₙ₋₁ + Σᵏ Gᵏ(tₙ₋₁) Δwᵏₙ)`, `Z₀ = 0`.
pub fn stochastic_convolution_em(
    g: &ForcingSchedule,
    noise: &NoiseRealization,
    nu: f64,
    mesh: TimeMesh,
) -> Result<FieldHistory> {
    check_shapes(g, noise, mesh)?;
    let grid = g.grid();
    let decay = heat_factors(grid, nu, mesh.dt())?;
    let mut z = SpectralVectorField::zeros(grid);
    let mut states = Vec::with_capacity(mesh.steps() + 1);
    states.push(z.clone());
    for n in 1..=mesh.steps() {
        let members = g.on_step(n - 1);
        for (kappa, m) in members.members().iter().enumerate() {
            let dw = noise.increment(n, kappa);
            if dw != 0.0 {
                z.axpy(dw, m);
            }
        }
        z.scale_modes(&decay);
        states.push(z.clone());
    }
    FieldHistory::new(mesh, states)
}

/// Exact-in-law sampler for constant forcing.
///
/// For constant `G`, `Ẑ(k,t) = Σᵏ Ĝᵏ(k) Yᵏ_λ(t)` with `Yᵏ_λ(t) = ∫₀ᵗ e^{−λ(t−s)} dwᵏ_s`
/// and `λ = ν|2πk/L|²`. For each direction the vector `(Yᵏ_λ)_λ` over the
/// distinct decay rates is a Gauss–Markov process whose one-step innovation
/// has covariance `(1 − e^{−(λ+μ)dt})/(λ+μ)`; that covariance is factored once
/// and reused. The sampled history has the exact joint law at mesh times.
#[derive(Clone, Debug)]
pub struct OuSampler {
    forcing: ForcingSequence,
    nu: f64,
    mesh: TimeMesh,
    /// Distinct decay rates in increasing order.
    rates: Vec<f64>,
    /// Rate index of each stored mode, `None` where every member vanishes.
    mode_rate: Vec<Option<usize>>,
    /// Square-root factor of the innovation covariance (row-major `D×D`).
    factor: Vec<f64>,
    /// One-step decay `e^{−λ dt}` per rate.
    decay: Vec<f64>,
}

impl OuSampler {
    pub fn new(g: &ForcingSchedule, nu: f64, mesh: TimeMesh) -> Result<Self> {
        let forcing = match g {
            ForcingSchedule::Constant(f) => f.clone(),
            ForcingSchedule::Piecewise(steps) => {
                if steps.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::TimeDependentForcing);
                }
                steps[0].clone()
            }
        };
        let grid = forcing.grid();
        let mut keyed: BTreeMap<u64, f64> = BTreeMap::new();
        let mut mode_key = Vec::with_capacity(grid.len());
        for (idx, k) in grid.modes() {
            let active = forcing
                .members()
                .iter()
                .any(|m| (0..3).any(|i| m.coeffs(i)[idx] != Complex64::default()));
            if active {
                let lambda = nu * grid.laplacian_symbol(k);
                keyed.insert(lambda.to_bits(), lambda);
                mode_key.push(Some(lambda.to_bits()));
            } else {
                mode_key.push(None);
            }
        }
        let rates: Vec<f64> = {
            let mut r: Vec<f64> = keyed.values().copied().collect();
            r.sort_by(f64::total_cmp);
            r
        };
        let position: BTreeMap<u64, usize> = rates.iter().enumerate().map(|(i, r)| (r.to_bits(), i)).collect();
        let mode_rate = mode_key.into_iter().map(|k| k.map(|b| position[&b])).collect();

        let dt = mesh.dt();
        let d = rates.len();
        let cov = DMatrix::from_fn(d, d, |a, b| innovation_covariance(rates[a] + rates[b], dt));
        let factor = if d == 0 {
            Vec::new()
        } else {
            let eig = SymmetricEigen::new(cov);
            let mut f = vec![0.0; d * d];
            for a in 0..d {
                for c in 0..d {
                    f[a * d + c] = eig.eigenvectors[(a, c)] * eig.eigenvalues[c].max(0.0).sqrt();
                }
            }
            f
        };
        let decay = rates.iter().map(|r| (-r * dt).exp()).collect();
        Ok(Self {
            forcing,
            nu,
            mesh,
            rates,
            mode_rate,
            factor,
            decay,
        })
    }

    pub fn mesh(&self) -> TimeMesh {
        self.mesh
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// One realization, deterministic in `seed`. Draw order: step-major, then
    /// direction, then rate.
    pub fn sample(&self, seed: u64) -> Result<FieldHistory> {
        let grid = self.forcing.grid();
        let d = self.rates.len();
        let kdir = self.forcing.directions();
        let steps = self.mesh.steps();
        if d == 0 {
            return Ok(FieldHistory::zeros(grid, self.mesh));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut y = vec![0.0; kdir * d];
        let mut xi = vec![0.0; d];
        let mut states = Vec::with_capacity(steps + 1);
        states.push(SpectralVectorField::zeros(grid));
        for _ in 0..steps {
            for kappa in 0..kdir {
                for x in xi.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                let yk = &mut y[kappa * d..(kappa + 1) * d];
                for a in 0..d {
                    let row = &self.factor[a * d..(a + 1) * d];
                    let eta: f64 = row.iter().zip(&xi).map(|(f, x)| f * x).sum();
                    yk[a] = self.decay[a] * yk[a] + eta;
                }
            }
            states.push(self.assemble(&y));
        }
        FieldHistory::new(self.mesh, states)
    }

    fn assemble(&self, y: &[f64]) -> SpectralVectorField {
        let grid = self.forcing.grid();
        let d = self.rates.len();
        let mut z = SpectralVectorField::zeros(grid);
        for (idx, rate) in self.mode_rate.iter().enumerate() {
            let Some(r) = *rate else { continue };
            for (kappa, m) in self.forcing.members().iter().enumerate() {
                let yk = y[kappa * d + r];
                for i in 0..3 {
                    z.coeffs_mut(i)[idx] += m.coeffs(i)[idx] * yk;
                }
            }
        }
        z
    }
}

/// `∫₀^dt e^{−s·x} ds`, stable as `x → 0`.
fn innovation_covariance(x: f64, dt: f64) -> f64 {
    let y = x * dt;
    if y.abs() < 1e-8 {
        dt * (1.0 - 0.5 * y)
    } else {
        -(-y).exp_m1() / x
    }
}

/// Exact-in-law stochastic convolution for constant forcing.
pub fn stochastic_convolution_exact(g: &ForcingSchedule, seed: u64, mesh: TimeMesh, nu: f64) -> Result<FieldHistory> {
    OuSampler::new(g, nu, mesh)?.sample(seed)
}

/// `Var Y_λ(t) = (1 − e^{−2λt})/(2λ)` (equal to `t` at `λ = 0`).
pub fn ou_variance(lambda: f64, t: f64) -> f64 {
    innovation_covariance(2.0 * lambda, t)
}

/// Variance of the exponential Euler–Maruyama recursion after `n` steps for
/// a unit forcing coefficient: `dt e^{−2λdt}(1 − e^{−2λndt})/(1 − e^{−2λdt})`.
pub fn em_variance(lambda: f64, dt: f64, n: usize) -> f64 {
    let q = (-2.0 * lambda * dt).exp();
    if lambda * dt < 1e-12 {
        return dt * n as f64;
    }
    dt * q * (1.0 - q.powi(n as i32)) / (1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_solenoidal, single_mode};
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(8, 2.0 * PI).unwrap()
    }

    #[test]
    fn increments_are_deterministic_with_right_moments() {
        let a = sample_increments(1, 1000, 100, 0.01).unwrap();
        assert_eq!(a, sample_increments(1, 1000, 100, 0.01).unwrap());
        assert_ne!(a, sample_increments(2, 1000, 100, 0.01).unwrap());
        let n = a.increments.len() as f64;
        let mean = a.increments.iter().sum::<f64>() / n;
        let var = a.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 * (0.01 / n).sqrt());
        assert!((var / 0.01 - 1.0).abs() < 0.05);
        let path = a.path(3);
        assert_eq!(path.len(), 1001);
        assert!((path[2] - a.increment(1, 3) - a.increment(2, 3)).abs() < 1e-15);
        assert!(sample_increments(1, 0, 1, 0.1).is_err());
    }

    #[test]
    fn split_seed_gives_distinct_streams() {
        let s: Vec<u64> = (0..1000).map(|r| split_seed(7, r)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }

    #[test]
    fn zero_forcing_gives_zero_history() {
        let g = grid();
        let mesh = TimeMesh::from_steps(0.1, 5).unwrap();
        let f = ForcingSchedule::zeros(g, 2).unwrap();
        let noise = sample_increments(3, 5, 2, 0.1).unwrap();
        assert!(stochastic_convolution_em(&f, &noise, 1.0, mesh).unwrap().is_zero());
        assert!(stochastic_convolution_exact(&f, 3, mesh, 1.0).unwrap().is_zero());
    }

    #[test]
    fn one_em_step_is_decayed_increment() {
        let g = grid();
        let mesh = TimeMesh::from_steps(0.1, 1).unwrap();
        let m = single_mode(g, [1, 1, 0], [1.0, -1.0, 0.0], 2.0).unwrap();
        let f = ForcingSchedule::Constant(ForcingSequence::new(vec![m.clone()]).unwrap());
        let noise = sample_increments(4, 1, 1, 0.1).unwrap();
        let z = stochastic_convolution_em(&f, &noise, 1.0, mesh).unwrap();
        let expected = m.scaled((-2.0 * 0.1_f64).exp() * noise.increment(1, 0));
        assert!(z.state(1).max_abs_diff(&expected) < 1e-16);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let g = grid();
        let mesh = TimeMesh::from_steps(0.1, 4).unwrap();
        let f = ForcingSchedule::zeros(g, 2).unwrap();
        assert!(matches!(
            stochastic_convolution_em(&f, &sample_increments(1, 4, 3, 0.1).unwrap(), 1.0, mesh),
            Err(Error::DirectionMismatch { .. })
        ));
        assert!(stochastic_convolution_em(&f, &sample_increments(1, 3, 2, 0.1).unwrap(), 1.0, mesh).is_err());
        let a = ForcingSequence::random(g, 2, 1, 1.0, 2, 1.0).unwrap();
        let b = ForcingSequence::random(g, 2, 2, 1.0, 2, 1.0).unwrap();
        let piecewise = ForcingSchedule::piecewise(vec![a.clone(), b, a.clone(), a]).unwrap();
        assert!(matches!(OuSampler::new(&piecewise, 1.0, mesh), Err(Error::TimeDependentForcing)));
    }

    #[test]
    fn variance_formulas() {
        assert!((ou_variance(0.0, 0.3) - 0.3).abs() < 1e-15);
        assert!((ou_variance(2.0, 0.3) - (1.0 - (-1.2_f64).exp()) / 4.0).abs() < 1e-15);
        assert!((em_variance(0.0, 0.1, 3) - 0.3).abs() < 1e-15);
        // unrolled recursion
        let (l, dt) = (3.0_f64, 0.05_f64);
        let mut v = 0.0;
        for _ in 0..7 {
            v = (v + dt) * (-2.0 * l * dt).exp();
        }
        assert!((em_variance(l, dt, 7) - v).abs() < 1e-15);
    }

    #[test]
    fn exact_sampler_is_real_solenoidal_and_deterministic() {
        let g = grid();
        let mesh = TimeMesh::from_steps(0.05, 6).unwrap();
        let f = ForcingSchedule::Constant(ForcingSequence::new(vec![
            random_solenoidal(g, 1, 1.0, 2).unwrap(),
            random_solenoidal(g, 2, 1.0, 2).unwrap(),
        ]).unwrap());
        let s = OuSampler::new(&f, 1.0, mesh).unwrap();
        let a = s.sample(9).unwrap();
        assert_eq!(a, s.sample(9).unwrap());
        assert!(a.max_relative_divergence() < 1e-14);
        assert!(a.states().iter().all(|z| z.hermitian_defect() < 1e-15));
        assert!(a.last().to_physical().is_ok());
    }

    /// The one-step covariance factor reproduces the stationary recursion.
    #[test]
    fn innovation_factor_squares_to_covariance() {
        let g = grid();
        let mesh = TimeMesh::from_steps(0.1, 2).unwrap();
        let f = ForcingSchedule::Constant(ForcingSequence::new(vec![random_solenoidal(g, 3, 0.0, 2).unwrap()]).unwrap());
        let s = OuSampler::new(&f, 1.0, mesh).unwrap();
        let d = s.rates.len();
        assert!(d > 3);
        for a in 0..d {
            for b in 0..d {
                let c: f64 = (0..d).map(|c| s.factor[a * d + c] * s.factor[b * d + c]).sum();
                let expected = innovation_covariance(s.rates[a] + s.rates[b], 0.1);
                assert!((c - expected).abs() < 1e-12, "{a},{b}: {c} vs {expected}");
            }
        }
    }
}
