//! Discrete Fourier representation of periodic fields on a cubic box.
//!
//! A field sampled at `x = L j / N` is stored through coefficients
//! `f̂ₖ = N⁻³ Σₓ f(x) e^{−2πi k·x/L}` so that `f(x) = Σₖ f̂ₖ e^{2πi k·x/L}`.
//! Wavenumbers live in `−N/2 ≤ kᵢ < N/2` and are stored in FFT order: index
//! `i` carries `k = i` for `i < N/2` and `k = i − N` otherwise, row-major with
//! axis 0 slowest. Multipliers are written as functions of the physical
//! frequency `ξ = k/L`; the derivative symbol is `2πiξ` and the Laplacian
//! symbol `−|2πξ|²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Imaginary residue (relative to the largest output magnitude) tolerated by
/// [`inverse_transform`] before the input is declared non-Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Spatial discretisation: `n` modes per axis on a box of side `l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    l: f64,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "modes per axis must be even and at least 8, got {n}"
            )));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box side must be positive, got {l}"
            )));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    /// Number of grid points (and of stored coefficients), `N³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        (self.l / self.n as f64).powi(3)
    }

    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        [
            self.wavenumber(idx / (n * n)),
            self.wavenumber((idx / n) % n),
            self.wavenumber(idx % n),
        ]
    }

    pub fn index_of(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let w = |ki: i64| ki.rem_euclid(n) as usize;
        (w(k[0]) * self.n + w(k[1])) * self.n + w(k[2])
    }

    /// Index of the mode `−k`.
    pub fn mirror(&self, idx: usize) -> usize {
        let k = self.mode(idx);
        self.index_of([-k[0], -k[1], -k[2]])
    }

    /// Physical frequency `ξ = k/L`.
    pub fn frequency(&self, k: [i64; 3]) -> [f64; 3] {
        [
            k[0] as f64 / self.l,
            k[1] as f64 / self.l,
            k[2] as f64 / self.l,
        ]
    }

    /// Angular wavevector `2πk/L`.
    pub fn angular(&self, k: [i64; 3]) -> [f64; 3] {
        let s = 2.0 * PI / self.l;
        [k[0] as f64 * s, k[1] as f64 * s, k[2] as f64 * s]
    }

    /// `|2πk/L|²`, the (negated) Laplacian symbol.
    pub fn laplacian_symbol(&self, k: [i64; 3]) -> f64 {
        let a = self.angular(k);
        a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
    }

    /// Modes kept by the 2/3 rule: every `|kᵢ| < N/3`.
    pub fn in_band(&self, k: [i64; 3]) -> bool {
        let n = self.n as i64;
        k.iter().all(|&ki| 3 * ki.abs() < n)
    }

    pub fn is_nyquist(&self, ki: i64) -> bool {
        ki == -(self.n as i64 / 2)
    }

    /// Coordinate `L j / N` of grid index `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        self.l * j as f64 / self.n as f64
    }

    /// Visit every stored mode as `(storage index, k)`.
    pub fn modes(&self) -> impl Iterator<Item = (usize, [i64; 3])> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i0| {
            let k0 = self.wavenumber(i0);
            (0..n).flat_map(move |i1| {
                let k1 = self.wavenumber(i1);
                (0..n).map(move |i2| ((i0 * n + i1) * n + i2, [k0, k1, self.wavenumber(i2)]))
            })
        })
    }

    /// `|2πk/L|²` for every storage index.
    pub fn laplacian_table(&self) -> Vec<f64> {
        self.modes().map(|(_, k)| self.laplacian_symbol(k)).collect()
    }
}

/// Uniform time mesh `tₙ = n·dt`, `n = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeMesh {
    dt: f64,
    steps: usize,
}

impl TimeMesh {
    /// Mesh of step `dt` covering `[0, horizon]`; the horizon must be an
    /// integer multiple of `dt`.
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidMesh(format!("dt must be positive, got {dt}")));
        }
        if !(horizon >= dt && horizon.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "need 0 < dt <= T, got dt = {dt}, T = {horizon}"
            )));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidMesh(format!(
                "T = {horizon} is not a multiple of dt = {dt}"
            )));
        }
        Self::from_steps(dt, steps as usize)
    }

    pub fn from_steps(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidMesh(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidMesh("mesh needs at least one step".into()));
        }
        Ok(Self { dt, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt * n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// Trapezoid weights on the mesh nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt; self.steps + 1];
        w[0] = 0.5 * self.dt;
        w[self.steps] = 0.5 * self.dt;
        w
    }
}

/// Full run geometry: space grid, time mesh and the two diffusivities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub grid: Grid,
    pub mesh: TimeMesh,
    pub nu1: f64,
    pub nu2: f64,
}

impl GridSpec {
    pub fn new(n: usize, l: f64, dt: f64, horizon: f64, nu1: f64, nu2: f64) -> Result<Self> {
        for (name, nu) in [("nu1", nu1), ("nu2", nu2)] {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {nu}")));
            }
        }
        Ok(Self {
            grid: Grid::new(n, l)?,
            mesh: TimeMesh::new(dt, horizon)?,
            nu1,
            nu2,
        })
    }
}

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Arc<Plan> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();
    let mut plans = PLANS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("fft plan cache poisoned");
    plans
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalised in-place 3-D DFT by axis passes.
fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let plan = plan(n);
    let fft = if inverse { &plan.inverse } else { &plan.forward };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let nn = n * n;

    // axis 2 is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut slab = vec![Complex64::default(); nn];
    // axis 1: transpose each (i1, i2) slab
    for i0 in 0..n {
        let base = i0 * nn;
        for i1 in 0..n {
            for i2 in 0..n {
                slab[i2 * n + i1] = data[base + i1 * n + i2];
            }
        }
        fft.process_with_scratch(&mut slab, &mut scratch);
        for i1 in 0..n {
            for i2 in 0..n {
                data[base + i1 * n + i2] = slab[i2 * n + i1];
            }
        }
    }
    // axis 0: transpose each (i0, i2) slab at fixed i1
    for i1 in 0..n {
        for i0 in 0..n {
            for i2 in 0..n {
                slab[i2 * n + i0] = data[i0 * nn + i1 * n + i2];
            }
        }
        fft.process_with_scratch(&mut slab, &mut scratch);
        for i0 in 0..n {
            for i2 in 0..n {
                data[i0 * nn + i1 * n + i2] = slab[i2 * n + i0];
            }
        }
    }
}

/// Fourier coefficients of one real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn at(&self, k: [i64; 3]) -> Complex64 {
        self.coeffs[self.grid.index_of(k)]
    }

    pub fn set(&mut self, k: [i64; 3], value: Complex64) {
        let idx = self.grid.index_of(k);
        self.coeffs[idx] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|f̂₋ₖ − conj(f̂ₖ)|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.mirror(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_physical(&self) -> Result<Vec<f64>> {
        inverse_transform(self)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
        }
    }
}

/// Coefficients `f̂ₖ = N⁻³ Σₓ f(x) e^{−2πi k·x/L}` of real grid samples
/// (row-major, axis 0 slowest). The result is made exactly Hermitian.
pub fn forward_transform(grid: Grid, samples: &[f64]) -> Result<SpectralField> {
    if samples.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft3(&mut data, grid.n(), false);
    let scale = 1.0 / grid.len() as f64;
    let mut out = vec![Complex64::default(); data.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let j = grid.mirror(i);
        *slot = (data[i] + data[j].conj()) * (0.5 * scale);
    }
    Ok(SpectralField { grid, coeffs: out })
}

/// Grid values `f(x) = Σₖ f̂ₖ e^{2πi k·x/L}`. The imaginary residue must stay
/// below [`HERMITIAN_TOLERANCE`] relative to the output magnitude.
pub fn inverse_transform(spec: &SpectralField) -> Result<Vec<f64>> {
    let mut data = spec.coeffs.clone();
    fft3(&mut data, spec.grid.n(), true);
    let mut max_abs = 0.0_f64;
    let mut max_im = 0.0_f64;
    for c in &data {
        max_abs = max_abs.max(c.norm());
        max_im = max_im.max(c.im.abs());
    }
    if max_abs > 0.0 {
        let residue = max_im / max_abs;
        if residue > HERMITIAN_TOLERANCE {
            return Err(Error::HermitianViolation { residue });
        }
    }
    Ok(data.into_iter().map(|c| c.re).collect())
}

/// Multiply every coefficient by `m(ξ)`, `ξ = k/L`. A non-finite symbol is
/// tolerated only on modes whose coefficient is zero; those stay zero.
pub fn apply_symbol<F>(spec: &SpectralField, m: F) -> Result<SpectralField>
where
    F: Fn([f64; 3]) -> f64,
{
    let grid = spec.grid;
    let mut out = vec![Complex64::default(); grid.len()];
    for (idx, k) in grid.modes() {
        let c = spec.coeffs[idx];
        let s = m(grid.frequency(k));
        if s.is_finite() {
            out[idx] = c * s;
        } else if c != Complex64::default() {
            return Err(Error::SingularSymbol { k });
        }
    }
    Ok(SpectralField { grid, coeffs: out })
}

/// 2/3-rule truncation: zero every mode with some `|kᵢ| ≥ N/3`.
pub fn dealias(spec: &SpectralField) -> SpectralField {
    let mut out = spec.clone();
    dealias_in_place(&mut out.coeffs, spec.grid);
    out
}

pub(crate) fn dealias_in_place(coeffs: &mut [Complex64], grid: Grid) {
    for (idx, k) in grid.modes() {
        if !grid.in_band(k) {
            coeffs[idx] = Complex64::default();
        }
    }
}

/// `|2πξ|` for a physical frequency `ξ`.
pub fn two_pi_norm(xi: [f64; 3]) -> f64 {
    2.0 * PI * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()
}

/// Fourier coefficients of a real 3-component vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVectorField {
    grid: Grid,
    comps: [Vec<Complex64>; 3],
}

impl SpectralVectorField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        Self {
            grid,
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_components(c: [SpectralField; 3]) -> Result<Self> {
        let grid = c[0].grid;
        if c[1].grid != grid || c[2].grid != grid {
            return Err(Error::GridMismatch);
        }
        let [a, b, d] = c;
        Ok(Self {
            grid,
            comps: [a.coeffs, b.coeffs, d.coeffs],
        })
    }

    pub fn from_coeffs(grid: Grid, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::SizeMismatch {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn from_physical(grid: Grid, samples: [&[f64]; 3]) -> Result<Self> {
        Self::from_components([
            forward_transform(grid, samples[0])?,
            forward_transform(grid, samples[1])?,
            forward_transform(grid, samples[2])?,
        ])
    }

    pub fn to_physical(&self) -> Result<[Vec<f64>; 3]> {
        Ok([
            inverse_transform(&self.component(0))?,
            inverse_transform(&self.component(1))?,
            inverse_transform(&self.component(2))?,
        ])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    pub fn coeffs_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.comps[i]
    }

    pub fn component(&self, i: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.comps[i].clone(),
        }
    }

    /// Coefficient vector `v̂(k)`.
    pub fn at(&self, k: [i64; 3]) -> [Complex64; 3] {
        let idx = self.grid.index_of(k);
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    pub fn set(&mut self, k: [i64; 3], value: [Complex64; 3]) {
        let idx = self.grid.index_of(k);
        for (c, v) in self.comps.iter_mut().zip(value) {
            c[idx] = v;
        }
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        for c in self.comps.iter_mut() {
            for z in c.iter_mut() {
                *z *= alpha;
            }
        }
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "axpy across grids");
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * alpha;
            }
        }
    }

    /// Multiply each mode by a real per-index factor.
    pub fn scale_modes(&mut self, factors: &[f64]) {
        for c in self.comps.iter_mut() {
            for (z, f) in c.iter_mut().zip(factors) {
                *z *= *f;
            }
        }
    }

    /// Apply a real symbol `m(ξ)` to every component.
    pub fn apply_symbol<F>(&self, m: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> f64,
    {
        let grid = self.grid;
        let mut out = Self::zeros(grid);
        for (idx, k) in grid.modes() {
            let s = m(grid.frequency(k));
            for i in 0..3 {
                let c = self.comps[i][idx];
                if s.is_finite() {
                    out.comps[i][idx] = c * s;
                } else if c != Complex64::default() {
                    return Err(Error::SingularSymbol { k });
                }
            }
        }
        Ok(out)
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias();
        out
    }

    pub fn dealias(&mut self) {
        let grid = self.grid;
        for c in self.comps.iter_mut() {
            dealias_in_place(c, grid);
        }
    }

    pub fn mean(&self) -> [Complex64; 3] {
        [self.comps[0][0], self.comps[1][0], self.comps[2][0]]
    }

    /// Remove the `k = 0` mode.
    pub fn remove_mean(&mut self) {
        for c in self.comps.iter_mut() {
            c[0] = Complex64::default();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// `max_i |a − b|` coefficient-wise.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        (0..3)
            .map(|i| self.component(i).hermitian_defect())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|z| *z == Complex64::default()))
    }
}

impl Add for &SpectralVectorField {
    type Output = SpectralVectorField;

    fn add(self, rhs: Self) -> SpectralVectorField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralVectorField {
    type Output = SpectralVectorField;

    fn sub(self, rhs: Self) -> SpectralVectorField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralVectorField {
    type Output = SpectralVectorField;

    fn mul(self, rhs: f64) -> SpectralVectorField {
        self.scaled(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn samples(g: Grid, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let n = g.n();
        let mut out = Vec::with_capacity(g.len());
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(f([g.coordinate(a), g.coordinate(b), g.coordinate(c)]));
                }
            }
        }
        out
    }

    fn random_hermitian(g: Grid, rng: &mut impl Rng) -> SpectralField {
        let mut s = SpectralField::zeros(g);
        for (idx, k) in g.modes() {
            if k.iter().any(|&ki| g.is_nyquist(ki)) {
                continue;
            }
            let j = g.mirror(idx);
            if j < idx {
                continue;
            }
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if j == idx {
                s.coeffs[idx] = Complex64::new(c.re, 0.0);
            } else {
                s.coeffs[idx] = c;
                s.coeffs[j] = c.conj();
            }
        }
        s
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(9, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(TimeMesh::new(0.3, 1.0).is_err());
        assert!(TimeMesh::new(2.0, 1.0).is_err());
        assert_eq!(TimeMesh::new(0.25, 1.0).unwrap().steps(), 4);
    }

    #[test]
    fn constant_field_lands_on_mean_mode() {
        let g = grid(8);
        let s = forward_transform(g, &vec![3.5; g.len()]).unwrap();
        for (idx, k) in g.modes() {
            let expected = if k == [0, 0, 0] { 3.5 } else { 0.0 };
            assert!((s.coeffs()[idx] - Complex64::new(expected, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn cosine_is_two_half_modes() {
        let g = Grid::new(8, 3.0).unwrap();
        let f = samples(g, |x| (2.0 * PI * x[0] / 3.0).cos());
        let s = forward_transform(g, &f).unwrap();
        for (idx, k) in g.modes() {
            let expected = if k == [1, 0, 0] || k == [-1, 0, 0] { 0.5 } else { 0.0 };
            assert!((s.coeffs()[idx] - Complex64::new(expected, 0.0)).norm() < 1e-14);
        }
        let back = inverse_transform(&s).unwrap();
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_spectrum_is_constant_one() {
        let g = grid(8);
        let mut s = SpectralField::zeros(g);
        s.set([0, 0, 0], Complex64::new(1.0, 0.0));
        let f = inverse_transform(&s).unwrap();
        assert!(f.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn roundtrip_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let g = grid([8, 10, 12, 16][trial % 4]);
            let f: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let back = inverse_transform(&forward_transform(g, &f).unwrap()).unwrap();
            let scale = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let err = back
                .iter()
                .zip(&f)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-12 * scale, "trial {trial}: {err}");
        }
    }

    #[test]
    fn inverse_matches_direct_summation() {
        let g = Grid::new(8, 1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_hermitian(g, &mut rng);
        let f = inverse_transform(&s).unwrap();
        let n = g.n();
        for _ in 0..10 {
            let j = [
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            ];
            let x = [g.coordinate(j[0]), g.coordinate(j[1]), g.coordinate(j[2])];
            let mut direct = Complex64::default();
            for (idx, k) in g.modes() {
                let phase = 2.0 * PI / g.side()
                    * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                direct += s.coeffs()[idx] * Complex64::from_polar(1.0, phase);
            }
            let got = f[(j[0] * n + j[1]) * n + j[2]];
            assert!((direct.re - got).abs() < 1e-10);
            assert!(direct.im.abs() < 1e-10);
        }
    }

    #[test]
    fn broken_symmetry_is_rejected() {
        let g = grid(8);
        let mut s = SpectralField::zeros(g);
        s.set([1, 0, 0], Complex64::new(1.0, 0.0));
        assert!(matches!(
            inverse_transform(&s),
            Err(Error::HermitianViolation { .. })
        ));
        assert!(matches!(
            forward_transform(g, &[0.0; 10]),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn symbols_identity_heat_and_singular() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_hermitian(g, &mut rng);
        assert_eq!(apply_symbol(&s, |_| 1.0).unwrap(), s);

        let mut single = SpectralField::zeros(g);
        single.set([1, 0, 0], Complex64::new(0.5, 0.0));
        single.set([-1, 0, 0], Complex64::new(0.5, 0.0));
        let t = g.side().powi(2) / (4.0 * PI * PI);
        let heated = apply_symbol(&single, |xi| (-t * two_pi_norm(xi).powi(2)).exp()).unwrap();
        assert!((heated.at([1, 0, 0]).re - 0.5 * (-1.0_f64).exp()).abs() < 1e-15);

        let inv = |xi: [f64; 3]| 1.0 / two_pi_norm(xi);
        assert!(matches!(apply_symbol(&s, inv), Err(Error::SingularSymbol { .. })));
        let mut mean_free = s.clone();
        mean_free.set([0, 0, 0], Complex64::default());
        let out = apply_symbol(&mean_free, inv).unwrap();
        assert_eq!(out.at([0, 0, 0]), Complex64::default());
    }

    #[test]
    fn symbol_composition() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_hermitian(g, &mut rng);
        let m1 = |xi: [f64; 3]| (-0.1 * two_pi_norm(xi).powi(2)).exp();
        let m2 = |xi: [f64; 3]| 1.0 + two_pi_norm(xi).powf(1.5);
        let two = apply_symbol(&apply_symbol(&s, m2).unwrap(), m1).unwrap();
        let one = apply_symbol(&s, |xi| m1(xi) * m2(xi)).unwrap();
        for (a, b) in two.coeffs().iter().zip(one.coeffs()) {
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300) + 1e-300);
        }
        assert!(two.hermitian_defect() < 1e-15);
    }

    #[test]
    fn dealias_keeps_band_and_kills_high_modes() {
        let g = grid(12);
        let mut low = SpectralField::zeros(g);
        low.set([3, -3, 2], Complex64::new(1.0, 2.0));
        low.set([-3, 3, -2], Complex64::new(1.0, -2.0));
        assert_eq!(dealias(&low), low);
        let mut high = SpectralField::zeros(g);
        high.set([5, 0, 0], Complex64::new(1.0, 0.0));
        high.set([-5, 0, 0], Complex64::new(1.0, 0.0));
        assert!(dealias(&high).max_abs() == 0.0);
    }

    /// Zero-padded convolution oracle: multiply on a 2N grid (no aliasing
    /// for band-limited inputs), truncate back.
    #[test]
    fn dealiased_product_matches_padded_convolution() {
        let g = grid(12);
        let big = grid(24);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let band = |rng: &mut ChaCha8Rng| {
            let mut s = random_hermitian(g, rng);
            for (idx, k) in g.modes() {
                if !g.in_band(k) {
                    s.coeffs[idx] = Complex64::default();
                }
            }
            s
        };
        let a = band(&mut rng);
        let b = band(&mut rng);
        let pa = inverse_transform(&a).unwrap();
        let pb = inverse_transform(&b).unwrap();
        let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let coarse = dealias(&forward_transform(g, &prod).unwrap());

        let pad = |s: &SpectralField| {
            let mut out = SpectralField::zeros(big);
            for (idx, k) in g.modes() {
                out.set(k, s.coeffs()[idx]);
            }
            out
        };
        let qa = inverse_transform(&pad(&a)).unwrap();
        let qb = inverse_transform(&pad(&b)).unwrap();
        let fine_prod: Vec<f64> = qa.iter().zip(&qb).map(|(x, y)| x * y).collect();
        let fine = forward_transform(big, &fine_prod).unwrap();
        for (idx, k) in g.modes() {
            let expected = if g.in_band(k) { fine.at(k) } else { Complex64::default() };
            assert!((coarse.coeffs()[idx] - expected).norm() < 1e-10);
        }
    }
}
