//! Divergence-free vector fields, forcing sequences and field histories.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, SpectralVectorField, TimeMesh};

/// Relative divergence accepted for a field to count as solenoidal.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spectral divergence: coefficient `2πi (k/L)·v̂(k)`. Nyquist components of
/// the derivative symbol are dropped (they have no real-valued meaning).
pub fn divergence(v: &SpectralVectorField) -> SpectralField {
    let grid = v.grid();
    let mut out = SpectralField::zeros(grid);
    let coeffs = out.coeffs_mut();
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let mut acc = Complex64::default();
        for (i, ai) in a.iter().enumerate() {
            acc += v.coeffs(i)[idx] * *ai;
        }
        coeffs[idx] = I * acc;
    }
    out
}

/// Spectral gradient of a scalar field.
pub fn gradient(f: &SpectralField) -> SpectralVectorField {
    let grid = f.grid();
    let mut out = SpectralVectorField::zeros(grid);
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let c = f.coeffs()[idx];
        for (i, ai) in a.iter().enumerate() {
            out.coeffs_mut(i)[idx] = I * c * *ai;
        }
    }
    out
}

/// `2πk/L` with Nyquist components zeroed.
pub(crate) fn derivative_wavevector(grid: Grid, k: [i64; 3]) -> [f64; 3] {
    let mut a = grid.angular(k);
    for (ai, &ki) in a.iter_mut().zip(&k) {
        if grid.is_nyquist(ki) {
            *ai = 0.0;
        }
    }
    a
}

/// `‖∇·v‖ / ‖∇v‖` measured spectrally; zero for the zero field.
pub fn relative_divergence(v: &SpectralVectorField) -> f64 {
    let grid = v.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let mut dot = Complex64::default();
        let mut mag = 0.0;
        for (i, ai) in a.iter().enumerate() {
            let c = v.coeffs(i)[idx];
            dot += c * *ai;
            mag += c.norm_sqr();
        }
        num += dot.norm_sqr();
        den += mag * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Largest per-mode ratio `|k·v̂(k)| / (|k| max_k |v̂(k)|)`.
fn max_mode_divergence(v: &SpectralVectorField) -> f64 {
    let grid = v.grid();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let norm_a = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if norm_a == 0.0 {
            continue;
        }
        let mut dot = Complex64::default();
        let mut mag = 0.0;
        for (i, ai) in a.iter().enumerate() {
            let c = v.coeffs(i)[idx];
            dot += c * (*ai / norm_a);
            mag += c.norm_sqr();
        }
        worst = worst.max(dot.norm());
        scale = scale.max(mag.sqrt());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Seeded random divergence-free field, band-limited to `|kᵢ| ≤ kmax` with
/// envelope `(1+|k|)^{−σ}`.
///
/// Modes are drawn in a canonical order that depends only on `kmax`, so the
/// same seed yields the same physical field on every grid that resolves it.
/// The generator is ChaCha20 seeded through `seed_from_u64`; each mode of the
/// upper half-space consumes six standard normals (re/im of three components).
pub fn random_solenoidal(grid: Grid, seed: u64, sigma: f64, kmax: usize) -> Result<SpectralVectorField> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("spectral decay must be >= 0, got {sigma}")));
    }
    if kmax == 0 || 3 * kmax >= grid.n() {
        return Err(Error::InvalidArgument(format!(
            "kmax = {kmax} must satisfy 1 <= kmax < N/3 = {}",
            grid.n() as f64 / 3.0
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = SpectralVectorField::zeros(grid);
    let km = kmax as i64;
    for k0 in -km..=km {
        for k1 in -km..=km {
            for k2 in -km..=km {
                let k = [k0, k1, k2];
                if !upper_half(k) {
                    continue;
                }
                let mut c = [Complex64::default(); 3];
                for ci in c.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *ci = Complex64::new(re, im);
                }
                let kf = [k0 as f64, k1 as f64, k2 as f64];
                let k2n = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
                let dot = c[0] * kf[0] + c[1] * kf[1] + c[2] * kf[2];
                let envelope = (1.0 + k2n.sqrt()).powf(-sigma);
                let mut v = [Complex64::default(); 3];
                for i in 0..3 {
                    v[i] = (c[i] - dot * (kf[i] / k2n)) * envelope;
                }
                out.set(k, v);
                out.set([-k0, -k1, -k2], [v[0].conj(), v[1].conj(), v[2].conj()]);
            }
        }
    }
    Ok(out)
}

/// Strict upper half of ℤ³ in lexicographic order (excludes 0).
pub(crate) fn upper_half(k: [i64; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
}

/// Taylor–Green cell `A (sin x cos y cos z, −cos x sin y cos z, 0)` in
/// units where one period spans the box.
pub fn taylor_green(grid: Grid, amplitude: f64) -> Result<SpectralVectorField> {
    let a = 2.0 * PI / grid.side();
    let n = grid.n();
    let mut ux = Vec::with_capacity(grid.len());
    let mut uy = Vec::with_capacity(grid.len());
    for i0 in 0..n {
        let x = a * grid.coordinate(i0);
        for i1 in 0..n {
            let y = a * grid.coordinate(i1);
            for i2 in 0..n {
                let z = a * grid.coordinate(i2);
                ux.push(amplitude * x.sin() * y.cos() * z.cos());
                uy.push(-amplitude * x.cos() * y.sin() * z.cos());
            }
        }
    }
    let uz = vec![0.0; grid.len()];
    SpectralVectorField::from_physical(grid, [&ux, &uy, &uz])
}

/// `A cos(2π k·x/L) e` with `e ⟂ k`.
pub fn single_mode(grid: Grid, k: [i64; 3], e: [f64; 3], amplitude: f64) -> Result<SpectralVectorField> {
    let dot = k[0] as f64 * e[0] + k[1] as f64 * e[1] + k[2] as f64 * e[2];
    let scale = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
        * ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
    if dot.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "polarisation {e:?} is not orthogonal to k = {k:?}"
        )));
    }
    if k == [0, 0, 0] || k.iter().any(|&ki| grid.is_nyquist(ki) || ki.abs() >= grid.n() as i64 / 2) {
        return Err(Error::InvalidArgument(format!("mode {k:?} is not representable")));
    }
    let mut out = SpectralVectorField::zeros(grid);
    let half = |x: f64| Complex64::new(0.5 * amplitude * x, 0.0);
    let c = [half(e[0]), half(e[1]), half(e[2])];
    out.set(k, c);
    out.set([-k[0], -k[1], -k[2]], c);
    Ok(out)
}

/// Finite family `(G¹,…,G^K)` of divergence-free fields, one per Wiener
/// direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSequence {
    members: Vec<SpectralVectorField>,
}

impl ForcingSequence {
    pub fn new(members: Vec<SpectralVectorField>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("forcing needs at least one direction".into()));
        }
        let grid = members[0].grid();
        for (i, m) in members.iter().enumerate() {
            if m.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let residual = max_mode_divergence(m);
            if residual > SOLENOIDAL_TOLERANCE {
                return Err(Error::NotSolenoidal { member: i, residual });
            }
        }
        Ok(Self { members })
    }

    pub fn zeros(grid: Grid, directions: usize) -> Result<Self> {
        Self::new(vec![SpectralVectorField::zeros(grid); directions.max(1)])
    }

    /// `K` independent random solenoidal members drawn from sub-seeds of `seed`.
    pub fn random(grid: Grid, directions: usize, seed: u64, sigma: f64, kmax: usize, amplitude: f64) -> Result<Self> {
        let members = (0..directions)
            .map(|kappa| {
                random_solenoidal(grid, crate::noise::split_seed(seed, kappa as u64), sigma, kmax)
                    .map(|f| f.scaled(amplitude))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn directions(&self) -> usize {
        self.members.len()
    }

    pub fn grid(&self) -> Grid {
        self.members[0].grid()
    }

    pub fn members(&self) -> &[SpectralVectorField] {
        &self.members
    }

    pub fn member(&self, kappa: usize) -> &SpectralVectorField {
        &self.members[kappa]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            members: self.members.iter().map(|m| m.scaled(alpha)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.members.iter().all(SpectralVectorField::is_zero)
    }

    pub fn map<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&SpectralVectorField) -> SpectralVectorField,
    {
        Self::new(self.members.iter().map(f).collect())
    }
}

/// Forcing in time: either constant, or piecewise constant with member `s`
/// active on `(t_s, t_{s+1}]`.
#[derive(Clone, Debug, PartialEq)]
pub enum ForcingSchedule {
    Constant(ForcingSequence),
    Piecewise(Vec<ForcingSequence>),
}

impl ForcingSchedule {
    pub fn piecewise(steps: Vec<ForcingSequence>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty forcing schedule".into()))?;
        let (grid, k) = (first.grid(), first.directions());
        if steps.iter().any(|s| s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        if let Some(bad) = steps.iter().find(|s| s.directions() != k) {
            return Err(Error::DirectionMismatch {
                noise: k,
                forcing: bad.directions(),
            });
        }
        Ok(Self::Piecewise(steps))
    }

    pub fn zeros(grid: Grid, directions: usize) -> Result<Self> {
        Ok(Self::Constant(ForcingSequence::zeros(grid, directions)?))
    }

    /// Forcing active on step `s`, i.e. on `(t_s, t_{s+1}]`.
    pub fn on_step(&self, s: usize) -> &ForcingSequence {
        match self {
            Self::Constant(g) => g,
            Self::Piecewise(steps) => &steps[s.min(steps.len() - 1)],
        }
    }

    pub fn directions(&self) -> usize {
        self.on_step(0).directions()
    }

    pub fn grid(&self) -> Grid {
        self.on_step(0).grid()
    }

    /// Number of steps covered, `None` when constant.
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Constant(_) => None,
            Self::Piecewise(s) => Some(s.len()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Constant(g) => g.is_zero(),
            Self::Piecewise(s) => s.iter().all(ForcingSequence::is_zero),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            Self::Constant(g) => Self::Constant(g.scaled(alpha)),
            Self::Piecewise(s) => Self::Piecewise(s.iter().map(|g| g.scaled(alpha)).collect()),
        }
    }
}

/// States `v(t₀), …, v(t_M)` on a uniform mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHistory {
    mesh: TimeMesh,
    states: Vec<SpectralVectorField>,
}

impl FieldHistory {
    pub fn new(mesh: TimeMesh, states: Vec<SpectralVectorField>) -> Result<Self> {
        if states.len() != mesh.steps() + 1 {
            return Err(Error::SizeMismatch {
                expected: mesh.steps() + 1,
                got: states.len(),
            });
        }
        let grid = states[0].grid();
        if states.iter().any(|s| s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { mesh, states })
    }

    pub fn zeros(grid: Grid, mesh: TimeMesh) -> Self {
        Self {
            mesh,
            states: vec![SpectralVectorField::zeros(grid); mesh.steps() + 1],
        }
    }

    pub fn constant(v: &SpectralVectorField, mesh: TimeMesh) -> Self {
        Self {
            mesh,
            states: vec![v.clone(); mesh.steps() + 1],
        }
    }

    pub fn mesh(&self) -> TimeMesh {
        self.mesh
    }

    pub fn grid(&self) -> Grid {
        self.states[0].grid()
    }

    pub fn states(&self) -> &[SpectralVectorField] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &SpectralVectorField {
        &self.states[n]
    }

    pub fn last(&self) -> &SpectralVectorField {
        &self.states[self.states.len() - 1]
    }

    pub fn into_states(self) -> Vec<SpectralVectorField> {
        self.states
    }

    pub fn ensure_compatible(&self, other: &Self) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        if self.grid() != other.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// First `steps + 1` states as a history on `[0, steps·dt]`.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        let mesh = TimeMesh::from_steps(self.mesh.dt(), steps)?;
        if steps > self.mesh.steps() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} steps to {steps}",
                self.mesh.steps()
            )));
        }
        Ok(Self {
            mesh,
            states: self.states[..=steps].to_vec(),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            mesh: self.mesh,
            states: self.states.iter().map(|s| s.scaled(alpha)).collect(),
        }
    }

    /// `self + alpha · other`, state by state.
    pub fn combine(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.ensure_compatible(other)?;
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| {
                let mut s = a.clone();
                s.axpy(alpha, b);
                s
            })
            .collect();
        Ok(Self { mesh: self.mesh, states })
    }

    pub fn max_relative_divergence(&self) -> f64 {
        self.states.iter().map(relative_divergence).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.states.iter().all(SpectralVectorField::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::sobolev_norm;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn gradient_fields_have_full_divergence() {
        let g = grid(8);
        let mut phi = SpectralField::zeros(g);
        phi.set([1, 2, 0], Complex64::new(0.3, 0.1));
        phi.set([-1, -2, 0], Complex64::new(0.3, -0.1));
        let v = gradient(&phi);
        let d = divergence(&v);
        // ∇·∇φ = −|k|²φ for L = 2π
        let expected = -Complex64::new(0.3, 0.1) * 5.0;
        assert!((d.at([1, 2, 0]) - expected).norm() < 1e-14);
        assert!(relative_divergence(&v) > 0.99);
    }

    #[test]
    fn random_solenoidal_is_divergence_free_and_deterministic() {
        let g = grid(16);
        let a = random_solenoidal(g, 42, 1.5, 4).unwrap();
        let b = random_solenoidal(g, 42, 1.5, 4).unwrap();
        assert_eq!(a, b);
        assert!(relative_divergence(&a) < 1e-14);
        assert!(divergence(&a).max_abs() < 1e-12);
        assert_eq!(a.mean(), [Complex64::default(); 3]);
        assert!(a.hermitian_defect() == 0.0);
        assert_ne!(a, random_solenoidal(g, 43, 1.5, 4).unwrap());
        assert!(random_solenoidal(g, 1, 1.0, 6).is_err());
        assert!(random_solenoidal(g, 1, -1.0, 2).is_err());
    }

    #[test]
    fn random_field_is_grid_independent() {
        let a = random_solenoidal(grid(32), 5, 2.0, 8).unwrap();
        let b = random_solenoidal(grid(48), 5, 2.0, 8).unwrap();
        let na = sobolev_norm(&a, 1.0, 2.0).unwrap();
        let nb = sobolev_norm(&b, 1.0, 2.0).unwrap();
        assert!(na.is_finite() && na > 0.0);
        assert!((na - nb).abs() <= 0.01 * na);
    }

    /// Finite-difference oracle: centred differences converge to the spectral
    /// divergence at second order.
    #[test]
    fn divergence_matches_centred_differences() {
        let errors: Vec<f64> = [16usize, 32]
            .iter()
            .map(|&n| {
                let g = grid(n);
                // un-projected smooth field (nonzero divergence)
                let mut v = random_solenoidal(g, 8, 0.0, 2).unwrap();
                let mut phi = SpectralField::zeros(g);
                phi.set([1, 1, 0], Complex64::new(0.4, 0.2));
                phi.set([-1, -1, 0], Complex64::new(0.4, -0.2));
                phi.set([0, 2, 1], Complex64::new(-0.3, 0.1));
                phi.set([0, -2, -1], Complex64::new(-0.3, -0.1));
                v.axpy(1.0, &gradient(&phi));
                let spectral = divergence(&v).to_physical().unwrap();
                let p = v.to_physical().unwrap();
                let h = g.side() / n as f64;
                let at = |c: usize, i: [usize; 3]| p[c][(i[0] * n + i[1]) * n + i[2]];
                let mut err = 0.0_f64;
                for i0 in 0..n {
                    for i1 in 0..n {
                        for i2 in 0..n {
                            let idx = [i0, i1, i2];
                            let mut fd = 0.0;
                            for c in 0..3 {
                                let mut up = idx;
                                let mut dn = idx;
                                up[c] = (idx[c] + 1) % n;
                                dn[c] = (idx[c] + n - 1) % n;
                                fd += (at(c, up) - at(c, dn)) / (2.0 * h);
                            }
                            err = err.max((fd - spectral[(i0 * n + i1) * n + i2]).abs());
                        }
                    }
                }
                err
            })
            .collect();
        let order = (errors[0] / errors[1]).log2();
        assert!(order >= 1.9, "observed order {order}, errors {errors:?}");
    }

    #[test]
    fn single_mode_and_taylor_green_are_solenoidal() {
        let g = grid(8);
        let m = single_mode(g, [1, 0, 0], [0.0, 1.0, 0.0], 2.0).unwrap();
        assert_eq!(relative_divergence(&m), 0.0);
        assert!(single_mode(g, [1, 0, 0], [1.0, 0.0, 0.0], 1.0).is_err());
        let tg = taylor_green(g, 1.0).unwrap();
        assert!(relative_divergence(&tg) < 1e-14);
        assert!((tg.at([1, 1, 1])[0] - Complex64::new(0.0, -0.125)).norm() < 1e-14);
    }

    #[test]
    fn forcing_rejects_compressible_members() {
        let g = grid(8);
        let mut phi = SpectralField::zeros(g);
        phi.set([1, 0, 0], Complex64::new(1.0, 0.0));
        phi.set([-1, 0, 0], Complex64::new(1.0, 0.0));
        let bad = gradient(&phi);
        assert!(matches!(
            ForcingSequence::new(vec![bad]),
            Err(Error::NotSolenoidal { member: 0, .. })
        ));
        let good = ForcingSequence::random(g, 3, 1, 1.0, 2, 1.0).unwrap();
        assert_eq!(good.directions(), 3);
    }

    #[test]
    fn history_shape_is_checked() {
        let g = grid(8);
        let mesh = TimeMesh::from_steps(0.1, 3).unwrap();
        assert!(FieldHistory::new(mesh, vec![SpectralVectorField::zeros(g); 3]).is_err());
        let h = FieldHistory::zeros(g, mesh);
        assert_eq!(h.truncated(2).unwrap().states().len(), 3);
        assert!(h.truncated(4).is_err());
    }
}
