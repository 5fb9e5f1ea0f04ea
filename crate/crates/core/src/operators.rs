//! Leray projection, heat semigroup, fractional Laplacian, the projected
//! nonlinear flux and the Duhamel bilinear map.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{derivative_wavevector, FieldHistory};
use crate::spectral::{forward_transform, Grid, SpectralVectorField, TimeMesh};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `v̂ − k(k·v̂)/|k|²` mode by mode; the mean passes through.
pub fn leray_project(v: &SpectralVectorField) -> SpectralVectorField {
    let mut out = v.clone();
    leray_in_place(&mut out);
    out
}

pub(crate) fn leray_in_place(v: &mut SpectralVectorField) {
    let grid = v.grid();
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let a2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        if a2 == 0.0 {
            continue;
        }
        let c = [v.coeffs(0)[idx], v.coeffs(1)[idx], v.coeffs(2)[idx]];
        let dot = (c[0] * a[0] + c[1] * a[1] + c[2] * a[2]) / a2;
        for i in 0..3 {
            v.coeffs_mut(i)[idx] = c[i] - dot * a[i];
        }
    }
}

/// Per-mode heat factors `e^{−ν t |2πk/L|²}` in storage order.
pub fn heat_factors(grid: Grid, nu: f64, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("heat time must be >= 0, got {t}")));
    }
    Ok(grid
        .modes()
        .map(|(_, k)| (-nu * t * grid.laplacian_symbol(k)).exp())
        .collect())
}

/// `S(t)v = e^{νtΔ}v`.
pub fn heat_propagate(t: f64, nu: f64, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    let factors = heat_factors(v.grid(), nu, t)?;
    let mut out = v.clone();
    out.scale_modes(&factors);
    Ok(out)
}

/// `(−Δ)^{n/2}` with symbol `|2πk/L|ⁿ`. The mean mode stays zero for
/// `n > 0`; for `n < 0` it must already vanish.
pub fn fractional_laplacian(n: f64, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    if n == 0.0 {
        return Ok(v.clone());
    }
    let grid = v.grid();
    if n < 0.0 && v.mean().iter().any(|c| *c != Complex64::default()) {
        return Err(Error::SingularSymbol { k: [0, 0, 0] });
    }
    let mut factors: Vec<f64> = grid
        .modes()
        .map(|(_, k)| grid.laplacian_symbol(k).powf(0.5 * n))
        .collect();
    factors[0] = 0.0;
    let mut out = v.clone();
    out.scale_modes(&factors);
    Ok(out)
}

/// Grid samples of a vector field, reused across several products.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl PhysicalField {
    pub fn from_spectral(v: &SpectralVectorField) -> Result<Self> {
        Ok(Self {
            grid: v.grid(),
            comps: v.to_physical()?,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|x| *x == 0.0))
    }
}

/// `P∇·(u⊗v)`, with `[∇·(u⊗v)]ⁱ = Σⱼ ∂ⱼ(uʲvⁱ)`: products on the grid,
/// spectral divergence, 2/3 truncation, projection.
pub fn nonlinear_flux(u: &SpectralVectorField, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    u.ensure_same_grid(v)?;
    let pu = PhysicalField::from_spectral(u)?;
    let pv = PhysicalField::from_spectral(v)?;
    Ok(flux_pair(&pu, &pv)?.0)
}

/// `(P∇·(u⊗v), P∇·(v⊗u))` from one set of nine products: the two tensors are
/// transposes of each other.
pub fn flux_pair(u: &PhysicalField, v: &PhysicalField) -> Result<(SpectralVectorField, SpectralVectorField)> {
    if u.grid != v.grid {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid;
    let mut uv = SpectralVectorField::zeros(grid);
    let mut vu = SpectralVectorField::zeros(grid);
    if u.is_zero() || v.is_zero() {
        return Ok((uv, vu));
    }
    let table: Vec<[f64; 3]> = grid.modes().map(|(_, k)| derivative_wavevector(grid, k)).collect();
    let mut prod = vec![0.0; grid.len()];
    for j in 0..3 {
        for i in 0..3 {
            // T_{ji} = uʲ vⁱ
            for ((p, a), b) in prod.iter_mut().zip(&u.comps[j]).zip(&v.comps[i]) {
                *p = a * b;
            }
            let t = forward_transform(grid, &prod)?;
            let t = t.coeffs();
            // flux(u,v)ⁱ += ∂ⱼ T_{ji};  flux(v,u)ʲ += ∂ᵢ T_{ji}
            let out_uv = uv.coeffs_mut(i);
            for ((o, c), a) in out_uv.iter_mut().zip(t).zip(&table) {
                *o += I * c * a[j];
            }
            let out_vu = vu.coeffs_mut(j);
            for ((o, c), a) in out_vu.iter_mut().zip(t).zip(&table) {
                *o += I * c * a[i];
            }
        }
    }
    for f in [&mut uv, &mut vu] {
        f.dealias();
        leray_in_place(f);
    }
    Ok((uv, vu))
}

/// Time quadrature for the Duhamel integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DuhamelRule {
    /// `Bₙ = S(dt)Bₙ₋₁ + (dt/2)(S(dt)fₙ₋₁ + fₙ)`.
    Trapezoid,
    /// Exact exponential integration of the piecewise-linear interpolant of
    /// the flux (an independent second-order reference).
    LinearEtd,
}

/// Exponential-trapezoid Duhamel sum `B₀ = 0`,
/// `Bₙ = S(dt)Bₙ₋₁ + (dt/2)(S(dt)fₙ₋₁ + fₙ)`.
pub fn duhamel(fluxes: &[SpectralVectorField], mesh: TimeMesh, nu: f64) -> Result<FieldHistory> {
    duhamel_with(fluxes, mesh, nu, DuhamelRule::Trapezoid)
}

pub fn duhamel_with(fluxes: &[SpectralVectorField], mesh: TimeMesh, nu: f64, rule: DuhamelRule) -> Result<FieldHistory> {
    if fluxes.len() != mesh.steps() + 1 {
        return Err(Error::SizeMismatch {
            expected: mesh.steps() + 1,
            got: fluxes.len(),
        });
    }
    let grid = fluxes[0].grid();
    let dt = mesh.dt();
    let decay = heat_factors(grid, nu, dt)?;
    let mut states = Vec::with_capacity(fluxes.len());
    let mut b = SpectralVectorField::zeros(grid);
    states.push(b.clone());
    match rule {
        DuhamelRule::Trapezoid => {
            for n in 1..fluxes.len() {
                b.axpy(0.5 * dt, &fluxes[n - 1]);
                b.scale_modes(&decay);
                b.axpy(0.5 * dt, &fluxes[n]);
                states.push(b.clone());
            }
        }
        DuhamelRule::LinearEtd => {
            let (wa, wb): (Vec<f64>, Vec<f64>) = grid
                .modes()
                .map(|(_, k)| etd_weights(nu * dt * grid.laplacian_symbol(k)))
                .map(|(a, b)| (a * dt, b * dt))
                .unzip();
            for n in 1..fluxes.len() {
                b.scale_modes(&decay);
                for i in 0..3 {
                    let prev = fluxes[n - 1].coeffs(i);
                    let next = fluxes[n].coeffs(i);
                    for (idx, c) in b.coeffs_mut(i).iter_mut().enumerate() {
                        *c += prev[idx] * wa[idx] + next[idx] * wb[idx];
                    }
                }
                states.push(b.clone());
            }
        }
    }
    FieldHistory::new(mesh, states)
}

/// `(∫₀¹ e^{−xu} u du, ∫₀¹ e^{−xu}(1−u) du)`: weights of the left and right
/// flux values for one step of length 1 with decay `x`.
pub(crate) fn etd_weights(x: f64) -> (f64, f64) {
    if x < 0.5 {
        let (mut a, mut b) = (0.0, 0.0);
        let mut term = 1.0; // (−x)^k / k!
        for k in 0..25 {
            let kf = k as f64;
            a += term / (kf + 2.0);
            b += term / ((kf + 1.0) * (kf + 2.0));
            term *= -x / (kf + 1.0);
        }
        (a, b)
    } else {
        let e = (-x).exp();
        let a = (1.0 - (1.0 + x) * e) / (x * x);
        (a, (1.0 - e) / x - a)
    }
}

/// `B(u,v)(t) = ∫₀ᵗ S(t−s) P∇·(u⊗v)(s) ds` on the shared mesh.
pub fn bilinear_b(u: &FieldHistory, v: &FieldHistory, nu: f64) -> Result<FieldHistory> {
    u.ensure_compatible(v)?;
    let fluxes = u
        .states()
        .iter()
        .zip(v.states())
        .map(|(a, b)| nonlinear_flux(a, b))
        .collect::<Result<Vec<_>>>()?;
    duhamel(&fluxes, u.mesh(), nu)
}

/// `(B_{ν₁}(w,v), B_{ν₂}(v,w))`, the two Duhamel terms of the Elsässer
/// system, sharing transforms and products.
pub fn bilinear_pair(v: &FieldHistory, w: &FieldHistory, nu1: f64, nu2: f64) -> Result<(FieldHistory, FieldHistory)> {
    bilinear_pair_with(v, w, nu1, nu2, DuhamelRule::Trapezoid)
}

pub fn bilinear_pair_with(
    v: &FieldHistory,
    w: &FieldHistory,
    nu1: f64,
    nu2: f64,
    rule: DuhamelRule,
) -> Result<(FieldHistory, FieldHistory)> {
    v.ensure_compatible(w)?;
    let mut fv = Vec::with_capacity(v.states().len());
    let mut fw = Vec::with_capacity(v.states().len());
    for (a, b) in v.states().iter().zip(w.states()) {
        let pv = PhysicalField::from_spectral(a)?;
        let pw = PhysicalField::from_spectral(b)?;
        let (wv, vw) = flux_pair(&pw, &pv)?;
        fv.push(wv);
        fw.push(vw);
    }
    Ok((duhamel_with(&fv, v.mesh(), nu1, rule)?, duhamel_with(&fw, w.mesh(), nu2, rule)?))
}
