//! Homogeneous Sobolev norms, the space-time norms `X₁`, `X₂`, `𝕃₅` and
//! Monte Carlo expectations.
//!
//! Vector norms follow the component-sum convention
//! `‖u‖_{Ḣⁿ_p} = Σᵢ ‖(−Δ)^{n/2}uⁱ‖_{L_p}`. The `ℓ²`-combined Hilbert seminorm
//! `(Σᵢ ‖(−Δ)^{n/2}uⁱ‖²_{L₂})^{1/2}` is provided separately.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::FieldHistory;
use crate::operators::fractional_laplacian;
use crate::spectral::{Grid, SpectralVectorField};

/// Integrability exponents supported by [`sobolev_norm`].
pub const SUPPORTED_EXPONENTS: [f64; 6] = [2.0, 2.5, 5.0, 1.5, 6.0, 4.0];

fn check_exponent(p: f64) -> Result<()> {
    if SUPPORTED_EXPONENTS.contains(&p) {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

/// Per-mode spectral weights `|2πk/L|^{2n}`; `k = 0` gets weight 1 for
/// `n = 0` and 0 for `n > 0`.
fn weights(grid: Grid, n: f64) -> Vec<f64> {
    let mut w: Vec<f64> = grid.modes().map(|(_, k)| grid.laplacian_symbol(k).powf(n)).collect();
    w[0] = if n == 0.0 { 1.0 } else { 0.0 };
    w
}

fn check_mean(v: &SpectralVectorField, n: f64) -> Result<()> {
    if n < 0.0 && v.mean().iter().any(|c| c.norm() != 0.0) {
        return Err(Error::SingularSymbol { k: [0, 0, 0] });
    }
    Ok(())
}

/// `‖(−Δ)^{n/2}vⁱ‖²_{L₂}` for each component, by Plancherel.
pub fn hilbert_components(v: &SpectralVectorField, n: f64) -> Result<[f64; 3]> {
    check_mean(v, n)?;
    let grid = v.grid();
    Ok(component_squares(v, &weights(grid, n)))
}

fn component_squares(v: &SpectralVectorField, w: &[f64]) -> [f64; 3] {
    let vol = v.grid().volume();
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = vol
            * v.coeffs(i)
                .iter()
                .zip(w)
                .map(|(c, wk)| c.norm_sqr() * wk)
                .sum::<f64>();
    }
    out
}

/// `ℓ²`-combined seminorm `(L³ Σₖ |2πk/L|^{2n} |v̂(k)|²)^{1/2}`.
pub fn hilbert_seminorm(v: &SpectralVectorField, n: f64) -> Result<f64> {
    let c = hilbert_components(v, n)?;
    Ok((c[0] + c[1] + c[2]).sqrt())
}

/// `Σᵢ ‖(−Δ)^{n/2}vⁱ‖_{L_p}`, `p ∈ {2, 5/2, 5, 3/2, 6, 4}`. `p = 2` is
/// evaluated by Plancherel, other exponents by grid quadrature.
pub fn sobolev_norm(v: &SpectralVectorField, n: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p == 2.0 {
        let c = hilbert_components(v, n)?;
        return Ok(c.iter().map(|x| x.sqrt()).sum());
    }
    let lifted = fractional_laplacian(n, v)?;
    let phys = lifted.to_physical()?;
    Ok(phys.iter().map(|c| lp_norm(v.grid(), c, p)).sum())
}

/// `((L/N)³ Σₓ |f|^p)^{1/p}`.
pub fn lp_norm(grid: Grid, samples: &[f64], p: f64) -> f64 {
    let s: f64 = samples.iter().map(|x| x.abs().powf(p)).sum();
    (grid.cell_volume() * s).powf(1.0 / p)
}

/// Norm summary at one mesh time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRow {
    pub t: f64,
    pub h_half: f64,
    pub h_one: f64,
    pub h_three_halves: f64,
    pub l5: f64,
}

/// Space-time norms of one history.
///
/// `sup_h12 = maxₙ ‖v(tₙ)‖_{Ḣ^{1/2}}`, `l2t_h32 = (∫‖v‖²_{Ḣ^{3/2}})^{1/2}`,
/// `l4t_h1 = (∫‖v‖⁴_{Ḣ¹})^{1/4}`, `l5_spacetime = (∫(Σᵢ‖vⁱ‖_{L₅})⁵)^{1/5}`,
/// time integrals by the trapezoid rule on the mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub sup_h12: f64,
    pub l2t_h32: f64,
    pub l4t_h1: f64,
    pub l5_spacetime: f64,
    pub per_time: Vec<NormRow>,
}

impl NormReport {
    /// `‖·‖_{X₁} = sup_t ‖·‖_{Ḣ^{1/2}} + ‖·‖_{L²Ḣ^{3/2}}`.
    pub fn x1(&self) -> f64 {
        self.sup_h12 + self.l2t_h32
    }

    /// `‖·‖_{X₂} = ‖·‖_{L⁴Ḣ¹}`.
    pub fn x2(&self) -> f64 {
        self.l4t_h1
    }

    pub fn l5(&self) -> f64 {
        self.l5_spacetime
    }

    pub fn is_zero(&self) -> bool {
        self.sup_h12 == 0.0 && self.l2t_h32 == 0.0 && self.l4t_h1 == 0.0 && self.l5_spacetime == 0.0
    }

    /// One CSV row per mesh time: `t,h_half,h_one,h_three_halves,l5`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::output::csv_writer(out);
        w.write_record(["t", "h_half", "h_one", "h_three_halves", "l5"])?;
        for r in &self.per_time {
            w.write_record([r.t, r.h_half, r.h_one, r.h_three_halves, r.l5].map(crate::output::fmt_f64))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which pieces of a [`NormReport`] to evaluate. The `L₅` part needs an
/// inverse transform per state and is the expensive one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormSelection {
    All,
    Hilbert,
}

pub fn spacetime_norms(hist: &FieldHistory) -> Result<NormReport> {
    spacetime_norms_with(hist, NormSelection::All)
}

pub fn spacetime_norms_with(hist: &FieldHistory, which: NormSelection) -> Result<NormReport> {
    let grid = hist.grid();
    let mesh = hist.mesh();
    let (w_half, w_one, w_32) = (weights(grid, 0.5), weights(grid, 1.0), weights(grid, 1.5));
    let times = mesh.times();
    let mut rows = Vec::with_capacity(times.len());
    for (state, &t) in hist.states().iter().zip(&times) {
        let norm = |w: &[f64]| component_squares(state, w).iter().map(|x| x.sqrt()).sum::<f64>();
        let l5 = match which {
            NormSelection::All => state
                .to_physical()?
                .iter()
                .map(|c| lp_norm(grid, c, 5.0))
                .sum(),
            NormSelection::Hilbert => 0.0,
        };
        rows.push(NormRow {
            t,
            h_half: norm(&w_half),
            h_one: norm(&w_one),
            h_three_halves: norm(&w_32),
            l5,
        });
    }
    let tw = mesh.trapezoid_weights();
    let integral = |f: &dyn Fn(&NormRow) -> f64| rows.iter().zip(&tw).map(|(r, w)| w * f(r)).sum::<f64>();
    Ok(NormReport {
        sup_h12: rows.iter().map(|r| r.h_half).fold(0.0, f64::max),
        l2t_h32: integral(&|r| r.h_three_halves.powi(2)).sqrt(),
        l4t_h1: integral(&|r| r.h_one.powi(4)).powf(0.25),
        l5_spacetime: integral(&|r| r.l5.powi(5)).powf(0.2),
        per_time: rows,
    })
}

/// `‖v‖_{L⁴Ḣ¹} / (‖v‖^{1/2}_{CḢ^{1/2}} ‖v‖^{1/2}_{L²Ḣ^{3/2}})`.
pub fn interpolation_gap(hist: &FieldHistory) -> Result<f64> {
    let r = spacetime_norms_with(hist, NormSelection::Hilbert)?;
    gap_of(&r)
}

pub fn gap_of(r: &NormReport) -> Result<f64> {
    let den = (r.sup_h12 * r.l2t_h32).sqrt();
    if den == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(r.l4t_h1 / den)
}

/// Monte Carlo `(E Xᵖ)^{1/p}` with a delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn expectation_norm(values: &[f64], p: f64) -> Result<Expectation> {
    let r = values.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!("expectation needs at least 2 realizations, got {r}")));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("moment must be positive, got {p}")));
    }
    let powers: Vec<f64> = values.iter().map(|x| x.abs().powf(p)).collect();
    let mean = powers.iter().sum::<f64>() / r as f64;
    let var = powers.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    let se_mean = (var / r as f64).sqrt();
    let value = mean.powf(1.0 / p);
    let std_error = if mean == 0.0 {
        0.0
    } else {
        value / (p * mean) * se_mean
    };
    Ok(Expectation {
        value,
        std_error,
        samples: r,
    })
}
