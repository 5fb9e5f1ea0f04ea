//! The kernel of `S(t)P∇·` in free space:
//! `K_{jkm}(t,x) = F⁻¹[e^{−t|ξ|²}|ξ|^{−2}ξⱼξₖξₘ](x)` with
//! `F⁻¹g(x) = ∫ e^{2πix·ξ} g(ξ) dξ`.
//!
//! Writing `|ξ|^{−2} = ∫₀^∞ e^{−s|ξ|²} ds`, differentiating the Gaussian
//! three times and substituting `a = π²|x|²/σ` gives, with `r = |x|` and
//! `z = π²r²/t`,
//!
//! ```text
//! K_{jkm}(t,x) = i π^{−5/2} [ ½(δⱼₖxₘ + δⱼₘxₖ + δₖₘxⱼ) r^{−5} γ(5/2, z)
//!                             − xⱼxₖxₘ r^{−7} γ(7/2, z) ].
//! ```
//!
//! The gamma factors are evaluated in the scaled form `γ(s,z)/z^s`, which
//! removes the apparent singularity at `x = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{composite_kronrod, integrate, QuadOptions};
use crate::special::scaled_lower_gamma;

/// Indexed kernel evaluation point; indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub x: [f64; 3],
    pub idx: [usize; 3],
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("kernel time must be positive, got {t}")));
    }
    Ok(())
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Imaginary parts `Im K_{jkm}(t,x)` for all 27 index triples.
pub fn kernel_tensor(t: f64, x: [f64; 3]) -> Result<[[[f64; 3]; 3]; 3]> {
    check_time(t)?;
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let mut out = [[[0.0; 3]; 3]; 3];
    if r2 == 0.0 {
        return Ok(out);
    }
    let c = PI * PI / t;
    let z = c * r2;
    let g5 = c.powf(2.5) * scaled_lower_gamma(2.5, z)?;
    let g7 = c.powf(3.5) * scaled_lower_gamma(3.5, z)?;
    let pre = PI.powf(-2.5);
    for j in 0..3 {
        for k in 0..3 {
            for m in 0..3 {
                let sym = delta(j, k) * x[m] + delta(j, m) * x[k] + delta(k, m) * x[j];
                out[j][k][m] = pre * (0.5 * sym * g5 - x[j] * x[k] * x[m] * g7);
            }
        }
    }
    Ok(out)
}

/// `K_{jkm}(t,x)` from the closed form; purely imaginary, zero at `x = 0`.
pub fn kernel_component(p: KernelPoint) -> Result<Complex64> {
    if p.idx.iter().any(|&i| i > 2) {
        return Err(Error::InvalidArgument(format!("component indices {:?} out of range", p.idx)));
    }
    let k = kernel_tensor(p.t, p.x)?;
    Ok(Complex64::new(0.0, k[p.idx[0]][p.idx[1]][p.idx[2]]))
}

/// `(K)ʲ(t,x) = −i Σₖₘ K_{jkm}(t,x)`, real.
pub fn summed_kernel(t: f64, x: [f64; 3]) -> Result<[f64; 3]> {
    let k = kernel_tensor(t, x)?;
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = k[j].iter().flatten().sum();
    }
    Ok(out)
}

/// Frobenius norm `(Σⱼₖₘ |K_{jkm}(t,x)|²)^{1/2}`; it depends on `|x|` only.
pub fn kernel_frobenius(t: f64, x: [f64; 3]) -> Result<f64> {
    let k = kernel_tensor(t, x)?;
    Ok(k.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt())
}

/// Largest component magnitude at one point.
pub fn kernel_max_abs(t: f64, x: [f64; 3]) -> Result<f64> {
    let k = kernel_tensor(t, x)?;
    Ok(k.iter().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// `|t² K(t,x) − K(1, x/√t)|` over all components, relative to the largest
/// component of `K(1, x/√t)`.
pub fn scaling_residual(t: f64, x: [f64; 3]) -> Result<f64> {
    let a = kernel_tensor(t, x)?;
    let s = t.sqrt();
    let y = [x[0] / s, x[1] / s, x[2] / s];
    let b = kernel_tensor(1.0, y)?;
    let scale = kernel_max_abs(1.0, y)?;
    if scale == 0.0 {
        return Ok(0.0);
    }
    let diff = a
        .iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(p, q)| (t * t * p - q).abs())
        .fold(0.0, f64::max);
    Ok(diff / scale)
}

/// Accuracy settings for [`kernel_fourier_oracle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub radial: QuadOptions,
    pub polar: QuadOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            radial: QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_evals: 200_000 },
            polar: QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_evals: 200_000 },
        }
    }
}

/// Direct quadrature of the defining inverse transform.
///
/// Spherical coordinates `ξ = ρω` with the polar axis along `x`; the real
/// part cancels by oddness, leaving
/// `K = i ∫₀^∞ ρ³e^{−tρ²} ∫₋₁¹ ∫₀^{2π} sin(2πρ|x|μ) ωⱼωₖωₘ dφ dμ dρ`.
/// The azimuthal integrand is a trigonometric polynomial of degree 3, so an
/// 8-point trapezoid rule is exact; the polar and radial integrals are
/// adaptive Gauss–Kronrod. The radial range is cut at `ρ = (60/t)^{1/2}`.
pub fn kernel_fourier_oracle(p: KernelPoint, opts: OracleOptions) -> Result<Complex64> {
    check_time(p.t)?;
    if p.idx.iter().any(|&i| i > 2) {
        return Err(Error::InvalidArgument(format!("component indices {:?} out of range", p.idx)));
    }
    let x = p.x;
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        return Ok(Complex64::default());
    }
    let e3 = [x[0] / r, x[1] / r, x[2] / r];
    let e1 = orthonormal_to(e3);
    let e2 = cross(e3, e1);
    let [j, k, m] = p.idx;

    // φ-average of ωⱼωₖωₘ as a function of μ
    let azimuthal = |mu: f64| -> f64 {
        let st = (1.0 - mu * mu).max(0.0).sqrt();
        let mut acc = 0.0;
        for q in 0..8 {
            let phi = 2.0 * PI * q as f64 / 8.0;
            let (sp, cp) = phi.sin_cos();
            let w = [
                st * cp * e1[0] + st * sp * e2[0] + mu * e3[0],
                st * cp * e1[1] + st * sp * e2[1] + mu * e3[1],
                st * cp * e1[2] + st * sp * e2[2] + mu * e3[2],
            ];
            acc += w[j] * w[k] * w[m];
        }
        acc * 2.0 * PI / 8.0
    };

    let mut failure: Option<Error> = None;
    let rho_max = (60.0 / p.t).sqrt();
    let radial = integrate(
        |rho| {
            if failure.is_some() || rho == 0.0 {
                return 0.0;
            }
            let c = 2.0 * PI * rho * r;
            match integrate(|mu| (c * mu).sin() * azimuthal(mu), -1.0, 1.0, opts.polar) {
                Ok(q) => rho.powi(3) * (-p.t * rho * rho).exp() * q.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        rho_max,
        opts.radial,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Complex64::new(0.0, radial?.value))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn orthonormal_to(e: [f64; 3]) -> [f64; 3] {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let c = cross(e, helper);
    let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    [c[0] / n, c[1] / n, c[2] / n]
}

/// `sup (1+r)⁴ |K_{jkm}(1, r·d)|` over `r = 100 i / points`, `i = 0..=points`,
/// all components and the given unit directions.
pub fn decay_constant(points: usize, directions: &[[f64; 3]]) -> Result<f64> {
    let mut sup = 0.0_f64;
    for d in directions {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        for i in 0..=points {
            let r = 100.0 * i as f64 / points as f64;
            let x = [r * d[0] / n, r * d[1] / n, r * d[2] / n];
            sup = sup.max((1.0 + r).powi(4) * kernel_max_abs(1.0, x)?);
        }
    }
    Ok(sup)
}

/// Directions used by the decay sweep: axes, a face diagonal, the body
/// diagonal and a generic direction.
pub const SWEEP_DIRECTIONS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 1.0, 1.0],
    [0.3, -0.5, 0.8],
];

/// `∫|K(t,·)|^{5/4}` with the Frobenius tensor norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelNorm {
    /// `∫_{ℝ³} |K(t,x)|_F^{5/4} dx`.
    pub integral: f64,
    /// `‖K(t,·)‖_{L_{5/4}} = integral^{4/5}`.
    pub norm: f64,
    /// Quadrature error estimate of `integral` (inner part).
    pub error: f64,
    /// Analytic contribution of `|x| > R`.
    pub tail: f64,
}

/// Radius beyond which the asymptotic form `|K|_F ≈ C r^{−4}` is used.
pub const L54_CUTOFF: f64 = 100.0;

/// `lim r⁴|K(t, r e)|_F`, from the closed form with `γ → Γ`.
fn asymptotic_constant(t: f64) -> Result<f64> {
    // far field is t-independent up to exponentially small terms
    let r = 1e3 * t.sqrt().max(1.0);
    Ok(r.powi(4) * kernel_frobenius(t, [r, 0.0, 0.0])?)
}

fn l54_from(t: f64, inner: f64, error: f64) -> Result<KernelNorm> {
    let c = asymptotic_constant(t)?;
    let tail = 4.0 * PI * c.powf(1.25) / (2.0 * L54_CUTOFF * L54_CUTOFF);
    let integral = inner + tail;
    Ok(KernelNorm {
        integral,
        norm: integral.powf(0.8),
        error,
        tail,
    })
}

/// Adaptive radial quadrature of `4π ∫₀^R r² |K(t,r)|_F^{5/4} dr` plus the
/// analytic tail `4π C^{5/4}/(2R²)`.
pub fn kernel_l54_norm_at(t: f64) -> Result<KernelNorm> {
    check_time(t)?;
    let mut failure = None;
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_evals: 500_000 };
    let q = integrate(
        |r| match kernel_frobenius(t, [r, 0.0, 0.0]) {
            Ok(k) => 4.0 * PI * r * r * k.powf(1.25),
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        0.0,
        L54_CUTOFF,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    l54_from(t, q.value, q.error)
}

pub fn kernel_l54_norm() -> Result<KernelNorm> {
    kernel_l54_norm_at(1.0)
}

/// Same integral with a fixed number of equal radial panels, for
/// resolution studies.
pub fn kernel_l54_norm_panels(panels: usize) -> Result<KernelNorm> {
    let q = composite_kronrod(
        |r| 4.0 * PI * r * r * kernel_frobenius(1.0, [r, 0.0, 0.0]).unwrap_or(f64::NAN).powf(1.25),
        0.0,
        L54_CUTOFF,
        panels,
    );
    if !q.value.is_finite() {
        return Err(Error::Quadrature { estimate: q.value, error: q.error, evals: q.evals });
    }
    l54_from(1.0, q.value, q.error)
}

/// One row of the kernel table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelRow {
    pub t: f64,
    pub r: f64,
    pub idx: [usize; 3],
    /// `Im K_{jkm}(t, r·d)`.
    pub value: f64,
    pub scaling_residual: f64,
    /// `(1+r)⁴ |K_{jkm}(t, r·d)|`.
    pub decay_product: f64,
}

/// Independent component triples `j ≤ k ≤ m`.
pub fn independent_components() -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for j in 0..3 {
        for k in j..3 {
            for m in k..3 {
                out.push([j, k, m]);
            }
        }
    }
    out
}

/// Table over `times × radii × components` along direction `d`.
pub fn kernel_table(times: &[f64], radii: &[f64], d: [f64; 3]) -> Result<Vec<KernelRow>> {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("direction {d:?} has no length")));
    }
    let mut rows = Vec::new();
    for &t in times {
        for &r in radii {
            let x = [r * d[0] / n, r * d[1] / n, r * d[2] / n];
            let k = kernel_tensor(t, x)?;
            let res = scaling_residual(t, x)?;
            for idx in independent_components() {
                let v = k[idx[0]][idx[1]][idx[2]];
                rows.push(KernelRow {
                    t,
                    r,
                    idx,
                    value: v,
                    scaling_residual: res,
                    decay_product: (1.0 + r).powi(4) * v.abs(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_kernel_csv<W: std::io::Write>(rows: &[KernelRow], out: W) -> Result<()> {
    use crate::output::{csv_writer, fmt_f64};
    let mut w = csv_writer(out);
    w.write_record(["t", "r", "component", "value", "scaling_residual", "decay_product"])?;
    for row in rows {
        let comp = format!("{}{}{}", row.idx[0] + 1, row.idx[1] + 1, row.idx[2] + 1);
        w.write_record([
            fmt_f64(row.t),
            fmt_f64(row.r),
            comp,
            fmt_f64(row.value),
            fmt_f64(row.scaling_residual),
            fmt_f64(row.decay_product),
        ])?;
    }
    w.flush()?;
    Ok(())
}
