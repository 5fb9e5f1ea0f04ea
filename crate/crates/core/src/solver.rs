//! Fixed-point construction of mild solutions in Elsässer variables
//! `v = u + b`, `w = u − b`:
//!
//! ```text
//! v = v¹ − B_{ν₁}(w, v),   v¹(t) = S_{ν₁}(t)v₀ + ∫₀ᵗ S_{ν₁}(t−s) G₁ᵏ dwᵏ_s,
//! w = w¹ − B_{ν₂}(v, w),   w¹(t) = S_{ν₂}(t)w₀ + ∫₀ᵗ S_{ν₂}(t−s) G₂ᵏ dwᵏ_s.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{derivative_wavevector, random_solenoidal, relative_divergence, FieldHistory, ForcingSchedule, ForcingSequence};
use crate::noise::{split_seed, stochastic_convolution_em, NoiseRealization};
use crate::norms::{hilbert_components, lp_norm, spacetime_norms_with, NormReport, NormSelection};
use crate::operators::{bilinear_b, bilinear_pair, bilinear_pair_with, fractional_laplacian, heat_factors, leray_project, DuhamelRule};
use crate::spectral::{forward_transform, Grid, GridSpec, SpectralField, SpectralVectorField, TimeMesh};

/// Norm in which the contraction is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTag {
    /// `L⁴(0,T; Ḣ¹)`, with the bilinear constant measured as `X₁` over `X₂·X₂`.
    X2,
    /// Space-time `L₅`.
    L5,
}

impl NormTag {
    fn selection(self) -> NormSelection {
        match self {
            Self::X2 => NormSelection::Hilbert,
            Self::L5 => NormSelection::All,
        }
    }

    pub fn of(self, r: &NormReport) -> f64 {
        match self {
            Self::X2 => r.x2(),
            Self::L5 => r.l5(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X2 => "x2",
            Self::L5 => "l5",
        }
    }
}

pub fn history_norm(h: &FieldHistory, tag: NormTag) -> Result<f64> {
    Ok(tag.of(&spacetime_norms_with(h, tag.selection())?))
}

/// `‖v‖ + ‖w‖` in the working norm.
pub fn pair_norm(v: &FieldHistory, w: &FieldHistory, tag: NormTag) -> Result<f64> {
    Ok(history_norm(v, tag)? + history_norm(w, tag)?)
}

pub fn x1_norm(h: &FieldHistory) -> Result<f64> {
    Ok(spacetime_norms_with(h, NormSelection::Hilbert)?.x1())
}

/// `(v₀, w₀) = (u₀ + b₀, u₀ − b₀)`.
pub fn elsasser_from_physical(u: &SpectralVectorField, b: &SpectralVectorField) -> (SpectralVectorField, SpectralVectorField) {
    (u + b, u - b)
}

/// `(u, b) = ((v + w)/2, (v − w)/2)`.
pub fn physical_from_elsasser(v: &SpectralVectorField, w: &SpectralVectorField) -> (SpectralVectorField, SpectralVectorField) {
    let mut u = v + w;
    u.scale(0.5);
    let mut b = v - w;
    b.scale(0.5);
    (u, b)
}

/// `G₁ = Pg₁ + Pg₂`, `G₂ = Pg₁ − Pg₂` member by member.
pub fn elsasser_forcing(g1: &ForcingSequence, g2: &ForcingSequence) -> Result<(ForcingSequence, ForcingSequence)> {
    if g1.directions() != g2.directions() {
        return Err(Error::DirectionMismatch {
            noise: g1.directions(),
            forcing: g2.directions(),
        });
    }
    let mut plus = Vec::with_capacity(g1.directions());
    let mut minus = Vec::with_capacity(g1.directions());
    for (a, b) in g1.members().iter().zip(g2.members()) {
        a.ensure_same_grid(b)?;
        let (pa, pb) = (leray_project(a), leray_project(b));
        plus.push(&pa + &pb);
        minus.push(&pa - &pb);
    }
    Ok((ForcingSequence::new(plus)?, ForcingSequence::new(minus)?))
}

/// Inverse of [`elsasser_forcing`] on solenoidal members.
pub fn forcing_from_elsasser(big1: &ForcingSequence, big2: &ForcingSequence) -> Result<(ForcingSequence, ForcingSequence)> {
    let half = |a: &SpectralVectorField, b: &SpectralVectorField, s: f64| {
        let mut out = a.clone();
        out.axpy(s, b);
        out.scale(0.5);
        out
    };
    let g1 = big1.members().iter().zip(big2.members()).map(|(a, b)| half(a, b, 1.0)).collect();
    let g2 = big1.members().iter().zip(big2.members()).map(|(a, b)| half(a, b, -1.0)).collect();
    Ok((ForcingSequence::new(g1)?, ForcingSequence::new(g2)?))
}

/// Initial data and forcing in Elsässer form.
#[derive(Clone, Debug, PartialEq)]
pub struct ElsasserData {
    pub v0: SpectralVectorField,
    pub w0: SpectralVectorField,
    pub g1: ForcingSchedule,
    pub g2: ForcingSchedule,
}

impl ElsasserData {
    pub fn new(v0: SpectralVectorField, w0: SpectralVectorField, g1: ForcingSchedule, g2: ForcingSchedule) -> Result<Self> {
        v0.ensure_same_grid(&w0)?;
        if g1.grid() != v0.grid() || g2.grid() != v0.grid() {
            return Err(Error::GridMismatch);
        }
        if g1.directions() != g2.directions() {
            return Err(Error::DirectionMismatch {
                noise: g1.directions(),
                forcing: g2.directions(),
            });
        }
        for (i, f) in [&v0, &w0].into_iter().enumerate() {
            let residual = relative_divergence(f);
            if residual > crate::fields::SOLENOIDAL_TOLERANCE {
                return Err(Error::NotSolenoidal { member: i, residual });
            }
        }
        Ok(Self { v0, w0, g1, g2 })
    }

    pub fn grid(&self) -> Grid {
        self.v0.grid()
    }

    pub fn directions(&self) -> usize {
        self.g1.directions()
    }

    /// Data and forcing multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            v0: self.v0.scaled(alpha),
            w0: self.w0.scaled(alpha),
            g1: self.g1.scaled(alpha),
            g2: self.g2.scaled(alpha),
        }
    }
}

fn heat_history(v0: &SpectralVectorField, nu: f64, mesh: TimeMesh) -> Result<Vec<SpectralVectorField>> {
    let decay = heat_factors(v0.grid(), nu, mesh.dt())?;
    let mut s = v0.clone();
    let mut out = Vec::with_capacity(mesh.steps() + 1);
    out.push(s.clone());
    for _ in 0..mesh.steps() {
        s.scale_modes(&decay);
        out.push(s.clone());
    }
    Ok(out)
}

/// Frozen linear parts `(v¹, w¹)`: heat flow of the data plus the
/// Euler–Maruyama stochastic convolutions driven by one shared noise table.
pub fn linear_part(data: &ElsasserData, noise: &NoiseRealization, spec: &GridSpec) -> Result<(FieldHistory, FieldHistory)> {
    if data.grid() != spec.grid {
        return Err(Error::GridMismatch);
    }
    let build = |x0: &SpectralVectorField, g: &ForcingSchedule, nu: f64| -> Result<FieldHistory> {
        let heat = heat_history(x0, nu, spec.mesh)?;
        if g.is_zero() {
            return FieldHistory::new(spec.mesh, heat);
        }
        let z = stochastic_convolution_em(g, noise, nu, spec.mesh)?;
        let states = heat.iter().zip(z.states()).map(|(a, b)| a + b).collect();
        FieldHistory::new(spec.mesh, states)
    };
    if data.g1.directions() != noise.directions() {
        return Err(Error::DirectionMismatch {
            noise: noise.directions(),
            forcing: data.g1.directions(),
        });
    }
    Ok((build(&data.v0, &data.g1, spec.nu1)?, build(&data.w0, &data.g2, spec.nu2)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    pub norm: NormTag,
    /// Stop when `‖Δⁿ‖ ≤ tol·‖(v¹,w¹)‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// With `false` the bilinear terms are dropped and `(v, w) = (v¹, w¹)`.
    pub nonlinear: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            norm: NormTag::X2,
            tol: 1e-8,
            max_iter: 50,
            nonlinear: true,
        }
    }
}

/// Current iterates, frozen linear parts and the per-iteration differences.
#[derive(Clone, Debug)]
pub struct PicardState {
    pub v: FieldHistory,
    pub w: FieldHistory,
    pub v1: FieldHistory,
    pub w1: FieldHistory,
    pub nu1: f64,
    pub nu2: f64,
    pub iterations: usize,
    /// `‖(vⁿ⁺¹,wⁿ⁺¹) − (vⁿ,wⁿ)‖` in the working norm.
    pub diffs: Vec<f64>,
    /// `‖(v¹,w¹)‖` in the working norm.
    pub epsilon: f64,
    /// Largest relative divergence over every iterate and mesh time.
    pub max_divergence: f64,
    pub options: PicardOptions,
}

impl PicardState {
    /// Largest ratio of successive differences (0 with fewer than two).
    pub fn max_ratio(&self) -> f64 {
        self.diffs
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }

    pub fn final_residual(&self) -> f64 {
        let last = self.diffs.last().copied().unwrap_or(0.0);
        if self.epsilon == 0.0 {
            last
        } else {
            last / self.epsilon
        }
    }

    pub fn report(&self, c_estimate: f64) -> ContractionReport {
        ContractionReport {
            epsilon: self.epsilon,
            c_estimate,
            product: 4.0 * self.epsilon * c_estimate,
            converged: true,
            iterations: self.iterations,
            final_residual: self.final_residual(),
            max_ratio: self.max_ratio(),
        }
    }

    /// Reconstructed `(u, b)` histories.
    pub fn physical(&self) -> Result<(FieldHistory, FieldHistory)> {
        let (mut us, mut bs) = (Vec::new(), Vec::new());
        for (v, w) in self.v.states().iter().zip(self.w.states()) {
            let (u, b) = physical_from_elsasser(v, w);
            us.push(u);
            bs.push(b);
        }
        Ok((FieldHistory::new(self.v.mesh(), us)?, FieldHistory::new(self.v.mesh(), bs)?))
    }
}

/// Summary of one fixed-point solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionReport {
    pub epsilon: f64,
    pub c_estimate: f64,
    /// `4 ε ĉ`.
    pub product: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Last difference relative to `ε`.
    pub final_residual: f64,
    pub max_ratio: f64,
}

/// Picard iteration started from `(v¹, w¹)`.
pub fn picard_solve(v1: &FieldHistory, w1: &FieldHistory, nu1: f64, nu2: f64, opts: PicardOptions) -> Result<PicardState> {
    picard_solve_from(v1, w1, v1, w1, nu1, nu2, opts)
}

/// Picard iteration `vⁿ⁺¹ = v¹ − B(wⁿ,vⁿ)`, `wⁿ⁺¹ = w¹ − B(vⁿ,wⁿ)` from an
/// arbitrary starting pair.
pub fn picard_solve_from(
    v1: &FieldHistory,
    w1: &FieldHistory,
    v_start: &FieldHistory,
    w_start: &FieldHistory,
    nu1: f64,
    nu2: f64,
    opts: PicardOptions,
) -> Result<PicardState> {
    v1.ensure_compatible(w1)?;
    v1.ensure_compatible(v_start)?;
    v1.ensure_compatible(w_start)?;
    let epsilon = pair_norm(v1, w1, opts.norm)?;
    let mut max_divergence = v1.max_relative_divergence().max(w1.max_relative_divergence());
    let mut state = PicardState {
        v: v_start.clone(),
        w: w_start.clone(),
        v1: v1.clone(),
        w1: w1.clone(),
        nu1,
        nu2,
        iterations: 0,
        diffs: Vec::new(),
        epsilon,
        max_divergence,
        options: opts,
    };
    if !opts.nonlinear {
        state.v = v1.clone();
        state.w = w1.clone();
        let d = pair_norm(&v1.combine(-1.0, v_start)?, &w1.combine(-1.0, w_start)?, opts.norm)?;
        state.diffs.push(d);
        state.iterations = 1;
        return Ok(state);
    }
    let threshold = opts.tol * epsilon;
    for _ in 0..opts.max_iter.max(1) {
        let (bwv, bvw) = bilinear_pair(&state.v, &state.w, nu1, nu2)?;
        let v_next = v1.combine(-1.0, &bwv)?;
        let w_next = w1.combine(-1.0, &bvw)?;
        let d = pair_norm(&v_next.combine(-1.0, &state.v)?, &w_next.combine(-1.0, &state.w)?, opts.norm)?;
        max_divergence = max_divergence
            .max(v_next.max_relative_divergence())
            .max(w_next.max_relative_divergence());
        state.v = v_next;
        state.w = w_next;
        state.diffs.push(d);
        state.iterations += 1;
        state.max_divergence = max_divergence;
        if !d.is_finite() {
            break;
        }
        if d <= threshold {
            return Ok(state);
        }
    }
    Err(Error::NonConvergence { diffs: state.diffs })
}

/// `sup_t ‖·‖_{Ḣ^{1/2}}` of `v − [v¹ − B(w,v)]` and `w − [w¹ − B(v,w)]`, with
/// the Duhamel integrals evaluated by `rule`.
pub fn mild_residual(state: &PicardState, rule: DuhamelRule) -> Result<(f64, f64)> {
    let sup_half = |h: &FieldHistory| -> Result<f64> { Ok(spacetime_norms_with(h, NormSelection::Hilbert)?.sup_h12) };
    if !state.options.nonlinear {
        return Ok((sup_half(&state.v.combine(-1.0, &state.v1)?)?, sup_half(&state.w.combine(-1.0, &state.w1)?)?));
    }
    let (bwv, bvw) = bilinear_pair_with(&state.v, &state.w, state.nu1, state.nu2, rule)?;
    let rv = state.v.combine(-1.0, &state.v1)?.combine(1.0, &bwv)?;
    let rw = state.w.combine(-1.0, &state.w1)?.combine(1.0, &bvw)?;
    Ok((sup_half(&rv)?, sup_half(&rw)?))
}

/// Random test histories for the bilinear constant: heat flows of seeded
/// solenoidal fields with envelope `(1+|k|)^{−σ}`, `|kᵢ| ≤ kmax`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleFamily {
    pub sigma: f64,
    pub kmax: usize,
}

impl SampleFamily {
    /// `σ = 1` over the whole dealiased band.
    pub fn for_grid(grid: Grid) -> Self {
        Self {
            sigma: 1.0,
            kmax: (grid.n() - 1) / 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearEstimate {
    /// Maximum ratio over the samples.
    pub c_hat: f64,
    pub ratios: Vec<f64>,
}

/// `‖B(v,w)‖ / (‖v‖‖w‖)` for one pair: `X₁` over `X₂·X₂`, or `L₅` over
/// `L₅·L₅`.
pub fn bilinear_ratio(v: &FieldHistory, w: &FieldHistory, nu: f64, tag: NormTag) -> Result<f64> {
    let b = bilinear_b(v, w, nu)?;
    let (nv, nw) = (history_norm(v, tag)?, history_norm(w, tag)?);
    if nv == 0.0 || nw == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let nb = match tag {
        NormTag::X2 => x1_norm(&b)?,
        NormTag::L5 => history_norm(&b, NormTag::L5)?,
    };
    Ok(nb / (nv * nw))
}

/// Lower bound on the bilinear constant: the maximum of [`bilinear_ratio`]
/// over `samples` seeded pairs. Sample `s` uses sub-seed `split_seed(seed, s)`.
pub fn estimate_bilinear_constant(
    samples: usize,
    seed: u64,
    tag: NormTag,
    grid: Grid,
    mesh: TimeMesh,
    nu: f64,
    family: SampleFamily,
) -> Result<BilinearEstimate> {
    use rayon::prelude::*;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let ratios = (0..samples)
        .into_par_iter()
        .map(|s| {
            let sub = split_seed(seed, s as u64);
            let a = random_solenoidal(grid, split_seed(sub, 0), family.sigma, family.kmax)?;
            let b = random_solenoidal(grid, split_seed(sub, 1), family.sigma, family.kmax)?;
            let v = FieldHistory::new(mesh, heat_history(&a, nu, mesh)?)?;
            let w = FieldHistory::new(mesh, heat_history(&b, nu, mesh)?)?;
            bilinear_ratio(&v, &w, nu, tag)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BilinearEstimate {
        c_hat: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
    })
}

/// Result of the local-window search.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalWindow {
    pub t0: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub threshold: f64,
    /// `(T, ε(T))` for every candidate tried.
    pub trail: Vec<(f64, f64)>,
}

/// Halve the horizon until `‖(v¹,w¹)‖_{[0,T]} < 1/(4ĉ(1+margin))`.
///
/// The linear parts are computed once on the full mesh; each candidate uses
/// the prefix `[0, T]`, so noise is shared across candidates.
pub fn find_local_t0(
    v1: &FieldHistory,
    w1: &FieldHistory,
    c_hat: f64,
    margin: f64,
    tag: NormTag,
) -> Result<LocalWindow> {
    v1.ensure_compatible(w1)?;
    if !(c_hat > 0.0) {
        return Err(Error::InvalidArgument(format!("bilinear constant must be positive, got {c_hat}")));
    }
    let threshold = 1.0 / (4.0 * c_hat * (1.0 + margin));
    let mesh = v1.mesh();
    let mut steps = mesh.steps();
    let mut trail = Vec::new();
    loop {
        let (v, w) = if steps == mesh.steps() {
            (v1.clone(), w1.clone())
        } else {
            (v1.truncated(steps)?, w1.truncated(steps)?)
        };
        let eps = pair_norm(&v, &w, tag)?;
        let t = steps as f64 * mesh.dt();
        trail.push((t, eps));
        if eps < threshold {
            return Ok(LocalWindow {
                t0: t,
                steps,
                epsilon: eps,
                threshold,
                trail,
            });
        }
        if steps / 2 < 4 {
            return Err(Error::NoLocalWindow {
                min_t: 4.0 * mesh.dt(),
                epsilon: eps,
                threshold,
            });
        }
        steps /= 2;
    }
}

/// `Σᵢ ‖(Σᵏ |(−Δ)^{n/2}Gᵏ,ⁱ|²)^{1/2}‖_{L_p}`, the `Ḣⁿ_p(ℓ²)` norm.
pub fn forcing_norm(g: &ForcingSequence, n: f64, p: f64) -> Result<f64> {
    let grid = g.grid();
    if p == 2.0 {
        let mut sq = [0.0; 3];
        for m in g.members() {
            let c = hilbert_components(m, n)?;
            for i in 0..3 {
                sq[i] += c[i];
            }
        }
        return Ok(sq.iter().map(|x| x.sqrt()).sum());
    }
    let mut acc = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
    for m in g.members() {
        let phys = fractional_laplacian(n, m)?.to_physical()?;
        for i in 0..3 {
            for (a, x) in acc[i].iter_mut().zip(&phys[i]) {
                *a += x * x;
            }
        }
    }
    Ok(acc
        .iter()
        .map(|c| {
            let s: Vec<f64> = c.iter().map(|x| x.sqrt()).collect();
            lp_norm(grid, &s, p)
        })
        .sum())
}

/// Data-plus-forcing surrogate for the global smallness condition.
///
/// `X₂` path: `(1 + 2^{−1/2})(‖v₀‖_{Ḣ^{1/2}} + ‖w₀‖_{Ḣ^{1/2}} + ‖G₁‖ + ‖G₂‖)`
/// with forcing in `L²(0,T; Ḣ^{1/2}(ℓ²))`; the prefactor is the exact
/// `X₁` bound of the heat flow. `L₅` path: `‖v₀‖_{Ḣ^{−2/5}_5} + ‖w₀‖_{Ḣ^{−2/5}_5}`
/// plus forcing in `L⁵(0,T; Ḣ^{−1}_5(ℓ²))`.
pub fn apriori_epsilon(data: &ElsasserData, mesh: TimeMesh, tag: NormTag) -> Result<f64> {
    let (n_data, n_force, p, q) = match tag {
        NormTag::X2 => (0.5, 0.5, 2.0, 2.0),
        NormTag::L5 => (-0.4, -1.0, 5.0, 5.0),
    };
    let t_norm = |g: &ForcingSchedule| -> Result<f64> {
        let mut s = 0.0;
        for step in 0..mesh.steps() {
            s += mesh.dt() * forcing_norm(g.on_step(step), n_force, p)?.powf(q);
            if matches!(g, ForcingSchedule::Constant(_)) {
                s = mesh.horizon() * forcing_norm(g.on_step(0), n_force, p)?.powf(q);
                break;
            }
        }
        Ok(s.powf(1.0 / q))
    };
    let data_part = crate::norms::sobolev_norm(&data.v0, n_data, p)? + crate::norms::sobolev_norm(&data.w0, n_data, p)?;
    let forcing_part = t_norm(&data.g1)? + t_norm(&data.g2)?;
    let total = data_part + forcing_part;
    Ok(match tag {
        NormTag::X2 => (1.0 + 0.5f64.sqrt()) * total,
        NormTag::L5 => total,
    })
}

/// Global smallness gate `4 ε̂ ĉ < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallnessGate {
    pub epsilon: f64,
    pub c_estimate: f64,
    pub product: f64,
    pub passed: bool,
}

pub fn check_global_smallness(data: &ElsasserData, mesh: TimeMesh, c_hat: f64, tag: NormTag) -> Result<SmallnessGate> {
    let epsilon = apriori_epsilon(data, mesh, tag)?;
    let product = 4.0 * epsilon * c_hat;
    Ok(SmallnessGate {
        epsilon,
        c_estimate: c_hat,
        product,
        passed: product < 1.0,
    })
}

/// `π = (−Δ)^{−1} ∂ᵢ∂ⱼ(uⁱuʲ − bⁱbʲ)`, i.e. `π̂ = −(kᵢkⱼ/|k|²) M̂ᵢⱼ` in
/// angular wavenumbers, with the products dealiased. This is the pressure
/// that makes `(u·∇)u − (b·∇)b + ∇π` divergence-free.
pub fn pressure_recovery(u: &SpectralVectorField, b: &SpectralVectorField) -> Result<SpectralField> {
    u.ensure_same_grid(b)?;
    let grid = u.grid();
    let m = stress_tensor(u, b)?;
    let mut out = SpectralField::zeros(grid);
    let coeffs = out.coeffs_mut();
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        let a2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        if a2 == 0.0 {
            continue;
        }
        let mut acc = num_complex::Complex64::default();
        for i in 0..3 {
            for j in 0..3 {
                acc += m[i][j].coeffs()[idx] * (a[i] * a[j]);
            }
        }
        coeffs[idx] = -acc / a2;
    }
    Ok(out)
}

/// Dealiased `Mᵢⱼ = uⁱuʲ − bⁱbʲ`.
pub fn stress_tensor(u: &SpectralVectorField, b: &SpectralVectorField) -> Result<[[SpectralField; 3]; 3]> {
    let grid = u.grid();
    let pu = u.to_physical()?;
    let pb = b.to_physical()?;
    let entry = |i: usize, j: usize| -> Result<SpectralField> {
        let prod: Vec<f64> = (0..grid.len()).map(|x| pu[i][x] * pu[j][x] - pb[i][x] * pb[j][x]).collect();
        Ok(crate::spectral::dealias(&forward_transform(grid, &prod)?))
    };
    Ok([
        [entry(0, 0)?, entry(0, 1)?, entry(0, 2)?],
        [entry(1, 0)?, entry(1, 1)?, entry(1, 2)?],
        [entry(2, 0)?, entry(2, 1)?, entry(2, 2)?],
    ])
}

/// Relative divergence of `∇·M + ∇π` (the un-projected momentum flux).
pub fn momentum_divergence(u: &SpectralVectorField, b: &SpectralVectorField, pi: &SpectralField) -> Result<f64> {
    let grid = u.grid();
    let m = stress_tensor(u, b)?;
    let i = num_complex::Complex64::new(0.0, 1.0);
    let mut flux = SpectralVectorField::zeros(grid);
    for (idx, k) in grid.modes() {
        let a = derivative_wavevector(grid, k);
        for c in 0..3 {
            let mut acc = i * pi.coeffs()[idx] * a[c];
            for j in 0..3 {
                acc += i * m[j][c].coeffs()[idx] * a[j];
            }
            flux.coeffs_mut(c)[idx] = acc;
        }
    }
    Ok(relative_divergence(&flux))
}
