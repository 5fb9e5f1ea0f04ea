//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! n = 16            # even, >= 8
//! l = 6.283185307179586
//! dt = 0.015625
//! t = 0.25
//!
//! [physics]
//! nu1 = 1.0
//! nu2 = 1.0
//!
//! [noise]
//! k = 2             # Wiener directions
//! seed = 1
//! realizations = 1
//!
//! [data]
//! u0 = { preset = "taylor-green", amplitude = 0.1 }
//! b0 = { preset = "zero" }
//!
//! [forcing]
//! g1 = { preset = "random", amplitude = 0.05, seed = 3 }
//! g2 = { preset = "zero" }
//!
//! [solver]
//! tol = 1e-8
//! max_iter = 50
//! norm = "x2"       # or "l5"
//! mode = "local"    # or "global"
//! margin = 0.1
//! bilinear_samples = 20
//! bilinear_seed = 7
//! # c_hat = 0.05   # skips the estimate
//!
//! [output]
//! dir = "smhd-out"
//! snapshot_times = [0.0, 0.25]
//! csv = true
//! ```
//!
//! Every section and key is optional. Field presets: `zero`, `taylor-green`,
//! `single-mode` (keys `k`, `e`), `random` (keys `seed`, `sigma`, `kmax`) and
//! `file` (key `path`, first member of a snapshot). Forcing presets: `zero`,
//! `random` (one member per Wiener direction) and `file` (a snapshot whose
//! member count equals `noise.k`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{random_solenoidal, single_mode, taylor_green, ForcingSequence};
use crate::snapshot::load_snapshot;
use crate::solver::NormTag;
use crate::spectral::{Grid, GridSpec, SpectralVectorField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    pub t: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 16,
            l: 2.0 * std::f64::consts::PI,
            dt: 1.0 / 64.0,
            t: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub nu1: f64,
    pub nu2: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { nu1: 1.0, nu2: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub k: usize,
    pub seed: u64,
    pub realizations: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            k: 1,
            seed: 1,
            realizations: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    TaylorGreen,
    SingleMode,
    Random,
    File,
}

/// One initial field or one forcing sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub preset: Preset,
    pub amplitude: f64,
    pub seed: u64,
    pub sigma: f64,
    pub kmax: usize,
    pub k: [i64; 3],
    pub e: [f64; 3],
    pub path: Option<PathBuf>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Zero,
            amplitude: 1.0,
            seed: 0,
            sigma: 1.0,
            kmax: 2,
            k: [1, 0, 0],
            e: [0.0, 1.0, 0.0],
            path: None,
        }
    }
}

impl FieldConfig {
    pub fn preset(preset: Preset, amplitude: f64) -> Self {
        Self {
            preset,
            amplitude,
            ..Self::default()
        }
    }

    fn snapshot(&self, base: &Path) -> Result<Vec<SpectralVectorField>> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::Config("preset \"file\" needs a path".into()))?;
        let path = if path.is_relative() { base.join(path) } else { path.clone() };
        load_snapshot(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Initial field on `grid`; relative paths resolve against `base`.
    pub fn field(&self, grid: Grid, base: &Path) -> Result<SpectralVectorField> {
        let f = match self.preset {
            Preset::Zero => return Ok(SpectralVectorField::zeros(grid)),
            Preset::TaylorGreen => taylor_green(grid, 1.0)?,
            Preset::SingleMode => single_mode(grid, self.k, self.e, 1.0)?,
            Preset::Random => random_solenoidal(grid, self.seed, self.sigma, self.kmax)?,
            Preset::File => {
                let f = self.snapshot(base)?.swap_remove(0);
                if f.grid() != grid {
                    return Err(Error::Config("snapshot grid differs from [grid]".into()));
                }
                f
            }
        };
        Ok(f.scaled(self.amplitude))
    }

    /// Forcing with `k` members on `grid`.
    pub fn forcing(&self, grid: Grid, k: usize, base: &Path) -> Result<ForcingSequence> {
        match self.preset {
            Preset::Zero => ForcingSequence::zeros(grid, k),
            Preset::Random => ForcingSequence::random(grid, k, self.seed, self.sigma, self.kmax, self.amplitude),
            Preset::File => {
                let members = self.snapshot(base)?;
                if members.len() != k {
                    return Err(Error::Config(format!(
                        "forcing snapshot has {} members, noise.k is {k}",
                        members.len()
                    )));
                }
                if members[0].grid() != grid {
                    return Err(Error::Config("snapshot grid differs from [grid]".into()));
                }
                Ok(ForcingSequence::new(members)?.scaled(self.amplitude))
            }
            Preset::TaylorGreen | Preset::SingleMode => {
                let f = self.field(grid, base)?;
                ForcingSequence::new(vec![f; k])
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub u0: FieldConfig,
    pub b0: FieldConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub g1: FieldConfig,
    pub g2: FieldConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    /// Shrink the horizon until the local smallness condition holds.
    Local,
    /// Check the global gate and solve on the full horizon.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub norm: NormTag,
    pub mode: SolveMode,
    pub margin: f64,
    pub bilinear_samples: usize,
    pub bilinear_seed: u64,
    pub c_hat: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            norm: NormTag::X2,
            mode: SolveMode::Local,
            margin: 0.1,
            bilinear_samples: 20,
            bilinear_seed: 7,
            c_hat: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("smhd-out"),
            snapshot_times: Vec::new(),
            csv: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub noise: NoiseConfig,
    pub data: DataConfig,
    pub forcing: ForcingConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Directory that relative snapshot paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.noise.k == 0 {
            return bad("noise.k must be at least 1".into());
        }
        if self.noise.realizations == 0 {
            return bad("noise.realizations must be at least 1".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return bad("solver.tol must be positive and solver.max_iter at least 1".into());
        }
        if !(self.solver.margin >= 0.0) {
            return bad("solver.margin must be non-negative".into());
        }
        if let Some(c) = self.solver.c_hat {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("solver.c_hat must be positive, got {c}"));
            }
        } else if self.solver.bilinear_samples == 0 {
            return bad("solver.bilinear_samples must be at least 1".into());
        }
        if self.output.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return bad("output.snapshot_times must be non-negative".into());
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(g.n, g.l, g.dt, g.t, self.physics.nu1, self.physics.nu2)
            .map_err(|e| Error::Config(format!("invalid grid: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid_spec().unwrap().mesh.steps(), 16);
    }

    #[test]
    fn documented_example_parses() {
        let text = r#"
            [grid]
            n = 12
            dt = 0.03125
            t = 0.5
            [noise]
            k = 2
            seed = 9
            [data]
            u0 = { preset = "taylor-green", amplitude = 0.1 }
            b0 = { preset = "single-mode", k = [0, 1, 0], e = [1.0, 0.0, 0.0], amplitude = 0.2 }
            [forcing]
            g1 = { preset = "random", amplitude = 0.05, seed = 3 }
            [solver]
            norm = "l5"
            mode = "global"
            c_hat = 0.05
            [output]
            snapshot_times = [0.0, 0.5]
        "#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.grid.n, 12);
        assert_eq!(c.solver.norm, NormTag::L5);
        assert_eq!(c.solver.mode, SolveMode::Global);
        assert_eq!(c.data.b0.preset, Preset::SingleMode);
        let g = c.grid_spec().unwrap().grid;
        let b0 = c.data.b0.field(g, Path::new(".")).unwrap();
        assert!((b0.max_abs() - 0.1).abs() < 1e-15);
        let g1 = c.forcing.g1.forcing(g, c.noise.k, Path::new(".")).unwrap();
        assert_eq!(g1.directions(), 2);
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            "[grid]\nn = 7",
            "[grid]\ndt = -1.0",
            "[noise]\nrealizations = 0",
            "[solver]\nnorm = \"x7\"",
            "[grid]\nbogus = 1",
            "not toml at all = = =",
            "[data]\nu0 = { preset = \"file\" }\n[solver]\nc_hat = -1.0",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
        let c = RunConfig::parse("[data]\nu0 = { preset = \"file\" }").unwrap();
        let g = c.grid_spec().unwrap().grid;
        assert!(matches!(c.data.u0.field(g, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn snapshot_presets_load() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let a = random_solenoidal(g, 4, 1.0, 2).unwrap();
        crate::snapshot::save_snapshot(&dir.path().join("u.mhdf"), &[a.clone(), a.clone()]).unwrap();
        let text = "[grid]\nn = 8\n[data]\nu0 = { preset = \"file\", path = \"u.mhdf\" }\n\
                    [noise]\nk = 2\n[forcing]\ng1 = { preset = \"file\", path = \"u.mhdf\", amplitude = 2.0 }";
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.data.u0.field(g, &c.base_dir).unwrap(), a);
        let f = c.forcing.g1.forcing(g, 2, &c.base_dir).unwrap();
        assert_eq!(f.member(1), &a.scaled(2.0));
        assert!(c.forcing.g1.forcing(g, 3, &c.base_dir).is_err());
    }
}
