//! Run configuration in TOML, with named presets.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deflation::PenaltyParams;
use crate::error::{Error, Result};
use crate::fem::ScalarFieldP1;
use crate::levelset::{LevelSet, SolverParams, VolumeConstraint};
use crate::mesh::{
    generate_double_pipe_mesh, generate_rect_mesh, BoundaryRules, DoublePipeMeshParams, Mesh, TrianglePattern,
    BIPOLAR_PORT, DOUBLE_PIPE_HEIGHT, DOUBLE_PIPE_PORTS, DOUBLE_PIPE_WIDTH,
};
use crate::physics::{ProblemKind, ProblemSpec, ALPHA_L, ALPHA_U, DEFAULT_DT};
use crate::toy::ScalarProblem;
use crate::vtk::read_vtk_file;

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_ENV_VAR: &str = "TOPODEFLATE_OUT";

pub const PRESETS: [&str; 5] =
    ["double-pipe-desk", "double-pipe-paper", "bipolar-desk", "bipolar-paper", "rastrigin-demo"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemChoice {
    DoublePipe,
    Bipolar,
    Rastrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeSetting {
    Equality(f64),
    Bounds([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternChoice {
    Right,
    Crossed,
}

impl From<PatternChoice> for TrianglePattern {
    fn from(p: PatternChoice) -> Self {
        match p {
            PatternChoice::Right => TrianglePattern::Right,
            PatternChoice::Crossed => TrianglePattern::Crossed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemChoice,
    #[serde(default = "default_alpha_l")]
    pub alpha_l: f64,
    #[serde(default = "default_alpha_u")]
    pub alpha_u: f64,
    /// A number for an equality target, `[lower, upper]` for bounds.
    /// Defaults to 0.5 (double pipe) and [0.5, 0.7] (bipolar).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeSetting>,
    #[serde(default = "default_u_t")]
    pub u_t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_alpha_l() -> f64 {
    ALPHA_L
}
fn default_alpha_u() -> f64 {
    ALPHA_U
}
fn default_u_t() -> f64 {
    0.1
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Target spacing of the double-pipe mesh.
    pub resolution: f64,
    pub hole_segments: usize,
    /// Mesh the holes as obstacle elements instead of cutting them out.
    pub holes_as_solid: bool,
    /// Cells per side of the bipolar square.
    pub nx: usize,
    pub ny: usize,
    pub pattern: PatternChoice,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            resolution: 1.0 / 24.0,
            hole_segments: 32,
            holes_as_solid: false,
            nx: 25,
            ny: 25,
            pattern: PatternChoice::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eps_theta_deg: f64,
    pub kappa_min: f64,
    pub max_iters: usize,
    pub eps_c: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig { eps_theta_deg: p.eps_theta.to_degrees(), kappa_min: p.kappa_min, max_iters: p.max_iters, eps_c: p.eps_c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflationConfig {
    pub gamma: f64,
    pub delta: f64,
    /// Defaults to `gamma / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_same: Option<f64>,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitConfig {
    #[default]
    AllFluid,
    VerticalStripes {
        count: usize,
    },
    StraightPipes,
    Vtk {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub x0: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { x0: 0.25, lo: -5.12, hi: 5.12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("topodeflate-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub deflation: DeflationConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub toy: ToyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let problem = |kind| ProblemConfig {
            kind,
            alpha_l: ALPHA_L,
            alpha_u: ALPHA_U,
            volume: None,
            u_t: 0.1,
            dt: DEFAULT_DT,
        };
        let cfg = |kind, mesh, gamma, delta, rounds, init| RunConfig {
            problem: problem(kind),
            mesh,
            solver: SolverConfig::default(),
            deflation: DeflationConfig { gamma, delta, tau_same: None, rounds },
            init,
            toy: ToyConfig::default(),
            output: OutputConfig { dir: PathBuf::from(format!("out-{name}")) },
        };
        let dp_mesh = |resolution| MeshConfig { resolution, ..MeshConfig::default() };
        let bp_mesh = |n| MeshConfig { nx: n, ny: n, pattern: PatternChoice::Crossed, ..MeshConfig::default() };
        let c = match name {
            "double-pipe-desk" => cfg(ProblemChoice::DoublePipe, dp_mesh(1.0 / 36.0), 0.7, 1e6, 20, InitConfig::AllFluid),
            "double-pipe-paper" => cfg(ProblemChoice::DoublePipe, dp_mesh(1.0 / 60.0), 0.7, 1e6, 100, InitConfig::AllFluid),
            "bipolar-desk" => cfg(ProblemChoice::Bipolar, bp_mesh(25), 0.25, 5e-3, 10, InitConfig::AllFluid),
            "bipolar-paper" => cfg(ProblemChoice::Bipolar, bp_mesh(75), 0.25, 5e-3, 200, InitConfig::AllFluid),
            "rastrigin-demo" => cfg(ProblemChoice::Rastrigin, MeshConfig::default(), 1.0, 300.0, 10, InitConfig::AllFluid),
            other => {
                return Err(Error::Config(format!("unknown preset {other:?}; available: {}", PRESETS.join(", "))))
            }
        };
        Ok(c)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills in defaults that depend on other settings, so the written
    /// configuration states every value used.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.problem.volume = Some(match self.volume_constraint() {
            VolumeConstraint::Equality(v) => VolumeSetting::Equality(v),
            VolumeConstraint::Bounds { lower, upper } => VolumeSetting::Bounds([lower, upper]),
        });
        c.deflation.tau_same = Some(self.tau_same());
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.deflation.rounds == 0 {
            return bad("deflation.rounds must be at least 1".into());
        }
        self.penalty_params().map_err(|e| Error::Config(e.to_string()))?.validate()?;
        if !(self.tau_same() > 0.0) {
            return bad(format!("tau_same must be positive, got {}", self.tau_same()));
        }
        match self.problem.kind {
            ProblemChoice::Rastrigin => {
                if !(self.toy.lo < self.toy.hi) || !self.toy.x0.is_finite() {
                    return bad(format!("toy interval [{}, {}] is empty", self.toy.lo, self.toy.hi));
                }
            }
            ProblemChoice::DoublePipe | ProblemChoice::Bipolar => {
                self.solver_params().validate().map_err(|e| Error::Config(e.to_string()))?;
                if self.problem.kind == ProblemChoice::Bipolar && (self.mesh.nx == 0 || self.mesh.ny == 0) {
                    return bad("mesh.nx and mesh.ny must be positive".into());
                }
                if let Some(VolumeSetting::Bounds([l, u])) = self.problem.volume {
                    if !(l <= u) {
                        return bad(format!("volume bounds [{l}, {u}] are reversed"));
                    }
                }
                if let InitConfig::VerticalStripes { count: 0 } = self.init {
                    return bad("vertical-stripes needs count >= 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn tau_same(&self) -> f64 {
        self.deflation.tau_same.unwrap_or(self.deflation.gamma / 10.0)
    }

    pub fn penalty_params(&self) -> Result<PenaltyParams> {
        let p = PenaltyParams { gamma: self.deflation.gamma, delta: self.deflation.delta };
        p.validate()?;
        Ok(p)
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            eps_theta: self.solver.eps_theta_deg.to_radians(),
            kappa_min: self.solver.kappa_min,
            max_iters: self.solver.max_iters,
            eps_c: self.solver.eps_c,
        }
    }

    pub fn volume_constraint(&self) -> VolumeConstraint {
        match (self.problem.volume, self.problem.kind) {
            (Some(VolumeSetting::Equality(v)), _) => VolumeConstraint::Equality(v),
            (Some(VolumeSetting::Bounds([lower, upper])), _) => VolumeConstraint::Bounds { lower, upper },
            (None, ProblemChoice::Bipolar) => VolumeConstraint::Bounds { lower: 0.5, upper: 0.7 },
            (None, _) => VolumeConstraint::Equality(0.5),
        }
    }

    pub fn scalar_problem(&self) -> ScalarProblem {
        ScalarProblem { lo: self.toy.lo, hi: self.toy.hi, ..ScalarProblem::rastrigin() }
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        let m = &self.mesh;
        let mesh = match self.problem.kind {
            ProblemChoice::DoublePipe => {
                generate_double_pipe_mesh(&DoublePipeMeshParams {
                    resolution: m.resolution,
                    hole_segments: m.hole_segments,
                    holes_as_solid: m.holes_as_solid,
                    pattern: m.pattern.into(),
                })?
                .mesh
            }
            ProblemChoice::Bipolar => generate_rect_mesh(1.0, 1.0, m.nx, m.ny, m.pattern.into(), BoundaryRules::Bipolar)?,
            ProblemChoice::Rastrigin => return Err(Error::Config("the rastrigin demo has no mesh".into())),
        };
        Ok(Arc::new(mesh))
    }

    pub fn problem_spec(&self, mesh: Arc<Mesh>) -> Result<ProblemSpec> {
        let kind = match self.problem.kind {
            ProblemChoice::DoublePipe => ProblemKind::DoublePipe,
            ProblemChoice::Bipolar => ProblemKind::BipolarPlate,
            ProblemChoice::Rastrigin => return Err(Error::Config("the rastrigin demo is not a flow problem".into())),
        };
        let spec = ProblemSpec {
            kind,
            mesh,
            alpha_l: self.problem.alpha_l,
            alpha_u: self.problem.alpha_u,
            volume: self.volume_constraint(),
            u_t: self.problem.u_t,
            dt: self.problem.dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Initial level set on `mesh`. `seed` replaces the configured
    /// descriptor with a VTK file carrying a `psi` point field.
    pub fn initial_level_set(&self, mesh: &Arc<Mesh>, seed: Option<&Path>) -> Result<LevelSet> {
        let init = match seed {
            Some(p) => InitConfig::Vtk { path: p.to_path_buf() },
            None => self.init.clone(),
        };
        let (width, height) = match self.problem.kind {
            ProblemChoice::DoublePipe => (DOUBLE_PIPE_WIDTH, DOUBLE_PIPE_HEIGHT),
            _ => (1.0, 1.0),
        };
        let psi = match init {
            InitConfig::AllFluid => ScalarFieldP1::constant(mesh.clone(), -1.0)?,
            InitConfig::VerticalStripes { count } => {
                let k = count as f64;
                ScalarFieldP1::from_fn(mesh.clone(), |p| (2.0 * PI * k * p[0] / width).cos())?
            }
            InitConfig::StraightPipes => {
                let ports: Vec<(f64, f64)> = match self.problem.kind {
                    ProblemChoice::DoublePipe => DOUBLE_PIPE_PORTS.to_vec(),
                    _ => vec![BIPOLAR_PORT],
                };
                ScalarFieldP1::from_fn(mesh.clone(), |p| {
                    ports
                        .iter()
                        .map(|(a, b)| (p[1] - 0.5 * (a + b)).abs() - 0.5 * (b - a))
                        .fold(height, f64::min)
                })?
            }
            InitConfig::Vtk { path } => {
                let data = read_vtk_file(&path)?;
                if !data.mesh.same_as(mesh) {
                    return Err(Error::Config(format!("{} was written on a different mesh", path.display())));
                }
                let values = data
                    .point_scalars
                    .get("psi")
                    .ok_or_else(|| Error::Config(format!("{} has no psi point field", path.display())))?;
                ScalarFieldP1::new(mesh.clone(), values.clone())?
            }
        };
        Ok(LevelSet::new(psi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_roundtrip() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap().resolved();
            c.validate().unwrap();
            let text = c.to_toml_string().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::from_toml_str(
            "[problem]\nkind = \"bipolar\"\n[deflation]\ngamma = 0.25\ndelta = 5e-3\nrounds = 3\n",
        )
        .unwrap();
        assert_eq!(c.volume_constraint(), VolumeConstraint::Bounds { lower: 0.5, upper: 0.7 });
        assert_eq!(c.tau_same(), 0.025);
        assert_eq!(c.init, InitConfig::AllFluid);
        assert_eq!(c.problem.alpha_u, ALPHA_U);
    }

    #[test]
    fn init_and_volume_forms_parse() {
        let c = RunConfig::from_toml_str(
            "[problem]\nkind = \"double-pipe\"\nvolume = [0.4, 0.6]\n\
             [deflation]\ngamma = 0.7\ndelta = 1e6\nrounds = 2\n\
             [init]\nkind = \"vertical-stripes\"\ncount = 3\n",
        )
        .unwrap();
        assert_eq!(c.init, InitConfig::VerticalStripes { count: 3 });
        assert_eq!(c.volume_constraint(), VolumeConstraint::Bounds { lower: 0.4, upper: 0.6 });
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(matches!(RunConfig::preset("nope"), Err(Error::Config(_))));
        let base = "[problem]\nkind = \"double-pipe\"\n[deflation]\ngamma = 0.7\ndelta = 1e6\n";
        assert!(RunConfig::from_toml_str(&format!("{base}rounds = 0\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}rounds = 1\nbogus = 1\n")).is_err());
        assert!(RunConfig::from_toml_str("[problem]\nkind = \"double-pipe\"\n[deflation]\ngamma = -1.0\ndelta = 1.0\nrounds = 1\n").is_err());
    }

    #[test]
    fn straight_pipes_init_fills_ports() {
        let c = RunConfig::preset("double-pipe-desk").unwrap();
        let mesh = c.build_mesh().unwrap();
        let mut c2 = c.clone();
        c2.init = InitConfig::StraightPipes;
        let ls = c2.initial_level_set(&mesh, None).unwrap();
        // two pipes of height 1/6 across the 1.5 wide box, minus what the holes cut out
        assert!((ls.volume() - 0.5).abs() < 0.05, "{}", ls.volume());
    }
}
