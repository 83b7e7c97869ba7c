//! TOML run configuration.
//!
//! Every section is optional except the ones the chosen subcommand needs.
//! Relative file paths are resolved against the directory of the config
//! file. See the README for a worked example of each section.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use pwolff_core::kmiter::KmSettings;
use pwolff_core::measure::{
    load_measure, MeasureFormat, SignedMeasure, SpaceTimeAtom, SpaceTimeMeasure, SpatialAtom, SpatialMeasure,
};
use pwolff_core::pde::{BoundaryKind, ExactSolution, Geometry};
use pwolff_core::potential::{PotentialParams, TauScan};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub params: Option<ParamsConfig>,
    pub measure: Option<MeasureSpec>,
    pub potential: Option<PotentialConfig>,
    pub solve: Option<SolveConfig>,
    pub km: Option<KmConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base: PathBuf,
}

/// `PotentialParams` with every field but `p` and `n` optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub p: f64,
    pub n: usize,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub m: Option<f64>,
    pub tau_scan: Option<TauScan>,
    pub dyadic_max_terms: Option<usize>,
    pub term_tolerance: Option<f64>,
}

impl ParamsConfig {
    pub fn build(&self) -> anyhow::Result<PotentialParams> {
        let mut p = PotentialParams::new(self.p, self.n)?;
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        if let Some(v) = self.m {
            p.m = v;
        }
        if let Some(v) = self.tau_scan {
            p.tau_scan = v;
        }
        if let Some(v) = self.dyadic_max_terms {
            p.dyadic_max_terms = v;
        }
        if let Some(v) = self.term_tolerance {
            p.term_tolerance = v;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineAtom {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub weight: f64,
    #[serde(default = "plus")]
    pub sign: String,
}

fn plus() -> String {
    "+".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Zero { dim: usize },
    /// Atom CSV `x1,...,xN,t,weight,sign`.
    Atoms { path: PathBuf, dim: Option<usize> },
    /// Gridded density file.
    Grid { path: PathBuf },
    /// `density · dx dt`.
    Uniform { dim: usize, density: f64 },
    /// Inline atoms; atoms without `t` are stationary (`δ_x ⊗ dt`).
    Inline { dim: usize, atoms: Vec<InlineAtom> },
}

impl MeasureSpec {
    pub fn load(&self, base: &Path) -> anyhow::Result<SignedMeasure> {
        Ok(match self {
            MeasureSpec::Zero { dim } => SignedMeasure::zero(*dim),
            MeasureSpec::Atoms { path, dim } => {
                let path = base.join(path);
                load_measure(&path, MeasureFormat::AtomsCsv { dim: *dim })
                    .with_context(|| format!("reading measure {}", path.display()))?
            }
            MeasureSpec::Grid { path } => {
                let path = base.join(path);
                load_measure(&path, MeasureFormat::GridDensity)
                    .with_context(|| format!("reading measure {}", path.display()))?
            }
            MeasureSpec::Uniform { dim, density } => {
                SignedMeasure::positive(SpaceTimeMeasure::time_product(SpatialMeasure::uniform(*dim, *density)?))
            }
            MeasureSpec::Inline { dim, atoms } => {
                let mut parts: [(Vec<SpaceTimeAtom>, Vec<SpatialAtom>); 2] = Default::default();
                for a in atoms {
                    let side = match a.sign.as_str() {
                        "+" => 0,
                        "-" => 1,
                        s => bail!("atom sign must be `+` or `-`, got `{s}`"),
                    };
                    match a.t {
                        Some(t) => parts[side].0.push(SpaceTimeAtom { position: a.x.clone(), time: t, weight: a.weight }),
                        None => parts[side].1.push(SpatialAtom { position: a.x.clone(), weight: a.weight }),
                    }
                }
                let [p, m] = parts;
                let build = |(st, sp): (Vec<SpaceTimeAtom>, Vec<SpatialAtom>)| -> anyhow::Result<SpaceTimeMeasure> {
                    let a = SpaceTimeMeasure::atoms(*dim, st)?;
                    let b = SpaceTimeMeasure::time_product(SpatialMeasure::atoms(*dim, sp)?);
                    Ok(SpaceTimeMeasure::sum(*dim, vec![a, b])?)
                };
                SignedMeasure::new(build(p)?, build(m)?)?
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryPoint {
    pub x: Vec<f64>,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub points: Vec<QueryPoint>,
    pub rho: f64,
    /// Also evaluate the elliptic Wolff potential `W_{β,p}` of the spatial
    /// part when the measure is time-independent.
    pub wolff_beta: Option<f64>,
}

/// Initial or boundary data.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Zero,
    Constant { value: f64 },
    Exact { solution: ExactSolution },
}

impl DataSpec {
    pub fn eval(&self, c: f64, t: f64) -> f64 {
        match self {
            DataSpec::Zero => 0.0,
            DataSpec::Constant { value } => *value,
            DataSpec::Exact { solution } => solution.eval(c.abs(), t),
        }
    }

    pub fn exact(&self) -> Option<&ExactSolution> {
        match self {
            DataSpec::Exact { solution } => Some(solution),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub levels: usize,
    /// Time steps are multiplied by this per level (the spatial cells by 2).
    #[serde(default = "two")]
    pub time_factor: usize,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub p: Option<f64>,
    pub geometry: Geometry,
    pub cells: usize,
    pub t0: f64,
    pub k: f64,
    pub steps: usize,
    pub eps: Option<f64>,
    #[serde(default = "dirichlet")]
    pub boundary: BoundaryKind,
    pub picard_tol: Option<f64>,
    pub picard_max: Option<usize>,
    pub initial: DataSpec,
    /// Dirichlet data; defaults to the initial data's exact solution, else 0.
    pub boundary_data: Option<DataSpec>,
    /// Snapshot every this many steps (first and last level always).
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub residual_bumps: usize,
    pub refinement: Option<Refinement>,
}

fn dirichlet() -> BoundaryKind {
    BoundaryKind::Dirichlet
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSpec {
    /// `solution.json` written by `solve`.
    File { path: PathBuf },
    /// An exact solution sampled on a node grid.
    Exact { solution: ExactSolution, geometry: Geometry, cells: usize, t0: f64, k: f64, steps: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmConfig {
    pub solution: SolutionSpec,
    pub y: Vec<f64>,
    pub s: f64,
    pub rho: f64,
    /// Either `theta` or `theta_scale` (`θ = theta_scale · ρ^p`).
    pub theta: Option<f64>,
    pub theta_scale: Option<f64>,
    #[serde(default)]
    pub settings: KmSettings,
    /// Also run the pointwise-estimate check.
    #[serde(default)]
    pub theorem: bool,
}

impl KmConfig {
    pub fn theta(&self, p: f64) -> anyhow::Result<f64> {
        match (self.theta, self.theta_scale) {
            (Some(t), None) => Ok(t),
            (None, Some(c)) => Ok(c * self.rho.powf(p)),
            _ => bail!("[km] needs exactly one of `theta` and `theta_scale`"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Suite names, or `["all"]`.
    pub suites: Vec<String>,
    pub autonomous_cases: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { suites: vec!["all".into()], autonomous_cases: 20 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(p) = &cfg.params {
            p.build()?;
        }
        Ok(cfg)
    }

    pub fn params(&self) -> anyhow::Result<PotentialParams> {
        match &self.params {
            Some(p) => p.build(),
            None => bail!("missing [params] section"),
        }
    }

    pub fn measure(&self, dim: usize) -> anyhow::Result<SignedMeasure> {
        let mu = match &self.measure {
            Some(m) => m.load(&self.base)?,
            None => SignedMeasure::zero(dim),
        };
        if mu.dim() != dim {
            bail!("measure has dimension {}, expected {dim}", mu.dim());
        }
        Ok(mu)
    }
}
