//! Run configuration read from TOML, with every default spelled out so the
//! resolved form can be echoed into the run manifest.

use std::path::{Path, PathBuf};

use nehari::affine::DEFAULT_DIRECTIONS;
use nehari::functionals::DEFAULT_EPS;
use nehari::solver::SolveOptions;
use nehari::{ModelKind, Nonlinearity};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

/// Problem selection: one of the library models, or the affine p-energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table", into = "toml::Table")]
pub enum Problem {
    Model { kind: ModelKind<f64>, eps: f64 },
    Affine(AffineConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub p: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    pub nonlinearity: Nonlinearity<f64>,
}

fn default_directions() -> usize {
    DEFAULT_DIRECTIONS
}

impl Default for Problem {
    fn default() -> Self {
        Problem::Model {
            kind: ModelKind::Semilinear { nonlinearity: Nonlinearity::PurePower { r: 4.0 } },
            eps: DEFAULT_EPS,
        }
    }
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Model { kind, .. } => kind.name(),
            Problem::Affine(_) => "affine",
        }
    }
}

impl TryFrom<toml::Table> for Problem {
    type Error = String;

    fn try_from(mut table: toml::Table) -> Result<Self, String> {
        let model = table.get("model").and_then(|v| v.as_str()).ok_or("problem.model is missing")?.to_string();
        if model == "affine" {
            table.remove("model");
            let cfg: AffineConfig = toml::Value::Table(table).try_into().map_err(|e| format!("problem: {e}"))?;
            return Ok(Problem::Affine(cfg));
        }
        let eps = match table.remove("eps") {
            Some(v) => v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).ok_or("problem.eps must be a number")?,
            None => DEFAULT_EPS,
        };
        let kind: ModelKind<f64> = toml::Value::Table(table).try_into().map_err(|e| format!("problem: {e}"))?;
        Ok(Problem::Model { kind, eps })
    }
}

impl From<Problem> for toml::Table {
    fn from(p: Problem) -> toml::Table {
        match p {
            Problem::Model { kind, eps } => {
                let mut t = toml::Table::try_from(kind).expect("model kinds serialize to tables");
                t.insert("eps".into(), toml::Value::Float(eps));
                t
            }
            Problem::Affine(cfg) => {
                let mut t = toml::Table::try_from(&cfg).expect("affine config serializes to a table");
                t.insert("model".into(), toml::Value::String("affine".into()));
                t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 1, n: 64 }
    }
}

/// `c = 1.0` or `c = [0.25, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CValues {
    One(f64),
    Many(Vec<f64>),
}

impl CValues {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            CValues::One(c) => vec![*c],
            CValues::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Distinct solutions requested; more than one runs a deflated search.
    pub solutions: usize,
    /// Start field (CSV); the first Laplacian eigenfield when absent.
    pub start: Option<PathBuf>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { solutions: 1, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberingConfig {
    /// Field whose ray is profiled; the first Laplacian eigenfield when absent.
    pub field: Option<PathBuf>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for FiberingConfig {
    fn default() -> Self {
        FiberingConfig { field: None, t_min: 1e-2, t_max: 1e2, points: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxConfig {
    pub n_max: usize,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig { n_max: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Checks to run; every applicable one when empty.
    pub checks: Vec<String>,
    pub rays: usize,
    pub points: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Samples for the scalar, coefficient and coercivity checks.
    pub samples: usize,
    /// Critical exponent for the (f1) growth check.
    pub critical: Option<f64>,
    /// Sobolev constant for the Brezis–Nirenberg threshold; estimated on
    /// the grid when absent.
    pub s_est: Option<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            checks: Vec::new(),
            rays: 16,
            points: 128,
            t_min: 1e-3,
            t_max: 1e3,
            samples: 400,
            critical: None,
            s_est: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Multiplier for the plain shooting oracle, used when no `c` is given.
    pub lambda: f64,
    pub tol: f64,
    pub step: f64,
    pub branches: usize,
    pub slope_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { lambda: 0.0, tol: 1e-10, step: 1e-4, branches: 3, slope_max: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    pub grid: GridConfig,
    pub c: Option<CValues>,
    pub solver: SolveOptions<f64>,
    pub solve: SolveConfig,
    pub fibering: FiberingConfig,
    pub minimax: MinimaxConfig,
    pub validate: ValidateConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub c: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.solver.seed = seed;
        }
        if let Some(n) = o.grid_n {
            self.grid.n = n;
        }
        if let Some(c) = &o.c {
            self.c = Some(if c.len() == 1 { CValues::One(c[0]) } else { CValues::Many(c.clone()) });
        }
    }

    pub fn c_values(&self) -> Vec<f64> {
        self.c.as_ref().map(CValues::to_vec).unwrap_or_default()
    }

    /// Single `c`, or none; several values are a configuration error.
    pub fn single_c(&self) -> Result<Option<f64>, ConfigError> {
        match self.c_values().as_slice() {
            [] => Ok(None),
            [c] => Ok(Some(*c)),
            many => Err(ConfigError(format!("this subcommand takes one value of c, got {}", many.len()))),
        }
    }
}
