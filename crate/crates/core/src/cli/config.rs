//! Run configurations. Every struct rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{schema, CliError};
use crate::model::{Cell, MteCurve, PropensityFn, ScalarDist, SelectionParams, Shape, VectorDist};
use crate::policy::{Method, DEFAULT_GRID_N};
use crate::ranking::IdentifiedMteSet;
use crate::welfare::CostSpec;

/// Reads a config; relative paths inside it resolve against its directory.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Selection parameters inline or by preset name (`"benchmark"`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsSource {
    Preset(String),
    Explicit(SelectionParams),
}

impl ParamsSource {
    pub fn get(&self) -> Result<SelectionParams, CliError> {
        match self {
            Self::Explicit(p) => Ok(p.clone()),
            Self::Preset(name) if name == "benchmark" => Ok(SelectionParams::benchmark()),
            Self::Preset(name) => Err(schema(format!("unknown parameter preset {name:?}"))),
        }
    }
}

/// Utility `a + b·δ + c·z + βᵀw + v` for the generalized Roy simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearUtility {
    #[serde(default)]
    pub intercept: f64,
    pub delta: f64,
    pub z: f64,
    #[serde(default)]
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimModel {
    Normal {
        params: ParamsSource,
        #[serde(default = "VectorDist::empty")]
        x: VectorDist,
        #[serde(default = "VectorDist::empty")]
        w: VectorDist,
        z: ScalarDist,
    },
    GeneralizedRoy {
        utility: LinearUtility,
        delta: ScalarDist,
        v: ScalarDist,
        #[serde(default = "VectorDist::empty")]
        x: VectorDist,
        #[serde(default = "VectorDist::empty")]
        w: VectorDist,
        z: ScalarDist,
        #[serde(default)]
        bins: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: SimModel,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Heckman,
    Semiparametric,
    Liv,
    Concave,
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.n < 2 || !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(schema(format!("grid needs n >= 2 and lo < hi, got {self:?}")));
        }
        Ok(crate::numerics::linspace(self.lo, self.hi, self.n))
    }
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Heckman]
}

fn default_degree() -> usize {
    3
}

fn default_curve_grid() -> GridSpec {
    GridSpec { lo: 0.01, hi: 0.99, n: 99 }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// CSV with columns `y,d,x1..,w1..,z`.
    pub data: PathBuf,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// LIV evaluation grid; defaults to the curve grid.
    #[serde(default)]
    pub liv_grid: Option<GridSpec>,
    /// Grid for `mte_curve.csv` and the plot.
    #[serde(default = "default_curve_grid")]
    pub curve_grid: GridSpec,
    /// Names used in the coefficient table; default `x1, x2, …`.
    #[serde(default)]
    pub x_names: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

/// Where the MTE curve and propensity come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Inline { mte: MteCurve, propensity: PropensityFn },
    /// Normal selection model: closed-form MTE and probit propensity.
    Params { params: ParamsSource },
    /// `truth.json` written by `simulate`.
    Truth { path: PathBuf },
    /// `fit.json` written by `estimate`.
    Fit { path: PathBuf, estimator: Estimator },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub model: ModelSource,
    pub cells: Vec<Cell>,
    pub action_space: [f64; 2],
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default)]
    pub method: Method,
    /// Use the grid search when an explicitly requested shape solver
    /// rejects its assumptions.
    #[serde(default)]
    pub fallback_general: bool,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub baseline: Option<f64>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub model: ModelSource,
    /// Instrument cells; ladders are computed per covariate value.
    pub cells: Vec<Cell>,
    pub z_range: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSource {
    Inline {
        set: IdentifiedMteSet,
    },
    /// Pins the LIV estimates of a `fit.json`.
    Liv {
        path: PathBuf,
        #[serde(default)]
        shape: Shape,
        #[serde(default)]
        bounds: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub name: String,
    pub assignment: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankConfig {
    pub set: SetSource,
    /// Required for inline sets; LIV sets default to the fitted propensity.
    #[serde(default)]
    pub propensity: Option<PropensityFn>,
    pub cells: Vec<Cell>,
    pub action_space: [f64; 2],
    pub rules: Vec<RuleSpec>,
}
