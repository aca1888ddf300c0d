//! Flat JSON config files. Command-specific keys sit next to the problem
//! keys of [`ProblemConfig`]; unknown keys are rejected.

use std::path::Path;

use galbrun_core::solver::{FlowChoice, MeshFamily, ProblemConfig, Variant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// Right-hand side selectable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsChoice {
    GaussianSource,
    Manufactured,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    pub rhs: RhsChoice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveKeys {
    #[serde(default = "default_rhs")]
    rhs: RhsChoice,
}

fn default_rhs() -> RhsChoice {
    RhsChoice::GaussianSource
}

/// Where the error of a study is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorTarget {
    /// A discrete Gaussian-source solution of degree `k` on mesh size `h`.
    Reference { k: usize, h: f64 },
    /// The closed-form manufactured solution.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub h_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub template: ProblemConfig,
    pub target: ErrorTarget,
    pub csv: String,
    pub svg: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyKeys {
    h_values: Vec<f64>,
    k_values: Vec<usize>,
    reference_k: Option<usize>,
    reference_h: Option<f64>,
    #[serde(default)]
    manufactured: bool,
    #[serde(default = "default_csv")]
    csv: String,
    #[serde(default = "default_svg")]
    svg: String,
}

fn default_csv() -> String {
    "convergence.csv".into()
}

fn default_svg() -> String {
    "convergence.svg".into()
}

/// Grid of inf-sup computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfSupConfig {
    pub families: Vec<MeshFamily>,
    pub k_values: Vec<usize>,
    /// One refinement level per entry.
    pub h_values: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_velocity_bc")]
    pub velocity_bc: VelocityBc,
    /// Scott-Vogelius pairs use discontinuous pressures, Taylor-Hood pairs
    /// continuous ones.
    #[serde(default = "default_pair")]
    pub pair: Variant,
    #[serde(default = "default_table")]
    pub table: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityBc {
    FullDirichlet,
    StrongNormal,
}

fn default_velocity_bc() -> VelocityBc {
    VelocityBc::FullDirichlet
}

fn default_pair() -> Variant {
    Variant::ScottVogelius
}

fn default_table() -> String {
    "infsup.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachConfig {
    pub alpha: f64,
    pub flow: FlowChoice,
    pub omega: f64,
    pub gamma: f64,
    pub beta_h: f64,
    pub grid: usize,
}

impl Default for MachConfig {
    fn default() -> Self {
        let p = ProblemConfig::default();
        Self { alpha: p.alpha, flow: p.flow, omega: p.omega, gamma: p.gamma, beta_h: 0.5, grid: 512 }
    }
}

impl MachConfig {
    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig { alpha: self.alpha, flow: self.flow, omega: self.omega, gamma: self.gamma, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h: f64,
    pub seed: u64,
    pub mesh: MeshFamily,
    pub periodic: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { h: 0.5, seed: 0, mesh: MeshFamily::Barycentric, periodic: true }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_object(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(bad(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(bad(format!("{}: {e}", path.display()))),
    }
}

fn from_map<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| bad(e.to_string()))
}

/// Moves the listed keys of `map` into a second map.
fn take_keys(map: &mut Map<String, Value>, keys: &[&str]) -> Map<String, Value> {
    keys.iter().filter_map(|&k| map.remove(k).map(|v| (k.to_string(), v))).collect()
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h <= 4.0 {
        Ok(())
    } else {
        Err(bad(format!("h = {h} outside (0, 4]")))
    }
}

pub fn load_solve(path: &Path) -> Result<SolveConfig> {
    let mut map = read_object(path)?;
    let keys: SolveKeys = from_map(take_keys(&mut map, &["rhs"]))?;
    let problem: ProblemConfig = from_map(map)?;
    problem.validate()?;
    Ok(SolveConfig { problem, rhs: keys.rhs })
}

pub fn load_study(path: &Path) -> Result<StudyConfig> {
    let mut map = read_object(path)?;
    for key in ["h", "k"] {
        if map.contains_key(key) {
            return Err(bad(format!("`{key}` is set per study point; use `{key}_values`")));
        }
    }
    let names = ["h_values", "k_values", "reference_k", "reference_h", "manufactured", "csv", "svg"];
    let keys: StudyKeys = from_map(take_keys(&mut map, &names))?;
    let template: ProblemConfig = from_map(map)?;
    let study = StudyConfig {
        target: match (keys.manufactured, keys.reference_k, keys.reference_h) {
            (true, None, None) => ErrorTarget::Manufactured,
            (false, Some(k), Some(h)) => ErrorTarget::Reference { k, h },
            (true, _, _) => return Err(bad("`manufactured` excludes `reference_k` and `reference_h`")),
            _ => return Err(bad("set either `manufactured` or both `reference_k` and `reference_h`")),
        },
        h_values: keys.h_values,
        k_values: keys.k_values,
        template,
        csv: keys.csv,
        svg: keys.svg,
    };
    study.validate()?;
    Ok(study)
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() || self.k_values.is_empty() {
            return Err(bad("h_values and k_values must be nonempty"));
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("h_values must be strictly decreasing"));
        }
        let mut ks = self.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.k_values.len() {
            return Err(bad("k_values must be distinct"));
        }
        for &h in &self.h_values {
            for &k in &self.k_values {
                self.point(k, h).validate()?;
            }
        }
        if let ErrorTarget::Reference { k, h } = self.target {
            let max_k = *ks.last().unwrap();
            if k <= max_k {
                return Err(bad(format!("reference_k = {k} must exceed the largest study degree {max_k}")));
            }
            self.point(k, h).validate()?;
        }
        for name in [&self.csv, &self.svg] {
            if name.is_empty() {
                return Err(bad("output paths must be nonempty"));
            }
        }
        Ok(())
    }

    /// Problem of one study point.
    pub fn point(&self, k: usize, h: f64) -> ProblemConfig {
        ProblemConfig { k, h, ..self.template.clone() }
    }
}

pub fn load_infsup(path: &Path) -> Result<InfSupConfig> {
    let cfg: InfSupConfig = from_map(read_object(path)?)?;
    if cfg.families.is_empty() || cfg.k_values.is_empty() || cfg.h_values.is_empty() {
        return Err(bad("families, k_values and h_values must be nonempty"));
    }
    if cfg.h_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(bad("h_values must be strictly decreasing"));
    }
    cfg.h_values.iter().try_for_each(|&h| check_h(h))?;
    let min_k = if cfg.pair == Variant::TaylorHood { 2 } else { 1 };
    if let Some(&k) = cfg.k_values.iter().find(|&&k| !(min_k..=5).contains(&k)) {
        return Err(bad(format!("k = {k} outside {min_k}..=5 for this pair")));
    }
    if cfg.table.is_empty() {
        return Err(bad("output paths must be nonempty"));
    }
    Ok(cfg)
}

pub fn load_mach(path: &Path) -> Result<MachConfig> {
    let cfg: MachConfig = from_map(read_object(path)?)?;
    cfg.problem().validate()?;
    if !(cfg.beta_h > 0.0 && cfg.beta_h <= 1.0) {
        return Err(bad(format!("beta_h = {} outside (0, 1]", cfg.beta_h)));
    }
    if cfg.grid < 2 {
        return Err(bad("grid must be at least 2"));
    }
    Ok(cfg)
}

pub fn load_mesh(path: &Path) -> Result<MeshConfig> {
    let cfg: MeshConfig = from_map(read_object(path)?)?;
    check_h(cfg.h)?;
    Ok(cfg)
}
