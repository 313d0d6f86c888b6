//! JSON problem files.

use crate::error::{Result, TmvnError};
use crate::expcov::ExpcovSpec;
use crate::fourier::Backend;
use crate::lowrank::{LowRankH, Term};
use crate::tree::ZLocations;
use crate::tridiag::TridiagSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Tridiagonal,
    Expcov,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Tridiagonal => "tridiagonal",
            Model::Expcov => "expcov",
        }
    }
}

/// A bound vector: one scalar for every index, an explicit list, or a fill
/// value with 1-based overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    Fill(FillBound),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillBound {
    pub fill: f64,
    #[serde(default)]
    pub set: BTreeMap<String, f64>,
}

impl BoundSpec {
    pub fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        let v = match self {
            BoundSpec::Scalar(x) => vec![*x; n],
            BoundSpec::Vector(v) => {
                if v.len() != n {
                    return Err(TmvnError::Schema(format!("bounds.{name} has {} entries, expected {n}", v.len())));
                }
                v.clone()
            }
            BoundSpec::Fill(f) => {
                let mut v = vec![f.fill; n];
                for (key, &val) in &f.set {
                    let i: usize = key
                        .parse()
                        .map_err(|_| TmvnError::Schema(format!("bounds.{name}.set key {key:?} is not an index")))?;
                    if i == 0 || i > n {
                        return Err(TmvnError::Schema(format!("bounds.{name}.set index {i} outside 1..={n}")));
                    }
                    v[i - 1] = val;
                }
                v
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(TmvnError::Schema(format!("bounds.{name} must be finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub a: BoundSpec,
    pub b: BoundSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ZSource {
    /// Plain text, one location per line, path relative to the spec file.
    File { path: PathBuf, b_z: f64 },
    SeededUniform { seed: u64, b_z: f64 },
    Values { z: Vec<f64>, b_z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HSpec {
    Constant(f64),
    RankP(Vec<Term>),
}

impl Default for HSpec {
    fn default() -> Self {
        HSpec::Constant(1.0)
    }
}

fn default_beta() -> f64 {
    1.0
}
fn default_m() -> usize {
    128
}
fn default_tol() -> f64 {
    1e-12
}
fn default_block() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub model: Model,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_source: Option<ZSource>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub bounds: Bounds,
    #[serde(default)]
    pub h: HSpec,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub nufft_backend: Backend,
    #[serde(default = "default_tol")]
    pub nufft_tol: f64,
    /// Parent grid rows handled per work item in the exponential upward pass.
    #[serde(default = "default_block")]
    pub memory_block: usize,
}

/// Integrand model after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum HModel {
    Constant(f64),
    LowRank(LowRankH),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Tridiagonal(TridiagSpec),
    Expcov(ExpcovSpec),
}

/// Validated, fully expanded problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub spec: ProblemSpec,
    pub problem: Problem,
    pub h: HModel,
    pub seed: Option<u64>,
}

fn schema<E: std::fmt::Display>(e: E) -> TmvnError {
    TmvnError::Schema(e.to_string())
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(schema)
    }

    /// Parses `text` after applying `key=value` overrides at the top level.
    /// Values are read as JSON, falling back to a plain string.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(schema)?;
        let obj = v.as_object_mut().ok_or_else(|| TmvnError::Schema("spec must be a JSON object".into()))?;
        for o in overrides {
            let (k, val) = o
                .split_once('=')
                .ok_or_else(|| TmvnError::Schema(format!("override {o:?} is not key=value")))?;
            let parsed = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
            obj.insert(k.trim().to_string(), parsed);
        }
        serde_json::from_value(v).map_err(schema)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TmvnError::Schema(format!("cannot read {}: {e}", path.display())))?;
        let spec = Self::from_json_with_overrides(&text, overrides)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((spec, base))
    }

    /// Validates and expands; `base` resolves relative z-file paths.
    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(TmvnError::Schema(format!("n must be a power of two, got {}", self.n)));
        }
        if self.m < 2 {
            return Err(TmvnError::Schema("m must be at least 2".into()));
        }
        if !(self.nufft_tol > 0.0 && self.nufft_tol < 1.0) {
            return Err(TmvnError::Schema("nufft_tol must lie in (0, 1)".into()));
        }
        if self.memory_block == 0 {
            return Err(TmvnError::Schema("memory_block must be positive".into()));
        }
        let a = self.bounds.a.expand(self.n, "a")?;
        let b = self.bounds.b.expand(self.n, "b")?;
        let h = match &self.h {
            HSpec::Constant(v) if v.is_finite() => HModel::Constant(*v),
            HSpec::Constant(_) => return Err(TmvnError::Schema("h.constant must be finite".into())),
            HSpec::RankP(terms) => HModel::LowRank(LowRankH::new(self.n, terms.clone()).map_err(schema)?),
        };
        let mut seed = None;
        let problem = match self.model {
            Model::Tridiagonal => {
                if self.z_source.is_some() || self.beta != 1.0 {
                    return Err(TmvnError::Schema("z_source and beta apply to the expcov model only".into()));
                }
                let (d, o) = match (self.d, self.o) {
                    (Some(d), Some(o)) => (d, o),
                    _ => return Err(TmvnError::Schema("tridiagonal model needs d and o".into())),
                };
                Problem::Tridiagonal(TridiagSpec::new(self.n, d, o, a, b).map_err(schema)?)
            }
            Model::Expcov => {
                if self.d.is_some() || self.o.is_some() {
                    return Err(TmvnError::Schema("d and o apply to the tridiagonal model only".into()));
                }
                let z = match &self.z_source {
                    None => return Err(TmvnError::Schema("expcov model needs z_source".into())),
                    Some(ZSource::File { path, b_z }) => {
                        let full = base.join(path);
                        let text = std::fs::read_to_string(&full)
                            .map_err(|e| TmvnError::Schema(format!("cannot read {}: {e}", full.display())))?;
                        let z = parse_z_file(&text)?;
                        ZLocations::new(z, self.beta, *b_z).map_err(schema)?
                    }
                    Some(ZSource::SeededUniform { seed: s, b_z }) => {
                        seed = Some(*s);
                        ZLocations::seeded_uniform(self.n, *s, *b_z, self.beta).map_err(schema)?
                    }
                    Some(ZSource::Values { z, b_z }) => ZLocations::new(z.clone(), self.beta, *b_z).map_err(schema)?,
                };
                Problem::Expcov(ExpcovSpec::new(z, a, b).map_err(schema)?)
            }
        };
        Ok(Resolved { spec: self.clone(), problem, h, seed })
    }
}

/// One float per line; blank lines and `#` comments are skipped.
pub fn parse_z_file(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|e| TmvnError::Schema(format!("bad z value {l:?}: {e}"))))
        .collect()
}
