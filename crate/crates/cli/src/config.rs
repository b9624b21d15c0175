//! Configuration files (TOML) and command-line overrides.
//!
//! A diagram configuration describes one marked surface:
//!
//! ```toml
//! genus = 1
//! b = [0.1, 1.1]                # period ratio B = re + i·im, genus 1 only
//! points = [[0.0, 0.0], [0.4, 0.5]]
//! residues = [1.0, -1.0]
//! seed = 7                      # genus-0 sample points
//! samples = 24
//! cross_check = false           # re-derive pole constants by circle means
//!
//! [tolerances]                  # any field of the engine tolerances
//! quad = 1e-12
//!
//! [varcheck]
//! steps = [1e-3, 5e-4]
//! tol = 1e-6
//! max_condition = 1e8
//! convention = "frozen"         # or "corrupted", a negative control
//! ```
//!
//! Spectral commands accept an optional file with `[mesh]` controls.

use std::path::Path;

use mandel_core::spectral::MeshControls;
use mandel_core::surface::{build_form, Diagram, MarkedSurface};
use mandel_core::specfun::TorusModulus;
use mandel_core::tau::TauOptions;
use mandel_core::varcheck::{ConventionTable, VarcheckConfig};
use mandel_core::{Tolerances, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramConfig {
    pub genus: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
    pub residues: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub cross_check: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub varcheck: VarcheckSection,
}

fn default_seed() -> u64 {
    TauOptions::default().seed
}

fn default_samples() -> usize {
    TauOptions::default().samples
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Frozen,
    Corrupted,
}

impl Convention {
    pub fn table(self) -> ConventionTable {
        match self {
            Convention::Frozen => ConventionTable::frozen(),
            Convention::Corrupted => ConventionTable::corrupted(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarcheckSection {
    pub steps: [f64; 2],
    pub tol: f64,
    pub max_condition: f64,
    pub convention: Convention,
}

impl Default for VarcheckSection {
    fn default() -> Self {
        let d = VarcheckConfig::default();
        Self { steps: d.steps, tol: d.tol, max_condition: d.max_condition, convention: Convention::Frozen }
    }
}

impl VarcheckSection {
    pub fn resolve(&self) -> VarcheckConfig {
        VarcheckConfig { steps: self.steps, tol: self.tol, max_condition: self.max_condition, table: self.convention.table() }
    }
}

/// Optional settings file of the spectral commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub mesh: MeshControls,
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `key=value` pairs from `--tol`.
pub fn parse_overrides(raw: &[String]) -> CliResult<Vec<(String, f64)>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--tol expects key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| CliError::Config(format!("--tol {k}: `{v}` is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("--tol {k} must be positive, got {v}")));
            }
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl DiagramConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let config: Self = read_toml(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `--seed` and `--tol`; `variational` sets the verification tolerance.
    pub fn apply_overrides(&mut self, seed: Option<u64>, tols: &[(String, f64)]) -> CliResult<()> {
        if let Some(s) = seed {
            self.seed = s;
        }
        for (k, v) in tols {
            if k == "variational" {
                self.varcheck.tol = *v;
            } else {
                self.tolerances.set(k, *v).map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match (self.genus, self.b) {
            (0, None) | (1, Some(_)) => {}
            (0, Some(_)) => return bad("`b` is only meaningful for genus 1".into()),
            (1, None) => return bad("genus 1 requires `b`".into()),
            (g, _) => return bad(format!("genus must be 0 or 1, got {g}")),
        }
        if self.points.len() != self.residues.len() {
            return bad(format!("{} points but {} residues", self.points.len(), self.residues.len()));
        }
        let total: f64 = self.residues.iter().sum();
        let size: f64 = self.residues.iter().map(|a| a.abs()).sum();
        if total.abs() > 1e-14 * size.max(1.0) {
            return bad(format!("residues must sum to zero, sum = {total:e}"));
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        self.tolerances.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let [h1, h2] = self.varcheck.steps;
        if !(h1 > h2 && h2 > 0.0) || !(self.varcheck.tol > 0.0) || !(self.varcheck.max_condition > 0.0) {
            return bad(format!("invalid [varcheck] settings {:?}", self.varcheck));
        }
        Ok(())
    }

    pub fn surface(&self) -> CliResult<MarkedSurface> {
        let points = self.points.iter().map(|[x, y]| C64::new(*x, *y)).collect();
        let residues = self.residues.clone();
        let surface = match self.b {
            None => MarkedSurface::sphere(points, residues)?,
            Some([re, im]) => {
                let modulus = TorusModulus::with_min(C64::new(re, im), self.tolerances.b_min)?;
                MarkedSurface::torus(modulus, points, residues)?
            }
        };
        Ok(surface)
    }

    pub fn diagram(&self) -> CliResult<Diagram> {
        let form = build_form(self.surface()?, &self.tolerances)?;
        Ok(Diagram::new(form, self.cross_check)?)
    }

    pub fn tau_options(&self) -> TauOptions {
        TauOptions { samples: self.samples, seed: self.seed }
    }

    /// Sets one scalar addressed by `b.re`, `b.im`, `points[i].re` or `points[i].im`.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> CliResult<()> {
        let unknown = || CliError::Config(format!("unknown sweep axis `{axis}`"));
        let (target, part) = axis.rsplit_once('.').ok_or_else(unknown)?;
        let component = match part {
            "re" => 0,
            "im" => 1,
            _ => return Err(unknown()),
        };
        if target == "b" {
            let b = self.b.as_mut().ok_or_else(|| CliError::Config("axis `b` needs a genus-1 config".into()))?;
            b[component] = value;
        } else {
            let index: usize = target
                .strip_prefix("points[")
                .and_then(|s| s.strip_suffix(']'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(unknown)?;
            let len = self.points.len();
            let p = self.points.get_mut(index).ok_or_else(|| CliError::Config(format!("axis `{axis}`: only {len} points")))?;
            p[component] = value;
        }
        Ok(())
    }
}
