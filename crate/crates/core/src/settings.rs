use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances used across the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Smallest admissible Im B.
    pub b_min: f64,
    /// Relative truncation threshold for theta series.
    pub series: f64,
    /// Absolute quadrature target, scaled by the path length.
    pub quad: f64,
    /// Agreement required between independent jet evaluations.
    pub jet: f64,
    /// Purity of genus-1 periods and residue checks.
    pub period: f64,
    /// Relative spread allowed for the genus-0 tau evaluand.
    pub constancy: f64,
    /// Minimum distance between a contour and a divisor point.
    pub clearance: f64,
    /// Zeros closer than this are reported as non-simple.
    pub merge: f64,
    /// Exclusion radius around lattice points for elliptic functions.
    pub lattice_exclusion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            b_min: 0.05,
            series: 1e-15,
            quad: 1e-12,
            jet: 1e-9,
            period: 1e-10,
            constancy: 1e-8,
            clearance: 1e-6,
            merge: 1e-6,
            lattice_exclusion: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("b_min", self.b_min),
            ("series", self.series),
            ("quad", self.quad),
            ("jet", self.jet),
            ("period", self.period),
            ("constancy", self.constancy),
            ("clearance", self.clearance),
            ("merge", self.merge),
            ("lattice_exclusion", self.lattice_exclusion),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Overrides one field by name; used by the command line `--tol key=value`.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "b_min" => &mut self.b_min,
            "series" => &mut self.series,
            "quad" => &mut self.quad,
            "jet" => &mut self.jet,
            "period" => &mut self.period,
            "constancy" => &mut self.constancy,
            "clearance" => &mut self.clearance,
            "merge" => &mut self.merge,
            "lattice_exclusion" => &mut self.lattice_exclusion,
            _ => return Err(Error::InvalidInput(format!("unknown tolerance `{key}`"))),
        };
        *slot = value;
        self.validate()
    }
}
