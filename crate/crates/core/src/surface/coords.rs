use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::cycles::{
    divisor_points, extended_gcd, relative_path, Bend, straight_class_representative, trace_core, Cycle, CycleRole,
    SampledCycle,
};
use super::{lattice_coords, Diagram};
use crate::specfun::TorusModulus;
use crate::error::{Error, Result};

/// Which family of diagram coordinates an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateKind {
    /// Interior cylinder circumference, `Im ∮_core ω`.
    Height,
    /// Interaction time, `Re ∫_{R₀}^{R_j} ω`.
    Time,
    /// Twist-type coordinate, the imaginary part of a period.
    Twist,
}

/// Machine-readable definition of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSpec {
    pub name: String,
    pub kind: CoordinateKind,
    /// Cycle or path whose ω-integral defines the coordinate.
    pub cycle: CycleRole,
    /// `"re"` or `"im"`.
    pub part: String,
}

/// Heights, interaction times and twist-type coordinates of a diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCoordinates {
    pub residues: Vec<f64>,
    pub heights: Vec<f64>,
    /// All interaction times in zero order, starting with the base zero's 0.
    pub interaction_times: Vec<f64>,
    /// Interaction-time coordinates (the nonzero entries of `interaction_times`).
    pub times: Vec<f64>,
    pub twists: Vec<f64>,
    pub specs: Vec<CoordinateSpec>,
}

impl DiagramCoordinates {
    /// Coordinate values in `specs` order: heights, times, twists.
    pub fn values(&self) -> Vec<f64> {
        self.heights.iter().chain(&self.times).chain(&self.twists).copied().collect()
    }

    pub fn dimension(&self) -> usize {
        self.heights.len() + self.times.len() + self.twists.len()
    }
}

/// Paths and cycles fixed at a reference configuration, reused for nearby
/// configurations so that coordinates vary continuously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFrame {
    /// Kink of the path from the base zero to zero `j + 1`.
    pub bends: Vec<Bend>,
    pub core: Option<SampledCycle>,
    pub complement: Option<Cycle>,
    /// Modulus the core and complement were built for.
    pub modulus: Option<TorusModulus>,
}

impl CoordinateFrame {
    pub fn new(diagram: &Diagram) -> Result<Self> {
        let form = &diagram.form;
        let s = form.surface();
        let divisor = divisor_points(diagram);
        let mut bends = Vec::new();
        if let Some(base) = diagram.base_zero() {
            for (j, z) in diagram.zeros.iter().enumerate().skip(1) {
                let (_, bend) = relative_path(
                    CycleRole::RelativePath(j),
                    base,
                    z.position,
                    &divisor,
                    s.modulus(),
                    form.tolerances().clearance,
                    None,
                )?;
                bends.push(bend);
            }
        }
        let (core, complement) = match s.modulus() {
            None => (None, None),
            Some(t) => {
                let core = trace_core(diagram)?;
                let (p, q) = core.class;
                let (x, y, g) = extended_gcd(p, q);
                if g != 1 {
                    return Err(Error::DegenerateSurface(format!("core class ({p}, {q}) is not primitive")));
                }
                // p·s − q·r = 1
                let class = (-y, x);
                let sweep = t.b() * q as f64 + p as f64;
                let complement = straight_class_representative(
                    CycleRole::Complement(0),
                    class,
                    sweep,
                    &divisor,
                    t,
                    form.tolerances().clearance.max(1e-3),
                )?;
                (Some(core), Some(complement))
            }
        };
        Ok(Self { bends, core, complement, modulus: s.modulus().copied() })
    }

    /// Path from the base zero to zero `j ≥ 1`.
    pub fn relative_leg(&self, diagram: &Diagram, j: usize) -> Result<Cycle> {
        let base = diagram.base_zero().ok_or_else(|| Error::InvalidInput("no zeros".into()))?;
        let s = diagram.form.surface();
        let (path, _) = relative_path(
            CycleRole::RelativePath(j),
            base,
            diagram.zeros[j].position,
            &[],
            s.modulus(),
            0.0,
            Some(self.bends[j - 1]),
        )?;
        Ok(path)
    }

    /// Keeps a point's lattice coordinates when the modulus changes, so the
    /// frozen cycles stay closed in their classes.
    fn remap(&self, z: C64, modulus: Option<&TorusModulus>) -> C64 {
        match (&self.modulus, modulus) {
            (Some(from), Some(to)) if from != to => {
                let (u, v) = lattice_coords(from, z);
                to.b() * v + u
            }
            _ => z,
        }
    }

    /// The core cycle carried to a torus with the given modulus.
    pub fn core_cycle(&self, modulus: Option<&TorusModulus>) -> Option<Cycle> {
        self.core
            .as_ref()
            .map(|c| Cycle::polyline(CycleRole::CylinderCore(0), &c.vertices, c.class).mapped(|z| self.remap(z, modulus)))
    }

    /// The complement cycle carried to a torus with the given modulus.
    pub fn complement_cycle(&self, modulus: Option<&TorusModulus>) -> Option<Cycle> {
        self.complement.as_ref().map(|c| c.mapped(|z| self.remap(z, modulus)))
    }

    /// Evaluates coordinates of `diagram` using this frame's paths.
    pub fn evaluate(&self, diagram: &Diagram) -> Result<DiagramCoordinates> {
        let form = &diagram.form;
        let s = form.surface();
        let tol = form.tolerances().quad;
        let integrate = |c: &Cycle| -> Result<C64> {
            let clearance = c.clearance(s.points(), s.modulus());
            if clearance < form.tolerances().clearance {
                return Err(Error::ClearanceViolation { distance: clearance, clearance: form.tolerances().clearance });
            }
            c.integrate(|z| form.coefficient(z), tol)
        };
        let mut specs = Vec::new();
        let mut heights = Vec::new();
        let mut times = Vec::new();
        let mut twists = Vec::new();
        let mut relative = Vec::new();
        for j in 1..diagram.zeros.len() {
            relative.push(integrate(&self.relative_leg(diagram, j)?)?);
        }
        if let (Some(core), Some(comp)) = (self.core_cycle(s.modulus()), self.complement_cycle(s.modulus())) {
            heights.push(integrate(&core)?.im);
            specs.push(spec("h1", CoordinateKind::Height, CycleRole::CylinderCore(0), "im"));
            twists.push(integrate(&comp)?.im);
        }
        for (j, z) in relative.iter().enumerate() {
            times.push(z.re);
            specs.push(spec(&format!("tau{}", j + 1), CoordinateKind::Time, CycleRole::RelativePath(j + 1), "re"));
        }
        if self.complement.is_some() {
            specs.push(spec("theta_core", CoordinateKind::Twist, CycleRole::Complement(0), "im"));
        }
        for (j, z) in relative.iter().enumerate() {
            twists.push(z.im);
            specs.push(spec(&format!("theta{}", j + 1), CoordinateKind::Twist, CycleRole::RelativePath(j + 1), "im"));
        }
        let mut interaction_times = vec![0.0];
        interaction_times.extend(times.iter().copied());
        let g = s.genus();
        let n = s.len();
        // g heights, 2g + n − 3 times and 3g + n − 3 twists
        let expected = (6 * g + 2 * n).saturating_sub(6);
        let coords = DiagramCoordinates {
            residues: s.residues().to_vec(),
            heights,
            interaction_times,
            times,
            twists,
            specs,
        };
        if coords.dimension() != expected || coords.specs.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: coords.dimension() });
        }
        Ok(coords)
    }
}

fn spec(name: &str, kind: CoordinateKind, cycle: CycleRole, part: &str) -> CoordinateSpec {
    CoordinateSpec { name: name.to_string(), kind, cycle, part: part.to_string() }
}

/// Heights, interaction times and twist coordinates with their definitions.
pub fn forward_coordinates(diagram: &Diagram) -> Result<DiagramCoordinates> {
    CoordinateFrame::new(diagram)?.evaluate(diagram)
}
