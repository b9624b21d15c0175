//! Checks the moduli variations of `log |τ|²` against contour integrals of
//! the Schwarzian difference `(S_B − S_ω)/ω`.
//!
//! The derivatives of `log |τ|²` with respect to diagram coordinates are
//! predicted by contour integrals over dual cycles.  They are compared with
//! finite differences through the chain rule `g = Jᵀ r`, where `g` is the
//! gradient in surface parameters, `J` the Jacobian of the coordinates with
//! respect to those parameters and `r` the predicted coordinate derivatives.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::TorusModulus;
use crate::surface::{
    build_form, crossing_number, zero_circle, CoordinateFrame, CoordinateKind, CoordinateSpec, Cycle, CycleRole,
    Diagram, MarkedSurface, MeromorphicForm,
};
use crate::tau::log_abs_tau_sq;

/// Schwarzian `f″/f − (3/2)(f′/f)²` of a primitive whose derivative has the jet `[f, f′, f″]`.
pub fn schwarzian_from_jet(f: C64, df: C64, d2f: C64) -> C64 {
    let r = df / f;
    d2f / f - r * r * 1.5
}

/// Schwarzian derivative `S_ω` of the flat coordinate `w = ∫ω` in the chart.
pub fn schwarzian_of_flat_coordinate(form: &MeromorphicForm, z: C64) -> Result<C64> {
    let s = form.surface();
    let clearance = form.tolerances().clearance;
    let distance = s.points().iter().map(|p| s.separation(z, *p)).fold(f64::INFINITY, f64::min);
    if distance < clearance {
        return Err(Error::ClearanceViolation { distance, clearance });
    }
    let [f, df, d2f] = form.jet(z)?;
    // Newton estimate of the distance to the nearest zero of ω
    let to_zero = (f / df).norm();
    if to_zero < clearance {
        return Err(Error::ClearanceViolation { distance: to_zero, clearance });
    }
    Ok(schwarzian_from_jet(f, df, d2f))
}

/// Bergman projective connection `S_B` in the uniformizing (genus 0) or flat
/// (genus 1) chart, where it is constant: `0` and `−8πi ∂_B log θ₁′(0|B)`.
pub fn bergman_projective_connection(form: &MeromorphicForm) -> C64 {
    match form.theta_constants() {
        None => C64::new(0.0, 0.0),
        Some(th) => C64::new(0.0, -8.0 * PI) * th.dlog_d1_db,
    }
}

/// The two projective connections and the integrand at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchwarzianSample {
    pub z: C64,
    pub s_b: C64,
    pub s_omega: C64,
    /// `(S_B − S_ω)/f` with `ω = f dz`.
    pub integrand: C64,
}

pub fn schwarzian_sample(form: &MeromorphicForm, z: C64) -> Result<SchwarzianSample> {
    let s_omega = schwarzian_of_flat_coordinate(form, z)?;
    let s_b = bergman_projective_connection(form);
    let integrand = (s_b - s_omega) / form.coefficient(z)?;
    if !(integrand.re.is_finite() && integrand.im.is_finite()) {
        return Err(Error::NonFinite("schwarzian integrand"));
    }
    Ok(SchwarzianSample { z, s_b, s_omega, integrand })
}

/// `∮ (S_B − S_ω)/ω` along a contour.
pub fn contour_integral(form: &MeromorphicForm, cycle: &Cycle) -> Result<C64> {
    let s_b = bergman_projective_connection(form);
    let s = form.surface();
    let clearance = form.tolerances().clearance;
    let distance = cycle.clearance(s.points(), s.modulus());
    if distance < clearance {
        return Err(Error::ClearanceViolation { distance, clearance });
    }
    cycle.integrate(
        |z| {
            let [f, df, d2f] = form.jet(z)?;
            Ok((s_b - schwarzian_from_jet(f, df, d2f)) / f)
        },
        form.tolerances().quad,
    )
}

/// Which variational formula a contour integral feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    Twist,
    Height,
    Stretch,
}

impl ContourKind {
    /// Prefactor applied to the contour integral.
    pub fn apply(self, integral: C64) -> f64 {
        match self {
            ContourKind::Twist => -integral.re / (6.0 * PI),
            ContourKind::Height => integral.re / (6.0 * PI),
            ContourKind::Stretch => -integral.im / (6.0 * PI),
        }
    }
}

/// Contour integral over `cycle` with the prefactor of `kind`.
pub fn contour_rhs(form: &MeromorphicForm, cycle: &Cycle, kind: ContourKind) -> Result<f64> {
    Ok(kind.apply(contour_integral(form, cycle)?))
}

/// Coordinate families distinguished by the convention table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateFamily {
    /// Interior circumference `Im ∮_core ω`.
    Height,
    /// Interaction time `Re ∫_{R₀}^{R_j} ω`.
    Time,
    /// `Im ∫_{R₀}^{R_j} ω`.
    RelativeTwist,
    /// `Im ∮_complement ω`.
    CylinderTwist,
}

impl CoordinateFamily {
    pub fn of(spec: &CoordinateSpec) -> Self {
        match (spec.kind, spec.cycle) {
            (CoordinateKind::Height, _) => CoordinateFamily::Height,
            (CoordinateKind::Time, _) => CoordinateFamily::Time,
            (CoordinateKind::Twist, CycleRole::RelativePath(_)) => CoordinateFamily::RelativeTwist,
            (CoordinateKind::Twist, _) => CoordinateFamily::CylinderTwist,
        }
    }
}

/// The cycle paired with a coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualCycle {
    /// Circle around the zero at the end of the coordinate's relative path.
    ZeroCircle,
    CylinderCore,
    Complement,
}

/// Dual cycle, orientation and prefactor for one coordinate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualRule {
    pub family: CoordinateFamily,
    pub dual: DualCycle,
    pub kind: ContourKind,
    /// `+1` keeps the catalog orientation (counter-clockwise circles, cores
    /// along their traced direction), `−1` reverses it.
    pub orientation: i8,
    /// Subtract the zero-circle integrals for every crossing of the dual cycle
    /// with the relative paths, so the cycle is dual to the relative periods.
    pub corrected: bool,
}

/// One global orientation convention for all dual cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConventionTable {
    pub rules: Vec<DualRule>,
}

impl ConventionTable {
    /// The convention used for every verification.
    pub fn frozen() -> Self {
        let rule = |family, dual, kind, corrected| DualRule { family, dual, kind, orientation: 1, corrected };
        Self {
            rules: vec![
                rule(CoordinateFamily::Time, DualCycle::ZeroCircle, ContourKind::Stretch, false),
                rule(CoordinateFamily::RelativeTwist, DualCycle::ZeroCircle, ContourKind::Twist, false),
                rule(CoordinateFamily::Height, DualCycle::Complement, ContourKind::Height, true),
                rule(CoordinateFamily::CylinderTwist, DualCycle::CylinderCore, ContourKind::Twist, true),
            ],
        }
    }

    /// The frozen table with the interaction-time circles reversed; every
    /// verification with interaction times must fail under it.
    pub fn corrupted() -> Self {
        let mut t = Self::frozen();
        for r in &mut t.rules {
            if r.family == CoordinateFamily::Time {
                r.orientation = -r.orientation;
            }
        }
        t
    }

    pub fn rule(&self, family: CoordinateFamily) -> Result<&DualRule> {
        self.rules
            .iter()
            .find(|r| r.family == family)
            .ok_or_else(|| Error::InvalidInput(format!("no convention for {family:?} coordinates")))
    }
}

impl Default for ConventionTable {
    fn default() -> Self {
        Self::frozen()
    }
}

/// Dual cycle of a coordinate with the orientation and homology corrections
/// of `rule`, and the applied corrections as `(zero index, turns)`.
pub fn dual_cycle(
    diagram: &Diagram,
    frame: &CoordinateFrame,
    spec: &CoordinateSpec,
    rule: &DualRule,
) -> Result<(Cycle, Vec<(usize, i32)>)> {
    let modulus = diagram.form.surface().modulus();
    let missing = || Error::InvalidInput(format!("coordinate {} has no dual cycle", spec.name));
    let mut cycle = match rule.dual {
        DualCycle::ZeroCircle => match spec.cycle {
            CycleRole::RelativePath(j) => zero_circle(diagram, j),
            _ => return Err(missing()),
        },
        DualCycle::CylinderCore => frame.core_cycle(modulus).ok_or_else(missing)?,
        DualCycle::Complement => frame.complement_cycle(modulus).ok_or_else(missing)?,
    };
    if rule.orientation < 0 {
        cycle = cycle.reversed();
    }
    let mut corrections = Vec::new();
    if rule.corrected {
        let path = cycle.segments();
        for j in 1..diagram.zeros.len() {
            let leg = frame.relative_leg(diagram, j)?;
            let crossings: i32 = leg.segments().into_iter().map(|seg| crossing_number(&path, seg, modulus)).sum();
            if crossings != 0 {
                let Some(&crate::surface::Piece::Circle { center, radius, .. }) = zero_circle(diagram, j).pieces.first()
                else {
                    unreachable!("zero circles are single circles")
                };
                cycle = cycle.with_circle(center, radius, -crossings);
                corrections.push((j, -crossings));
            }
        }
    }
    Ok((cycle, corrections))
}

/// A real surface parameter varied at fixed residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    ModulusRe,
    ModulusIm,
    PointRe(usize),
    PointIm(usize),
    /// All marked points moved together.
    TranslateRe,
    TranslateIm,
}

impl Parameter {
    pub fn name(&self) -> String {
        match self {
            Parameter::ModulusRe => "re_b".into(),
            Parameter::ModulusIm => "im_b".into(),
            Parameter::PointRe(m) => format!("re_z{m}"),
            Parameter::PointIm(m) => format!("im_z{m}"),
            Parameter::TranslateRe => "re_shift".into(),
            Parameter::TranslateIm => "im_shift".into(),
        }
    }

    /// The surface with this parameter moved by `delta`.
    pub fn apply(&self, surface: &MarkedSurface, delta: f64) -> Result<MarkedSurface> {
        let shift = |d: C64| surface.with_points(surface.points().iter().map(|p| p + d).collect());
        let move_one = |m: usize, d: C64| {
            let mut pts = surface.points().to_vec();
            let p = pts.get_mut(m).ok_or_else(|| Error::InvalidInput(format!("no marked point {m}")))?;
            *p += d;
            surface.with_points(pts)
        };
        let modulus = |d: C64| -> Result<MarkedSurface> {
            let t = surface.modulus().ok_or_else(|| Error::InvalidInput("modulus parameter on a sphere".into()))?;
            surface.with_modulus(TorusModulus::with_min(t.b() + d, 0.0)?)
        };
        match *self {
            Parameter::ModulusRe => modulus(C64::new(delta, 0.0)),
            Parameter::ModulusIm => modulus(C64::new(0.0, delta)),
            Parameter::PointRe(m) => move_one(m, C64::new(delta, 0.0)),
            Parameter::PointIm(m) => move_one(m, C64::new(0.0, delta)),
            Parameter::TranslateRe => shift(C64::new(delta, 0.0)),
            Parameter::TranslateIm => shift(C64::new(0.0, delta)),
        }
    }
}

/// Free real parameters at fixed residues: the modulus and points `1..` on a
/// torus (point 0 fixed by translation), points `3..` on the sphere (three
/// points fixed by Möbius maps).
pub fn moduli_parameters(surface: &MarkedSurface) -> Vec<Parameter> {
    let (mut out, first) = match surface.genus() {
        0 => (Vec::new(), 3),
        _ => (vec![Parameter::ModulusRe, Parameter::ModulusIm], 1),
    };
    for m in first..surface.len() {
        out.push(Parameter::PointRe(m));
        out.push(Parameter::PointIm(m));
    }
    out
}

/// Central-difference derivatives of the coordinates (rows) and of `log |τ|²`
/// with respect to each parameter (columns), at one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub step: f64,
    pub jacobian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

fn evaluate_at(diagram: &Diagram, frame: &CoordinateFrame, param: Parameter, delta: f64) -> Result<(Vec<f64>, f64)> {
    let surface = param.apply(diagram.form.surface(), delta)?;
    let form = build_form(surface, diagram.form.tolerances())?;
    let previous: Vec<C64> = diagram.zeros.iter().map(|z| z.position).collect();
    let moved = Diagram::tracking(form, &previous)?;
    Ok((frame.evaluate(&moved)?.values(), log_abs_tau_sq(&moved)?))
}

pub fn derivatives(
    diagram: &Diagram,
    frame: &CoordinateFrame,
    params: &[Parameter],
    step: f64,
) -> Result<Derivatives> {
    let dim = frame.evaluate(diagram)?.dimension();
    let mut jacobian = DMatrix::zeros(dim, params.len());
    let mut gradient = DVector::zeros(params.len());
    if step != 0.0 {
        for (j, p) in params.iter().enumerate() {
            let (xp, lp) = evaluate_at(diagram, frame, *p, step)?;
            let (xm, lm) = evaluate_at(diagram, frame, *p, -step)?;
            for i in 0..dim {
                jacobian[(i, j)] = (xp[i] - xm[i]) / (2.0 * step);
            }
            gradient[j] = (lp - lm) / (2.0 * step);
        }
    }
    Ok(Derivatives { step, jacobian, gradient })
}

/// Weight `w` of the second-order Richardson combination `D_fine + w (D_fine − D_coarse)`.
fn richardson_weight(coarse_step: f64, fine_step: f64) -> f64 {
    if fine_step == 0.0 {
        0.0
    } else {
        1.0 / ((coarse_step / fine_step).powi(2) - 1.0)
    }
}

fn check_steps(steps: [f64; 2]) -> Result<()> {
    let [h1, h2] = steps;
    let zero = h1 == 0.0 && h2 == 0.0;
    if zero || (h2 > 0.0 && h1 > h2 && h1.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("finite-difference steps must satisfy h1 > h2 > 0, got {h1}, {h2}")))
    }
}

/// `2`-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Jacobian of the diagram coordinates with respect to `params`, central
/// differences at `steps` combined by Richardson extrapolation.
pub fn moduli_jacobian(diagram: &Diagram, params: &[Parameter], steps: [f64; 2]) -> Result<DMatrix<f64>> {
    check_steps(steps)?;
    let frame = CoordinateFrame::new(diagram)?;
    let coarse = derivatives(diagram, &frame, params, steps[0])?;
    let fine = derivatives(diagram, &frame, params, steps[1])?;
    let w = richardson_weight(steps[0], steps[1]);
    Ok(&fine.jacobian + (&fine.jacobian - &coarse.jacobian) * w)
}

/// Verification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarcheckConfig {
    /// Coarse and fine central-difference steps.
    pub steps: [f64; 2],
    pub tol: f64,
    pub max_condition: f64,
    pub table: ConventionTable,
}

impl Default for VarcheckConfig {
    fn default() -> Self {
        Self { steps: [1e-3, 5e-4], tol: 1e-6, max_condition: 1e8, table: ConventionTable::frozen() }
    }
}

/// Result for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarCheckReport {
    pub coordinate: String,
    pub family: CoordinateFamily,
    /// `∂ log|τ|² / ∂x` from finite differences via `J⁻ᵀ g` (absent when `J` is singular).
    pub fd_derivative: Option<f64>,
    /// Contour prediction with its prefactor.
    pub contour_value: f64,
    pub relative_discrepancy: f64,
    pub steps: [f64; 2],
    pub richardson_order: u32,
    pub cycle: CycleRole,
    pub rule: DualRule,
    /// Zero circles added to the dual cycle, as `(zero index, turns)`.
    pub corrections: Vec<(usize, i32)>,
}

/// Outcome of a chain-rule verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarCheckOutcome {
    pub reports: Vec<VarCheckReport>,
    pub parameters: Vec<String>,
    /// `∇ log|τ|²` in the parameters.
    pub gradient: Vec<f64>,
    /// `Jᵀ r`.
    pub predicted_gradient: Vec<f64>,
    /// `max |g − Jᵀr| / max(‖g‖∞, ‖Jᵀr‖∞)`.
    pub parameter_discrepancy: f64,
    pub max_discrepancy: f64,
    pub condition_number: Option<f64>,
    /// Parameter discrepancy with the unextrapolated coarse and fine differences.
    pub coarse_discrepancy: f64,
    pub fine_discrepancy: f64,
    /// The raw discrepancy dropped by at least a factor 3 under step halving.
    pub converged: bool,
    pub tol: f64,
    pub passed: bool,
}

impl VarCheckOutcome {
    pub fn check(&self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::VariationalMismatch { max_discrepancy: self.max_discrepancy, tol: self.tol })
        }
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn chain_discrepancy(gradient: &DVector<f64>, predicted: &DVector<f64>) -> f64 {
    let scale = gradient.amax().max(predicted.amax());
    relative((gradient - predicted).amax(), scale)
}

/// Compares finite-difference derivatives of `log |τ|²` with the contour
/// predictions through `g = Jᵀ r`.
pub fn verify_variational(diagram: &Diagram, params: &[Parameter], config: &VarcheckConfig) -> Result<VarCheckOutcome> {
    let frame = CoordinateFrame::new(diagram)?;
    let coords = frame.evaluate(diagram)?;
    let dim = coords.dimension();
    if params.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: params.len() });
    }
    check_steps(config.steps)?;
    let [h1, h2] = config.steps;
    let coarse = derivatives(diagram, &frame, params, h1)?;
    let fine = derivatives(diagram, &frame, params, h2)?;
    let w = richardson_weight(h1, h2);
    let jacobian = &fine.jacobian + (&fine.jacobian - &coarse.jacobian) * w;
    let gradient = &fine.gradient + (&fine.gradient - &coarse.gradient) * w;
    let degenerate = h1 == 0.0;
    let condition = if degenerate || dim == 0 {
        None
    } else {
        let c = condition_number(&jacobian);
        if !(c <= config.max_condition) {
            return Err(Error::IllConditioned(c));
        }
        Some(c)
    };

    let mut contour = DVector::zeros(dim);
    let mut duals = Vec::with_capacity(dim);
    for (i, spec) in coords.specs.iter().enumerate() {
        let rule = *config.table.rule(CoordinateFamily::of(spec))?;
        let (cycle, corrections) = dual_cycle(diagram, &frame, spec, &rule)?;
        contour[i] = contour_rhs(&diagram.form, &cycle, rule.kind)?;
        duals.push((rule, cycle.role, corrections));
    }

    let predicted = jacobian.transpose() * &contour;
    let parameter_discrepancy = chain_discrepancy(&gradient, &predicted);
    let coarse_discrepancy = chain_discrepancy(&coarse.gradient, &(coarse.jacobian.transpose() * &contour));
    let fine_discrepancy = chain_discrepancy(&fine.gradient, &(fine.jacobian.transpose() * &contour));
    let converged = degenerate || fine_discrepancy <= coarse_discrepancy / 3.0;

    let fd = if degenerate { None } else { jacobian.transpose().lu().solve(&gradient) };
    let fd_scale = fd.as_ref().map_or(0.0, |v| v.amax()).max(contour.amax());
    let mut max_discrepancy = parameter_discrepancy;
    let mut reports = Vec::with_capacity(dim);
    for (i, (spec, (rule, role, corrections))) in coords.specs.iter().zip(duals).enumerate() {
        let fd_i = fd.as_ref().map(|v| v[i]);
        let relative_discrepancy = fd_i.map_or(0.0, |v| relative((v - contour[i]).abs(), fd_scale));
        max_discrepancy = max_discrepancy.max(relative_discrepancy);
        reports.push(VarCheckReport {
            coordinate: spec.name.clone(),
            family: rule.family,
            fd_derivative: fd_i,
            contour_value: contour[i],
            relative_discrepancy,
            steps: config.steps,
            richardson_order: 2,
            cycle: role,
            rule,
            corrections,
        });
    }
    let passed = max_discrepancy.is_finite() && max_discrepancy <= config.tol;
    Ok(VarCheckOutcome {
        reports,
        parameters: params.iter().map(Parameter::name).collect(),
        gradient: gradient.iter().copied().collect(),
        predicted_gradient: predicted.iter().copied().collect(),
        parameter_discrepancy,
        max_discrepancy,
        condition_number: condition,
        coarse_discrepancy,
        fine_discrepancy,
        converged,
        tol: config.tol,
        passed,
    })
}

/// Reproducible random marked surface with well separated points, residues
/// bounded away from zero and `Im B ∈ [0.8, 1.4]` in genus one.
pub fn random_surface(genus: usize, n: usize, seed: u64) -> Result<MarkedSurface> {
    if n < 2 || genus > 1 {
        return Err(Error::InvalidInput(format!("unsupported random surface: genus {genus}, {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let mut residues: Vec<f64> =
            (0..n - 1).map(|_| rng.gen_range(0.3..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let last = -residues.iter().sum::<f64>();
        if last.abs() < 0.3 {
            continue;
        }
        residues.push(last);
        let surface = if genus == 0 {
            let mut pts = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
            pts.truncate(n);
            while pts.len() < n {
                pts.push(C64::new(rng.gen_range(-0.5..2.5), rng.gen_range(-1.5..1.5)));
            }
            MarkedSurface::sphere(pts, residues)?
        } else {
            let t = TorusModulus::new(C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.8..1.4)))?;
            let pts = std::iter::once(C64::new(0.0, 0.0))
                .chain((1..n).map(|_| C64::new(rng.gen_range(0.0..1.0), 0.0) + t.b() * rng.gen_range(0.0..1.0)))
                .collect();
            MarkedSurface::torus(t, pts, residues)?
        };
        let spread = 0.35 * if genus == 0 { 1.0 } else { 1.0 / (n as f64).sqrt() };
        let separated = (0..n).all(|i| (0..i).all(|j| surface.separation(surface.points()[i], surface.points()[j]) > spread));
        if separated {
            return Ok(surface);
        }
    }
    Err(Error::InvalidInput("could not draw a separated configuration".into()))
}
