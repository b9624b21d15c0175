//! Piecewise-linear Dirichlet eigenvalue problems on slit domains.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::eigen::{lanczos_lowest, reverse_cuthill_mckee, BandedSym};
use super::mesh::{Geometry, Mesh, MeshControls, MeshStats};
use crate::error::{Error, Result};
use crate::quad;

/// Bottom of the continuous spectrum of the slit strip: the arms have width π/2.
pub const CONTINUUM_THRESHOLD: f64 = 4.0;

/// Solver controls shared by every FEM run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverControls {
    pub mesh: MeshControls,
    /// Red refinements applied to the structured mesh before the coarse solve.
    pub refinements: usize,
    pub seed: u64,
    /// Relative Ritz residual required of every returned pair.
    pub tol: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self { mesh: MeshControls::default(), refinements: 0, seed: 1, tol: 1e-10 }
    }
}

/// Stiffness and mass matrices on the free vertices, in bandwidth-reducing order.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub stiffness: BandedSym,
    pub mass: BandedSym,
    /// `dofs[k]` is the mesh vertex of unknown `k`.
    pub dofs: Vec<usize>,
}

/// P1 element matrices: stiffness `∫∇φᵢ·∇φⱼ` and mass `∫φᵢφⱼ`.
fn element_matrices(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let grads: [[f64; 2]; 3] = std::array::from_fn(|k| {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
    });
    let mut stiff = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiff[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            mass[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (stiff, mass)
}

/// Gradient of the linear interpolant of `values` on triangle `t`.
pub fn element_gradient(mesh: &Mesh, t: usize, values: &[f64]) -> [f64; 2] {
    let ids = mesh.triangles[t];
    let p = ids.map(|i| mesh.vertices[i]);
    let area = mesh.area(t);
    let mut g = [0.0; 2];
    for k in 0..3 {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[0] += values[ids[k]] * (a[1] - b[1]) / (2.0 * area);
        g[1] += values[ids[k]] * (b[0] - a[0]) / (2.0 * area);
    }
    g
}

pub fn assemble(mesh: &Mesh) -> Result<Assembled> {
    let free: Vec<usize> = (0..mesh.vertices.len()).filter(|v| !mesh.dirichlet[*v]).collect();
    if free.is_empty() {
        return Err(Error::MeshQualityFailure("mesh has no free vertices".into()));
    }
    let mut local = vec![usize::MAX; mesh.vertices.len()];
    for (k, v) in free.iter().enumerate() {
        local[*v] = k;
    }
    let mut adjacency = vec![Vec::new(); free.len()];
    for tri in &mesh.triangles {
        for a in tri {
            for b in tri {
                let (la, lb) = (local[*a], local[*b]);
                if a != b && la != usize::MAX && lb != usize::MAX && !adjacency[la].contains(&lb) {
                    adjacency[la].push(lb);
                }
            }
        }
    }
    let order = reverse_cuthill_mckee(&adjacency);
    let mut position = vec![0; free.len()];
    for (new, old) in order.iter().enumerate() {
        position[*old] = new;
    }
    let bw = adjacency
        .iter()
        .enumerate()
        .flat_map(|(a, nbrs)| nbrs.iter().map(move |b| (a, *b)))
        .map(|(a, b)| position[a].abs_diff(position[b]))
        .max()
        .unwrap_or(0);
    let mut stiffness = BandedSym::zeros(free.len(), bw);
    let mut mass = BandedSym::zeros(free.len(), bw);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.area(t) <= 0.0 {
            return Err(Error::MeshQualityFailure(format!("triangle {t} is inverted or degenerate")));
        }
        let (ks, ms) = element_matrices(tri.map(|i| mesh.vertices[i]));
        for i in 0..3 {
            let li = local[tri[i]];
            if li == usize::MAX {
                continue;
            }
            for j in 0..=i {
                let lj = local[tri[j]];
                if lj == usize::MAX {
                    continue;
                }
                let (pi, pj) = (position[li], position[lj]);
                stiffness.add(pi, pj, ks[i][j]);
                mass.add(pi, pj, ms[i][j]);
            }
        }
    }
    let dofs = order.iter().map(|k| free[*k]).collect();
    Ok(Assembled { stiffness, mass, dofs })
}

/// Lowest eigenpairs on one mesh, vectors expanded to all vertices.
#[derive(Debug, Clone)]
pub struct MeshSolution {
    pub values: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub stats: MeshStats,
    pub bandwidth: usize,
    pub lanczos_steps: usize,
}

pub fn solve_mesh(mesh: &Mesh, count: usize, controls: &SolverControls) -> Result<MeshSolution> {
    let sys = assemble(mesh)?;
    let pairs = lanczos_lowest(&sys.stiffness, &sys.mass, count, 0.0, controls.seed, controls.tol)?;
    let modes = pairs
        .vectors
        .iter()
        .map(|x| {
            let mut full = vec![0.0; mesh.vertices.len()];
            for (k, v) in sys.dofs.iter().enumerate() {
                full[*v] = x[k];
            }
            // fix the sign so that the largest-magnitude entry is positive
            let peak = full.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
            if peak < 0.0 {
                full.iter_mut().for_each(|v| *v = -*v);
            }
            full
        })
        .collect();
    if pairs.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SolverNonConvergence(format!("non-positive eigenvalue in {:?}", pairs.values)));
    }
    Ok(MeshSolution {
        values: pairs.values,
        modes,
        stats: mesh.stats(),
        bandwidth: sys.stiffness.bandwidth(),
        lanczos_steps: pairs.steps,
    })
}

/// Lowest Dirichlet eigenvalues with a two-mesh Richardson extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub geometry: Geometry,
    /// Effective truncation `X` for the slit strip.
    pub truncation: Option<f64>,
    /// Eigenvalues on the fine mesh, ascending.
    pub eigenvalues: Vec<f64>,
    pub coarse_eigenvalues: Vec<f64>,
    /// `λ_fine + (λ_fine − λ_coarse)/3`.
    pub extrapolated: Vec<f64>,
    pub richardson_order: u32,
    pub mesh: MeshStats,
    pub coarse_mesh: MeshStats,
    pub bandwidth: usize,
    pub lanczos_steps: usize,
    pub seed: u64,
    /// Eigenvalues below [`CONTINUUM_THRESHOLD`] on the fine mesh.
    pub below_threshold: usize,
}

/// Richardson extrapolation for an `O(h²)` error under halving of `h`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    fine + (fine - coarse) / 3.0
}

/// Builds the coarse mesh of `geometry`, solves on it and on its red refinement.
pub fn dirichlet_eigs(geometry: &Geometry, count: usize, controls: &SolverControls) -> Result<(EigenReport, Mesh, MeshSolution)> {
    let (mut coarse, geometry) = Mesh::build(geometry, &controls.mesh)?;
    for _ in 0..controls.refinements {
        coarse = coarse.refine(&geometry);
    }
    let fine = coarse.refine(&geometry);
    fine.check_quality(controls.mesh.min_angle_deg)?;
    let lo = solve_mesh(&coarse, count, controls)?;
    let hi = solve_mesh(&fine, count, controls)?;
    let extrapolated = lo.values.iter().zip(&hi.values).map(|(c, f)| richardson(*c, *f)).collect();
    let truncation = match geometry {
        Geometry::SlitStrip { truncation } => Some(truncation),
        Geometry::Rectangle { .. } => None,
    };
    let report = EigenReport {
        geometry,
        truncation,
        eigenvalues: hi.values.clone(),
        coarse_eigenvalues: lo.values.clone(),
        extrapolated,
        richardson_order: 2,
        mesh: hi.stats,
        coarse_mesh: lo.stats,
        bandwidth: hi.bandwidth,
        lanczos_steps: hi.lanczos_steps,
        seed: controls.seed,
        below_threshold: hi.values.iter().filter(|v| **v < CONTINUUM_THRESHOLD).count(),
    };
    Ok((report, fine, hi))
}

/// Lowest `k ≥ 2` eigenvalues of the slit strip truncated at `|x| = X`.
pub fn slit_strip_eigs(truncation: f64, count: usize, controls: &SolverControls) -> Result<(EigenReport, Mesh, MeshSolution)> {
    if count < 2 {
        return Err(Error::InvalidInput(format!("slit strip needs at least 2 eigenvalues, got {count}")));
    }
    dirichlet_eigs(&Geometry::SlitStrip { truncation }, count, controls)
}

/// Lowest eigenvalue of the slit strip for each truncation, on the fine mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub requested: f64,
    pub truncation: f64,
    pub lambda1: f64,
    pub extrapolated: f64,
}

pub fn truncation_study(truncations: &[f64], controls: &SolverControls) -> Result<Vec<TruncationRow>> {
    truncations
        .iter()
        .map(|&x| {
            let (report, _, _) = slit_strip_eigs(x, 2, controls)?;
            Ok(TruncationRow {
                requested: x,
                truncation: report.truncation.unwrap_or(x),
                lambda1: report.eigenvalues[0],
                extrapolated: report.extrapolated[0],
            })
        })
        .collect()
}

/// Rayleigh quotient `∫|∇u|² / ∫u²` of `u = cos x · sin y` on the calibration
/// square, extended by zero, by nested adaptive quadrature.
pub fn test_function_rayleigh_quotient() -> Result<f64> {
    let double = |f: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
        let outer = quad::integrate(
            |x| {
                let inner = quad::integrate(|y| C64::new(f(x, y), 0.0), 0.0, PI, 1e-16, 1e-15);
                C64::new(inner.map(|v| v.re).unwrap_or(f64::NAN), 0.0)
            },
            -FRAC_PI_2,
            FRAC_PI_2,
            1e-16,
            1e-15,
        )?;
        Ok(outer.re)
    };
    let energy = double(&|x, y| {
        let (ux, uy) = (-x.sin() * y.sin(), x.cos() * y.cos());
        ux * ux + uy * uy
    })?;
    let norm = double(&|x, y| (x.cos() * y.sin()).powi(2))?;
    Ok(energy / norm)
}

/// Odd extension of a slit-strip eigenfunction to the doubled diagram.
#[derive(Debug, Clone)]
pub struct OddExtension {
    /// Vertices of the strip followed by their mirror images `(x, −y)`.
    pub mesh: Mesh,
    pub values: Vec<f64>,
    /// Largest value or normal-derivative mismatch across identified lines,
    /// relative to the largest normal derivative there.
    pub jump: f64,
    /// `∫U²` over the doubled mesh divided by `∫u²` over the strip.
    pub norm_ratio: f64,
}

/// Mean normal derivative `∂_y` of `values` over the triangles touching the
/// boundary edges on the line `y = level`, from the side `side` (`±1`), keyed
/// by the edge midpoint `x`.
fn edge_normal_derivatives(mesh: &Mesh, values: &[f64], level: f64, side: f64, x_filter: impl Fn(f64) -> bool) -> Vec<(f64, f64)> {
    let on = |p: [f64; 2]| (p[1] - level).abs() <= 1e-12 * (1.0 + level.abs());
    let mut out = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.vertices[i]);
        for k in 0..3 {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let xm = 0.5 * (a[0] + b[0]);
            if on(a) && on(b) && (c[1] - level) * side > 0.0 && x_filter(xm) {
                out.push((xm, element_gradient(mesh, t, values)[1]));
            }
        }
    }
    out.sort_by(|u, v| u.0.total_cmp(&v.0));
    out
}

fn mass_norm_sq(mesh: &Mesh, values: &[f64]) -> f64 {
    let mut total = 0.0;
    for tri in &mesh.triangles {
        let (_, m) = element_matrices(tri.map(|i| mesh.vertices[i]));
        for i in 0..3 {
            for j in 0..3 {
                total += values[tri[i]] * m[i][j] * values[tri[j]];
            }
        }
    }
    total
}

/// Extends `mode` by `U(x, −y) = −U(x, y)` and checks the gluing conditions:
/// `y = 0⁺ ~ y = 0⁻`, `y = π⁻ ~ y = −π⁺`, and the slit sides
/// `y = π/2 ± 0 ~ y = −π/2 ∓ 0` for `|x| ≥ π`. Values and normal derivatives
/// must agree across each identification.
pub fn embedded_mode_extension(mesh: &Mesh, mode: &[f64], tol: f64) -> Result<OddExtension> {
    if mode.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch { expected: mesh.vertices.len(), got: mode.len() });
    }
    let n = mesh.vertices.len();
    let mirror = mesh.mirrored();
    let mirror_values: Vec<f64> = mode.iter().map(|v| -v).collect();

    let mut scale = 0.0f64;
    let mut derivative_jump = 0.0f64;
    let all = |_: f64| true;
    let arms = |x: f64| x.abs() >= PI;
    // (level in the strip, side in the strip, level in the mirror, side in the mirror, x filter)
    let lines: [(f64, f64, f64, f64, &dyn Fn(f64) -> bool); 4] = [
        (0.0, 1.0, 0.0, -1.0, &all),
        (PI, -1.0, -PI, 1.0, &all),
        (FRAC_PI_2, 1.0, -FRAC_PI_2, -1.0, &arms),
        (FRAC_PI_2, -1.0, -FRAC_PI_2, 1.0, &arms),
    ];
    for (level, side, mlevel, mside, filter) in lines {
        let upper = edge_normal_derivatives(mesh, mode, level, side, filter);
        let lower = edge_normal_derivatives(&mirror, &mirror_values, mlevel, mside, filter);
        if upper.len() != lower.len() || upper.is_empty() {
            return Err(Error::MatchingFailure(f64::INFINITY));
        }
        for ((xu, du), (xl, dl)) in upper.iter().zip(&lower) {
            if (xu - xl).abs() > 1e-12 * (1.0 + xu.abs()) {
                return Err(Error::MatchingFailure(f64::INFINITY));
            }
            scale = scale.max(du.abs());
            derivative_jump = derivative_jump.max((du - dl).abs());
        }
    }
    // identified vertices carry the values of both sheets
    let peak = mode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let value_jump = mesh
        .vertices
        .iter()
        .zip(mode.iter().zip(&mirror_values))
        .filter(|(p, _)| {
            p[1].abs() < 1e-12 || (p[1] - PI).abs() < 1e-12 || ((p[1] - FRAC_PI_2).abs() < 1e-12 && p[0].abs() >= PI)
        })
        .fold(0.0f64, |m, (_, (u, v))| m.max((u - v).abs()));
    let jump = (derivative_jump / scale.max(f64::MIN_POSITIVE)).max(value_jump / peak.max(f64::MIN_POSITIVE));
    if !(jump <= tol) {
        return Err(Error::MatchingFailure(jump));
    }

    let mut vertices = mesh.vertices.clone();
    vertices.extend(&mirror.vertices);
    let mut triangles = mesh.triangles.clone();
    triangles.extend(mirror.triangles.iter().map(|t| t.map(|i| i + n)));
    let mut dirichlet = mesh.dirichlet.clone();
    dirichlet.extend(&mirror.dirichlet);
    let doubled = Mesh { vertices, triangles, dirichlet };
    let mut values = mode.to_vec();
    values.extend(mirror_values);
    let norm_ratio = mass_norm_sq(&doubled, &values) / mass_norm_sq(mesh, mode);
    Ok(OddExtension { mesh: doubled, values, jump, norm_ratio })
}
