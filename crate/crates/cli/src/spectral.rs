//! `slit-strip`, `dtn` and `heat`.

use std::path::Path;

use mandel_core::spectral::{
    cone_defect, cylinder_check, dirichlet_eigs, dtn_blocks, dtn_det_star, dtn_table, embedded_mode_extension,
    heat_kernel_cylinder, relative_trace_constant, test_function_rayleigh_quotient, truncation_study, DtnBlock,
    DtnRow, EigenReport, Geometry, Mesh, SolverControls, TruncationRow,
};
use mandel_core::varcheck::ConventionTable;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::error::{CliError, CliResult};
use crate::output::{write_file, Manifest, Sink, Timing};

/// Distance below 2 (plus this margin) that counts as the bound state.
pub const BOUND_STATE_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitStripRequest {
    /// `None` solves the calibration square.
    pub truncation: Option<f64>,
    pub count: usize,
    pub controls: SolverControls,
    pub extension: bool,
    pub matching_tol: f64,
    pub study: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSummary {
    pub vertices: usize,
    pub triangles: usize,
    pub jump: f64,
    pub norm_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitStripReport {
    pub eigen: EigenReport,
    /// Fine-mesh eigenvalues within `1e−6` relative of the lowest one.
    pub lambda1_multiplicity: usize,
    /// Strip only: `0 < λ₁ ≤ 2 + margin` and below the continuum.
    pub bound_state: Option<bool>,
    /// Square only: Rayleigh quotient of `cos x · sin y`.
    pub rayleigh_quotient: Option<f64>,
    pub extension: Option<ExtensionSummary>,
    pub truncation_study: Vec<TruncationRow>,
}

fn geometry(req: &SlitStripRequest) -> Geometry {
    match req.truncation {
        Some(truncation) => Geometry::SlitStrip { truncation },
        None => Geometry::calibration_square(),
    }
}

pub fn solve_slit_strip(req: &SlitStripRequest) -> CliResult<SlitStripReport> {
    if req.truncation.is_some() && req.count < 2 {
        return Err(CliError::Config(format!("--k must be at least 2, got {}", req.count)));
    }
    let (eigen, mesh, solution) = dirichlet_eigs(&geometry(req), req.count, &req.controls)?;
    let lambda1 = eigen.eigenvalues[0];
    let lambda1_multiplicity = eigen.eigenvalues.iter().filter(|v| (**v - lambda1).abs() <= 1e-6 * lambda1).count();
    let (bound_state, rayleigh_quotient) = match req.truncation {
        Some(_) => {
            let x = eigen.extrapolated[0];
            (Some(x > 0.0 && x <= 2.0 + BOUND_STATE_MARGIN && eigen.below_threshold > 0), None)
        }
        None => (None, Some(test_function_rayleigh_quotient()?)),
    };
    let extension = if req.extension && req.truncation.is_some() {
        let ext = embedded_mode_extension(&mesh, &solution.modes[0], req.matching_tol)?;
        Some(ExtensionSummary {
            vertices: ext.mesh.vertices.len(),
            triangles: ext.mesh.triangles.len(),
            jump: ext.jump,
            norm_ratio: ext.norm_ratio,
        })
    } else {
        None
    };
    let truncation_study = if req.study.is_empty() { Vec::new() } else { truncation_study(&req.study, &req.controls)? };
    Ok(SlitStripReport { eigen, lambda1_multiplicity, bound_state, rayleigh_quotient, extension, truncation_study })
}

/// The fine mesh of a request, rebuilt without solving.
pub fn fine_mesh(req: &SlitStripRequest) -> CliResult<Mesh> {
    let (mut mesh, effective) = Mesh::build(&geometry(req), &req.controls.mesh)?;
    for _ in 0..=req.controls.refinements {
        mesh = mesh.refine(&effective);
    }
    Ok(mesh)
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    coarse: f64,
    fine: f64,
    extrapolated: f64,
    below_threshold: bool,
}

pub fn cmd_slit_strip(req: &SlitStripRequest, mesh_out: Option<&Path>, cache: &Cache, sink: &Sink) -> CliResult<()> {
    let report = cache.get_or_compute("fem", req, || solve_slit_strip(req))?;
    if let Some(path) = mesh_out {
        write_file(path, fine_mesh(req)?.to_text().as_bytes())?;
    }
    let e = &report.eigen;
    let rows: Vec<EigenRow> = (0..e.eigenvalues.len())
        .map(|i| EigenRow {
            index: i + 1,
            coarse: e.coarse_eigenvalues[i],
            fine: e.eigenvalues[i],
            extrapolated: e.extrapolated[i],
            below_threshold: e.eigenvalues[i] < mandel_core::spectral::CONTINUUM_THRESHOLD,
        })
        .collect();
    let manifest = Manifest::new("slit-strip", req, ConventionTable::frozen());
    let timing = Timing { cache_hits: cache.hits(), cache_misses: cache.misses(), ..Timing::default() };
    sink.emit(&manifest, &report, &rows, timing)?;
    if report.bound_state == Some(false) {
        return Err(CliError::Verification(format!(
            "no eigenvalue in (0, {}] below the continuum: lowest extrapolated {}",
            2.0 + BOUND_STATE_MARGIN,
            e.extrapolated[0]
        )));
    }
    if let Some(ext) = &report.extension {
        if (ext.norm_ratio - 2.0).abs() > 1e-9 {
            return Err(CliError::Verification(format!("extension norm ratio {} is not 2", ext.norm_ratio)));
        }
    }
    Ok(())
}

/// Imaginary spectral parameters `μ = i·s` from `i*A..i*B` (log-spaced,
/// `points` values) or a comma list of `i*s` terms; returns the `s` values.
pub fn parse_mu_grid(spec: &str, points: usize) -> CliResult<Vec<f64>> {
    let bad = |why: &str| CliError::Config(format!("mu grid `{spec}`: {why}"));
    let imag = |term: &str| -> CliResult<f64> {
        let t = term.trim();
        let body = t
            .strip_prefix("i*")
            .or_else(|| t.strip_suffix("*i"))
            .or_else(|| t.strip_suffix('i'))
            .ok_or_else(|| bad("values must be imaginary, written i*s (the operator needs mu^2 <= 0)"))?;
        let s: f64 = body.trim().parse().map_err(|_| bad("unparsable term"))?;
        if !(s.is_finite() && s > 0.0) {
            return Err(bad("imaginary parts must be positive"));
        }
        Ok(s)
    };
    if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi) = (imag(lo)?, imag(hi)?);
        if points < 2 || hi <= lo {
            return Err(bad("a range needs lo < hi and at least 2 points"));
        }
        let (l0, l1) = (lo.ln(), hi.ln());
        Ok((0..points)
            .map(|k| match k {
                0 => lo,
                k if k + 1 == points => hi,
                k => (l0 + (l1 - l0) * k as f64 / (points - 1) as f64).exp(),
            })
            .collect())
    } else {
        spec.split(',').map(imag).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DtnReport {
    pub a: f64,
    pub r: f64,
    pub det_star: f64,
    /// `ℓ = 0..=l_max` at `μ = 0`.
    pub blocks: Vec<DtnBlock>,
    pub rows: Vec<DtnRow>,
    /// Every row satisfies `|λ₁/s − 1| ≤ 5 s R`.
    pub linear_window: bool,
    /// `|det/s − det*| / det*` at the smallest `s`.
    pub det_ratio_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DtnRequest {
    pub a: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub grid: Vec<f64>,
    pub l_max: usize,
}

pub fn run_dtn(req: &DtnRequest) -> CliResult<DtnReport> {
    let blocks = dtn_blocks(req.a, req.r, 0.0, req.l_max)?;
    let det_star = dtn_det_star(req.a, req.r)?;
    let rows = dtn_table(req.a, req.r, &req.grid)?;
    let linear_window = rows.iter().all(|row| (row.lambda1_over_s - 1.0).abs() <= 5.0 * row.s * req.r);
    let smallest = rows.iter().min_by(|x, y| x.s.total_cmp(&y.s)).expect("grid is nonempty");
    let det_ratio_deviation = (smallest.det_over_s - det_star).abs() / det_star;
    Ok(DtnReport { a: req.a, r: req.r, det_star, blocks, rows, linear_window, det_ratio_deviation })
}

pub fn cmd_dtn(req: &DtnRequest, sink: &Sink) -> CliResult<()> {
    let report = run_dtn(req)?;
    let manifest = Manifest::new("dtn", req, ConventionTable::frozen());
    sink.emit(&manifest, &report, &report.rows, Timing::default())?;
    if !report.linear_window {
        return Err(CliError::Verification("lambda1/s left the window [1 - 5sR, 1 + 5sR]".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum HeatMode {
    ConeDefect,
    Trace,
    Cylinder,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatRequest {
    pub mode: HeatMode,
    pub times: Vec<f64>,
    pub circumference: f64,
    pub slits: Vec<usize>,
    pub defect_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatRow {
    pub t: Option<f64>,
    pub slits: Option<usize>,
    pub value: Option<f64>,
    /// `value + 1/8` for the cone defect, `value + K/4` for the trace constant.
    pub deviation: Option<f64>,
    pub mass_error: Option<f64>,
    pub periodicity_error: Option<f64>,
    pub min_value: Option<f64>,
    pub semigroup_error: Option<f64>,
    pub passed: bool,
}

impl HeatRow {
    fn empty() -> Self {
        Self {
            t: None,
            slits: None,
            value: None,
            deviation: None,
            mass_error: None,
            periodicity_error: None,
            min_value: None,
            semigroup_error: None,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatReport {
    pub mode: HeatMode,
    pub rows: Vec<HeatRow>,
    pub passed: bool,
}

/// Relative error of `H(t) ∗ H(t) = H(2t)` at two fixed points.
fn semigroup_error(t: f64, a: f64) -> CliResult<f64> {
    let (p, q) = ((0.2, 0.1 * a), (-0.4, 0.7 * a));
    let conv = mandel_core::spectral::heat::cylinder_convolution(p, q, t, t, a)?;
    let direct = heat_kernel_cylinder(p.0, p.1, q.0, q.1, 2.0 * t, a)?;
    Ok((conv - direct).abs() / direct)
}

pub fn run_heat(req: &HeatRequest) -> CliResult<HeatReport> {
    let rows: Vec<HeatRow> = match req.mode {
        HeatMode::ConeDefect => req
            .times
            .iter()
            .map(|&t| {
                let value = cone_defect(t)?;
                let deviation = value + 0.125;
                Ok(HeatRow { t: Some(t), value: Some(value), deviation: Some(deviation), passed: deviation.abs() <= req.defect_tol, ..HeatRow::empty() })
            })
            .collect::<CliResult<_>>()?,
        HeatMode::Trace => req
            .slits
            .iter()
            .map(|&k| {
                let value = relative_trace_constant(k)?;
                let deviation = value + k as f64 / 4.0;
                Ok(HeatRow { slits: Some(k), value: Some(value), deviation: Some(deviation), passed: deviation.abs() <= req.defect_tol * (2 * k).max(1) as f64, ..HeatRow::empty() })
            })
            .collect::<CliResult<_>>()?,
        HeatMode::Cylinder => req
            .times
            .iter()
            .map(|&t| {
                let c = cylinder_check(t, req.circumference)?;
                let scale = heat_kernel_cylinder(0.0, 0.0, 0.0, 0.0, t, req.circumference)?;
                let semigroup = semigroup_error(t, req.circumference)?;
                let passed = c.mass_error <= 1e-10
                    && c.periodicity_error <= 4.0 * f64::EPSILON * scale
                    && c.min_value > 0.0
                    && semigroup <= 1e-8;
                Ok(HeatRow {
                    t: Some(t),
                    mass_error: Some(c.mass_error),
                    periodicity_error: Some(c.periodicity_error),
                    min_value: Some(c.min_value),
                    semigroup_error: Some(semigroup),
                    passed,
                    ..HeatRow::empty()
                })
            })
            .collect::<CliResult<_>>()?,
    };
    let passed = rows.iter().all(|r| r.passed);
    Ok(HeatReport { mode: req.mode, rows, passed })
}

pub fn cmd_heat(req: &HeatRequest, sink: &Sink) -> CliResult<()> {
    let report = run_heat(req)?;
    let manifest = Manifest::new("heat", req, ConventionTable::frozen());
    sink.emit(&manifest, &report, &report.rows, Timing::default())?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!("heat {:?} checks failed", req.mode)))
    }
}
