//! `tau`, `varcheck` and `sweep`: commands driven by a diagram configuration.

use mandel_core::tau::determinant_up_to_c;
use mandel_core::varcheck::{moduli_parameters, verify_variational, VarCheckOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::config::DiagramConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Manifest, Sink, Timing};

/// Flattened tau evaluation; cached per resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub tau12_re: f64,
    pub tau12_im: f64,
    pub abs_tau_sq: f64,
    pub det_im_b: f64,
    pub determinant_up_to_c: f64,
    pub constancy_spread: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub interaction_times: Vec<f64>,
}

pub fn evaluate_tau(config: &DiagramConfig) -> CliResult<TauRecord> {
    let diagram = config.diagram()?;
    let r = determinant_up_to_c(&diagram, &config.tau_options())?;
    Ok(TauRecord {
        tau12_re: r.tau12.re,
        tau12_im: r.tau12.im,
        abs_tau_sq: r.abs_tau_sq,
        det_im_b: r.det_im_b,
        determinant_up_to_c: r.determinant_up_to_c,
        constancy_spread: r.constancy_spread,
        samples: r.samples,
        seed: r.seed,
        interaction_times: diagram.interaction_times()?,
    })
}

#[derive(Serialize)]
struct TauRow {
    tau12_re: f64,
    tau12_im: f64,
    abs_tau_sq: f64,
    det_im_b: f64,
    determinant_up_to_c: f64,
    constancy_spread: Option<f64>,
}

pub fn cmd_tau(config: &DiagramConfig, cache: &Cache, sink: &Sink) -> CliResult<()> {
    let record = cache.get_or_compute("tau", config, || evaluate_tau(config))?;
    let row = TauRow {
        tau12_re: record.tau12_re,
        tau12_im: record.tau12_im,
        abs_tau_sq: record.abs_tau_sq,
        det_im_b: record.det_im_b,
        determinant_up_to_c: record.determinant_up_to_c,
        constancy_spread: record.constancy_spread,
    };
    let manifest = Manifest::new("tau", config, config.varcheck.convention.table());
    let timing = Timing { cache_hits: cache.hits(), cache_misses: cache.misses(), ..Timing::default() };
    sink.emit(&manifest, &record, &[row], timing)
}

#[derive(Serialize)]
struct VarcheckRow {
    coordinate: String,
    family: String,
    fd_derivative: Option<f64>,
    contour_value: f64,
    relative_discrepancy: f64,
    step_coarse: f64,
    step_fine: f64,
    richardson_order: u32,
    cycle: String,
    orientation: i8,
    corrections: usize,
    passed: bool,
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn run_varcheck(config: &DiagramConfig) -> CliResult<VarCheckOutcome> {
    let diagram = config.diagram()?;
    let params = moduli_parameters(diagram.form.surface());
    Ok(verify_variational(&diagram, &params, &config.varcheck.resolve())?)
}

/// Writes the verification report, then fails with exit code 3 unless every
/// coordinate passed.
pub fn cmd_varcheck(config: &DiagramConfig, sink: &Sink) -> CliResult<()> {
    let outcome = run_varcheck(config)?;
    let rows: Vec<VarcheckRow> = outcome
        .reports
        .iter()
        .map(|r| VarcheckRow {
            coordinate: r.coordinate.clone(),
            family: label(&r.family),
            fd_derivative: r.fd_derivative,
            contour_value: r.contour_value,
            relative_discrepancy: r.relative_discrepancy,
            step_coarse: r.steps[0],
            step_fine: r.steps[1],
            richardson_order: r.richardson_order,
            cycle: label(&r.cycle),
            orientation: r.rule.orientation,
            corrections: r.corrections.len(),
            passed: r.relative_discrepancy < outcome.tol,
        })
        .collect();
    let manifest = Manifest::new("varcheck", config, config.varcheck.convention.table());
    sink.emit(&manifest, &outcome, &rows, Timing::default())?;
    if outcome.passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "variational mismatch: max discrepancy {:e} exceeds {:e}",
            outcome.max_discrepancy, outcome.tol
        )))
    }
}

/// Grid values from `start:stop:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("grid `{spec}`: expected start:stop:count or a comma list"));
    let number = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts[..] else { return Err(bad()) };
        let (a, b) = (number(a).ok_or_else(bad)?, number(b).ok_or_else(bad)?);
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        spec.split(',').map(|s| number(s).ok_or_else(bad)).collect::<CliResult<_>>()?
    };
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub status: &'static str,
    pub determinant_up_to_c: Option<f64>,
    pub abs_tau_sq: Option<f64>,
    pub det_im_b: Option<f64>,
    /// `det / det` of the first successful row; the unknown constant cancels.
    pub ratio_to_first: Option<f64>,
    pub exit_code: Option<i32>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    axis: &'a str,
    grid: &'a [f64],
    failed: usize,
    rows: &'a [SweepRow],
}

#[derive(Serialize)]
struct SweepManifestConfig<'a> {
    base: &'a DiagramConfig,
    axis: &'a str,
    grid: &'a [f64],
}

pub fn cmd_sweep(base: &DiagramConfig, axis: &str, grid: &[f64], jobs: usize, cache: &Cache, sink: &Sink) -> CliResult<()> {
    // reject a bad axis before spawning any work
    base.clone().set_axis(axis, grid.first().copied().unwrap_or_default())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs {jobs}: {e}")))?;
    let results: Vec<CliResult<TauRecord>> = pool.install(|| {
        grid.par_iter()
            .map(|&v| {
                let mut config = base.clone();
                config.set_axis(axis, v)?;
                config.validate()?;
                cache.get_or_compute("tau", &config, || evaluate_tau(&config))
            })
            .collect()
    });
    let first = results.iter().find_map(|r| r.as_ref().ok().map(|t| t.determinant_up_to_c));
    let rows: Vec<SweepRow> = results
        .iter()
        .zip(grid)
        .enumerate()
        .map(|(index, (r, &value))| match r {
            Ok(t) => SweepRow {
                index,
                value,
                status: "ok",
                determinant_up_to_c: Some(t.determinant_up_to_c),
                abs_tau_sq: Some(t.abs_tau_sq),
                det_im_b: Some(t.det_im_b),
                ratio_to_first: first.map(|d| t.determinant_up_to_c / d),
                exit_code: None,
                error: None,
            },
            Err(e) => SweepRow {
                index,
                value,
                status: "failed",
                determinant_up_to_c: None,
                abs_tau_sq: None,
                det_im_b: None,
                ratio_to_first: None,
                exit_code: Some(e.exit_code()),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let failed = rows.iter().filter(|r| r.exit_code.is_some()).count();
    let manifest = Manifest::new(
        "sweep",
        SweepManifestConfig { base, axis, grid },
        base.varcheck.convention.table(),
    );
    let report = SweepReport { axis, grid, failed, rows: &rows };
    let timing = Timing { jobs: Some(jobs), cache_hits: cache.hits(), cache_misses: cache.misses(), ..Timing::default() };
    sink.emit(&manifest, &report, &rows, timing)?;
    match rows.iter().find_map(|r| r.exit_code) {
        None => Ok(()),
        Some(code) => {
            let msg = format!("{failed} of {} sweep rows failed", rows.len());
            Err(match code {
                2 => CliError::Config(msg),
                3 => CliError::Verification(msg),
                _ => CliError::Failed(msg),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        for bad in ["0:1", "0:1:0", "a,b", "0:x:2", "1:2:3:4", ""] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
