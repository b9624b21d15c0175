//! `mandel`: batch front end for the diagram and spectral computations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 verification failure,
//! 4 numeric or runtime failure. Failures print a JSON error record to stderr.

mod cache;
mod config;
mod diagram;
mod error;
mod output;
mod spectral;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mandel_core::spectral::SolverControls;

use crate::cache::Cache;
use crate::config::{parse_overrides, read_toml, DiagramConfig, SpectralConfig};
use crate::error::{CliError, CliResult};
use crate::output::Sink;
use crate::spectral::{HeatMode, HeatRequest, SlitStripRequest};

#[derive(Debug, Parser)]
#[command(name = "mandel", version, about = "Tau functions, variational checks and model spectra of Mandelstam diagrams")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Report path; the CSV table and timing sidecar are written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Seed for sampled points and eigensolver start vectors.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override `key=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Cache directory for expensive stages.
    #[arg(long, global = true, env = "MANDEL_CACHE_DIR", value_name = "DIR")]
    cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tau function and determinant (up to a constant) of one diagram.
    Tau,
    /// Finite-difference check of the variational formulas.
    Varcheck {
        /// Coarse and fine finite-difference steps, `h1,h2`.
        #[arg(long, value_name = "H1,H2")]
        fd_steps: Option<String>,
    },
    /// Dirichlet eigenvalues of the slit strip (or the calibration square).
    SlitStrip(SlitStripArgs),
    /// Dirichlet-to-Neumann model on the cut cylinder.
    Dtn {
        /// Circumference.
        #[arg(long)]
        a: f64,
        /// Half-length of the interior cylinder.
        #[arg(long = "R", alias = "r")]
        r: f64,
        /// `i*A..i*B` or a comma list of `i*s`.
        #[arg(long, default_value = "i*1e-3..i*1e-1")]
        mu_grid: String,
        /// Grid points for a range.
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Highest Fourier mode listed in the block table.
        #[arg(long, default_value_t = 8)]
        l_max: usize,
    },
    /// Heat-kernel constants and property checks.
    Heat {
        #[arg(long, value_enum)]
        mode: HeatMode,
        /// Comma list of times.
        #[arg(long = "t", value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        times: Vec<f64>,
        /// Cylinder circumference.
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        a: f64,
        /// Comma list of interior slit counts.
        #[arg(long = "slits", value_delimiter = ',', default_value = "0,1,2,3")]
        slits: Vec<usize>,
    },
    /// `tau` over a grid of one configuration parameter.
    Sweep {
        /// `b.re`, `b.im`, `points[i].re` or `points[i].im`.
        #[arg(long)]
        axis: String,
        /// `start:stop:count` or a comma list.
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Args)]
struct SlitStripArgs {
    /// Arm truncation `X`.
    #[arg(long, default_value_t = 8.0)]
    truncate: f64,
    /// Number of eigenvalues.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Solve the calibration square instead of the strip.
    #[arg(long)]
    square: bool,
    /// Grid cells per length pi/2 (overrides the config file).
    #[arg(long)]
    resolution: Option<usize>,
    /// Red refinements before the coarse solve.
    #[arg(long, default_value_t = 0)]
    refinements: usize,
    /// Grading exponent toward the slit tips (overrides the config file).
    #[arg(long)]
    grading: Option<f64>,
    /// Odd extension of the lowest mode to the doubled diagram.
    #[arg(long)]
    extension: bool,
    /// Truncation study over a comma list of `X`.
    #[arg(long, value_delimiter = ',')]
    study: Vec<f64>,
    /// Export the fine mesh in the plain-text triangle format.
    #[arg(long, value_name = "PATH")]
    mesh_out: Option<PathBuf>,
}

fn require_config(path: Option<&Path>) -> CliResult<&Path> {
    path.ok_or_else(|| CliError::Config("this command needs --config PATH".into()))
}

/// Applies `--tol` keys of a spectral command; unknown keys are errors.
fn take_spectral_tols(tols: &[(String, f64)], known: &[&str]) -> CliResult<Vec<(String, f64)>> {
    for (k, _) in tols {
        if !known.contains(&k.as_str()) {
            return Err(CliError::Config(format!("unknown tolerance `{k}` for this command (known: {})", known.join(", "))));
        }
    }
    Ok(tols.to_vec())
}

fn lookup(tols: &[(String, f64)], key: &str, default: f64) -> f64 {
    tols.iter().rev().find(|(k, _)| k == key).map_or(default, |(_, v)| *v)
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    if g.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let tols = parse_overrides(&g.tol)?;
    let cache = Cache::new(g.cache.clone());
    let sink = Sink::new(g.out.clone());
    let diagram_config = || -> CliResult<DiagramConfig> {
        let mut c = DiagramConfig::load(require_config(g.config.as_deref())?)?;
        c.apply_overrides(g.seed, &tols)?;
        Ok(c)
    };
    match cli.command {
        Command::Tau => diagram::cmd_tau(&diagram_config()?, &cache, &sink),
        Command::Varcheck { fd_steps } => {
            let mut c = diagram_config()?;
            if let Some(spec) = fd_steps {
                let steps = diagram::parse_grid(&spec)?;
                let [h1, h2] = steps[..] else {
                    return Err(CliError::Config(format!("--fd-steps expects h1,h2, got `{spec}`")));
                };
                c.varcheck.steps = [h1, h2];
                c.validate()?;
            }
            diagram::cmd_varcheck(&c, &sink)
        }
        Command::Sweep { axis, grid } => {
            let c = diagram_config()?;
            diagram::cmd_sweep(&c, &axis, &diagram::parse_grid(&grid)?, g.jobs, &cache, &sink)
        }
        Command::SlitStrip(args) => {
            let tols = take_spectral_tols(&tols, &["lanczos", "matching"])?;
            let file: SpectralConfig = match &g.config {
                Some(p) => read_toml(p)?,
                None => SpectralConfig::default(),
            };
            let mut controls = SolverControls { mesh: file.mesh, refinements: args.refinements, ..SolverControls::default() };
            if let Some(r) = args.resolution {
                controls.mesh.resolution = r;
            }
            if let Some(e) = args.grading {
                controls.mesh.grading_exponent = e;
            }
            if let Some(s) = g.seed {
                controls.seed = s;
            }
            controls.tol = lookup(&tols, "lanczos", controls.tol);
            let req = SlitStripRequest {
                truncation: (!args.square).then_some(args.truncate),
                count: args.k,
                controls,
                extension: args.extension,
                matching_tol: lookup(&tols, "matching", 1e-10),
                study: args.study,
            };
            spectral::cmd_slit_strip(&req, args.mesh_out.as_deref(), &cache, &sink)
        }
        Command::Dtn { a, r, mu_grid, points, l_max } => {
            take_spectral_tols(&tols, &[])?;
            let grid = spectral::parse_mu_grid(&mu_grid, points)?;
            spectral::cmd_dtn(&spectral::DtnRequest { a, r, grid, l_max }, &sink)
        }
        Command::Heat { mode, times, a, slits } => {
            let tols = take_spectral_tols(&tols, &["defect"])?;
            let req = HeatRequest { mode, times, circumference: a, slits, defect_tol: lookup(&tols, "defect", 1e-6) };
            spectral::cmd_heat(&req, &sink)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("error records serialize"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
