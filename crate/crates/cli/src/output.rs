//! Report envelopes, CSV companions and the timing sidecar.
//!
//! A report is a JSON document `{ "manifest": …, "report": … }`. With
//! `--out PATH` it is written to `PATH`, its flat table to `PATH` with the
//! extension `.csv`, and wall-clock data to `PATH.timing.json`; without it the
//! report goes to stdout. Timing lives only in the sidecar, so report bytes
//! depend on the resolved configuration alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mandel_core::varcheck::ConventionTable;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const ARTIFACT: &str = "mandel";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CONVENTIONS_VERSION: &str = "1";

/// Orientation conventions every report is computed under.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub version: &'static str,
    pub zero_circles: &'static str,
    pub pole_parameters: &'static str,
    pub dual_cycles: ConventionTable,
}

impl Conventions {
    pub fn with_table(table: ConventionTable) -> Self {
        Self {
            version: CONVENTIONS_VERSION,
            zero_circles: "counter-clockwise",
            pole_parameters: "zeta = exp(w / residue), vanishing at the pole for either residue sign",
            dual_cycles: table,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    pub conventions: Conventions,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &'static str, config: C, table: ConventionTable) -> Self {
        Self { artifact: ARTIFACT, version: VERSION, command, config, conventions: Conventions::with_table(table) }
    }
}

#[derive(Debug, Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    manifest: &'a Manifest<C>,
    report: &'a R,
}

/// Wall-clock and cache statistics, kept out of the report itself.
#[derive(Debug, Default, Serialize)]
pub struct Timing {
    pub command: &'static str,
    pub wall_seconds: f64,
    pub jobs: Option<usize>,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

/// Where a command's outputs go.
pub struct Sink {
    out: Option<PathBuf>,
    started: Instant,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> Self {
        Self { out, started: Instant::now() }
    }

    pub fn csv_path(&self) -> Option<PathBuf> {
        self.out.as_ref().map(|p| p.with_extension("csv"))
    }

    pub fn timing_path(&self) -> Option<PathBuf> {
        self.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".timing.json");
            PathBuf::from(s)
        })
    }

    /// Writes the envelope, the CSV rows (if any) and the timing sidecar.
    pub fn emit<C: Serialize, R: Serialize, Row: Serialize>(
        &self,
        manifest: &Manifest<C>,
        report: &R,
        rows: &[Row],
        mut timing: Timing,
    ) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(&Envelope { manifest, report })
            .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
        text.push('\n');
        let Some(out) = &self.out else {
            print!("{text}");
            return Ok(());
        };
        write_file(out, text.as_bytes())?;
        if let Some(csv_path) = self.csv_path() {
            if !rows.is_empty() {
                write_file(&csv_path, &csv_bytes(rows)?)?;
            }
        }
        timing.command = manifest.command;
        timing.wall_seconds = self.started.elapsed().as_secs_f64();
        let mut sidecar = serde_json::to_string_pretty(&timing).expect("timing serializes");
        sidecar.push('\n');
        write_file(&self.timing_path().expect("out is set"), sidecar.as_bytes())
    }
}

pub fn csv_bytes<Row: Serialize>(rows: &[Row]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv row: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        label: &'static str,
    }

    #[test]
    fn csv_has_a_header_row() {
        let bytes = csv_bytes(&[Row { x: 0.5, label: "a" }, Row { x: -1e-20, label: "b" }]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "x,label\n0.5,a\n-1e-20,b\n");
    }

    #[test]
    fn companion_paths() {
        let sink = Sink::new(Some(PathBuf::from("out/run.json")));
        assert_eq!(sink.csv_path().unwrap(), PathBuf::from("out/run.csv"));
        assert_eq!(sink.timing_path().unwrap(), PathBuf::from("out/run.json.timing.json"));
        assert!(Sink::new(None).csv_path().is_none());
    }
}
