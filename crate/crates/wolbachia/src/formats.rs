//! CSV and JSON renderings, atomic file output and metadata sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wolbachia_core::linalg::Spectrum;
use wolbachia_core::{Classification, EquilibriumStability, ModelParameters};

use crate::analysis::{
    EquilibriaReport, ImpulsiveReport, MinReleaseRow, PlanRow, Point, SeparatrixReport,
    Tolerances, TrajectoryReport,
};
use crate::error::{AppError, AppResult};
use crate::params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

fn csv_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| AppError::Numerical(e.to_string()))?;
    }
    w.into_inner().map_err(|e| AppError::Numerical(e.to_string()))
}

// csv writes no header for an empty table; emit it by hand.
fn csv_or_header<T: Serialize>(rows: &[T], header: &str) -> AppResult<Vec<u8>> {
    if rows.is_empty() {
        Ok(format!("{header}\n").into_bytes())
    } else {
        csv_rows(rows)
    }
}

/// Anything the CLI can write in either format.
pub trait Render {
    fn render(&self, format: Format) -> AppResult<Vec<u8>>;
}

#[derive(Serialize)]
struct EquilibriumRow {
    name: &'static str,
    n: f64,
    w: f64,
    classification: Classification,
    spectrum: &'static str,
    /// Larger eigenvalue, or the real part of a complex pair.
    eig_1: Option<f64>,
    /// Smaller eigenvalue, or the imaginary part of a complex pair.
    eig_2: Option<f64>,
}

fn equilibrium_row(name: &'static str, s: &EquilibriumStability) -> EquilibriumRow {
    let (spectrum, eig_1, eig_2) = match s.eigenvalues {
        None => ("none", None, None),
        Some(Spectrum::Real { hi, lo }) => ("real", Some(hi), Some(lo)),
        Some(Spectrum::Complex { re, im }) => ("complex", Some(re), Some(im)),
    };
    EquilibriumRow {
        name,
        n: s.state.n,
        w: s.state.w,
        classification: s.classification,
        spectrum,
        eig_1,
        eig_2,
    }
}

impl Render for EquilibriaReport {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => {
                let st = &self.stability;
                let mut rows =
                    vec![equilibrium_row("e0", &st.e0), equilibrium_row("e_n", &st.e_n), equilibrium_row("e_w", &st.e_w)];
                if let Some(c) = &st.e_c {
                    rows.push(equilibrium_row("e_c", c));
                }
                csv_rows(rows)
            }
        }
    }
}

impl Render for TrajectoryReport {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => csv_or_header(&self.samples, "t,N,W"),
        }
    }
}

impl Render for SeparatrixReport {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => csv_or_header(&self.points, "n,w"),
        }
    }
}

impl Render for Vec<MinReleaseRow> {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => csv_or_header(self, "lambda,n0,w0_hat,w0_hat_frac"),
        }
    }
}

impl Render for Vec<PlanRow> {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => csv_or_header(
                self,
                "lambda,lambda_hat_frac,tau,releases,n0,lambda_hat,total_released,total_frac,duration_days,budget,error",
            ),
        }
    }
}

impl Render for ImpulsiveReport {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => {
                let points: Vec<Point> = self
                    .trajectory
                    .segments
                    .iter()
                    .flat_map(|seg| seg.samples.iter().copied().map(Point::from))
                    .collect();
                csv_or_header(&points, "t,N,W")
            }
        }
    }
}

/// Reproducibility record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub format: Format,
    pub params: ModelParameters,
    pub params_hash: String,
    pub tolerances: &'a Tolerances,
    pub version: &'static str,
}

impl<'a> Metadata<'a> {
    pub fn new(command: &'a str, format: Format, p: &ModelParameters, tolerances: &'a Tolerances) -> Self {
        Metadata {
            command,
            format,
            params: *p,
            params_hash: params::hash(p),
            tolerances,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| AppError::Input(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| AppError::Input(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
