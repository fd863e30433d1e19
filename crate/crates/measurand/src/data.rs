//! Domain records, configuration, and file ingestion.
//!
//! Measurement data arrive as CSV with the header `set,z_nm,value`; theory
//! curves as CSV with the header `z_nm,value`. Lines starting with `#` are
//! comments and are skipped, except `# unit: <u>` which is checked against
//! the declared unit. The experiment configuration is a JSON document; the
//! exact key names are documented in the repository README.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composition::{CoefficientTables, Regime, SystematicSource};
use crate::error::{Error, Result};

/// What the experiment measures. Determines the default separation-error
/// exponent of the theory budget (4 for pressure, 3 for force).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityKind {
    Pressure,
    Force,
}

impl Default for QuantityKind {
    fn default() -> Self {
        QuantityKind::Pressure
    }
}

/// Unit/kind declaration accompanying a set of measurement files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementMeta {
    #[serde(rename = "quantity")]
    pub kind: QuantityKind,
    /// Unit of the measured values, e.g. "mPa" or "pN".
    pub unit: String,
    /// Absolute error of the separation measurement, nm. Also fixes the
    /// subinterval width (2 Δz) used for binning.
    pub delta_z_nm: f64,
}

/// One measured point: set index, separation, value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub set: u32,
    pub z_nm: f64,
    pub value: f64,
}

/// All records of one experiment plus metadata.
#[derive(Debug, Clone)]
pub struct MeasurementCollection {
    pub kind: QuantityKind,
    pub unit: String,
    pub delta_z_nm: f64,
    pub records: Vec<MeasurementRecord>,
    /// (min, max) of the observed separations, nm.
    pub z_range: (f64, f64),
    /// Number of distinct measurement sets.
    pub n_sets: u32,
}

impl MeasurementCollection {
    /// Builds a collection and checks its invariants: records nonempty and
    /// finite, delta_z positive, at least one set.
    pub fn new(meta: &MeasurementMeta, records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no measurement records".into()));
        }
        if !(meta.delta_z_nm > 0.0) || !meta.delta_z_nm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "delta_z_nm must be positive and finite, got {}",
                meta.delta_z_nm
            )));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sets = BTreeSet::new();
        for r in &records {
            if !r.z_nm.is_finite() || !r.value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite record (set {}, z {} nm, value {})",
                    r.set, r.z_nm, r.value
                )));
            }
            lo = lo.min(r.z_nm);
            hi = hi.max(r.z_nm);
            sets.insert(r.set);
        }
        Ok(MeasurementCollection {
            kind: meta.kind,
            unit: meta.unit.clone(),
            delta_z_nm: meta.delta_z_nm,
            records,
            z_range: (lo, hi),
            n_sets: sets.len() as u32,
        })
    }
}

const MEASUREMENT_HEADER: &str = "set,z_nm,value";
const THEORY_HEADER: &str = "z_nm,value";

/// Loads and merges measurement CSV files.
///
/// Set indices are renumbered densely in (file order, then set order), so
/// two files that both declare set 1 end up as distinct sets.
pub fn load_measurement_sets<P: AsRef<Path>>(
    paths: &[P],
    meta: &MeasurementMeta,
) -> Result<MeasurementCollection> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no measurement files given".into()));
    }
    let mut records = Vec::new();
    let mut offset: u32 = 0;
    for path in paths {
        let path = path.as_ref();
        let (rows, n_local) = parse_measurement_file(path, meta)?;
        for (local_rank, z, value) in rows {
            records.push(MeasurementRecord {
                set: offset + local_rank,
                z_nm: z,
                value,
            });
        }
        offset += n_local;
    }
    MeasurementCollection::new(meta, records)
}

/// Parses one measurement file into (dense local set rank, z, value) rows.
fn parse_measurement_file(
    path: &Path,
    meta: &MeasurementMeta,
) -> Result<(Vec<(u32, f64, f64)>, u32)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut header_seen = false;
    let mut raw: Vec<(u32, f64, f64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(unit) = comment.trim().strip_prefix("unit:") {
                let unit = unit.trim();
                if unit != meta.unit {
                    return Err(Error::UnitMismatch {
                        file: path.to_path_buf(),
                        line: lineno,
                        declared: meta.unit.clone(),
                        found: unit.to_string(),
                    });
                }
            }
            continue;
        }
        if !header_seen {
            if line != MEASUREMENT_HEADER {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line: lineno,
                    message: format!(
                        "expected header '{MEASUREMENT_HEADER}', found '{line}'"
                    ),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                file: path.to_path_buf(),
                line: lineno,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let set: u32 = fields[0].parse().map_err(|_| Error::Parse {
            file: path.to_path_buf(),
            line: lineno,
            message: format!("invalid set index '{}'", fields[0]),
        })?;
        let z: f64 = parse_number(fields[1], path, lineno, "z_nm")?;
        let value: f64 = parse_number(fields[2], path, lineno, "value")?;
        raw.push((set, z, value));
    }
    if raw.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    // dense rank of the local set indices, 1-based
    let local_sets: BTreeSet<u32> = raw.iter().map(|r| r.0).collect();
    let rank = |s: u32| local_sets.range(..=s).count() as u32;
    let rows = raw.into_iter().map(|(s, z, v)| (rank(s), z, v)).collect();
    Ok((rows, local_sets.len() as u32))
}

fn parse_number(field: &str, path: &Path, line: usize, column: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        file: path.to_path_buf(),
        line,
        message: format!("invalid number '{field}' in column {column}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line,
            message: format!("non-finite number '{field}' in column {column}"),
        });
    }
    Ok(v)
}

/// Writes a collection back to measurement CSV. Values are printed in the
/// shortest round-trip decimal form, so reloading reproduces the records
/// bit for bit.
pub fn write_measurement_csv(coll: &MeasurementCollection, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# unit: {}", coll.unit);
    let _ = writeln!(out, "{MEASUREMENT_HEADER}");
    for r in &coll.records {
        let _ = writeln!(out, "{},{},{}", r.set, r.z_nm, r.value);
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A named model's predicted values on a strictly increasing separation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub model_name: String,
    pub points: Vec<(f64, f64)>,
}

impl TheoryCurve {
    /// Sorts the points by separation and rejects duplicate abscissas.
    pub fn new(model_name: impl Into<String>, mut points: Vec<(f64, f64)>) -> Result<Self> {
        let model_name = model_name.into();
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "theory curve '{model_name}' needs at least 2 points"
            )));
        }
        for &(z, v) in &points {
            if !z.is_finite() || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite point ({z}, {v}) in theory curve '{model_name}'"
                )));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateAbscissa {
                    model: model_name,
                    z_nm: w[0].0,
                });
            }
        }
        Ok(TheoryCurve { model_name, points })
    }

    /// (first, last) grid abscissa.
    pub fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Piecewise-linear interpolation, exact at grid nodes. Refuses to
    /// extrapolate outside the grid span.
    pub fn interpolate(&self, z_nm: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        if z_nm < lo || z_nm > hi {
            return Err(Error::OutsideGrid { z_nm, lo, hi });
        }
        // first index with abscissa >= z
        let i = self.points.partition_point(|p| p.0 < z_nm);
        let (xi, vi) = self.points[i];
        if xi == z_nm {
            return Ok(vi);
        }
        let (x0, v0) = self.points[i - 1];
        Ok(v0 + (vi - v0) * (z_nm - x0) / (xi - x0))
    }
}

/// Loads one theory CSV. The model name comes from the file stem unless
/// overridden.
pub fn load_theory_curve(path: &Path, name: Option<&str>) -> Result<TheoryCurve> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let model_name = match name {
        Some(n) => n.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".to_string()),
    };
    let mut header_seen = false;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != THEORY_HEADER {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line: lineno,
                    message: format!("expected header '{THEORY_HEADER}', found '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                file: path.to_path_buf(),
                line: lineno,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let z = parse_number(fields[0], path, lineno, "z_nm")?;
        let v = parse_number(fields[1], path, lineno, "value")?;
        points.push((z, v));
    }
    TheoryCurve::new(model_name, points)
}

/// Loads several theory curves; duplicate model names are rejected.
pub fn load_theory_curves(specs: &[(PathBuf, Option<String>)]) -> Result<Vec<TheoryCurve>> {
    let mut curves: Vec<TheoryCurve> = Vec::with_capacity(specs.len());
    for (path, name) in specs {
        let curve = load_theory_curve(path, name.as_deref())?;
        if curves.iter().any(|c| c.model_name == curve.model_name) {
            return Err(Error::DuplicateModel {
                name: curve.model_name,
            });
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// How records are grouped before computing means and variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinningMode {
    /// Pointwise when all sets share one grid, subintervals otherwise.
    Auto,
    Subintervals,
    Pointwise,
}

impl Default for BinningMode {
    fn default() -> Self {
        BinningMode::Auto
    }
}

/// Experiment configuration, loaded from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measurement: MeasurementMeta,
    /// Confidence probability beta, in (0, 1).
    #[serde(default = "default_beta")]
    pub confidence_beta: f64,
    pub sphere_radius_um: f64,
    #[serde(default)]
    pub sphere_radius_error_um: f64,
    /// Smoothing window size N. Defaults to 5 on the subinterval path and
    /// 30 on the pointwise path.
    #[serde(default)]
    pub window_size: Option<usize>,
    /// Relative theory error from tabulated optical data.
    #[serde(default = "default_optical_error")]
    pub optical_data_error: f64,
    /// Overrides the leading-dependence exponent in the separation term
    /// of the theory budget.
    #[serde(default)]
    pub separation_error_exponent: Option<u32>,
    #[serde(default)]
    pub coefficients: CoefficientTables,
    #[serde(default)]
    pub systematics: Vec<SystematicSource>,
    /// Forces the random/systematic combination regime at every z. Used to
    /// reproduce published tables whose regime choice sits on a threshold.
    #[serde(default)]
    pub regime_override: Option<Regime>,
    /// Minimum number of consecutive out-of-band grid points required for
    /// an exclusion range.
    #[serde(default = "default_min_run")]
    pub min_exclusion_run: usize,
    #[serde(default)]
    pub binning: BinningMode,
}

pub(crate) fn default_beta() -> f64 {
    0.95
}

fn default_optical_error() -> f64 {
    0.005
}

fn default_min_run() -> usize {
    2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_beta > 0.0 && self.confidence_beta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence_beta must lie in (0, 1), got {}",
                self.confidence_beta
            )));
        }
        if !(self.sphere_radius_um > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sphere_radius_um must be positive, got {}",
                self.sphere_radius_um
            )));
        }
        if self.sphere_radius_error_um < 0.0 {
            return Err(Error::InvalidConfig(
                "sphere_radius_error_um must be nonnegative".into(),
            ));
        }
        if self.optical_data_error < 0.0 {
            return Err(Error::InvalidConfig(
                "optical_data_error must be nonnegative".into(),
            ));
        }
        if !(self.measurement.delta_z_nm > 0.0) {
            return Err(Error::InvalidConfig(
                "measurement.delta_z_nm must be positive".into(),
            ));
        }
        if self.window_size == Some(0) {
            return Err(Error::InvalidConfig("window_size must be >= 1".into()));
        }
        if self.min_exclusion_run == 0 {
            return Err(Error::InvalidConfig(
                "min_exclusion_run must be >= 1".into(),
            ));
        }
        self.coefficients.validate()?;
        for s in &self.systematics {
            s.validate()?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON serialization; recorded in report
    /// metadata so outputs can be traced to the exact configuration.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
