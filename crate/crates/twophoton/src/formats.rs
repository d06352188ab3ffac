//! CSV and JSON file formats. Every writer has a matching reader, and floats
//! are written in shortest round-trip form so files parse back exactly.

use serde::{Deserialize, Serialize};
use twophoton_core::bench::ScanPoint;
use twophoton_core::qmath::CMatrix;
use twophoton_core::slm::PhaseMask;
use twophoton_core::spdc::BiphotonGrid;
use twophoton_core::tomo::{TomoData, TomoProtocol};
use twophoton_core::Complex64;

use crate::error::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(runtime)?;
    String::from_utf8(bytes).map_err(runtime)
}

/// Data row number (1-based, header excluded) for error messages.
fn row_of(e: &csv::Error, fallback: usize) -> usize {
    e.position().map(|p| p.record() as usize).unwrap_or(fallback)
}

fn parse_error(what: &str, row: usize, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{what} row {row}: {e}"))
}

// Density matrices.

pub fn density_csv(m: &CMatrix) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = m.nrows();
    let header: Vec<String> = (0..n).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    w.write_record(&header).map_err(runtime)?;
    for i in 0..n {
        let row: Vec<String> = (0..n).flat_map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()]).collect();
        w.write_record(&row).map_err(runtime)?;
    }
    finish(w)
}

pub fn parse_density_csv(text: &str) -> Result<CMatrix, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_error("density", row_of(&e, k + 1), e))?;
        if rec.len() % 2 != 0 {
            return Err(parse_error("density", k + 1, "odd number of columns"));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_error("density", k + 1, e))?;
        rows.push(vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect());
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("density CSV is not a square matrix".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub dim: usize,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

impl DensityJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let entries = (0..n).flat_map(|i| (0..n).map(move |j| [m[(i, j)].re, m[(i, j)].im])).collect();
        DensityJson { dim: n, entries }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        if self.entries.len() != self.dim * self.dim {
            return Err(CliError::Config(format!("{} entries for dimension {}", self.entries.len(), self.dim)));
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let [re, im] = self.entries[i * self.dim + j];
            Complex64::new(re, im)
        }))
    }
}

// Masks.

#[derive(Debug, Serialize, Deserialize)]
struct MaskRow {
    pixel: usize,
    signal_phase: f64,
    idler_phase: f64,
}

pub fn mask_csv(mask: &PhaseMask) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (pixel, (&s, &i)) in mask.signal_phases().iter().zip(mask.idler_phases()).enumerate() {
        w.serialize(MaskRow { pixel, signal_phase: s, idler_phase: i }).map_err(runtime)?;
    }
    finish(w)
}

pub fn parse_mask_csv(text: &str) -> Result<PhaseMask, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let (mut sig, mut idl) = (Vec::new(), Vec::new());
    for (k, row) in r.deserialize::<MaskRow>().enumerate() {
        let row = row.map_err(|e| parse_error("mask", row_of(&e, k + 1), e))?;
        if row.pixel != k {
            return Err(parse_error("mask", k + 1, format!("expected pixel {k}, found {}", row.pixel)));
        }
        sig.push(row.signal_phase);
        idl.push(row.idler_phase);
    }
    Ok(PhaseMask::from_tables(sig, idl)?)
}

// Scans.

#[derive(Debug, Serialize, Deserialize)]
struct ScanRow {
    parameter: f64,
    analytic_rate: f64,
    sampled_counts: u64,
    window: f64,
}

pub fn scan_csv(points: &[ScanPoint]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(ScanRow { parameter: p.value, analytic_rate: p.rate, sampled_counts: p.counts, window: p.window_s })
            .map_err(runtime)?;
    }
    finish(w)
}

pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanPoint>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<ScanRow>()
        .enumerate()
        .map(|(k, row)| {
            let row = row.map_err(|e| parse_error("scan", row_of(&e, k + 1), e))?;
            Ok(ScanPoint { value: row.parameter, rate: row.analytic_rate, counts: row.sampled_counts, window_s: row.window })
        })
        .collect()
}

// Tomography counts.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRow {
    pub setting: String,
    pub counts: u64,
    pub window: f64,
}

pub fn counts_csv(rows: &[CountsRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(runtime)?;
    }
    finish(w)
}

pub fn parse_counts_csv(text: &str) -> Result<Vec<CountsRow>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, row) in r.deserialize::<CountsRow>().enumerate() {
        let row = row.map_err(|e| parse_error("counts", row_of(&e, k + 1), e))?;
        if !(row.window.is_finite() && row.window > 0.0) {
            return Err(parse_error("counts", k + 1, "window must be positive"));
        }
        out.push(row);
    }
    Ok(out)
}

/// Put count rows into protocol order, one row per setting.
pub fn align_counts(protocol: &TomoProtocol, rows: &[CountsRow]) -> Result<TomoData, CliError> {
    let mut counts = vec![None; protocol.len()];
    for (k, row) in rows.iter().enumerate() {
        let idx = protocol
            .index_of(row.setting.trim())
            .ok_or_else(|| parse_error("counts", k + 1, format!("setting '{}' is not in the protocol", row.setting)))?;
        if counts[idx].is_some() {
            return Err(parse_error("counts", k + 1, format!("setting '{}' repeated", row.setting)));
        }
        counts[idx] = Some((row.counts, row.window));
    }
    let mut c = Vec::with_capacity(counts.len());
    let mut w = Vec::with_capacity(counts.len());
    for (label, entry) in protocol.labels().iter().zip(counts) {
        let (n, t) = entry.ok_or_else(|| CliError::Config(format!("counts file lacks setting '{label}'")))?;
        c.push(n);
        w.push(t);
    }
    Ok(TomoData::new(c, w)?)
}

// Grid dump.

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    theta: f64,
    omega_s: f64,
    omega_p: f64,
    weight: f64,
    density: f64,
}

pub fn grid_csv(g: &BiphotonGrid) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, &theta) in g.theta_nodes().iter().enumerate() {
        for j in 0..g.n_omega_s() {
            for (k, &omega_p) in g.omega_p_nodes().iter().enumerate() {
                w.serialize(GridRow {
                    theta,
                    omega_s: g.omega_s(i, j),
                    omega_p,
                    weight: g.weight(i, j, k),
                    density: g.density(i, j, k),
                })
                .map_err(runtime)?;
            }
        }
    }
    finish(w)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}
