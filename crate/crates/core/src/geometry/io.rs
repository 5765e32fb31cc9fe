//! Chart and field persistence: a CSV matrix (row = s index, column = θ index)
//! with a JSON sidecar header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chart::{ConformalChart, ScalarField, Topology};
use crate::{Error, Result};

/// Sidecar header describing the grid a CSV matrix lives on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartHeader {
    pub topology: Topology,
    pub n_s: usize,
    pub n_theta: usize,
    pub h_s: f64,
    pub h_theta: f64,
    #[serde(default)]
    pub s0: f64,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub reference_curvature: f64,
    /// Name of the stored quantity (`phi0` for a chart).
    #[serde(default = "default_field")]
    pub field: String,
}

fn default_field() -> String {
    "phi0".into()
}

impl ChartHeader {
    pub fn of(chart: &ConformalChart, field: &str) -> Self {
        Self {
            topology: chart.topology,
            n_s: chart.n_s,
            n_theta: chart.n_theta,
            h_s: chart.h_s,
            h_theta: chart.h_theta,
            s0: chart.s0,
            theta0: chart.theta0,
            reference_curvature: chart.reference_curvature,
            field: field.into(),
        }
    }
}

/// Formats a float with 17 significant digits (round-trip exact).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

fn write_matrix(path: &Path, n_s: usize, n_theta: usize, values: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?));
    let mut row = Vec::with_capacity(n_theta);
    for i in 0..n_s {
        row.clear();
        row.extend(values[i * n_theta..(i + 1) * n_theta].iter().map(|v| format_float(*v)));
        w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix(path: &Path, n_s: usize, n_theta: usize) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(n_s * n_theta);
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.len() != n_theta {
            return Err(Error::Format(format!("row with {} columns, expected {n_theta}", rec.len())));
        }
        for cell in rec.iter() {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {cell:?}: {e}")))?,
            );
        }
    }
    if values.len() != n_s * n_theta {
        return Err(Error::Format(format!(
            "matrix has {} values, expected {}",
            values.len(),
            n_s * n_theta
        )));
    }
    Ok(values)
}

fn write_header(path: &Path, header: &ChartHeader) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, header).map_err(|e| Error::Format(e.to_string()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn read_header(path: &Path) -> Result<ChartHeader> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes `<stem>.csv` (phi0) and `<stem>.json`; returns both paths.
pub fn write_chart(stem: &Path, chart: &ConformalChart) -> Result<Vec<PathBuf>> {
    write_matrix_with_header(stem, chart, "phi0", &chart.phi0)
}

/// Writes a field on `chart` as `<stem>.csv` plus `<stem>.json`.
pub fn write_field(stem: &Path, chart: &ConformalChart, name: &str, field: &ScalarField) -> Result<Vec<PathBuf>> {
    field.check_aligned(chart)?;
    write_matrix_with_header(stem, chart, name, &field.values)
}

fn write_matrix_with_header(stem: &Path, chart: &ConformalChart, name: &str, values: &[f64]) -> Result<Vec<PathBuf>> {
    let csv = with_ext(stem, "csv");
    let json = with_ext(stem, "json");
    write_matrix(&csv, chart.n_s, chart.n_theta, values)?;
    write_header(&json, &ChartHeader::of(chart, name))?;
    Ok(vec![csv, json])
}

/// Reads a chart from its JSON header; the matrix is the `.csv` next to it.
pub fn read_chart(header_path: &Path) -> Result<ConformalChart> {
    let (header, values) = read_any(header_path)?;
    let chart = ConformalChart::new(
        header.topology,
        header.n_s,
        header.n_theta,
        header.h_s,
        header.h_theta,
        values,
    )?
    .with_origin(header.s0, header.theta0)
    .with_reference_curvature(header.reference_curvature)?;
    Ok(chart)
}

/// Reads a field and its header.
pub fn read_field(header_path: &Path) -> Result<(ChartHeader, ScalarField)> {
    let (header, values) = read_any(header_path)?;
    let field = ScalarField::new(header.n_s, header.n_theta, values)?;
    Ok((header, field))
}

fn read_any(header_path: &Path) -> Result<(ChartHeader, Vec<f64>)> {
    let header = read_header(header_path)?;
    let csv = header_path.with_extension("csv");
    let values = read_matrix(&csv, header.n_s, header.n_theta)?;
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut chart = ConformalChart::flat(Topology::Strip, 5, 4, 0.1, 0.25)
            .unwrap()
            .with_origin(-0.3, 0.0);
        for (k, v) in chart.phi0.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin() / 3.0;
        }
        let stem = dir.path().join("chart");
        let paths = write_chart(&stem, &chart).unwrap();
        assert_eq!(paths.len(), 2);
        let back = read_chart(&paths[1]).unwrap();
        assert_eq!(back, chart);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn malformed_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let chart = ConformalChart::flat(Topology::Torus, 4, 4, 0.1, 0.1).unwrap();
        let stem = dir.path().join("c");
        let paths = write_chart(&stem, &chart).unwrap();
        std::fs::write(&paths[0], "1,2,3\n").unwrap();
        assert!(read_chart(&paths[1]).is_err());
    }
}
