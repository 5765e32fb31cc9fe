//! Long-format plot data (`series,x,y`) derived from a finished run.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::output::{read_columns, write_csv_to, Cell, Manifest};
use crate::{LabError, LabResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `ln sup|R+1|` against time.
    Decay,
    /// `ln residual` against `ln r` with the fitted line, per order.
    ResidualOrder,
    /// Green's function and its radial oracle against distance.
    Green,
}

impl FromStr for PlotKind {
    type Err = LabError;
    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "decay" => Ok(Self::Decay),
            "residual_order" => Ok(Self::ResidualOrder),
            "green" => Ok(Self::Green),
            other => Err(LabError::Validation(format!(
                "unknown plot kind {other:?} (expected decay, residual_order or green)"
            ))),
        }
    }
}

type Row = (String, f64, f64);

fn column<'a>(cols: &'a std::collections::BTreeMap<String, Vec<f64>>, name: &str, file: &str) -> LabResult<&'a [f64]> {
    cols.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| LabError::Incomplete(format!("{file} has no {name} column")))
}

fn needs(manifest: &Manifest, file: &str) -> LabResult<()> {
    manifest
        .file(file)
        .map(|_| ())
        .ok_or_else(|| LabError::Validation(format!("run {:?} ({}) has no {file}", manifest.name, manifest.kind)))
}

fn decay(dir: &Path, m: &Manifest) -> LabResult<Vec<Row>> {
    const FILE: &str = "diagnostics.csv";
    needs(m, FILE)?;
    let cols = read_columns(&dir.join(FILE))?;
    let (t, sup) = (column(&cols, "t", FILE)?, column(&cols, "sup_R_plus_1", FILE)?);
    Ok(t.iter()
        .zip(sup)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| ("log_sup_R_plus_1".to_string(), *t, v.ln()))
        .collect())
}

fn residual_order(dir: &Path, m: &Manifest) -> LabResult<Vec<Row>> {
    let mut orders: Vec<usize> = m
        .files
        .iter()
        .filter_map(|f| f.path.strip_prefix("residual_order_N")?.strip_suffix(".csv")?.parse().ok())
        .collect();
    if orders.is_empty() {
        return Err(LabError::Validation(format!("run {:?} ({}) has no residual profiles", m.name, m.kind)));
    }
    orders.sort_unstable();
    let mut rows = Vec::new();
    for n in orders {
        let file = format!("residual_order_N{n}.csv");
        let cols = read_columns(&dir.join(&file))?;
        let pts: Vec<(f64, f64)> = column(&cols, "r", &file)?
            .iter()
            .zip(column(&cols, "residual", &file)?)
            .filter(|(r, v)| **r > 0.0 && **v > 0.0)
            .map(|(r, v)| (r.ln(), v.ln()))
            .collect();
        rows.extend(pts.iter().map(|(x, y)| (format!("residual_N{n}"), *x, *y)));
        if let (Some(a), Some(b)) = (m.metric(&format!("N{n}_slope")), m.metric(&format!("N{n}_intercept"))) {
            rows.extend(pts.iter().map(|(x, _)| (format!("fit_N{n}"), *x, b + a * x)));
        }
    }
    Ok(rows)
}

fn green(dir: &Path, m: &Manifest) -> LabResult<Vec<Row>> {
    const FILE: &str = "green_profile.csv";
    needs(m, FILE)?;
    let cols = read_columns(&dir.join(FILE))?;
    let d = column(&cols, "distance", FILE)?;
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|a, b| d[*a].total_cmp(&d[*b]));
    let mut rows = Vec::with_capacity(2 * d.len());
    for (series, name) in [("G", "G"), ("oracle_G", "oracle_G")] {
        let y = column(&cols, name, FILE)?;
        rows.extend(idx.iter().map(|&i| (series.to_string(), d[i], y[i])));
    }
    Ok(rows)
}

/// Writes the plot data of `kind` for the run in `dir` to `sink`.
pub fn emit_plotdata<W: Write>(dir: &Path, kind: PlotKind, sink: W) -> LabResult<()> {
    let m = Manifest::read(dir)?;
    let rows = match kind {
        PlotKind::Decay => decay(dir, &m)?,
        PlotKind::ResidualOrder => residual_order(dir, &m)?,
        PlotKind::Green => green(dir, &m)?,
    };
    write_csv_to(
        sink,
        &["series", "x", "y"],
        rows.into_iter().map(|(s, x, y)| vec![Cell::S(s), Cell::F(x), Cell::F(y)]),
    )
}
