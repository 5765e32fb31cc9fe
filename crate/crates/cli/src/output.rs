//! Run directories: file inventory, event log and the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use ricci_core::geometry::io::format_float;

use crate::{LabError, LabResult};

pub const MANIFEST: &str = "manifest.json";
pub const EVENTS: &str = "events.jsonl";
pub const SCENARIO: &str = "scenario.cfg";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut h = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    /// Canonical scenario text; `scenario.cfg` holds the same bytes.
    pub scenario: String,
    pub scenario_sha256: String,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_seconds: f64,
    /// External input files (custom charts) with their hashes.
    pub inputs: Vec<ManifestFile>,
    /// Every file in the directory except the manifest itself.
    pub files: Vec<ManifestFile>,
    pub metrics: Map<String, Value>,
    pub checks: BTreeMap<String, bool>,
    pub all_checks_pass: bool,
}

impl Manifest {
    pub fn read(dir: &Path) -> LabResult<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| LabError::Incomplete(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LabError::Incomplete(format!("{}: {e}", path.display())))
    }

    /// A metric as a float; `None` when missing or null.
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(Value::as_f64)
    }

    pub fn check(&self, key: &str) -> Option<bool> {
        self.checks.get(key).copied()
    }

    pub fn file(&self, path: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.path == path)
    }
}

pub fn code_version() -> String {
    format!("ricci-lab {} (ricci-core {})", env!("CARGO_PKG_VERSION"), ricci_core::VERSION)
}

/// Creates `<out>/<name>-<UTC timestamp>`, adding a counter on collision.
pub fn fresh_run_dir(out: &Path, name: &str) -> LabResult<PathBuf> {
    std::fs::create_dir_all(out)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{name}-{stamp}");
    for k in 0..1000 {
        let dir = if k == 0 { out.join(&base) } else { out.join(format!("{base}-{k}")) };
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(LabError::Failure(format!("no free run directory name for {base}")))
}

/// Append-only JSON-lines log. Events carry a sequence number but no wall
/// time, so identical runs produce identical logs.
pub struct EventLog {
    out: BufWriter<File>,
    seq: u64,
}

impl EventLog {
    fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            seq: 0,
        })
    }

    pub fn emit(&mut self, event: &str, fields: Value) -> std::io::Result<()> {
        let mut obj = Map::new();
        obj.insert("seq".into(), json!(self.seq));
        obj.insert("event".into(), json!(event));
        if let Value::Object(extra) = fields {
            obj.extend(extra);
        }
        self.seq += 1;
        writeln!(self.out, "{}", Value::Object(obj))?;
        self.out.flush()
    }
}

/// Headline metrics and pass/fail checks collected during a run.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub metrics: Map<String, Value>,
    pub checks: BTreeMap<String, bool>,
}

/// JSON number, or null when not finite.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

impl Report {
    pub fn num(&mut self, key: &str, x: f64) {
        self.metrics.insert(key.into(), number(x));
    }

    pub fn opt(&mut self, key: &str, x: Option<f64>) {
        self.metrics.insert(key.into(), x.map_or(Value::Null, number));
    }

    pub fn set(&mut self, key: &str, v: Value) {
        self.metrics.insert(key.into(), v);
    }

    pub fn check(&mut self, key: &str, pass: bool) {
        self.checks.insert(key.into(), pass);
    }
}

/// An open run directory. Every file written through it is inventoried.
pub struct RunDir {
    root: PathBuf,
    files: BTreeSet<String>,
    pub events: EventLog,
}

impl RunDir {
    pub fn open(root: &Path) -> LabResult<Self> {
        let events = EventLog::create(&root.join(EVENTS))?;
        let mut files = BTreeSet::new();
        files.insert(EVENTS.to_string());
        Ok(Self {
            root: root.to_path_buf(),
            files,
            events,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of `name` inside the directory, registered in the inventory.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.insert(name.to_string());
        self.root.join(name)
    }

    /// Registers files written by a library routine under their own names.
    pub fn adopt(&mut self, paths: &[PathBuf]) -> LabResult<()> {
        for p in paths {
            let rel = p
                .strip_prefix(&self.root)
                .map_err(|_| LabError::Failure(format!("{} is outside the run directory", p.display())))?;
            self.files.insert(rel.to_string_lossy().into_owned());
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> LabResult<()> {
        std::fs::write(self.file(name), text)?;
        Ok(())
    }

    /// RFC-4180 CSV with LF line endings.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> LabResult<()> {
        let path = self.file(name);
        write_csv(&path, header, rows)
    }

    pub fn emit(&mut self, event: &str, fields: Value) -> LabResult<()> {
        self.events.emit(event, fields)?;
        Ok(())
    }

    /// Hashes the inventory and writes the manifest (atomically, last).
    pub fn finish(self, mut manifest: Manifest) -> LabResult<Manifest> {
        drop(self.events);
        let mut files = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let p = self.root.join(rel);
            let bytes = std::fs::metadata(&p)?.len();
            files.push(ManifestFile {
                path: rel.clone(),
                sha256: sha256_file(&p)?,
                bytes,
            });
        }
        manifest.files = files;
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Failure(e.to_string()))? + "\n";
        let tmp = self.root.join(".manifest.json.partial");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, self.root.join(MANIFEST))?;
        Ok(manifest)
    }
}

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format_float(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::I(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::S(b.to_string())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> LabResult<()> {
    let file = File::create(path)?;
    write_csv_to(file, header, rows)
}

pub fn write_csv_to<W: Write>(sink: W, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> LabResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(sink));
    let fail = |e: csv::Error| {
        if !e.is_io_error() {
            return LabError::Failure(format!("csv: {e}"));
        }
        match e.into_kind() {
            csv::ErrorKind::Io(io) => LabError::Io(io),
            _ => unreachable!("checked above"),
        }
    };
    w.write_record(header).map_err(fail)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(LabError::Failure(format!("csv row has {} fields, header {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV with a header into named float columns. Non-numeric fields
/// become NaN.
pub fn read_columns(path: &Path) -> LabResult<BTreeMap<String, Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LabError::Incomplete(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| LabError::Incomplete(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec.map_err(|e| LabError::Incomplete(e.to_string()))?;
        for (h, v) in headers.iter().zip(rec.iter()) {
            cols.get_mut(h).expect("header").push(v.trim().parse().unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_rfc4180_with_lf() {
        let mut buf = Vec::new();
        write_csv_to(
            &mut buf,
            &["a", "b"],
            vec![vec![Cell::F(0.1), Cell::S("x,y".into())], vec![Cell::I(3), Cell::S("q\"r".into())]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000001e-1,\"x,y\"\n3,\"q\"\"r\"\n");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn numbers_and_hashes() {
        assert_eq!(number(f64::INFINITY), Value::Null);
        assert_eq!(number(1.5), json!(1.5));
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_is_written_last_and_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rd = RunDir::open(dir.path()).unwrap();
        rd.emit("start", json!({"k": 1})).unwrap();
        rd.write_text("a.txt", "hello").unwrap();
        assert!(!dir.path().join(MANIFEST).exists());
        let m = Manifest {
            name: "t".into(),
            kind: "flow".into(),
            scenario: String::new(),
            scenario_sha256: String::new(),
            code_version: code_version(),
            started_at: String::new(),
            finished_at: String::new(),
            elapsed_seconds: 0.0,
            inputs: vec![],
            files: vec![],
            metrics: Map::new(),
            checks: BTreeMap::new(),
            all_checks_pass: true,
        };
        let m = rd.finish(m).unwrap();
        assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["a.txt", "events.jsonl"]);
        assert_eq!(m.file("a.txt").unwrap().sha256, sha256_hex(b"hello"));
        assert_eq!(Manifest::read(dir.path()).unwrap(), m);
        let log = std::fs::read_to_string(dir.path().join(EVENTS)).unwrap();
        assert_eq!(log, "{\"event\":\"start\",\"k\":1,\"seq\":0}\n");
    }
}
