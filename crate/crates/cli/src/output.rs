//! Atomic file output and the CSV layouts shared by the commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use foliflow_core::csf::CurveFamily;
use foliflow_core::{wrap_angle, AngleField};
use serde::Serialize;

use crate::error::CliError;

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Collects the files a command writes into one output directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn new(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root)?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.root.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: Table) -> Result<(), CliError> {
        let bytes = table.finish()?;
        self.write(name, &bytes)
    }

    /// `manifest.json`: the only output that carries a timestamp.
    pub fn write_manifest<T: Serialize>(&mut self, command: &str, details: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            command: &'a str,
            version: &'a str,
            created_unix: u64,
            files: &'a [String],
            details: &'a T,
        }
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let files = self.written.clone();
        self.write_json(
            "manifest.json",
            &Manifest {
                command,
                version: env!("CARGO_PKG_VERSION"),
                created_unix,
                files: &files,
                details,
            },
        )
    }
}

/// In-memory CSV with a fixed header.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        Ok(Self { w })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.w.write_record(fields).map_err(csv_err)
    }

    pub fn finish(self) -> Result<Vec<u8>, CliError> {
        self.w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Shortest round-tripping decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `x,y,theta` per node, row-major from the lower-left corner; optional
/// `covered` column.
pub fn field_table(field: &AngleField, mask: Option<&[bool]>) -> Result<Table, CliError> {
    let g = field.grid();
    let mut t = Table::new(if mask.is_some() { &["x", "y", "theta", "covered"] } else { &["x", "y", "theta"] })?;
    for (i, j) in g.nodes() {
        let p = g.node(i, j);
        let k = g.index(i, j);
        let mut row = vec![num(p.x), num(p.y), num(wrap_angle(field.values()[k]))];
        if let Some(m) = mask {
            row.push(if m[k] { "1".into() } else { "0".into() });
        }
        t.row(&row)?;
    }
    Ok(t)
}

/// `t,leaf,closed,x,y` for every sample of every snapshot.
pub fn curves_table<'a>(snapshots: impl IntoIterator<Item = &'a CurveFamily>) -> Result<Table, CliError> {
    let mut t = Table::new(&["t", "leaf", "closed", "x", "y"])?;
    for fam in snapshots {
        for (c, label) in fam.curves.iter().zip(&fam.labels) {
            let closed = if c.curve().is_closed() { "1" } else { "0" };
            for p in c.curve().points() {
                t.row(&[num(fam.time), label.to_string(), closed.into(), num(p.x), num(p.y)])?;
            }
        }
    }
    Ok(t)
}
