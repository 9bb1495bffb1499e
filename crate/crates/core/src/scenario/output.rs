//! Snapshot files and manifest checks.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where one field sits inside a snapshot's `.f64` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSlot {
    pub name: String,
    /// Offset and length in f64 values.
    pub offset: usize,
    pub len: usize,
    pub shape: Vec<usize>,
    /// Axis names, slowest first.
    pub axes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub index: usize,
    pub t: f64,
    /// Little-endian f64 data file, next to this one.
    pub data: String,
    pub fields: Vec<FieldSlot>,
}

pub(crate) struct SnapshotField<'a> {
    pub name: &'a str,
    pub shape: Vec<usize>,
    pub axes: &'a [&'a str],
    pub values: &'a [f64],
}

/// Write `snapshots/NNNN.{json,f64}` and return both paths relative to `out`.
pub(crate) fn write_snapshot(out: &Path, index: usize, t: f64, fields: &[SnapshotField]) -> Result<[String; 2]> {
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir)?;
    let stem = format!("{index:04}");
    let mut bytes = Vec::new();
    let mut slots = Vec::new();
    let mut offset = 0;
    for f in fields {
        for v in f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        slots.push(FieldSlot {
            name: f.name.to_string(),
            offset,
            len: f.values.len(),
            shape: f.shape.clone(),
            axes: f.axes.iter().map(|s| s.to_string()).collect(),
        });
        offset += f.values.len();
    }
    fs::write(dir.join(format!("{stem}.f64")), &bytes)?;
    let meta = SnapshotMeta {
        index,
        t,
        data: format!("{stem}.f64"),
        fields: slots,
    };
    let mut w = fs::File::create(dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    w.write_all(b"\n")?;
    Ok([format!("snapshots/{stem}.json"), format!("snapshots/{stem}.f64")])
}

pub fn read_report(dir: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}

fn bad(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("manifest entry {path}: {msg}"))
}

/// Every manifest entry must exist and parse: JSON as JSON, CSV with a
/// consistent column count, `.f64` sized as its metadata says.
pub fn check_manifest(dir: &Path, manifest: &[String]) -> Result<()> {
    for rel in manifest {
        let path = dir.join(rel);
        if !path.is_file() {
            return Err(bad(rel, "missing"));
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let text = fs::read_to_string(&path)?;
                serde_json::from_str::<serde_json::Value>(&text).map_err(|e| bad(rel, e))?;
            }
            Some("csv") => {
                let text = fs::read_to_string(&path)?;
                let mut lines = text.lines();
                let width = lines.next().ok_or_else(|| bad(rel, "empty"))?.split(',').count();
                if let Some((i, _)) = lines.enumerate().find(|(_, l)| l.split(',').count() != width) {
                    return Err(bad(rel, format!("row {} has the wrong width", i + 1)));
                }
            }
            Some("f64") => {
                let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)
                    .map_err(|e| bad(rel, e))?;
                let expected: usize = meta.fields.iter().map(|f| f.len).sum();
                let len = fs::metadata(&path)?.len() as usize;
                if len != 8 * expected {
                    return Err(bad(rel, format!("{len} bytes, metadata says {}", 8 * expected)));
                }
            }
            _ => {}
        }
    }
    Ok(())
}
