//! Field files (CSV with a JSON header line plus a little-endian binary twin),
//! JSON Lines streams and flat CSV tables.
//!
//! Binary layout: b"CLFB", u32 version, u32 header length, header JSON,
//! u64 n, then n rows of (r, re, im) as f64, all little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::grid::{RadialGrid, Spacing};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CLFB";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    /// What the samples are: "ground-state", "profile", "radiation", "checkpoint", …
    pub kind: String,
    pub d: usize,
    pub n: usize,
    pub r_max: f64,
    pub spacing: Spacing,
    /// Object-specific metadata (σ₁, b, ρ, fidelity, params, t, τ, …).
    #[serde(default)]
    pub meta: Value,
}

impl FieldHeader {
    pub fn new(kind: &str, grid: &RadialGrid, meta: Value) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: kind.to_string(),
            d: grid.d,
            n: grid.len(),
            r_max: grid.r_max,
            spacing: grid.spacing,
            meta,
        }
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.d, self.n, self.r_max, self.spacing)
    }
}

fn check_version(h: &FieldHeader) -> Result<()> {
    if h.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported field file version {}", h.version)));
    }
    Ok(())
}

pub fn write_field_csv(path: &Path, header: &FieldHeader, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", serde_json::to_string(header)?)?;
    writeln!(w, "r,re,im")?;
    for (r, z) in field.grid().nodes.iter().zip(field.samples()) {
        writeln!(w, "{r:e},{:e},{:e}", z.re, z.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_bin(path: &Path, header: &FieldHeader, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let h = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(h.len() as u32).to_le_bytes())?;
    w.write_all(&h)?;
    w.write_all(&(field.len() as u64).to_le_bytes())?;
    for (r, z) in field.grid().nodes.iter().zip(field.samples()) {
        w.write_all(&r.to_le_bytes())?;
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the grid from the header and checks the stored radii against it.
fn assemble(header: FieldHeader, radii: Vec<f64>, samples: Vec<C64>) -> Result<(FieldHeader, ComplexField)> {
    check_version(&header)?;
    if radii.len() != header.n {
        return Err(Error::Format(format!("header says {} nodes, file has {}", header.n, radii.len())));
    }
    let grid = header.grid()?;
    for (a, b) in grid.nodes.iter().zip(&radii) {
        if (a - b).abs() > 1e-12 * header.r_max {
            return Err(Error::Format(format!("stored node {b} does not match the grid ({a})")));
        }
    }
    let f = ComplexField::new(Arc::new(grid), samples)?;
    Ok((header, f))
}

pub fn read_field_csv(path: &Path) -> Result<(FieldHeader, ComplexField)> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty field file".into()))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: FieldHeader = serde_json::from_str(json)?;
    let cols = lines.next().ok_or_else(|| Error::Format("missing column line".into()))??;
    if cols.trim() != "r,re,im" {
        return Err(Error::Format(format!("unexpected columns {cols:?}")));
    }
    let mut radii = Vec::with_capacity(header.n);
    let mut samples = Vec::with_capacity(header.n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("{e}: {s:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(Error::Format(format!("expected 3 columns, got {}", v.len())));
        }
        radii.push(v[0]);
        samples.push(C64::new(v[1], v[2]));
    }
    assemble(header, radii, samples)
}

pub fn read_field_bin(path: &Path) -> Result<(FieldHeader, ComplexField)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field binary".into()));
    }
    let mut u4 = [0u8; 4];
    r.read_exact(&mut u4)?;
    let version = u32::from_le_bytes(u4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported field file version {version}")));
    }
    r.read_exact(&mut u4)?;
    let mut h = vec![0u8; u32::from_le_bytes(u4) as usize];
    r.read_exact(&mut h)?;
    let header: FieldHeader = serde_json::from_slice(&h)?;
    let mut u8b = [0u8; 8];
    r.read_exact(&mut u8b)?;
    let n = u64::from_le_bytes(u8b) as usize;
    let mut radii = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    let mut next = || -> Result<f64> {
        r.read_exact(&mut u8b)?;
        Ok(f64::from_le_bytes(u8b))
    };
    for _ in 0..n {
        let rr = next()?;
        let re = next()?;
        let im = next()?;
        radii.push(rr);
        samples.push(C64::new(re, im));
    }
    assemble(header, radii, samples)
}

/// Reads either format, chosen by extension (.bin or anything else as CSV).
pub fn read_field(path: &Path) -> Result<(FieldHeader, ComplexField)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_field_bin(path),
        _ => read_field_csv(path),
    }
}

/// Writes `<stem>.csv` and `<stem>.bin` under `dir`.
pub fn write_field_pair(dir: &Path, stem: &str, header: &FieldHeader, field: &ComplexField) -> Result<()> {
    write_field_csv(&dir.join(format!("{stem}.csv")), header, field)?;
    write_field_bin(&dir.join(format!("{stem}.bin")), header, field)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}_{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (k, x) in a.iter().enumerate() {
                flatten(&key(&k.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        x => out.push((prefix.to_string(), x.to_string())),
    }
}

/// Flat CSV: nested objects become `outer_inner` columns, arrays `name_k`.
/// Columns come from the first record; `None` fields are left empty.
pub fn write_records_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let rows: Vec<Vec<(String, String)>> = items
        .iter()
        .map(|it| {
            let mut out = Vec::new();
            flatten("", &serde_json::to_value(it)?, &mut out);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut cols: Vec<String> = Vec::new();
    for row in &rows {
        for (k, _) in row {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    writeln!(w, "{}", cols.join(","))?;
    for row in &rows {
        let cells: Vec<&str> = cols
            .iter()
            .map(|c| row.iter().find(|(k, _)| k == c).map(|(_, v)| v.as_str()).unwrap_or(""))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a flat CSV written by [`write_records_csv`] as header plus rows.
pub fn read_records_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let cols: Vec<String> = match lines.next() {
        Some(l) => l?.split(',').map(str::to_string).collect(),
        None => return Ok((Vec::new(), Vec::new())),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != cols.len() {
            return Err(Error::Format(format!("row has {} cells, header {}", row.len(), cols.len())));
        }
        rows.push(row);
    }
    Ok((cols, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn field() -> ComplexField {
        let g = Arc::new(RadialGrid::new(2, 257, 12.0, Spacing::Sinh { core: 1.5 }).unwrap());
        ComplexField::from_fn(g, |r| C64::from_polar((-r * r).exp(), 0.3 * r + 1e-17)).unwrap()
    }

    #[test]
    fn field_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let f = field();
        let h = FieldHeader::new("profile", f.grid(), json!({"b": 0.3, "sigma1": 2.2}));
        write_field_pair(dir.path(), "p", &h, &f).unwrap();
        for name in ["p.csv", "p.bin"] {
            let (h2, f2) = read_field(&dir.path().join(name)).unwrap();
            assert_eq!(h2, h);
            assert_eq!(f2.samples(), f.samples(), "{name}");
        }
    }

    #[test]
    fn corrupted_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        std::fs::write(&p, b"nope").unwrap();
        assert!(matches!(read_field_bin(&p), Err(Error::Format(_))));
        let c = dir.path().join("x.csv");
        std::fs::write(&c, "r,re,im\n1,2,3\n").unwrap();
        assert!(read_field_csv(&c).is_err());
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Rec {
        t: f64,
        v: [f64; 2],
        o: Option<f64>,
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            Rec { t: 0.1, v: [1.0, 2.0], o: None },
            Rec { t: 1e-300, v: [3.0, -4.5], o: Some(0.25) },
        ];
        let p = dir.path().join("r.jsonl");
        write_jsonl(&p, &recs).unwrap();
        assert_eq!(read_jsonl::<Rec>(&p).unwrap(), recs);
        let c = dir.path().join("r.csv");
        write_records_csv(&c, &recs).unwrap();
        let (cols, rows) = read_records_csv(&c).unwrap();
        assert_eq!(cols, vec!["o", "t", "v_0", "v_1"]);
        assert_eq!(rows[0][0], "");
        assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1e-300);
    }
}
