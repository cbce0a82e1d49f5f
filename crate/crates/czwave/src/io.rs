//! Serialization of sampled functions and reports.
//!
//! Two interchange formats for a [`SampledFunction`]:
//!
//! * CSV with header `node,re,im`, one row per grid node;
//! * a compact binary layout: magic `CZW1`, then a little-endian header
//!   (`dim` as u32, `half_width` as f64, `points` as u64) followed by one
//!   little-endian `(re, im)` pair of f64 per node.
//!
//! Reports are JSON documents written with a trailing newline; identical
//! inputs produce byte-identical files (key order is insertion order and
//! float formatting is deterministic).

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{CzError, Result};
use crate::grid::{Grid, SampledFunction};

const MAGIC: &[u8; 4] = b"CZW1";

/// Write `f` as CSV rows `node,re,im`.
pub fn write_csv(path: &Path, f: &SampledFunction) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "node,re,im")?;
    for (i, v) in f.values.iter().enumerate() {
        writeln!(out, "{i},{},{}", v.re, v.im)?;
    }
    out.flush()?;
    Ok(())
}

/// Write arbitrary numeric rows under a header line; used for per-experiment
/// sweep data.
pub fn write_csv_rows(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let cols = header.split(',').count();
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        if row.len() != cols {
            return Err(CzError::Degenerate(format!(
                "csv row has {} fields under a {cols}-column header",
                row.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a CSV file written by [`write_csv`] back onto `grid`.
pub fn read_csv(path: &Path, grid: Grid) -> Result<SampledFunction> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "node,re,im" {
        return Err(CzError::Parse {
            col: 1,
            msg: format!("expected header `node,re,im`, got \"{header}\""),
        });
    }
    let mut values = vec![C64::new(0.0, 0.0); grid.len()];
    let mut count = 0usize;
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CzError::Parse {
                col: 1,
                msg: format!("row {}: expected 3 fields, got {}", idx + 2, fields.len()),
            });
        }
        let node: usize = fields[0].trim().parse().map_err(|_| CzError::Parse {
            col: 1,
            msg: format!("row {}: bad node index \"{}\"", idx + 2, fields[0]),
        })?;
        let re: f64 = fields[1].trim().parse().map_err(|_| CzError::Parse {
            col: 2,
            msg: format!("row {}: bad real part \"{}\"", idx + 2, fields[1]),
        })?;
        let im: f64 = fields[2].trim().parse().map_err(|_| CzError::Parse {
            col: 3,
            msg: format!("row {}: bad imaginary part \"{}\"", idx + 2, fields[2]),
        })?;
        if node >= values.len() {
            return Err(CzError::Parse {
                col: 1,
                msg: format!("row {}: node {node} out of range for {} nodes", idx + 2, values.len()),
            });
        }
        values[node] = C64::new(re, im);
        count += 1;
    }
    if count != grid.len() {
        return Err(CzError::Parse {
            col: 1,
            msg: format!("expected {} rows, got {count}", grid.len()),
        });
    }
    SampledFunction::from_values(grid, values)
}

/// Write `f` in the compact binary layout.
pub fn write_binary(path: &Path, f: &SampledFunction) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(f.grid.dim() as u32).to_le_bytes())?;
    out.write_all(&f.grid.half_width().to_le_bytes())?;
    out.write_all(&(f.grid.points_per_axis() as u64).to_le_bytes())?;
    for v in &f.values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a binary file written by [`write_binary`]; the grid is recovered
/// from the header.
pub fn read_binary(path: &Path) -> Result<SampledFunction> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CzError::Parse {
            col: 1,
            msg: "missing CZW1 magic".into(),
        });
    }
    let header_len = 4 + 4 + 8 + 8;
    if bytes.len() < header_len {
        return Err(CzError::Parse {
            col: 1,
            msg: "truncated header".into(),
        });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let half_width = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let points = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let grid = Grid::new(dim, half_width, points)?;
    let payload = &bytes[header_len..];
    if payload.len() != grid.len() * 16 {
        return Err(CzError::Parse {
            col: 1,
            msg: format!(
                "payload holds {} bytes, expected {} for {} nodes",
                payload.len(),
                grid.len() * 16,
                grid.len()
            ),
        });
    }
    let values: Vec<C64> = payload
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    SampledFunction::from_values(grid, values)
}

/// Write a JSON report with pretty formatting and a trailing newline.
pub fn write_report(path: &Path, report: &serde_json::Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}
