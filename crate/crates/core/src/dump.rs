//! Reading and writing scalar fields.
//!
//! Two formats, chosen by file extension:
//!
//! * `.csv`: header `i1,...,i2n,value`, one row per point with 0-based
//!   integer coordinates, axis 1 varying fastest;
//! * `.bin`: 16-byte header (`b"ACMX"`, then `n`, `N` and a reserved zero as
//!   little-endian `u32`), followed by `N^(2n)` little-endian `f64` values in
//!   flat-index order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

const MAGIC: &[u8; 4] = b"ACMX";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

impl DumpFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(DumpFormat::Csv),
            Some("bin") => Ok(DumpFormat::Binary),
            _ => Err(Error::Dump(format!(
                "cannot infer dump format of {} (expected .csv or .bin)",
                path.display()
            ))),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Dump(format!("{}: {e}", path.display()))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let grid = field.grid();
    match DumpFormat::from_path(path)? {
        DumpFormat::Csv => {
            let dim = grid.dim();
            let header: Vec<String> = (1..=dim).map(|a| format!("i{a}")).collect();
            writeln!(w, "{},value", header.join(",")).map_err(|e| io_err(path, e))?;
            let mut idx = vec![0usize; dim];
            for (p, v) in field.values().iter().enumerate() {
                grid.multi_index(p, &mut idx);
                for i in &idx {
                    write!(w, "{i},").map_err(|e| io_err(path, e))?;
                }
                // `{:e}` round-trips f64 exactly
                writeln!(w, "{v:e}").map_err(|e| io_err(path, e))?;
            }
        }
        DumpFormat::Binary => {
            let mut header = [0u8; 16];
            header[..4].copy_from_slice(MAGIC);
            header[4..8].copy_from_slice(&(grid.half_dim() as u32).to_le_bytes());
            header[8..12].copy_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
            w.write_all(&header).map_err(|e| io_err(path, e))?;
            for v in field.values() {
                w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a field dumped on `grid`; the stored shape must match.
pub fn read_field(path: &Path, grid: Grid) -> Result<ScalarField> {
    match DumpFormat::from_path(path)? {
        DumpFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            if bytes.len() < 16 || &bytes[..4] != MAGIC {
                return Err(io_err(path, "missing ACMX header"));
            }
            let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
            let (n, pts) = (word(4), word(8));
            if n != grid.half_dim() || pts != grid.points_per_axis() {
                return Err(io_err(
                    path,
                    format!(
                        "stored shape n={n}, N={pts} differs from grid n={}, N={}",
                        grid.half_dim(),
                        grid.points_per_axis()
                    ),
                ));
            }
            let body = &bytes[16..];
            if body.len() != 8 * grid.len() {
                return Err(io_err(path, "truncated data"));
            }
            let values = body
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ScalarField::new(grid, values)
        }
        DumpFormat::Csv => {
            let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
            let mut lines = BufReader::new(file).lines();
            let dim = grid.dim();
            let header = lines
                .next()
                .ok_or_else(|| io_err(path, "empty file"))?
                .map_err(|e| io_err(path, e))?;
            if header.split(',').count() != dim + 1 {
                return Err(io_err(path, format!("header has wrong column count: {header}")));
            }
            let mut values = vec![f64::NAN; grid.len()];
            let mut seen = 0usize;
            let mut idx = vec![0isize; dim];
            for (row, line) in lines.enumerate() {
                let line = line.map_err(|e| io_err(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() != dim + 1 {
                    return Err(io_err(path, format!("row {} has {} columns", row + 2, cols.len())));
                }
                for a in 0..dim {
                    let i: usize = cols[a]
                        .parse()
                        .map_err(|e| io_err(path, format!("row {}: {e}", row + 2)))?;
                    if i >= grid.points_per_axis() {
                        return Err(io_err(path, format!("row {}: index {i} out of range", row + 2)));
                    }
                    idx[a] = i as isize;
                }
                let v: f64 = cols[dim]
                    .parse()
                    .map_err(|e| io_err(path, format!("row {}: {e}", row + 2)))?;
                let p = grid.index_of(&idx);
                if values[p].is_nan() {
                    seen += 1;
                }
                values[p] = v;
            }
            if seen != grid.len() {
                return Err(io_err(path, format!("expected {} rows, found {seen} distinct points", grid.len())));
            }
            ScalarField::new(grid, values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScalarField {
        let g = Grid::periodic(1, 8).unwrap();
        ScalarField::from_fn(g, |x| (x[0] + 0.3).sin() * (2.0 * x[1]).cos() + 1e-300)
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let f = sample();
        for name in ["f.csv", "f.bin"] {
            let path = dir.path().join(name);
            write_field(&path, &f).unwrap();
            let back = read_field(&path, *f.grid()).unwrap();
            assert_eq!(back, f, "{name}");
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field(&path, &sample()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i1,i2,value"));
        assert!(lines.next().unwrap().starts_with("0,0,"));
        assert!(lines.next().unwrap().starts_with("1,0,"));
    }

    #[test]
    fn binary_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &sample()).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"ACMX");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(bytes.len(), 16 + 8 * 64);
    }

    #[test]
    fn shape_mismatch_and_bad_extension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &sample()).unwrap();
        let other = Grid::periodic(1, 10).unwrap();
        assert_eq!(read_field(&path, other).unwrap_err().name(), "Dump");
        assert!(write_field(&dir.path().join("f.txt"), &sample()).is_err());
    }
}
