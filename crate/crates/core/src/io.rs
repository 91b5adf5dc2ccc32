//! CSV serialization. Floats are written in Rust's shortest round-trip form,
//! so reading a file back reproduces every value bit for bit.
//!
//! * field: `dim0,dim1,dim2,component,value` (grid indices, unused dims 0)
//! * coordinates sidecar: `dim,index,coord`
//! * amplification sweep: `scheme,r,theta,amplification`
//! * speedup table: `scheme,r,s,speedup`

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::analysis::{AmplificationRow, SpeedupRow};
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("line {line}: bad {what} `{s}`: {e}")))
}

pub fn write_field<W: Write>(field: &Field, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["dim0", "dim1", "dim2", "component", "value"])?;
    let grid = field.grid();
    for c in 0..field.n_components() {
        for (p, v) in field.component(c).iter().enumerate() {
            let idx = grid.multi_index(p);
            wr.write_record([
                idx[0].to_string(),
                idx[1].to_string(),
                idx[2].to_string(),
                c.to_string(),
                num(*v),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Read a field on `grid`; every (point, component) must appear exactly once.
pub fn read_field<R: Read>(grid: Arc<Grid>, r: R) -> Result<Field> {
    let mut rd = csv::Reader::from_reader(r);
    let mut entries = Vec::new();
    let mut n_components = 0;
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(Error::Parse(format!("line {line}: expected 5 columns")));
        }
        let mut idx = [0usize; 3];
        for (d, slot) in idx.iter_mut().enumerate() {
            *slot = parse(&rec[d], "index", line)?;
        }
        let c: usize = parse(&rec[3], "component", line)?;
        let v: f64 = parse(&rec[4], "value", line)?;
        for (d, &i) in idx.iter().enumerate() {
            let n = if d < grid.dims() { grid.shape()[d] } else { 1 };
            if i >= n {
                return Err(Error::Parse(format!("line {line}: index {i} out of range in dim {d}")));
            }
        }
        n_components = n_components.max(c + 1);
        entries.push((grid.linear_index(&idx[..grid.dims()]), c, v, line));
    }
    let n = grid.n_points();
    let mut values = vec![f64::NAN; n * n_components.max(1)];
    let mut seen = vec![false; values.len()];
    for (p, c, v, line) in entries {
        let k = c * n + p;
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Parse(format!("line {line}: duplicate entry")));
        }
        values[k] = v;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse("field file does not cover every point".into()));
    }
    Field::from_values(grid, n_components.max(1), values)
}

pub fn write_coords<W: Write>(grid: &Grid, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["dim", "index", "coord"])?;
    for d in 0..grid.dims() {
        for (i, x) in grid.coords(d).iter().enumerate() {
            wr.write_record([d.to_string(), i.to_string(), num(*x)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn read_coords<R: Read>(r: R) -> Result<Grid> {
    let mut rd = csv::Reader::from_reader(r);
    let mut coords: Vec<Vec<(usize, f64)>> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::Parse(format!("line {line}: expected 3 columns")));
        }
        let d: usize = parse(&rec[0], "dim", line)?;
        let i: usize = parse(&rec[1], "index", line)?;
        let x: f64 = parse(&rec[2], "coord", line)?;
        if d >= crate::mesh::MAX_DIMS {
            return Err(Error::Parse(format!("line {line}: dimension {d} out of range")));
        }
        if coords.len() <= d {
            coords.resize(d + 1, Vec::new());
        }
        coords[d].push((i, x));
    }
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(d, mut c)| {
            c.sort_by_key(|(i, _)| *i);
            if c.iter().enumerate().any(|(k, (i, _))| k != *i) {
                return Err(Error::Parse(format!("dimension {d} has missing or repeated indices")));
            }
            Ok(c.into_iter().map(|(_, x)| x).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Grid::from_coords(coords)
}

/// Write `<stem>.csv` and `<stem>.coords.csv` next to each other.
pub fn save_field(field: &Field, path: &Path) -> Result<()> {
    write_field(field, std::fs::File::create(path)?)?;
    write_coords(field.grid(), std::fs::File::create(coords_path(path))?)
}

pub fn load_field(path: &Path) -> Result<Field> {
    let grid = Arc::new(read_coords(std::fs::File::open(coords_path(path))?)?);
    read_field(grid, std::fs::File::open(path)?)
}

pub fn coords_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("coords.csv")
}

pub fn write_amplification<W: Write>(rows: &[AmplificationRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scheme", "r", "theta", "amplification"])?;
    for r in rows {
        wr.write_record([r.scheme.name().to_string(), num(r.r), num(r.theta), num(r.amplification)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_speedup<W: Write>(rows: &[SpeedupRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scheme", "r", "s", "speedup"])?;
    for r in rows {
        wr.write_record([r.scheme.name().to_string(), num(r.r), r.s.to_string(), num(r.speedup)])?;
    }
    wr.flush()?;
    Ok(())
}
