//! Field snapshots: CSV with header `x,y,value` (x outer, y inner), or a binary layout:
//! 8-byte magic `PXFIELD1`, `nx` and `ny` as little-endian u64, the x nodes, the y nodes,
//! then `nx*ny` values, all little-endian f64.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::{DomainTag, Grid1D, Grid2D};

pub const BINARY_MAGIC: &[u8; 8] = b"PXFIELD1";

pub fn to_csv(f: &ScalarField2D) -> String {
    let g = f.grid();
    let mut s = String::with_capacity(g.len() * 48);
    s.push_str("x,y,value\n");
    for (i, x) in g.x().iter().enumerate() {
        for (j, y) in g.y().iter().enumerate() {
            let _ = writeln!(s, "{x:e},{y:e},{:e}", f.at(i, j));
        }
    }
    s
}

pub fn write_csv(f: &ScalarField2D, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(f))?;
    Ok(())
}

pub fn parse_csv(text: &str, tag: DomainTag) -> Result<ScalarField2D> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,y,value" => {}
        _ => return Err(Error::InvalidField("snapshot header must be x,y,value".into())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidField(format!("line {}: expected 3 columns", n + 2)));
        }
        let mut vals = [0.0; 3];
        for (k, p) in parts.iter().enumerate() {
            vals[k] = p
                .trim()
                .parse()
                .map_err(|_| Error::InvalidField(format!("line {}: bad number {p}", n + 2)))?;
        }
        rows.push(vals);
    }
    let ny = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if ny == 0 || rows.len() % ny != 0 {
        return Err(Error::InvalidField("snapshot is not a tensor grid".into()));
    }
    let nx = rows.len() / ny;
    let xs: Vec<f64> = (0..nx).map(|i| rows[i * ny][0]).collect();
    let ys: Vec<f64> = (0..ny).map(|j| rows[j][1]).collect();
    for (k, r) in rows.iter().enumerate() {
        if r[0] != xs[k / ny] || r[1] != ys[k % ny] {
            return Err(Error::InvalidField(format!("row {} breaks the tensor layout", k + 2)));
        }
    }
    let grid = Arc::new(Grid2D::new(Grid1D::from_nodes(xs)?, Grid1D::from_nodes(ys)?, tag)?);
    ScalarField2D::new(grid, rows.iter().map(|r| r[2]).collect())
}

pub fn read_csv(path: &Path, tag: DomainTag) -> Result<ScalarField2D> {
    parse_csv(&std::fs::read_to_string(path)?, tag)
}

pub fn to_binary(f: &ScalarField2D) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(24 + 8 * (g.nx() + g.ny() + g.len()));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(g.nx() as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u64).to_le_bytes());
    for v in g.x().iter().chain(g.y()).chain(f.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8], tag: DomainTag) -> Result<ScalarField2D> {
    let mut r = bytes;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::InvalidField("bad snapshot magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let nx = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let ny = u64::from_le_bytes(word) as usize;
    if r.len() != 8 * (nx + ny + nx * ny) {
        return Err(Error::InvalidField("snapshot length does not match header".into()));
    }
    let vals: Vec<f64> =
        r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let grid = Arc::new(Grid2D::new(
        Grid1D::from_nodes(vals[..nx].to_vec())?,
        Grid1D::from_nodes(vals[nx..nx + ny].to_vec())?,
        tag,
    )?);
    ScalarField2D::new(grid, vals[nx + ny..].to_vec())
}

pub fn write_binary(f: &ScalarField2D, path: &Path) -> Result<()> {
    std::fs::File::create(path)?.write_all(&to_binary(f))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let g = Arc::new(
            Grid2D::new(
                Grid1D::geometric(0.0, 0.3, 9, 1.1).unwrap(),
                Grid1D::geometric(0.0, 2.0, 10, 1.2).unwrap(),
                DomainTag::HalfLine,
            )
            .unwrap(),
        );
        let f = ScalarField2D::from_fn(g, |x, y| (x * 7.0).sin() / (1.0 + y) + 1e-300).unwrap();
        let back = parse_csv(&to_csv(&f), DomainTag::HalfLine).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().x(), f.grid().x());
        assert_eq!(back.grid().y(), f.grid().y());
        let bin = from_binary(&to_binary(&f), DomainTag::HalfLine).unwrap();
        assert_eq!(bin.values(), f.values());
        assert_eq!(bin.grid().y(), f.grid().y());
    }
}
