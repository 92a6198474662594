//! Self-describing binary container for sampled fields.
//!
//! Layout: magic `SSNS`, format version (u32), points-per-axis `n` (u32),
//! box side `L` (f64), component count (u32), then one row-major f64 array
//! per component.  Everything little-endian.  The dealias fraction is a
//! processing parameter, not data, so it is not stored; readers get the
//! default.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::SsnsError;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::Result;

const MAGIC: &[u8; 4] = b"SSNS";
const VERSION: u32 = 1;

/// Write raw components for a grid; `components` must all be `n^3` long.
pub fn write_components(path: &Path, grid: &Grid, components: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.n as u32).to_le_bytes())?;
    w.write_all(&grid.box_side.to_le_bytes())?;
    w.write_all(&(components.len() as u32).to_le_bytes())?;
    for c in components {
        if c.len() != grid.len() {
            return Err(SsnsError::domain(
                "io::write_components",
                format!("component has {} values, grid needs {}", c.len(), grid.len()),
            ));
        }
        let mut buf = Vec::with_capacity(c.len() * 8);
        for v in *c {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a container written by [`write_components`].
pub fn read_components(path: &Path) -> Result<(Grid, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(SsnsError::Format(format!(
            "bad magic {:?}, not an SSNS container",
            magic
        )));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(SsnsError::Format(format!(
            "unsupported container version {version}"
        )));
    }
    let n = read_u32(&mut r, "n")? as usize;
    let box_side = read_f64(&mut r, "box_side")?;
    let ncomp = read_u32(&mut r, "component count")? as usize;
    let grid = Grid::new(n, box_side)
        .map_err(|e| SsnsError::Format(format!("invalid grid in header: {e}")))?;
    if ncomp == 0 || ncomp > 16 {
        return Err(SsnsError::Format(format!(
            "implausible component count {ncomp}"
        )));
    }
    let mut components = Vec::with_capacity(ncomp);
    for ci in 0..ncomp {
        let mut buf = vec![0u8; grid.len() * 8];
        read_exact(&mut r, &mut buf, "component data")?;
        let vals: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(SsnsError::Format(format!(
                "component {ci} contains non-finite values"
            )));
        }
        components.push(vals);
    }
    Ok((grid, components))
}

pub fn write_vector_field(path: &Path, f: &VectorField) -> Result<()> {
    write_components(
        path,
        &f.grid,
        &[&f.components[0], &f.components[1], &f.components[2]],
    )
}

pub fn read_vector_field(path: &Path) -> Result<VectorField> {
    let (grid, mut comps) = read_components(path)?;
    if comps.len() != 3 {
        return Err(SsnsError::Format(format!(
            "expected 3 components for a velocity field, found {}",
            comps.len()
        )));
    }
    let c2 = comps.pop().unwrap();
    let c1 = comps.pop().unwrap();
    let c0 = comps.pop().unwrap();
    Ok(VectorField {
        grid,
        components: [c0, c1, c2],
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| SsnsError::Format(format!("truncated container while reading {what}: {e}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}
