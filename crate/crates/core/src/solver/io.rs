//! Trajectory files.
//!
//! Binary layout, little endian: the 8-byte magic `GLTRAJ\0\x01`, shape (u8,
//! 0 = unit square, 1 = unit disk), `nx`, `ny`, `nt` (u32), `T` and `h` (f64),
//! the number of trace values per slice (u32); then for every time level the
//! node values in row-major order (`x1` index outer) followed by the trace
//! values, each complex number as two f64.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, NodeKind, Shape, SpaceTimeField, SpaceTimeGrid, C64};

const MAGIC: &[u8; 8] = b"GLTRAJ\0\x01";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryHeader {
    pub shape: Shape,
    pub nx: u32,
    pub ny: u32,
    pub nt: u32,
    pub t_final: f64,
    pub h: f64,
    pub n_trace: u32,
}

impl TrajectoryHeader {
    pub fn of(grid: &SpaceTimeGrid) -> Self {
        Self {
            shape: grid.spec.shape,
            nx: grid.nx as u32,
            ny: grid.ny as u32,
            nt: grid.nt as u32,
            t_final: grid.t_final,
            h: grid.h(),
            n_trace: grid.cuts.len() as u32,
        }
    }
}

pub fn write_trajectory<W: Write>(y: &SpaceTimeField, grid: &SpaceTimeGrid, mut out: W) -> Result<()> {
    y.check_grid(grid)?;
    let h = TrajectoryHeader::of(grid);
    out.write_all(MAGIC)?;
    out.write_all(&[match h.shape {
        Shape::UnitSquare => 0,
        Shape::UnitDisk => 1,
    }])?;
    for v in [h.nx, h.ny, h.nt] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&h.t_final.to_le_bytes())?;
    out.write_all(&h.h.to_le_bytes())?;
    out.write_all(&h.n_trace.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * (grid.dims().0 * grid.dims().1 + grid.cuts.len()));
    for s in &y.slices {
        buf.clear();
        for z in s.values.iter().chain(s.trace.iter()) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_header<R: Read>(r: &mut R) -> Result<TrajectoryHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut shape = [0u8; 1];
    r.read_exact(&mut shape)?;
    let shape = match shape[0] {
        0 => Shape::UnitSquare,
        1 => Shape::UnitDisk,
        s => return Err(Error::Format(format!("unknown shape tag {s}"))),
    };
    Ok(TrajectoryHeader {
        shape,
        nx: read_u32(r)?,
        ny: read_u32(r)?,
        nt: read_u32(r)?,
        t_final: read_f64(r)?,
        h: read_f64(r)?,
        n_trace: read_u32(r)?,
    })
}

/// Reads a trajectory written for `grid`; the header must match it exactly.
pub fn read_trajectory<R: Read>(mut r: R, grid: &SpaceTimeGrid) -> Result<SpaceTimeField> {
    let h = read_header(&mut r)?;
    if h != TrajectoryHeader::of(grid) {
        return Err(Error::Format(format!("header {h:?} does not match the grid")));
    }
    let dims = grid.dims();
    let mut slices = Vec::with_capacity(grid.nt + 1);
    for _ in 0..=grid.nt {
        let mut vals = Vec::with_capacity(dims.0 * dims.1);
        for _ in 0..dims.0 * dims.1 {
            vals.push(C64::new(read_f64(&mut r)?, read_f64(&mut r)?));
        }
        let mut trace = Vec::with_capacity(grid.cuts.len());
        for _ in 0..grid.cuts.len() {
            trace.push(C64::new(read_f64(&mut r)?, read_f64(&mut r)?));
        }
        let values = Array2::from_shape_vec(dims, vals).map_err(|e| Error::Format(e.to_string()))?;
        slices.push(ComplexField { values, trace });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(SpaceTimeField { slices })
}

/// CSV with columns `t,x1,x2,re,im` over domain nodes.
pub fn write_trajectory_csv<W: Write>(y: &SpaceTimeField, grid: &SpaceTimeGrid, out: W) -> Result<()> {
    y.check_grid(grid)?;
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["t", "x1", "x2", "re", "im"]).map_err(err)?;
    for (k, s) in y.slices.iter().enumerate() {
        for ((i, j), z) in s.values.indexed_iter() {
            if grid.kind[[i, j]] == NodeKind::Exterior {
                continue;
            }
            let x = grid.x(i, j);
            w.write_record(&[
                grid.t(k).to_string(),
                x[0].to_string(),
                x[1].to_string(),
                z.re.to_string(),
                z.im.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}
