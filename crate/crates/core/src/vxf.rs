//! VXF binary grid files.
//!
//! Little-endian. A 32-byte header:
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 4     | magic `VXF1`                  |
//! | 4     | voxel size, `f32` meters      |
//! | 4     | samples per voxel `n`, `u32`  |
//! | 12    | origin, `3 × f32`             |
//! | 8     | voxel count, `u64`            |
//!
//! followed by one record per voxel in lexicographic index order:
//! `3 × i32` index, `u8` class id (255 = NULL), then `n × (3 × f32 position,
//! 3 × f32 color)`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::voxfield::{
    SemanticLabel, SigmaVoxfield, SurfaceSample, VoxelIndex, VoxfieldGrid,
};

pub const VXF_MAGIC: &[u8; 4] = b"VXF1";
pub const VXF_HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum VxfError {
    #[error("VXF format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("VXF I/O error: {0}")]
    Io(#[from] io::Error),
}

fn record_len(n: usize) -> usize {
    12 + 1 + n * 24
}

pub fn encode_grid(grid: &VoxfieldGrid) -> Vec<u8> {
    let n = grid.n() as usize;
    let mut out = Vec::with_capacity(VXF_HEADER_LEN + grid.len() * record_len(n));
    out.extend_from_slice(VXF_MAGIC);
    out.extend_from_slice(&grid.voxel_size().to_le_bytes());
    out.extend_from_slice(&grid.n().to_le_bytes());
    for o in grid.origin() {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    for (idx, entry) in grid.iter() {
        for c in idx.0 {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.push(entry.label.to_byte());
        for s in entry.voxfield.samples() {
            for v in s.position.iter().chain(&s.color) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N], VxfError> {
        let end = self.offset + N;
        let slice = self.bytes.get(self.offset..end).ok_or_else(|| VxfError::Format {
            offset: self.offset,
            reason: format!("truncated file while reading {what}"),
        })?;
        self.offset = end;
        Ok(slice.try_into().expect("slice length"))
    }

    fn f32(&mut self, what: &str) -> Result<f32, VxfError> {
        Ok(f32::from_le_bytes(self.take(what)?))
    }

    fn err(&self, at: usize, reason: impl Into<String>) -> VxfError {
        VxfError::Format {
            offset: at,
            reason: reason.into(),
        }
    }
}

pub fn decode_grid(bytes: &[u8]) -> Result<VoxfieldGrid, VxfError> {
    let mut r = Reader { bytes, offset: 0 };
    let magic: [u8; 4] = r.take("magic")?;
    if &magic != VXF_MAGIC {
        return Err(r.err(0, format!("bad magic {magic:?}, expected \"VXF1\"")));
    }
    let voxel_size = r.f32("voxel size")?;
    let n = u32::from_le_bytes(r.take("n")?);
    let origin = [r.f32("origin")?, r.f32("origin")?, r.f32("origin")?];
    let count_at = r.offset;
    let count = u64::from_le_bytes(r.take("voxel count")?);
    let mut grid = VoxfieldGrid::new(voxel_size, n, origin).map_err(|e| r.err(4, e.to_string()))?;
    if origin.iter().any(|o| !o.is_finite()) {
        return Err(r.err(12, "non-finite origin"));
    }

    let expected = (count as u128) * record_len(n as usize) as u128;
    let remaining = (bytes.len() - VXF_HEADER_LEN) as u128;
    if expected > remaining {
        return Err(r.err(
            bytes.len(),
            format!("truncated file: {count} voxels need {expected} bytes, {remaining} present"),
        ));
    }

    let mut previous: Option<VoxelIndex> = None;
    for _ in 0..count {
        let at = r.offset;
        let mut idx = [0i32; 3];
        for c in &mut idx {
            *c = i32::from_le_bytes(r.take("voxel index")?);
        }
        let idx = VoxelIndex(idx);
        if previous.is_some_and(|p| p >= idx) {
            return Err(r.err(at, format!("voxel {idx} out of order or duplicated")));
        }
        previous = Some(idx);
        let label_at = r.offset;
        let [b] = r.take::<1>("class id")?;
        let label = SemanticLabel::from_byte(b).map_err(|e| r.err(label_at, e.to_string()))?;
        let mut samples = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let p = [r.f32("position")?, r.f32("position")?, r.f32("position")?];
            let c = [r.f32("color")?, r.f32("color")?, r.f32("color")?];
            samples.push(SurfaceSample::new(p, c));
        }
        grid.insert(idx, SigmaVoxfield::from_raw(samples), label)
            .map_err(|e| r.err(at, e.to_string()))?;
    }
    if r.offset != bytes.len() {
        return Err(r.err(
            r.offset,
            format!("{} trailing bytes after {count} voxels (count at byte {count_at})", bytes.len() - r.offset),
        ));
    }
    Ok(grid)
}

pub fn write_grid(grid: &VoxfieldGrid, path: impl AsRef<Path>) -> Result<(), VxfError> {
    fs::write(path, encode_grid(grid))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxfieldGrid, VxfError> {
    decode_grid(&fs::read(path)?)
}
