//! Mesh → Σ-Voxfield grid conversion.
//!
//! Each triangle is clipped against every voxel box its bounding box touches.
//! A voxel is occupied when some clipped piece has positive area and does not
//! lie entirely in one of the box's max faces (boxes are half-open). Samples
//! are then drawn area-uniformly over the union of the voxel's clipped pieces.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;

use super::geometry::{add, barycentric, clip_to_box, polygon_area, scale, sub, triangle_area, Vec3};
use super::mesh::Mesh;
use super::IngestError;
use crate::seed::{rng_for, voxel_parts};
use crate::voxfield::{
    voxel_center, SemanticLabel, SigmaVoxfield, SurfaceSample, VoxelIndex, VoxfieldGrid,
};

/// Clipped pieces below this area (m²) are treated as empty.
pub const MIN_CLIPPED_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub voxel_size: f64,
    pub n: usize,
    pub origin: [f32; 3],
    pub seed: u64,
}

impl GridParams {
    pub fn new(voxel_size: f64, n: usize, seed: u64) -> Self {
        Self {
            voxel_size,
            n,
            origin: [0.0; 3],
            seed,
        }
    }
}

/// Part of one mesh face inside one voxel.
#[derive(Clone, Debug)]
pub struct ClippedPiece {
    pub face: usize,
    pub polygon: Vec<Vec3>,
    pub area: f64,
}

fn voxel_box(origin: [f32; 3], vs: f64, idx: VoxelIndex) -> (Vec3, Vec3) {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        lo[a] = origin[a] as f64 + idx.0[a] as f64 * vs;
        hi[a] = origin[a] as f64 + (idx.0[a] as f64 + 1.0) * vs;
    }
    (lo, hi)
}

fn lies_on_max_face(poly: &[Vec3], hi: Vec3) -> bool {
    (0..3).any(|a| poly.iter().all(|p| p[a] == hi[a]))
}

fn clip_face(tri: &[Vec3; 3], face: usize, origin: [f32; 3], vs: f64) -> Vec<(VoxelIndex, ClippedPiece)> {
    let mut lo_idx = [0i64; 3];
    let mut hi_idx = [0i64; 3];
    for a in 0..3 {
        let lo = tri.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
        let hi = tri.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        lo_idx[a] = ((lo - origin[a] as f64) / vs).floor() as i64 - 1;
        hi_idx[a] = ((hi - origin[a] as f64) / vs).floor() as i64 + 1;
    }
    let mut out = Vec::new();
    for i in lo_idx[0]..=hi_idx[0] {
        for j in lo_idx[1]..=hi_idx[1] {
            for k in lo_idx[2]..=hi_idx[2] {
                let idx = VoxelIndex::new(i as i32, j as i32, k as i32);
                let (lo, hi) = voxel_box(origin, vs, idx);
                let polygon = clip_to_box(tri, lo, hi);
                let area = polygon_area(&polygon);
                if area > MIN_CLIPPED_AREA && !lies_on_max_face(&polygon, hi) {
                    out.push((idx, ClippedPiece { face, polygon, area }));
                }
            }
        }
    }
    out
}

/// All occupied voxels with the clipped pieces that occupy them.
pub fn clip_mesh(mesh: &Mesh, voxel_size: f64, origin: [f32; 3]) -> BTreeMap<VoxelIndex, Vec<ClippedPiece>> {
    let per_face: Vec<Vec<(VoxelIndex, ClippedPiece)>> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|f| clip_face(&mesh.triangle(f), f, origin, voxel_size))
        .collect();
    let mut map: BTreeMap<VoxelIndex, Vec<ClippedPiece>> = BTreeMap::new();
    for pieces in per_face {
        for (idx, piece) in pieces {
            map.entry(idx).or_default().push(piece);
        }
    }
    map
}

/// Voxels whose box intersects the surface with positive clipped area.
pub fn voxelize(mesh: &Mesh, voxel_size: f64, origin: [f32; 3]) -> BTreeSet<VoxelIndex> {
    clip_mesh(mesh, voxel_size, origin).into_keys().collect()
}

/// Clipped pieces of all faces inside one voxel.
pub fn clip_voxel(mesh: &Mesh, voxel: VoxelIndex, voxel_size: f64, origin: [f32; 3]) -> Vec<ClippedPiece> {
    let (lo, hi) = voxel_box(origin, voxel_size, voxel);
    let mut out = Vec::new();
    for face in 0..mesh.triangles.len() {
        let tri = mesh.triangle(face);
        let outside = (0..3).any(|a| {
            tri.iter().all(|p| p[a] < lo[a]) || tri.iter().all(|p| p[a] > hi[a])
        });
        if outside {
            continue;
        }
        let polygon = clip_to_box(&tri, lo, hi);
        let area = polygon_area(&polygon);
        if area > MIN_CLIPPED_AREA && !lies_on_max_face(&polygon, hi) {
            out.push(ClippedPiece { face, polygon, area });
        }
    }
    out
}

fn relative_coord(value: f64, half: f64) -> f32 {
    let v = value.clamp(-half, half) as f32;
    if v as f64 >= half {
        // half-open upper face
        (half as f32).next_down()
    } else if (v as f64) < -half {
        ((-half) as f32).next_up()
    } else {
        v
    }
}

/// Draws `n` area-uniform samples over the pieces and assigns the
/// area-majority label (ties to the smaller class id, NULL last).
pub fn sample_pieces(
    mesh: &Mesh,
    pieces: &[ClippedPiece],
    voxel: VoxelIndex,
    params: &GridParams,
) -> Result<(SigmaVoxfield, SemanticLabel), IngestError> {
    // fan triangulation of every piece; (face, sub-triangle)
    let mut subs: Vec<(usize, [Vec3; 3])> = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    let mut label_area: BTreeMap<u8, f64> = BTreeMap::new();
    for piece in pieces {
        *label_area.entry(mesh.face_semantics[piece.face].to_byte()).or_default() += piece.area;
        for k in 1..piece.polygon.len().saturating_sub(1) {
            let tri = [piece.polygon[0], piece.polygon[k], piece.polygon[k + 1]];
            let a = triangle_area(&tri);
            if a > 0.0 {
                total += a;
                subs.push((piece.face, tri));
                cumulative.push(total);
            }
        }
    }
    if !(total > MIN_CLIPPED_AREA) {
        return Err(IngestError::ZeroClippedArea(voxel));
    }

    let mut best: Option<(u8, f64)> = None;
    for (&b, &a) in &label_area {
        if best.is_none_or(|(_, ba)| a > ba) {
            best = Some((b, a));
        }
    }
    let label = SemanticLabel::from_byte(best.expect("non-empty").0).expect("mesh labels are valid");

    let center = voxel_center(params.origin, params.voxel_size, voxel);
    let half = params.voxel_size / 2.0;
    let mut rng = rng_for(params.seed, &voxel_parts(voxel));
    let mut samples = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let u = rng.random::<f64>() * total;
        let pick = cumulative.partition_point(|&c| c <= u).min(subs.len() - 1);
        let (face, tri) = subs[pick];
        let s = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        let p = add(
            add(scale(tri[0], 1.0 - s), scale(tri[1], s * (1.0 - r2))),
            scale(tri[2], s * r2),
        );
        let w = barycentric(p, &mesh.triangle(face));
        let colors = mesh.triangle_colors(face);
        let mut color = [0.0f32; 3];
        for (ch, slot) in color.iter_mut().enumerate() {
            let c = w[0] * colors[0][ch] + w[1] * colors[1][ch] + w[2] * colors[2][ch];
            *slot = (c.clamp(0.0, 1.0)) as f32;
        }
        let rel = sub(p, center);
        let position = rel.map(|x| relative_coord(x, half));
        samples.push(SurfaceSample::new(position, color));
    }
    Ok((SigmaVoxfield::new(samples), label))
}

/// Samples one occupied voxel directly from the mesh.
pub fn sample_voxfield(
    mesh: &Mesh,
    voxel: VoxelIndex,
    params: &GridParams,
) -> Result<(SigmaVoxfield, SemanticLabel), IngestError> {
    let pieces = clip_voxel(mesh, voxel, params.voxel_size, params.origin);
    sample_pieces(mesh, &pieces, voxel, params)
}

/// Voxelizes and samples the whole mesh. Per-voxel seeds make the result
/// independent of thread count.
pub fn build_grid(mesh: &Mesh, params: &GridParams) -> Result<VoxfieldGrid, IngestError> {
    if !(params.voxel_size.is_finite() && params.voxel_size > 0.0) {
        return Err(IngestError::InvalidSpec(format!("voxel size {} must be > 0", params.voxel_size)));
    }
    let clipped = clip_mesh(mesh, params.voxel_size, params.origin);
    let entries: Vec<(VoxelIndex, &Vec<ClippedPiece>)> = clipped.iter().map(|(k, v)| (*k, v)).collect();
    let sampled: Vec<Result<(VoxelIndex, SigmaVoxfield, SemanticLabel), IngestError>> = entries
        .par_iter()
        .map(|(idx, pieces)| sample_pieces(mesh, pieces, *idx, params).map(|(v, l)| (*idx, v, l)))
        .collect();
    let mut grid = VoxfieldGrid::new(params.voxel_size as f32, params.n as u32, params.origin)?;
    for r in sampled {
        let (idx, v, l) = r?;
        grid.insert(idx, v, l)?;
    }
    Ok(grid)
}
