//! Symmetric Chamfer distance between a voxfield grid and its source mesh.

use rand::Rng;

use super::geometry::{add, scale, triangle_area, TriangleBvh, Vec3};
use super::mesh::Mesh;
use super::IngestError;
use crate::seed::rng_for;
use crate::spatial::KdTree;
use crate::voxfield::VoxfieldGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChamferReport {
    /// Mean distance from grid samples to the mesh surface.
    pub grid_to_mesh: f64,
    /// Mean distance from mesh probes to the nearest grid sample.
    pub mesh_to_grid: f64,
    /// Average of the two directed terms.
    pub chamfer: f64,
}

/// `count` area-uniform points on the mesh surface.
pub fn sample_mesh_surface(mesh: &Mesh, count: usize, seed: u64) -> Vec<Vec3> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for f in 0..mesh.triangles.len() {
        total += mesh.area(f);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Vec::new();
    }
    let mut rng = rng_for(seed, &[0xc4a3f]);
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let f = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            let t = mesh.triangle(f);
            let s = rng.random::<f64>().sqrt();
            let r = rng.random::<f64>();
            add(add(scale(t[0], 1.0 - s), scale(t[1], s * (1.0 - r))), scale(t[2], s * r))
        })
        .collect()
}

pub fn chamfer_distance(
    grid: &VoxfieldGrid,
    mesh: &Mesh,
    probe_count: usize,
    probe_seed: u64,
) -> Result<ChamferReport, IngestError> {
    if grid.is_empty() {
        return Err(IngestError::EmptyInput("grid"));
    }
    let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len())
        .map(|f| mesh.triangle(f))
        .filter(|t| triangle_area(t) > 0.0)
        .collect();
    if tris.is_empty() {
        return Err(IngestError::EmptyInput("mesh"));
    }
    if probe_count == 0 {
        return Err(IngestError::EmptyInput("probe set"));
    }
    let bvh = TriangleBvh::new(tris);
    let points: Vec<Vec3> = grid.world_samples().into_iter().map(|(p, _)| p).collect();
    let grid_to_mesh = points.iter().map(|&p| bvh.distance(p)).sum::<f64>() / points.len() as f64;

    let tree = KdTree::new(points);
    let probes = sample_mesh_surface(mesh, probe_count, probe_seed);
    let mesh_to_grid = probes
        .iter()
        .map(|&q| tree.nearest(q).expect("non-empty tree").dist2.sqrt())
        .sum::<f64>()
        / probes.len() as f64;
    Ok(ChamferReport {
        grid_to_mesh,
        mesh_to_grid,
        chamfer: 0.5 * (grid_to_mesh + mesh_to_grid),
    })
}
