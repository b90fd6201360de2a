//! Mesh input: OBJ loading, procedural street scenes, voxelization into
//! Σ-Voxfield grids and Chamfer evaluation against the source surface.

pub mod chamfer;
pub mod geometry;
pub mod mesh;
pub mod synth;
pub mod voxelize;

use thiserror::Error;

use crate::voxfield::{VoxelIndex, VoxfieldError};

pub use chamfer::{chamfer_distance, sample_mesh_surface, ChamferReport};
pub use mesh::{load_mesh, parse_obj, parse_sidecar, save_mesh, Mesh, Vertex, DEFAULT_COLOR};
pub use synth::{synth_scene, SceneSpec};
pub use voxelize::{build_grid, sample_voxfield, voxelize, GridParams};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face}: vertex index {index} out of range ({vertex_count} vertices)")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("semantic sidecar has {actual} labels for {expected} faces")]
    SidecarLength { expected: usize, actual: usize },
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("voxel {0} has zero clipped surface area")]
    ZeroClippedArea(VoxelIndex),
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Voxfield(#[from] VoxfieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
