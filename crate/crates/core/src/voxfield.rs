//! Σ-Voxfields: fixed-cardinality sets of colored surface samples per voxel,
//! the sparse grid that stores them, and the token encoding used by the
//! denoiser.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VoxfieldError {
    #[error("token dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("voxfield has {actual} samples, grid expects {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("sample {index} violates voxfield bounds: {reason}")]
    OutOfBounds { index: usize, reason: String },
    #[error("invalid semantic class id {0} (expected 0..=19)")]
    InvalidClass(u8),
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
}

/// Number of semantic classes in the taxonomy (NULL excluded).
pub const CLASS_COUNT: usize = 20;

const CLASS_NAMES: [&str; CLASS_COUNT] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
    "road-lane",
];

/// Per-voxel semantic class, or NULL (the dropped condition used for
/// classifier-free guidance).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SemanticLabel(Option<u8>);

impl SemanticLabel {
    pub const NULL: SemanticLabel = SemanticLabel(None);
    pub const ROAD: SemanticLabel = SemanticLabel(Some(0));
    pub const SIDEWALK: SemanticLabel = SemanticLabel(Some(1));
    pub const BUILDING: SemanticLabel = SemanticLabel(Some(2));
    pub const POLE: SemanticLabel = SemanticLabel(Some(5));
    pub const VEGETATION: SemanticLabel = SemanticLabel(Some(8));
    pub const TERRAIN: SemanticLabel = SemanticLabel(Some(9));
    pub const CAR: SemanticLabel = SemanticLabel(Some(13));
    pub const ROAD_LANE: SemanticLabel = SemanticLabel(Some(19));

    /// Byte used on disk for NULL.
    pub const NULL_BYTE: u8 = 255;

    /// Row of the learned NULL embedding.
    pub const NULL_EMBEDDING_INDEX: usize = CLASS_COUNT;

    pub fn class(id: u8) -> Result<Self, VoxfieldError> {
        if (id as usize) < CLASS_COUNT {
            Ok(Self(Some(id)))
        } else {
            Err(VoxfieldError::InvalidClass(id))
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, VoxfieldError> {
        if b == Self::NULL_BYTE {
            Ok(Self::NULL)
        } else {
            Self::class(b)
        }
    }

    pub fn to_byte(self) -> u8 {
        self.0.unwrap_or(Self::NULL_BYTE)
    }

    pub fn class_id(self) -> Option<u8> {
        self.0
    }

    pub fn is_null(self) -> bool {
        self.0.is_none()
    }

    /// Row index into a `CLASS_COUNT + 1` embedding table.
    pub fn embedding_index(self) -> usize {
        self.0.map_or(Self::NULL_EMBEDDING_INDEX, usize::from)
    }

    pub fn name(self) -> &'static str {
        self.0.map_or("null", |id| CLASS_NAMES[id as usize])
    }

    pub fn all_classes() -> impl Iterator<Item = SemanticLabel> {
        (0..CLASS_COUNT as u8).map(|id| SemanticLabel(Some(id)))
    }
}

impl fmt::Debug for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(id) => write!(f, "{}({id})", self.name()),
            None => f.write_str("NULL"),
        }
    }
}

/// Integer voxel coordinates; ordering is lexicographic on `(i, j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex(pub [i32; 3]);

impl VoxelIndex {
    pub fn new(i: i32, j: i32, k: i32) -> Self {
        Self([i, j, k])
    }
}

impl fmt::Display for VoxelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

/// One colored point on the surface, relative to its voxel center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub position: [f32; 3],
    pub color: [f32; 3],
}

impl SurfaceSample {
    pub fn new(position: [f32; 3], color: [f32; 3]) -> Self {
        Self { position, color }
    }

    fn norm_squared(&self) -> f64 {
        self.position.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }
}

/// Distance to the voxel center first, then `(x, y, z)`, then `(r, g, b)`.
fn canonical_cmp(a: &SurfaceSample, b: &SurfaceSample) -> Ordering {
    a.norm_squared()
        .total_cmp(&b.norm_squared())
        .then_with(|| {
            a.position
                .iter()
                .chain(&a.color)
                .zip(b.position.iter().chain(&b.color))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Sorts samples into the canonical order used by the token encoding.
pub fn canonical_order(mut samples: Vec<SurfaceSample>) -> Vec<SurfaceSample> {
    samples.sort_by(canonical_cmp);
    samples
}

/// A voxel's `n` canonically ordered surface samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaVoxfield {
    samples: Vec<SurfaceSample>,
}

impl SigmaVoxfield {
    /// Builds a voxfield, putting the samples in canonical order.
    pub fn new(samples: Vec<SurfaceSample>) -> Self {
        Self {
            samples: canonical_order(samples),
        }
    }

    /// Wraps samples without reordering; [`SigmaVoxfield::validate`] reports
    /// an order violation.
    pub(crate) fn from_raw(samples: Vec<SurfaceSample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[SurfaceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the positional and color bounds for a voxel of size `voxel_size`.
    pub fn validate(&self, voxel_size: f64) -> Result<(), VoxfieldError> {
        let half = voxel_size / 2.0;
        for (index, s) in self.samples.iter().enumerate() {
            if let Some(&p) = s
                .position
                .iter()
                .find(|&&p| !p.is_finite() || (p as f64).abs() > half)
            {
                return Err(VoxfieldError::OutOfBounds {
                    index,
                    reason: format!("position component {p} outside ±{half}"),
                });
            }
            if let Some(&c) = s
                .color
                .iter()
                .find(|&&c| !c.is_finite() || !(0.0..=1.0).contains(&c))
            {
                return Err(VoxfieldError::OutOfBounds {
                    index,
                    reason: format!("color component {c} outside [0, 1]"),
                });
            }
        }
        if self.samples.windows(2).any(|w| canonical_cmp(&w[0], &w[1]).is_gt()) {
            return Err(VoxfieldError::OutOfBounds {
                index: 0,
                reason: "samples are not in canonical order".into(),
            });
        }
        Ok(())
    }
}

/// Flattened, normalized voxfield features `[x¹,y¹,z¹,r¹,g¹,b¹, …]` in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenVector(pub Vec<f64>);

impl TokenVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Positions scale by `2 / voxel_size`, colors map through `2c - 1`.
pub fn flatten_token(v: &SigmaVoxfield, voxel_size: f64) -> TokenVector {
    let scale = 2.0 / voxel_size;
    let mut out = Vec::with_capacity(6 * v.len());
    for s in v.samples() {
        out.extend(s.position.iter().map(|&p| p as f64 * scale));
        out.extend(s.color.iter().map(|&c| 2.0 * c as f64 - 1.0));
    }
    TokenVector(out)
}

/// Clamps to `[-half, half]` such that the rounded `f32` also stays inside.
fn clamp_position(value: f64, half: f64) -> f32 {
    let v = value.clamp(-half, half) as f32;
    let lo = (-half) as f32;
    let hi = half as f32;
    // f32 rounding of ±half can overshoot the f64 bound.
    if (v as f64) > half {
        hi.next_down()
    } else if (v as f64) < -half {
        lo.next_up()
    } else {
        v
    }
}

/// Inverse of [`flatten_token`]; out-of-range values are clamped and the
/// result is put back into canonical order.
pub fn unflatten_token(
    t: &TokenVector,
    n: usize,
    voxel_size: f64,
) -> Result<SigmaVoxfield, VoxfieldError> {
    if t.dim() != 6 * n {
        return Err(VoxfieldError::DimensionMismatch {
            expected: 6 * n,
            actual: t.dim(),
        });
    }
    let half = voxel_size / 2.0;
    let samples = t
        .0
        .chunks_exact(6)
        .map(|c| {
            let pos = |x: f64| clamp_position(x * half, half);
            let col = |x: f64| (((x + 1.0) / 2.0).clamp(0.0, 1.0)) as f32;
            SurfaceSample::new([pos(c[0]), pos(c[1]), pos(c[2])], [col(c[3]), col(c[4]), col(c[5])])
        })
        .collect();
    Ok(SigmaVoxfield::new(samples))
}

/// One stored voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct GridEntry {
    pub voxfield: SigmaVoxfield,
    pub label: SemanticLabel,
}

/// Sparse world-indexed collection of non-empty voxfields.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxfieldGrid {
    voxel_size: f32,
    n: u32,
    origin: [f32; 3],
    entries: BTreeMap<VoxelIndex, GridEntry>,
}

impl VoxfieldGrid {
    pub fn new(voxel_size: f32, n: u32, origin: [f32; 3]) -> Result<Self, VoxfieldError> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(VoxfieldError::InvalidVoxelSize(voxel_size as f64));
        }
        Ok(Self {
            voxel_size,
            n,
            origin,
            entries: BTreeMap::new(),
        })
    }

    pub fn voxel_size(&self) -> f32 {
        self.voxel_size
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn origin(&self) -> [f32; 3] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts a voxel after checking it against the grid invariants.
    pub fn insert(
        &mut self,
        index: VoxelIndex,
        voxfield: SigmaVoxfield,
        label: SemanticLabel,
    ) -> Result<(), VoxfieldError> {
        if voxfield.len() != self.n as usize {
            return Err(VoxfieldError::SampleCount {
                expected: self.n as usize,
                actual: voxfield.len(),
            });
        }
        voxfield.validate(self.voxel_size as f64)?;
        self.entries.insert(index, GridEntry { voxfield, label });
        Ok(())
    }

    pub fn get(&self, index: &VoxelIndex) -> Option<&GridEntry> {
        self.entries.get(index)
    }

    /// Entries in lexicographic voxel-index order.
    pub fn iter(&self) -> impl Iterator<Item = (&VoxelIndex, &GridEntry)> {
        self.entries.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.entries.keys().copied()
    }

    pub fn voxel_center(&self, index: VoxelIndex) -> [f64; 3] {
        voxel_center(self.origin, self.voxel_size as f64, index)
    }

    /// World position of every stored sample, in entry order.
    pub fn world_samples(&self) -> Vec<([f64; 3], [f32; 3])> {
        let mut out = Vec::with_capacity(self.len() * self.n as usize);
        for (idx, e) in &self.entries {
            let c = self.voxel_center(*idx);
            for s in e.voxfield.samples() {
                out.push((
                    [
                        c[0] + s.position[0] as f64,
                        c[1] + s.position[1] as f64,
                        c[2] + s.position[2] as f64,
                    ],
                    s.color,
                ));
            }
        }
        out
    }
}

pub fn voxel_center(origin: [f32; 3], voxel_size: f64, index: VoxelIndex) -> [f64; 3] {
    let mut c = [0.0; 3];
    for a in 0..3 {
        c[a] = origin[a] as f64 + (index.0[a] as f64 + 0.5) * voxel_size;
    }
    c
}

/// Voxel containing `p` under half-open `[min, max)` boxes.
pub fn voxel_of(origin: [f32; 3], voxel_size: f64, p: [f64; 3]) -> VoxelIndex {
    let mut idx = [0i32; 3];
    for a in 0..3 {
        idx[a] = ((p[a] - origin[a] as f64) / voxel_size).floor() as i32;
    }
    VoxelIndex(idx)
}
