//! Training examples cut from voxfield grids: a random seed voxel and its
//! nearest neighbors, flattened into a token matrix.

use micrograd::Tensor;
use rand::Rng;

use crate::denoiser::TrainingSet;
use crate::spatial::KdTree;
use crate::voxfield::{flatten_token, VoxelIndex, VoxfieldGrid};

/// Local-set sizes used for training, inclusive.
pub const DEFAULT_SET_SIZE: (usize, usize) = (50, 150);

/// Grid voxels in index order with a kd-tree over their centers.
pub struct GridSampler<'a> {
    grid: &'a VoxfieldGrid,
    voxels: Vec<VoxelIndex>,
    tree: KdTree,
}

impl<'a> GridSampler<'a> {
    pub fn new(grid: &'a VoxfieldGrid) -> Self {
        let voxels: Vec<VoxelIndex> = grid.indices().collect();
        let tree = KdTree::new(voxels.iter().map(|&v| grid.voxel_center(v)).collect());
        Self { grid, voxels, tree }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// The `size` voxels nearest to voxel number `seed`, nearest first.
    pub fn local_set(&self, seed: usize, size: usize) -> TrainingSet {
        let vs = self.grid.voxel_size() as f64;
        let c = self.tree.point(seed);
        let picked: Vec<VoxelIndex> = self
            .tree
            .k_nearest(c, size.min(self.voxels.len()), f64::INFINITY)
            .into_iter()
            .map(|n| self.voxels[n.index])
            .collect();
        let mut data = Vec::new();
        let mut semantics = Vec::with_capacity(picked.len());
        let mut centers = Vec::with_capacity(picked.len());
        for v in &picked {
            let e = self.grid.get(v).expect("voxel from grid");
            data.extend(flatten_token(&e.voxfield, vs).0);
            semantics.push(e.label);
            centers.push(self.grid.voxel_center(*v));
        }
        let dim = 6 * self.grid.n() as usize;
        TrainingSet {
            tokens: Tensor::new(vec![picked.len(), dim], data).expect("sized"),
            semantics,
            centers,
        }
    }

    /// A set around a uniformly drawn seed, its size uniform in `sizes`.
    pub fn random_set(&self, sizes: (usize, usize), rng: &mut impl Rng) -> TrainingSet {
        let seed = rng.random_range(0..self.voxels.len());
        let size = rng.random_range(sizes.0..=sizes.1.max(sizes.0));
        self.local_set(seed, size)
    }
}
