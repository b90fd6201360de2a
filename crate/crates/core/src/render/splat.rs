use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::spatial::KdTree;
use crate::voxfield::VoxfieldGrid;

/// Surface-aligned 2D Gaussian. Columns of `rotation` are the two tangent
/// axes and the normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat {
    pub center: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub radius: f64,
    pub color: [f64; 3],
}

impl Splat {
    pub fn axis(&self, c: usize) -> [f64; 3] {
        [self.rotation[0][c], self.rotation[1][c], self.rotation[2][c]]
    }

    pub fn normal(&self) -> [f64; 3] {
        self.axis(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalEstimate {
    pub normal: [f64; 3],
    /// True when the neighborhood did not span a plane and `+z` was used.
    pub fallback: bool,
}

const FALLBACK: NormalEstimate = NormalEstimate {
    normal: [0.0, 0.0, 1.0],
    fallback: true,
};

/// Smallest-eigenvalue eigenvector of the neighbor covariance.
pub fn estimate_normal(neighbors: &[[f64; 3]]) -> NormalEstimate {
    if neighbors.len() < 3 {
        return FALLBACK;
    }
    let n = neighbors.len() as f64;
    let mut mean = Vector3::zeros();
    for p in neighbors {
        mean += Vector3::from(*p);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in neighbors {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    // rank < 2: the points lie on a line or coincide
    if !(l2 > 1e-18) || l1 <= 1e-9 * l2 {
        return FALLBACK;
    }
    let v = eig.eigenvectors.column(order[0]).normalize();
    if !v.iter().all(|x| x.is_finite()) {
        return FALLBACK;
    }
    NormalEstimate {
        normal: [v[0], v[1], v[2]],
        fallback: false,
    }
}

/// Rotation `[t1 t2 n]` with `det = +1`. The first tangent is the
/// normalized cross product of a fixed helper axis with `n`.
pub fn rotation_from_normal(n: [f64; 3]) -> [[f64; 3]; 3] {
    let n = Vector3::from(n).normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = helper.cross(&n).normalize();
    let t2 = n.cross(&t1);
    let mut r = [[0.0; 3]; 3];
    for (c, col) in [t1, t2, n].iter().enumerate() {
        for row in 0..3 {
            r[row][c] = col[row];
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatParams {
    pub radius: f64,
    /// Neighbors used for each normal (including the point itself).
    pub neighbors: usize,
    pub neighbor_radius: f64,
}

impl Default for SplatParams {
    fn default() -> Self {
        Self {
            radius: 0.04,
            neighbors: 16,
            neighbor_radius: 1.2,
        }
    }
}

/// One splat per grid sample, in grid order. Returns the splats and the
/// number of samples whose normal fell back to `+z`.
pub fn build_splats(grid: &VoxfieldGrid, params: &SplatParams) -> (Vec<Splat>, usize) {
    let samples = grid.world_samples();
    let tree = KdTree::new(samples.iter().map(|s| s.0).collect());
    let out: Vec<(Splat, bool)> = samples
        .par_iter()
        .map(|(p, c)| {
            let nbrs: Vec<[f64; 3]> = tree
                .k_nearest(*p, params.neighbors, params.neighbor_radius)
                .into_iter()
                .map(|n| tree.point(n.index))
                .collect();
            let est = estimate_normal(&nbrs);
            let splat = Splat {
                center: *p,
                rotation: rotation_from_normal(est.normal),
                radius: params.radius,
                color: c.map(|x| x as f64),
            };
            (splat, est.fallback)
        })
        .collect();
    let fallbacks = out.iter().filter(|s| s.1).count();
    (out.into_iter().map(|s| s.0).collect(), fallbacks)
}
