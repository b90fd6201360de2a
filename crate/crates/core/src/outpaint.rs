//! Distance-guided region extraction and progressive scene generation by
//! spatial outpainting.
//!
//! Regions are K-nearest-neighbor sets around a seed voxel. Each new seed is
//! the uncovered voxel closest to everything already covered, so the scene
//! grows outward and consecutive regions overlap; the overlap supplies the
//! known rows for Repaint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::warn;
use micrograd::Tensor;
use rayon::prelude::*;
use thiserror::Error;

use crate::diffusion::{repaint_sample, sample, Denoiser, DiffusionError, LocalSet, NoiseSchedule, SamplerConfig};
use crate::seed::derive_seed;
use crate::spatial::KdTree;
use crate::voxfield::{
    flatten_token, unflatten_token, voxel_center, SemanticLabel, TokenVector, VoxelIndex, VoxfieldError,
    VoxfieldGrid,
};

#[derive(Debug, Error)]
pub enum OutpaintError {
    #[error("invalid region parameters: {0}")]
    InvalidParams(String),
    #[error("region set is empty")]
    EmptyRegions,
    #[error("voxel {0} is not part of the point set")]
    UnknownVoxel(VoxelIndex),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Voxfield(#[from] VoxfieldError),
}

/// Minimum Euclidean distance from `p` to any member of any region.
pub fn dist_to_regions(p: [f64; 3], regions: &[Vec<[f64; 3]>]) -> Result<f64, OutpaintError> {
    let mut best = f64::INFINITY;
    let mut any = false;
    for q in regions.iter().flatten() {
        any = true;
        best = best.min(dist2(p, *q));
    }
    if !any {
        return Err(OutpaintError::EmptyRegions);
    }
    Ok(best.sqrt())
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// One accepted region of the extraction loop.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanStep {
    pub seed: VoxelIndex,
    /// Distance of the seed to the regions accepted before it.
    pub seed_distance: f64,
    /// Members that were uncovered when the region was accepted.
    pub newly_covered: Vec<VoxelIndex>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionPlan {
    pub k: usize,
    pub t_cov: usize,
    /// Initial regions first, then accepted regions in order. Members are
    /// listed nearest-first from the region seed.
    pub regions: Vec<Vec<VoxelIndex>>,
    pub initial_count: usize,
    /// One entry per accepted (non-initial) region.
    pub steps: Vec<PlanStep>,
    /// Points left uncovered when the loop stopped.
    pub uncovered: Vec<VoxelIndex>,
}

impl RegionPlan {
    /// ASCII export: `region_id: i,j,k; i,j,k; ...` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, r) in self.regions.iter().enumerate() {
            let members: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{id}: {}", members.join("; ")).unwrap();
        }
        out
    }
}

/// Points sorted by voxel index, so that position order is the tie-break order.
struct PointSet {
    keys: Vec<VoxelIndex>,
    tree: KdTree,
    lookup: BTreeMap<VoxelIndex, usize>,
}

impl PointSet {
    fn new(points: &[(VoxelIndex, [f64; 3])]) -> Self {
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        sorted.dedup_by(|a, b| a.0 == b.0);
        let keys: Vec<VoxelIndex> = sorted.iter().map(|p| p.0).collect();
        let lookup = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let tree = KdTree::new(sorted.iter().map(|p| p.1).collect());
        Self { keys, tree, lookup }
    }

    fn knn(&self, i: usize, k: usize) -> Vec<usize> {
        self.tree.k_nearest(self.tree.point(i), k, f64::INFINITY).into_iter().map(|n| n.index).collect()
    }

    fn position(&self, v: VoxelIndex) -> Result<usize, OutpaintError> {
        self.lookup.get(&v).copied().ok_or(OutpaintError::UnknownVoxel(v))
    }
}

/// K nearest neighbors of the voxel closest to the centroid (or of
/// `seed`, when given).
pub fn bootstrap_region(
    points: &[(VoxelIndex, [f64; 3])],
    k: usize,
    seed: Option<VoxelIndex>,
) -> Result<Vec<VoxelIndex>, OutpaintError> {
    if points.is_empty() {
        return Err(OutpaintError::EmptyRegions);
    }
    let ps = PointSet::new(points);
    let start = match seed {
        Some(v) => ps.position(v)?,
        None => {
            let n = ps.keys.len() as f64;
            let mut c = [0.0; 3];
            for i in 0..ps.keys.len() {
                let p = ps.tree.point(i);
                for a in 0..3 {
                    c[a] += p[a] / n;
                }
            }
            ps.tree.nearest(c).expect("non-empty").index
        }
    };
    Ok(ps.knn(start, k).into_iter().map(|i| ps.keys[i]).collect())
}

/// Grows regions from `initial` until every point is covered or the next
/// candidate would cover fewer than `t_cov` new points.
pub fn extract_regions(
    points: &[(VoxelIndex, [f64; 3])],
    k: usize,
    t_cov: usize,
    initial: &[Vec<VoxelIndex>],
) -> Result<RegionPlan, OutpaintError> {
    if t_cov == 0 || k < t_cov {
        return Err(OutpaintError::InvalidParams(format!("need K >= T_cov >= 1, got K={k}, T_cov={t_cov}")));
    }
    if initial.iter().all(|r| r.is_empty()) {
        return Err(OutpaintError::EmptyRegions);
    }
    let ps = PointSet::new(points);
    let n = ps.keys.len();
    let mut covered = vec![false; n];
    let mut regions = Vec::new();
    let mut fresh = Vec::new();
    for r in initial {
        for &v in r {
            let i = ps.position(v)?;
            if !covered[i] {
                covered[i] = true;
                fresh.push(i);
            }
        }
        regions.push(r.clone());
    }
    let mut uncovered: Vec<usize> = (0..n).filter(|&i| !covered[i]).collect();
    let mut d2 = vec![f64::INFINITY; n];
    let mut steps = Vec::new();

    loop {
        update_distances(&ps, &uncovered, &fresh, &mut d2);
        uncovered.retain(|&i| !covered[i]);
        let Some(&seed) = uncovered.iter().min_by(|&&a, &&b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b))) else {
            break;
        };
        let candidate = ps.knn(seed, k);
        let newly: Vec<usize> = candidate.iter().copied().filter(|&i| !covered[i]).collect();
        if newly.len() < t_cov {
            break;
        }
        for &i in &newly {
            covered[i] = true;
        }
        steps.push(PlanStep {
            seed: ps.keys[seed],
            seed_distance: d2[seed].sqrt(),
            newly_covered: newly.iter().map(|&i| ps.keys[i]).collect(),
        });
        regions.push(candidate.iter().map(|&i| ps.keys[i]).collect());
        fresh = newly;
    }

    Ok(RegionPlan {
        k,
        t_cov,
        initial_count: initial.len(),
        regions,
        steps,
        uncovered: uncovered.into_iter().filter(|&i| !covered[i]).map(|i| ps.keys[i]).collect(),
    })
}

/// Lowers the stored squared distance of every uncovered point against the
/// newly covered points only.
fn update_distances(ps: &PointSet, uncovered: &[usize], fresh: &[usize], d2: &mut [f64]) {
    if fresh.is_empty() {
        return;
    }
    let fresh_pts: Vec<[f64; 3]> = fresh.iter().map(|&i| ps.tree.point(i)).collect();
    let updates: Vec<(usize, f64)> = uncovered
        .par_iter()
        .map(|&i| {
            let p = ps.tree.point(i);
            let best = fresh_pts.iter().map(|&q| dist2(p, q)).fold(d2[i], f64::min);
            (i, best)
        })
        .collect();
    for (i, v) in updates {
        d2[i] = v;
    }
}

/// Indices and labels of a scene to be generated.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticSkeleton {
    pub voxel_size: f32,
    pub n: u32,
    pub origin: [f32; 3],
    pub labels: BTreeMap<VoxelIndex, SemanticLabel>,
}

impl SemanticSkeleton {
    pub fn from_grid(grid: &VoxfieldGrid) -> Self {
        Self {
            voxel_size: grid.voxel_size(),
            n: grid.n(),
            origin: grid.origin(),
            labels: grid.iter().map(|(k, e)| (*k, e.label)).collect(),
        }
    }

    pub fn points(&self) -> Vec<(VoxelIndex, [f64; 3])> {
        self.labels
            .keys()
            .map(|&v| (v, voxel_center(self.origin, self.voxel_size as f64, v)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutpaintConfig {
    pub k: usize,
    pub t_cov: usize,
    pub sampler: SamplerConfig,
    /// Overrides the centroid-nearest start voxel.
    pub start_voxel: Option<VoxelIndex>,
}

impl Default for OutpaintConfig {
    fn default() -> Self {
        Self {
            k: 150,
            t_cov: 1,
            sampler: SamplerConfig::default(),
            start_voxel: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationStats {
    pub regions: usize,
    /// Largest number of token rows held by a single diffusion pass.
    pub peak_resident_tokens: usize,
    /// Regions with no target voxel.
    pub skipped: usize,
    pub uncovered: usize,
    /// Voxels written by each generated region.
    pub region_targets: Vec<usize>,
    pub region_times: Vec<Duration>,
}

/// Generates every voxel of `skeleton` region by region. The first region
/// is sampled from noise; later regions are inpainted with their already
/// generated members as known rows.
pub fn progressive_generate<D: Denoiser + ?Sized>(
    skeleton: &SemanticSkeleton,
    denoiser: &D,
    schedule: &NoiseSchedule,
    cfg: &OutpaintConfig,
) -> Result<(VoxfieldGrid, GenerationStats), OutpaintError> {
    let mut grid = VoxfieldGrid::new(skeleton.voxel_size, skeleton.n, skeleton.origin)?;
    let mut stats = GenerationStats::default();
    if skeleton.labels.is_empty() {
        return Ok((grid, stats));
    }
    let vs = skeleton.voxel_size as f64;
    let n = skeleton.n as usize;
    let dim = 6 * n;
    let points = skeleton.points();
    let initial = bootstrap_region(&points, cfg.k, cfg.start_voxel)?;
    let plan = extract_regions(&points, cfg.k, cfg.t_cov, &[initial])?;
    stats.uncovered = plan.uncovered.len();
    if stats.uncovered > 0 {
        warn!("{} voxels left uncovered by the region plan", stats.uncovered);
    }

    let mut generated: BTreeSet<VoxelIndex> = BTreeSet::new();
    for (id, region) in plan.regions.iter().enumerate() {
        let started = Instant::now();
        let semantics: Vec<SemanticLabel> = region.iter().map(|v| skeleton.labels[v]).collect();
        let centers: Vec<[f64; 3]> = region.iter().map(|&v| voxel_center(skeleton.origin, vs, v)).collect();
        let known: Vec<bool> = region.iter().map(|v| generated.contains(v)).collect();
        if known.iter().all(|&k| k) {
            stats.skipped += 1;
            warn!("region {id} has no target voxels; skipped");
            continue;
        }
        let sampler = SamplerConfig {
            seed: derive_seed(cfg.sampler.seed, &[id as u64]),
            ..cfg.sampler
        };
        stats.peak_resident_tokens = stats.peak_resident_tokens.max(region.len());
        let tokens = if known.iter().any(|&k| k) {
            let mut data = vec![0.0; region.len() * dim];
            for (r, v) in region.iter().enumerate() {
                if let Some(e) = grid.get(v) {
                    data[r * dim..(r + 1) * dim].copy_from_slice(&flatten_token(&e.voxfield, vs).0);
                }
            }
            let set = LocalSet {
                indices: region.clone(),
                tokens: Tensor::new(vec![region.len(), dim], data).expect("sized"),
                semantics: semantics.clone(),
                centers,
                known: known.clone(),
            };
            repaint_sample(denoiser, &set, schedule, &sampler)?
        } else {
            sample(denoiser, region, &semantics, &centers, dim, schedule, &sampler)?
        };
        for (r, v) in region.iter().enumerate() {
            if known[r] {
                continue;
            }
            let vox = unflatten_token(&TokenVector(tokens.row(r).to_vec()), n, vs)?;
            grid.insert(*v, vox, semantics[r])?;
            generated.insert(*v);
        }
        stats.regions += 1;
        stats.region_targets.push(known.iter().filter(|&&k| !k).count());
        stats.region_times.push(started.elapsed());
    }
    Ok((grid, stats))
}
