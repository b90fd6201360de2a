use std::collections::BTreeSet;

use rand::Rng;
use sigvox::outpaint::RegionPlan;
use sigvox::voxfield::VoxelIndex;

const STEPS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// A face-connected blob of `count` voxels grown from the origin, with
/// 0.6 m voxel centers.
pub fn random_cloud(count: usize, flat: bool, rng: &mut impl Rng) -> Vec<(VoxelIndex, [f64; 3])> {
    let mut set = BTreeSet::new();
    let mut list = vec![[0i32, 0, 0]];
    set.insert([0i32, 0, 0]);
    while list.len() < count {
        let base = list[rng.random_range(0..list.len())];
        let s = STEPS[rng.random_range(0..if flat { 4 } else { 6 })];
        let next = [base[0] + s[0], base[1] + s[1], base[2] + s[2]];
        if set.insert(next) {
            list.push(next);
        }
    }
    list.into_iter()
        .map(|v| {
            let c = [0, 1, 2].map(|a| (v[a] as f64 + 0.5) * 0.6);
            (VoxelIndex(v), c)
        })
        .collect()
}

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

/// Replays a plan against brute-force recomputation: every seed is the
/// uncovered point nearest to all earlier region members, every region is
/// a K-nearest set of its seed, every accepted region covered at least
/// `t_cov` new points, and all points end up covered.
pub fn verify_plan(points: &[(VoxelIndex, [f64; 3])], plan: &RegionPlan) -> Result<(), String> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let pos = |v: &VoxelIndex| sorted.binary_search_by(|p| p.0.cmp(v)).map_err(|_| format!("{v} not in cloud"));
    let n = sorted.len();
    let expected_size = plan.k.min(n);
    let mut covered = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let absorb = |region: &[VoxelIndex], covered: &mut Vec<bool>, dist: &mut Vec<f64>| -> Result<(), String> {
        for v in region {
            let i = pos(v)?;
            covered[i] = true;
            for j in 0..n {
                dist[j] = dist[j].min(d2(sorted[j].1, sorted[i].1));
            }
        }
        Ok(())
    };
    for r in &plan.regions[..plan.initial_count] {
        absorb(r, &mut covered, &mut dist)?;
    }
    for (step, region) in plan.steps.iter().zip(&plan.regions[plan.initial_count..]) {
        if region.len() != expected_size {
            return Err(format!("region of size {} (expected {expected_size})", region.len()));
        }
        let s = pos(&step.seed)?;
        if covered[s] {
            return Err(format!("seed {} was already covered", step.seed));
        }
        let best = (0..n).filter(|&j| !covered[j]).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
        if dist[s] > best * (1.0 + 1e-12) {
            return Err(format!("seed {} at d²={} but an uncovered point is at d²={best}", step.seed, dist[s]));
        }
        if region.first() != Some(&step.seed) {
            return Err(format!("region does not start at its seed {}", step.seed));
        }
        let members: BTreeSet<usize> = region.iter().map(|v| pos(v)).collect::<Result<_, _>>()?;
        let worst_in = members.iter().map(|&j| d2(sorted[j].1, sorted[s].1)).fold(0.0, f64::max);
        let best_out = (0..n).filter(|j| !members.contains(j)).map(|j| d2(sorted[j].1, sorted[s].1)).fold(f64::INFINITY, f64::min);
        if worst_in > best_out * (1.0 + 1e-12) {
            return Err(format!("region of seed {} is not a nearest-neighbor set", step.seed));
        }
        let newly: BTreeSet<usize> = members.iter().copied().filter(|&j| !covered[j]).collect();
        let reported: BTreeSet<usize> = step.newly_covered.iter().map(|v| pos(v)).collect::<Result<_, _>>()?;
        if newly != reported {
            return Err(format!("newly covered set of seed {} disagrees", step.seed));
        }
        if newly.len() < plan.t_cov {
            return Err(format!("region of seed {} covered only {} new points", step.seed, newly.len()));
        }
        absorb(region, &mut covered, &mut dist)?;
    }
    let left = covered.iter().filter(|c| !**c).count();
    if left != plan.uncovered.len() {
        return Err(format!("{left} points uncovered but plan reports {}", plan.uncovered.len()));
    }
    Ok(())
}
