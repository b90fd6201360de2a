//! Static 3-d tree for nearest-neighbor queries over point sets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug)]
struct Node {
    point: usize,
    axis: u8,
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

/// k-d tree over a fixed list of points. Query results report indices into
/// that list; ties in distance resolve to the smaller index.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build(&points, &mut order, 0, &mut nodes);
        Self { points, nodes, root }
    }

    fn build(points: &[[f64; 3]], idx: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> u32 {
        if idx.is_empty() {
            return NONE;
        }
        // split on the axis of largest spread
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in idx.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(depth % 3);
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let point = idx[mid];
        let slot = nodes.len();
        nodes.push(Node {
            point,
            axis: axis as u8,
            left: NONE,
            right: NONE,
        });
        let (left, rest) = idx.split_at_mut(mid);
        let left = Self::build(points, left, depth + 1, nodes);
        let right = Self::build(points, &mut rest[1..], depth + 1, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot as u32
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }

    pub fn nearest(&self, q: [f64; 3]) -> Option<Neighbor> {
        self.k_nearest(q, 1, f64::INFINITY).into_iter().next()
    }

    /// Up to `k` nearest points within `max_dist` (inclusive), sorted by
    /// distance then index.
    pub fn k_nearest(&self, q: [f64; 3], k: usize, max_dist: f64) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        let limit2 = max_dist * max_dist;
        self.search(self.root, &q, k, limit2, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    fn search(&self, node: u32, q: &[f64; 3], k: usize, limit2: f64, heap: &mut BinaryHeap<Neighbor>) {
        if node == NONE {
            return;
        }
        let n = self.nodes[node as usize];
        let p = &self.points[n.point];
        let cand = Neighbor {
            index: n.point,
            dist2: dist2(p, q),
        };
        if cand.dist2 <= limit2 {
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("non-empty heap") {
                heap.pop();
                heap.push(cand);
            }
        }
        let axis = n.axis as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, q, k, limit2, heap);
        let plane2 = diff * diff;
        let bound = if heap.len() < k {
            limit2
        } else {
            heap.peek().map_or(limit2, |w| w.dist2.min(limit2))
        };
        // equal-distance points across the plane can still win the index tie-break
        if plane2 <= bound {
            self.search(far, q, k, limit2, heap);
        }
    }
}
