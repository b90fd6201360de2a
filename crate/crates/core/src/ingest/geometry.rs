//! Small vector helpers, polygon clipping against boxes, exact
//! point-triangle distance and a triangle BVH for nearest-surface queries.

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn triangle_area(t: &[Vec3; 3]) -> f64 {
    0.5 * norm(cross(sub(t[1], t[0]), sub(t[2], t[0])))
}

/// Area of a planar convex polygon.
pub fn polygon_area(poly: &[Vec3]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = [0.0; 3];
    for i in 1..poly.len() - 1 {
        acc = add(acc, cross(sub(poly[i], poly[0]), sub(poly[i + 1], poly[0])));
    }
    0.5 * norm(acc)
}

/// Sutherland–Hodgman clip of a convex polygon against the closed box
/// `[lo, hi]`.
pub fn clip_to_box(poly: &[Vec3], lo: Vec3, hi: Vec3) -> Vec<Vec3> {
    let mut current = poly.to_vec();
    for axis in 0..3 {
        for (bound, keep_below) in [(lo[axis], false), (hi[axis], true)] {
            if current.is_empty() {
                return current;
            }
            let inside = |p: &Vec3| {
                if keep_below {
                    p[axis] <= bound
                } else {
                    p[axis] >= bound
                }
            };
            let mut next = Vec::with_capacity(current.len() + 1);
            for i in 0..current.len() {
                let a = current[i];
                let b = current[(i + 1) % current.len()];
                let (ia, ib) = (inside(&a), inside(&b));
                if ia {
                    next.push(a);
                }
                if ia != ib {
                    let t = (bound - a[axis]) / (b[axis] - a[axis]);
                    let mut p = add(a, scale(sub(b, a), t));
                    p[axis] = bound;
                    next.push(p);
                }
            }
            current = next;
        }
    }
    current
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}

pub fn point_triangle_distance(p: Vec3, t: &[Vec3; 3]) -> f64 {
    norm(sub(p, closest_point_on_triangle(p, t[0], t[1], t[2])))
}

/// Barycentric weights of `p` (assumed in the triangle's plane), clamped to
/// the triangle and renormalized.
pub fn barycentric(p: Vec3, t: &[Vec3; 3]) -> [f64; 3] {
    let v0 = sub(t[1], t[0]);
    let v1 = sub(t[2], t[0]);
    let v2 = sub(p, t[0]);
    let d00 = dot(v0, v0);
    let d01 = dot(v0, v1);
    let d11 = dot(v1, v1);
    let d20 = dot(v2, v0);
    let d21 = dot(v2, v1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return [1.0 / 3.0; 3];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    let mut b = [1.0 - v - w, v, w].map(|x| x.clamp(0.0, 1.0));
    let s: f64 = b.iter().sum();
    for x in &mut b {
        *x /= s;
    }
    b
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn of(t: &[Vec3; 3]) -> Self {
        let mut b = Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        };
        for p in t {
            b.grow(*p);
        }
        b
    }

    fn grow(&mut self, p: Vec3) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(o.lo);
        self.grow(o.hi);
    }

    fn dist2(&self, p: Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let e = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
            d += e * e;
        }
        d
    }
}

#[derive(Clone, Debug)]
enum BvhNode {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding-volume hierarchy over triangles for exact nearest-surface
/// distance queries.
#[derive(Clone, Debug)]
pub struct TriangleBvh {
    triangles: Vec<[Vec3; 3]>,
    nodes: Vec<BvhNode>,
}

const LEAF_SIZE: usize = 4;

impl TriangleBvh {
    pub fn new(mut triangles: Vec<[Vec3; 3]>) -> Self {
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            let n = triangles.len();
            Self::build(&mut triangles, 0, n, &mut nodes);
        }
        Self { triangles, nodes }
    }

    fn build(tris: &mut [[Vec3; 3]], start: usize, end: usize, nodes: &mut Vec<BvhNode>) -> usize {
        let mut bounds = Aabb::of(&tris[start]);
        for t in &tris[start + 1..end] {
            bounds.merge(&Aabb::of(t));
        }
        let slot = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(BvhNode::Leaf { bounds, start, end });
            return slot;
        }
        nodes.push(BvhNode::Leaf { bounds, start, end });
        let extent = sub(bounds.hi, bounds.lo);
        let axis = (0..3).max_by(|&a, &b| extent[a].total_cmp(&extent[b])).unwrap();
        let centroid = |t: &[Vec3; 3]| t[0][axis] + t[1][axis] + t[2][axis];
        let mid = (start + end) / 2;
        tris[start..end].select_nth_unstable_by(mid - start, |a, b| centroid(a).total_cmp(&centroid(b)));
        let left = Self::build(tris, start, mid, nodes);
        let right = Self::build(tris, mid, end, nodes);
        nodes[slot] = BvhNode::Inner { bounds, left, right };
        slot
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Exact distance from `p` to the nearest triangle.
    pub fn distance(&self, p: Vec3) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds().dist2(p) >= best2 {
                continue;
            }
            match node {
                BvhNode::Leaf { start, end, .. } => {
                    for t in &self.triangles[*start..*end] {
                        let q = closest_point_on_triangle(p, t[0], t[1], t[2]);
                        let d = sub(p, q);
                        best2 = best2.min(dot(d, d));
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().dist2(p);
                    let dr = self.nodes[*right].bounds().dist2(p);
                    if dl < dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best2.sqrt()
    }
}
