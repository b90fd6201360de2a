use std::cmp::Ordering;

use rayon::prelude::*;

use super::camera::Camera;
use super::splat::Splat;
use super::RenderError;

/// Splats whose center is closer than this (camera z, meters) are culled.
pub const NEAR_PLANE: f64 = 1e-3;
/// Contributions at or below this opacity are ignored.
pub const MIN_ALPHA: f64 = 1.0 / 255.0;
/// Gaussian standard deviation as a fraction of the splat radius.
pub const SIGMA_FRACTION: f64 = 0.5;
/// Support cutoff in standard deviations.
pub const CUTOFF_SIGMAS: f64 = 3.0;

const TILE: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    /// Row-major colors in `[0, 1]`.
    pub rgb: Vec<[f64; 3]>,
    /// True where at least one splat contributed.
    pub coverage: Vec<bool>,
}

impl RenderOutput {
    /// Pixels with no splat contribution.
    pub fn sky_mask(&self) -> Vec<bool> {
        self.coverage.iter().map(|c| !c).collect()
    }

    pub fn rgb8(&self) -> Vec<u8> {
        self.rgb.iter().flatten().map(|&c| to_u8(c)).collect()
    }

    /// 255 where the sky mask is set, 0 elsewhere.
    pub fn sky_mask8(&self) -> Vec<u8> {
        self.coverage.iter().map(|&c| if c { 0 } else { 255 }).collect()
    }
}

pub fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A splat transformed into camera space.
#[derive(Clone, Copy, Debug)]
struct Projected {
    center: [f64; 3],
    t1: [f64; 3],
    t2: [f64; 3],
    normal: [f64; 3],
    two_sigma2: f64,
    cutoff2: f64,
    color: [f64; 3],
    /// Inclusive pixel bounds `[x0, x1, y0, y1]`.
    bounds: [usize; 4],
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Opacity of a splat at one pixel: the pixel ray meets the splat plane at
/// in-plane offset `(a, b)` and `α = exp(−(a² + b²) / 2σ²)` inside `3σ`.
fn alpha_at(p: &Projected, cam: &Camera, px: usize, py: usize) -> Option<f64> {
    let d = [(px as f64 + 0.5 - cam.cx) / cam.fx, (py as f64 + 0.5 - cam.cy) / cam.fy, 1.0];
    let denom = dot(p.normal, d);
    if denom.abs() < 1e-12 {
        return None;
    }
    let s = dot(p.normal, p.center) / denom;
    if s <= 0.0 {
        return None;
    }
    let l = [d[0] * s - p.center[0], d[1] * s - p.center[1], d[2] * s - p.center[2]];
    let a = dot(l, p.t1);
    let b = dot(l, p.t2);
    let r2 = a * a + b * b;
    if r2 > p.cutoff2 {
        return None;
    }
    let alpha = (-r2 / p.two_sigma2).exp();
    (alpha > MIN_ALPHA).then_some(alpha)
}

fn content_key(s: &Splat) -> Vec<u64> {
    s.center
        .iter()
        .chain(&s.color)
        .chain(s.rotation.as_flattened())
        .chain([s.radius].iter())
        .map(|x| x.to_bits())
        .collect()
}

/// Back-to-front: larger depth first, then a total order on content so
/// the result does not depend on input order.
fn draw_order(a: &(f64, &Splat), b: &(f64, &Splat)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| content_key(a.1).cmp(&content_key(b.1)))
}

fn project(s: &Splat, cam: &Camera) -> Option<Projected> {
    let center = cam.to_camera(s.center);
    if center[2] <= NEAR_PLANE {
        return None;
    }
    let sigma = SIGMA_FRACTION * s.radius;
    let extent = CUTOFF_SIGMAS * sigma;
    let (t1, mut t2, mut normal) = (cam.rotate(s.axis(0)), cam.rotate(s.axis(1)), cam.rotate(s.axis(2)));
    // face the camera; flipping two axes keeps the frame right-handed
    if dot(normal, center) > 0.0 {
        normal = normal.map(|x| -x);
        t2 = t2.map(|x| -x);
    }
    let full = [0, cam.width - 1, 0, cam.height - 1];
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut bounded = true;
    for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        let q = [0, 1, 2].map(|k| center[k] + extent * (su * t1[k] + sv * t2[k]));
        if q[2] <= 1e-9 {
            bounded = false;
            break;
        }
        let x = cam.fx * q[0] / q[2] + cam.cx;
        let y = cam.fy * q[1] / q[2] + cam.cy;
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    }
    let bounds = if bounded {
        // pixel p is sampled at p + 0.5; keep one pixel of slack
        let x0 = (lo[0] - 0.5).ceil() - 1.0;
        let x1 = (hi[0] - 0.5).floor() + 1.0;
        let y0 = (lo[1] - 0.5).ceil() - 1.0;
        let y1 = (hi[1] - 0.5).floor() + 1.0;
        if x1 < 0.0 || y1 < 0.0 || x0 > (cam.width - 1) as f64 || y0 > (cam.height - 1) as f64 {
            return None;
        }
        [
            x0.max(0.0) as usize,
            x1.min((cam.width - 1) as f64) as usize,
            y0.max(0.0) as usize,
            y1.min((cam.height - 1) as f64) as usize,
        ]
    } else {
        full
    };
    Some(Projected {
        center,
        t1,
        t2,
        normal,
        two_sigma2: 2.0 * sigma * sigma,
        cutoff2: extent * extent,
        color: s.color,
        bounds,
    })
}

/// Alpha-composites the splats back to front over `background`. Tiles are
/// rendered in parallel; each pixel sees the same global order, so the
/// output is identical to a serial pass.
pub fn render(splats: &[Splat], cam: &Camera, background: [f64; 3]) -> Result<RenderOutput, RenderError> {
    cam.validate()?;
    let (w, h) = (cam.width, cam.height);
    let mut ordered: Vec<(f64, &Splat)> =
        splats.iter().map(|s| (cam.to_camera(s.center)[2], s)).filter(|(z, _)| *z > NEAR_PLANE).collect();
    ordered.sort_by(draw_order);
    let projected: Vec<Projected> = ordered.iter().filter_map(|(_, s)| project(s, cam)).collect();

    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (i, p) in projected.iter().enumerate() {
        let [x0, x1, y0, y1] = p.bounds;
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }

    let tiles: Vec<(usize, Vec<[f64; 3]>, Vec<bool>)> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let (xs, ys) = (tx * TILE, ty * TILE);
            let (xe, ye) = ((xs + TILE).min(w), (ys + TILE).min(h));
            let mut rgb = Vec::with_capacity((xe - xs) * (ye - ys));
            let mut cov = Vec::with_capacity(rgb.capacity());
            for py in ys..ye {
                for px in xs..xe {
                    let mut c = background;
                    let mut hit = false;
                    for &i in bin {
                        let p = &projected[i as usize];
                        let [x0, x1, y0, y1] = p.bounds;
                        if px < x0 || px > x1 || py < y0 || py > y1 {
                            continue;
                        }
                        if let Some(a) = alpha_at(p, cam, px, py) {
                            hit = true;
                            for k in 0..3 {
                                c[k] = a * p.color[k] + (1.0 - a) * c[k];
                            }
                        }
                    }
                    rgb.push(c);
                    cov.push(hit);
                }
            }
            (t, rgb, cov)
        })
        .collect();

    let mut out = RenderOutput {
        width: w,
        height: h,
        rgb: vec![background; w * h],
        coverage: vec![false; w * h],
    };
    for (t, rgb, cov) in tiles {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let (xs, ys) = (tx * TILE, ty * TILE);
        let tw = (xs + TILE).min(w) - xs;
        for (k, (c, m)) in rgb.into_iter().zip(cov).enumerate() {
            let idx = (ys + k / tw) * w + xs + k % tw;
            out.rgb[idx] = c;
            out.coverage[idx] = m;
        }
    }
    Ok(out)
}
