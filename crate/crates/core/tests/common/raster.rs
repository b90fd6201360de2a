use rand::Rng;
use sigvox::render::{rotation_from_normal, Camera, RenderOutput, Splat, CUTOFF_SIGMAS, MIN_ALPHA, NEAR_PLANE, SIGMA_FRACTION};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn key(s: &Splat) -> Vec<u64> {
    let mut k: Vec<u64> = s.center.iter().chain(&s.color).map(|x| x.to_bits()).collect();
    k.extend(s.rotation.iter().flatten().map(|x| x.to_bits()));
    k.push(s.radius.to_bits());
    k
}

/// Per-pixel compositor with no binning or bounds: every pixel visits every
/// splat in depth order and intersects its ray with the splat plane.
pub fn brute_force(splats: &[Splat], cam: &Camera, background: [f64; 3]) -> RenderOutput {
    let mut order: Vec<(f64, &Splat)> = splats.iter().map(|s| (cam.to_camera(s.center)[2], s)).collect();
    order.retain(|(z, _)| *z > NEAR_PLANE);
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| key(a.1).cmp(&key(b.1))));
    let (w, h) = (cam.width, cam.height);
    let mut rgb = vec![background; w * h];
    let mut coverage = vec![false; w * h];
    for py in 0..h {
        for px in 0..w {
            let d = [(px as f64 + 0.5 - cam.cx) / cam.fx, (py as f64 + 0.5 - cam.cy) / cam.fy, 1.0];
            let mut c = background;
            for (_, s) in &order {
                let center = cam.to_camera(s.center);
                let n = cam.rotate(s.axis(2));
                let (t1, t2) = (cam.rotate(s.axis(0)), cam.rotate(s.axis(1)));
                let nd = dot(n, d);
                if nd.abs() < 1e-12 {
                    continue;
                }
                let dist = dot(n, center) / nd;
                if dist <= 0.0 {
                    continue;
                }
                let l = [d[0] * dist - center[0], d[1] * dist - center[1], d[2] * dist - center[2]];
                let (a, b) = (dot(l, t1), dot(l, t2));
                let r2 = a * a + b * b;
                let sigma = SIGMA_FRACTION * s.radius;
                let extent = CUTOFF_SIGMAS * sigma;
                if r2 > extent * extent {
                    continue;
                }
                let alpha = (-r2 / (2.0 * sigma * sigma)).exp();
                if alpha <= MIN_ALPHA {
                    continue;
                }
                coverage[py * w + px] = true;
                for k in 0..3 {
                    c[k] = alpha * s.color[k] + (1.0 - alpha) * c[k];
                }
            }
            rgb[py * w + px] = c;
        }
    }
    RenderOutput { width: w, height: h, rgb, coverage }
}

/// Random splats around the origin seen by a camera on a circle, including
/// some behind it, some grazing and some much larger than a pixel.
pub fn random_config(rng: &mut impl Rng, size: usize) -> (Vec<Splat>, Camera) {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let eye = [4.0 * angle.cos(), 4.0 * angle.sin(), rng.random_range(0.5..2.5)];
    let cam = Camera::look_at(eye, [0.0, 0.0, 0.5], [0.0, 0.0, 1.0], rng.random_range(40.0..120.0), size, size)
        .expect("camera");
    let count = rng.random_range(1..300);
    let splats = (0..count)
        .map(|_| {
            let spread = if rng.random_bool(0.1) { 6.0 } else { 1.5 };
            let mut n = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if dot(n, n) < 1e-6 {
                n = [0.0, 0.0, 1.0];
            }
            Splat {
                center: [
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                    rng.random_range(-0.5..2.0),
                ],
                rotation: rotation_from_normal(n),
                radius: if rng.random_bool(0.2) { rng.random_range(0.1..0.8) } else { 0.04 },
                color: [rng.random(), rng.random(), rng.random()],
            }
        })
        .collect();
    (splats, cam)
}
