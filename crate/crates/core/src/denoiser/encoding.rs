use std::f64::consts::PI;

use super::DenoiserError;

/// Shortest and longest positional wavelengths in meters.
pub const PE_MIN_WAVELENGTH: f64 = 0.5;
pub const PE_MAX_WAVELENGTH: f64 = 256.0;

/// Angular frequencies for `count` geometrically spaced wavelengths.
pub fn pe_frequencies(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let f = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            let wavelength = PE_MIN_WAVELENGTH * (PE_MAX_WAVELENGTH / PE_MIN_WAVELENGTH).powf(f);
            2.0 * PI / wavelength
        })
        .collect()
}

/// Sinusoidal encoding of a position already made relative to its set's
/// centroid. Layout per axis: `(sin, cos)` pairs from highest to lowest
/// frequency.
pub fn sinusoidal_pe_3d(rel: [f64; 3], pe_dim: usize) -> Result<Vec<f64>, DenoiserError> {
    if pe_dim % 6 != 0 {
        return Err(DenoiserError::Config(format!("pe_dim {pe_dim} is not divisible by 6")));
    }
    let freqs = pe_frequencies(pe_dim / 6);
    let mut out = Vec::with_capacity(pe_dim);
    for x in rel {
        for w in &freqs {
            let (s, c) = (w * x).sin_cos();
            out.push(s);
            out.push(c);
        }
    }
    Ok(out)
}

pub fn centroid(centers: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    if centers.is_empty() {
        return c;
    }
    for p in centers {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    c.map(|v| v / centers.len() as f64)
}

/// Row-major `m × pe_dim` encodings of `centers` relative to their centroid.
pub fn set_positional_encoding(centers: &[[f64; 3]], pe_dim: usize) -> Result<Vec<f64>, DenoiserError> {
    let c = centroid(centers);
    let mut out = Vec::with_capacity(centers.len() * pe_dim);
    for p in centers {
        out.extend(sinusoidal_pe_3d([p[0] - c[0], p[1] - c[1], p[2] - c[2]], pe_dim)?);
    }
    Ok(out)
}

/// `mask[a·m + b]` is true when token `a` may attend to token `b`.
pub fn build_attention_mask(centers: &[[f64; 3]], radius: f64) -> Vec<bool> {
    let m = centers.len();
    let r2 = radius * radius;
    let mut mask = vec![false; m * m];
    for a in 0..m {
        for b in 0..m {
            let d2: f64 = (0..3).map(|k| (centers[a][k] - centers[b][k]).powi(2)).sum();
            mask[a * m + b] = d2 <= r2;
        }
    }
    mask
}

/// Standard transformer sinusoidal embedding of the diffusion step.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let freq = (-(10_000f64.ln()) * k as f64 / half.max(1) as f64).exp();
        let (s, c) = (t as f64 * freq).sin_cos();
        out[k] = s;
        out[half + k] = c;
    }
    out
}
