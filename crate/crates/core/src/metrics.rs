//! Distribution distance between token corpora.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("each corpus needs at least two tokens, got {0} and {1}")]
    TooFew(usize, usize),
    #[error("token length {found} differs from {expected}")]
    DimMismatch { expected: usize, found: usize },
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of all pairwise Euclidean distances in the pooled corpus.
pub fn median_bandwidth(tokens: &[&[f64]]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(tokens.len() * tokens.len().saturating_sub(1) / 2);
    for i in 0..tokens.len() {
        for j in i + 1..tokens.len() {
            d.push(dist2(tokens[i], tokens[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmdReport {
    /// Unbiased estimate of the squared MMD.
    pub mmd2: f64,
    pub bandwidth: f64,
}

/// Unbiased squared MMD with kernel `exp(−|x − y|² / 2h²)`, `h` the median
/// pairwise distance of the pooled tokens.
pub fn token_mmd(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<MmdReport, MetricError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::TooFew(a.len(), b.len()));
    }
    let dim = a[0].len();
    if let Some(t) = a.iter().chain(b).find(|t| t.len() != dim) {
        return Err(MetricError::DimMismatch { expected: dim, found: t.len() });
    }
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|t| t.as_slice()).collect();
    let h = median_bandwidth(&pooled);
    let k = |x: &[f64], y: &[f64]| (-dist2(x, y) / (2.0 * h * h)).exp();
    let within = |s: &[Vec<f64>]| {
        let mut total = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                total += 2.0 * k(&s[i], &s[j]);
            }
        }
        total / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for x in a {
        for y in b {
            cross += k(x, y);
        }
    }
    cross /= (a.len() * b.len()) as f64;
    Ok(MmdReport {
        mmd2: within(a) + within(b) - 2.0 * cross,
        bandwidth: h,
    })
}
