#![allow(dead_code)]

use micrograd::Tensor;
use sigvox::diffusion::{Denoiser, DiffusionError, NoiseSchedule};
use sigvox::voxfield::SemanticLabel;

/// Exact denoiser for a two-row set whose rows are jointly Gaussian with
/// unit variances and correlation `rho` in every column.
pub struct BivariateOracle {
    pub schedule: NoiseSchedule,
    pub rho: f64,
}

impl Denoiser for BivariateOracle {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        _semantics: &[SemanticLabel],
        _centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError> {
        assert_eq!(x_t.rows(), 2);
        let ab = self.schedule.alpha_bar(t);
        let (a, s2, r) = (ab.sqrt(), 1.0 - ab, self.rho);
        // C = a²Σ + s²I, E[x0 | x_t] = aΣC⁻¹x_t
        let (c11, c12) = (a * a + s2, a * a * r);
        let det = c11 * c11 - c12 * c12;
        let (i11, i12) = (c11 / det, -c12 / det);
        let (m11, m12) = (a * (i11 + r * i12), a * (i12 + r * i11));
        let d = x_t.cols();
        let mut out = x_t.clone();
        for c in 0..d {
            let (x1, x2) = (x_t.get2(0, c), x_t.get2(1, c));
            out.data_mut()[c] = m11 * x1 + m12 * x2;
            out.data_mut()[d + c] = m12 * x1 + m11 * x2;
        }
        Ok(out)
    }
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub mod raster;
pub mod gradcheck;
pub mod regions;
