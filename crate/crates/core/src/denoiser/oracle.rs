use micrograd::Tensor;

use crate::diffusion::{Denoiser, DiffusionError, NoiseSchedule};
use crate::voxfield::SemanticLabel;

use super::SEMANTIC_VOCAB;

/// Posterior mean of `x0 ~ N(μ, σ²)` given `x_t`, for one coordinate.
pub fn oracle_gaussian_denoiser(x_t: f64, alpha_bar: f64, mu: f64, var: f64) -> f64 {
    (alpha_bar.sqrt() * var * x_t + (1.0 - alpha_bar) * mu) / (alpha_bar * var + (1.0 - alpha_bar))
}

/// Exact denoiser for tokens drawn independently from `N(μ_s, σ²I)`, where
/// the mean depends on the token's semantic label.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    schedule: NoiseSchedule,
    means: Vec<Vec<f64>>,
    variance: f64,
}

impl GaussianOracle {
    /// Same mean `mu` in every coordinate and for every label.
    pub fn isotropic(schedule: NoiseSchedule, dim: usize, mu: f64, variance: f64) -> Self {
        Self {
            schedule,
            means: vec![vec![mu; dim]; SEMANTIC_VOCAB],
            variance,
        }
    }

    pub fn with_class_mean(mut self, label: SemanticLabel, mean: Vec<f64>) -> Self {
        self.means[label.embedding_index()] = mean;
        self
    }
}

impl Denoiser for GaussianOracle {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        semantics: &[SemanticLabel],
        _centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError> {
        let ab = self.schedule.alpha_bar(t);
        let dim = x_t.cols();
        let mut out = x_t.clone();
        for (r, row) in out.data_mut().chunks_mut(dim.max(1)).enumerate() {
            let mu = &self.means[semantics[r].embedding_index()];
            for (c, v) in row.iter_mut().enumerate() {
                *v = oracle_gaussian_denoiser(*v, ab, mu[c], self.variance);
            }
        }
        Ok(out)
    }
}
