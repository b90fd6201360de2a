use micrograd::Tensor;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{cfg_combine, ddpm_step, q_sample, DiffusionError, NoiseSchedule};
use crate::seed::{rng_for, voxel_parts};
use crate::voxfield::{SemanticLabel, VoxelIndex};

/// A clean-sample predictor `f(x_t, t, S) → x̂0`.
pub trait Denoiser: Sync {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError> {
        (**self).predict_x0(x_t, t, semantics, centers)
    }
}

/// A neighborhood of voxels processed by one diffusion pass. Rows of
/// `tokens` whose `known` flag is false are ignored on input.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSet {
    pub indices: Vec<VoxelIndex>,
    pub tokens: Tensor<f64>,
    pub semantics: Vec<SemanticLabel>,
    pub centers: Vec<[f64; 3]>,
    pub known: Vec<bool>,
}

impl LocalSet {
    /// A set with every row unknown and zero tokens of width `dim`.
    pub fn unknown(indices: Vec<VoxelIndex>, semantics: Vec<SemanticLabel>, centers: Vec<[f64; 3]>, dim: usize) -> Self {
        let m = indices.len();
        Self {
            indices,
            tokens: Tensor::zeros(&[m, dim]),
            semantics,
            centers,
            known: vec![false; m],
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let m = self.indices.len();
        let shape = self.tokens.shape();
        if shape.len() != 2 || shape[0] != m {
            return Err(DiffusionError::ShapeMismatch {
                left: shape.to_vec(),
                right: vec![m, self.tokens.last_dim()],
            });
        }
        if self.semantics.len() != m || self.centers.len() != m || self.known.len() != m {
            return Err(DiffusionError::InvalidSet(format!(
                "{m} indices but {} labels, {} centers, {} mask entries",
                self.semantics.len(),
                self.centers.len(),
                self.known.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RepaintMode {
    /// Known rows are re-noised to the level of the next step.
    #[default]
    Renoise,
    /// Known rows are overwritten with their clean values at every step.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub guidance_scale: f64,
    /// Resampling count U; `U − 1` jump-backs follow every reverse step.
    pub resample_count: usize,
    pub mode: RepaintMode,
    /// Clamp generated rows to `[-1, 1]` at the end.
    pub clamp_output: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            guidance_scale: 4.0,
            resample_count: 1,
            mode: RepaintMode::Renoise,
            clamp_output: true,
            seed: 0,
        }
    }
}

const TAG_INIT: u64 = 1;
const TAG_STEP: u64 = 2;
const TAG_KNOWN: u64 = 3;
const TAG_JUMP: u64 = 4;

/// Standard normal noise for one token, keyed by its voxel so that values
/// do not depend on row order or thread count.
pub fn token_noise(seed: u64, voxel: VoxelIndex, t: usize, u: usize, tag: u64, dim: usize) -> Vec<f64> {
    let [i, j, k] = voxel_parts(voxel);
    let mut rng = rng_for(seed, &[i, j, k, t as u64, u as u64, tag]);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn noise_matrix(seed: u64, indices: &[VoxelIndex], t: usize, u: usize, tag: u64, dim: usize) -> Tensor<f64> {
    let mut data = vec![0.0; indices.len() * dim];
    if dim > 0 {
        data.par_chunks_mut(dim).zip(indices.par_iter()).for_each(|(row, &v)| {
            row.copy_from_slice(&token_noise(seed, v, t, u, tag, dim));
        });
    }
    Tensor::new(vec![indices.len(), dim], data).expect("sized")
}

/// Conditional prediction, combined with a NULL-label pass unless guidance
/// is 1 or every label is already NULL.
pub fn guided_prediction<D: Denoiser + ?Sized>(
    denoiser: &D,
    x_t: &Tensor<f64>,
    t: usize,
    semantics: &[SemanticLabel],
    centers: &[[f64; 3]],
    guidance_scale: f64,
) -> Result<Tensor<f64>, DiffusionError> {
    let needs_uncond = guidance_scale != 1.0 && semantics.iter().any(|s| !s.is_null());
    if !needs_uncond {
        return denoiser.predict_x0(x_t, t, semantics, centers);
    }
    let nulls = vec![SemanticLabel::NULL; semantics.len()];
    let (cond, uncond) = rayon::join(
        || denoiser.predict_x0(x_t, t, semantics, centers),
        || denoiser.predict_x0(x_t, t, &nulls, centers),
    );
    cfg_combine(&cond?, &uncond?, guidance_scale)
}

fn check_prediction(pred: &Tensor<f64>, x: &Tensor<f64>) -> Result<(), DiffusionError> {
    if pred.shape() != x.shape() {
        return Err(DiffusionError::Denoiser(format!(
            "prediction shape {:?} differs from input {:?}",
            pred.shape(),
            x.shape()
        )));
    }
    Ok(())
}

fn overwrite_known(x: &mut Tensor<f64>, source: &Tensor<f64>, known: &[bool]) {
    let dim = x.cols();
    if dim == 0 {
        return;
    }
    for (r, (dst, src)) in x.data_mut().chunks_mut(dim).zip(source.data().chunks(dim)).enumerate() {
        if known[r] {
            dst.copy_from_slice(src);
        }
    }
}

/// Completes the unknown rows of `set`; known rows come back bit-identical.
pub fn repaint_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    set: &LocalSet,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Tensor<f64>, DiffusionError> {
    set.validate()?;
    let dim = set.dim();
    let t_max = schedule.steps();
    let u_max = cfg.resample_count.max(1);
    let known_x0 = &set.tokens;
    let has_known = set.known.iter().any(|&k| k);
    if set.known.iter().all(|&k| k) {
        return Ok(known_x0.clone());
    }

    let mut x = noise_matrix(cfg.seed, &set.indices, t_max, 0, TAG_INIT, dim);
    if has_known {
        let start = match cfg.mode {
            RepaintMode::Renoise => q_sample(known_x0, t_max, &x, schedule)?,
            RepaintMode::Literal => known_x0.clone(),
        };
        overwrite_known(&mut x, &start, &set.known);
    }

    for t in (1..=t_max).rev() {
        for u in 0..u_max {
            let pred = guided_prediction(denoiser, &x, t, &set.semantics, &set.centers, cfg.guidance_scale)?;
            check_prediction(&pred, &x)?;
            let noise = noise_matrix(cfg.seed, &set.indices, t, u, TAG_STEP, dim);
            let mut prev = ddpm_step(&x, &pred, t, schedule, &noise)?;
            if has_known {
                let known_prev = match cfg.mode {
                    RepaintMode::Renoise => {
                        let eps = noise_matrix(cfg.seed, &set.indices, t, u, TAG_KNOWN, dim);
                        q_sample(known_x0, t - 1, &eps, schedule)?
                    }
                    RepaintMode::Literal => known_x0.clone(),
                };
                overwrite_known(&mut prev, &known_prev, &set.known);
            }
            if u + 1 < u_max && t > 1 {
                // jump back: x_t ~ q(x_t | x_{t−1})
                let eps = noise_matrix(cfg.seed, &set.indices, t, u, TAG_JUMP, dim);
                let (a, s) = (schedule.alpha(t).sqrt(), schedule.beta(t).sqrt());
                let data = prev.data().iter().zip(eps.data()).map(|(&p, &e)| a * p + s * e).collect();
                x = Tensor::new(prev.shape().to_vec(), data).expect("same length");
            } else {
                x = prev;
                break;
            }
        }
    }

    if cfg.clamp_output {
        let dim = dim.max(1);
        for (row, &k) in x.data_mut().chunks_mut(dim).zip(&set.known) {
            if !k {
                row.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
            }
        }
    }
    overwrite_known(&mut x, known_x0, &set.known);
    Ok(x)
}

/// Unconditional-start sampling of every row of `set`.
pub fn sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    indices: &[VoxelIndex],
    semantics: &[SemanticLabel],
    centers: &[[f64; 3]],
    dim: usize,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Tensor<f64>, DiffusionError> {
    let set = LocalSet::unknown(indices.to_vec(), semantics.to_vec(), centers.to_vec(), dim);
    repaint_sample(denoiser, &set, schedule, cfg)
}
