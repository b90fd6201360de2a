use micrograd::{adam_step, AdamConfig, AdamState, Scalar, Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{DenoiserError, SigmaDenoiser};
use crate::diffusion::{q_sample, NoiseSchedule};
use crate::voxfield::SemanticLabel;

/// One clean local set used as a training example.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub tokens: Tensor<f64>,
    pub semantics: Vec<SemanticLabel>,
    pub centers: Vec<[f64; 3]>,
}

/// Random quantities of one training example: timestep, noise and whether
/// its labels are dropped to NULL.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainDraw {
    pub t: usize,
    pub eps: Tensor<f64>,
    pub drop_labels: bool,
}

pub fn draw_training_noise(
    batch: &[TrainingSet],
    schedule: &NoiseSchedule,
    label_dropout: f64,
    rng: &mut impl Rng,
) -> Vec<TrainDraw> {
    batch
        .iter()
        .map(|set| {
            let t = rng.random_range(1..=schedule.steps());
            let data = (0..set.tokens.len()).map(|_| StandardNormal.sample(rng)).collect();
            let eps = Tensor::new(set.tokens.shape().to_vec(), data).expect("sized");
            let drop_labels = rng.random_bool(label_dropout.clamp(0.0, 1.0));
            TrainDraw { t, eps, drop_labels }
        })
        .collect()
}

fn set_loss<T: Scalar>(
    model: &SigmaDenoiser<T>,
    set: &TrainingSet,
    draw: &TrainDraw,
    schedule: &NoiseSchedule,
) -> Result<(f64, Vec<Tensor<T>>), DenoiserError> {
    let x_t = q_sample(&set.tokens, draw.t, &draw.eps, schedule)?;
    let nulls;
    let semantics = if draw.drop_labels {
        nulls = vec![SemanticLabel::NULL; set.semantics.len()];
        &nulls
    } else {
        &set.semantics
    };
    let mut tape = Tape::new();
    let leaves: Vec<Var> = model.params().iter().map(|p| tape.leaf(p.clone())).collect();
    let pred = model.forward_on_tape(&mut tape, &leaves, &x_t.cast(), draw.t, semantics, &set.centers)?;
    let target = tape.constant(set.tokens.cast());
    let loss = tape.mse(pred, target)?;
    let grads = tape.backward(loss)?;
    let value = tape.value(loss).data()[0].to_f64_lossy();
    Ok((value, leaves.iter().map(|&v| grads.get(v)).collect()))
}

/// Mean per-set MSE between predicted and clean tokens, and its gradient
/// with respect to every parameter. Sets are processed in parallel and
/// reduced in batch order.
pub fn loss_and_grads<T: Scalar>(
    model: &SigmaDenoiser<T>,
    batch: &[TrainingSet],
    draws: &[TrainDraw],
    schedule: &NoiseSchedule,
) -> Result<(f64, Vec<Tensor<T>>), DenoiserError> {
    if batch.is_empty() {
        return Err(DenoiserError::EmptyBatch);
    }
    if draws.len() != batch.len() {
        return Err(DenoiserError::Input(format!("{} draws for {} sets", draws.len(), batch.len())));
    }
    let per_set: Vec<Result<(f64, Vec<Tensor<T>>), DenoiserError>> = batch
        .par_iter()
        .zip(draws.par_iter())
        .map(|(s, d)| set_loss(model, s, d, schedule))
        .collect();
    let inv = 1.0 / batch.len() as f64;
    let inv_t = T::from_f64_lossy(inv);
    let mut total = 0.0;
    let mut acc: Vec<Tensor<T>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    for r in per_set {
        let (loss, grads) = r?;
        total += loss;
        for (a, g) in acc.iter_mut().zip(grads) {
            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                *x = *x + *y * inv_t;
            }
        }
    }
    Ok((total * inv, acc))
}

/// Optimizer state and training hyperparameters.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub adam: AdamConfig,
    pub state: AdamState<T>,
    /// Probability of replacing all labels of a set by NULL.
    pub label_dropout: f64,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: &SigmaDenoiser<T>, adam: AdamConfig, label_dropout: f64) -> Self {
        Self {
            adam,
            state: AdamState::new(model.params()),
            label_dropout,
        }
    }
}

/// One optimization step; returns the batch loss before the update.
pub fn train_step<T: Scalar>(
    model: &mut SigmaDenoiser<T>,
    trainer: &mut Trainer<T>,
    batch: &[TrainingSet],
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<f64, DenoiserError> {
    if batch.is_empty() {
        return Err(DenoiserError::EmptyBatch);
    }
    let draws = draw_training_noise(batch, schedule, trainer.label_dropout, rng);
    let (loss, grads) = loss_and_grads(model, batch, &draws, schedule)?;
    adam_step(model.params_mut(), &grads, &mut trainer.state, &trainer.adam)?;
    Ok(loss)
}
