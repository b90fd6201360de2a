use micrograd::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigvox::denoiser::{loss_and_grads, DenoiserConfig, SigmaDenoiser, TrainDraw, TrainingSet};
use sigvox::diffusion::{q_sample, NoiseSchedule};
use sigvox::voxfield::SemanticLabel;

const H: f64 = 1e-3;

pub struct GradReport {
    pub worst: f64,
    pub checked: usize,
    pub parameters: usize,
}

/// A set of `m` tokens spread over a few meters, mixed labels including NULL.
pub fn random_set(m: usize, token_dim: usize, rng: &mut impl Rng) -> TrainingSet {
    let tokens = Tensor::new(vec![m, token_dim], (0..m * token_dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let semantics = (0..m)
        .map(|i| if i % 4 == 3 { SemanticLabel::NULL } else { SemanticLabel::class(rng.random_range(0..20)).unwrap() })
        .collect();
    let centers = (0..m).map(|_| [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..2.0)]).collect();
    TrainingSet { tokens, semantics, centers }
}

/// Loss through the plain forward pass, independent of the tape gradients.
fn forward_loss(model: &SigmaDenoiser<f64>, set: &TrainingSet, draw: &TrainDraw, sched: &NoiseSchedule) -> f64 {
    let x_t = q_sample(&set.tokens, draw.t, &draw.eps, sched).unwrap();
    let pred = model.forward(&x_t, draw.t, &set.semantics, &set.centers).unwrap();
    let n = pred.len() as f64;
    pred.data().iter().zip(set.tokens.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Compares tape gradients of the training loss against five-point central
/// differences. `per_tensor` limits the entries checked in each parameter
/// tensor (`None` checks every scalar).
pub fn model_gradcheck(config: DenoiserConfig, m: usize, seed: u64, per_tensor: Option<usize>) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SigmaDenoiser::<f64>::new(config, seed).unwrap();
    // leave the identity initialization so every path carries gradient
    model.randomize(0.3, seed + 1);
    let set = random_set(m, config.token_dim, &mut rng);
    let sched = NoiseSchedule::scaled_linear(100).unwrap();
    let eps = Tensor::new(set.tokens.shape().to_vec(), (0..set.tokens.len()).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
    let draw = TrainDraw { t: 37, eps, drop_labels: false };
    let (_, grads) = loss_and_grads(&model, std::slice::from_ref(&set), std::slice::from_ref(&draw), &sched).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut probe = model.clone();
    for (p, g) in grads.iter().enumerate() {
        let len = g.len();
        let entries: Vec<usize> = match per_tensor {
            None => (0..len).collect(),
            Some(k) => (0..k.min(len)).map(|_| rng.random_range(0..len)).collect(),
        };
        for j in entries {
            let base = model.params()[p].data()[j];
            let mut at = |d: f64| {
                probe.params_mut()[p].data_mut()[j] = base + d;
                forward_loss(&probe, &set, &draw, &sched)
            };
            let numeric = (-at(2.0 * H) + 8.0 * at(H) - 8.0 * at(-H) + at(-2.0 * H)) / (12.0 * H);
            probe.params_mut()[p].data_mut()[j] = base;
            let a = g.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    GradReport { worst, checked, parameters: model.parameter_count() }
}
