//! Forward noising, sample-prediction DDPM reverse steps, classifier-free
//! guidance and Repaint-style inpainting over local sets.

mod sampler;
mod schedule;

use micrograd::Tensor;
use thiserror::Error;

pub use sampler::{
    guided_prediction, repaint_sample, sample, token_noise, Denoiser, LocalSet, RepaintMode, SamplerConfig,
};
pub use schedule::NoiseSchedule;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("timestep {t} outside 1..={max}")]
    TimestepOutOfRange { t: usize, max: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("local set is inconsistent: {0}")]
    InvalidSet(String),
    #[error("denoiser failed: {0}")]
    Denoiser(String),
}

fn same_shape(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<(), DiffusionError> {
    if a.shape() != b.shape() {
        return Err(DiffusionError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn zip_map(a: &Tensor<f64>, b: &Tensor<f64>, f: impl Fn(f64, f64) -> f64) -> Tensor<f64> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same length")
}

/// `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`. `t = 0` returns `x0` unchanged.
pub fn q_sample(
    x0: &Tensor<f64>,
    t: usize,
    eps: &Tensor<f64>,
    schedule: &NoiseSchedule,
) -> Result<Tensor<f64>, DiffusionError> {
    schedule.check_t(t, true)?;
    same_shape(x0, eps)?;
    let ab = schedule.alpha_bar(t);
    let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(zip_map(x0, eps, |x, e| a * x + s * e))
}

/// Posterior coefficients `(c0, ct, variance)` of `q(x_{t−1} | x_t, x0)`.
pub fn posterior_coefficients(t: usize, schedule: &NoiseSchedule) -> (f64, f64, f64) {
    let beta = schedule.beta(t);
    let ab = schedule.alpha_bar(t);
    let ab_prev = schedule.alpha_bar(t - 1);
    let c0 = ab_prev.sqrt() * beta / (1.0 - ab);
    let ct = schedule.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
    let var = beta * (1.0 - ab_prev) / (1.0 - ab);
    (c0, ct, var)
}

/// One reverse step from a clean-sample prediction. No noise is added at `t = 1`.
pub fn ddpm_step(
    x_t: &Tensor<f64>,
    x0_hat: &Tensor<f64>,
    t: usize,
    schedule: &NoiseSchedule,
    noise: &Tensor<f64>,
) -> Result<Tensor<f64>, DiffusionError> {
    schedule.check_t(t, false)?;
    same_shape(x_t, x0_hat)?;
    same_shape(x_t, noise)?;
    let (c0, ct, var) = posterior_coefficients(t, schedule);
    let sd = if t == 1 { 0.0 } else { var.sqrt() };
    let data = x_t
        .data()
        .iter()
        .zip(x0_hat.data())
        .zip(noise.data())
        .map(|((&x, &p), &z)| c0 * p + ct * x + sd * z)
        .collect();
    Ok(Tensor::new(x_t.shape().to_vec(), data).expect("same length"))
}

/// `uncond + scale·(cond − uncond)` on clean-sample predictions.
pub fn cfg_combine(cond: &Tensor<f64>, uncond: &Tensor<f64>, scale: f64) -> Result<Tensor<f64>, DiffusionError> {
    same_shape(cond, uncond)?;
    Ok(zip_map(cond, uncond, |c, u| u + scale * (c - u)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(v: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![v.len()], v.to_vec()).unwrap()
    }

    fn quarter_schedule() -> NoiseSchedule {
        // ᾱ_1 = 0.25
        NoiseSchedule::from_betas(vec![0.75]).unwrap()
    }

    #[test]
    fn forward_equation_values() {
        let s = quarter_schedule();
        let x = q_sample(&t1(&[1.0]), 1, &t1(&[1.0]), &s).unwrap();
        assert!((x.data()[0] - (0.5 + 0.75f64.sqrt())).abs() < 1e-15);
        let no_eps = q_sample(&t1(&[2.0, -4.0]), 1, &t1(&[0.0, 0.0]), &s).unwrap();
        assert_eq!(no_eps.data(), &[1.0, -2.0]);
        let no_x = q_sample(&t1(&[0.0]), 1, &t1(&[2.0]), &s).unwrap();
        assert_eq!(no_x.data(), &[2.0 * 0.75f64.sqrt()]);
        assert!(q_sample(&t1(&[0.0]), 2, &t1(&[0.0]), &s).is_err());
        assert_eq!(q_sample(&t1(&[0.3]), 0, &t1(&[9.0]), &s).unwrap().data(), &[0.3]);
    }

    #[test]
    fn last_step_is_deterministic() {
        let s = NoiseSchedule::linear(10, 1e-3, 0.1).unwrap();
        let x = t1(&[0.4, -0.2]);
        let p = t1(&[0.1, 0.0]);
        let a = ddpm_step(&x, &p, 1, &s, &t1(&[5.0, -5.0])).unwrap();
        let b = ddpm_step(&x, &p, 1, &s, &t1(&[0.0, 0.0])).unwrap();
        assert_eq!(a, b);
        // at t=1 the posterior mean is exactly the prediction
        for (got, want) in a.data().iter().zip(p.data()) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(ddpm_step(&x, &p, 0, &s, &x).is_err());
        assert!(ddpm_step(&x, &p, 11, &s, &x).is_err());
    }

    #[test]
    fn tiny_beta_keeps_consistent_prediction() {
        let s = NoiseSchedule::from_betas(vec![0.5, 1e-12]).unwrap();
        let x = t1(&[0.7]);
        let out = ddpm_step(&x, &x, 2, &s, &t1(&[0.0])).unwrap();
        assert!((out.data()[0] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn guidance_combination() {
        let c = t1(&[1.0]);
        let u = t1(&[0.0]);
        assert_eq!(cfg_combine(&c, &u, 4.0).unwrap().data(), &[4.0]);
        assert_eq!(cfg_combine(&c, &u, 1.0).unwrap().data(), &[1.0]);
        assert_eq!(cfg_combine(&c, &u, 0.0).unwrap().data(), &[0.0]);
        assert!(cfg_combine(&c, &t1(&[0.0, 1.0]), 2.0).is_err());
    }
}
