mod common;

use common::{mean_var, BivariateOracle};
use micrograd::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sigvox::denoiser::GaussianOracle;
use sigvox::diffusion::{
    q_sample, repaint_sample, sample, Denoiser, DiffusionError, LocalSet, NoiseSchedule, RepaintMode, SamplerConfig,
};
use sigvox::voxfield::{SemanticLabel, VoxelIndex};
use std::sync::atomic::{AtomicUsize, Ordering};

fn line_indices(m: usize) -> Vec<VoxelIndex> {
    (0..m as i32).map(|i| VoxelIndex::new(i, 0, 0)).collect()
}

fn line_centers(m: usize) -> Vec<[f64; 3]> {
    (0..m).map(|i| [i as f64 * 0.6, 0.0, 0.0]).collect()
}

fn raw(seed: u64) -> SamplerConfig {
    SamplerConfig {
        guidance_scale: 1.0,
        clamp_output: false,
        seed,
        ..SamplerConfig::default()
    }
}

#[test]
fn forward_process_moments() {
    let s = NoiseSchedule::scaled_linear(100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    for t in [1, 50, 100] {
        let x0 = Tensor::full(&[n], 1.0);
        let eps = Tensor::new(vec![n], (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
        let xt = q_sample(&x0, t, &eps, &s).unwrap();
        let (m, v) = mean_var(xt.data());
        let sd = (1.0 - s.alpha_bar(t)).sqrt();
        assert!((m - s.alpha_bar(t).sqrt()).abs() < 4.0 * sd / (n as f64).sqrt());
        assert!((v / (sd * sd) - 1.0).abs() < 0.05);
    }
}

#[test]
fn oracle_chain_recovers_gaussian_moments() {
    let s = NoiseSchedule::scaled_linear(100).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 10, 0.0, 1.0);
    let m = 500;
    let out = sample(&oracle, &line_indices(m), &vec![SemanticLabel::NULL; m], &line_centers(m), 10, &s, &raw(3)).unwrap();
    let (mean, var) = mean_var(out.data());
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 1.0).abs() < 0.1, "var {var}");
}

#[test]
fn class_conditional_oracle_means() {
    let s = NoiseSchedule::scaled_linear(50).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 4, 0.0, 0.04)
        .with_class_mean(SemanticLabel::ROAD, vec![-0.5; 4])
        .with_class_mean(SemanticLabel::BUILDING, vec![0.5; 4]);
    let m = 400;
    let labels: Vec<SemanticLabel> =
        (0..m).map(|i| if i % 2 == 0 { SemanticLabel::ROAD } else { SemanticLabel::BUILDING }).collect();
    let out = sample(&oracle, &line_indices(m), &labels, &line_centers(m), 4, &s, &raw(5)).unwrap();
    for (label, mu) in [(SemanticLabel::ROAD, -0.5), (SemanticLabel::BUILDING, 0.5)] {
        let vals: Vec<f64> = (0..m).filter(|&r| labels[r] == label).flat_map(|r| out.row(r).to_vec()).collect();
        let (mean, _) = mean_var(&vals);
        let se = (0.04f64 / vals.len() as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se, "{label:?}: {mean}");
    }
}

#[test]
fn sampling_is_reproducible_and_seed_dependent() {
    let s = NoiseSchedule::scaled_linear(20).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 6, 0.0, 1.0);
    let run = |seed| sample(&oracle, &line_indices(5), &[SemanticLabel::NULL; 5], &line_centers(5), 6, &s, &raw(seed)).unwrap();
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn clamped_outputs_stay_in_unit_range() {
    let s = NoiseSchedule::scaled_linear(20).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 6, 0.0, 4.0);
    let cfg = SamplerConfig { clamp_output: true, ..raw(0) };
    let out = sample(&oracle, &line_indices(30), &[SemanticLabel::NULL; 30], &line_centers(30), 6, &s, &cfg).unwrap();
    assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(out.data().iter().any(|v| v.abs() == 1.0));
}

struct Counting<D> {
    inner: D,
    calls: AtomicUsize,
}

impl<D: Denoiser> Denoiser for Counting<D> {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict_x0(x_t, t, semantics, centers)
    }
}

#[test]
fn unit_guidance_skips_the_null_pass() {
    let s = NoiseSchedule::scaled_linear(10).unwrap();
    let oracle = Counting {
        inner: GaussianOracle::isotropic(s.clone(), 2, 0.0, 1.0).with_class_mean(SemanticLabel::ROAD, vec![0.3; 2]),
        calls: AtomicUsize::new(0),
    };
    let labels = [SemanticLabel::ROAD; 3];
    let run = |g: f64| {
        oracle.calls.store(0, Ordering::SeqCst);
        let cfg = SamplerConfig { guidance_scale: g, ..raw(4) };
        let out = sample(&oracle, &line_indices(3), &labels, &line_centers(3), 2, &s, &cfg).unwrap();
        (out, oracle.calls.load(Ordering::SeqCst))
    };
    let (one, calls_one) = run(1.0);
    assert_eq!(calls_one, 10);
    let (_, calls_four) = run(4.0);
    assert_eq!(calls_four, 20);
    // guidance 1 equals purely conditional sampling
    let (plain, _) = {
        oracle.calls.store(0, Ordering::SeqCst);
        let cfg = SamplerConfig { guidance_scale: 1.0, ..raw(4) };
        (sample(&oracle.inner, &line_indices(3), &labels, &line_centers(3), 2, &s, &cfg).unwrap(), 0)
    };
    assert_eq!(one, plain);
}

fn two_token_set(known_value: f64) -> LocalSet {
    LocalSet {
        indices: line_indices(2),
        tokens: Tensor::new(vec![2, 1], vec![known_value, 0.0]).unwrap(),
        semantics: vec![SemanticLabel::NULL; 2],
        centers: line_centers(2),
        known: vec![true, false],
    }
}

#[test]
fn all_known_and_all_unknown_reductions() {
    let s = NoiseSchedule::scaled_linear(20).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 3, 0.0, 1.0);
    let mut set = LocalSet::unknown(line_indices(4), vec![SemanticLabel::NULL; 4], line_centers(4), 3);
    set.tokens = Tensor::new(vec![4, 3], (0..12).map(|v| v as f64 * 0.1 - 0.5).collect()).unwrap();
    let cfg = raw(9);
    let free = repaint_sample(&oracle, &set, &s, &cfg).unwrap();
    let sampled = sample(&oracle, &set.indices, &set.semantics, &set.centers, 3, &s, &cfg).unwrap();
    assert_eq!(free, sampled);
    set.known = vec![true; 4];
    assert_eq!(repaint_sample(&oracle, &set, &s, &cfg).unwrap(), set.tokens);
}

#[test]
fn mismatched_mask_is_an_error() {
    let s = NoiseSchedule::scaled_linear(5).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 1, 0.0, 1.0);
    let mut set = two_token_set(1.0);
    set.known = vec![true];
    assert!(repaint_sample(&oracle, &set, &s, &raw(0)).is_err());
}

fn conditional_mean(mode: RepaintMode, u: usize, runs: u64, known: f64) -> (f64, bool) {
    conditional_mean_t(50, mode, u, runs, known)
}

fn conditional_mean_t(steps: usize, mode: RepaintMode, u: usize, runs: u64, known: f64) -> (f64, bool) {
    let s = NoiseSchedule::scaled_linear(steps).unwrap();
    let oracle = BivariateOracle { schedule: s.clone(), rho: 0.9 };
    let set = two_token_set(known);
    let mut total = 0.0;
    let mut exact = true;
    for seed in 0..runs {
        let cfg = SamplerConfig { resample_count: u, mode, ..raw(seed) };
        let out = repaint_sample(&oracle, &set, &s, &cfg).unwrap();
        exact &= out.data()[0].to_bits() == known.to_bits();
        total += out.data()[1];
    }
    (total / runs as f64, exact)
}

#[test]
fn repaint_matches_bivariate_conditional_mean() {
    for known in [1.0, -0.7] {
        let (mean, exact) = conditional_mean(RepaintMode::Renoise, 10, 1000, known);
        assert!(exact);
        assert!((mean - 0.9 * known).abs() < 0.1, "known {known}: {mean}");
    }
}

#[test]
fn literal_mode_also_keeps_known_rows() {
    let (_, exact) = conditional_mean(RepaintMode::Literal, 2, 20, 0.4);
    assert!(exact);
}

#[test]
fn permuting_rows_permutes_the_sample() {
    let s = NoiseSchedule::scaled_linear(20).unwrap();
    let oracle = GaussianOracle::isotropic(s.clone(), 3, 0.0, 1.0).with_class_mean(SemanticLabel::CAR, vec![0.2; 3]);
    let idx = line_indices(5);
    let labels = [SemanticLabel::CAR, SemanticLabel::NULL, SemanticLabel::CAR, SemanticLabel::ROAD, SemanticLabel::NULL];
    let centers = line_centers(5);
    let cfg = SamplerConfig { guidance_scale: 4.0, ..raw(1) };
    let a = sample(&oracle, &idx, &labels, &centers, 3, &s, &cfg).unwrap();
    let perm = [3, 0, 4, 1, 2];
    let pi: Vec<_> = perm.iter().map(|&p| idx[p]).collect();
    let pl: Vec<_> = perm.iter().map(|&p| labels[p]).collect();
    let pc: Vec<_> = perm.iter().map(|&p| centers[p]).collect();
    let b = sample(&oracle, &pi, &pl, &pc, 3, &s, &cfg).unwrap();
    for (r, &p) in perm.iter().enumerate() {
        assert_eq!(b.row(r), a.row(p));
    }
}

#[test]
fn single_pass_repaint_underestimates_the_dependence() {
    // without resampling the target only sees independently re-noised copies
    // of the known row, which attenuates the conditional mean
    let (u1, _) = conditional_mean(RepaintMode::Renoise, 1, 600, 1.0);
    let (u10, _) = conditional_mean(RepaintMode::Renoise, 10, 600, 1.0);
    assert!(u1 < 0.75 && u10 > u1 + 0.1, "U=1 {u1}, U=10 {u10}");
}
