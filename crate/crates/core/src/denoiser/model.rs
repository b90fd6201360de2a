use micrograd::{Scalar, Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::encoding::{build_attention_mask, set_positional_encoding, timestep_embedding};
use super::{DenoiserConfig, DenoiserError, SEMANTIC_VOCAB};
use crate::diffusion::{Denoiser, DiffusionError};
use crate::seed::rng_for;
use crate::voxfield::SemanticLabel;

/// Checkpoint entry holding the architecture dimensions.
pub const CONFIG_TENSOR: &str = "__config__";

const LN_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    /// Normal with standard deviation `1/√fan_in`.
    Fan(usize),
    Normal(f64),
    Zero,
}

fn layout(cfg: &DenoiserConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.model_dim;
    let mut v = vec![
        ("embed.token.w".to_string(), vec![cfg.token_dim, d], Init::Fan(cfg.token_dim)),
        ("embed.token.b".into(), vec![d], Init::Zero),
        ("embed.pe.w".into(), vec![cfg.pe_dim, d], Init::Fan(cfg.pe_dim)),
        ("embed.semantic".into(), vec![SEMANTIC_VOCAB, d], Init::Normal(0.1)),
        ("time.w1".into(), vec![cfg.timestep_embedding_dim, d], Init::Fan(cfg.timestep_embedding_dim)),
        ("time.b1".into(), vec![d], Init::Zero),
        ("time.w2".into(), vec![d, d], Init::Fan(d)),
        ("time.b2".into(), vec![d], Init::Zero),
    ];
    for l in 0..cfg.layer_count {
        let p = |s: &str| format!("block{l}.{s}");
        v.extend([
            (p("ada.w"), vec![d, 6 * d], Init::Zero),
            (p("ada.b"), vec![6 * d], Init::Zero),
            (p("qkv.w"), vec![d, 3 * d], Init::Fan(d)),
            (p("qkv.b"), vec![3 * d], Init::Zero),
            (p("proj.w"), vec![d, d], Init::Fan(d)),
            (p("proj.b"), vec![d], Init::Zero),
            (p("mlp.w1"), vec![d, 4 * d], Init::Fan(d)),
            (p("mlp.b1"), vec![4 * d], Init::Zero),
            (p("mlp.w2"), vec![4 * d, d], Init::Fan(4 * d)),
            (p("mlp.b2"), vec![d], Init::Zero),
        ]);
    }
    v.extend([
        ("final.ada.w".to_string(), vec![d, 2 * d], Init::Zero),
        ("final.ada.b".into(), vec![2 * d], Init::Zero),
        ("final.w".into(), vec![d, cfg.token_dim], Init::Fan(d)),
        ("final.b".into(), vec![cfg.token_dim], Init::Zero),
    ]);
    v
}

const GLOBAL_PARAMS: usize = 8;
const BLOCK_PARAMS: usize = 10;

/// The denoising transformer with parameters stored in precision `T`.
#[derive(Clone, Debug)]
pub struct SigmaDenoiser<T> {
    config: DenoiserConfig,
    names: Vec<String>,
    params: Vec<Tensor<T>>,
}

struct Leaves<'a> {
    v: &'a [Var],
}

impl Leaves<'_> {
    fn global(&self, i: usize) -> Var {
        self.v[i]
    }

    fn block(&self, l: usize, i: usize) -> Var {
        self.v[GLOBAL_PARAMS + l * BLOCK_PARAMS + i]
    }

    fn last(&self, i: usize) -> Var {
        self.v[self.v.len() - 4 + i]
    }
}

impl<T: Scalar> SigmaDenoiser<T> {
    /// Fresh parameters; adaptive-norm projections start at zero so every
    /// block is initially the identity.
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self, DenoiserError> {
        config.validate()?;
        let mut rng = rng_for(seed, &[0xde_0015e]);
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape, init) in layout(&config) {
            let len: usize = shape.iter().product();
            let data: Vec<T> = match init {
                Init::Zero => vec![T::zero(); len],
                Init::Fan(f) => sample_normal(&mut rng, 1.0 / (f as f64).sqrt(), len),
                Init::Normal(s) => sample_normal(&mut rng, s, len),
            };
            names.push(name);
            params.push(Tensor::new(shape, data)?);
        }
        Ok(Self { config, names, params })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Replaces every parameter (including the zero-initialized ones) with
    /// `N(0, std²)` draws. Used to probe gradients away from the identity
    /// initialization.
    pub fn randomize(&mut self, std: f64, seed: u64) {
        let mut rng = rng_for(seed, &[0x7a4d]);
        for p in &mut self.params {
            let data = sample_normal::<T>(&mut rng, std, p.len());
            p.data_mut().copy_from_slice(&data);
        }
    }

    pub fn cast<U: Scalar>(&self) -> SigmaDenoiser<U> {
        SigmaDenoiser {
            config: self.config,
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Named parameters plus the architecture record, ready for a checkpoint.
    pub fn to_named(&self) -> Vec<(String, Tensor<T>)> {
        let c = &self.config;
        let dims = [
            c.token_dim as f64,
            c.model_dim as f64,
            c.layer_count as f64,
            c.head_count as f64,
            c.head_dim as f64,
            c.timestep_embedding_dim as f64,
            c.pe_dim as f64,
            c.attention_radius,
        ];
        let record = Tensor::new(vec![dims.len()], dims.iter().map(|&x| T::from_f64_lossy(x)).collect())
            .expect("sized");
        let mut out = vec![(CONFIG_TENSOR.to_string(), record)];
        out.extend(self.names.iter().cloned().zip(self.params.iter().cloned()));
        out
    }

    /// Rebuilds a model from checkpoint entries. Entries whose names start
    /// with `__` other than the config record are ignored.
    pub fn from_named(entries: &[(String, Tensor<T>)]) -> Result<Self, DenoiserError> {
        let find = |name: &str| entries.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let rec = find(CONFIG_TENSOR).ok_or_else(|| DenoiserError::Config("checkpoint has no config record".into()))?;
        if rec.len() != 8 {
            return Err(DenoiserError::Config(format!("config record has {} values, expected 8", rec.len())));
        }
        let r: Vec<f64> = rec.data().iter().map(|v| v.to_f64_lossy()).collect();
        let u = |x: f64| x.round().max(0.0) as usize;
        let config = DenoiserConfig {
            token_dim: u(r[0]),
            model_dim: u(r[1]),
            layer_count: u(r[2]),
            head_count: u(r[3]),
            head_dim: u(r[4]),
            timestep_embedding_dim: u(r[5]),
            pe_dim: u(r[6]),
            attention_radius: r[7],
        };
        config.validate()?;
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape, _) in layout(&config) {
            let t = find(&name).ok_or_else(|| DenoiserError::Config(format!("checkpoint lacks parameter {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(DenoiserError::Config(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            names.push(name);
            params.push(t.clone());
        }
        Ok(Self { config, names, params })
    }

    fn check_input(&self, x_t: &Tensor<T>, semantics: &[SemanticLabel], centers: &[[f64; 3]]) -> Result<(), DenoiserError> {
        let shape = x_t.shape();
        if shape.len() != 2 || shape[1] != self.config.token_dim {
            return Err(DenoiserError::Input(format!(
                "token matrix shape {shape:?}, expected [m, {}]",
                self.config.token_dim
            )));
        }
        if semantics.len() != shape[0] || centers.len() != shape[0] {
            return Err(DenoiserError::Input(format!(
                "{} tokens but {} labels and {} centers",
                shape[0],
                semantics.len(),
                centers.len()
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `tape` with parameters `leaves` (in
    /// [`SigmaDenoiser::params`] order) and returns the predicted clean tokens.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        leaves: &[Var],
        x_t: &Tensor<T>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Var, DenoiserError> {
        self.check_input(x_t, semantics, centers)?;
        let c = &self.config;
        let (m, d) = (x_t.rows(), c.model_dim);
        let p = Leaves { v: leaves };
        let cast = |v: Vec<f64>| -> Vec<T> { v.into_iter().map(T::from_f64_lossy).collect() };

        let x = tape.constant(x_t.clone());
        let pe = tape.constant(Tensor::new(vec![m, c.pe_dim], cast(set_positional_encoding(centers, c.pe_dim)?))?);
        let tok = tape.matmul(x, p.global(0))?;
        let tok = tape.add_row(tok, p.global(1))?;
        let pos = tape.matmul(pe, p.global(2))?;
        let idx: Vec<usize> = semantics.iter().map(|s| s.embedding_index()).collect();
        let sem = tape.embed(p.global(3), &idx)?;
        let h = tape.add(tok, pos)?;
        let mut h = tape.add(h, sem)?;

        let temb = tape.constant(Tensor::new(
            vec![1, c.timestep_embedding_dim],
            cast(timestep_embedding(t, c.timestep_embedding_dim)),
        )?);
        let e = tape.matmul(temb, p.global(4))?;
        let e = tape.add_row(e, p.global(5))?;
        let e = tape.silu(e);
        let e = tape.matmul(e, p.global(6))?;
        let e = tape.add_row(e, p.global(7))?;
        let cond = tape.silu(e);

        let fill: Vec<bool> = build_attention_mask(centers, c.attention_radius).into_iter().map(|v| !v).collect();
        let ones = tape.constant(Tensor::ones(&[1, d]));
        let inv_sqrt = T::from_f64_lossy(1.0 / (c.head_dim as f64).sqrt());
        let eps = T::from_f64_lossy(LN_EPS);

        for l in 0..c.layer_count {
            let ada = tape.matmul(cond, p.block(l, 0))?;
            let ada = tape.add_row(ada, p.block(l, 1))?;
            let chunk = |tape: &mut Tape<T>, k: usize| tape.slice_cols(ada, k * d, d);
            let (shift1, scale1, gate1) = (chunk(tape, 0)?, chunk(tape, 1)?, chunk(tape, 2)?);
            let (shift2, scale2, gate2) = (chunk(tape, 3)?, chunk(tape, 4)?, chunk(tape, 5)?);

            let hn = tape.layer_norm(h, eps);
            let hm = modulate(tape, hn, shift1, scale1, ones)?;
            let qkv = tape.matmul(hm, p.block(l, 2))?;
            let qkv = tape.add_row(qkv, p.block(l, 3))?;
            let mut heads = Vec::with_capacity(c.head_count);
            for head in 0..c.head_count {
                let off = head * c.head_dim;
                let q = tape.slice_cols(qkv, off, c.head_dim)?;
                let k = tape.slice_cols(qkv, d + off, c.head_dim)?;
                let v = tape.slice_cols(qkv, 2 * d + off, c.head_dim)?;
                let kt = tape.transpose(k)?;
                let s = tape.matmul(q, kt)?;
                let s = tape.scale(s, inv_sqrt);
                let s = tape.masked_fill(s, &fill, T::neg_infinity())?;
                let a = tape.softmax(s)?;
                heads.push(tape.matmul(a, v)?);
            }
            let att = tape.concat_cols(&heads)?;
            let att = tape.matmul(att, p.block(l, 4))?;
            let att = tape.add_row(att, p.block(l, 5))?;
            let att = tape.mul_row(att, gate1)?;
            h = tape.add(h, att)?;

            let hn = tape.layer_norm(h, eps);
            let hm = modulate(tape, hn, shift2, scale2, ones)?;
            let f = tape.matmul(hm, p.block(l, 6))?;
            let f = tape.add_row(f, p.block(l, 7))?;
            let f = tape.silu(f);
            let f = tape.matmul(f, p.block(l, 8))?;
            let f = tape.add_row(f, p.block(l, 9))?;
            let f = tape.mul_row(f, gate2)?;
            h = tape.add(h, f)?;
        }

        let ada = tape.matmul(cond, p.last(0))?;
        let ada = tape.add_row(ada, p.last(1))?;
        let shift = tape.slice_cols(ada, 0, d)?;
        let scale = tape.slice_cols(ada, d, d)?;
        let hn = tape.layer_norm(h, eps);
        let hm = modulate(tape, hn, shift, scale, ones)?;
        let out = tape.matmul(hm, p.last(2))?;
        Ok(tape.add_row(out, p.last(3))?)
    }

    /// Predicted clean tokens for a noisy token matrix.
    pub fn forward(
        &self,
        x_t: &Tensor<T>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Tensor<T>, DenoiserError> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward_on_tape(&mut tape, &leaves, x_t, t, semantics, centers)?;
        Ok(tape.value(out).clone())
    }
}

/// `x·(1 + scale) + shift` with per-column modulation rows.
fn modulate<T: Scalar>(tape: &mut Tape<T>, x: Var, shift: Var, scale: Var, ones: Var) -> Result<Var, micrograd::Error> {
    let s = tape.add(scale, ones)?;
    let y = tape.mul_row(x, s)?;
    tape.add_row(y, shift)
}

fn sample_normal<T: Scalar>(rng: &mut impl Rng, std: f64, len: usize) -> Vec<T> {
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..len).map(|_| T::from_f64_lossy(dist.sample(rng))).collect()
}

impl<T: Scalar> Denoiser for SigmaDenoiser<T> {
    fn predict_x0(
        &self,
        x_t: &Tensor<f64>,
        t: usize,
        semantics: &[SemanticLabel],
        centers: &[[f64; 3]],
    ) -> Result<Tensor<f64>, DiffusionError> {
        let out = self
            .forward(&x_t.cast(), t, semantics, centers)
            .map_err(|e| DiffusionError::Denoiser(e.to_string()))?;
        Ok(out.cast())
    }
}
