use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use micrograd::{read_checkpoint, write_checkpoint, AdamConfig, Scalar, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use sigvox::corpus::GridSampler;
use sigvox::denoiser::{train_step, DenoiserConfig, SigmaDenoiser, Trainer, TrainingSet};
use sigvox::diffusion::{NoiseSchedule, RepaintMode, SamplerConfig};
use sigvox::ingest::{build_grid, chamfer_distance, load_mesh, save_mesh, synth_scene, GridParams, IngestError, SceneSpec};
use sigvox::metrics::token_mmd;
use sigvox::outpaint::{progressive_generate, OutpaintConfig, SemanticSkeleton};
use sigvox::render::{build_splats, parse_trajectory, render, write_image, RenderError, SplatParams};
use sigvox::seed::rng_for;
use sigvox::voxfield::{flatten_token, VoxelIndex, VoxfieldGrid};
use sigvox::vxf::{read_grid, write_grid};

use crate::config::Config;
use crate::error::{data, CliError};

/// Checkpoint entry holding `[T, beta_start, beta_end]`.
pub const SCHEDULE_TENSOR: &str = "__schedule__";

const RNG_SYNTH: u64 = 1;
const RNG_CONVERT: u64 = 2;
const RNG_TRAIN: u64 = 3;
const RNG_INIT: u64 = 4;
const RNG_GENERATE: u64 = 5;
const RNG_EVAL: u64 = 6;

/// Ordered `key=value` pairs printed as the final `OK ...` line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    fn new(command: &str) -> Self {
        Summary(vec![("command".into(), command.into())])
    }

    fn add(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OK")?;
        for (k, v) in &self.0 {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn load_vxf(path: &str) -> Result<VoxfieldGrid, CliError> {
    read_grid(path).map_err(data(path))
}

fn load_corpus(cfg: &Config, key: &str) -> Result<Vec<VoxfieldGrid>, CliError> {
    let paths: Vec<String> = cfg.list(key, &[])?;
    cfg.ensure(!paths.is_empty(), key, "needs at least one VXF path")?;
    let grids: Vec<VoxfieldGrid> = paths.iter().map(|p| load_vxf(p)).collect::<Result<_, _>>()?;
    let (vs, n) = (grids[0].voxel_size(), grids[0].n());
    for (p, g) in paths.iter().zip(&grids) {
        if g.voxel_size() != vs || g.n() != n {
            return Err(CliError::Data(format!(
                "{p}: voxel size {} and n {} differ from the first grid ({vs}, {n})",
                g.voxel_size(),
                g.n()
            )));
        }
        if g.is_empty() {
            return Err(CliError::Data(format!("{p}: grid is empty")));
        }
    }
    Ok(grids)
}

fn ingest_error(context: &str, e: IngestError) -> CliError {
    match e {
        IngestError::InvalidSpec(m) => CliError::Config(m),
        other => CliError::Data(format!("{context}: {other}")),
    }
}

pub const SYNTH_KEYS: &[&str] = &[
    "out",
    "extent_x",
    "extent_y",
    "extent_z",
    "road_width",
    "lane_stripe_period",
    "building_count",
    "pole_count",
];

pub fn synth(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(SYNTH_KEYS)?;
    let out = cfg.required("out")?;
    let d = SceneSpec::default();
    let spec = SceneSpec {
        extent: [
            cfg.get("extent_x", d.extent[0])?,
            cfg.get("extent_y", d.extent[1])?,
            cfg.get("extent_z", d.extent[2])?,
        ],
        road_width: cfg.get("road_width", d.road_width)?,
        lane_stripe_period: cfg.get("lane_stripe_period", d.lane_stripe_period)?,
        building_count: cfg.get("building_count", d.building_count)?,
        pole_count: cfg.get("pole_count", d.pole_count)?,
        rng_seed: sigvox::seed::derive_seed(seed, &[RNG_SYNTH]),
    };
    let mesh = synth_scene(&spec).map_err(|e| ingest_error("synth", e))?;
    save_mesh(&mesh, out).map_err(|e| ingest_error(out, e))?;
    Ok(Summary::new("synth")
        .add("seed", seed)
        .add("vertices", mesh.vertices.len())
        .add("faces", mesh.triangles.len())
        .add("out", out))
}

pub const CONVERT_KEYS: &[&str] = &["mesh", "out", "voxel_size", "n"];

fn grid_params(cfg: &Config, seed: u64) -> Result<GridParams, CliError> {
    let vs: f64 = cfg.get("voxel_size", 0.6)?;
    cfg.ensure(vs.is_finite() && vs > 0.0, "voxel_size", "must be > 0")?;
    let n: usize = cfg.get("n", 20)?;
    cfg.ensure(n > 0, "n", "must be > 0")?;
    Ok(GridParams::new(vs, n, sigvox::seed::derive_seed(seed, &[RNG_CONVERT])))
}

pub fn convert(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(CONVERT_KEYS)?;
    let (mesh_path, out) = (cfg.required("mesh")?, cfg.required("out")?);
    let params = grid_params(cfg, seed)?;
    let mesh = load_mesh(mesh_path).map_err(|e| ingest_error(mesh_path, e))?;
    let grid = build_grid(&mesh, &params).map_err(|e| ingest_error(mesh_path, e))?;
    write_grid(&grid, out).map_err(data(out))?;
    Ok(Summary::new("convert")
        .add("seed", seed)
        .add("voxels", grid.len())
        .add("n", params.n)
        .add("voxel_size", params.voxel_size)
        .add("out", out))
}

pub const TRAIN_KEYS: &[&str] = &[
    "corpus",
    "out",
    "loss_csv",
    "steps",
    "batch",
    "set_min",
    "set_max",
    "lr",
    "label_dropout",
    "timesteps",
    "beta_start",
    "beta_end",
    "model_dim",
    "layers",
    "heads",
    "pe_dim",
    "time_dim",
    "attention_radius",
    "precision",
];

/// Linear betas; the endpoints default to the 1000-step range rescaled to
/// `timesteps`.
fn schedule_from(cfg: &Config) -> Result<NoiseSchedule, CliError> {
    let t: usize = cfg.get("timesteps", 100)?;
    cfg.ensure(t > 0, "timesteps", "must be > 0")?;
    let scaled = NoiseSchedule::scaled_linear(t).map_err(|e| CliError::Config(format!("schedule: {e}")))?;
    let b0: f64 = cfg.get("beta_start", scaled.beta(1))?;
    let b1: f64 = cfg.get("beta_end", scaled.beta(t))?;
    NoiseSchedule::linear(t, b0, b1).map_err(|e| CliError::Config(format!("schedule: {e}")))
}

fn denoiser_config(cfg: &Config, n: usize) -> Result<DenoiserConfig, CliError> {
    let d = DenoiserConfig::desk(n);
    let model_dim: usize = cfg.get("model_dim", d.model_dim)?;
    let heads: usize = cfg.get("heads", d.head_count)?;
    cfg.ensure(heads > 0 && model_dim % heads == 0, "heads", "must divide model_dim")?;
    let c = DenoiserConfig {
        token_dim: 6 * n,
        model_dim,
        layer_count: cfg.get("layers", d.layer_count)?,
        head_count: heads,
        head_dim: model_dim / heads,
        timestep_embedding_dim: cfg.get("time_dim", d.timestep_embedding_dim)?,
        pe_dim: cfg.get("pe_dim", d.pe_dim)?,
        attention_radius: cfg.get("attention_radius", d.attention_radius)?,
    };
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

struct TrainOutcome {
    losses: Vec<f64>,
    named: Vec<(String, Tensor<f64>)>,
}

fn run_training<T: Scalar>(
    config: DenoiserConfig,
    samplers: &[GridSampler<'_>],
    schedule: &NoiseSchedule,
    steps: usize,
    batch: usize,
    sizes: (usize, usize),
    adam: AdamConfig,
    dropout: f64,
    seed: u64,
) -> Result<TrainOutcome, CliError> {
    let init_seed = sigvox::seed::derive_seed(seed, &[RNG_INIT]);
    let mut model = SigmaDenoiser::<T>::new(config, init_seed).map_err(|e| CliError::Config(e.to_string()))?;
    let mut trainer = Trainer::new(&model, adam, dropout);
    let mut rng = rng_for(seed, &[RNG_TRAIN]);
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let sets: Vec<TrainingSet> = (0..batch)
            .map(|_| {
                let g = rng.random_range(0..samplers.len());
                samplers[g].random_set(sizes, &mut rng)
            })
            .collect();
        let loss = train_step(&mut model, &mut trainer, &sets, schedule, &mut rng)
            .map_err(|e| CliError::Data(format!("training step {step}: {e}")))?;
        if !loss.is_finite() {
            return Err(CliError::Numeric(format!("loss became {loss} at step {step}")));
        }
        if step % 50 == 0 {
            info!("step {step} loss {loss:.6}");
        }
        losses.push(loss);
    }
    let named = model.cast::<f64>().to_named();
    if named.iter().any(|(_, t)| t.data().iter().any(|v| !v.is_finite())) {
        return Err(CliError::Numeric("parameters became non-finite".into()));
    }
    Ok(TrainOutcome { losses, named })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn train(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(TRAIN_KEYS)?;
    let out = cfg.required("out")?;
    let loss_csv = cfg.get_str("loss_csv").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(format!("{out}.loss.csv")));
    let grids = load_corpus(cfg, "corpus")?;
    let steps: usize = cfg.get("steps", 200)?;
    cfg.ensure(steps > 0, "steps", "must be > 0")?;
    let batch: usize = cfg.get("batch", 4)?;
    cfg.ensure(batch > 0, "batch", "must be > 0")?;
    let sizes = (cfg.get("set_min", 50usize)?, cfg.get("set_max", 150usize)?);
    cfg.ensure(sizes.0 > 0 && sizes.0 <= sizes.1, "set_min", "need 0 < set_min <= set_max")?;
    let adam = AdamConfig {
        lr: cfg.get("lr", AdamConfig::default().lr)?,
        ..AdamConfig::default()
    };
    cfg.ensure(adam.lr.is_finite() && adam.lr > 0.0, "lr", "must be > 0")?;
    let dropout: f64 = cfg.get("label_dropout", 0.1)?;
    cfg.ensure((0.0..=1.0).contains(&dropout), "label_dropout", "must lie in [0, 1]")?;
    let schedule = schedule_from(cfg)?;
    let n = grids[0].n() as usize;
    let config = denoiser_config(cfg, n)?;
    let samplers: Vec<GridSampler> = grids.iter().map(GridSampler::new).collect();
    let precision = cfg.get_str("precision").unwrap_or("f32");
    let outcome = match precision {
        "f32" => run_training::<f32>(config, &samplers, &schedule, steps, batch, sizes, adam, dropout, seed)?,
        "f64" => run_training::<f64>(config, &samplers, &schedule, steps, batch, sizes, adam, dropout, seed)?,
        other => return Err(cfg.ensure(false, "precision", &format!("{other:?} is not f32 or f64")).unwrap_err()),
    };

    let mut named = outcome.named;
    let sched_record = Tensor::new(
        vec![3],
        vec![schedule.steps() as f64, schedule.beta(1), schedule.beta(schedule.steps())],
    )
    .expect("sized");
    named.push((SCHEDULE_TENSOR.to_string(), sched_record));
    let file = File::create(out).map_err(data(out))?;
    write_checkpoint(BufWriter::new(file), &named).map_err(data(out))?;

    let mut w = csv::Writer::from_path(&loss_csv).map_err(data(&loss_csv.display().to_string()))?;
    w.write_record(["step", "loss"]).map_err(data("loss csv"))?;
    for (i, l) in outcome.losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:.9}")]).map_err(data("loss csv"))?;
    }
    w.flush().map_err(data("loss csv"))?;

    let window = outcome.losses.len().min(10);
    Ok(Summary::new("train")
        .add("seed", seed)
        .add("steps", steps)
        .add("parameters", named.iter().filter(|(k, _)| !k.starts_with("__")).map(|(_, t)| t.len()).sum::<usize>())
        .add("initial_loss", format!("{:.6}", mean(&outcome.losses[..window])))
        .add("final_loss", format!("{:.6}", mean(&outcome.losses[outcome.losses.len() - window..])))
        .add("out", out)
        .add("loss_csv", loss_csv.display()))
}

/// Reads a model and its noise schedule from a checkpoint file.
pub fn load_checkpoint(path: &str) -> Result<(SigmaDenoiser<f32>, NoiseSchedule), CliError> {
    let file = File::open(path).map_err(data(path))?;
    let entries: Vec<(String, Tensor<f32>)> = read_checkpoint(std::io::BufReader::new(file)).map_err(data(path))?;
    let model = SigmaDenoiser::from_named(&entries).map_err(data(path))?;
    let rec = entries
        .iter()
        .find(|(k, _)| k == SCHEDULE_TENSOR)
        .map(|(_, t)| t)
        .ok_or_else(|| CliError::Data(format!("{path}: checkpoint has no schedule record")))?;
    let r: Vec<f64> = rec.data().iter().map(|&v| v as f64).collect();
    if r.len() != 3 {
        return Err(CliError::Data(format!("{path}: schedule record has {} values", r.len())));
    }
    // betas were stored as f32; rebuild from the rounded endpoints
    let schedule = NoiseSchedule::linear(r[0].round() as usize, r[1], r[2]).map_err(data(path))?;
    Ok((model, schedule))
}

pub const GENERATE_KEYS: &[&str] = &[
    "skeleton",
    "checkpoint",
    "out",
    "k",
    "t_cov",
    "guidance",
    "resample",
    "repaint_mode",
    "clamp",
    "start_voxel",
];

fn parse_voxel(cfg: &Config, key: &str) -> Result<Option<VoxelIndex>, CliError> {
    if cfg.get_str(key).is_none() {
        return Ok(None);
    }
    let v: Vec<i32> = cfg.list(key, &[])?;
    cfg.ensure(v.len() == 3, key, "expected i,j,k")?;
    Ok(Some(VoxelIndex::new(v[0], v[1], v[2])))
}

pub fn generate(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(GENERATE_KEYS)?;
    let (skel_path, ckpt, out) = (cfg.required("skeleton")?, cfg.required("checkpoint")?, cfg.required("out")?);
    let k: usize = cfg.get("k", 150)?;
    let t_cov: usize = cfg.get("t_cov", 1)?;
    cfg.ensure(t_cov >= 1 && t_cov <= k, "t_cov", "need 1 <= t_cov <= k")?;
    let mode = match cfg.get_str("repaint_mode").unwrap_or("renoise") {
        "renoise" => RepaintMode::Renoise,
        "literal" => RepaintMode::Literal,
        other => return Err(cfg.ensure(false, "repaint_mode", &format!("{other:?} is not renoise or literal")).unwrap_err()),
    };
    let resample: usize = cfg.get("resample", 1)?;
    cfg.ensure(resample >= 1, "resample", "must be >= 1")?;
    let guidance: f64 = cfg.get("guidance", 4.0)?;
    cfg.ensure(guidance.is_finite(), "guidance", "must be finite")?;
    let outpaint = OutpaintConfig {
        k,
        t_cov,
        sampler: SamplerConfig {
            guidance_scale: guidance,
            resample_count: resample,
            mode,
            clamp_output: cfg.get("clamp", true)?,
            seed: sigvox::seed::derive_seed(seed, &[RNG_GENERATE]),
        },
        start_voxel: parse_voxel(cfg, "start_voxel")?,
    };
    let skeleton = SemanticSkeleton::from_grid(&load_vxf(skel_path)?);
    let (model, schedule) = load_checkpoint(ckpt)?;
    let dim = 6 * skeleton.n as usize;
    if model.config().token_dim != dim {
        return Err(CliError::Data(format!(
            "checkpoint token dimension {} does not match skeleton n={} ({dim})",
            model.config().token_dim,
            skeleton.n
        )));
    }
    let (grid, stats) = progressive_generate(&skeleton, &model, &schedule, &outpaint).map_err(data("generate"))?;
    write_grid(&grid, out).map_err(data(out))?;
    Ok(Summary::new("generate")
        .add("seed", seed)
        .add("voxels", grid.len())
        .add("regions", stats.regions)
        .add("peak_resident_tokens", stats.peak_resident_tokens)
        .add("uncovered", stats.uncovered)
        .add("out", out))
}

pub const RENDER_KEYS: &[&str] = &["grid", "trajectory", "out_dir", "radius", "neighbors", "neighbor_radius", "background"];

pub fn render_frames(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(RENDER_KEYS)?;
    let (grid_path, traj, out_dir) = (cfg.required("grid")?, cfg.required("trajectory")?, cfg.required("out_dir")?);
    let d = SplatParams::default();
    let params = SplatParams {
        radius: cfg.get("radius", d.radius)?,
        neighbors: cfg.get("neighbors", d.neighbors)?,
        neighbor_radius: cfg.get("neighbor_radius", d.neighbor_radius)?,
    };
    cfg.ensure(params.radius.is_finite() && params.radius > 0.0, "radius", "must be > 0")?;
    let bg: Vec<f64> = cfg.list("background", &[0.0, 0.0, 0.0])?;
    cfg.ensure(bg.len() == 3 && bg.iter().all(|c| (0.0..=1.0).contains(c)), "background", "expected r,g,b in [0, 1]")?;
    let background = [bg[0], bg[1], bg[2]];

    let grid = load_vxf(grid_path)?;
    let text = fs::read_to_string(traj).map_err(data(traj))?;
    let cameras = parse_trajectory(&text).map_err(|e| CliError::Data(format!("{traj}: {e}")))?;
    if cameras.is_empty() {
        return Err(CliError::Data(format!("{traj}: no camera blocks")));
    }
    let (splats, fallbacks) = build_splats(&grid, &params);
    fs::create_dir_all(out_dir).map_err(data(out_dir))?;
    let mut covered = 0usize;
    for (i, cam) in cameras.iter().enumerate() {
        let frame = render(&splats, cam, background).map_err(|e| CliError::Data(format!("frame {i}: {e}")))?;
        covered += frame.coverage.iter().filter(|&&c| c).count();
        let write = |name: String, img: sigvox::render::Image8, format: &str| -> Result<(), CliError> {
            let path = Path::new(out_dir).join(name);
            let f = File::create(&path).map_err(data(&path.display().to_string()))?;
            let mut w = BufWriter::new(f);
            write_image(&img, format, &mut w).map_err(|e: RenderError| CliError::Data(format!("{}: {e}", path.display())))
        };
        write(format!("frame_{i:04}.ppm"), frame.rgb_image(), "ppm")?;
        write(format!("frame_{i:04}_mask.pgm"), frame.sky_mask_image(), "pgm")?;
    }
    Ok(Summary::new("render")
        .add("seed", seed)
        .add("frames", cameras.len())
        .add("splats", splats.len())
        .add("normal_fallbacks", fallbacks)
        .add("covered_pixels", covered)
        .add("out_dir", out_dir))
}

pub const EVAL_KEYS: &[&str] = &["metric", "grid", "mesh", "out", "sweep", "probes", "corpus_a", "corpus_b", "max_tokens"];

pub fn eval(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    cfg.check_keys(EVAL_KEYS)?;
    match cfg.required("metric")? {
        "chamfer" => eval_chamfer(cfg, seed),
        "mmd" => eval_mmd(cfg, seed),
        other => Err(cfg.ensure(false, "metric", &format!("{other:?} is not chamfer or mmd")).unwrap_err()),
    }
}

fn eval_chamfer(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    let (grid_path, mesh_path, out) = (cfg.required("grid")?, cfg.required("mesh")?, cfg.required("out")?);
    let sweep: Vec<usize> = cfg.list("sweep", &[1, 2, 5, 10, 20, 40])?;
    cfg.ensure(sweep.iter().all(|&n| n > 0), "sweep", "sample counts must be > 0")?;
    let probes: usize = cfg.get("probes", 20_000)?;
    cfg.ensure(probes > 0, "probes", "must be > 0")?;
    let grid = load_vxf(grid_path)?;
    let mesh = load_mesh(mesh_path).map_err(|e| ingest_error(mesh_path, e))?;
    let probe_seed = sigvox::seed::derive_seed(seed, &[RNG_EVAL]);
    let vs = grid.voxel_size() as f64;
    let vs_text = grid.voxel_size().to_string();

    let mut w = csv::Writer::from_path(out).map_err(data(out))?;
    w.write_record(["source", "n", "voxel_size", "voxels", "grid_to_mesh", "mesh_to_grid", "chamfer"])
        .map_err(data(out))?;
    let mut row = |source: &str, g: &VoxfieldGrid| -> Result<f64, CliError> {
        let r = chamfer_distance(g, &mesh, probes, probe_seed).map_err(|e| ingest_error("chamfer", e))?;
        w.write_record([
            source.to_string(),
            g.n().to_string(),
            vs_text.clone(),
            g.len().to_string(),
            format!("{:.9}", r.grid_to_mesh),
            format!("{:.9}", r.mesh_to_grid),
            format!("{:.9}", r.chamfer),
        ])
        .map_err(data(out))?;
        Ok(r.chamfer)
    };
    let own = row("vxf", &grid)?;
    for &n in &sweep {
        let params = GridParams {
            voxel_size: vs,
            n,
            origin: grid.origin(),
            seed: sigvox::seed::derive_seed(seed, &[RNG_CONVERT]),
        };
        let g = build_grid(&mesh, &params).map_err(|e| ingest_error(mesh_path, e))?;
        row("sweep", &g)?;
    }
    w.flush().map_err(data(out))?;
    Ok(Summary::new("eval")
        .add("seed", seed)
        .add("metric", "chamfer")
        .add("n", grid.n())
        .add("chamfer", format!("{own:.6}"))
        .add("sweep_points", sweep.len())
        .add("out", out))
}

fn corpus_tokens(grids: &[VoxfieldGrid], max: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut tokens: Vec<Vec<f64>> = grids
        .iter()
        .flat_map(|g| {
            let vs = g.voxel_size() as f64;
            g.iter().map(move |(_, e)| flatten_token(&e.voxfield, vs).0)
        })
        .collect();
    if tokens.len() > max {
        tokens.shuffle(rng);
        tokens.truncate(max);
    }
    tokens
}

fn eval_mmd(cfg: &Config, seed: u64) -> Result<Summary, CliError> {
    let a = load_corpus(cfg, "corpus_a")?;
    let b = load_corpus(cfg, "corpus_b")?;
    if a[0].n() != b[0].n() {
        return Err(CliError::Data(format!("corpora have n={} and n={}", a[0].n(), b[0].n())));
    }
    let max: usize = cfg.get("max_tokens", 1000)?;
    cfg.ensure(max >= 2, "max_tokens", "must be >= 2")?;
    let mut rng = rng_for(seed, &[RNG_EVAL]);
    let ta = corpus_tokens(&a, max, &mut rng);
    let tb = corpus_tokens(&b, max, &mut rng);
    let r = token_mmd(&ta, &tb).map_err(data("mmd"))?;
    if !r.mmd2.is_finite() {
        return Err(CliError::Numeric(format!("MMD evaluated to {}", r.mmd2)));
    }
    if let Some(out) = cfg.get_str("out") {
        let mut w = csv::Writer::from_path(out).map_err(data(out))?;
        w.write_record(["tokens_a", "tokens_b", "bandwidth", "mmd2"]).map_err(data(out))?;
        w.write_record([ta.len().to_string(), tb.len().to_string(), format!("{:.9}", r.bandwidth), format!("{:.9e}", r.mmd2)])
            .map_err(data(out))?;
        w.flush().map_err(data(out))?;
    }
    Ok(Summary::new("eval")
        .add("seed", seed)
        .add("metric", "mmd")
        .add("tokens_a", ta.len())
        .add("tokens_b", tb.len())
        .add("bandwidth", format!("{:.6}", r.bandwidth))
        .add("mmd2", format!("{:.6e}", r.mmd2)))
}
