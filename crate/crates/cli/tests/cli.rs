use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sigvox(dir: &Path, threads: usize, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigvox"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .args(args)
        .output()
        .expect("spawn sigvox")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sigvox(dir, 0, args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let last = stdout.lines().last().unwrap_or("").to_string();
    assert!(last.starts_with("OK command="), "summary line: {last}");
    last
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {summary}"))
}

const SMALL_SCENE: &[&str] = &["--set", "extent_x=10", "--set", "extent_y=10", "--set", "building_count=1", "--set", "pole_count=1"];

const TINY_TRAIN: &[&str] = &[
    "--set", "timesteps=20", "--set", "batch=2", "--set", "set_min=10", "--set", "set_max=20", "--set", "model_dim=16",
    "--set", "heads=2", "--set", "layers=1", "--set", "pe_dim=12", "--set", "time_dim=16", "--set", "lr=0.003",
];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn convert_then_chamfer_below_splat_radius() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "1", "synth", "--set", "out=scene.obj"]);
    ok(d, &["convert", "--set", "mesh=scene.obj", "--set", "out=scene.vxf"]);
    let s = ok(d, &["eval", "--set", "metric=chamfer", "--set", "grid=scene.vxf", "--set", "mesh=scene.obj", "--set", "out=c.csv", "--set", "sweep=10,20"]);
    assert!(field(&s, "chamfer").parse::<f64>().unwrap() <= 0.04, "{s}");
    let mut r = csv::Reader::from_path(d.join("c.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["source", "n", "voxel_size", "voxels", "grid_to_mesh", "mesh_to_grid", "chamfer"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let c: Vec<f64> = rows.iter().map(|x| x[6].parse().unwrap()).collect();
    assert!(c[2] < c[1]);
}

#[test]
fn train_smoke_and_deterministic_generate() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &with(&["synth", "--set", "out=s.obj"], SMALL_SCENE));
    ok(d, &["convert", "--set", "mesh=s.obj", "--set", "out=s.vxf", "--set", "n=4"]);
    let s = ok(d, &with(&["--seed", "2", "train", "--set", "corpus=s.vxf", "--set", "out=m.ckpt", "--set", "steps=200"], TINY_TRAIN));
    let (first, last): (f64, f64) = (field(&s, "initial_loss").parse().unwrap(), field(&s, "final_loss").parse().unwrap());
    assert!(last < first, "{s}");

    let mut r = csv::Reader::from_path(d.join("m.ckpt.loss.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["step", "loss"]);
    let rows: Vec<(usize, f64)> = r.records().map(|x| {
        let x = x.unwrap();
        (x[0].parse().unwrap(), x[1].parse().unwrap())
    }).collect();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().enumerate().all(|(i, (step, loss))| *step == i + 1 && loss.is_finite()));

    let gen = |out: &str| {
        ok(d, &["--seed", "5", "generate", "--set", "skeleton=s.vxf", "--set", "checkpoint=m.ckpt", "--set", &format!("out={out}"), "--set", "k=40"])
    };
    let a = gen("a.vxf");
    gen("b.vxf");
    assert_eq!(fs::read(d.join("a.vxf")).unwrap(), fs::read(d.join("b.vxf")).unwrap());
    assert_eq!(field(&a, "peak_resident_tokens"), "40");
    assert_eq!(field(&a, "uncovered"), "0");
}

#[test]
fn unknown_key_is_a_config_error_naming_key_and_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.cfg"), "out=x.obj\n# fine\nroad_widht=3\n").unwrap();
    let out = sigvox(dir.path(), 0, &["synth", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"road_widht\"") && err.contains("run.cfg:3"), "{err}");
}

#[test]
fn exit_codes_for_data_and_numeric_failures() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let missing = sigvox(d, 0, &["convert", "--set", "mesh=nope.obj", "--set", "out=x.vxf"]);
    assert_eq!(missing.status.code(), Some(3));
    fs::write(d.join("bad.vxf"), b"not a grid").unwrap();
    let bad = sigvox(d, 0, &["render", "--set", "grid=bad.vxf", "--set", "trajectory=t.txt", "--set", "out_dir=f"]);
    assert_eq!(bad.status.code(), Some(3));
    let no_out = sigvox(d, 0, &["synth"]);
    assert_eq!(no_out.status.code(), Some(2));

    ok(d, &with(&["synth", "--set", "out=s.obj"], SMALL_SCENE));
    ok(d, &["convert", "--set", "mesh=s.obj", "--set", "out=s.vxf", "--set", "n=4"]);
    let blowup = sigvox(d, 0, &with(&["train", "--set", "corpus=s.vxf", "--set", "out=m.ckpt", "--set", "steps=50"], &with(TINY_TRAIN, &["--set", "lr=1e30"])));
    assert_eq!(blowup.status.code(), Some(4), "{}", String::from_utf8_lossy(&blowup.stderr));
}

fn pipeline(dir: &Path, threads: usize) {
    let run = |args: &[&str]| {
        let out = sigvox(dir, threads, args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&with(&["--seed", "9", "synth", "--set", "out=s.obj"], SMALL_SCENE));
    run(&["--seed", "9", "convert", "--set", "mesh=s.obj", "--set", "out=s.vxf", "--set", "n=4"]);
    run(&with(&["--seed", "9", "train", "--set", "corpus=s.vxf", "--set", "out=m.ckpt", "--set", "steps=30"], TINY_TRAIN));
    run(&["--seed", "9", "generate", "--set", "skeleton=s.vxf", "--set", "checkpoint=m.ckpt", "--set", "out=g.vxf", "--set", "k=40"]);
    fs::write(
        dir.join("traj.txt"),
        "fx=40\nfy=40\ncx=24\ncy=24\nwidth=48\nheight=48\npose=1 0 0 -5 0 0 -1 2 0 1 0 12\n\n\
         fx=40\nfy=40\ncx=24\ncy=24\nwidth=48\nheight=48\npose=0 1 0 -5 0 0 -1 2 1 0 0 12\n",
    )
    .unwrap();
    run(&["render", "--set", "grid=g.vxf", "--set", "trajectory=traj.txt", "--set", "out_dir=frames"]);
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    pipeline(dirs[0].path(), 1);
    pipeline(dirs[1].path(), 4);
    pipeline(dirs[2].path(), 4);
    for name in ["s.obj", "s.vxf", "m.ckpt", "m.ckpt.loss.csv", "g.vxf", "frames/frame_0000.ppm", "frames/frame_0000_mask.pgm", "frames/frame_0001.ppm"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(a, fs::read(d.path().join(name)).unwrap(), "{name} differs");
        }
    }
}
