use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigvox::ingest::geometry::{triangle_area, Vec3};
use sigvox::ingest::{build_grid, chamfer_distance, sample_voxfield, synth_scene, voxelize, GridParams, Mesh, SceneSpec};
use sigvox::voxfield::{voxel_of, SemanticLabel, VoxelIndex};
use sigvox::vxf::encode_grid;
use std::collections::BTreeSet;

fn ground_quad(size: f64, z: f64) -> Mesh {
    let mut m = Mesh::default();
    m.push_quad(
        [[0.0, 0.0, z], [size, 0.0, z], [size, size, z], [0.0, size, z]],
        [[0.3, 0.3, 0.3]; 4],
        SemanticLabel::ROAD,
    );
    m
}

#[test]
fn ten_meter_ground_quad_occupies_289_voxels() {
    let m = ground_quad(10.0, 0.25);
    assert_eq!(voxelize(&m, 0.6, [0.0; 3]).len(), 17 * 17);
    let g = build_grid(&m, &GridParams::new(0.6, 4, 1)).unwrap();
    assert_eq!(g.len(), 289);
}

#[test]
fn quad_voxels_agree_with_point_sampling() {
    let m = ground_quad(1.1, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut hit = BTreeSet::new();
    for _ in 0..20_000 {
        let p = [rng.random_range(0.0..1.1), rng.random_range(0.0..1.1), 0.3];
        hit.insert(voxel_of([0.0; 3], 0.6, p));
    }
    assert_eq!(voxelize(&m, 0.6, [0.0; 3]), hit);
}

#[test]
fn area_weighted_sampling_matches_binomial() {
    // two disjoint coplanar triangles with areas 3:1 inside one voxel
    let mut m = Mesh::default();
    let big: [Vec3; 3] = [[-0.25, -0.25, 0.0], [0.05, -0.25, 0.0], [-0.25, 0.15, 0.0]];
    let small: [Vec3; 3] = [[0.1, 0.1, 0.0], [0.25, 0.1, 0.0], [0.1, 0.2, 0.0]];
    let shift = |t: [Vec3; 3]| t.map(|p| [p[0] + 0.3, p[1] + 0.3, p[2] + 0.3]);
    assert!((triangle_area(&big) / triangle_area(&small) - 8.0).abs() < 1e-9);
    // scale the small one up so the ratio is exactly 3:1
    let k = (8.0f64 / 3.0).sqrt();
    let small: [Vec3; 3] = small.map(|p| [0.1 + (p[0] - 0.1) * k, 0.1 + (p[1] - 0.1) * k, 0.0]);
    assert!((triangle_area(&big) / triangle_area(&small) - 3.0).abs() < 1e-9);
    m.push_triangle(shift(big), [[1.0, 0.0, 0.0]; 3], SemanticLabel::ROAD);
    m.push_triangle(shift(small), [[0.0, 0.0, 1.0]; 3], SemanticLabel::ROAD);

    let draws = 10_000;
    let params = GridParams::new(0.6, draws, 42);
    let (v, _) = sample_voxfield(&m, VoxelIndex::new(0, 0, 0), &params).unwrap();
    let red = v.samples().iter().filter(|s| s.color[0] == 1.0).count() as f64;
    let sd = (draws as f64 * 0.75 * 0.25).sqrt();
    assert!((red - 0.75 * draws as f64).abs() < 3.0 * sd, "red={red}");
}

#[test]
fn samples_lie_on_surface_and_inside_their_voxel() {
    let spec = SceneSpec {
        extent: [12.0, 14.0, 6.0],
        building_count: 3,
        pole_count: 2,
        rng_seed: 3,
        ..SceneSpec::default()
    };
    let m = synth_scene(&spec).unwrap();
    let params = GridParams::new(0.6, 20, 7);
    let g = build_grid(&m, &params).unwrap();
    assert_eq!(g.indices().collect::<BTreeSet<_>>(), voxelize(&m, 0.6, [0.0; 3]));
    let bvh = sigvox::ingest::geometry::TriangleBvh::new((0..m.triangles.len()).map(|f| m.triangle(f)).collect());
    for (idx, e) in g.iter() {
        let c = g.voxel_center(*idx);
        for s in e.voxfield.samples() {
            let w = [0, 1, 2].map(|a| c[a] + s.position[a] as f64);
            assert!(bvh.distance(w) < 1e-5, "sample off surface by {}", bvh.distance(w));
            for a in 0..3 {
                let lo = (idx.0[a] as f64) * 0.6;
                assert!(w[a] >= lo - 1e-6 && w[a] <= lo + 0.6 + 1e-6);
            }
        }
    }
}

#[test]
fn build_grid_is_deterministic_across_thread_counts() {
    let m = synth_scene(&SceneSpec {
        extent: [10.0, 12.0, 5.0],
        ..SceneSpec::default()
    })
    .unwrap();
    let params = GridParams::new(0.6, 8, 11);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = serial.install(|| encode_grid(&build_grid(&m, &params).unwrap()));
    let b = encode_grid(&build_grid(&m, &params).unwrap());
    assert_eq!(a, b);
}

#[test]
fn chamfer_shrinks_with_sample_count() {
    let m = synth_scene(&SceneSpec {
        extent: [16.0, 16.0, 6.0],
        ..SceneSpec::default()
    })
    .unwrap();
    let mut prev = f64::INFINITY;
    for n in [1, 5, 20] {
        let g = build_grid(&m, &GridParams::new(0.6, n, 0)).unwrap();
        let c = chamfer_distance(&g, &m, 20_000, 1).unwrap().chamfer;
        assert!(c <= prev * 1.05, "n={n} chamfer={c} prev={prev}");
        prev = c;
    }
    assert!(prev <= 0.04, "chamfer at n=20 is {prev}");
}
