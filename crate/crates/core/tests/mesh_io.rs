use std::collections::BTreeSet;

use hmrf_mesh::mesh::{
    build_adjacency, default_palette, face_features, parse_obj, parse_ply, write_ply_colored,
    FeatureConfig, FeatureKind, TriangleMesh,
};
use hmrf_mesh::synthbench::{synth, SynthKind, SynthSpec};
use proptest::prelude::*;

const CUBE: &str = include_str!("fixtures/cube.obj");
const TETRA: &str = include_str!("fixtures/tetrahedron.ply");

#[test]
fn cube_fixture() {
    let m = parse_obj(CUBE).unwrap();
    assert_eq!(m.vertices().len(), 8);
    assert_eq!(m.face_count(), 12);
    let g = build_adjacency(&m).unwrap();
    // V - E + F = 2 with E = 18, all edges interior
    assert_eq!(g.pairs().len(), 18);
    assert_eq!(8 - g.pairs().len() as i64 + 12, 2);
    for s in 0..12 {
        assert_eq!(g.neighbors_of(s).len(), 3);
    }
}

#[test]
fn tetrahedron_fixture() {
    let m = parse_ply(TETRA).unwrap();
    assert_eq!(m.face_count(), 4);
    let g = build_adjacency(&m).unwrap();
    assert_eq!(g.pairs().len(), 6);
}

#[test]
fn colored_round_trip() {
    let m = parse_obj(CUBE).unwrap();
    let palette = default_palette(2);

    let zeros = vec![0; 12];
    let text = write_ply_colored(&m, &zeros, &palette).unwrap();
    let [r, g, b] = palette[0];
    let suffix = format!(" {r} {g} {b}");
    let face_lines: Vec<&str> = text
        .lines()
        .skip_while(|l| *l != "end_header")
        .skip(1 + 8)
        .collect();
    assert_eq!(face_lines.len(), 12);
    assert!(face_lines.iter().all(|l| l.ends_with(&suffix)));

    let labels: Vec<usize> = (0..12).map(|f| f / 6).collect();
    let text = write_ply_colored(&m, &labels, &palette).unwrap();
    let back = parse_ply(&text).unwrap();
    assert_eq!(back, m);
    let colors: BTreeSet<&str> = text
        .lines()
        .skip_while(|l| *l != "end_header")
        .skip(1 + 8)
        .map(|l| l.splitn(5, ' ').nth(4).unwrap())
        .collect();
    assert_eq!(colors.len(), 2);
}

#[test]
fn synthetic_meshes_round_trip() {
    for kind in [SynthKind::GridSheet, SynthKind::Sphere, SynthKind::TwoLobes] {
        let case = synth(&SynthSpec {
            kind,
            resolution: 5,
            n_classes: 2,
            noise_sigma: 0.0,
            seed: 0,
        })
        .unwrap();
        let text = write_ply_colored(&case.mesh, case.truth.labels(), &default_palette(2)).unwrap();
        let back = parse_ply(&text).unwrap();
        assert_eq!(back.faces(), case.mesh.faces());
        for (a, b) in back.vertices().iter().zip(case.mesh.vertices()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-8 * b[k].abs().max(1.0));
            }
        }
    }
}

fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

fn apply(r: &[[f64; 3]; 3], v: &[f64]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

fn arb_mesh() -> impl Strategy<Value = TriangleMesh> {
    (
        2usize..7,
        prop::sample::select(vec![
            SynthKind::GridSheet,
            SynthKind::Sphere,
            SynthKind::TwoLobes,
        ]),
    )
        .prop_map(|(resolution, kind)| {
            synth(&SynthSpec {
                kind,
                resolution,
                n_classes: 1,
                noise_sigma: 0.0,
                seed: 0,
            })
            .unwrap()
            .mesh
        })
}

proptest! {
    #[test]
    fn adjacency_is_symmetric(mesh in arb_mesh()) {
        let g = build_adjacency(&mesh).unwrap();
        for i in 0..g.site_count() {
            prop_assert!(g.neighbors_of(i).len() <= 3);
            for &j in g.neighbors_of(i) {
                prop_assert!(i != j);
                prop_assert!(g.neighbors_of(j).contains(&i));
            }
        }
    }

    #[test]
    fn rigid_motion_equivariance(
        mesh in arb_mesh(),
        axis in prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero axis", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-3),
        angle in -3.0f64..3.0,
        offset in prop::array::uniform3(-10.0f64..10.0),
    ) {
        let config = FeatureConfig { kind: FeatureKind::CentroidNormal };
        let before = face_features(&mesh, config).unwrap();

        let shifted = face_features(&mesh.translated(offset), FeatureConfig::default()).unwrap();
        for (a, b) in before.rows().zip(shifted.rows()) {
            for k in 0..3 {
                prop_assert!((b[k] - (a[k] + offset[k])).abs() < 1e-9);
            }
        }

        let r = rotation(axis, angle);
        let moved = face_features(&mesh.transformed(&r, offset), config).unwrap();
        for (a, b) in before.rows().zip(moved.rows()) {
            let c = apply(&r, &a[..3]);
            let n = apply(&r, &a[3..]);
            for k in 0..3 {
                prop_assert!((b[k] - (c[k] + offset[k])).abs() < 1e-9);
                prop_assert!((b[3 + k] - n[k]).abs() < 1e-9);
            }
        }
    }
}
