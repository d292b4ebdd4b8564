use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use quasiguide::media::*;
use quasiguide::oracle3d::*;

fn constant_medium() -> HalfSpaceMedium {
    let cfg = Config::A(ConfigA {
        plus: Medium::constant(1.0),
        minus: Medium::constant(2.0),
        p_plus_z: 1.0,
        p_minus_z: 2f64.sqrt(),
    });
    HalfSpaceMedium::new(&cfg, Side::Plus).unwrap()
}

#[test]
fn mesh_layout() {
    let m = StructuredMesh3D::new(4).unwrap();
    assert_eq!(m.n_dofs(), 5 * 16);
    assert_eq!(m.face_dofs(0).len(), 16);
    assert_eq!(m.tetrahedra().len(), 6 * 64);
    assert!(StructuredMesh3D::new(1).is_err());
}

#[test]
fn zero_face_data_gives_zero_field() {
    let cell = Cell3D::new(&constant_medium(), C64::new(1.0, 0.5), 0.3, 4).unwrap();
    let zero = vec![C64::new(0.0, 0.0); cell.face_dim()];
    let (u, flux) = cell.solve(0, &zero).unwrap();
    assert!(u.iter().chain(&flux[0]).chain(&flux[1]).all(|v| v.norm() == 0.0));
}

#[test]
fn mode_gap_shrinks_with_resolution() {
    let m = constant_medium();
    let omega = C64::new(2.0, 0.5);
    let gap = |n| {
        let a = mode_dtn_3d(&m, omega, PI / 2.0, n, 1).unwrap();
        let b = mode_dtn_slices(&m, omega, PI / 2.0, n, 1).unwrap();
        b.relative_gap(&a)
    };
    let (g4, g8) = (gap(4), gap(8));
    assert!(g8 < g4, "{g4} -> {g8}");
    assert_eq!(torus_modes(1).len(), 9);
}
