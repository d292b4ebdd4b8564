use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quasiguide::fem2d::*;
use quasiguide::media::IDENTITY;

fn vecs(n: usize, seed: &[(f64, f64)]) -> Vec<C64> {
    (0..n)
        .map(|i| {
            let (a, b) = seed[i % seed.len()];
            C64::new(a + 0.1 * i as f64, b - 0.05 * i as f64)
        })
        .collect()
}

#[test]
fn mass_matrix_integrates_constants() {
    let mesh = StructuredMesh2D::new(1.0, 1.5, 6, 9, false, true).unwrap();
    let m = mass_matrix(&mesh, |_, _| 2.0);
    let one = vec![C64::new(1.0, 0.0); mesh.n_dofs()];
    assert!((m.pair(&one, &one) - C64::new(3.0, 0.0)).norm() < 1e-12);
}

#[test]
fn stiffness_annihilates_constants() {
    let mesh = StructuredMesh2D::new(1.0, 1.0, 5, 5, true, true).unwrap();
    let form = assemble(
        &mesh,
        |_, _| (IDENTITY, 1.0),
        C64::new(0.0, 0.0),
        0.0,
        [0.0, 0.0],
    )
    .unwrap();
    let one = vec![C64::new(1.0, 0.0); mesh.n_dofs()];
    assert!(form.matrix.mul_vec(&one).iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn dirichlet_solve_reproduces_linear_harmonic_fields() {
    let mesh = StructuredMesh2D::new(1.0, 2.0, 7, 9, false, false).unwrap();
    let form = assemble(
        &mesh,
        |_, _| (IDENTITY, 1.0),
        C64::new(0.0, 0.0),
        0.0,
        [0.0, 0.0],
    )
    .unwrap();
    let exact = |x: f64, z: f64| C64::new(2.0 * x - 3.0 * z, x + z);
    let data: Vec<(EdgeTag, Vec<C64>)> = [EdgeTag::X0, EdgeTag::X1, EdgeTag::Z0, EdgeTag::Z1]
        .into_iter()
        .map(|t| {
            let vals = mesh
                .edge_grid(t)
                .unwrap()
                .into_iter()
                .map(|(i, j)| {
                    let (x, z) = mesh.coords(i, j);
                    exact(x, z)
                })
                .collect();
            (t, vals)
        })
        .collect();
    let u = solve_dirichlet(&form, &data).unwrap();
    for iz in 0..=mesh.nz {
        for ix in 0..=mesh.nx {
            let (x, z) = mesh.coords(ix, iz);
            assert!((u.values[mesh.dof(ix, iz)] - exact(x, z)).norm() < 1e-10);
        }
    }
}

#[test]
fn schur_complement_matches_weak_flux() {
    let mesh = StructuredMesh2D::new(1.0, 1.0, 6, 6, false, true).unwrap();
    let omega = C64::new(1.5, 0.4);
    let form = assemble(&mesh, |x, _| (IDENTITY, 1.0 + x), omega, 0.6, [0.0, 1.0]).unwrap();
    let mut bd = mesh.edge_dofs(EdgeTag::X0).unwrap();
    let n = bd.len();
    bd.extend(mesh.edge_dofs(EdgeTag::X1).unwrap());
    let solver = DirichletSolver::new(&form, &bd).unwrap();
    let s = solver.schur_complement();
    let data = vecs(2 * n, &[(0.3, -1.0), (1.2, 0.4), (-0.7, 0.9)]);
    let u = solver.solve(&data, None);
    let flux0 = weak_flux(&form, &u, EdgeTag::X0).unwrap();
    for i in 0..n {
        let sv: C64 = (0..2 * n).map(|j| s[(i, j)] * data[j]).sum();
        assert!((sv - flux0[i]).norm() < 1e-9 * (1.0 + sv.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn form_is_coercive_after_rotation(seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40), re in 0.2f64..4.0, im in 0.05f64..1.0, k in -3.0f64..3.0) {
        let mesh = StructuredMesh2D::new(1.0, 1.0, 5, 5, false, true).unwrap();
        let omega = C64::new(re, im);
        let form = assemble(&mesh, |x, z| (IDENTITY, 1.0 + 0.5 * (x * z).sin().abs()), omega, k, [0.0, 1.0]).unwrap();
        let u = vecs(mesh.n_dofs(), &seed);
        let a = form.matrix.pair(&u, &u);
        prop_assert!((a / omega).im < 0.0);
    }
}
