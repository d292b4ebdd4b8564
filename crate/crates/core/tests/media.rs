use proptest::prelude::*;
use quasiguide::media::*;

const BUMP_INTEGRAL: f64 = 1.2069003224378762;

fn bump_config() -> Config {
    Config::A(ConfigA {
        plus: Medium::with_rho(CoefficientField2D::paper_plus()),
        minus: Medium::with_rho(CoefficientField2D::paper_minus()),
        p_plus_z: 1.0,
        p_minus_z: 2f64.sqrt(),
    })
}

fn sheared_config(p_plus: (f64, f64)) -> Config {
    Config::B(ConfigB {
        plus: Medium::with_rho(CoefficientField2D::paper_plus()),
        p_plus,
        rho_minus_const: 2.0,
        a_minus_const: IDENTITY,
    })
}

#[test]
fn bump_values() {
    assert_eq!(bump(0.0), 1.0);
    assert!((bump(0.5) - (-1.0f64 / 3.0).exp()).abs() < 1e-15);
    assert_eq!(bump(1.0), 0.0);
    assert_eq!(bump(-1.0), 0.0);
    assert_eq!(bump(1.5), 0.0);
}

#[test]
fn bump_integral_by_trapezoid() {
    let n = 4000;
    let h = 2.0 / n as f64;
    let s: f64 = (1..n).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h;
    assert!((s - BUMP_INTEGRAL).abs() < 1e-12, "{s}");
}

#[test]
fn jump_data_support_and_scaling() {
    let g = JumpData::default();
    assert_eq!(g.support(), (-0.5, 0.5));
    assert_eq!(g.eval(0.0), 100.0);
    assert_eq!(g.eval(0.5), 0.0);
    assert!(JumpData::zero().is_zero());
}

#[test]
fn cut_matrix_of_both_configurations() {
    let c = build_cut_matrix(&bump_config()).unwrap();
    assert_eq!(c.theta1, 1.0);
    assert!((c.theta2 - 0.5f64.sqrt()).abs() < 1e-15);
    let b = build_cut_matrix(&sheared_config((0.3, 2.0))).unwrap();
    assert_eq!((b.theta1, b.theta2), (0.5, -0.15));
    let flipped = build_cut_matrix(&sheared_config((-0.3, -2.0))).unwrap();
    assert_eq!(flipped, b);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut bad = bump_config();
    if let Config::A(c) = &mut bad {
        c.p_minus_z = -1.0;
    }
    assert!(bad.validate().is_err());
    let neg_rho = Config::A(ConfigA {
        plus: Medium::constant(-1.0),
        minus: Medium::constant(1.0),
        p_plus_z: 1.0,
        p_minus_z: 1.0,
    });
    assert!(neg_rho.validate().is_err());
    assert!(sheared_config((0.3, 0.0)).validate().is_err());
    assert!(Frequency::new(num_complex::Complex64::new(1.0, 0.0)).is_err());
}

#[test]
fn homogeneity_detection() {
    assert!(!bump_config().is_homogeneous());
    let c = Config::A(ConfigA {
        plus: Medium::constant(1.0),
        minus: Medium::constant(2.0),
        p_plus_z: 1.0,
        p_minus_z: 2f64.sqrt(),
    });
    assert!(c.is_homogeneous());
}

proptest! {
    #[test]
    fn frac_is_a_representative(t in -50.0f64..50.0, n in -20i32..20) {
        let f = frac(t);
        prop_assert!((0.0..1.0).contains(&f));
        let d = frac(t + n as f64) - f;
        prop_assert!(d.abs() < 1e-11 || (d.abs() - 1.0).abs() < 1e-11);
        let c = fold_centered(t);
        prop_assert!(c > -0.5 && c <= 0.5);
    }

    #[test]
    fn lifted_coefficients_are_periodic(x in -2.0f64..2.0, z1 in 0.0f64..1.0, z2 in 0.0f64..1.0, a in -3i32..3, b in -3i32..3) {
        let cfg = bump_config();
        let (_, r0) = eval_augmented(&cfg, x, z1, z2);
        let (_, r1) = eval_augmented(&cfg, x, z1 + a as f64, z2 + b as f64);
        prop_assert!((r0 - r1).abs() < 1e-9);
    }

    #[test]
    fn slice_zero_is_the_physical_medium(x in -2.0f64..2.0, z in -5.0f64..5.0, px in -0.7f64..0.7, sheared in any::<bool>()) {
        let cfg = if sheared { sheared_config((px, 1.3)) } else { bump_config() };
        let cut = build_cut_matrix(&cfg).unwrap();
        let side = if x >= 0.0 { Side::Plus } else { Side::Minus };
        let (_, rs) = eval_sliced_with(&cfg, &cut, side, 0.0, x, z);
        let (_, rp) = eval_physical_side(&cfg, side, x, z);
        prop_assert!((rs - rp).abs() < 1e-8, "{} vs {}", rs, rp);
    }

    #[test]
    fn physical_medium_is_periodic_along_the_period(x in 0.0f64..2.0, z in -3.0f64..3.0, n in -3i32..3) {
        let cfg = sheared_config((0.4, 1.3));
        let (_, r0) = eval_physical_side(&cfg, Side::Plus, x, z);
        let (_, r1) = eval_physical_side(&cfg, Side::Plus, x + 0.4 * n as f64, z + 1.3 * n as f64);
        prop_assert!((r0 - r1).abs() < 1e-8);
    }

    #[test]
    fn minus_side_reflection_keeps_the_density(xr in 0.0f64..2.0, z in -3.0f64..3.0) {
        let cfg = bump_config();
        let m = HalfSpaceMedium::new(&cfg, Side::Minus).unwrap();
        let (_, r) = m.physical(xr, z);
        let (_, rp) = eval_physical_side(&cfg, Side::Minus, -xr, z);
        prop_assert_eq!(r, rp);
    }
}
