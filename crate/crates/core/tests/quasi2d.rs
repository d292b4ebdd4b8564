use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quasiguide::media::*;
use quasiguide::quasi2d::quasi1d::quasi1d_demo;
use quasiguide::quasi2d::*;

/// `Σ_q c_q e^{2πiqs}` over the modes `|q| < N/2`.
fn trig(coefs: &[(i64, C64)], s: f64) -> C64 {
    coefs
        .iter()
        .map(|&(q, c)| c * C64::from_polar(1.0, 2.0 * PI * q as f64 * s))
        .sum()
}

fn band_limited(n: usize, raw: &[(f64, f64)]) -> Vec<(i64, C64)> {
    let qmax = (n as i64 - 1) / 2;
    raw.iter()
        .enumerate()
        .map(|(i, &(a, b))| ((i as i64 % (2 * qmax + 1)) - qmax, C64::new(a, b)))
        .collect()
}

fn bump_config(p_plus_z: f64, p_minus_z: f64, rp: u32, rm: u32) -> Config {
    Config::A(ConfigA {
        plus: Medium::with_rho(CoefficientField2D::paper_plus().with_repeat_z(rp)),
        minus: Medium::with_rho(CoefficientField2D::paper_minus().with_repeat_z(rm)),
        p_plus_z,
        p_minus_z,
    })
}

proptest! {
    #[test]
    fn fourier_shift_is_exact_on_band_limited_data(n in 3usize..24, raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8), t in -2.0f64..2.0) {
        let coefs = band_limited(n, &raw);
        let grid = SliceGrid::new(n, t).unwrap();
        let f: Vec<C64> = (0..n).map(|m| trig(&coefs, grid.s(m))).collect();
        let mut stack: Vec<Vec<C64>> = f.iter().map(|v| vec![*v, *v * 2.0]).collect();
        grid.apply_shift_fft(t, &mut stack);
        let dense = grid.shift();
        for m in 0..n {
            let exact = trig(&coefs, grid.s(m) + t);
            let by_matrix: C64 = (0..n).map(|c| dense[(m, c)] * f[c]).sum();
            prop_assert!((stack[m][0] - exact).norm() < 1e-12);
            prop_assert!((stack[m][1] - exact * 2.0).norm() < 1e-12);
            prop_assert!((by_matrix - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_weights_reproduce_band_limited_data(n in 3usize..24, raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8), s in -1.0f64..2.0) {
        let coefs = band_limited(n, &raw);
        let grid = SliceGrid::new(n, 0.3).unwrap();
        let w = grid.interp_weights(s);
        let v: C64 = w.iter().enumerate().map(|(m, wm)| wm * trig(&coefs, grid.s(m))).sum();
        prop_assert!((v - trig(&coefs, s)).norm() < 1e-12);
        let total: C64 = w.iter().sum();
        prop_assert!((total - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn slice_period_of_a_substituted_period() {
    let omega = C64::new(2.0, 0.5);
    let cfg = bump_config(3.0, 2.0 * 2f64.sqrt(), 3, 2);
    let plus = HalfSpaceMedium::new(&cfg, Side::Plus).unwrap();
    let minus = HalfSpaceMedium::new(&cfg, Side::Minus).unwrap();
    let cell = SliceCell::new(plus.cut, 0.2, Some(10)).unwrap();
    assert_eq!(
        solve_aux_bank(&cell, &plus, omega, 0.4)
            .unwrap()
            .slice_period(1e-12),
        1
    );
    assert_eq!(
        solve_aux_bank(&cell, &minus, omega, 0.4)
            .unwrap()
            .slice_period(1e-12),
        5
    );
}

#[test]
fn local_dtn_blocks_are_complex_symmetric_at_k_zero() {
    let cfg = bump_config(1.0, 2f64.sqrt(), 1, 1);
    let m = HalfSpaceMedium::new(&cfg, Side::Plus).unwrap();
    let cell = SliceCell::new(m.cut, 0.2, None).unwrap();
    let ops = cell_operators(&cell, &m, C64::new(2.0, 0.5), 0.0).unwrap();
    let t = &ops.local.blocks;
    let n = t.dim();
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((t.t00[(i, j)] - t.t00[(j, i)]).norm());
            err = err.max((t.t01[(i, j)] - t.t10[(j, i)]).norm());
            scale = scale.max(t.t00[(i, j)].norm());
        }
    }
    assert!(err < 1e-9 * scale, "asymmetry {err:e}");
}

#[test]
fn quasi1d_gap_shrinks_under_refinement() {
    let cut = CutMatrix::new(1.0, 2f64.sqrt()).unwrap();
    let omega = C64::new(2.0, 0.5);
    let mu = |a: f64, b: f64| 1.0 + 0.3 * (2.0 * PI * a).cos() * (2.0 * PI * b).sin();
    let rho = |a: f64, b: f64| 1.5 + 0.4 * (2.0 * PI * (a + b)).sin();
    let f = |a: f64, b: f64| C64::new((2.0 * PI * a).cos(), 0.3 * (2.0 * PI * (a - b)).cos());
    let g8 = quasi1d_demo(mu, rho, f, &cut, 8, 8, omega).unwrap().gap();
    let g16 = quasi1d_demo(mu, rho, f, &cut, 16, 16, omega).unwrap().gap();
    assert!(g16 < 0.5 * g8, "{g8} -> {g16}");
}

#[test]
fn slice_cell_rejects_bad_sizes() {
    let cut = CutMatrix::new(1.0, 0.5).unwrap();
    assert!(SliceCell::new(cut, 0.0, None).is_err());
    assert!(SliceGrid::new(0, 0.5).is_err());
}
