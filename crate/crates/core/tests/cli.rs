use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quasiguide::cli::*;
use quasiguide::media::*;
use quasiguide::Error;

const SMALL_RUN: &str = "\
# coarse homogeneous run
[problem]
config = A
p_plus_z = 1
p_minus_z = 1.4142135623730951
rho_plus = constant 1
rho_minus = constant 2
omega_re = 1
omega_im = 0.25

[discretization]
h = 0.25
n_k = 8

[output]
x0 = -1
x1 = 1
z0 = -0.5
z1 = 0.5
nx = 8
nz = 4
";

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quasiguide-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasiguide"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_writes_field_and_manifest() {
    let dir = scratch("solve");
    let cfg = RunConfig::parse(SMALL_RUN).unwrap();
    let s = cmd_solve(&cfg, &dir).unwrap();
    assert!(s.max_spectral_radius < 1.0 && s.alpha < 0.0);
    let csv = fs::read_to_string(dir.join("u.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,z,re,im"));
    assert_eq!(lines.count(), 9 * 5);
    let manifest = fs::read_to_string(dir.join("manifest")).unwrap();
    assert!(manifest.contains("[results]") && manifest.contains("max_spectral_radius = "));
    assert_eq!(RunConfig::parse(&manifest).unwrap(), cfg);
}

#[test]
fn reruns_are_bitwise_identical() {
    let cfg = RunConfig::parse(SMALL_RUN).unwrap();
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    cmd_solve(&cfg, &a).unwrap();
    cmd_solve(&cfg, &b).unwrap();
    assert_eq!(fs::read(a.join("u.csv")).unwrap(), fs::read(b.join("u.csv")).unwrap());
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = scratch("replay");
    let cfg = RunConfig::parse(SMALL_RUN).unwrap();
    cmd_solve(&cfg, &dir.join("first")).unwrap();
    let again = RunConfig::from_file(&dir.join("first/manifest")).unwrap();
    cmd_solve(&again, &dir.join("second")).unwrap();
    assert_eq!(fs::read(dir.join("first/u.csv")).unwrap(), fs::read(dir.join("second/u.csv")).unwrap());
}

#[test]
fn zero_data_gives_an_all_zero_field() {
    let dir = scratch("zero");
    let cfg = RunConfig::parse(&format!("{SMALL_RUN}\n[problem]\ng_amplitude = 0\n")).unwrap();
    cmd_solve(&cfg, &dir).unwrap();
    let csv = fs::read_to_string(dir.join("u.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!((f[2], f[3]), (0.0, 0.0));
    }
}

#[test]
fn parse_errors_report_lines() {
    let text = SMALL_RUN.replace("omega_im = 0.25", "omega_im = fast");
    match RunConfig::parse(&text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
        other => panic!("unexpected {other:?}"),
    }
    match RunConfig::parse("[problem]\nconfig = A\n[mystery]\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
    match RunConfig::parse("[problem]\nrho_plus = wavy 1 2\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invariants_are_enforced() {
    let mut cfg = RunConfig::parse(SMALL_RUN).unwrap();
    cfg.disc.n_k = 6 + 1;
    assert!(cfg.validate().is_err());
    cfg.disc.n_k = 8;
    cfg.problem.omega = C64::new(1.0, 0.0);
    assert!(cfg.validate().is_err());
    cfg.problem.omega = C64::new(1.0, 0.25);
    cfg.disc.h = 0.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn sheared_configuration_round_trips() {
    let text = "[problem]\nconfig = B\np_plus_x = 0.25\np_plus_z = -1.5\nrho_plus = bump_radial 0.5 1 2.5\n\
                a_plus = isotropic bump_grid 1 0.5 4\nrho_minus_const = 2\na_minus_const = 1 0.1 1\nomega_re = 2\nomega_im = 0.5\nell = 1\n";
    let cfg = RunConfig::parse(text).unwrap();
    assert!(matches!(cfg.problem.config, Config::B(_)));
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn validate_options() {
    let o = ValidateOptions::parse("[problem]\nconfig = A\n[validate]\nh = 0.1, 0.05\nn_k = 16\n").unwrap();
    assert_eq!(o.h, Some(vec![0.1, 0.05]));
    assert_eq!(o.n_k, Some(16));
    assert!(ValidateOptions::parse("[validate]\nspeed = 3\n").is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = scratch("exit");
    let cfg = write_config(&dir, SMALL_RUN);
    let ok = binary()
        .args(["solve", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap(), "--threads", "1"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.join("out/u.csv").exists());

    let bad = write_config(&dir, "[problem]\nconfig = C\n");
    let err = binary().args(["solve", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(err.status.code(), Some(1));

    let unknown = binary().args(["validate", "sideways"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));

    let pass = binary()
        .args(["validate", "riccati-oracle", "--out", dir.join("v").to_str().unwrap()])
        .env("SOLVER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(pass.status.code(), Some(0));
    let report = fs::read_to_string(dir.join("v/riccati-oracle_errors.csv")).unwrap();
    assert!(report.starts_with("case,reference,h,eps0,eps1,seconds\n"));
    assert!(dir.join("v/riccati_oracle_eigenvalues.csv").exists());

    let coarse = write_config(&dir, "[validate]\nh = 0.5\n");
    let fail = binary()
        .args(["validate", "oracle3d", "--config", coarse.to_str().unwrap(), "--out", dir.join("v").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(pp in 0.1f64..5.0, pm in 0.1f64..5.0, re in -10.0f64..10.0, im in 1e-3f64..2.0, h in 1e-3f64..0.5, base in 0.1f64..3.0, amp in 0.0f64..2.0, n_k in 2usize..40, ell in -2i32..3, rep in 1u32..4) {
        let mut cfg = RunConfig::parse(SMALL_RUN).unwrap();
        cfg.problem.config = Config::A(ConfigA {
            plus: Medium::with_rho(CoefficientField2D::bump_radial(base, amp, 2.5).with_repeat_z(rep)),
            minus: Medium::with_rho(CoefficientField2D::bump_grid(base, amp, 4.0)),
            p_plus_z: pp,
            p_minus_z: pm,
        });
        cfg.problem.omega = C64::new(re, im);
        cfg.problem.ell = ell;
        cfg.disc.h = h;
        cfg.disc.n_k = 2 * n_k;
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
