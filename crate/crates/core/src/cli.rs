//! Run configurations, the `solve` and `validate` commands, and their output files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::halfguide::{cells_for_tolerance, riccati_with_symmetry, RiccatiBackend};
use crate::linalg::frobenius;
use crate::media::{
    AugmentedDataSpec, CoefficientField2D, Config, ConfigA, ConfigB, Family, HalfSpaceMedium,
    JumpData, Medium, Side, Tensor, TensorField, IDENTITY,
};
use crate::oracle3d::{mode_dtn_3d, mode_dtn_slices};
use crate::quasi2d::{cell_operators, SliceCell};
use crate::reference::{homogeneous_ref, rational_ref, FourierRefParams, RationalParams};
use crate::transmission::{relative_l2, sample_u, solve_sweep, FloquetSweep, PipelineParams};

/// Reference solution optionally compared against in `solve`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    None,
    Homogeneous,
    Rational,
}

impl FromStr for ReferenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ReferenceKind::None),
            "homogeneous" => Ok(ReferenceKind::Homogeneous),
            "rational" => Ok(ReferenceKind::Rational),
            other => Err(Error::Config(format!("unknown reference '{other}'"))),
        }
    }
}

impl std::fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceKind::None => "none",
            ReferenceKind::Homogeneous => "homogeneous",
            ReferenceKind::Rational => "rational",
        })
    }
}

/// Rectangular sampling window `[x0, x1] × [z0, z1]` with `nx × nz` intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
    pub nx: usize,
    pub nz: usize,
}

impl SampleGrid {
    /// The window `Ω₀ = (−1, 1)²` with spacing `1/40`.
    pub fn omega0() -> Self {
        SampleGrid {
            x0: -1.0,
            x1: 1.0,
            z0: -1.0,
            z1: 1.0,
            nx: 80,
            nz: 80,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (self.x1 - self.x0) * i as f64 / self.nx as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z0 + (self.z1 - self.z0) * j as f64 / self.nz as f64
    }

    /// Points in x-major order: index `i (nz + 1) + j`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..=self.nx)
            .flat_map(|i| (0..=self.nz).map(move |j| (i, j)))
            .map(|(i, j)| (self.x(i), self.z(j)))
            .collect()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.nz + 1) + j
    }

    /// Relative errors `(ε⁰, ε¹)`: discrete L² norm, and H¹ seminorm by forward differences.
    ///
    /// Differences in x whose interval contains `x = 0` in its interior are skipped, since the normal
    /// derivative jumps there.
    pub fn relative_errors(&self, u: &[C64], reference: &[C64]) -> (f64, f64) {
        let eps0 = relative_l2(u, reference);
        let (dx, dz) = (
            (self.x1 - self.x0) / self.nx as f64,
            (self.z1 - self.z0) / self.nz as f64,
        );
        let (mut num, mut den) = (0.0, 0.0);
        let mut add = |a: usize, b: usize, step: f64| {
            let du = (u[b] - u[a]) / step;
            let dr = (reference[b] - reference[a]) / step;
            num += (du - dr).norm_sqr();
            den += dr.norm_sqr();
        };
        for i in 0..=self.nx {
            for j in 0..=self.nz {
                if i < self.nx && !(self.x(i) < 0.0 && self.x(i + 1) > 0.0) {
                    add(self.idx(i, j), self.idx(i + 1, j), dx);
                }
                if j < self.nz {
                    add(self.idx(i, j), self.idx(i, j + 1), dz);
                }
            }
        }
        let eps1 = if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        };
        (eps0, eps1)
    }
}

/// Physical problem of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub config: Config,
    pub omega: C64,
    pub ell: i32,
    pub g: JumpData,
}

/// Discretization of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub h: f64,
    pub n_s: Option<usize>,
    pub n_k: usize,
    pub backend: RiccatiBackend,
    pub n_cells_plus: usize,
    pub n_cells_minus: usize,
    pub decay_steps: usize,
    pub reference: ReferenceKind,
}

impl Default for Discretization {
    fn default() -> Self {
        let p = PipelineParams::default();
        Discretization {
            h: p.h,
            n_s: p.n_s,
            n_k: p.n_k,
            backend: p.backend,
            n_cells_plus: p.cells_plus,
            n_cells_minus: p.cells_minus,
            decay_steps: p.decay_steps,
            reference: ReferenceKind::None,
        }
    }
}

impl Discretization {
    pub fn pipeline(&self) -> PipelineParams {
        PipelineParams {
            h: self.h,
            n_s: self.n_s,
            n_k: self.n_k,
            backend: self.backend,
            cells_plus: self.n_cells_plus,
            cells_minus: self.n_cells_minus,
            decay_steps: self.decay_steps,
        }
    }
}

/// Output window and directory.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub window: SampleGrid,
    pub dir: PathBuf,
}

/// Complete run configuration, read from and written to a sectioned `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub disc: Discretization,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.config.validate()?;
        if !(self.problem.omega.im > 0.0) {
            return Err(Error::Config(format!(
                "omega_im must be positive, got {}",
                self.problem.omega.im
            )));
        }
        let d = &self.disc;
        if !(d.h > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {}", d.h)));
        }
        if d.n_k < 4 || d.n_k % 2 != 0 {
            return Err(Error::Config(format!(
                "n_k must be even and at least 4, got {}",
                d.n_k
            )));
        }
        let w = &self.output.window;
        if w.nx == 0 || w.nz == 0 || !(w.x1 >= w.x0) || !(w.z1 >= w.z0) {
            return Err(Error::Config("output window is empty".into()));
        }
        if w.x0 < -(d.n_cells_minus as f64) || w.x1 > d.n_cells_plus as f64 {
            return Err(Error::Config(format!(
                "window x-range [{}, {}] exceeds the computed cells [-{}, {}]",
                w.x0, w.x1, d.n_cells_minus, d.n_cells_plus
            )));
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse_err(line, format!("invalid value '{v}' for {key}")))
}

fn parse_floats(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace()
        .map(|t| parse_num(line, key, t))
        .collect()
}

fn parse_field(line: usize, key: &str, v: &str) -> Result<CoefficientField2D> {
    let mut it = v.split_whitespace();
    let family = it.next().unwrap_or("");
    let rest: Vec<f64> = it.map(|t| parse_num(line, key, t)).collect::<Result<_>>()?;
    match (family, rest.as_slice()) {
        ("constant", [c]) => Ok(CoefficientField2D::constant(*c)),
        ("bump_grid", [b, a, s]) => Ok(CoefficientField2D::bump_grid(*b, *a, *s)),
        ("bump_radial", [b, a, s]) => Ok(CoefficientField2D::bump_radial(*b, *a, *s)),
        _ => Err(parse_err(
            line,
            format!("{key}: expected 'constant c', 'bump_grid base amplitude scaling' or 'bump_radial base amplitude scaling'"),
        )),
    }
}

fn field_str(f: &CoefficientField2D) -> String {
    match f.family {
        Family::Constant => format!("constant {}", f.base),
        Family::BumpGrid => format!("bump_grid {} {} {}", f.base, f.amplitude, f.scaling),
        Family::BumpRadial => format!("bump_radial {} {} {}", f.base, f.amplitude, f.scaling),
    }
}

fn parse_tensor(line: usize, key: &str, v: &str) -> Result<Tensor> {
    match parse_floats(line, key, v)?.as_slice() {
        [a11, a12, a22] => Ok([[*a11, *a12], [*a12, *a22]]),
        _ => Err(parse_err(
            line,
            format!("{key}: expected three numbers a11 a12 a22"),
        )),
    }
}

fn parse_tensor_field(line: usize, key: &str, v: &str) -> Result<TensorField> {
    match v.split_once(char::is_whitespace) {
        Some(("constant", rest)) => Ok(TensorField::Constant(parse_tensor(line, key, rest)?)),
        Some(("isotropic", rest)) => {
            Ok(TensorField::Isotropic(parse_field(line, key, rest.trim())?))
        }
        _ => Err(parse_err(
            line,
            format!("{key}: expected 'constant a11 a12 a22' or 'isotropic <field>'"),
        )),
    }
}

fn tensor_str(t: &Tensor) -> String {
    format!("{} {} {}", t[0][0], t[0][1], t[1][1])
}

fn tensor_field_str(a: &TensorField) -> String {
    match a {
        TensorField::Constant(t) => format!("constant {}", tensor_str(t)),
        TensorField::Isotropic(f) => format!("isotropic {}", field_str(f)),
    }
}

#[derive(Default)]
struct RawProblem {
    config: Option<String>,
    p_plus_z: Option<f64>,
    p_minus_z: Option<f64>,
    p_plus_x: Option<f64>,
    rho_plus: Option<CoefficientField2D>,
    rho_minus: Option<CoefficientField2D>,
    repeat_plus: Option<u32>,
    repeat_minus: Option<u32>,
    a_plus: Option<TensorField>,
    a_minus: Option<TensorField>,
    rho_minus_const: Option<f64>,
    a_minus_const: Option<Tensor>,
}

impl RunConfig {
    /// Parses the sectioned format. `[results]` (written into manifests) and `[validate]` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawProblem::default();
        let mut omega = (None::<f64>, None::<f64>);
        let mut ell = 0i32;
        let mut g = JumpData::default();
        let mut disc = Discretization::default();
        let mut window = SampleGrid::omega0();
        let mut dir = PathBuf::from("out");
        let mut section = String::new();
        let mut last_line = 0;
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, "unterminated section header"))?
                    .trim();
                if !["problem", "discretization", "output", "results", "validate"].contains(&name) {
                    return Err(parse_err(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            if section == "results" || section == "validate" {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key = value, got '{content}'")))?;
            let (key, v) = (key.trim(), value.trim());
            match (section.as_str(), key) {
                ("problem", "config") => raw.config = Some(v.to_string()),
                ("problem", "p_plus_z") => raw.p_plus_z = Some(parse_num(line, key, v)?),
                ("problem", "p_minus_z") => raw.p_minus_z = Some(parse_num(line, key, v)?),
                ("problem", "p_plus_x") => raw.p_plus_x = Some(parse_num(line, key, v)?),
                ("problem", "rho_plus") => raw.rho_plus = Some(parse_field(line, key, v)?),
                ("problem", "rho_minus") => raw.rho_minus = Some(parse_field(line, key, v)?),
                ("problem", "rho_plus_repeat_z") => {
                    raw.repeat_plus = Some(parse_num(line, key, v)?)
                }
                ("problem", "rho_minus_repeat_z") => {
                    raw.repeat_minus = Some(parse_num(line, key, v)?)
                }
                ("problem", "a_plus") => raw.a_plus = Some(parse_tensor_field(line, key, v)?),
                ("problem", "a_minus") => raw.a_minus = Some(parse_tensor_field(line, key, v)?),
                ("problem", "rho_minus_const") => {
                    raw.rho_minus_const = Some(parse_num(line, key, v)?)
                }
                ("problem", "a_minus_const") => {
                    raw.a_minus_const = Some(parse_tensor(line, key, v)?)
                }
                ("problem", "omega_re") => omega.0 = Some(parse_num(line, key, v)?),
                ("problem", "omega_im") => omega.1 = Some(parse_num(line, key, v)?),
                ("problem", "ell") => ell = parse_num(line, key, v)?,
                ("problem", "g_amplitude") => g.amplitude = parse_num(line, key, v)?,
                ("problem", "g_scale") => g.scale = parse_num(line, key, v)?,
                ("discretization", "h") => disc.h = parse_num(line, key, v)?,
                ("discretization", "n_s") => {
                    disc.n_s = if v == "auto" {
                        None
                    } else {
                        Some(parse_num(line, key, v)?)
                    }
                }
                ("discretization", "n_k") => disc.n_k = parse_num(line, key, v)?,
                ("discretization", "backend") => {
                    disc.backend = v
                        .parse()
                        .map_err(|e: Error| parse_err(line, e.to_string()))?
                }
                ("discretization", "n_cells") => {
                    let n = parse_num(line, key, v)?;
                    disc.n_cells_plus = n;
                    disc.n_cells_minus = n;
                }
                ("discretization", "n_cells_plus") => disc.n_cells_plus = parse_num(line, key, v)?,
                ("discretization", "n_cells_minus") => {
                    disc.n_cells_minus = parse_num(line, key, v)?
                }
                ("discretization", "decay_steps") => disc.decay_steps = parse_num(line, key, v)?,
                ("discretization", "reference") => {
                    disc.reference = v
                        .parse()
                        .map_err(|e: Error| parse_err(line, e.to_string()))?
                }
                ("output", "x0") => window.x0 = parse_num(line, key, v)?,
                ("output", "x1") => window.x1 = parse_num(line, key, v)?,
                ("output", "z0") => window.z0 = parse_num(line, key, v)?,
                ("output", "z1") => window.z1 = parse_num(line, key, v)?,
                ("output", "nx") => window.nx = parse_num(line, key, v)?,
                ("output", "nz") => window.nz = parse_num(line, key, v)?,
                ("output", "dir") => dir = PathBuf::from(v),
                ("", _) => {
                    return Err(parse_err(
                        line,
                        format!("key '{key}' outside of any section"),
                    ))
                }
                (s, _) => return Err(parse_err(line, format!("unknown key '{key}' in [{s}]"))),
            }
        }
        let end = last_line.max(1);
        let need = |o: Option<f64>, name: &str| {
            o.ok_or_else(|| parse_err(end, format!("missing required key {name}")))
        };
        let omega = C64::new(need(omega.0, "omega_re")?, need(omega.1, "omega_im")?);
        let medium = |rho: Option<CoefficientField2D>,
                      rep: Option<u32>,
                      a: Option<TensorField>,
                      name: &str| {
            let rho = rho.ok_or_else(|| parse_err(end, format!("missing required key {name}")))?;
            Ok::<_, Error>(Medium {
                a: a.unwrap_or(TensorField::Constant(IDENTITY)),
                rho: rho.with_repeat_z(rep.unwrap_or(1)),
            })
        };
        let plus = medium(raw.rho_plus, raw.repeat_plus, raw.a_plus, "rho_plus")?;
        let config = match raw.config.as_deref() {
            Some("A") => Config::A(ConfigA {
                plus,
                minus: medium(raw.rho_minus, raw.repeat_minus, raw.a_minus, "rho_minus")?,
                p_plus_z: need(raw.p_plus_z, "p_plus_z")?,
                p_minus_z: need(raw.p_minus_z, "p_minus_z")?,
            }),
            Some("B") => Config::B(ConfigB {
                plus,
                p_plus: (
                    need(raw.p_plus_x, "p_plus_x")?,
                    need(raw.p_plus_z, "p_plus_z")?,
                ),
                rho_minus_const: need(raw.rho_minus_const, "rho_minus_const")?,
                a_minus_const: raw.a_minus_const.unwrap_or(IDENTITY),
            }),
            Some(other) => {
                return Err(parse_err(
                    end,
                    format!("config must be A or B, got '{other}'"),
                ))
            }
            None => return Err(parse_err(end, "missing required key config")),
        };
        Ok(RunConfig {
            problem: ProblemSpec {
                config,
                omega,
                ell,
                g,
            },
            disc,
            output: OutputSpec { window, dir },
        })
    }

    /// Serializes to the format accepted by [`RunConfig::parse`]; numbers round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[problem]\n");
        let medium = |s: &mut String, side: &str, m: &Medium| {
            let _ = writeln!(s, "rho_{side} = {}", field_str(&m.rho));
            let _ = writeln!(s, "rho_{side}_repeat_z = {}", m.rho.repeat_z);
            let _ = writeln!(s, "a_{side} = {}", tensor_field_str(&m.a));
        };
        match &self.problem.config {
            Config::A(c) => {
                s.push_str("config = A\n");
                let _ = writeln!(s, "p_plus_z = {}", c.p_plus_z);
                let _ = writeln!(s, "p_minus_z = {}", c.p_minus_z);
                medium(&mut s, "plus", &c.plus);
                medium(&mut s, "minus", &c.minus);
            }
            Config::B(c) => {
                s.push_str("config = B\n");
                let _ = writeln!(s, "p_plus_x = {}", c.p_plus.0);
                let _ = writeln!(s, "p_plus_z = {}", c.p_plus.1);
                medium(&mut s, "plus", &c.plus);
                let _ = writeln!(s, "rho_minus_const = {}", c.rho_minus_const);
                let _ = writeln!(s, "a_minus_const = {}", tensor_str(&c.a_minus_const));
            }
        }
        let p = &self.problem;
        let _ = writeln!(s, "omega_re = {}", p.omega.re);
        let _ = writeln!(s, "omega_im = {}", p.omega.im);
        let _ = writeln!(s, "ell = {}", p.ell);
        let _ = writeln!(s, "g_amplitude = {}", p.g.amplitude);
        let _ = writeln!(s, "g_scale = {}", p.g.scale);
        let d = &self.disc;
        s.push_str("\n[discretization]\n");
        let _ = writeln!(s, "h = {}", d.h);
        match d.n_s {
            Some(n) => {
                let _ = writeln!(s, "n_s = {n}");
            }
            None => s.push_str("n_s = auto\n"),
        }
        let _ = writeln!(s, "n_k = {}", d.n_k);
        let _ = writeln!(
            s,
            "backend = {}",
            match d.backend {
                RiccatiBackend::Spectral => "spectral",
                RiccatiBackend::Newton => "newton",
            }
        );
        let _ = writeln!(s, "n_cells_plus = {}", d.n_cells_plus);
        let _ = writeln!(s, "n_cells_minus = {}", d.n_cells_minus);
        let _ = writeln!(s, "decay_steps = {}", d.decay_steps);
        let _ = writeln!(s, "reference = {}", d.reference);
        let w = &self.output.window;
        s.push_str("\n[output]\n");
        let _ = writeln!(s, "x0 = {}", w.x0);
        let _ = writeln!(s, "x1 = {}", w.x1);
        let _ = writeln!(s, "z0 = {}", w.z0);
        let _ = writeln!(s, "z1 = {}", w.z1);
        let _ = writeln!(s, "nx = {}", w.nx);
        let _ = writeln!(s, "nz = {}", w.nz);
        let _ = writeln!(s, "dir = {}", self.output.dir.display());
        s
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Field samples on a window, as written to `u.csv`.
pub fn field_csv(window: &SampleGrid, u: &[C64]) -> String {
    let mut s = String::from("x,z,re,im\n");
    for ((x, z), v) in window.points().into_iter().zip(u) {
        let _ = writeln!(s, "{x},{z},{},{}", v.re, v.im);
    }
    s
}

/// Measured quantities of a `solve` run.
#[derive(Clone, Debug)]
pub struct SolveSummary {
    pub max_spectral_radius: f64,
    pub max_riccati_residual: f64,
    pub max_interface_residual: f64,
    pub alpha: f64,
    pub n_cells_estimate: usize,
    pub slice_period_plus: usize,
    pub slice_period_minus: usize,
    pub n_s: usize,
    pub reference_errors: Option<(f64, f64)>,
    pub seconds_sweep: f64,
    pub seconds_sample: f64,
    pub seconds_reference: f64,
    pub threads: usize,
}

impl SolveSummary {
    fn to_text(&self) -> String {
        let mut s = String::from("\n[results]\n");
        let _ = writeln!(s, "n_s = {}", self.n_s);
        let _ = writeln!(s, "max_spectral_radius = {}", self.max_spectral_radius);
        let _ = writeln!(s, "max_riccati_residual = {}", self.max_riccati_residual);
        let _ = writeln!(
            s,
            "max_interface_residual = {}",
            self.max_interface_residual
        );
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "n_cells_estimate = {}", self.n_cells_estimate);
        let _ = writeln!(s, "slice_period_plus = {}", self.slice_period_plus);
        let _ = writeln!(s, "slice_period_minus = {}", self.slice_period_minus);
        if let Some((e0, e1)) = self.reference_errors {
            let _ = writeln!(s, "eps0 = {e0}");
            let _ = writeln!(s, "eps1 = {e1}");
        }
        let _ = writeln!(s, "seconds_sweep = {}", self.seconds_sweep);
        let _ = writeln!(s, "seconds_sample = {}", self.seconds_sample);
        let _ = writeln!(s, "seconds_reference = {}", self.seconds_reference);
        let _ = writeln!(s, "threads = {}", self.threads);
        s
    }
}

/// Tolerance on the trace decay used for the cell-count estimate in the manifest.
const CELL_TOLERANCE: f64 = 1e-8;

/// Reference field of a run on the given points.
fn reference_field(cfg: &RunConfig, points: &[(f64, f64)]) -> Result<Vec<C64>> {
    let p = &cfg.problem;
    match cfg.disc.reference {
        ReferenceKind::None => Err(Error::Config("no reference selected".into())),
        ReferenceKind::Homogeneous => {
            let c = match &p.config {
                Config::A(c) if p.config.is_homogeneous() => c,
                _ => {
                    return Err(Error::Config(
                        "homogeneous reference needs configuration A with constant media".into(),
                    ))
                }
            };
            let identity = |m: &Medium| m.a == TensorField::Constant(IDENTITY);
            if !identity(&c.plus) || !identity(&c.minus) || p.ell != 0 {
                return Err(Error::Config(
                    "homogeneous reference needs A = I and ell = 0".into(),
                ));
            }
            homogeneous_ref(
                &FourierRefParams::new(c.plus.rho.base, c.minus.rho.base, p.omega, p.g),
                points,
            )
        }
        ReferenceKind::Rational => {
            if p.ell != 0 {
                return Err(Error::Config("rational reference needs ell = 0".into()));
            }
            let d = &cfg.disc;
            let rp = RationalParams {
                h: d.h,
                n_k: d.n_k,
                cells_plus: d.n_cells_plus,
                cells_minus: d.n_cells_minus,
                backend: d.backend,
            };
            rational_ref(&p.config, p.omega, &p.g, points, &rp)
        }
    }
}

/// Runs the lifted pipeline for a configuration and writes `u.csv` and `manifest` into `out`.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<SolveSummary> {
    cfg.validate()?;
    let p = &cfg.problem;
    let t0 = Instant::now();
    let sweep = solve_sweep(
        &p.config,
        p.omega,
        &AugmentedDataSpec { ell: p.ell },
        &p.g,
        &cfg.disc.pipeline(),
    )?;
    let seconds_sweep = t0.elapsed().as_secs_f64();
    let window = &cfg.output.window;
    let points = window.points();
    let t1 = Instant::now();
    let u = sample_u(&sweep, &points)?;
    let seconds_sample = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let reference_errors = match cfg.disc.reference {
        ReferenceKind::None => None,
        _ => Some(window.relative_errors(&u, &reference_field(cfg, &points)?)),
    };
    let seconds_reference = t2.elapsed().as_secs_f64();
    let d = sweep.diagnostics();
    let first = sweep.points.first();
    let summary = SolveSummary {
        max_spectral_radius: d.max_spectral_radius,
        max_riccati_residual: d.max_riccati_residual,
        max_interface_residual: d.max_interface_residual,
        alpha: d.max_alpha,
        n_cells_estimate: cells_for_tolerance(d.max_spectral_radius, CELL_TOLERANCE),
        slice_period_plus: first.map_or(0, |q| q.plus.slice_period),
        slice_period_minus: first.map_or(0, |q| q.minus.slice_period),
        n_s: sweep.cell.n_s(),
        reference_errors,
        seconds_sweep,
        seconds_sample,
        seconds_reference,
        threads: rayon::current_num_threads(),
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("u.csv"), field_csv(window, &u))?;
    let mut manifest = cfg.to_text();
    manifest.push_str(&summary.to_text());
    fs::write(out.join("manifest"), manifest)?;
    Ok(summary)
}

/// Validation suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    Homogeneous,
    Rational,
    RiccatiOracle,
    Oracle3d,
    InvariancePeriod,
    InvarianceData,
}

impl Case {
    pub const ALL: [Case; 6] = [
        Case::Homogeneous,
        Case::Rational,
        Case::RiccatiOracle,
        Case::Oracle3d,
        Case::InvariancePeriod,
        Case::InvarianceData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::Homogeneous => "homogeneous",
            Case::Rational => "rational",
            Case::RiccatiOracle => "riccati-oracle",
            Case::Oracle3d => "oracle3d",
            Case::InvariancePeriod => "invariance-period",
            Case::InvarianceData => "invariance-data",
        }
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown validation case '{s}'")))
    }
}

/// One row `(h, ε⁰, ε¹, seconds)` of an error table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub eps0: f64,
    pub eps1: Option<f64>,
    pub seconds: f64,
}

/// A measured value compared against a threshold.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `true` if the value must stay below the threshold, `false` if above.
    pub below: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            below: true,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            below: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.below {
            self.value <= self.threshold
        } else {
            self.value >= self.threshold
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.4e} {} {:.4e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            if self.below { "<=" } else { ">=" },
            self.threshold
        )
    }
}

/// Outcome of one validation case.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub case: Case,
    pub reference: String,
    pub rows: Vec<ErrorRow>,
    pub checks: Vec<Check>,
    /// Additional CSV tables `(file name, content)`.
    pub tables: Vec<(String, String)>,
}

impl ErrorReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("case,reference,h,eps0,eps1,seconds\n");
        for r in &self.rows {
            let e1 = r.eps1.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.case.name(),
                self.reference,
                r.h,
                r.eps0,
                e1,
                r.seconds
            );
        }
        s
    }
}

/// Configuration A with constant identity tensors and the given densities.
fn constant_config_a(rho_plus: f64, rho_minus: f64, p_plus_z: f64, p_minus_z: f64) -> Config {
    Config::A(ConfigA {
        plus: Medium::constant(rho_plus),
        minus: Medium::constant(rho_minus),
        p_plus_z,
        p_minus_z,
    })
}

/// Configuration A with the bump media of the experiments, patterns repeated to match the periods.
pub fn bump_config_a(p_plus_z: f64, p_minus_z: f64, repeat_plus: u32, repeat_minus: u32) -> Config {
    Config::A(ConfigA {
        plus: Medium::with_rho(CoefficientField2D::paper_plus().with_repeat_z(repeat_plus)),
        minus: Medium::with_rho(CoefficientField2D::paper_minus().with_repeat_z(repeat_minus)),
        p_plus_z,
        p_minus_z,
    })
}

fn sweep_checks(name: &str, sweep: &FloquetSweep, checks: &mut Vec<Check>) {
    let d = sweep.diagnostics();
    checks.push(Check::below(
        format!("{name} spectral radius"),
        d.max_spectral_radius,
        1.0 - 1e-12,
    ));
    checks.push(Check::below(
        format!("{name} riccati residual"),
        d.max_riccati_residual,
        1e-10,
    ));
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

fn case_homogeneous(hs: &[f64], n_k: usize) -> Result<ErrorReport> {
    let omega = C64::new(1.0, 0.25);
    let g = JumpData::default();
    let config = constant_config_a(1.0, 2.0, 1.0, 2f64.sqrt());
    let window = SampleGrid::omega0();
    let points = window.points();
    let reference = homogeneous_ref(&FourierRefParams::new(1.0, 2.0, omega, g), &points)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &h in hs {
        let params = PipelineParams {
            h,
            n_k,
            ..Default::default()
        };
        let (u, seconds) = timed(|| {
            let sweep = solve_sweep(&config, omega, &AugmentedDataSpec::default(), &g, &params)?;
            sweep_checks(&format!("h={h}"), &sweep, &mut checks);
            checks.push(Check::below(
                format!("h={h} decay slope"),
                sweep.diagnostics().max_alpha,
                0.0,
            ));
            sample_u(&sweep, &points)
        })?;
        let (e0, e1) = window.relative_errors(&u, &reference);
        rows.push(ErrorRow {
            h,
            eps0: e0,
            eps1: Some(e1),
            seconds,
        });
    }
    if let Some(last) = rows.last() {
        checks.push(Check::below(
            format!("eps0 at h={}", last.h),
            last.eps0,
            5e-2,
        ));
    }
    if rows.len() >= 2 {
        let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
        let eoc = (a.eps0 / b.eps0).ln() / (a.h / b.h).ln();
        checks.push(Check::above(
            format!("EOC between h={} and h={}", a.h, b.h),
            eoc,
            1.5,
        ));
    }
    Ok(ErrorReport {
        case: Case::Homogeneous,
        reference: "fourier".into(),
        rows,
        checks,
        tables: Vec::new(),
    })
}

fn case_rational(hs: &[f64], n_k: usize) -> Result<ErrorReport> {
    let omega = C64::new(2.0, 0.5);
    let g = JumpData::default();
    let config = bump_config_a(1.0, 1.0, 1, 1);
    let window = SampleGrid::omega0();
    let points = window.points();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &h in hs {
        let params = PipelineParams {
            h,
            n_k,
            ..Default::default()
        };
        let (u, seconds) = timed(|| {
            let sweep = solve_sweep(&config, omega, &AugmentedDataSpec::default(), &g, &params)?;
            sweep_checks(&format!("h={h}"), &sweep, &mut checks);
            sample_u(&sweep, &points)
        })?;
        let rp = RationalParams {
            h,
            n_k,
            cells_plus: 1,
            cells_minus: 1,
            backend: RiccatiBackend::Spectral,
        };
        let reference = rational_ref(&config, omega, &g, &points, &rp)?;
        let (e0, e1) = window.relative_errors(&u, &reference);
        checks.push(Check::below(format!("gap at h={h}"), e0, 5e-2));
        rows.push(ErrorRow {
            h,
            eps0: e0,
            eps1: Some(e1),
            seconds,
        });
    }
    Ok(ErrorReport {
        case: Case::Rational,
        reference: "rational".into(),
        rows,
        checks,
        tables: Vec::new(),
    })
}

/// Moduli of the eigenvalues of `P` for constant media, `θ = (1, 1)`, `k = 0`, `ω = i`.
#[derive(Clone, Debug)]
pub struct RiccatiOracle {
    pub h: f64,
    pub n_s: usize,
    /// Sorted in decreasing order.
    pub moduli: Vec<f64>,
    pub residual_spectral: f64,
    pub residual_newton: f64,
    /// `‖P_spectral − P_newton‖ / ‖P_spectral‖` (Frobenius).
    pub agreement: f64,
    pub spectral_radius: f64,
}

impl RiccatiOracle {
    /// Exact modulus `e^{−r}` with `r² = (2πq)² + 1`, `q = m₁ + m₂`.
    pub fn exact(q: i64) -> f64 {
        (-((2.0 * PI * q as f64).powi(2) + 1.0).sqrt()).exp()
    }

    /// Largest relative deviation of the leading `n_s` moduli (the `q = 0` cluster) from `e^{−1}`.
    pub fn leading_error(&self) -> f64 {
        let e = Self::exact(0);
        self.moduli[..self.n_s]
            .iter()
            .map(|m| (m - e).abs() / e)
            .fold(0.0, f64::max)
    }
}

pub fn riccati_oracle(h: f64) -> Result<RiccatiOracle> {
    let config = constant_config_a(1.0, 1.0, 1.0, 1.0);
    let medium = HalfSpaceMedium::new(&config, Side::Plus)?;
    let cell = SliceCell::new(medium.cut, h, None)?;
    let omega = C64::new(0.0, 1.0);
    let ops = cell_operators(&cell, &medium, omega, 0.0)?;
    let t = &ops.local.blocks;
    let ps = riccati_with_symmetry(
        t,
        cell.n_s(),
        cell.nz,
        ops.slice_period,
        RiccatiBackend::Spectral,
    )?;
    let pn = riccati_with_symmetry(
        t,
        cell.n_s(),
        cell.nz,
        ops.slice_period,
        RiccatiBackend::Newton,
    )?;
    let mut moduli: Vec<f64> = ps.eigenvalues.iter().map(|l| l.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(RiccatiOracle {
        h,
        n_s: cell.n_s(),
        moduli,
        residual_spectral: ps.residual,
        residual_newton: pn.residual,
        agreement: frobenius(&(&ps.p - &pn.p)) / frobenius(&ps.p),
        spectral_radius: ps.spectral_radius,
    })
}

fn oracle_tolerance(h: f64) -> f64 {
    if h <= 0.05 + 1e-12 {
        0.025
    } else {
        0.05
    }
}

fn case_riccati_oracle(hs: &[f64]) -> Result<ErrorReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut table = String::from("h,index,modulus,exact,rel_err\n");
    for &h in hs {
        let (o, seconds) = timed(|| riccati_oracle(h))?;
        let err = o.leading_error();
        checks.push(Check::below(
            format!("h={h} leading eigenvalue error"),
            err,
            oracle_tolerance(h),
        ));
        checks.push(Check::below(
            format!("h={h} spectral radius"),
            o.spectral_radius,
            1.0 - 1e-12,
        ));
        checks.push(Check::below(
            format!("h={h} spectral residual"),
            o.residual_spectral,
            1e-10,
        ));
        checks.push(Check::below(
            format!("h={h} newton residual"),
            o.residual_newton,
            1e-10,
        ));
        checks.push(Check::below(
            format!("h={h} backend agreement"),
            o.agreement,
            1e-8,
        ));
        // leading q = 0 cluster, then the q = ±1 cluster
        for (i, &m) in o.moduli.iter().take(3 * o.n_s).enumerate() {
            let exact = RiccatiOracle::exact(if i < o.n_s { 0 } else { 1 });
            let _ = writeln!(table, "{h},{i},{m},{exact},{}", (m - exact).abs() / exact);
        }
        rows.push(ErrorRow {
            h,
            eps0: err,
            eps1: None,
            seconds,
        });
    }
    Ok(ErrorReport {
        case: Case::RiccatiOracle,
        reference: "exp(-r)".into(),
        rows,
        checks,
        tables: vec![("riccati_oracle_eigenvalues.csv".into(), table)],
    })
}

/// Highest torus mode index used to compare the cell operators of the two discretizations.
pub const ORACLE_MODES: i32 = 1;

/// Media compared in the 3D oracle case.
pub fn oracle_media() -> [(&'static str, Config); 2] {
    [
        ("constant", constant_config_a(1.0, 2.0, 1.0, 2f64.sqrt())),
        ("bump", bump_config_a(1.0, 2f64.sqrt(), 1, 1)),
    ]
}

fn case_oracle3d(ns: &[usize]) -> Result<ErrorReport> {
    let omega = C64::new(2.0, 0.5);
    let mut checks = Vec::new();
    let mut table = String::from("medium,side,k,n,gap,gap00,gap01,gap10,gap11\n");
    let mut worst = vec![0.0f64; ns.len()];
    let mut seconds = vec![0.0f64; ns.len()];
    for (name, config) in oracle_media() {
        for side in [Side::Plus, Side::Minus] {
            let medium = HalfSpaceMedium::new(&config, side)?;
            for k in [0.0, PI / 2.0] {
                let mut gaps = Vec::new();
                for (i, &n) in ns.iter().enumerate() {
                    let ((a, b), s) = timed(|| {
                        Ok((
                            mode_dtn_3d(&medium, omega, k, n, ORACLE_MODES)?,
                            mode_dtn_slices(&medium, omega, k, n, ORACLE_MODES)?,
                        ))
                    })?;
                    let gap = b.relative_gap(&a);
                    let bl = b.block_gaps(&a);
                    let _ = writeln!(
                        table,
                        "{name},{side:?},{k},{n},{gap},{},{},{},{}",
                        bl[0], bl[1], bl[2], bl[3]
                    );
                    worst[i] = worst[i].max(gap);
                    seconds[i] += s;
                    gaps.push((n, gap));
                }
                let label = format!("{name} {side:?} k={k:.4}");
                if let Some(&(n, g)) = gaps.first() {
                    checks.push(Check::below(format!("{label} gap at n={n}"), g, 0.15));
                }
                for w in gaps.windows(2) {
                    checks.push(Check::below(
                        format!("{label} gap at n={} vs n={}", w[1].0, w[0].0),
                        w[1].1 / w[0].1,
                        1.0 - 1e-12,
                    ));
                }
            }
        }
    }
    let rows = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| ErrorRow {
            h: 1.0 / n as f64,
            eps0: worst[i],
            eps1: None,
            seconds: seconds[i],
        })
        .collect();
    Ok(ErrorReport {
        case: Case::Oracle3d,
        reference: "oracle3d".into(),
        rows,
        checks,
        tables: vec![("oracle3d_gaps.csv".into(), table)],
    })
}

/// Points `(0, z)`, `z ∈ [−2, 2]`, on which interface traces are compared.
pub fn trace_points() -> Vec<(f64, f64)> {
    (0..=200)
        .map(|i| (0.0, -2.0 + 4.0 * i as f64 / 200.0))
        .collect()
}

/// `max |a − b| / max |a|`.
pub fn relative_sup(a: &[C64], b: &[C64]) -> f64 {
    let sup = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let d = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    d / sup
}

fn invariance_trace(
    config: &Config,
    ell: i32,
    h: f64,
    n_s: Option<usize>,
    n_k: usize,
    checks: &mut Vec<Check>,
    name: &str,
) -> Result<(Vec<C64>, f64)> {
    timed(|| {
        let params = PipelineParams {
            h,
            n_s,
            n_k,
            ..Default::default()
        };
        let sweep = solve_sweep(
            config,
            C64::new(2.0, 0.5),
            &AugmentedDataSpec { ell },
            &JumpData::default(),
            &params,
        )?;
        sweep_checks(name, &sweep, checks);
        sample_u(&sweep, &trace_points())
    })
}

/// Slice count of the base run, used for the substituted periods as well.
fn base_slices(h: f64) -> Result<usize> {
    let cut = crate::media::build_cut_matrix(&bump_config_a(1.0, 2f64.sqrt(), 1, 1))?;
    Ok(SliceCell::new(cut, h, None)?.n_s())
}

fn case_invariance(case: Case, hs: &[f64], n_k: usize) -> Result<ErrorReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let base = bump_config_a(1.0, 2f64.sqrt(), 1, 1);
    for &h in hs {
        let (a, sa) = invariance_trace(&base, 0, h, None, n_k, &mut checks, "(1,sqrt2) G1")?;
        let (b, sb) = if case == Case::InvariancePeriod {
            let n_s = base_slices(h)?;
            invariance_trace(
                &bump_config_a(3.0, 2.0 * 2f64.sqrt(), 3, 2),
                0,
                h,
                Some(n_s),
                n_k,
                &mut checks,
                "(3,2sqrt2) G1",
            )?
        } else {
            invariance_trace(&base, 1, h, None, n_k, &mut checks, "(1,sqrt2) G2")?
        };
        let d = relative_sup(&a, &b);
        checks.push(Check::below(format!("trace difference at h={h}"), d, 2e-2));
        rows.push(ErrorRow {
            h,
            eps0: d,
            eps1: None,
            seconds: sa + sb,
        });
    }
    Ok(ErrorReport {
        case,
        reference: if case == Case::InvariancePeriod {
            "periods (1,sqrt2)"
        } else {
            "data G1"
        }
        .into(),
        rows,
        checks,
        tables: Vec::new(),
    })
}

/// Overrides of the default parameters of a validation case.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidateOptions {
    /// Mesh sizes; for `oracle3d`, `1/h` gives the cube resolution.
    pub h: Option<Vec<f64>>,
    pub n_k: Option<usize>,
}

impl ValidateOptions {
    /// Reads `h = 0.1 0.05` and `n_k = 32` from an optional `[validate]` section; other sections are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut opts = ValidateOptions::default();
        let mut in_section = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                in_section = content == "[validate]";
                continue;
            }
            if !in_section {
                continue;
            }
            let (key, v) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key = value, got '{content}'")))?;
            match key.trim() {
                "h" => opts.h = Some(parse_floats(line, "h", &v.replace(',', " "))?),
                "n_k" => opts.n_k = Some(parse_num(line, "n_k", v.trim())?),
                other => {
                    return Err(parse_err(
                        line,
                        format!("unknown key '{other}' in [validate]"),
                    ))
                }
            }
        }
        Ok(opts)
    }
}

/// Runs one validation case with its default parameters, overridden by `opts`.
pub fn run_case(case: Case, opts: &ValidateOptions) -> Result<ErrorReport> {
    let n_k = opts.n_k.unwrap_or(32);
    let hs = |default: &[f64]| opts.h.clone().unwrap_or_else(|| default.to_vec());
    match case {
        Case::Homogeneous => case_homogeneous(&hs(&[0.1, 0.05]), n_k),
        Case::Rational => case_rational(&hs(&[0.05]), n_k),
        Case::RiccatiOracle => case_riccati_oracle(&hs(&[0.1, 0.05])),
        Case::Oracle3d => {
            let ns: Vec<usize> = hs(&[0.125, 0.0625])
                .iter()
                .map(|h| (1.0 / h).round() as usize)
                .collect();
            case_oracle3d(&ns)
        }
        Case::InvariancePeriod | Case::InvarianceData => case_invariance(case, &hs(&[0.05]), n_k),
    }
}

/// Runs a validation case and writes `<case>_errors.csv` and its tables into `out`.
pub fn cmd_validate(case: Case, opts: &ValidateOptions, out: &Path) -> Result<ErrorReport> {
    let report = run_case(case, opts)?;
    fs::create_dir_all(out)?;
    fs::write(
        out.join(format!("{}_errors.csv", case.name())),
        report.csv(),
    )?;
    for (name, content) in &report.tables {
        fs::write(out.join(name), content)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            problem: ProblemSpec {
                config: bump_config_a(3.0, 2.0 * 2f64.sqrt(), 3, 2),
                omega: C64::new(2.0, 0.5),
                ell: 1,
                g: JumpData::default(),
            },
            disc: Discretization {
                n_s: Some(20),
                reference: ReferenceKind::Rational,
                ..Default::default()
            },
            output: OutputSpec {
                window: SampleGrid::omega0(),
                dir: PathBuf::from("runs/a"),
            },
        }
    }

    #[test]
    fn text_round_trip() {
        let cfg = sample();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "[problem]\nconfig = A\nomega_re = x\n";
        match RunConfig::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match RunConfig::parse("[problem]\nbogus = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_must_fit_cells() {
        let mut cfg = sample();
        cfg.output.window.x1 = 1.5;
        assert!(cfg.validate().is_err());
        cfg.disc.n_cells_plus = 2;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn relative_errors_vanish_on_identical_fields() {
        let w = SampleGrid {
            x0: -1.0,
            x1: 1.0,
            z0: 0.0,
            z1: 1.0,
            nx: 4,
            nz: 3,
        };
        let u: Vec<C64> = w
            .points()
            .iter()
            .map(|&(x, z)| C64::new(x * z, x.abs()))
            .collect();
        assert_eq!(w.relative_errors(&u, &u), (0.0, 0.0));
    }

    #[test]
    fn case_names_parse() {
        for c in Case::ALL {
            assert_eq!(c.name().parse::<Case>().unwrap(), c);
        }
    }
}
