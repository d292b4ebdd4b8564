//! Transmission configurations, the cut matrix, lifted and sliced coefficients, jump data.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Values within this distance of an integer are snapped to it when folding.
pub const FOLD_SNAP: f64 = 1e-12;

/// Fractional part in `[0, 1)`, snapping near-integers to 0.
pub fn frac(t: f64) -> f64 {
    let r = t - t.floor();
    if r < FOLD_SNAP || 1.0 - r < FOLD_SNAP {
        0.0
    } else {
        r
    }
}

/// Representative of `t` modulo 1 in `(-1/2, 1/2]`.
pub fn fold_centered(t: f64) -> f64 {
    let r = frac(t);
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Smooth cut-off `exp(1 - 1/(1 - t^2))` on `|t| < 1`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    pub omega: C64,
}

impl Frequency {
    pub fn new(omega: C64) -> Result<Self> {
        if !(omega.im > 0.0) || !omega.re.is_finite() {
            return Err(Error::Config(format!(
                "frequency must have positive imaginary part, got {omega}"
            )));
        }
        Ok(Frequency { omega })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutMatrix {
    pub theta1: f64,
    pub theta2: f64,
}

impl CutMatrix {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if theta1 == 0.0 || !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::Config(format!(
                "invalid cut matrix entries ({theta1}, {theta2})"
            )));
        }
        Ok(CutMatrix { theta1, theta2 })
    }

    pub fn vartheta(&self) -> f64 {
        self.theta2 / self.theta1
    }

    /// Rows `(1,0), (0,θ1), (0,θ2)`.
    pub fn matrix(&self) -> [[f64; 2]; 3] {
        [[1.0, 0.0], [0.0, self.theta1], [0.0, self.theta2]]
    }

    /// Point `C x + s e2` of the lifted space.
    pub fn lift(&self, x: f64, z: f64, s: f64) -> (f64, f64, f64) {
        (x, self.theta1 * z, self.theta2 * z + s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Constant,
    BumpGrid,
    BumpRadial,
}

/// Scalar field given in cell coordinates, `Z^2`-periodic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientField2D {
    pub family: Family,
    pub base: f64,
    pub amplitude: f64,
    pub scaling: f64,
    /// Number of copies of the pattern stacked along z inside one cell.
    pub repeat_z: u32,
}

impl CoefficientField2D {
    pub fn constant(value: f64) -> Self {
        CoefficientField2D {
            family: Family::Constant,
            base: value,
            amplitude: 0.0,
            scaling: 1.0,
            repeat_z: 1,
        }
    }

    /// `base + amplitude φ(scaling x̊) φ(scaling z̊)`.
    pub fn bump_grid(base: f64, amplitude: f64, scaling: f64) -> Self {
        CoefficientField2D {
            family: Family::BumpGrid,
            base,
            amplitude,
            scaling,
            repeat_z: 1,
        }
    }

    /// `base + amplitude φ(scaling |(x̊, z̊)|)`.
    pub fn bump_radial(base: f64, amplitude: f64, scaling: f64) -> Self {
        CoefficientField2D {
            family: Family::BumpRadial,
            base,
            amplitude,
            scaling,
            repeat_z: 1,
        }
    }

    /// The grid bump family used for the minus side in the experiments.
    pub fn paper_minus() -> Self {
        Self::bump_grid(0.5, 1.0, 4.0)
    }

    /// The radial bump family used for the plus side in the experiments.
    pub fn paper_plus() -> Self {
        Self::bump_radial(0.5, 1.0, 2.5)
    }

    /// Same pattern stacked `n` times along z, for describing a medium with a multiple of its period.
    pub fn with_repeat_z(mut self, n: u32) -> Self {
        self.repeat_z = n.max(1);
        self
    }

    /// Evaluates at cell coordinates; the cell is centred on lattice points.
    pub fn eval_cell(&self, xc: f64, zc: f64) -> f64 {
        let zc = zc * self.repeat_z as f64;
        match self.family {
            Family::Constant => self.base,
            Family::BumpGrid => {
                let (a, b) = (fold_centered(xc), fold_centered(zc));
                self.base + self.amplitude * bump(self.scaling * a) * bump(self.scaling * b)
            }
            Family::BumpRadial => {
                let (a, b) = (fold_centered(xc), fold_centered(zc));
                self.base + self.amplitude * bump(self.scaling * a.hypot(b))
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self.family {
            Family::Constant => (self.base, self.base),
            _ => (
                self.base + self.amplitude.min(0.0),
                self.base + self.amplitude.max(0.0),
            ),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.family == Family::Constant || self.amplitude == 0.0
    }
}

pub type Tensor = [[f64; 2]; 2];

pub const IDENTITY: Tensor = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TensorField {
    Constant(Tensor),
    Isotropic(CoefficientField2D),
}

impl TensorField {
    pub fn eval_cell(&self, xc: f64, zc: f64) -> Tensor {
        match self {
            TensorField::Constant(a) => *a,
            TensorField::Isotropic(f) => {
                let v = f.eval_cell(xc, zc);
                [[v, 0.0], [0.0, v]]
            }
        }
    }

    /// Lower bound of the smallest eigenvalue.
    pub fn lower_bound(&self) -> f64 {
        match self {
            TensorField::Constant(a) => min_eig(a),
            TensorField::Isotropic(f) => f.bounds().0,
        }
    }
}

fn min_eig(a: &Tensor) -> f64 {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt()
}

/// Coefficients `(A, ρ)` of one half-plane, in cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Medium {
    pub a: TensorField,
    pub rho: CoefficientField2D,
}

impl Medium {
    pub fn constant(rho: f64) -> Self {
        Medium {
            a: TensorField::Constant(IDENTITY),
            rho: CoefficientField2D::constant(rho),
        }
    }

    pub fn with_rho(rho: CoefficientField2D) -> Self {
        Medium {
            a: TensorField::Constant(IDENTITY),
            rho,
        }
    }

    pub fn eval_cell(&self, xc: f64, zc: f64) -> (Tensor, f64) {
        (self.a.eval_cell(xc, zc), self.rho.eval_cell(xc, zc))
    }

    fn validate(&self, what: &str) -> Result<()> {
        if let TensorField::Constant(a) = self.a {
            if (a[0][1] - a[1][0]).abs() > 1e-14 {
                return Err(Error::Config(format!("{what}: tensor A is not symmetric")));
            }
        }
        if !(self.a.lower_bound() > 0.0) {
            return Err(Error::Config(format!(
                "{what}: tensor A is not positive definite"
            )));
        }
        if !(self.rho.bounds().0 > 0.0) {
            return Err(Error::Config(format!(
                "{what}: rho is not bounded below by a positive constant"
            )));
        }
        Ok(())
    }
}

/// Media periodic along the interface on both sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigA {
    pub plus: Medium,
    pub minus: Medium,
    pub p_plus_z: f64,
    pub p_minus_z: f64,
}

/// Homogeneous minus side, plus side periodic with respect to `Z e_x + Z p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigB {
    pub plus: Medium,
    pub p_plus: (f64, f64),
    pub rho_minus_const: f64,
    pub a_minus_const: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Config {
    A(ConfigA),
    B(ConfigB),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        match self {
            Config::A(c) => {
                if !(c.p_plus_z > 0.0) || !(c.p_minus_z > 0.0) {
                    return Err(Error::Config(format!(
                        "periods must be positive, got ({}, {})",
                        c.p_plus_z, c.p_minus_z
                    )));
                }
                c.plus.validate("plus side")?;
                c.minus.validate("minus side")
            }
            Config::B(c) => {
                if c.p_plus.1 == 0.0 || !c.p_plus.1.is_finite() || !c.p_plus.0.is_finite() {
                    return Err(Error::Config(format!(
                        "periodicity vector must have p_z != 0, got {:?}",
                        c.p_plus
                    )));
                }
                if !(c.rho_minus_const > 0.0) || !(min_eig(&c.a_minus_const) > 0.0) {
                    return Err(Error::Config(
                        "minus side constants must be positive".into(),
                    ));
                }
                c.plus.validate("plus side")
            }
        }
    }

    /// Whether both sides have constant coefficients.
    pub fn is_homogeneous(&self) -> bool {
        let const_medium =
            |m: &Medium| matches!(m.a, TensorField::Constant(_)) && m.rho.is_constant();
        match self {
            Config::A(c) => const_medium(&c.plus) && const_medium(&c.minus),
            Config::B(c) => const_medium(&c.plus),
        }
    }
}

pub fn build_cut_matrix(config: &Config) -> Result<CutMatrix> {
    config.validate()?;
    match config {
        Config::A(c) => CutMatrix::new(1.0 / c.p_plus_z, 1.0 / c.p_minus_z),
        Config::B(c) => {
            // p and -p generate the same lattice; keep p_z > 0 so the slice cell is (0, 1/θ1)
            let (px, pz) = if c.p_plus.1 < 0.0 {
                (-c.p_plus.0, -c.p_plus.1)
            } else {
                c.p_plus
            };
            CutMatrix::new(1.0 / pz, -px / pz)
        }
    }
}

/// Physical coefficients `(A, ρ)` at `(x, z)` on the given side.
pub fn eval_physical_side(config: &Config, side: Side, x: f64, z: f64) -> (Tensor, f64) {
    match (config, side) {
        (Config::A(c), Side::Plus) => c.plus.eval_cell(x, z / c.p_plus_z),
        (Config::A(c), Side::Minus) => c.minus.eval_cell(x, z / c.p_minus_z),
        (Config::B(c), Side::Plus) => {
            let (px, pz) = c.p_plus;
            c.plus.eval_cell(x - (px / pz) * z, z / pz)
        }
        (Config::B(c), Side::Minus) => (c.a_minus_const, c.rho_minus_const),
    }
}

pub fn eval_physical(config: &Config, x: f64, z: f64) -> (Tensor, f64) {
    let side = if x >= 0.0 { Side::Plus } else { Side::Minus };
    eval_physical_side(config, side, x, z)
}

/// Lifted coefficients `(A_p, ρ_p)` on the given side; `Z^3`-periodic in `(z1, z2)`.
pub fn eval_augmented_side(config: &Config, side: Side, x: f64, z1: f64, z2: f64) -> (Tensor, f64) {
    let (z1, z2) = (frac(z1), frac(z2));
    match (config, side) {
        (Config::A(c), Side::Plus) => c.plus.eval_cell(x, z1),
        (Config::A(c), Side::Minus) => c.minus.eval_cell(x, z2),
        (Config::B(c), Side::Plus) => {
            let pz = c.p_plus.1;
            if pz > 0.0 {
                c.plus.eval_cell(x + z2, z1)
            } else {
                // lattice generated by -p: z̊ = -z1 and the shear flips sign
                c.plus.eval_cell(x - z2, -z1)
            }
        }
        (Config::B(c), Side::Minus) => (c.a_minus_const, c.rho_minus_const),
    }
}

pub fn eval_augmented(config: &Config, x: f64, z1: f64, z2: f64) -> (Tensor, f64) {
    let side = if x >= 0.0 { Side::Plus } else { Side::Minus };
    eval_augmented_side(config, side, x, z1, z2)
}

/// Slice `s` of the lifted coefficients: `(A_p, ρ_p)(C x + s e2)`.
pub fn eval_sliced_side(config: &Config, side: Side, s: f64, x: f64, z: f64) -> (Tensor, f64) {
    let cut = build_cut_matrix(config).expect("validated configuration");
    eval_sliced_with(config, &cut, side, s, x, z)
}

pub fn eval_sliced(config: &Config, s: f64, x: f64, z: f64) -> (Tensor, f64) {
    let side = if x >= 0.0 { Side::Plus } else { Side::Minus };
    eval_sliced_side(config, side, s, x, z)
}

/// As [`eval_sliced_side`] with a precomputed cut matrix.
pub fn eval_sliced_with(
    config: &Config,
    cut: &CutMatrix,
    side: Side,
    s: f64,
    x: f64,
    z: f64,
) -> (Tensor, f64) {
    let (_, z1, z2) = cut.lift(x, z, s);
    eval_augmented_side(config, side, x, z1, z2)
}

/// Coefficients of one half-space seen from the interface, with `x' ≥ 0` pointing into it.
///
/// The minus side is mapped onto `x' > 0` by `x = −x'`; the tensor becomes `R A R` with
/// `R = diag(−1, 1)`, so both sides share the same cell solvers.
#[derive(Clone, Copy, Debug)]
pub struct HalfSpaceMedium {
    pub config: Config,
    pub cut: CutMatrix,
    pub side: Side,
}

impl HalfSpaceMedium {
    pub fn new(config: &Config, side: Side) -> Result<Self> {
        Ok(HalfSpaceMedium {
            config: *config,
            cut: build_cut_matrix(config)?,
            side,
        })
    }

    /// Maps a physical-side evaluation into the reflected frame.
    pub fn reflect(&self, (a, rho): (Tensor, f64)) -> (Tensor, f64) {
        match self.side {
            Side::Plus => (a, rho),
            Side::Minus => ([[a[0][0], -a[0][1]], [-a[1][0], a[1][1]]], rho),
        }
    }

    pub fn physical_x(&self, xr: f64) -> f64 {
        self.side.sign() * xr
    }

    /// Lifted coefficients at `(x', z1, z2)`.
    pub fn augmented(&self, xr: f64, z1: f64, z2: f64) -> (Tensor, f64) {
        self.reflect(eval_augmented_side(
            &self.config,
            self.side,
            self.physical_x(xr),
            z1,
            z2,
        ))
    }

    /// Slice `s` coefficients at `(x', z)`.
    pub fn sliced(&self, s: f64, xr: f64, z: f64) -> (Tensor, f64) {
        let (_, z1, z2) = self.cut.lift(xr, z, s);
        self.augmented(xr, z1, z2)
    }

    /// Physical coefficients at `(x', z)`.
    pub fn physical(&self, xr: f64, z: f64) -> (Tensor, f64) {
        self.reflect(eval_physical_side(
            &self.config,
            self.side,
            self.physical_x(xr),
            z,
        ))
    }
}

/// Jump data `g(z) = amplitude φ(scale z)` on the interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpData {
    pub amplitude: f64,
    pub scale: f64,
}

impl Default for JumpData {
    fn default() -> Self {
        JumpData {
            amplitude: 100.0,
            scale: 2.0,
        }
    }
}

impl JumpData {
    pub fn zero() -> Self {
        JumpData {
            amplitude: 0.0,
            scale: 2.0,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.amplitude * bump(self.scale * z)
    }

    /// Closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        let r = 1.0 / self.scale.abs();
        (-r, r)
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// Augmented data `G_ℓ(0, z1, z2) = e^{2iπℓ(z2 - ϑ z1)} g(z1/θ1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AugmentedDataSpec {
    pub ell: i32,
}

impl AugmentedDataSpec {
    pub fn eval(&self, g: &JumpData, cut: &CutMatrix, z1: f64, z2: f64) -> C64 {
        let phase = 2.0 * PI * self.ell as f64 * (z2 - cut.vartheta() * z1);
        C64::from_polar(g.eval(z1 / cut.theta1), phase)
    }
}
