//! Independent reference solutions: the Fourier integral for piecewise constant media and a
//! direct Floquet-Bloch method for media sharing a common period along the interface.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem2d::{assemble, DirichletSolver, EdgeTag, StructuredMesh2D};
use crate::halfguide::{halfguide_dtn, solve_riccati, traces, DtnBlocks, RiccatiBackend};
use crate::linalg::{CMat, ZERO};
use crate::media::{frac, Config, HalfSpaceMedium, JumpData, Side};
use crate::transmission::{interface_solve, inverse_fb_point, FloquetGrid};

/// Parameters of the Fourier reference for constant `ρ±` and `A = I`.
#[derive(Clone, Copy, Debug)]
pub struct FourierRefParams {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub omega: C64,
    pub g: JumpData,
    pub z_max: f64,
    pub n_zeta: usize,
    /// Nodes of the trapezoid rule computing `ĝ` over the support of `g`.
    pub n_data: usize,
}

impl FourierRefParams {
    /// Truncation scaled with `max(1, |ω|)`.
    pub fn new(rho_plus: f64, rho_minus: f64, omega: C64, g: JumpData) -> Self {
        let scale = omega.norm().max(1.0);
        let n_zeta = ((16384.0 * scale).ceil() as usize + 1) & !1;
        FourierRefParams {
            rho_plus,
            rho_minus,
            omega,
            g,
            z_max: 320.0 * scale,
            n_zeta,
            n_data: 4000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.im > 0.0) {
            return Err(Error::Config("reference needs Im ω > 0".into()));
        }
        if self.n_zeta == 0 || self.n_zeta % 2 != 0 {
            return Err(Error::Config(format!(
                "N_ζ must be even and positive, got {}",
                self.n_zeta
            )));
        }
        if !(self.rho_plus > 0.0 && self.rho_minus > 0.0 && self.z_max > 0.0) {
            return Err(Error::Config(
                "reference parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `r = √(ζ² − ρω²)` on the branch with `Re r > 0`.
pub fn decay_root(zeta: f64, rho: f64, omega: C64) -> C64 {
    let r = (C64::new(zeta * zeta, 0.0) - omega * omega * rho).sqrt();
    assert!(r.re > 0.0, "Re r vanished at ζ = {zeta}");
    r
}

/// `ĝ(ζ) = ∫ g(z) e^{−iζz} dz` by the trapezoid rule on the support (the integrand is smooth and
/// vanishes to all orders at both ends).
pub fn data_transform(g: &JumpData, zeta: f64, n: usize) -> C64 {
    let (a, b) = g.support();
    let h = (b - a) / n as f64;
    let mut acc = ZERO;
    for i in 1..n {
        let z = a + i as f64 * h;
        acc += C64::from_polar(g.eval(z), -zeta * z);
    }
    acc * h
}

/// `u(x, z) = (1/2π) ∫ ĝ(ζ) / (r⁺ + r⁻) e^{−r^± |x|} e^{iζz} dζ` on the given points.
pub fn homogeneous_ref(params: &FourierRefParams, points: &[(f64, f64)]) -> Result<Vec<C64>> {
    params.validate()?;
    let n = params.n_zeta;
    let dz = 2.0 * params.z_max / n as f64;
    // nodes ζ_i = −Z + (i + 1/2) Δζ, symmetric about 0
    let nodes: Vec<(f64, C64, C64, C64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zeta = -params.z_max + (i as f64 + 0.5) * dz;
            let rp = decay_root(zeta, params.rho_plus, params.omega);
            let rm = decay_root(zeta, params.rho_minus, params.omega);
            let gh = data_transform(&params.g, zeta, params.n_data);
            (zeta, gh / (rp + rm), rp, rm)
        })
        .collect();
    Ok(points
        .par_iter()
        .map(|&(x, z)| {
            let mut acc = ZERO;
            for &(zeta, a, rp, rm) in &nodes {
                let r = if x >= 0.0 { rp } else { rm };
                acc += a * (-r * x.abs() + C64::new(0.0, zeta * z)).exp();
            }
            acc * (dz / (2.0 * PI))
        })
        .collect())
}

/// Common period `τ = a p⁺_z = b p⁻_z` with small integers `a, b`.
pub fn common_period(p_plus: f64, p_minus: f64) -> Result<f64> {
    for a in 1..=24u32 {
        for b in 1..=24u32 {
            let (tp, tm) = (a as f64 * p_plus, b as f64 * p_minus);
            if (tp - tm).abs() <= 1e-12 * tp.max(tm) {
                return Ok(tp);
            }
        }
    }
    Err(Error::Config(format!(
        "periods {p_plus} and {p_minus} have no common multiple with small integer factors"
    )))
}

/// Discretization of the direct Floquet reference.
#[derive(Clone, Copy, Debug)]
pub struct RationalParams {
    pub h: f64,
    pub n_k: usize,
    pub cells_plus: usize,
    pub cells_minus: usize,
    pub backend: RiccatiBackend,
}

struct SideCells {
    solver: DirichletSolver,
    traces: Vec<Vec<C64>>,
}

/// Fields of the direct Floquet reference at every Floquet point.
pub struct RationalSolution {
    pub tau: f64,
    pub grid: FloquetGrid,
    pub mesh: StructuredMesh2D,
    pub params: RationalParams,
    /// Nodal fields per Floquet point, side (plus, minus) and cell.
    fields: Vec<[Vec<Vec<C64>>; 2]>,
    pub max_riccati_residual: f64,
    pub max_spectral_radius: f64,
}

fn boundary_dofs(mesh: &StructuredMesh2D) -> Result<(Vec<usize>, usize)> {
    let mut b = mesh.edge_dofs(EdgeTag::X0)?;
    let n = b.len();
    b.extend(mesh.edge_dofs(EdgeTag::X1)?);
    Ok((b, n))
}

fn solve_rational_side(
    mesh: &StructuredMesh2D,
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
    tau: f64,
    backend: RiccatiBackend,
) -> Result<(
    DirichletSolver,
    crate::halfguide::PropagationOperator,
    CMat,
    f64,
)> {
    let form = assemble(
        mesh,
        |x, z| medium.physical(x, z),
        omega,
        k,
        [0.0, 1.0 / tau],
    )?;
    let (bd, n) = boundary_dofs(mesh)?;
    let solver = DirichletSolver::new(&form, &bd)?;
    let s = solver.schur_complement();
    let blk = |r: usize, c: usize| s.as_ref().submatrix(r * n, c * n, n, n).to_owned();
    // T^{jℓ}: data on face j, flux tested on face ℓ
    let t = DtnBlocks {
        t00: blk(0, 0),
        t01: blk(1, 0),
        t10: blk(0, 1),
        t11: blk(1, 1),
    };
    let prop = solve_riccati(&t, backend)?;
    if !(prop.spectral_radius < 1.0) {
        return Err(Error::SpectralRadius {
            radius: prop.spectral_radius,
        });
    }
    let lambda = halfguide_dtn(&t, &prop.p);
    let res = prop.residual;
    Ok((solver, prop, lambda, res))
}

/// Transformed jump data `(1/√2π) Σ_n g(z + nτ) e^{−ik(z/τ + n)}` tested against the periodic edge basis.
fn rational_rhs(mesh: &StructuredMesh2D, g: &JumpData, k: f64, tau: f64) -> Vec<C64> {
    let nz = mesh.nz;
    let hz = mesh.hz();
    let (a, b) = g.support();
    let vals: Vec<C64> = (0..nz)
        .map(|iz| {
            let z = iz as f64 * hz;
            let lo = ((a - z) / tau).ceil() as i64;
            let hi = ((b - z) / tau).floor() as i64;
            let mut acc = ZERO;
            for n in lo..=hi {
                acc += C64::from_polar(g.eval(z + n as f64 * tau), -k * (z / tau + n as f64));
            }
            acc / (2.0 * PI).sqrt()
        })
        .collect();
    let mut rhs = vec![ZERO; nz];
    for e in 0..nz {
        let f = (e + 1) % nz;
        rhs[e] += (vals[e] * 2.0 + vals[f]) * (hz / 6.0);
        rhs[f] += (vals[e] + vals[f] * 2.0) * (hz / 6.0);
    }
    rhs
}

/// Direct Floquet-Bloch solution for ConfigA media sharing a common interface period.
pub fn rational_solve(
    config: &Config,
    omega: C64,
    g: &JumpData,
    params: &RationalParams,
) -> Result<RationalSolution> {
    let c = match config {
        Config::A(c) => c,
        Config::B(_) => {
            return Err(Error::Config(
                "the direct Floquet reference needs configuration A".into(),
            ))
        }
    };
    config.validate()?;
    if !(omega.im > 0.0) {
        return Err(Error::Config("reference needs Im ω > 0".into()));
    }
    let tau = common_period(c.p_plus_z, c.p_minus_z)?;
    let nx = ((1.0 / params.h) - 1e-9).ceil().max(2.0) as usize;
    let nz = ((tau / params.h) - 1e-9).ceil().max(2.0) as usize;
    let mesh = StructuredMesh2D::new(1.0, tau, nx, nz, false, true)?;
    let plus = HalfSpaceMedium::new(config, Side::Plus)?;
    let minus = HalfSpaceMedium::new(config, Side::Minus)?;
    let grid = FloquetGrid::new(params.n_k)?;
    let results = (0..grid.n_k)
        .into_par_iter()
        .map(|j| {
            let k = grid.k(j);
            let run = || -> Result<([Vec<Vec<C64>>; 2], f64, f64)> {
                let (sp, pp, lp, rp) =
                    solve_rational_side(&mesh, &plus, omega, k, tau, params.backend)?;
                let (sm, pm, lm, rm) =
                    solve_rational_side(&mesh, &minus, omega, k, tau, params.backend)?;
                let rhs = rational_rhs(&mesh, g, k, tau);
                let (phi, _) = interface_solve(&lp, &lm, &rhs)?;
                let sides = [
                    SideCells {
                        solver: sp,
                        traces: traces(&pp.p, &phi, params.cells_plus),
                    },
                    SideCells {
                        solver: sm,
                        traces: traces(&pm.p, &phi, params.cells_minus),
                    },
                ];
                let fields = sides.map(|s| {
                    (0..s.traces.len() - 1)
                        .map(|n| {
                            let mut data = s.traces[n].clone();
                            data.extend_from_slice(&s.traces[n + 1]);
                            s.solver.solve(&data, None)
                        })
                        .collect::<Vec<_>>()
                });
                Ok((
                    fields,
                    rp.max(rm),
                    pp.spectral_radius.max(pm.spectral_radius),
                ))
            };
            run().map_err(|e| e.in_floquet(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fields = Vec::with_capacity(results.len());
    let (mut res, mut rad) = (0.0f64, 0.0f64);
    for (f, r, s) in results {
        fields.push(f);
        res = res.max(r);
        rad = rad.max(s);
    }
    Ok(RationalSolution {
        tau,
        grid,
        mesh,
        params: *params,
        fields,
        max_riccati_residual: res,
        max_spectral_radius: rad,
    })
}

impl RationalSolution {
    /// Physical field at `(x, z)` by the discrete inverse transform in `z/τ`.
    pub fn value(&self, x: f64, z: f64) -> Result<C64> {
        let (side, xr, cells) = if x >= 0.0 {
            (0, x, self.params.cells_plus)
        } else {
            (1, -x, self.params.cells_minus)
        };
        let mut n = xr.floor() as usize;
        if n >= cells && xr <= cells as f64 + 1e-12 {
            n = cells.saturating_sub(1);
        }
        if n >= cells {
            return Err(Error::OutOfRange { x, z });
        }
        let zeta = z / self.tau;
        let zl = frac(zeta) * self.tau;
        let (dofs, bw, _) = self.mesh.locate((xr - n as f64).clamp(0.0, 1.0), zl)?;
        let vals: Vec<C64> = self
            .fields
            .iter()
            .map(|f| {
                let u = &f[side][n];
                u[dofs[0]] * bw[0] + u[dofs[1]] * bw[1] + u[dofs[2]] * bw[2]
            })
            .collect();
        Ok(inverse_fb_point(&self.grid, &vals, zeta))
    }
}

/// Samples the direct Floquet reference on physical points.
pub fn rational_ref(
    config: &Config,
    omega: C64,
    g: &JumpData,
    points: &[(f64, f64)],
    params: &RationalParams,
) -> Result<Vec<C64>> {
    let sol = rational_solve(config, omega, g, params)?;
    points.par_iter().map(|&(x, z)| sol.value(x, z)).collect()
}
