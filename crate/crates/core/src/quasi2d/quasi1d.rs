//! Quasi-1D solution of a doubly periodic 2D cell problem with a degenerate directional operator.
//!
//! The problem `−D(μ D E) − ρ ω² E = f` on the unit torus, `D = θ₁∂₁ + θ₂∂₂`, is solved twice: by a
//! direct P1 discretization on the torus, and by 1D Dirichlet problems along the lines
//! `ζ ↦ ζθ + s e₂` coupled through the trace `φ = E|_{z₁=0}` on a Fourier grid in `s`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem2d::{assemble, load_vector, StructuredMesh2D};
use crate::linalg::{solve_dense, vec_norm, CMat, SparseLu, ZERO};
use crate::media::{frac, CutMatrix};
use crate::quasi2d::SliceGrid;

/// Both solutions sampled at the grid nodes `(i/n, j/n)`, `0 ≤ i, j < n`, row-major in `j`.
#[derive(Clone, Debug)]
pub struct Quasi1dDemo {
    pub n: usize,
    pub n_s: usize,
    pub direct: Vec<C64>,
    pub quasi: Vec<C64>,
    /// Trace `φ(s_m)` on the edge `z₁ = 0`.
    pub phi: Vec<C64>,
}

impl Quasi1dDemo {
    /// Relative discrete L² gap between the two solutions.
    pub fn gap(&self) -> f64 {
        let d: Vec<C64> = self
            .direct
            .iter()
            .zip(&self.quasi)
            .map(|(a, b)| a - b)
            .collect();
        vec_norm(&d) / vec_norm(&self.direct)
    }
}

/// Two-point Gauss rule on `[0, 1]`.
const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// P1 solution of one line problem, with its condensed boundary response.
struct LineSolve {
    /// Nodal values of the responses to unit data at `ζ = 0` and `ζ = L`.
    f: [Vec<C64>; 2],
    /// Nodal values of the zero-data response to the load.
    g: Vec<C64>,
    /// Weak boundary residuals: `r = S (a, b) + c`.
    schur: [[C64; 2]; 2],
    c: [C64; 2],
}

fn solve_line<M, R, F>(
    mu: &M,
    rho: &R,
    f: &F,
    cut: &CutMatrix,
    s: f64,
    n1: usize,
    omega: C64,
) -> Result<LineSolve>
where
    M: Fn(f64, f64) -> f64,
    R: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> C64,
{
    let len = 1.0 / cut.theta1;
    let h = len / n1 as f64;
    let om2 = omega * omega;
    let point = |zeta: f64| (cut.theta1 * zeta, cut.theta2 * zeta + s);
    let n = n1 + 1;
    let mut k = CMat::zeros(n, n);
    let mut load = vec![ZERO; n];
    for e in 0..n1 {
        for (t, wq) in GAUSS2 {
            let (z1, z2) = point((e as f64 + t) * h);
            let (m, r, fv) = (mu(z1, z2), rho(z1, z2), f(z1, z2));
            if !m.is_finite() || !r.is_finite() {
                return Err(Error::Coefficient { x: z1, z: z2 });
            }
            let phi = [1.0 - t, t];
            let dphi = [-1.0 / h, 1.0 / h];
            for i in 0..2 {
                load[e + i] += fv * (wq * h * phi[i]);
                for j in 0..2 {
                    k[(e + i, e + j)] +=
                        (m * dphi[i] * dphi[j] - r * om2 * phi[i] * phi[j]) * (wq * h);
                }
            }
        }
    }
    let ni = n - 2;
    let kii = CMat::from_fn(ni, ni, |i, j| k[(i + 1, j + 1)]);
    let mut rhs = CMat::zeros(ni, 3);
    for i in 0..ni {
        rhs[(i, 0)] = -k[(i + 1, 0)];
        rhs[(i, 1)] = -k[(i + 1, n - 1)];
        rhs[(i, 2)] = load[i + 1];
    }
    let sol = solve_dense(&kii, &rhs, "line problem")?;
    let full = |col: usize, a: C64, b: C64| -> Vec<C64> {
        let mut v = vec![ZERO; n];
        v[0] = a;
        v[n - 1] = b;
        for i in 0..ni {
            v[i + 1] = sol[(i, col)];
        }
        v
    };
    let one = C64::new(1.0, 0.0);
    let f0 = full(0, one, ZERO);
    let f1 = full(1, ZERO, one);
    let g = full(2, ZERO, ZERO);
    let residual = |u: &[C64], row: usize| -> C64 { (0..n).map(|j| k[(row, j)] * u[j]).sum() };
    let rows = [0, n - 1];
    let mut schur = [[ZERO; 2]; 2];
    let mut c = [ZERO; 2];
    for (i, &row) in rows.iter().enumerate() {
        schur[i][0] = residual(&f0, row);
        schur[i][1] = residual(&f1, row);
        c[i] = residual(&g, row) - load[row];
    }
    Ok(LineSolve {
        f: [f0, f1],
        g,
        schur,
        c,
    })
}

/// Direct P1 solve on the unit torus with the tensor `μ θθᵀ`.
fn solve_direct<M, R, F>(
    mu: &M,
    rho: &R,
    f: &F,
    cut: &CutMatrix,
    n: usize,
    omega: C64,
) -> Result<Vec<C64>>
where
    M: Fn(f64, f64) -> f64,
    R: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> C64,
{
    let mesh = StructuredMesh2D::new(1.0, 1.0, n, n, true, true)?;
    let (t1, t2) = (cut.theta1, cut.theta2);
    let form = assemble(
        &mesh,
        |x, z| {
            let m = mu(x, z);
            (
                [[m * t1 * t1, m * t1 * t2], [m * t1 * t2, m * t2 * t2]],
                rho(x, z),
            )
        },
        omega,
        0.0,
        [0.0, 0.0],
    )?;
    let b = load_vector(&mesh, f);
    let lu = SparseLu::new(&form.matrix, "periodic cell problem")?;
    let u = lu.solve_vec(&b);
    Ok((0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| u[mesh.dof(i, j)])
        .collect())
}

/// Solves the doubly periodic cell problem directly and by the quasi-1D method.
///
/// The torus mesh has `n × n` squares; each line problem uses `⌈n/θ₁⌉` segments and the trace lives
/// on `n_s` equispaced slices.
pub fn quasi1d_demo<M, R, F>(
    mu: M,
    rho: R,
    f: F,
    cut: &CutMatrix,
    n: usize,
    n_s: usize,
    omega: C64,
) -> Result<Quasi1dDemo>
where
    M: Fn(f64, f64) -> f64 + Sync,
    R: Fn(f64, f64) -> f64 + Sync,
    F: Fn(f64, f64) -> C64 + Sync,
{
    if !(omega.im > 0.0) {
        return Err(Error::Config(format!(
            "frequency must have positive imaginary part, got {omega}"
        )));
    }
    if n < 2 || n_s == 0 {
        return Err(Error::Config(format!(
            "invalid resolution n={n}, n_s={n_s}"
        )));
    }
    let n1 = ((n as f64 / cut.theta1).ceil() as usize).max(2);
    let grid = SliceGrid::new(n_s, cut.vartheta())?;
    let lines: Vec<LineSolve> = (0..n_s)
        .into_par_iter()
        .map(|m| solve_line(&mu, &rho, &f, cut, grid.s(m), n1, omega).map_err(|e| e.in_slice(m)))
        .collect::<Result<_>>()?;

    // Weak periodicity of the flux: Σ_m E_mᴴ (S_m E_m φ + c_m) = 0 with E_m φ = (φ(s_m), φ(s_m + ϑ)).
    let sh = grid.shift();
    let mut a = CMat::zeros(n_s, n_s);
    let mut rhs = CMat::zeros(n_s, 1);
    for (m, line) in lines.iter().enumerate() {
        let row = |i: usize, c: usize| -> C64 {
            if i == 0 {
                if c == m {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            } else {
                sh[(m, c)]
            }
        };
        for r in 0..n_s {
            for i in 0..2 {
                let ei = row(i, r).conj();
                if ei == ZERO {
                    continue;
                }
                rhs[(r, 0)] -= ei * line.c[i];
                for c in 0..n_s {
                    let v = line.schur[i][0] * row(0, c) + line.schur[i][1] * row(1, c);
                    a[(r, c)] += ei * v;
                }
            }
        }
    }
    let phi_m = solve_dense(&a, &rhs, "periodicity system")?;
    let phi: Vec<C64> = (0..n_s).map(|m| phi_m[(m, 0)]).collect();
    let phi_shift: Vec<C64> = (0..n_s)
        .map(|m| (0..n_s).map(|c| sh[(m, c)] * phi[c]).sum())
        .collect();
    let slices: Vec<Vec<C64>> = lines
        .iter()
        .enumerate()
        .map(|(m, l)| {
            (0..=n1)
                .map(|i| phi[m] * l.f[0][i] + phi_shift[m] * l.f[1][i] + l.g[i])
                .collect()
        })
        .collect();

    let len = 1.0 / cut.theta1;
    let hz = len / n1 as f64;
    let quasi: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let (z1, z2) = (i as f64 / n as f64, j as f64 / n as f64);
            let zeta = z1 / cut.theta1;
            let s = frac(z2 - cut.vartheta() * z1);
            let w = grid.interp_weights(s);
            let t = (zeta / hz).min(n1 as f64);
            let e = (t.floor() as usize).min(n1 - 1);
            let lam = t - e as f64;
            w.iter()
                .zip(&slices)
                .map(|(wm, u)| wm * (u[e] * (1.0 - lam) + u[e + 1] * lam))
                .sum()
        })
        .collect();
    let direct = solve_direct(&mu, &rho, &f, cut, n, omega)?;
    Ok(Quasi1dDemo {
        n,
        n_s,
        direct,
        quasi,
        phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_problem_gives_constant_field() {
        let cut = CutMatrix::new(1.0, 2f64.sqrt()).unwrap();
        let omega = C64::new(1.0, 0.5);
        let d = quasi1d_demo(
            |_, _| 1.0,
            |_, _| 2.0,
            |_, _| C64::new(1.0, 0.0),
            &cut,
            8,
            7,
            omega,
        )
        .unwrap();
        let exact = C64::new(1.0, 0.0) / (-2.0 * omega * omega);
        for v in d.direct.iter().chain(&d.quasi) {
            assert!((v - exact).norm() < 1e-10 * exact.norm());
        }
    }

    #[test]
    fn zero_load_gives_zero() {
        let cut = CutMatrix::new(1.0, 0.7).unwrap();
        let d = quasi1d_demo(
            |_, _| 1.0,
            |_, _| 1.0,
            |_, _| ZERO,
            &cut,
            6,
            5,
            C64::new(1.0, 0.3),
        )
        .unwrap();
        assert!(d.direct.iter().chain(&d.quasi).all(|v| v.norm() == 0.0));
    }
}
