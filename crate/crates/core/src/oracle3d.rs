//! Direct tetrahedral P1 solver for the degenerate lifted cell problems, used to cross-check the
//! slice-based local DtN operators.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fem2d::DirichletSolver;
use crate::halfguide::DtnBlocks;
use crate::linalg::{frobenius, CMat, CsrMatrix, ZERO};
use crate::media::{CutMatrix, HalfSpaceMedium};
use crate::quasi2d::{cell_operators, SliceCell};

/// Unit cube `(0,1)³` in `(x, z1, z2)`, `n` subdivisions per axis, periodic in `z1` and `z2`.
#[derive(Clone, Copy, Debug)]
pub struct StructuredMesh3D {
    pub n: usize,
}

/// Each cube is split along the paths from corner `(0,0,0)` to `(1,1,1)`: one tetrahedron per axis order.
const AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Four-point rule on tetrahedra (degree 2), barycentric coordinates, weights summing to 1.
const TET4_A: f64 = 0.585_410_196_624_968_5;
const TET4_B: f64 = 0.138_196_601_125_010_5;

impl StructuredMesh3D {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=24).contains(&n) {
            return Err(Error::Mesh(format!(
                "oracle resolution must lie in 2..=24, got {n}"
            )));
        }
        Ok(StructuredMesh3D { n })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_dofs(&self) -> usize {
        (self.n + 1) * self.n * self.n
    }

    pub fn dof(&self, ix: usize, i1: usize, i2: usize) -> usize {
        let n = self.n;
        ix + (n + 1) * (i1 % n + n * (i2 % n))
    }

    /// Dofs of the face `x = j`, ordered `i1 + n·i2`.
    pub fn face_dofs(&self, j: usize) -> Vec<usize> {
        let ix = if j == 0 { 0 } else { self.n };
        let n = self.n;
        (0..n * n).map(|q| self.dof(ix, q % n, q / n)).collect()
    }

    /// Torus coordinates of face node `q`.
    pub fn face_coords(&self, q: usize) -> (f64, f64) {
        let n = self.n;
        ((q % n) as f64 * self.h(), (q / n) as f64 * self.h())
    }

    /// Tetrahedra as grid index quadruples.
    pub fn tetrahedra(&self) -> Vec<[[usize; 3]; 4]> {
        let n = self.n;
        let mut out = Vec::with_capacity(6 * n * n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                for ix in 0..n {
                    for order in AXIS_ORDERS {
                        let mut p = [ix, i1, i2];
                        let mut t = [p; 4];
                        for (step, &axis) in order.iter().enumerate() {
                            p[axis] += 1;
                            t[step + 1] = p;
                        }
                        out.push(t);
                    }
                }
            }
        }
        out
    }
}

/// Lifted gradient `(∂x, θ1 ∂z1 + θ2 ∂z2)` of a 3D gradient.
pub fn degenerate_gradient(cut: &CutMatrix, g: [C64; 3]) -> [C64; 2] {
    [g[0], g[1] * cut.theta1 + g[2] * cut.theta2]
}

/// Gradients of the barycentric functions of a tetrahedron with vertices `p`.
fn tet_gradients(p: &[[f64; 3]; 4]) -> ([[f64; 3]; 4], f64) {
    let e = |i: usize| [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]];
    let (a, b, c) = (e(1), e(2), e(3));
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let det = dot(a, cross(b, c));
    let g1 = cross(b, c).map(|v| v / det);
    let g2 = cross(c, a).map(|v| v / det);
    let g3 = cross(a, b).map(|v| v / det);
    let g0 = [
        -(g1[0] + g2[0] + g3[0]),
        -(g1[1] + g2[1] + g3[1]),
        -(g1[2] + g2[2] + g3[2]),
    ];
    ([g0, g1, g2, g3], det.abs() / 6.0)
}

/// System matrix of the degenerate form
/// `∫ A (Cᵀ∇ + ikw)U · conj((Cᵀ∇ + ikw)V) − ρ ω² U conj(V)`, `w = (0, θ1)`.
pub fn assemble_3d(
    mesh: &StructuredMesh3D,
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
) -> Result<CsrMatrix> {
    let cut = medium.cut;
    let h = mesh.h();
    let om2 = omega * omega;
    let ikw = C64::new(0.0, k * cut.theta1);
    let quad: [[f64; 4]; 4] = [
        [TET4_A, TET4_B, TET4_B, TET4_B],
        [TET4_B, TET4_A, TET4_B, TET4_B],
        [TET4_B, TET4_B, TET4_A, TET4_B],
        [TET4_B, TET4_B, TET4_B, TET4_A],
    ];
    let mut trips = Vec::with_capacity(6 * mesh.n.pow(3) * 16);
    for t in mesh.tetrahedra() {
        let p = t.map(|v| v.map(|i| i as f64 * h));
        let (grads, vol) = tet_gradients(&p);
        let dofs = t.map(|v| mesh.dof(v[0], v[1], v[2]));
        let mut local = [[ZERO; 4]; 4];
        for bary in quad {
            let pt = [0, 1, 2].map(|c| (0..4).map(|i| bary[i] * p[i][c]).sum::<f64>());
            let (a, rho) = medium.augmented(pt[0], pt[1], pt[2]);
            if !rho.is_finite() {
                return Err(Error::Coefficient { x: pt[0], z: pt[1] });
            }
            let g: Vec<[C64; 2]> = (0..4)
                .map(|i| {
                    let d = degenerate_gradient(&cut, grads[i].map(C64::from));
                    [d[0], d[1] + ikw * bary[i]]
                })
                .collect();
            let wq = 0.25 * vol;
            for i in 0..4 {
                let gi = [g[i][0].conj(), g[i][1].conj()];
                let agi = [
                    gi[0] * a[0][0] + gi[1] * a[0][1],
                    gi[0] * a[1][0] + gi[1] * a[1][1],
                ];
                for j in 0..4 {
                    let stiff = g[j][0] * agi[0] + g[j][1] * agi[1];
                    local[i][j] += (stiff - om2 * rho * bary[i] * bary[j]) * wq;
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                trips.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    let n = mesh.n_dofs();
    Ok(CsrMatrix::from_triplets(n, n, trips))
}

/// Factorized 3D cell with Dirichlet conditions on both faces.
pub struct Cell3D {
    pub mesh: StructuredMesh3D,
    pub solver: DirichletSolver,
    matrix: CsrMatrix,
}

impl Cell3D {
    pub fn new(medium: &HalfSpaceMedium, omega: C64, k: f64, n: usize) -> Result<Self> {
        if !(omega.im > 0.0) {
            return Err(Error::Config("the 3D oracle needs Im ω > 0".into()));
        }
        let mesh = StructuredMesh3D::new(n)?;
        let matrix = assemble_3d(&mesh, medium, omega, k)?;
        let mut fixed = mesh.face_dofs(0);
        fixed.extend(mesh.face_dofs(1));
        let solver = DirichletSolver::from_matrix(&matrix, &fixed)?;
        Ok(Cell3D {
            mesh,
            solver,
            matrix,
        })
    }

    pub fn face_dim(&self) -> usize {
        self.mesh.n * self.mesh.n
    }

    /// Solves `E^j` with data `phi` on face `j` and zero on the other face. Returns the nodal field and
    /// the weak fluxes tested on faces 0 and 1.
    pub fn solve(&self, j: usize, phi: &[C64]) -> Result<(Vec<C64>, [Vec<C64>; 2])> {
        let nf = self.face_dim();
        if phi.len() != nf {
            return Err(Error::Config(format!(
                "face data has {} values, expected {nf}",
                phi.len()
            )));
        }
        let mut data = vec![ZERO; 2 * nf];
        data[j * nf..(j + 1) * nf].copy_from_slice(phi);
        let u = self.solver.solve(&data, None);
        let flux = [0, 1].map(|l| {
            self.mesh
                .face_dofs(l)
                .iter()
                .map(|&d| self.matrix.row(d).map(|(c, v)| v * u[c]).sum())
                .collect()
        });
        Ok((u, flux))
    }

    /// Local DtN operators on the face node basis.
    pub fn local_dtn(&self) -> DtnBlocks {
        let nf = self.face_dim();
        let s = self.solver.schur_complement();
        let blk = |r: usize, c: usize| s.as_ref().submatrix(r * nf, c * nf, nf, nf).to_owned();
        DtnBlocks {
            t00: blk(0, 0),
            t01: blk(1, 0),
            t10: blk(0, 1),
            t11: blk(1, 1),
        }
    }
}

/// Solves one 3D cell problem (see [`Cell3D::solve`]).
pub fn solve_cell_3d(
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
    j: usize,
    n: usize,
    face_data: &[C64],
) -> Result<(Vec<C64>, [Vec<C64>; 2])> {
    Cell3D::new(medium, omega, k, n)?.solve(j, face_data)
}

/// Torus modes `e^{2πi(m1 z1 + m2 z2)}` with `|m1|, |m2| ≤ m_max`.
pub fn torus_modes(m_max: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for m2 in -m_max..=m_max {
        for m1 in -m_max..=m_max {
            out.push((m1, m2));
        }
    }
    out
}

fn mode_matrix(points: &[(f64, f64)], modes: &[(i32, i32)]) -> CMat {
    CMat::from_fn(points.len(), modes.len(), |r, c| {
        let (z1, z2) = points[r];
        let (m1, m2) = modes[c];
        C64::from_polar(1.0, 2.0 * PI * (m1 as f64 * z1 + m2 as f64 * z2))
    })
}

/// Galerkin matrices `Φᴴ T^{jℓ} Φ` of the four local DtN blocks on a set of torus modes.
#[derive(Clone, Debug)]
pub struct ModeDtn {
    pub modes: Vec<(i32, i32)>,
    pub blocks: [CMat; 4],
}

impl ModeDtn {
    fn from_blocks(t: &DtnBlocks, points: &[(f64, f64)], modes: &[(i32, i32)]) -> Self {
        let phi = mode_matrix(points, modes);
        let ph = phi.adjoint().to_owned();
        let g = |m: &CMat| &ph * (m * &phi);
        ModeDtn {
            modes: modes.to_vec(),
            blocks: [g(&t.t00), g(&t.t01), g(&t.t10), g(&t.t11)],
        }
    }

    /// Relative Frobenius gap to a reference, over all four blocks.
    pub fn relative_gap(&self, reference: &ModeDtn) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in self.blocks.iter().zip(&reference.blocks) {
            num += frobenius(&(a - b)).powi(2);
            den += frobenius(b).powi(2);
        }
        (num / den).sqrt()
    }

    /// Relative Frobenius gap of each block `[T⁰⁰, T⁰¹, T¹⁰, T¹¹]`.
    pub fn block_gaps(&self, reference: &ModeDtn) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| {
            frobenius(&(&self.blocks[i] - &reference.blocks[i])) / frobenius(&reference.blocks[i])
        })
    }
}

/// Mode matrices of the 3D oracle at resolution `n`.
pub fn mode_dtn_3d(
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
    n: usize,
    m_max: i32,
) -> Result<ModeDtn> {
    let cell = Cell3D::new(medium, omega, k, n)?;
    let points: Vec<(f64, f64)> = (0..cell.face_dim())
        .map(|q| cell.mesh.face_coords(q))
        .collect();
    Ok(ModeDtn::from_blocks(
        &cell.local_dtn(),
        &points,
        &torus_modes(m_max),
    ))
}

/// Mode matrices of the slice method with `nx = n`, `nz = ⌈n/θ1⌉`, `N_s = n`.
pub fn mode_dtn_slices(
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
    n: usize,
    m_max: i32,
) -> Result<ModeDtn> {
    let nz = ((n as f64 / medium.cut.theta1) - 1e-9).ceil() as usize;
    let cell = SliceCell::with_sizes(medium.cut, n, nz, n)?;
    let ops = cell_operators(&cell, medium, omega, k)?;
    let points: Vec<(f64, f64)> = (0..cell.face_dim()).map(|q| cell.face_coords(q)).collect();
    Ok(ModeDtn::from_blocks(
        &ops.local.blocks,
        &points,
        &torus_modes(m_max),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedra_fill_the_cube() {
        let mesh = StructuredMesh3D::new(2).unwrap();
        let vol: f64 = mesh
            .tetrahedra()
            .iter()
            .map(|t| tet_gradients(&t.map(|v| v.map(|i| i as f64 * mesh.h()))).1)
            .sum();
        assert!((vol - 1.0).abs() < 1e-14);
        assert_eq!(mesh.n_dofs(), 12);
    }

    #[test]
    fn kernel_direction_is_annihilated() {
        let cut = CutMatrix::new(1.0, 0.5f64.sqrt()).unwrap();
        let g = [ZERO, C64::from(-cut.theta2), C64::from(cut.theta1)];
        let d = degenerate_gradient(&cut, g);
        assert!(d[0].norm() == 0.0 && d[1].norm() < 1e-16);
    }
}
