//! Structured P1 finite elements on rectangles with optional periodic identification.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CsrMatrix, SparseLu, ONE, ZERO};
use crate::media::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    X0,
    X1,
    Z0,
    Z1,
}

/// Rectangle `(0, lx) × (0, lz)` split into `nx × nz` squares, two triangles each.
#[derive(Clone, Debug)]
pub struct StructuredMesh2D {
    pub lx: f64,
    pub lz: f64,
    pub nx: usize,
    pub nz: usize,
    pub periodic_x: bool,
    pub periodic_z: bool,
    dof: Vec<usize>,
    n_dofs: usize,
}

pub fn build_mesh(
    lx: f64,
    lz: f64,
    nx: usize,
    nz: usize,
    periodic_x: bool,
    periodic_z: bool,
) -> Result<StructuredMesh2D> {
    StructuredMesh2D::new(lx, lz, nx, nz, periodic_x, periodic_z)
}

impl StructuredMesh2D {
    pub fn new(
        lx: f64,
        lz: f64,
        nx: usize,
        nz: usize,
        periodic_x: bool,
        periodic_z: bool,
    ) -> Result<Self> {
        if !(lx > 0.0) || !(lz > 0.0) || !lx.is_finite() || !lz.is_finite() {
            return Err(Error::Mesh(format!(
                "extents must be positive, got ({lx}, {lz})"
            )));
        }
        if nx < 2 || nz < 2 {
            return Err(Error::Mesh(format!(
                "need at least 2 subdivisions, got ({nx}, {nz})"
            )));
        }
        let ux = if periodic_x { nx } else { nx + 1 };
        let uz = if periodic_z { nz } else { nz + 1 };
        let mut dof = vec![0; (nx + 1) * (nz + 1)];
        for iz in 0..=nz {
            for ix in 0..=nx {
                let jx = if periodic_x { ix % nx } else { ix };
                let jz = if periodic_z { iz % nz } else { iz };
                dof[iz * (nx + 1) + ix] = jz * ux + jx;
            }
        }
        Ok(StructuredMesh2D {
            lx,
            lz,
            nx,
            nz,
            periodic_x,
            periodic_z,
            dof,
            n_dofs: ux * uz,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_triangles(&self) -> usize {
        2 * self.nx * self.nz
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    pub fn h(&self) -> f64 {
        self.hx().max(self.hz())
    }

    pub fn dof(&self, ix: usize, iz: usize) -> usize {
        self.dof[iz * (self.nx + 1) + ix]
    }

    pub fn coords(&self, ix: usize, iz: usize) -> (f64, f64) {
        (ix as f64 * self.hx(), iz as f64 * self.hz())
    }

    /// Coordinates of each dof (the representative with the smallest grid index).
    pub fn dof_coords(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::NAN, f64::NAN); self.n_dofs];
        for iz in (0..=self.nz).rev() {
            for ix in (0..=self.nx).rev() {
                out[self.dof(ix, iz)] = self.coords(ix, iz);
            }
        }
        out
    }

    /// Triangles as grid index triples `(ix, iz)`.
    pub fn triangles(&self) -> Vec<[(usize, usize); 3]> {
        let mut t = Vec::with_capacity(self.n_triangles());
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                let a = (ix, iz);
                let b = (ix + 1, iz);
                let c = (ix + 1, iz + 1);
                let d = (ix, iz + 1);
                t.push([a, b, c]);
                t.push([a, c, d]);
            }
        }
        t
    }

    fn check_tag(&self, tag: EdgeTag) -> Result<()> {
        let periodic = match tag {
            EdgeTag::X0 | EdgeTag::X1 => self.periodic_x,
            EdgeTag::Z0 | EdgeTag::Z1 => self.periodic_z,
        };
        if periodic {
            Err(Error::UnknownTag)
        } else {
            Ok(())
        }
    }

    /// Grid positions along an edge, in increasing order of the running coordinate.
    /// On a periodic running axis the duplicated end node is omitted.
    pub fn edge_grid(&self, tag: EdgeTag) -> Result<Vec<(usize, usize)>> {
        self.check_tag(tag)?;
        Ok(match tag {
            EdgeTag::X0 | EdgeTag::X1 => {
                let ix = if tag == EdgeTag::X0 { 0 } else { self.nx };
                let m = if self.periodic_z {
                    self.nz
                } else {
                    self.nz + 1
                };
                (0..m).map(|iz| (ix, iz)).collect()
            }
            EdgeTag::Z0 | EdgeTag::Z1 => {
                let iz = if tag == EdgeTag::Z0 { 0 } else { self.nz };
                let m = if self.periodic_x {
                    self.nx
                } else {
                    self.nx + 1
                };
                (0..m).map(|ix| (ix, iz)).collect()
            }
        })
    }

    pub fn edge_dofs(&self, tag: EdgeTag) -> Result<Vec<usize>> {
        Ok(self
            .edge_grid(tag)?
            .into_iter()
            .map(|(ix, iz)| self.dof(ix, iz))
            .collect())
    }

    /// Locates `(x, z)`: returns the three vertex dofs and barycentric weights.
    pub fn locate(&self, x: f64, z: f64) -> Result<([usize; 3], [f64; 3], [[f64; 2]; 3])> {
        let tol = 1e-12 * (self.lx + self.lz);
        if !(x >= -tol && x <= self.lx + tol && z >= -tol && z <= self.lz + tol) {
            return Err(Error::OutOfRange { x, z });
        }
        let (hx, hz) = (self.hx(), self.hz());
        let fx = (x / hx).clamp(0.0, self.nx as f64);
        let fz = (z / hz).clamp(0.0, self.nz as f64);
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let iz = (fz.floor() as usize).min(self.nz - 1);
        let xi = fx - ix as f64;
        let eta = fz - iz as f64;
        let a = self.dof(ix, iz);
        let b = self.dof(ix + 1, iz);
        let c = self.dof(ix + 1, iz + 1);
        let d = self.dof(ix, iz + 1);
        if xi >= eta {
            // triangle (a, b, c)
            Ok((
                [a, b, c],
                [1.0 - xi, xi - eta, eta],
                [[-1.0 / hx, 0.0], [1.0 / hx, -1.0 / hz], [0.0, 1.0 / hz]],
            ))
        } else {
            // triangle (a, c, d)
            Ok((
                [a, c, d],
                [1.0 - eta, xi, eta - xi],
                [[0.0, -1.0 / hz], [1.0 / hx, 0.0], [-1.0 / hx, 1.0 / hz]],
            ))
        }
    }
}

/// Nodal complex field on a mesh.
#[derive(Clone, Debug)]
pub struct ComplexField2D {
    pub values: Vec<C64>,
}

impl ComplexField2D {
    pub fn zeros(mesh: &StructuredMesh2D) -> Self {
        ComplexField2D {
            values: vec![ZERO; mesh.n_dofs()],
        }
    }
}

/// P1 interpolation of a nodal field.
pub fn interp(mesh: &StructuredMesh2D, field: &[C64], x: f64, z: f64) -> Result<C64> {
    let (v, w, _) = mesh.locate(x, z)?;
    Ok(field[v[0]] * w[0] + field[v[1]] * w[1] + field[v[2]] * w[2])
}

/// Gradient of the P1 interpolant (constant per triangle).
pub fn interp_grad(mesh: &StructuredMesh2D, field: &[C64], x: f64, z: f64) -> Result<[C64; 2]> {
    let (v, _, g) = mesh.locate(x, z)?;
    let mut out = [ZERO; 2];
    for a in 0..3 {
        out[0] += field[v[a]] * g[a][0];
        out[1] += field[v[a]] * g[a][1];
    }
    Ok(out)
}

/// Three-point Gauss rule on triangles, barycentric coordinates (weights sum to 1).
const GAUSS3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Sparse matrix of the sesquilinear form
/// `∫ A (∇+ikw)u · conj((∇+ikw)v) − ρ ω² u conj(v)`, rows indexed by the test function.
#[derive(Clone, Debug)]
pub struct AssembledForm {
    pub mesh: StructuredMesh2D,
    pub matrix: CsrMatrix,
    pub omega: C64,
    pub k: f64,
    pub w: [f64; 2],
}

pub fn assemble<F>(
    mesh: &StructuredMesh2D,
    coef: F,
    omega: C64,
    k: f64,
    w: [f64; 2],
) -> Result<AssembledForm>
where
    F: Fn(f64, f64) -> (Tensor, f64),
{
    let (hx, hz) = (mesh.hx(), mesh.hz());
    let area = 0.5 * hx * hz;
    let om2 = omega * omega;
    let ikw = [C64::new(0.0, k * w[0]), C64::new(0.0, k * w[1])];
    let mut trips = Vec::with_capacity(mesh.n_triangles() * 9);
    for tri in mesh.triangles() {
        let p: Vec<(f64, f64)> = tri.iter().map(|&(ix, iz)| mesh.coords(ix, iz)).collect();
        let grads = p1_gradients(&p);
        let dofs: Vec<usize> = tri.iter().map(|&(ix, iz)| mesh.dof(ix, iz)).collect();
        let mut local = [[ZERO; 3]; 3];
        for (bary, wq) in GAUSS3 {
            let x = bary[0] * p[0].0 + bary[1] * p[1].0 + bary[2] * p[2].0;
            let z = bary[0] * p[0].1 + bary[1] * p[1].1 + bary[2] * p[2].1;
            let (a, rho) = coef(x, z);
            if !rho.is_finite() || a.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Coefficient { x, z });
            }
            let g: Vec<[C64; 2]> = (0..3)
                .map(|j| {
                    [
                        C64::from(grads[j][0]) + ikw[0] * bary[j],
                        C64::from(grads[j][1]) + ikw[1] * bary[j],
                    ]
                })
                .collect();
            let scale = wq * area;
            for i in 0..3 {
                let gi = [g[i][0].conj(), g[i][1].conj()];
                let agi = [
                    gi[0] * a[0][0] + gi[1] * a[0][1],
                    gi[0] * a[1][0] + gi[1] * a[1][1],
                ];
                for j in 0..3 {
                    let stiff = g[j][0] * agi[0] + g[j][1] * agi[1];
                    let mass = rho * bary[i] * bary[j];
                    local[i][j] += scale * (stiff - om2 * mass);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                trips.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    let n = mesh.n_dofs();
    Ok(AssembledForm {
        mesh: mesh.clone(),
        matrix: CsrMatrix::from_triplets(n, n, trips),
        omega,
        k,
        w,
    })
}

fn p1_gradients(p: &[(f64, f64)]) -> [[f64; 2]; 3] {
    let det = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j].1 - p[k].1) / det, (p[k].0 - p[j].0) / det];
    }
    g
}

/// Load vector `∫ f conj(φ_i)` with the same quadrature.
pub fn load_vector<F>(mesh: &StructuredMesh2D, f: F) -> Vec<C64>
where
    F: Fn(f64, f64) -> C64,
{
    let area = 0.5 * mesh.hx() * mesh.hz();
    let mut b = vec![ZERO; mesh.n_dofs()];
    for tri in mesh.triangles() {
        let p: Vec<(f64, f64)> = tri.iter().map(|&(ix, iz)| mesh.coords(ix, iz)).collect();
        for (bary, wq) in GAUSS3 {
            let x = bary[0] * p[0].0 + bary[1] * p[1].0 + bary[2] * p[2].0;
            let z = bary[0] * p[0].1 + bary[1] * p[1].1 + bary[2] * p[2].1;
            let fv = f(x, z) * (wq * area);
            for i in 0..3 {
                b[mesh.dof(tri[i].0, tri[i].1)] += fv * bary[i];
            }
        }
    }
    b
}

/// Mass matrix `∫ ρ u conj(v)` with the same quadrature.
pub fn mass_matrix<F>(mesh: &StructuredMesh2D, rho: F) -> CsrMatrix
where
    F: Fn(f64, f64) -> f64,
{
    let form = assemble(
        mesh,
        |x, z| ([[0.0; 2]; 2], rho(x, z)),
        C64::new(0.0, 1.0),
        0.0,
        [0.0, 0.0],
    )
    .expect("finite mass coefficient");
    form.matrix
}

/// Factorized Dirichlet problem: a set of fixed dofs, the rest solved for.
pub struct DirichletSolver {
    pub n: usize,
    pub fixed: Vec<usize>,
    pub free: Vec<usize>,
    k_ff: SparseLu,
    k_fb: CsrMatrix,
    k_bf: CsrMatrix,
    k_bb: CsrMatrix,
}

impl DirichletSolver {
    pub fn new(form: &AssembledForm, fixed: &[usize]) -> Result<Self> {
        Self::from_matrix(&form.matrix, fixed)
    }

    /// Same as [`DirichletSolver::new`] for any square system matrix.
    pub fn from_matrix(k: &CsrMatrix, fixed: &[usize]) -> Result<Self> {
        let n = k.nrows;
        let mut is_fixed = vec![false; n];
        for &d in fixed {
            is_fixed[d] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&d| !is_fixed[d]).collect();
        let k_ff = SparseLu::new(&k.submatrix(&free, &free), "Dirichlet cell problem")?;
        Ok(DirichletSolver {
            n,
            fixed: fixed.to_vec(),
            free: free.clone(),
            k_ff,
            k_fb: k.submatrix(&free, fixed),
            k_bf: k.submatrix(fixed, &free),
            k_bb: k.submatrix(fixed, fixed),
        })
    }

    /// Free values for each column of fixed data: `−K_FF⁻¹ K_FB u_B`.
    pub fn extend(&self, data: &CMat) -> CMat {
        let nf = self.free.len();
        let m = data.ncols();
        let mut rhs = CMat::zeros(nf, m);
        for i in 0..nf {
            for (c, v) in self.k_fb.row(i) {
                for j in 0..m {
                    rhs[(i, j)] -= v * data[(c, j)];
                }
            }
        }
        self.k_ff.solve_in_place(&mut rhs);
        rhs
    }

    /// Full nodal solution with given fixed values and optional load vector.
    pub fn solve(&self, values: &[C64], load: Option<&[C64]>) -> Vec<C64> {
        let nf = self.free.len();
        let mut rhs = CMat::zeros(nf, 1);
        for i in 0..nf {
            let mut acc = load.map(|l| l[self.free[i]]).unwrap_or(ZERO);
            for (c, v) in self.k_fb.row(i) {
                acc -= v * values[c];
            }
            rhs[(i, 0)] = acc;
        }
        self.k_ff.solve_in_place(&mut rhs);
        let mut u = vec![ZERO; self.n];
        for (i, &d) in self.free.iter().enumerate() {
            u[d] = rhs[(i, 0)];
        }
        for (i, &d) in self.fixed.iter().enumerate() {
            u[d] = values[i];
        }
        u
    }

    /// Discrete DtN on the fixed dofs: `K_BB − K_BF K_FF⁻¹ K_FB`.
    pub fn schur_complement(&self) -> CMat {
        let nb = self.fixed.len();
        let ext = self.extend(&crate::linalg::identity(nb));
        let mut s = self.k_bb.to_dense();
        for i in 0..nb {
            for (c, v) in self.k_bf.row(i) {
                for j in 0..nb {
                    s[(i, j)] += v * ext[(c, j)];
                }
            }
        }
        s
    }
}

/// Solves with Dirichlet data prescribed on the listed edges (data ordered as `edge_dofs`).
pub fn solve_dirichlet(
    form: &AssembledForm,
    boundary_values: &[(EdgeTag, Vec<C64>)],
) -> Result<ComplexField2D> {
    let mesh = &form.mesh;
    let mut fixed = Vec::new();
    let mut vals = Vec::new();
    let mut seen = vec![false; mesh.n_dofs()];
    for (tag, data) in boundary_values {
        let dofs = mesh.edge_dofs(*tag)?;
        if dofs.len() != data.len() {
            return Err(Error::Mesh(format!(
                "edge {tag:?} has {} nodes, got {} values",
                dofs.len(),
                data.len()
            )));
        }
        for (d, v) in dofs.into_iter().zip(data) {
            if !seen[d] {
                seen[d] = true;
                fixed.push(d);
                vals.push(*v);
            }
        }
    }
    let solver = DirichletSolver::new(form, &fixed)?;
    Ok(ComplexField2D {
        values: solver.solve(&vals, None),
    })
}

/// Weak conormal flux on an edge: the residual of the form tested with the edge hat functions.
pub fn weak_flux(form: &AssembledForm, solution: &[C64], tag: EdgeTag) -> Result<Vec<C64>> {
    let dofs = form.mesh.edge_dofs(tag)?;
    Ok(dofs
        .iter()
        .map(|&d| form.matrix.row(d).map(|(c, v)| v * solution[c]).sum())
        .collect())
}

/// One-dimensional P1 mass matrix on an edge, ordered as `edge_dofs`.
pub fn edge_mass(mesh: &StructuredMesh2D, tag: EdgeTag) -> Result<CsrMatrix> {
    let grid = mesh.edge_grid(tag)?;
    let (len, periodic) = match tag {
        EdgeTag::X0 | EdgeTag::X1 => (mesh.hz(), mesh.periodic_z),
        EdgeTag::Z0 | EdgeTag::Z1 => (mesh.hx(), mesh.periodic_x),
    };
    let m = grid.len();
    let segments = if periodic { m } else { m - 1 };
    let mut trips = Vec::with_capacity(4 * segments);
    for s in 0..segments {
        let (a, b) = (s, (s + 1) % m);
        trips.push((a, a, ONE * (len / 3.0)));
        trips.push((b, b, ONE * (len / 3.0)));
        trips.push((a, b, ONE * (len / 6.0)));
        trips.push((b, a, ONE * (len / 6.0)));
    }
    Ok(CsrMatrix::from_triplets(m, m, trips))
}
