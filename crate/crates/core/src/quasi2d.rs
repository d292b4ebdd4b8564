//! Slice decomposition of the degenerate periodic cell problems.
//!
//! A function on the lifted cell `(0,1) × T²` is represented by its restrictions to the
//! oblique planes `(x, θ1 z, θ2 z + s)`, `z ∈ (0, 1/θ1)`, for `N_s` equispaced values of `s`.
//! Periodicity in `z1` ties the top edge of slice `s` to the bottom edge of slice `s + ϑ`;
//! that coupling is realized by a band-limited Fourier shift in `s`.

pub mod quasi1d;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fem2d::{assemble, DirichletSolver, StructuredMesh2D};
use crate::halfguide::DtnBlocks;
use crate::linalg::{frobenius, min_singular_value, solve_dense, CMat, ZERO};
use crate::media::{CutMatrix, HalfSpaceMedium, Tensor};

/// Equispaced slice positions `s_m = m / N_s` and the Fourier shift by `ϑ`.
#[derive(Clone, Debug)]
pub struct SliceGrid {
    pub n_s: usize,
    pub vartheta: f64,
    shift: CMat,
}

impl SliceGrid {
    pub fn new(n_s: usize, vartheta: f64) -> Result<Self> {
        if n_s == 0 || !vartheta.is_finite() {
            return Err(Error::Config(format!(
                "invalid slice grid ({n_s}, {vartheta})"
            )));
        }
        let mut g = SliceGrid {
            n_s,
            vartheta,
            shift: CMat::zeros(0, 0),
        };
        g.shift = g.shift_matrix_by(vartheta);
        Ok(g)
    }

    pub fn s(&self, m: usize) -> f64 {
        m as f64 / self.n_s as f64
    }

    /// Fourier mode carried by DFT bin `b`; the Nyquist bin of an even grid is `−N/2`.
    pub fn mode(&self, b: usize) -> i64 {
        let n = self.n_s;
        if b < n - n / 2 {
            b as i64
        } else {
            b as i64 - n as i64
        }
    }

    /// Weights `w_m` with `f(s) = Σ_m w_m f(s_m)` for the trigonometric interpolant.
    pub fn interp_weights(&self, s: f64) -> Vec<C64> {
        let n = self.n_s;
        (0..n)
            .map(|m| {
                let d = s - self.s(m);
                (0..n)
                    .map(|b| C64::from_polar(1.0, 2.0 * PI * self.mode(b) as f64 * d))
                    .sum::<C64>()
                    / n as f64
            })
            .collect()
    }

    /// Dense matrix of `f ↦ f(· + t)` on band-limited slice data.
    pub fn shift_matrix_by(&self, t: f64) -> CMat {
        let n = self.n_s;
        let mut out = CMat::zeros(n, n);
        for m in 0..n {
            let w = self.interp_weights(self.s(m) + t);
            for (mp, v) in w.into_iter().enumerate() {
                out[(m, mp)] = v;
            }
        }
        out
    }

    /// The shift by `ϑ`: `(S f)_m = f(s_m + ϑ)`.
    pub fn shift(&self) -> &CMat {
        &self.shift
    }

    /// Applies the shift by `t` to a stack `[N_s × n]` (row `m` = slice `m`) via FFT.
    pub fn apply_shift_fft(&self, t: f64, stack: &mut [Vec<C64>]) {
        let n = self.n_s;
        assert_eq!(stack.len(), n);
        let width = stack.first().map(|r| r.len()).unwrap_or(0);
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let phase: Vec<C64> = (0..n)
            .map(|b| C64::from_polar(1.0 / n as f64, 2.0 * PI * self.mode(b) as f64 * t))
            .collect();
        let mut buf = vec![ZERO; n];
        for j in 0..width {
            for m in 0..n {
                buf[m] = stack[m][j];
            }
            fwd.process(&mut buf);
            for b in 0..n {
                buf[b] *= phase[b];
            }
            inv.process(&mut buf);
            for m in 0..n {
                stack[m][j] = buf[m];
            }
        }
    }
}

/// Coefficients of a family of slice problems.
pub trait SlicedCoefficients: Sync {
    fn sliced(&self, s: f64, x: f64, z: f64) -> (Tensor, f64);
}

impl SlicedCoefficients for HalfSpaceMedium {
    fn sliced(&self, s: f64, x: f64, z: f64) -> (Tensor, f64) {
        HalfSpaceMedium::sliced(self, s, x, z)
    }
}

/// Edges of the slice rectangle in the order used for boundary unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceEdge {
    X0,
    X1,
    Z0,
    Z1,
}

/// Discretization of the lifted cell by slices.
#[derive(Clone, Debug)]
pub struct SliceCell {
    pub cut: CutMatrix,
    pub nx: usize,
    pub nz: usize,
    pub mesh: StructuredMesh2D,
    pub grid: SliceGrid,
    boundary: Vec<usize>,
}

impl SliceCell {
    /// Mesh step `h` in both directions; `n_s` defaults to the number of z-subdivisions.
    pub fn new(cut: CutMatrix, h: f64, n_s: Option<usize>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config(format!(
                "mesh step must be positive, got {h}"
            )));
        }
        let len = 1.0 / cut.theta1.abs();
        let nx = ((1.0 / h) - 1e-9).ceil().max(2.0) as usize;
        let nz = ((len / h) - 1e-9).ceil().max(2.0) as usize;
        Self::with_sizes(cut, nx, nz, n_s.unwrap_or(nz))
    }

    pub fn with_sizes(cut: CutMatrix, nx: usize, nz: usize, n_s: usize) -> Result<Self> {
        if cut.theta1 <= 0.0 {
            return Err(Error::Config("slice cells need θ1 > 0".into()));
        }
        let mesh = StructuredMesh2D::new(1.0, 1.0 / cut.theta1, nx, nz, false, false)?;
        let grid = SliceGrid::new(n_s, cut.vartheta())?;
        let mut boundary = Vec::with_capacity(2 * (nz + 1) + 2 * (nx - 1));
        for ix in [0, nx] {
            for iz in 0..=nz {
                boundary.push(mesh.dof(ix, iz));
            }
        }
        for iz in [0, nz] {
            for ix in 1..nx {
                boundary.push(mesh.dof(ix, iz));
            }
        }
        Ok(SliceCell {
            cut,
            nx,
            nz,
            mesh,
            grid,
            boundary,
        })
    }

    pub fn n_s(&self) -> usize {
        self.grid.n_s
    }

    /// Dimension of sliced face data: `N_s` slices × `nz` edge nodes.
    pub fn face_dim(&self) -> usize {
        self.n_s() * self.nz
    }

    /// Dimension of the lateral trace unknowns.
    pub fn gamma_dim(&self) -> usize {
        self.n_s() * (self.nx - 1)
    }

    /// Quadrature weight of one slice: the torus measure is `θ1 ds dz`.
    pub fn weight(&self) -> f64 {
        self.cut.theta1 / self.n_s() as f64
    }

    pub fn face_index(&self, m: usize, iz: usize) -> usize {
        m * self.nz + iz
    }

    /// Torus coordinates `(z1, z2)` of a face node.
    pub fn face_coords(&self, idx: usize) -> (f64, f64) {
        let (m, iz) = (idx / self.nz, idx % self.nz);
        let z = iz as f64 * self.mesh.hz();
        let (_, z1, z2) = self.cut.lift(0.0, z, self.grid.s(m));
        (z1, z2)
    }

    /// Position of the given edge inside the boundary ordering.
    pub fn edge_range(&self, e: SliceEdge) -> std::ops::Range<usize> {
        let (nx, nz) = (self.nx, self.nz);
        match e {
            SliceEdge::X0 => 0..nz + 1,
            SliceEdge::X1 => nz + 1..2 * (nz + 1),
            SliceEdge::Z0 => 2 * (nz + 1)..2 * (nz + 1) + nx - 1,
            SliceEdge::Z1 => 2 * (nz + 1) + nx - 1..2 * (nz + 1) + 2 * (nx - 1),
        }
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary
    }

    /// Expansion of the local nodal values on an edge of slice `m` in terms of global unknowns.
    ///
    /// Bottom-edge and left/right nodes with `iz < nz` are unknowns of slice `m`; top nodes are
    /// the `ϑ`-shifted bottom nodes of all slices.
    pub(crate) fn expansion(&self, m: usize, e: SliceEdge) -> Vec<Vec<(usize, C64)>> {
        let n = self.n_s();
        let sh = self.grid.shift();
        let one = |i: usize| vec![(i, C64::new(1.0, 0.0))];
        let shifted = |f: &dyn Fn(usize) -> usize| -> Vec<(usize, C64)> {
            (0..n)
                .map(|mp| (f(mp), sh[(m, mp)]))
                .filter(|&(_, c)| c != ZERO)
                .collect()
        };
        match e {
            SliceEdge::X0 | SliceEdge::X1 => (0..=self.nz)
                .map(|iz| {
                    if iz < self.nz {
                        one(self.face_index(m, iz))
                    } else {
                        shifted(&|mp| self.face_index(mp, 0))
                    }
                })
                .collect(),
            SliceEdge::Z0 => (1..self.nx)
                .map(|ix| one(m * (self.nx - 1) + ix - 1))
                .collect(),
            SliceEdge::Z1 => (1..self.nx)
                .map(|ix| shifted(&|mp| mp * (self.nx - 1) + ix - 1))
                .collect(),
        }
    }

    /// Boundary values of slice `m` given face data `a` (x = 0), `b` (x = 1) and lateral data `psi`.
    pub fn slice_boundary_values(&self, m: usize, a: &[C64], b: &[C64], psi: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.boundary.len());
        for (e, src) in [
            (SliceEdge::X0, a),
            (SliceEdge::X1, b),
            (SliceEdge::Z0, psi),
            (SliceEdge::Z1, psi),
        ] {
            for terms in self.expansion(m, e) {
                out.push(terms.iter().map(|&(i, c)| c * src[i]).sum());
            }
        }
        out
    }
}

/// Factorized slice problems for one Floquet point.
pub struct SliceSolve {
    pub solver: DirichletSolver,
    /// Discrete DtN of the slice on its whole boundary, in boundary ordering.
    pub schur: CMat,
}

pub struct AuxCellBank {
    pub k: f64,
    pub omega: C64,
    pub slices: Vec<SliceSolve>,
}

impl AuxCellBank {
    /// Response of slice `m` to unit data on boundary node `b` (full nodal field).
    pub fn response(&self, cell: &SliceCell, m: usize, b: usize) -> Vec<C64> {
        let nb = cell.boundary.len();
        let mut data = vec![ZERO; nb];
        data[b] = C64::new(1.0, 0.0);
        self.slice_field(cell, m, &data)
    }

    /// Full nodal field of slice `m` for given boundary values.
    pub fn slice_field(&self, cell: &SliceCell, m: usize, boundary_values: &[C64]) -> Vec<C64> {
        let s = &self.slices[m];
        let data = CMat::from_fn(boundary_values.len(), 1, |i, _| boundary_values[i]);
        let inner = s.solver.extend(&data);
        let mut u = vec![ZERO; cell.mesh.n_dofs()];
        for (i, &d) in s.solver.free.iter().enumerate() {
            u[d] = inner[(i, 0)];
        }
        for (i, &d) in s.solver.fixed.iter().enumerate() {
            u[d] = boundary_values[i];
        }
        u
    }

    /// Smallest `c` dividing `N_s` such that slice `m + c` has the same DtN as slice `m`.
    pub fn slice_period(&self, rel_tol: f64) -> usize {
        let n = self.slices.len();
        let scale = self
            .slices
            .iter()
            .map(|s| frobenius(&s.schur))
            .fold(0.0, f64::max);
        for c in 1..n {
            if n % c != 0 {
                continue;
            }
            let same = (0..n).all(|m| {
                let d = &self.slices[(m + c) % n].schur - &self.slices[m].schur;
                frobenius(&d) <= rel_tol * scale
            });
            if same {
                return c;
            }
        }
        n
    }
}

pub fn solve_aux_bank<M: SlicedCoefficients>(
    cell: &SliceCell,
    medium: &M,
    omega: C64,
    k: f64,
) -> Result<AuxCellBank> {
    let w = [0.0, cell.cut.theta1];
    let slices = (0..cell.n_s())
        .into_par_iter()
        .map(|m| {
            let s = cell.grid.s(m);
            let form = assemble(&cell.mesh, |x, z| medium.sliced(s, x, z), omega, k, w)
                .map_err(|e| e.in_slice(m))?;
            let solver = DirichletSolver::new(&form, &cell.boundary).map_err(|e| e.in_slice(m))?;
            let schur = solver.schur_complement();
            Ok(SliceSolve { solver, schur })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuxCellBank { k, omega, slices })
}

/// Edge DtN matrices of one slice, indexed `[j][ℓ]`: data on edge `j`, flux tested on edge `ℓ`.
///
/// The blocks are weak residuals, so the outward conormal orientation of each edge is built in.
#[derive(Clone, Debug)]
pub struct SliceDtN {
    /// Z-data to Z-flux.
    pub t: [[CMat; 2]; 2],
    /// Z-data to X-flux.
    pub t_tilde: [[CMat; 2]; 2],
    /// X-data to Z-flux.
    pub upsilon: [[CMat; 2]; 2],
    /// X-data to X-flux.
    pub upsilon_tilde: [[CMat; 2]; 2],
}

fn block(s: &CMat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CMat {
    s.as_ref()
        .submatrix(rows.start, cols.start, rows.len(), cols.len())
        .to_owned()
}

pub fn edge_dtn_slices(cell: &SliceCell, bank: &AuxCellBank) -> Vec<SliceDtN> {
    let z = [SliceEdge::Z0, SliceEdge::Z1];
    let x = [SliceEdge::X0, SliceEdge::X1];
    bank.slices
        .iter()
        .map(|sl| {
            let s = &sl.schur;
            let get = |data: SliceEdge, test: SliceEdge| {
                block(s, cell.edge_range(test), cell.edge_range(data))
            };
            let f = |d: [SliceEdge; 2], t: [SliceEdge; 2]| -> [[CMat; 2]; 2] {
                [
                    [get(d[0], t[0]), get(d[0], t[1])],
                    [get(d[1], t[0]), get(d[1], t[1])],
                ]
            };
            SliceDtN {
                t: f(z, z),
                t_tilde: f(z, x),
                upsilon: f(x, z),
                upsilon_tilde: f(x, x),
            }
        })
        .collect()
}

/// Auxiliary DtN operators on sliced face data, indexed like [`SliceDtN`].
#[derive(Clone, Debug)]
pub struct AuxDtNSet {
    /// Lateral data, tested on the bottom (`ℓ = 0`) or top (`ℓ = 1`) lateral edges.
    pub xi: [CMat; 2],
    /// Lateral data, tested on face `ℓ`.
    pub xi_tilde: [CMat; 2],
    /// Face `j` data, tested on lateral edges `ℓ`.
    pub upsilon: [[CMat; 2]; 2],
    /// Face `j` data, tested on face `ℓ`.
    pub upsilon_tilde: [[CMat; 2]; 2],
}

fn accumulate(
    target: &mut CMat,
    b: &CMat,
    rows: &[Vec<(usize, C64)>],
    cols: &[Vec<(usize, C64)>],
    w: f64,
) {
    for (i, re) in rows.iter().enumerate() {
        for (j, ce) in cols.iter().enumerate() {
            let v = b[(i, j)] * w;
            if v == ZERO {
                continue;
            }
            for &(r, a) in re {
                let va = a.conj() * v;
                for &(c, cc) in ce {
                    target[(r, c)] += va * cc;
                }
            }
        }
    }
}

/// Galerkin assembly of the slice edge operators into operators on sliced face data.
pub fn assemble_face_dtn(cell: &SliceCell, slices: &[SliceDtN]) -> AuxDtNSet {
    let (nf, ng) = (cell.face_dim(), cell.gamma_dim());
    let w = cell.weight();
    let mut xi = [CMat::zeros(ng, ng), CMat::zeros(ng, ng)];
    let mut xi_tilde = [CMat::zeros(nf, ng), CMat::zeros(nf, ng)];
    let mut ups = [
        [CMat::zeros(ng, nf), CMat::zeros(ng, nf)],
        [CMat::zeros(ng, nf), CMat::zeros(ng, nf)],
    ];
    let mut ups_tilde = [
        [CMat::zeros(nf, nf), CMat::zeros(nf, nf)],
        [CMat::zeros(nf, nf), CMat::zeros(nf, nf)],
    ];
    // slices are summed in a fixed order
    for (m, d) in slices.iter().enumerate() {
        let ez = [
            cell.expansion(m, SliceEdge::Z0),
            cell.expansion(m, SliceEdge::Z1),
        ];
        let ex = [
            cell.expansion(m, SliceEdge::X0),
            cell.expansion(m, SliceEdge::X1),
        ];
        for j in 0..2 {
            for l in 0..2 {
                accumulate(&mut xi[l], &d.t[j][l], &ez[l], &ez[j], w);
                accumulate(&mut xi_tilde[l], &d.t_tilde[j][l], &ex[l], &ez[j], w);
                accumulate(&mut ups[j][l], &d.upsilon[j][l], &ez[l], &ex[j], w);
                accumulate(
                    &mut ups_tilde[j][l],
                    &d.upsilon_tilde[j][l],
                    &ex[l],
                    &ex[j],
                    w,
                );
            }
        }
    }
    AuxDtNSet {
        xi,
        xi_tilde,
        upsilon: ups,
        upsilon_tilde: ups_tilde,
    }
}

/// Dirichlet-to-Dirichlet operators `R^j = −(Ξ⁰+Ξ¹)⁻¹(Υ^{j0}+Υ^{j1})`.
pub fn solve_dtd(aux: &AuxDtNSet) -> Result<[CMat; 2]> {
    let xi = &aux.xi[0] + &aux.xi[1];
    let mut out = Vec::with_capacity(2);
    for j in 0..2 {
        let rhs = -(&aux.upsilon[j][0] + &aux.upsilon[j][1]);
        let r = solve_dense(&xi, &rhs, "lateral trace system")?;
        let res = frobenius(&(&xi * &r - &rhs));
        let scale = frobenius(&rhs);
        if scale > 0.0 && res > 1e-8 * scale {
            return Err(Error::Singular {
                context: "lateral trace system".into(),
                detail: format!(
                    "relative residual {:e}, smallest singular value {:e}",
                    res / scale,
                    min_singular_value(&xi)
                ),
            });
        }
        out.push(r);
    }
    let r1 = out.pop().unwrap();
    let r0 = out.pop().unwrap();
    Ok([r0, r1])
}

/// Local DtN operators of the lifted cell with the DtD operators used to build them.
#[derive(Clone, Debug)]
pub struct LocalDtNSet {
    pub blocks: DtnBlocks,
    pub r: [CMat; 2],
}

/// `T^{jℓ} = Υ̃^{jℓ} + Ξ̃^ℓ R^j`.
pub fn local_dtn(aux: &AuxDtNSet, r: [CMat; 2]) -> LocalDtNSet {
    let t = |j: usize, l: usize| &aux.upsilon_tilde[j][l] + &aux.xi_tilde[l] * &r[j];
    LocalDtNSet {
        blocks: DtnBlocks {
            t00: t(0, 0),
            t01: t(0, 1),
            t10: t(1, 0),
            t11: t(1, 1),
        },
        r,
    }
}

/// Everything needed to evaluate cell solutions at one Floquet point.
pub struct CellOperators {
    pub bank: AuxCellBank,
    pub local: LocalDtNSet,
    pub slice_period: usize,
}

pub fn cell_operators<M: SlicedCoefficients>(
    cell: &SliceCell,
    medium: &M,
    omega: C64,
    k: f64,
) -> Result<CellOperators> {
    let bank = solve_aux_bank(cell, medium, omega, k)?;
    let slices = edge_dtn_slices(cell, &bank);
    let aux = assemble_face_dtn(cell, &slices);
    let r = solve_dtd(&aux)?;
    let local = local_dtn(&aux, r);
    let slice_period = bank.slice_period(1e-12);
    Ok(CellOperators {
        bank,
        local,
        slice_period,
    })
}

/// Nodal fields of all slices of one cell.
#[derive(Clone, Debug)]
pub struct SliceFields {
    pub values: Vec<Vec<C64>>,
}

/// Cell solution with face data `a` on `x = 0` and `b` on `x = 1`: `E⁰[a] + E¹[b]`.
pub fn reconstruct_cell(
    cell: &SliceCell,
    ops: &CellOperators,
    a: &[C64],
    b: &[C64],
) -> SliceFields {
    let col = |v: &[C64]| CMat::from_fn(v.len(), 1, |i, _| v[i]);
    let psi_m = &ops.local.r[0] * col(a) + &ops.local.r[1] * col(b);
    let psi: Vec<C64> = (0..psi_m.nrows()).map(|i| psi_m[(i, 0)]).collect();
    let values = (0..cell.n_s())
        .into_par_iter()
        .map(|m| {
            let bv = cell.slice_boundary_values(m, a, b, &psi);
            ops.bank.slice_field(cell, m, &bv)
        })
        .collect();
    SliceFields { values }
}

/// `E⁰[Φ]` and `E¹[Φ]` for one face datum.
pub fn reconstruct_e(
    cell: &SliceCell,
    ops: &CellOperators,
    phi: &[C64],
) -> (SliceFields, SliceFields) {
    let zero = vec![ZERO; phi.len()];
    (
        reconstruct_cell(cell, ops, phi, &zero),
        reconstruct_cell(cell, ops, &zero, phi),
    )
}

/// Evaluates sliced cell fields at `(x, z1, z2)` with `x ∈ [0,1]`, `z1, z2` taken modulo 1.
pub fn eval_cell_field(
    cell: &SliceCell,
    fields: &SliceFields,
    x: f64,
    z1: f64,
    z2: f64,
) -> Result<C64> {
    let z1f = crate::media::frac(z1);
    let s = crate::media::frac(z2 - cell.cut.vartheta() * z1f);
    let w = cell.grid.interp_weights(s);
    eval_with_weights(cell, fields, &w, x, z1f / cell.cut.theta1)
}

/// Trigonometric combination of the slice values at the local point `(x, z)`.
pub fn eval_with_weights(
    cell: &SliceCell,
    fields: &SliceFields,
    w: &[C64],
    x: f64,
    z: f64,
) -> Result<C64> {
    let (v, bw, _) = cell.mesh.locate(x, z)?;
    let mut acc = ZERO;
    for (m, f) in fields.values.iter().enumerate() {
        let val = f[v[0]] * bw[0] + f[v[1]] * bw[1] + f[v[2]] * bw[2];
        acc += w[m] * val;
    }
    Ok(acc)
}
