//! Propagation operators of periodic half-guides and the resulting DtN maps.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{
    col_to_vec, eigen, frobenius, identity, inverse, norm1, scaled, solve_dense, spectral_radius,
    vec_norm, vec_to_col, CMat, ZERO,
};
use crate::quasi2d::{reconstruct_cell, CellOperators, SliceCell, SliceFields};

/// Local DtN operators of one periodicity cell; `tjl` maps data on face `j` to flux tested on face `ℓ`.
#[derive(Clone, Debug)]
pub struct DtnBlocks {
    pub t00: CMat,
    pub t01: CMat,
    pub t10: CMat,
    pub t11: CMat,
}

impl DtnBlocks {
    pub fn dim(&self) -> usize {
        self.t00.nrows()
    }

    pub fn empty() -> DtnBlocks {
        let z = CMat::zeros(0, 0);
        DtnBlocks {
            t00: z.clone(),
            t01: z.clone(),
            t10: z.clone(),
            t11: z,
        }
    }

    /// `T¹⁰P² + (T⁰⁰+T¹¹)P + T⁰¹`.
    pub fn riccati_map(&self, p: &CMat) -> CMat {
        let b = &self.t00 + &self.t11;
        &self.t10 * (p * p) + &b * p + &self.t01
    }

    /// `V^H T V` for every block.
    pub fn project(&self, v: &CMat) -> DtnBlocks {
        let vh = v.adjoint().to_owned();
        let f = |t: &CMat| &vh * (t * v);
        DtnBlocks {
            t00: f(&self.t00),
            t01: f(&self.t01),
            t10: f(&self.t10),
            t11: f(&self.t11),
        }
    }
}

/// Relative Riccati residual `‖F(P)‖_F / ‖T⁰¹‖_F`.
pub fn riccati_residual(t: &DtnBlocks, p: &CMat) -> f64 {
    let r = frobenius(&t.riccati_map(p));
    let s = frobenius(&t.t01);
    if s > 0.0 {
        r / s
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiccatiBackend {
    Spectral,
    Newton,
}

impl std::str::FromStr for RiccatiBackend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spectral" => Ok(RiccatiBackend::Spectral),
            "newton" => Ok(RiccatiBackend::Newton),
            other => Err(Error::Config(format!("unknown riccati backend '{other}'"))),
        }
    }
}

/// Solution of the constrained Riccati equation.
#[derive(Clone, Debug)]
pub struct PropagationOperator {
    pub p: CMat,
    /// Eigenvalues of `P` (the selected pencil eigenvalues for the spectral backend).
    pub eigenvalues: Vec<C64>,
    pub spectral_radius: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Distance from the unit circle below which an eigenvalue is rejected.
pub const UNIT_CIRCLE_GAP: f64 = 1e-8;
/// Largest accepted condition estimate of the eigenvector matrix.
pub const MAX_EIGVEC_COND: f64 = 1e14;

/// Shift used for the shift-and-invert transformation of the pencil.
const PENCIL_SHIFT_ANGLE: f64 = 0.9;

/// Eigenvalues and eigenvectors of the pencil `λ²T¹⁰ + λ(T⁰⁰+T¹¹) + T⁰¹`, in first-companion form
/// `A − λB`, `A = [[0, I], [−T⁰¹, −(T⁰⁰+T¹¹)]]`, `B = diag(I, T¹⁰)`.
///
/// The pencil is reduced to a standard problem through `(A − σB)⁻¹B` with `|σ| = 1`; absorption keeps
/// the unit circle free of eigenvalues, and this avoids inverting `T¹⁰`. Infinite eigenvalues
/// (singular `T¹⁰`) come out as `∞`.
pub fn pencil_eigen(t: &DtnBlocks) -> Result<(Vec<C64>, CMat)> {
    let n = t.dim();
    let sigma = C64::from_polar(1.0, PENCIL_SHIFT_ANGLE);
    let b = &t.t00 + &t.t11;
    let q = &t.t01 + scaled(&b, sigma) + scaled(&t.t10, sigma * sigma);
    let mut rhs = CMat::zeros(n, 2 * n);
    let left = &b + scaled(&t.t10, sigma);
    rhs.as_mut().submatrix_mut(0, 0, n, n).copy_from(&left);
    rhs.as_mut().submatrix_mut(0, n, n, n).copy_from(&t.t10);
    let u = -solve_dense(&q, &rhs, "shifted quadratic pencil")?;
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.as_mut().submatrix_mut(0, 0, n, 2 * n).copy_from(&u);
    for j in 0..2 * n {
        for i in 0..n {
            let mut v = sigma * u[(i, j)];
            if j == i {
                v += 1.0;
            }
            m[(n + i, j)] = v;
        }
    }
    let (nu, y) = eigen(&m)?;
    let lambda = nu
        .iter()
        .map(|&v| {
            if v.norm() == 0.0 {
                C64::new(f64::INFINITY, 0.0)
            } else {
                sigma + 1.0 / v
            }
        })
        .collect();
    Ok((lambda, y))
}

/// Spectral backend: `P = X diag(λ) X⁻¹` over the `N` pencil eigenpairs inside the unit disk.
pub fn riccati_spectral(t: &DtnBlocks) -> Result<PropagationOperator> {
    let n = t.dim();
    if n == 0 {
        return Ok(empty_operator());
    }
    let (lambda, y) = pencil_eigen(t)?;
    let near: Vec<f64> = lambda
        .iter()
        .map(|l| l.norm())
        .filter(|m| (m - 1.0).abs() < 1e-2)
        .collect();
    if let Some(&m) = lambda
        .iter()
        .map(|l| l.norm())
        .collect::<Vec<_>>()
        .iter()
        .find(|m| (**m - 1.0).abs() < UNIT_CIRCLE_GAP)
    {
        return Err(Error::UnitCircle {
            modulus: m,
            delta: UNIT_CIRCLE_GAP,
        });
    }
    let inside: Vec<usize> = (0..lambda.len())
        .filter(|&i| lambda[i].norm() < 1.0)
        .collect();
    if inside.len() != n {
        return Err(Error::EigenCount {
            found: inside.len(),
            expected: n,
            near_one: near,
        });
    }
    let mut x = CMat::zeros(n, n);
    let mut lam = Vec::with_capacity(n);
    for (c, &i) in inside.iter().enumerate() {
        let col: Vec<C64> = (0..n).map(|r| y[(r, i)]).collect();
        let nrm = vec_norm(&col);
        for r in 0..n {
            x[(r, c)] = col[r] / nrm;
        }
        lam.push(lambda[i]);
    }
    let xinv = inverse(&x, "eigenvector matrix")?;
    let cond = norm1(&x) * norm1(&xinv);
    if !(cond < MAX_EIGVEC_COND) {
        return Err(Error::IllConditioned { cond });
    }
    let mut xd = x.clone();
    for c in 0..n {
        for r in 0..n {
            xd[(r, c)] *= lam[c];
        }
    }
    let p = &xd * &xinv;
    let radius = lam.iter().map(|l| l.norm()).fold(0.0, f64::max);
    Ok(PropagationOperator {
        residual: riccati_residual(t, &p),
        p,
        eigenvalues: lam,
        spectral_radius: radius,
        iterations: 0,
    })
}

fn empty_operator() -> PropagationOperator {
    PropagationOperator {
        p: CMat::zeros(0, 0),
        eigenvalues: Vec::new(),
        spectral_radius: 0.0,
        residual: 0.0,
        iterations: 0,
    }
}

/// Eigenvalue modulus margin of the projection step.
pub const NEWTON_PROJECTION_EPS: f64 = 1e-3;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Solves `X + K X P = C` through eigendecompositions of `K` and `P`, with two refinement sweeps.
fn solve_stein(k: &CMat, p: &CMat, c: &CMat) -> Result<CMat> {
    let n = k.nrows();
    let (ek, wk) = eigen(k)?;
    let (ep, vp) = eigen(p)?;
    let wk_inv = inverse(&wk, "newton eigenvectors")?;
    let vp_inv = inverse(&vp, "newton eigenvectors")?;
    let apply = |rhs: &CMat| -> CMat {
        let mut z = &wk_inv * (rhs * &vp);
        for j in 0..n {
            for i in 0..n {
                z[(i, j)] /= 1.0 + ek[i] * ep[j];
            }
        }
        &wk * (z * &vp_inv)
    };
    let mut x = apply(c);
    for _ in 0..2 {
        let r = c - (&x + k * (&x * p));
        x = x + apply(&r);
    }
    Ok(x)
}

/// Radially pulls eigenvalues of modulus `≥ 1 − ε` back to `1 − ε`.
fn project_spectrum(p: &CMat) -> Result<CMat> {
    let limit = 1.0 - NEWTON_PROJECTION_EPS;
    let (ev, v) = eigen(p)?;
    if ev.iter().all(|l| l.norm() < limit) {
        return Ok(p.clone());
    }
    let vinv = inverse(&v, "projection eigenvectors")?;
    let mut vd = v.clone();
    for (c, l) in ev.iter().enumerate() {
        let m = l.norm();
        let nl = if m >= limit { l * (limit / m) } else { *l };
        for r in 0..p.nrows() {
            vd[(r, c)] *= nl;
        }
    }
    Ok(&vd * &vinv)
}

/// Modified Newton iteration on `F(P) = T¹⁰P² + (T⁰⁰+T¹¹)P + T⁰¹`.
pub fn riccati_newton(t: &DtnBlocks, p_init: Option<&CMat>) -> Result<PropagationOperator> {
    let n = t.dim();
    if n == 0 {
        return Ok(empty_operator());
    }
    let b = &t.t00 + &t.t11;
    let mut p = match p_init {
        Some(p0) => p0.clone(),
        None => CMat::zeros(n, n),
    };
    let mut history = vec![riccati_residual(t, &p)];
    let mut iterations = 0;
    while history.last().copied().unwrap_or(f64::INFINITY) > NEWTON_TOL {
        if iterations >= NEWTON_MAX_ITER || !history.last().unwrap().is_finite() {
            return Err(Error::NoConvergence { history });
        }
        let f = t.riccati_map(&p);
        let m = &t.t10 * &p + &b;
        let mut rhs = CMat::zeros(n, 2 * n);
        rhs.as_mut().submatrix_mut(0, 0, n, n).copy_from(&t.t10);
        rhs.as_mut().submatrix_mut(0, n, n, n).copy_from(&f);
        let sol = solve_dense(&m, &rhs, "newton linearization")?;
        let k = sol.as_ref().submatrix(0, 0, n, n).to_owned();
        let c = -sol.as_ref().submatrix(0, n, n, n).to_owned();
        let dx = solve_stein(&k, &p, &c)?;
        p = project_spectrum(&(&p + &dx))?;
        iterations += 1;
        history.push(riccati_residual(t, &p));
    }
    let ev = crate::linalg::eigenvalues(&p)?;
    let radius = ev.iter().map(|l| l.norm()).fold(0.0, f64::max);
    Ok(PropagationOperator {
        residual: *history.last().unwrap(),
        p,
        eigenvalues: ev,
        spectral_radius: radius,
        iterations,
    })
}

pub fn solve_riccati(t: &DtnBlocks, backend: RiccatiBackend) -> Result<PropagationOperator> {
    match backend {
        RiccatiBackend::Spectral => riccati_spectral(t),
        RiccatiBackend::Newton => riccati_newton(t, None),
    }
}

/// Unitary basis of the sliced face space adapted to a slice shift symmetry.
///
/// If the cell problems of slices `m` and `m + c` coincide, the operators commute with the cyclic
/// shift by `c` slices and are block diagonal in the discrete Fourier basis in `s`, one block per
/// residue class of the Fourier index modulo `N_s / c`.
pub fn symmetry_blocks(n_s: usize, n_edge: usize, period: usize) -> Vec<CMat> {
    if period == 0 || n_s % period != 0 || period == n_s {
        return vec![identity(n_s * n_edge)];
    }
    let groups = n_s / period;
    let norm = 1.0 / (n_s as f64).sqrt();
    (0..groups)
        .map(|g| {
            let modes: Vec<usize> = (0..period).map(|t| g + t * groups).collect();
            CMat::from_fn(n_s * n_edge, period * n_edge, |row, col| {
                let (m, iz) = (row / n_edge, row % n_edge);
                let (t, jz) = (col / n_edge, col % n_edge);
                if iz != jz {
                    return ZERO;
                }
                C64::from_polar(norm, 2.0 * PI * (modes[t] * m) as f64 / n_s as f64)
            })
        })
        .collect()
}

/// Applies the unitary slice DFT `W = F ⊗ I` (`F[m,q] = e^{2πiqm/N_s}/√N_s`) to the rows or columns.
///
/// `left = true` computes `Wᴴ M` (`adjoint`) or `W M`; `left = false` computes `M W` or `M Wᴴ`.
fn slice_dft(m: &CMat, n_s: usize, n_edge: usize, left: bool, adjoint: bool) -> CMat {
    let mut planner = FftPlanner::<f64>::new();
    // products with Wᴴ carry e^{−2πiqm/N}, products with W carry e^{+2πiqm/N}
    let forward = adjoint;
    let fft = if forward {
        planner.plan_fft_forward(n_s)
    } else {
        planner.plan_fft_inverse(n_s)
    };
    let scale = 1.0 / (n_s as f64).sqrt();
    let mut out = m.clone();
    let mut buf = vec![ZERO; n_s];
    let lines = if left { m.ncols() } else { m.nrows() };
    for line in 0..lines {
        for e in 0..n_edge {
            for (q, b) in buf.iter_mut().enumerate() {
                let idx = q * n_edge + e;
                *b = if left { m[(idx, line)] } else { m[(line, idx)] };
            }
            fft.process(&mut buf);
            for (q, b) in buf.iter().enumerate() {
                let idx = q * n_edge + e;
                if left {
                    out[(idx, line)] = b * scale;
                } else {
                    out[(line, idx)] = b * scale;
                }
            }
        }
    }
    out
}

/// Face indices of the Fourier bins of each symmetry group, in the slice-DFT basis.
fn group_indices(n_s: usize, n_edge: usize, period: usize) -> Vec<Vec<usize>> {
    let groups = n_s / period;
    (0..groups)
        .map(|g| {
            (0..period)
                .flat_map(|t| {
                    let q = g + t * groups;
                    (0..n_edge).map(move |e| q * n_edge + e)
                })
                .collect()
        })
        .collect()
}

fn select(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Riccati solve exploiting a slice shift symmetry of the cell problems.
///
/// The blocks are transformed by the slice DFT, the Riccati equation is solved on each group of
/// Fourier bins (see [`symmetry_blocks`]), and `P` is transformed back.
pub fn riccati_with_symmetry(
    t: &DtnBlocks,
    n_s: usize,
    n_edge: usize,
    period: usize,
    backend: RiccatiBackend,
) -> Result<PropagationOperator> {
    if period == 0 || n_s % period != 0 || period == n_s || t.dim() != n_s * n_edge {
        return solve_riccati(t, backend);
    }
    let hat = |m: &CMat| {
        slice_dft(
            &slice_dft(m, n_s, n_edge, true, true),
            n_s,
            n_edge,
            false,
            false,
        )
    };
    let (h00, h01, h10, h11) = (hat(&t.t00), hat(&t.t01), hat(&t.t10), hat(&t.t11));
    let n = t.dim();
    let mut p_hat = CMat::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut iterations = 0;
    for idx in group_indices(n_s, n_edge, period) {
        let sub = DtnBlocks {
            t00: select(&h00, &idx),
            t01: select(&h01, &idx),
            t10: select(&h10, &idx),
            t11: select(&h11, &idx),
        };
        let op = solve_riccati(&sub, backend)?;
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                p_hat[(r, c)] = op.p[(i, j)];
            }
        }
        eigenvalues.extend(op.eigenvalues);
        iterations = iterations.max(op.iterations);
    }
    let p = slice_dft(
        &slice_dft(&p_hat, n_s, n_edge, true, false),
        n_s,
        n_edge,
        false,
        true,
    );
    let radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    Ok(PropagationOperator {
        residual: riccati_residual(t, &p),
        p,
        eigenvalues,
        spectral_radius: radius,
        iterations,
    })
}

/// Half-guide DtN `Λ = T¹⁰P + T⁰⁰` in weak form; the minus side uses its reflected cell operators.
pub fn halfguide_dtn(t: &DtnBlocks, p: &CMat) -> CMat {
    &t.t10 * p + &t.t00
}

/// `PⁿΦ`.
pub fn propagate(p: &CMat, phi: &[C64], n: usize) -> Vec<C64> {
    let mut v = vec_to_col(phi);
    for _ in 0..n {
        v = p * &v;
    }
    col_to_vec(&v, 0)
}

/// Traces `PⁿΦ` for `n = 0..=n_max`.
pub fn traces(p: &CMat, phi: &[C64], n_max: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut v = vec_to_col(phi);
    out.push(phi.to_vec());
    for _ in 0..n_max {
        v = p * &v;
        out.push(col_to_vec(&v, 0));
    }
    out
}

/// Least-squares slope of `log ‖PⁿΦ‖` over `n = 0..=n_max`.
pub fn decay_slope(p: &CMat, phi: &[C64], n_max: usize) -> f64 {
    let tr = traces(p, phi, n_max);
    let pts: Vec<(f64, f64)> = tr
        .iter()
        .enumerate()
        .filter_map(|(n, v)| {
            let nv = vec_norm(v);
            (nv > 0.0).then(|| (n as f64, nv.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Number of cells after which traces fall below `tol` relative to the interface, from `ρ(P)`.
pub fn cells_for_tolerance(spectral_radius: f64, tol: f64) -> usize {
    let alpha = -spectral_radius.max(1e-300).ln();
    if !(alpha > 0.0) {
        return usize::MAX;
    }
    ((tol.ln().abs() / alpha).ceil() as usize).max(4)
}

/// Half-guide field cell by cell: cell `n` carries `E⁰[PⁿΦ] + E¹[Pⁿ⁺¹Φ]`.
pub fn halfguide_field(
    cell: &SliceCell,
    ops: &CellOperators,
    p: &CMat,
    phi: &[C64],
    n_cells: usize,
) -> Vec<SliceFields> {
    let tr = traces(p, phi, n_cells);
    (0..n_cells)
        .map(|n| reconstruct_cell(cell, ops, &tr[n], &tr[n + 1]))
        .collect()
}

pub fn spectral_radius_of(p: &CMat) -> Result<f64> {
    spectral_radius(p)
}
