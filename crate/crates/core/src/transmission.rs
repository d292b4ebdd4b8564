//! Floquet-Bloch decomposition along the lifted interface, interface equations and sampling of
//! the physical field.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halfguide::{
    decay_slope, halfguide_dtn, riccati_with_symmetry, traces, DtnBlocks, PropagationOperator,
    RiccatiBackend,
};
use crate::linalg::{frobenius, mat_vec, solve_dense, vec_norm, vec_to_col, CMat, ZERO};
use crate::media::{frac, AugmentedDataSpec, Config, CutMatrix, HalfSpaceMedium, JumpData, Side};
use crate::quasi2d::{
    cell_operators, eval_with_weights, reconstruct_cell, SliceCell, SliceEdge, SliceFields,
};

/// Equispaced Floquet points `k_j = −π + jΔk`, `Δk = 2π/N_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloquetGrid {
    pub n_k: usize,
}

impl FloquetGrid {
    pub fn new(n_k: usize) -> Result<Self> {
        if n_k == 0 {
            return Err(Error::Config("need at least one Floquet point".into()));
        }
        Ok(FloquetGrid { n_k })
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.n_k as f64
    }

    pub fn k(&self, j: usize) -> f64 {
        -PI + j as f64 * self.dk()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_k).map(|j| self.k(j)).collect()
    }

    /// `Δk Σ_j f(k_j)`, summed in increasing `j`.
    pub fn integrate<F: Fn(f64) -> C64>(&self, f: F) -> C64 {
        let mut acc = ZERO;
        for j in 0..self.n_k {
            acc += f(self.k(j));
        }
        acc * self.dk()
    }
}

/// Integer shifts `n` with `z + n·period` inside `[a, b]`.
fn image_range(z: f64, period: f64, (a, b): (f64, f64)) -> std::ops::RangeInclusive<i64> {
    let lo = ((a - z) / period).ceil() as i64;
    let hi = ((b - z) / period).floor() as i64;
    lo..=hi
}

/// Partial Floquet-Bloch transform of a 1-periodic-cell strip function at `(k, z)`:
/// `(1/√2π) Σ_n f(z + n) e^{−ik(z+n)}`, over the images meeting `support`.
pub fn fb_transform_point<F: Fn(f64) -> C64>(f: F, support: (f64, f64), k: f64, z: f64) -> C64 {
    let mut acc = ZERO;
    for n in image_range(z, 1.0, support) {
        let t = z + n as f64;
        acc += f(t) * C64::from_polar(1.0, -k * t);
    }
    acc / (2.0 * PI).sqrt()
}

/// Discrete inverse transform `(Δk/√2π) Σ_j v_j e^{ik_j(zf + n)}` at `z = zf + n`.
pub fn inverse_fb_point(grid: &FloquetGrid, values: &[C64], z: f64) -> C64 {
    let mut acc = ZERO;
    for (j, v) in values.iter().enumerate() {
        acc += v * C64::from_polar(1.0, grid.k(j) * z);
    }
    acc * (grid.dk() / (2.0 * PI).sqrt())
}

/// Transformed augmented data `Ĝ_k` at the point `z` of slice `s` on the interface.
pub fn fb_nodal(
    spec: &AugmentedDataSpec,
    g: &JumpData,
    cut: &CutMatrix,
    k: f64,
    s: f64,
    z: f64,
) -> C64 {
    if g.is_zero() {
        return ZERO;
    }
    let period = 1.0 / cut.theta1;
    let mut acc = ZERO;
    for n in image_range(z, period, g.support()) {
        let nf = n as f64;
        let val = g.eval(z + nf * period);
        if val == 0.0 {
            continue;
        }
        let phase =
            2.0 * PI * spec.ell as f64 * (s - cut.vartheta() * nf) - k * (cut.theta1 * z + nf);
        acc += C64::from_polar(val, phase);
    }
    acc / (2.0 * PI).sqrt()
}

/// Right-hand side of the interface equation: `Ĝ_k` tested against the face basis.
pub fn fb_data(spec: &AugmentedDataSpec, g: &JumpData, k: f64, cell: &SliceCell) -> Vec<C64> {
    let nz = cell.nz;
    let hz = cell.mesh.hz();
    let w = cell.weight();
    let mut rhs = vec![ZERO; cell.face_dim()];
    if g.is_zero() {
        return rhs;
    }
    for m in 0..cell.n_s() {
        let s = cell.grid.s(m);
        let vals: Vec<C64> = (0..=nz)
            .map(|iz| fb_nodal(spec, g, &cell.cut, k, s, iz as f64 * hz))
            .collect();
        // P1 edge mass applied to the nodal values
        let mut mv = vec![ZERO; nz + 1];
        for e in 0..nz {
            mv[e] += (vals[e] * 2.0 + vals[e + 1]) * (hz / 6.0);
            mv[e + 1] += (vals[e] * 1.0 + vals[e + 1] * 2.0) * (hz / 6.0);
        }
        for (i, terms) in cell.expansion(m, SliceEdge::X0).iter().enumerate() {
            for &(r, a) in terms {
                rhs[r] += a.conj() * mv[i] * w;
            }
        }
    }
    rhs
}

/// Solves `(Λ⁺ + Λ⁻) Φ = rhs`; returns `Φ` and the relative residual.
pub fn interface_solve(
    lambda_plus: &CMat,
    lambda_minus: &CMat,
    rhs: &[C64],
) -> Result<(Vec<C64>, f64)> {
    if lambda_plus.nrows() != rhs.len() || lambda_minus.nrows() != rhs.len() {
        return Err(Error::Config(
            "interface operator dimensions do not match the data".into(),
        ));
    }
    let sum = lambda_plus + lambda_minus;
    let b = vec_to_col(rhs);
    let x = solve_dense(&sum, &b, "interface equation")?;
    let phi: Vec<C64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    let nb = vec_norm(rhs);
    let r: Vec<C64> = mat_vec(&sum, &phi)
        .iter()
        .zip(rhs)
        .map(|(a, b)| a - b)
        .collect();
    let residual = if nb > 0.0 {
        vec_norm(&r) / nb
    } else {
        vec_norm(&r)
    };
    if residual > 1e-10 {
        return Err(Error::Singular {
            context: "interface equation".into(),
            detail: format!("relative residual {residual:e}; absorption may be too weak"),
        });
    }
    Ok((phi, residual))
}

/// Discretization parameters of the lifted pipeline.
#[derive(Clone, Copy, Debug)]
pub struct PipelineParams {
    pub h: f64,
    pub n_s: Option<usize>,
    pub n_k: usize,
    pub backend: RiccatiBackend,
    /// Cells on the plus side (`x ∈ [0, n]`) for which fields are kept.
    pub cells_plus: usize,
    /// Cells on the minus side (`x ∈ [−n, 0]`) for which fields are kept.
    pub cells_minus: usize,
    /// Number of propagation steps used in the decay fit.
    pub decay_steps: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            h: 0.05,
            n_s: None,
            n_k: 32,
            backend: RiccatiBackend::Spectral,
            cells_plus: 1,
            cells_minus: 1,
            decay_steps: 8,
        }
    }
}

/// Half-guide data kept for one side at one Floquet point.
#[derive(Clone, Debug)]
pub struct SideTrace {
    pub spectral_radius: f64,
    pub riccati_residual: f64,
    pub riccati_iterations: usize,
    pub slice_period: usize,
    /// Least-squares slope of `log ‖PⁿΦ‖`.
    pub alpha: f64,
    /// `PⁿΦ` for `n = 0..=cells`.
    pub traces: Vec<Vec<C64>>,
    /// Cell fields `E⁰[PⁿΦ] + E¹[Pⁿ⁺¹Φ]` in the reflected frame.
    pub fields: Vec<SliceFields>,
}

#[derive(Clone, Debug)]
pub struct FloquetPoint {
    pub k: f64,
    pub phi: Vec<C64>,
    pub rhs_norm: f64,
    pub interface_residual: f64,
    pub plus: SideTrace,
    pub minus: SideTrace,
    pub seconds: f64,
}

/// Results of all Floquet points of one run.
#[derive(Clone, Debug)]
pub struct FloquetSweep {
    pub config: Config,
    pub cell: SliceCell,
    pub grid: FloquetGrid,
    pub omega: C64,
    pub params: PipelineParams,
    pub points: Vec<FloquetPoint>,
}

/// Cell operators, propagation operator and DtN of one half-guide.
struct HalfGuide {
    ops: crate::quasi2d::CellOperators,
    prop: PropagationOperator,
    lambda: CMat,
}

fn solve_half_guide(
    cell: &SliceCell,
    medium: &HalfSpaceMedium,
    omega: C64,
    k: f64,
    backend: RiccatiBackend,
) -> Result<HalfGuide> {
    let mut ops = cell_operators(cell, medium, omega, k)?;
    let blocks = std::mem::replace(&mut ops.local.blocks, DtnBlocks::empty());
    let prop = riccati_with_symmetry(&blocks, cell.n_s(), cell.nz, ops.slice_period, backend)?;
    if !(prop.spectral_radius < 1.0) {
        return Err(Error::SpectralRadius {
            radius: prop.spectral_radius,
        });
    }
    let lambda = halfguide_dtn(&blocks, &prop.p);
    Ok(HalfGuide { ops, prop, lambda })
}

fn side_trace(
    cell: &SliceCell,
    hg: &HalfGuide,
    phi: &[C64],
    cells: usize,
    decay_steps: usize,
) -> SideTrace {
    let steps = cells.max(decay_steps);
    let tr = traces(&hg.prop.p, phi, steps);
    let fields = (0..cells)
        .map(|n| reconstruct_cell(cell, &hg.ops, &tr[n], &tr[n + 1]))
        .collect();
    SideTrace {
        spectral_radius: hg.prop.spectral_radius,
        riccati_residual: hg.prop.residual,
        riccati_iterations: hg.prop.iterations,
        slice_period: hg.ops.slice_period,
        alpha: decay_slope(&hg.prop.p, phi, decay_steps),
        traces: tr[..=cells].to_vec(),
        fields,
    }
}

/// Solves one Floquet point: both half-guides, the interface equation and the cell fields.
pub fn solve_floquet_point(
    config: &Config,
    cell: &SliceCell,
    omega: C64,
    k: f64,
    data: (&AugmentedDataSpec, &JumpData),
    params: &PipelineParams,
) -> Result<FloquetPoint> {
    let start = Instant::now();
    let plus = HalfSpaceMedium::new(config, Side::Plus)?;
    let minus = HalfSpaceMedium::new(config, Side::Minus)?;
    let hp = solve_half_guide(cell, &plus, omega, k, params.backend)?;
    let hm = solve_half_guide(cell, &minus, omega, k, params.backend)?;
    let rhs = fb_data(data.0, data.1, k, cell);
    let (phi, residual) = interface_solve(&hp.lambda, &hm.lambda, &rhs)?;
    Ok(FloquetPoint {
        k,
        rhs_norm: vec_norm(&rhs),
        interface_residual: residual,
        plus: side_trace(cell, &hp, &phi, params.cells_plus, params.decay_steps),
        minus: side_trace(cell, &hm, &phi, params.cells_minus, params.decay_steps),
        phi,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the lifted pipeline over all Floquet points (in parallel; results ordered by `j`).
pub fn solve_sweep(
    config: &Config,
    omega: C64,
    spec: &AugmentedDataSpec,
    g: &JumpData,
    params: &PipelineParams,
) -> Result<FloquetSweep> {
    config.validate()?;
    if !(omega.im > 0.0) {
        return Err(Error::Config(format!(
            "frequency must have positive imaginary part, got {omega}"
        )));
    }
    let cut = crate::media::build_cut_matrix(config)?;
    let cell = SliceCell::new(cut, params.h, params.n_s)?;
    let grid = FloquetGrid::new(params.n_k)?;
    let points = (0..grid.n_k)
        .into_par_iter()
        .map(|j| {
            let k = grid.k(j);
            solve_floquet_point(config, &cell, omega, k, (spec, g), params)
                .map_err(|e| e.in_floquet(k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FloquetSweep {
        config: *config,
        cell,
        grid,
        omega,
        params: *params,
        points,
    })
}

/// Where a lifted point lives: side, cell index, local coordinates and slice weights.
pub struct PointLocation {
    pub side: Side,
    pub cell: usize,
    pub x_local: f64,
    pub z_local: f64,
    pub weights: Vec<C64>,
}

impl FloquetSweep {
    /// Locates `(x, z1, z2)` with `z1, z2 ∈ [0, 1)` in the stored cells.
    pub fn locate(&self, x: f64, z1: f64, z2: f64) -> Result<PointLocation> {
        let (side, xr, cells) = if x >= 0.0 {
            (Side::Plus, x, self.params.cells_plus)
        } else {
            (Side::Minus, -x, self.params.cells_minus)
        };
        let n = xr.floor() as usize;
        let n = if n >= cells && xr <= cells as f64 + 1e-12 {
            cells.saturating_sub(1)
        } else {
            n
        };
        if n >= cells {
            return Err(Error::OutOfRange { x, z: z1 });
        }
        let s = frac(z2 - self.cell.cut.vartheta() * z1);
        Ok(PointLocation {
            side,
            cell: n,
            x_local: (xr - n as f64).clamp(0.0, 1.0),
            z_local: z1 / self.cell.cut.theta1,
            weights: self.cell.grid.interp_weights(s),
        })
    }

    fn value_at(&self, j: usize, loc: &PointLocation) -> Result<C64> {
        let p = &self.points[j];
        let side = match loc.side {
            Side::Plus => &p.plus,
            Side::Minus => &p.minus,
        };
        eval_with_weights(
            &self.cell,
            &side.fields[loc.cell],
            &loc.weights,
            loc.x_local,
            loc.z_local,
        )
    }

    /// Waveguide solution `Û_{k_j}(x, z1, z2)` with `z1, z2` taken modulo 1.
    pub fn waveguide_value(&self, j: usize, x: f64, z1: f64, z2: f64) -> Result<C64> {
        let loc = self.locate(x, frac(z1), frac(z2))?;
        self.value_at(j, &loc)
    }

    /// Strip solution `U(x, z1, z2)` by the discrete inverse transform in `z1 ∈ ℝ`.
    pub fn inverse_fb(&self, x: f64, z1: f64, z2: f64) -> Result<C64> {
        let loc = self.locate(x, frac(z1), frac(z2))?;
        let mut vals = Vec::with_capacity(self.grid.n_k);
        for j in 0..self.grid.n_k {
            vals.push(self.value_at(j, &loc)?);
        }
        Ok(inverse_fb_point(&self.grid, &vals, z1))
    }

    /// Physical field `u(x, z) = U(x, θ1 z, θ2 z)`.
    pub fn physical_value(&self, x: f64, z: f64) -> Result<C64> {
        let cut = &self.cell.cut;
        self.inverse_fb(x, cut.theta1 * z, cut.theta2 * z)
    }

    /// Largest Riccati residual, spectral radius and interface residual over the sweep.
    pub fn diagnostics(&self) -> SweepDiagnostics {
        let mut d = SweepDiagnostics::default();
        for p in &self.points {
            for s in [&p.plus, &p.minus] {
                d.max_riccati_residual = d.max_riccati_residual.max(s.riccati_residual);
                d.max_spectral_radius = d.max_spectral_radius.max(s.spectral_radius);
                d.max_alpha = d.max_alpha.max(s.alpha);
            }
            d.max_interface_residual = d.max_interface_residual.max(p.interface_residual);
            d.seconds += p.seconds;
        }
        if self.points.is_empty() {
            d.max_alpha = f64::NAN;
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepDiagnostics {
    pub max_riccati_residual: f64,
    pub max_spectral_radius: f64,
    pub max_interface_residual: f64,
    /// Least negative decay slope over sides and Floquet points.
    pub max_alpha: f64,
    /// Summed per-point solve time.
    pub seconds: f64,
}

impl Default for SweepDiagnostics {
    fn default() -> Self {
        SweepDiagnostics {
            max_riccati_residual: 0.0,
            max_spectral_radius: 0.0,
            max_interface_residual: 0.0,
            max_alpha: f64::NEG_INFINITY,
            seconds: 0.0,
        }
    }
}

/// Samples `u` on physical points `(x, z)`.
pub fn sample_u(sweep: &FloquetSweep, points: &[(f64, f64)]) -> Result<Vec<C64>> {
    points
        .par_iter()
        .map(|&(x, z)| sweep.physical_value(x, z))
        .collect()
}

/// Relative discrete L² distance `‖a − b‖ / ‖b‖`.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    vec_norm(&d) / vec_norm(b)
}

/// Frobenius norm helper re-exported for diagnostics.
pub fn operator_norm(m: &CMat) -> f64 {
    frobenius(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    #[test]
    fn floquet_grid_points() {
        let g = FloquetGrid::new(8).unwrap();
        assert_eq!(g.k(0), -PI);
        assert!((g.k(7) - (PI - g.dk())).abs() < 1e-15);
        let total = g.integrate(|_| C64::new(1.0, 0.0));
        assert!((total.re - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn interface_identity_halves_data() {
        let id = identity(3);
        let rhs = vec![C64::new(1.0, 2.0), C64::new(-2.0, 0.5), ZERO];
        let (phi, res) = interface_solve(&id, &id, &rhs).unwrap();
        for (p, r) in phi.iter().zip(&rhs) {
            assert!((p - r * 0.5).norm() < 1e-15);
        }
        assert!(res < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let cut = CutMatrix::new(1.0, 0.5f64.sqrt()).unwrap();
        let cell = SliceCell::new(cut, 0.25, None).unwrap();
        let rhs = fb_data(&AugmentedDataSpec::default(), &JumpData::zero(), 0.3, &cell);
        assert!(rhs.iter().all(|v| *v == ZERO));
    }
}
