//! Discrete projection onto the per-mode divergence-free subspace.
//!
//! The divergence `D` is the centred stencil of
//! [`crate::modes::mode_divergence`]; the mode gradient is `G = −D*` in the
//! weighted inner product, so `D G` is symmetric and `u − G(DG)⁻¹Du` is the
//! orthogonal projection onto `ker D`. `D G` is pentadiagonal in `r` for
//! each axial wavenumber.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{d_dz_values, inner_product, Grid, Parity};
use crate::linalg::{axial_wide_difference_symbol, AxialTransform, BandedLu};
use crate::modes::state::divergence_values;
use crate::modes::{Component, ModeCoefficients, VelocityModeSet};
use super::stepper::DEFAULT_MAX_REFINEMENT;


/// Scalar potentials per mode family: `mode0`, then `cos[k-1]`, `sin[k-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureSet {
    pub mode0: Array2<f64>,
    pub cos: Vec<Array2<f64>>,
    pub sin: Vec<Array2<f64>>,
}

impl PressureSet {
    pub fn zeros(grid: &Grid, k_max: usize) -> Self {
        PressureSet {
            mode0: grid.zeros(),
            cos: (0..k_max).map(|_| grid.zeros()).collect(),
            sin: (0..k_max).map(|_| grid.zeros()).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Array2<f64>> {
        std::iter::once(&self.mode0).chain(self.cos.iter()).chain(self.sin.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        std::iter::once(&mut self.mode0)
            .chain(self.cos.iter_mut())
            .chain(self.sin.iter_mut())
    }
}

/// Factorised `D G` for one wavenumber.
#[derive(Clone, Debug)]
pub(crate) struct ProjectionSolver {
    grid: Grid,
    m: u32,
    transform: AxialTransform,
    factors: Vec<BandedLu>,
}

fn is_zero(a: &Array2<f64>) -> bool {
    a.iter().all(|v| *v == 0.0)
}

/// Radial part of the mode gradient, defined as minus the weighted adjoint
/// of the radial divergence `D_r u + u/r`:
/// `((rφ)_{i+1} − (rφ)_{i−1}) / (2h r_i) − φ_i / r_i` with
/// `(rφ)_{−1} = ±r_0 φ_0` (sign of the potential's parity) and
/// `(rφ)_n = (rφ)_{n−1}`. Away from the first and last rows it is a
/// second-order gradient. Because `G = −D*`, subtracting `G φ` is the
/// orthogonal projection onto `ker D` and the pressure does no work on
/// divergence-free fields.
pub(crate) fn radial_gradient(grid: &Grid, phi: &Array2<f64>, parity: Parity) -> Array2<f64> {
    let nr = grid.nr();
    let inv = 0.5 / grid.hr();
    let radii = grid.radii();
    let mut out = grid.zeros();
    for (src, mut dst) in phi.rows().into_iter().zip(out.rows_mut()) {
        let rphi = |i: usize| radii[i] * src[i];
        for i in 0..nr {
            let left = if i == 0 { parity.sign() * rphi(0) } else { rphi(i - 1) };
            let right = if i + 1 == nr { rphi(nr - 1) } else { rphi(i + 1) };
            dst[i] = ((right - left) * inv - src[i]) / radii[i];
        }
    }
    out
}

/// `D G φ` for a potential of wavenumber `m`.
fn div_grad(grid: &Grid, m: u32, phi: &Array2<f64>) -> Array2<f64> {
    let p = Parity::of_wavenumber(m);
    let gr = radial_gradient(grid, phi, p);
    let gz = d_dz_values(grid, phi);
    let radii = grid.radii();
    let w = m as f64;
    // the θ-gradient −mφ/r paired with +m(·)/r in the divergence
    let gt = Array2::from_shape_fn(phi.dim(), |(j, i)| -w * phi[[j, i]] / radii[i]);
    divergence_values(grid, &gr, &gz, m, Some((w, &gt)))
}

impl ProjectionSolver {
    pub fn new(grid: Grid, m: u32) -> Result<Self> {
        let nr = grid.nr();
        // radial part of D G on unit vectors, one z-uniform row at a time
        let one_row = Grid::new(nr, 3, grid.rmax(), 3.0 * grid.hz())?;
        let mut dense = vec![0.0; nr * nr];
        for j in 0..nr {
            let mut e = one_row.zeros();
            e.column_mut(j).fill(1.0);
            let col = div_grad(&one_row, m, &e);
            for i in 0..nr {
                dense[i * nr + j] = col[[0, i]];
            }
        }
        let mut factors = Vec::with_capacity(grid.nz());
        for kappa in 0..grid.nz() {
            let shift = axial_wide_difference_symbol(&grid, kappa);
            let entry = |i: usize, j: usize| dense[i * nr + j] - if i == j { shift } else { 0.0 };
            factors.push(BandedLu::factor(nr, 2, 2, entry).ok_or(Error::SolverFailure {
                iterations: 0,
                residual: f64::INFINITY,
            })?);
        }
        Ok(ProjectionSolver {
            grid,
            m,
            transform: AxialTransform::new(&grid),
            factors,
        })
    }

    fn direct(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let nz = self.grid.nz();
        let mut spec: Vec<Complex64> = self.transform.forward(rhs);
        for (kappa, f) in self.factors.iter().enumerate() {
            f.solve_strided(&mut spec, kappa, nz);
        }
        self.transform.inverse(spec)
    }

    /// Solves `D G φ = rhs`; refinement continues while it keeps paying off
    /// and the relative residual must end below `tol`.
    pub fn solve(&self, rhs: &Array2<f64>, tol: f64, max_refinement: usize) -> Result<Array2<f64>> {
        if is_zero(rhs) {
            return Ok(self.grid.zeros());
        }
        let norm = |v: &Array2<f64>| inner_product(&self.grid, v, v).sqrt();
        let rhs_norm = norm(rhs);
        let mut x = self.direct(rhs);
        let mut best = (f64::INFINITY, x.clone());
        for _ in 0..=max_refinement {
            let r = rhs - &div_grad(&self.grid, self.m, &x);
            let residual = norm(&r) / rhs_norm;
            if residual >= 0.5 * best.0 {
                if residual < best.0 {
                    best = (residual, x);
                }
                break;
            }
            best = (residual, x.clone());
            x += &self.direct(&r);
        }
        if best.0 <= tol {
            Ok(best.1)
        } else {
            Err(Error::SolverFailure {
                iterations: max_refinement,
                residual: best.0,
            })
        }
    }
}

/// `c −= scale · G φ` for a potential of wavenumber `m` in mode `k`. The
/// cos-family gradient is `(D_r φ, −mφ/r, D_z φ)` landing in
/// (cos-r, sin-θ, cos-z); the sin family's is `(D_r φ, +mφ/r, D_z φ)` in
/// (sin-r, cos-θ, sin-z).
pub(crate) fn subtract_gradient(
    c: &mut ModeCoefficients,
    grid: &Grid,
    k: usize,
    m: u32,
    cos_family: bool,
    phi: &Array2<f64>,
    scale: f64,
) {
    if is_zero(phi) {
        return;
    }
    let gr = radial_gradient(grid, phi, Parity::of_wavenumber(m));
    let gz = d_dz_values(grid, phi);
    let (own, other, theta_sign) = if cos_family {
        (&mut c.cos, &mut c.sin, -1.0)
    } else {
        (&mut c.sin, &mut c.cos, 1.0)
    };
    own[k][Component::R.index()].scaled_add(-scale, &gr);
    own[k][Component::Z.index()].scaled_add(-scale, &gz);
    if k > 0 {
        let radii = grid.radii();
        let coef = -scale * theta_sign * m as f64;
        for ((j, i), v) in other[k][Component::Theta.index()].indexed_iter_mut() {
            *v += coef * phi[[j, i]] / radii[i];
        }
    }
}

/// Divergence of every family of `c`, in [`PressureSet`] order.
pub(crate) fn family_divergences(c: &ModeCoefficients, grid: &Grid, n_base: u32) -> PressureSet {
    let k_max = c.k_max();
    let mut out = PressureSet::zeros(grid, k_max);
    out.mode0 = divergence_values(grid, &c.cos[0][0], &c.cos[0][2], 0, None);
    for k in 1..=k_max {
        let m = k as u32 * n_base;
        let w = m as f64;
        out.cos[k - 1] = divergence_values(grid, &c.cos[k][0], &c.cos[k][2], m, Some((w, &c.sin[k][1])));
        out.sin[k - 1] = divergence_values(grid, &c.sin[k][0], &c.sin[k][2], m, Some((-w, &c.cos[k][1])));
    }
    out
}

/// Lazily built projection solvers keyed by wavenumber.
#[derive(Clone, Debug)]
pub(crate) struct Projector {
    grid: Grid,
    tol: f64,
    max_refinement: usize,
    solvers: BTreeMap<u32, ProjectionSolver>,
}

impl Projector {
    pub fn new(grid: Grid, tol: f64, max_refinement: usize) -> Self {
        Projector {
            grid,
            tol,
            max_refinement,
            solvers: BTreeMap::new(),
        }
    }

    fn solve(&mut self, m: u32, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        if is_zero(rhs) {
            return Ok(self.grid.zeros());
        }
        let solver = match self.solvers.entry(m) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(ProjectionSolver::new(self.grid, m)?),
        };
        solver.solve(rhs, self.tol, self.max_refinement)
    }

    /// Removes the divergence of `c` in place and returns the potentials.
    pub fn project(&mut self, c: &mut ModeCoefficients, n_base: u32) -> Result<PressureSet> {
        let grid = self.grid;
        let div = family_divergences(c, &grid, n_base);
        let mut phi = PressureSet::zeros(&grid, c.k_max());
        phi.mode0 = self.solve(0, &div.mode0)?;
        subtract_gradient(c, &grid, 0, 0, true, &phi.mode0, 1.0);
        for k in 1..=c.k_max() {
            let m = k as u32 * n_base;
            phi.cos[k - 1] = self.solve(m, &div.cos[k - 1])?;
            subtract_gradient(c, &grid, k, m, true, &phi.cos[k - 1], 1.0);
            phi.sin[k - 1] = self.solve(m, &div.sin[k - 1])?;
            subtract_gradient(c, &grid, k, m, false, &phi.sin[k - 1], 1.0);
        }
        Ok(phi)
    }
}

/// Projects `state` onto the discretely divergence-free modes; `tol` is the
/// relative residual demanded of each pressure solve.
pub fn project(state: &VelocityModeSet, tol: f64) -> Result<VelocityModeSet> {
    let mut out = state.clone();
    let n_base = state.n_base();
    Projector::new(*state.grid(), tol, DEFAULT_MAX_REFINEMENT).project(out.coefficients_mut(), n_base)?;
    Ok(out)
}
