//! Implicit viscous operator of the truncated system.
//!
//! Per mode `m = kN` the vector Laplacian couples cos-r with sin-θ (and
//! sin-r with cos-θ) through `∓2m/r²`. The sums and differences
//! `w± = u^r ± u^θ` diagonalise each pair into scalar operators
//! `−L_{m±1}`, so every implicit solve is a scalar `(I + αL_μ)` solve with
//! `μ ∈ {m−1, m, m+1}`. Mode 0 has `−L_1` on r and θ and `−L_0` on z.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{inner_product, Grid};
use crate::kernel::lm::lm_apply_values;
use crate::linalg::{axial_second_difference_symbol, AxialTransform, RadialBands, Tridiagonal};
use crate::modes::ModeCoefficients;

/// One decoupled scalar unknown: `values` evolves under `−L_μ`.
#[derive(Clone, Debug)]
pub(crate) struct Channel {
    pub mu: u32,
    pub values: Array2<f64>,
}

fn is_zero(a: &Array2<f64>) -> bool {
    a.iter().all(|v| *v == 0.0)
}

/// Splits mode `k` into its decoupled channels.
pub(crate) fn to_channels(c: &ModeCoefficients, k: usize, n_base: u32) -> Vec<Channel> {
    if k == 0 {
        let [r, t, z] = &c.cos[0];
        return vec![
            Channel { mu: 1, values: r.clone() },
            Channel { mu: 1, values: t.clone() },
            Channel { mu: 0, values: z.clone() },
        ];
    }
    let m = k as u32 * n_base;
    let [cr, ct, cz] = &c.cos[k];
    let [sr, st, sz] = &c.sin[k];
    vec![
        Channel { mu: m + 1, values: cr + st },
        Channel { mu: m.abs_diff(1), values: cr - st },
        Channel { mu: m, values: cz.clone() },
        Channel { mu: m.abs_diff(1), values: sr + ct },
        Channel { mu: m + 1, values: sr - ct },
        Channel { mu: m, values: sz.clone() },
    ]
}

/// Inverse of [`to_channels`].
pub(crate) fn from_channels(c: &mut ModeCoefficients, k: usize, ch: Vec<Channel>) {
    let mut it = ch.into_iter().map(|c| c.values);
    let mut next = || it.next().expect("channel count");
    if k == 0 {
        c.cos[0] = [next(), next(), next()];
        return;
    }
    let (p, q, cz, s, d, sz) = (next(), next(), next(), next(), next(), next());
    let half_sum = |a: &Array2<f64>, b: &Array2<f64>| (a + b) * 0.5;
    let half_diff = |a: &Array2<f64>, b: &Array2<f64>| (a - b) * 0.5;
    c.cos[k] = [half_sum(&p, &q), half_diff(&s, &d), cz];
    c.sin[k] = [half_sum(&s, &d), half_diff(&p, &q), sz];
}

/// Vector Laplacian of every mode, `Δu` with the curvature couplings.
pub fn vector_laplacian(c: &ModeCoefficients, grid: &Grid, n_base: u32) -> ModeCoefficients {
    let mut out = ModeCoefficients::zeros(grid, c.k_max());
    for k in 0..=c.k_max() {
        let ch = to_channels(c, k, n_base)
            .into_iter()
            .map(|Channel { mu, values }| {
                let values = if is_zero(&values) {
                    values
                } else {
                    -lm_apply_values(grid, mu, &values)
                };
                Channel { mu, values }
            })
            .collect();
        from_channels(&mut out, k, ch);
    }
    out
}

/// `−⟨Δu, u⟩` over the whole field (Plancherel weights: 1 for mode 0,
/// ½ for `k ≥ 1`). Equals `‖∇u‖²` in the discrete sense.
pub fn viscous_dissipation(c: &ModeCoefficients, grid: &Grid, n_base: u32) -> f64 {
    let mut total = 0.0;
    for k in 0..=c.k_max() {
        // each w-channel carries twice the energy of the pair it replaces
        let weight = if k == 0 { 1.0 } else { 0.25 };
        let ch = to_channels(c, k, n_base);
        for (idx, Channel { mu, values }) in ch.iter().enumerate() {
            if is_zero(values) {
                continue;
            }
            let w = if k > 0 && (idx == 2 || idx == 5) { 0.5 } else { weight };
            total += w * inner_product(grid, &lm_apply_values(grid, *mu, values), values);
        }
    }
    total
}

/// Factorised `(I + α L_μ)` with iterative refinement.
#[derive(Clone, Debug)]
pub(crate) struct HelmholtzSolver {
    grid: Grid,
    mu: u32,
    alpha: f64,
    transform: AxialTransform,
    factors: Vec<Tridiagonal>,
}

impl HelmholtzSolver {
    pub fn new(grid: Grid, mu: u32, alpha: f64) -> Result<Self> {
        let bands = RadialBands::singular_laplacian(&grid, mu);
        let mut factors = Vec::with_capacity(grid.nz());
        for kappa in 0..grid.nz() {
            let b = bands.affine(1.0 + alpha * axial_second_difference_symbol(&grid, kappa), alpha);
            factors.push(Tridiagonal::factor(&b.sub, &b.diag, &b.sup).ok_or(Error::SolverFailure {
                iterations: 0,
                residual: f64::INFINITY,
            })?);
        }
        Ok(HelmholtzSolver {
            grid,
            mu,
            alpha,
            transform: AxialTransform::new(&grid),
            factors,
        })
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x + &(lm_apply_values(&self.grid, self.mu, x) * self.alpha)
    }

    fn direct(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let nz = self.grid.nz();
        let mut spec = self.transform.forward(rhs);
        for (kappa, f) in self.factors.iter().enumerate() {
            f.solve_strided(&mut spec, kappa, nz);
        }
        self.transform.inverse(spec)
    }

    pub fn solve(&self, rhs: &Array2<f64>, tol: f64, max_refinement: usize) -> Result<Array2<f64>> {
        if is_zero(rhs) {
            return Ok(self.grid.zeros());
        }
        let norm = |v: &Array2<f64>| inner_product(&self.grid, v, v).sqrt();
        let rhs_norm = norm(rhs);
        let mut x = self.direct(rhs);
        let mut residual = f64::INFINITY;
        for it in 0..=max_refinement {
            let r = rhs - &self.apply(&x);
            residual = norm(&r) / rhs_norm;
            if residual <= tol {
                return Ok(x);
            }
            if it < max_refinement {
                x += &self.direct(&r);
            }
        }
        Err(Error::SolverFailure {
            iterations: max_refinement,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian_rz_values;

    #[test]
    fn channels_roundtrip() {
        let g = Grid::new(8, 6, 1.0, 1.0).unwrap();
        let mut c = ModeCoefficients::zeros(&g, 2);
        for (n, a) in c.cos.iter_mut().chain(c.sin.iter_mut().skip(1)).flatten().enumerate() {
            *a = g.sample(|r, z| (n as f64 + 1.0) * r * (1.0 + z));
        }
        let mut back = ModeCoefficients::zeros(&g, 2);
        for k in 0..=2 {
            from_channels(&mut back, k, to_channels(&c, k, 3));
        }
        for (x, y) in c.iter().zip(back.iter()) {
            assert!((x.3 - y.3).iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn uniform_cartesian_direction_has_scalar_laplacian() {
        // (φ, 0, 0) in Cartesian components is u^r = φ cos θ, u^θ = −φ sin θ
        let g = Grid::new(32, 32, 3.0, 3.0).unwrap();
        let phi = g.sample(|r, z| (-((r - 1.5).powi(2) + (z - 1.5).powi(2)) / 0.1).exp());
        let mut c = ModeCoefficients::zeros(&g, 1);
        c.cos[1][0] = phi.clone();
        c.sin[1][1] = -&phi;
        let lap = vector_laplacian(&c, &g, 1);
        let scalar = laplacian_rz_values(&g, &phi);
        assert!((&lap.cos[1][0] - &scalar).iter().all(|v| v.abs() < 1e-10));
        assert!((&lap.sin[1][1] + &scalar).iter().all(|v| v.abs() < 1e-10));
        assert!(lap.cos[1][2].iter().chain(lap.sin[1][0].iter()).all(|v| *v == 0.0));
        // ‖∇u‖² of the Cartesian field equals ‖∇φ‖² · ½ (cos² average)
        let d = viscous_dissipation(&c, &g, 1);
        let direct = 0.5 * 2.0 * inner_product(&g, &lm_apply_values(&g, 0, &phi), &phi);
        assert!((d - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn helmholtz_roundtrip() {
        let g = Grid::new(24, 16, 2.0, 2.0).unwrap();
        let x = g.sample(|r, z| r * r * (z * 3.0).sin() * (2.0 - r));
        for mu in [0, 1, 7] {
            let s = HelmholtzSolver::new(g, mu, 0.01).unwrap();
            let back = s.solve(&s.apply(&x), 1e-12, 4).unwrap();
            assert!((&back - &x).iter().all(|v| v.abs() < 1e-10));
        }
    }
}
