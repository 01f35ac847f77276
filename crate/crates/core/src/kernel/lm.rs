//! The singular elliptic operator `L_m = −(∂_r² + ∂_r/r + ∂_z²) + m²/r²`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{inner_product, laplacian_rz_values, Grid, ScalarModeField};
use crate::linalg::{axial_second_difference_symbol, AxialTransform, RadialBands, Tridiagonal};

/// Relative residual the solver guarantees.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 4;

/// `L_m` on a grid together with its factorisation: one tridiagonal radial
/// system per axial wavenumber.
#[derive(Clone, Debug)]
pub struct LmOperator {
    grid: Grid,
    m: u32,
    transform: AxialTransform,
    factors: Vec<Tridiagonal>,
}

impl LmOperator {
    pub fn new(grid: Grid, m: u32) -> Result<Self> {
        let bands = RadialBands::singular_laplacian(&grid, m);
        let nz = grid.nz();
        let mut factors = Vec::with_capacity(nz);
        for kappa in 0..nz {
            let shifted = bands.affine(axial_second_difference_symbol(&grid, kappa), 1.0);
            let f = Tridiagonal::factor(&shifted.sub, &shifted.diag, &shifted.sup).ok_or(
                Error::SolverFailure {
                    iterations: 0,
                    residual: f64::INFINITY,
                },
            )?;
            factors.push(f);
        }
        Ok(LmOperator {
            grid,
            m,
            transform: AxialTransform::new(&grid),
            factors,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    fn check(&self, f: &ScalarModeField) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch("field and operator live on different grids".into()));
        }
        if f.m() != self.m {
            return Err(Error::GridMismatch(format!(
                "field has wavenumber {} but the operator is L_{}",
                f.m(),
                self.m
            )));
        }
        Ok(())
    }

    pub(crate) fn apply_values(&self, values: &Array2<f64>) -> Array2<f64> {
        lm_apply_values(&self.grid, self.m, values)
    }

    pub fn apply(&self, f: &ScalarModeField) -> Result<ScalarModeField> {
        self.check(f)?;
        let out = self.apply_values(f.values());
        ScalarModeField::with_parity(self.grid, self.m, f.parity(), out)
    }

    fn direct_solve(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let nz = self.grid.nz();
        let mut spec = self.transform.forward(rhs);
        for (kappa, fac) in self.factors.iter().enumerate() {
            fac.solve_strided(&mut spec, kappa, nz);
        }
        self.transform.inverse(spec)
    }

    fn norm(&self, v: &Array2<f64>) -> f64 {
        inner_product(&self.grid, v, v).sqrt()
    }

    /// Solves `L_m P = rhs` and refines until the relative residual is below
    /// [`SOLVE_TOLERANCE`].
    pub(crate) fn solve_values(&self, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        let rhs_norm = self.norm(rhs);
        if rhs_norm == 0.0 {
            return Ok(self.grid.zeros());
        }
        let mut x = self.direct_solve(rhs);
        let mut residual = f64::INFINITY;
        for it in 0..=REFINEMENT_STEPS {
            let r = rhs - &self.apply_values(&x);
            residual = self.norm(&r) / rhs_norm;
            if residual <= SOLVE_TOLERANCE {
                return Ok(x);
            }
            if it < REFINEMENT_STEPS {
                x += &self.direct_solve(&r);
            }
        }
        Err(Error::SolverFailure {
            iterations: REFINEMENT_STEPS,
            residual,
        })
    }

    pub fn solve(&self, rhs: &ScalarModeField) -> Result<ScalarModeField> {
        self.check(rhs)?;
        let x = self.solve_values(rhs.values())?;
        ScalarModeField::with_parity(self.grid, self.m, rhs.parity(), x)
    }
}

/// `L_m` on raw values.
pub(crate) fn lm_apply_values(grid: &Grid, m: u32, values: &Array2<f64>) -> Array2<f64> {
    let mut out = laplacian_rz_values(grid, values);
    let m2 = (m as f64).powi(2);
    let radii = grid.radii();
    for ((j, i), v) in out.indexed_iter_mut() {
        let r = radii[i];
        *v = m2 / (r * r) * values[[j, i]] - *v;
    }
    out
}

pub fn apply_lm(op: &LmOperator, f: &ScalarModeField) -> Result<ScalarModeField> {
    op.apply(f)
}

pub fn solve_lm(op: &LmOperator, rhs: &ScalarModeField) -> Result<ScalarModeField> {
    op.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, m: u32, seed: u64) -> ScalarModeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = Array2::from_shape_fn((grid.nz(), grid.nr()), |_| rng.random_range(-1.0..1.0));
        ScalarModeField::new(grid, m, vals).unwrap()
    }

    fn interior_random(grid: Grid, m: u32, seed: u64) -> ScalarModeField {
        let mut f = random_field(grid, m, seed);
        let nr = grid.nr();
        for ((_, i), v) in f.values_mut().indexed_iter_mut() {
            if i < 2 || i + 2 >= nr {
                *v = 0.0;
            }
        }
        f
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::new(16, 8, 2.0, 1.0).unwrap();
        let op = LmOperator::new(g, 3).unwrap();
        let z = ScalarModeField::zeros(g, 3);
        assert!(op.apply(&z).unwrap().is_zero());
        assert!(op.solve(&z).unwrap().is_zero());
    }

    #[test]
    fn roundtrip_random() {
        let g = Grid::new(48, 32, 3.0, 2.0).unwrap();
        for m in [0u32, 1, 2, 8, 33] {
            let op = LmOperator::new(g, m).unwrap();
            let f = random_field(g, m, 7 + m as u64);
            let back = op.solve(&op.apply(&f).unwrap()).unwrap();
            let diff = f.values() - back.values();
            let err = inner_product(&g, &diff, &diff).sqrt()
                / inner_product(&g, f.values(), f.values()).sqrt();
            assert!(err < 1e-9, "m={m}: {err}");
        }
    }

    #[test]
    fn positive_and_bounded_below() {
        let g = Grid::new(32, 16, 2.0, 2.0).unwrap();
        for m in [0u32, 1, 5] {
            let op = LmOperator::new(g, m).unwrap();
            for seed in 0..5 {
                let f = interior_random(g, m, seed);
                let lf = op.apply(&f).unwrap();
                let q = inner_product(&g, lf.values(), f.values());
                let fr = Array2::from_shape_fn(f.values().dim(), |(j, i)| f.values()[[j, i]] / g.r(i));
                let lower = (m as f64).powi(2) * inner_product(&g, &fr, &fr);
                assert!(q > 0.0);
                assert!(q >= lower * (1.0 - 1e-12), "m={m}");
            }
        }
    }

    #[test]
    fn l0_matches_analytic() {
        // φ(r) = exp(-(r-1.5)²/0.1)·sin(2πz/lz); L_0 φ computed symbolically
        let lz = 2.0;
        let k = 2.0 * std::f64::consts::PI / lz;
        let phi = |r: f64| (-(r - 1.5f64).powi(2) / 0.1).exp();
        let exact = move |r: f64, z: f64| {
            let a = -(r - 1.5) / 0.05;
            let d1 = a * phi(r);
            let d2 = (a * a - 1.0 / 0.05) * phi(r);
            -(d2 + d1 / r - k * k * phi(r)) * (k * z).sin()
        };
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let g = Grid::new(n, n, 3.0, lz).unwrap();
            let op = LmOperator::new(g, 0).unwrap();
            let f = ScalarModeField::from_fn(g, 0, |r, z| phi(r) * (k * z).sin()).unwrap();
            let lf = op.apply(&f).unwrap();
            let e = g.sample(exact);
            errs.push((lf.values() - &e).iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
    }

    #[test]
    fn mismatches_rejected() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let h = Grid::new(8, 4, 1.0, 1.0).unwrap();
        let op = LmOperator::new(g, 2).unwrap();
        assert!(op.apply(&ScalarModeField::zeros(h, 2)).is_err());
        assert!(op.apply(&ScalarModeField::zeros(g, 3)).is_err());
    }
}
