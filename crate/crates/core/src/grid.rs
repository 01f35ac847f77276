//! Discrete (r, z) geometry, weighted integration and finite-difference
//! stencils shared by every other module.
//!
//! Radial nodes sit at cell centres `r_i = (i + 1/2) hr`, so no node lies on
//! the axis. The z direction is periodic. Arrays are stored with shape
//! `(nz, nr)` in standard layout, i.e. the radial index runs fastest.
//!
//! Ghost values used by the stencils:
//! * axis: `f(-r_0) = ±f(r_0)` according to the field's [`Parity`];
//! * outer: `f(r_nr) = -f(r_{nr-1})`, a homogeneous Dirichlet condition at `rmax`.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nr: usize,
    nz: usize,
    rmax: f64,
    lz: f64,
}

impl Grid {
    pub fn new(nr: usize, nz: usize, rmax: f64, lz: f64) -> Result<Self> {
        if nr == 0 || nz == 0 {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be positive (nr = {nr}, nz = {nz})"
            )));
        }
        if !(rmax.is_finite() && rmax > 0.0 && lz.is_finite() && lz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid extents must be positive and finite (rmax = {rmax}, lz = {lz})"
            )));
        }
        Ok(Grid { nr, nz, rmax, lz })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    pub fn lz(&self) -> f64 {
        self.lz
    }

    pub fn hr(&self) -> f64 {
        self.rmax / self.nr as f64
    }

    pub fn hz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radial node `r_i = (i + 1/2) hr`.
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hr()
    }

    /// Radial position of the face between nodes `i - 1` and `i`, i.e. `i hr`.
    pub fn r_face(&self, i: usize) -> f64 {
        i as f64 * self.hr()
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.hz()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.nr).map(|i| self.r(i)).collect()
    }

    /// Volume element `2π r_i hr hz` of the cell around node `(i, j)`.
    pub fn cell_volume(&self, i: usize) -> f64 {
        2.0 * PI * self.r(i) * self.hr() * self.hz()
    }

    pub fn min_spacing(&self) -> f64 {
        self.hr().min(self.hz())
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.nz, self.nr))
    }

    /// Samples `f(r, z)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.nz, self.nr), |(j, i)| f(self.r(i), self.z(j)))
    }

    /// Grid for the contracted coordinates `x / λ` with the same node counts.
    pub fn contracted(&self, lambda: f64) -> Result<Self> {
        Grid::new(self.nr, self.nz, self.rmax / lambda, self.lz / lambda)
    }

    pub(crate) fn check_shape(&self, values: &Array2<f64>) -> Result<()> {
        if values.dim() != (self.nz, self.nr) {
            return Err(Error::GridMismatch(format!(
                "array shape {:?} does not match grid (nz, nr) = ({}, {})",
                values.dim(),
                self.nz,
                self.nr
            )));
        }
        Ok(())
    }
}

/// Behaviour of a coefficient function under `r -> -r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// `(-1)^m`, the axis parity of a scalar carrying azimuthal wavenumber `m`.
    pub fn of_wavenumber(m: u32) -> Self {
        if m.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// One real coefficient function on the grid: a single azimuthal mode of a
/// single component in a single cos/sin family.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarModeField {
    grid: Grid,
    m: u32,
    parity: Parity,
    values: Array2<f64>,
}

impl ScalarModeField {
    /// A scalar of wavenumber `m`; the axis parity is `(-1)^m`.
    pub fn new(grid: Grid, m: u32, values: Array2<f64>) -> Result<Self> {
        Self::with_parity(grid, m, Parity::of_wavenumber(m), values)
    }

    pub fn with_parity(grid: Grid, m: u32, parity: Parity, values: Array2<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "field contains a non-finite entry ({bad})"
            )));
        }
        Ok(ScalarModeField {
            grid,
            m,
            parity,
            values,
        })
    }

    /// Skips the finiteness scan; callers guarantee shape and finite entries.
    pub(crate) fn from_parts(grid: Grid, m: u32, parity: Parity, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.nz(), grid.nr()));
        ScalarModeField {
            grid,
            m,
            parity,
            values,
        }
    }

    pub fn zeros(grid: Grid, m: u32) -> Self {
        Self::from_parts(grid, m, Parity::of_wavenumber(m), grid.zeros())
    }

    pub fn zeros_with_parity(grid: Grid, m: u32, parity: Parity) -> Self {
        Self::from_parts(grid, m, parity, grid.zeros())
    }

    pub fn from_fn(grid: Grid, m: u32, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(grid, m, grid.sample(f))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_parts(self.grid, self.m, self.parity, &self.values * c)
    }

    pub(crate) fn same_grid(&self, other: &ScalarModeField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// `‖r^γ f‖_{L^p}` with the three-dimensional measure `2π r dr dz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNormSpec {
    p: f64,
    gamma: f64,
}

impl WeightedNormSpec {
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidInput(format!("norm exponent p = {p} must be >= 1")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("weight exponent {gamma} is not finite")));
        }
        Ok(WeightedNormSpec { p, gamma })
    }

    pub fn l2() -> Self {
        WeightedNormSpec { p: 2.0, gamma: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `2π Σ |f_ij|^p r_i^{γp+1} hr hz`, the p-th power of the weighted norm.
pub fn weighted_power_sum(grid: &Grid, values: &Array2<f64>, spec: &WeightedNormSpec) -> f64 {
    let p = spec.p;
    let exponent = spec.gamma * p + 1.0;
    let weights: Vec<f64> = grid.radii().iter().map(|r| r.powf(exponent)).collect();
    let mut total = 0.0;
    for row in values.rows() {
        for (v, w) in row.iter().zip(&weights) {
            if *v != 0.0 {
                total += v.abs().powf(p) * w;
            }
        }
    }
    2.0 * PI * total * grid.hr() * grid.hz()
}

pub fn weighted_lp_norm(f: &ScalarModeField, spec: &WeightedNormSpec) -> Result<f64> {
    if let Some(bad) = f.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "field contains a non-finite entry ({bad})"
        )));
    }
    Ok(weighted_power_sum(&f.grid, &f.values, spec).powf(1.0 / spec.p))
}

/// Weighted inner product `2π Σ f g r hr hz`.
pub fn inner_product(grid: &Grid, f: &Array2<f64>, g: &Array2<f64>) -> f64 {
    let radii = grid.radii();
    let mut total = 0.0;
    for (fr, gr) in f.rows().into_iter().zip(g.rows()) {
        for ((a, b), r) in fr.iter().zip(gr.iter()).zip(&radii) {
            total += a * b * r;
        }
    }
    2.0 * PI * total * grid.hr() * grid.hz()
}

/// The four-term admissibility norm
/// `‖r^{1/2} f‖_{L^6} + ‖f‖_{L^2} + ‖(∂_r f, ∂_z f)‖_{L^2} + ‖r^{-1} f‖_{L^2}`.
pub fn m_norm(
    f: &ScalarModeField,
    df_dr: &ScalarModeField,
    df_dz: &ScalarModeField,
) -> Result<f64> {
    f.same_grid(df_dr)?;
    f.same_grid(df_dz)?;
    if f.m != df_dr.m || f.m != df_dz.m {
        return Err(Error::GridMismatch(format!(
            "wavenumbers differ: {} / {} / {}",
            f.m, df_dr.m, df_dz.m
        )));
    }
    let l6 = weighted_lp_norm(f, &WeightedNormSpec::new(6.0, 0.5)?)?;
    let l2 = weighted_lp_norm(f, &WeightedNormSpec::l2())?;
    let grad = (weighted_lp_norm(df_dr, &WeightedNormSpec::l2())?.powi(2)
        + weighted_lp_norm(df_dz, &WeightedNormSpec::l2())?.powi(2))
    .sqrt();
    let inv_r = weighted_lp_norm(f, &WeightedNormSpec::new(2.0, -1.0)?)?;
    Ok(l6 + l2 + grad + inv_r)
}

#[inline]
fn radial_neighbours(row: &[f64], i: usize, parity: Parity) -> (f64, f64) {
    let n = row.len();
    let left = if i == 0 { parity.sign() * row[0] } else { row[i - 1] };
    let right = if i + 1 == n { -row[n - 1] } else { row[i + 1] };
    (left, right)
}

/// Centred radial derivative of one z-row, honouring the ghost rules.
pub(crate) fn d_dr_row(row: &[f64], out: &mut [f64], hr: f64, parity: Parity) {
    let inv = 0.5 / hr;
    for (i, o) in out.iter_mut().enumerate() {
        let (l, r) = radial_neighbours(row, i, parity);
        *o = (r - l) * inv;
    }
}

pub(crate) fn d_dr_values(grid: &Grid, values: &Array2<f64>, parity: Parity) -> Array2<f64> {
    let mut out = grid.zeros();
    let hr = grid.hr();
    for (src, mut dst) in values.rows().into_iter().zip(out.rows_mut()) {
        d_dr_row(
            src.as_slice().expect("standard layout"),
            dst.as_slice_mut().expect("standard layout"),
            hr,
            parity,
        );
    }
    out
}

pub(crate) fn d_dz_values(grid: &Grid, values: &Array2<f64>) -> Array2<f64> {
    let (nz, nr) = values.dim();
    let inv = 0.5 / grid.hz();
    let mut out = grid.zeros();
    for j in 0..nz {
        let up = (j + 1) % nz;
        let down = (j + nz - 1) % nz;
        for i in 0..nr {
            out[[j, i]] = (values[[up, i]] - values[[down, i]]) * inv;
        }
    }
    out
}

/// Second-order centred `(∂_r f, ∂_z f)`. The radial derivative carries the
/// opposite axis parity.
pub fn fd_gradient(f: &ScalarModeField) -> (ScalarModeField, ScalarModeField) {
    let dr = d_dr_values(&f.grid, &f.values, f.parity);
    let dz = d_dz_values(&f.grid, &f.values);
    (
        ScalarModeField::from_parts(f.grid, f.m, f.parity.flip(), dr),
        ScalarModeField::from_parts(f.grid, f.m, f.parity, dz),
    )
}

/// `(∂_r² + ∂_r / r + ∂_z²) f` on raw values.
///
/// The radial part is written in flux form
/// `(r_{i+1/2}(f_{i+1} - f_i) - r_{i-1/2}(f_i - f_{i-1})) / (r_i hr²)`,
/// which is algebraically the centred stencil. The axis face has `r = 0`,
/// so the axis ghost drops out.
pub(crate) fn laplacian_rz_values(grid: &Grid, values: &Array2<f64>) -> Array2<f64> {
    let (nz, nr) = values.dim();
    let hr2 = grid.hr() * grid.hr();
    let hz2 = grid.hz() * grid.hz();
    let radii = grid.radii();
    let mut out = grid.zeros();
    for j in 0..nz {
        let up = (j + 1) % nz;
        let down = (j + nz - 1) % nz;
        for i in 0..nr {
            let f = values[[j, i]];
            let right = if i + 1 == nr { -f } else { values[[j, i + 1]] };
            let flux_out = grid.r_face(i + 1) * (right - f);
            let flux_in = if i == 0 {
                0.0
            } else {
                grid.r_face(i) * (f - values[[j, i - 1]])
            };
            let radial = (flux_out - flux_in) / (radii[i] * hr2);
            let axial = (values[[up, i]] - 2.0 * f + values[[down, i]]) / hz2;
            out[[j, i]] = radial + axial;
        }
    }
    out
}

pub fn fd_laplacian_rz(f: &ScalarModeField) -> ScalarModeField {
    let out = laplacian_rz_values(&f.grid, &f.values);
    ScalarModeField::from_parts(f.grid, f.m, f.parity, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 4.0, 4.0).unwrap()
    }

    #[test]
    fn nodes_avoid_axis() {
        let g = grid(16, 8);
        assert!((g.r(0) - g.hr() / 2.0).abs() < 1e-15);
        assert!(g.r(g.nr() - 1) < g.rmax());
        assert!(g.z(g.nz() - 1) < g.lz());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(0, 4, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 4, -1.0, 1.0).is_err());
        assert!(Grid::new(4, 4, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = grid(8, 8);
        let f = ScalarModeField::zeros(g, 3);
        for (p, gamma) in [(2.0, 0.0), (6.0, 0.5), (2.0, -1.0), (1.0, 2.0)] {
            let spec = WeightedNormSpec::new(p, gamma).unwrap();
            assert_eq!(weighted_lp_norm(&f, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_cell_norm_is_sqrt_pi() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap();
        let f = ScalarModeField::from_fn(g, 0, |_, _| 1.0).unwrap();
        let n = weighted_lp_norm(&f, &WeightedNormSpec::l2()).unwrap();
        assert!((n - PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_rejects_non_finite_and_bad_exponent() {
        assert!(WeightedNormSpec::new(0.5, 0.0).is_err());
        let g = grid(4, 4);
        let mut v = g.zeros();
        v[[1, 1]] = f64::INFINITY;
        assert!(ScalarModeField::new(g, 0, v).is_err());
    }

    #[test]
    fn norm_is_homogeneous() {
        let g = grid(12, 10);
        let f = ScalarModeField::from_fn(g, 2, |r, z| (r * z).sin() + 0.3).unwrap();
        let spec = WeightedNormSpec::new(3.0, 0.25).unwrap();
        let a = weighted_lp_norm(&f, &spec).unwrap();
        let b = weighted_lp_norm(&f.scaled(-2.5), &spec).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn gaussian_norm_converges_to_closed_form() {
        // 2π ∫_0^∞ ∫_R r³ e^{-2r²-2z²} dr dz = 2π · (1/8) · sqrt(π/2)
        let exact = (2.0 * PI * 0.125 * (PI / 2.0).sqrt()).sqrt();
        let err = |n: usize| {
            let g = Grid::new(n, n, 6.0, 12.0).unwrap();
            let f = ScalarModeField::from_fn(g, 1, |r, z| {
                let zc = z - 6.0;
                r * (-r * r - zc * zc).exp()
            })
            .unwrap();
            (weighted_lp_norm(&f, &WeightedNormSpec::l2()).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-3, "error {e2}");
        assert!(e1 / e2 > 3.5, "order check {e1} / {e2}");
    }

    #[test]
    fn gradient_of_constant_vanishes_in_interior() {
        let g = grid(16, 8);
        let f = ScalarModeField::from_fn(g, 0, |_, _| 2.0).unwrap();
        let (dr, dz) = fd_gradient(&f);
        for j in 0..g.nz() {
            for i in 0..g.nr() - 1 {
                assert_eq!(dr.values()[[j, i]], 0.0);
            }
        }
        assert!(dz.is_zero());
        let lap = fd_laplacian_rz(&f);
        for j in 0..g.nz() {
            for i in 0..g.nr() - 1 {
                assert!(lap.values()[[j, i]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_is_exact_on_r_squared() {
        let g = grid(20, 4);
        let f = ScalarModeField::from_fn(g, 0, |r, _| r * r).unwrap();
        let lap = fd_laplacian_rz(&f);
        for j in 0..g.nz() {
            for i in 0..g.nr() - 1 {
                assert!((lap.values()[[j, i]] - 4.0).abs() < 1e-10, "i = {i}");
            }
        }
    }

    #[test]
    fn laplacian_of_axial_sine_is_second_order() {
        let err = |nz: usize| {
            let g = Grid::new(4, nz, 1.0, 3.0).unwrap();
            let k = 2.0 * PI / g.lz();
            let f = ScalarModeField::from_fn(g, 0, |_, z| (k * z).sin()).unwrap();
            let lap = fd_laplacian_rz(&f);
            let mut e: f64 = 0.0;
            for j in 0..nz {
                // radial part of a z-only field is zero except at the Dirichlet row
                let exact = -k * k * (k * g.z(j)).sin();
                e = e.max((lap.values()[[j, 0]] - exact).abs());
            }
            e
        };
        let (a, b) = (err(32), err(64));
        assert!(b < 2e-2);
        assert!((a / b - 4.0).abs() < 0.1);
    }

    #[test]
    fn laplacian_is_self_adjoint_for_interior_fields() {
        let g = grid(24, 16);
        let bump = |rc: f64, zc: f64| {
            move |r: f64, z: f64| {
                let d2 = (r - rc).powi(2) + (z - zc).powi(2);
                if d2 < 1.0 {
                    (1.0 - d2).powi(4)
                } else {
                    0.0
                }
            }
        };
        let f = ScalarModeField::from_fn(g, 0, bump(2.0, 2.0)).unwrap();
        let h = ScalarModeField::from_fn(g, 0, bump(1.7, 2.3)).unwrap();
        let lf = fd_laplacian_rz(&f);
        let lh = fd_laplacian_rz(&h);
        let a = inner_product(&g, lf.values(), h.values());
        let b = inner_product(&g, f.values(), lh.values());
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn laplacian_preserves_axis_parity() {
        // the stencil is built from the same ghost rules, so the parity tag carries over
        let g = grid(8, 4);
        for m in 0..4 {
            let f = ScalarModeField::from_fn(g, m, |r, z| r.powi(m as i32) * (1.0 + z)).unwrap();
            assert_eq!(fd_laplacian_rz(&f).parity(), Parity::of_wavenumber(m));
            assert_eq!(fd_gradient(&f).0.parity(), Parity::of_wavenumber(m).flip());
        }
    }

    #[test]
    fn m_norm_of_zero_and_mismatch() {
        let g = grid(8, 8);
        let z = ScalarModeField::zeros(g, 1);
        assert_eq!(m_norm(&z, &z, &z).unwrap(), 0.0);
        let other = ScalarModeField::zeros(grid(8, 4), 1);
        assert!(m_norm(&z, &other, &z).is_err());
    }

    #[test]
    fn m_norm_is_finite_for_axis_vanishing_profile() {
        let g = grid(64, 64);
        let f = ScalarModeField::from_fn(g, 1, |r, z| {
            r * (-(r - 2.0).powi(2) - (z - 2.0).powi(2)).exp()
        })
        .unwrap();
        let (dr, dz) = fd_gradient(&f);
        let v = m_norm(&f, &dr, &dz).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }
}
