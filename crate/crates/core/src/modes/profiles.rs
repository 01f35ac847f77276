//! Initial-data profiles for one frequency block and the builders that turn
//! them into a [`VelocityModeSet`].

use ndarray::Array2;

use super::state::{divergence_values, Component, Family, VelocityModeSet};
use crate::error::{Error, Result};
use crate::grid::{
    d_dr_values, d_dz_values, fd_gradient, inner_product, m_norm, weighted_power_sum, Grid,
    ScalarModeField, WeightedNormSpec,
};

/// Default relative constraint residual accepted by the builders.
pub const CONSTRAINT_TOLERANCE: f64 = 5e-2;

/// Profiles `(a^r, a^θ, a^z)` of `cos Nθ` and `(b^r, b^θ, b^z)` of
/// `sin Nθ`, with the θ-profiles not yet divided by `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePair {
    pub grid: Grid,
    pub a: [Array2<f64>; 3],
    pub b: [Array2<f64>; 3],
}

impl ProfilePair {
    pub fn zeros(grid: Grid) -> Self {
        ProfilePair {
            grid,
            a: [grid.zeros(), grid.zeros(), grid.zeros()],
            b: [grid.zeros(), grid.zeros(), grid.zeros()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|x| x.iter().all(|v| *v == 0.0))
    }

    /// `b^r = a^θ = b^z = 0`: the data is even in θ for r, z and odd for θ.
    pub fn is_restricted(&self) -> bool {
        [&self.b[0], &self.a[1], &self.b[2]]
            .iter()
            .all(|x| x.iter().all(|v| *v == 0.0))
    }

    /// Discrete residuals of
    /// `∂_r a^r + a^r/r + ∂_z a^z + b^θ/r` and `∂_r b^r + b^r/r + ∂_z b^z − a^θ/r`
    /// with the stencils of wavenumber `n`.
    pub fn constraint_residuals(&self, n: u32) -> [Array2<f64>; 2] {
        let g = &self.grid;
        [
            divergence_values(g, &self.a[0], &self.a[2], n, Some((1.0, &self.b[1]))),
            divergence_values(g, &self.b[0], &self.b[2], n, Some((-1.0, &self.a[1]))),
        ]
    }

    /// Weighted L² norm of both residuals relative to the sum of the norms of
    /// the individual terms; 0 for zero profiles.
    pub fn relative_constraint_residual(&self, n: u32) -> f64 {
        let g = &self.grid;
        let l2 = |x: &Array2<f64>| inner_product(g, x, x).sqrt();
        let over_r = |x: &Array2<f64>| {
            let radii = g.radii();
            Array2::from_shape_fn(x.dim(), |(j, i)| x[[j, i]] / radii[i])
        };
        let [ra, rb] = self.constraint_residuals(n);
        let residual = (l2(&ra).powi(2) + l2(&rb).powi(2)).sqrt();
        let par = Component::R.parity(n);
        let mut scale = 0.0;
        for (p, swirl) in [(&self.a, &self.b[1]), (&self.b, &self.a[1])] {
            scale += l2(&d_dr_values(g, &p[0], par))
                + l2(&over_r(&p[0]))
                + l2(&d_dz_values(g, &p[2]))
                + l2(&over_r(swirl));
        }
        if scale == 0.0 {
            0.0
        } else {
            residual / scale
        }
    }

    /// The admissibility norm of each of the six profiles at wavenumber `n`,
    /// in the order `a^r, a^θ, a^z, b^r, b^θ, b^z`.
    pub fn m_norms(&self, n: u32) -> Result<[f64; 6]> {
        let mut out = [0.0; 6];
        for (slot, (x, comp)) in out.iter_mut().zip(
            self.a
                .iter()
                .zip(Component::ALL)
                .chain(self.b.iter().zip(Component::ALL)),
        ) {
            let f = ScalarModeField::with_parity(self.grid, n, comp.parity(n), x.clone())?;
            let (dr, dz) = fd_gradient(&f);
            *slot = m_norm(&f, &dr, &dz)?;
        }
        Ok(out)
    }

    /// `‖(a^r, a^θ, a^z, b^r, b^θ, b^z)‖_{L³}` of the pointwise Euclidean
    /// magnitude.
    pub fn l3_norm(&self) -> f64 {
        let mut mag = self.grid.zeros();
        for x in self.a.iter().chain(&self.b) {
            mag.zip_mut_with(x, |m, v| *m += v * v);
        }
        mag.mapv_inplace(f64::sqrt);
        let spec = WeightedNormSpec::new(3.0, 0.0).expect("valid exponent");
        weighted_power_sum(&self.grid, &mag, &spec).cbrt()
    }
}

/// Solves the two profile constraints for the θ-profiles using the discrete
/// stencils of wavenumber `n`, so the completed pair satisfies them to
/// round-off.
pub fn complete_swirl_from_constraint(
    grid: Grid,
    a_r: Array2<f64>,
    a_z: Array2<f64>,
    b_r: Array2<f64>,
    b_z: Array2<f64>,
    n: u32,
) -> Result<ProfilePair> {
    for x in [&a_r, &a_z, &b_r, &b_z] {
        grid.check_shape(x)?;
    }
    let radii = grid.radii();
    let times_r = |x: Array2<f64>, sign: f64| {
        Array2::from_shape_fn(x.dim(), |(j, i)| sign * radii[i] * x[[j, i]])
    };
    let b_theta = times_r(divergence_values(&grid, &a_r, &a_z, n, None), -1.0);
    let a_theta = times_r(divergence_values(&grid, &b_r, &b_z, n, None), 1.0);
    Ok(ProfilePair {
        grid,
        a: [a_r, a_theta, a_z],
        b: [b_r, b_theta, b_z],
    })
}

/// Smooth compactly supported ring centred at `(r0, lz/2)`:
/// `a^r = A (r/σ) E`, `a^z = A E` with
/// `E = exp(−d²/σ²) (1 − d²/9σ²)⁴` on `d < 3σ` and zero outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianRing {
    pub amplitude: f64,
    pub r0: f64,
    pub sigma: f64,
}

/// How the θ-profile of a [`GaussianRing`] is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwirlCompletion {
    /// From the exact derivatives; the discrete constraint then holds to
    /// second order in the grid spacing.
    Analytic,
    /// From the discrete stencils; the constraint holds to round-off.
    Discrete,
}

impl GaussianRing {
    pub fn new(amplitude: f64, r0: f64, sigma: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !amplitude.is_finite() {
            bad.push(format!("amplitude {amplitude} is not finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            bad.push(format!("sigma {sigma} must be positive"));
        }
        if !(r0 > 3.0 * sigma) {
            bad.push(format!("r0 = {r0} must exceed 3 sigma = {} to keep the axis clear", 3.0 * sigma));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidInput(bad.join("; ")));
        }
        Ok(GaussianRing { amplitude, r0, sigma })
    }

    fn check_fits(&self, grid: &Grid) -> Result<()> {
        let reach = 3.0 * self.sigma;
        if self.r0 + reach > grid.rmax() || 2.0 * reach > grid.lz() {
            return Err(Error::InvalidInput(format!(
                "ring support (r0 = {}, 3 sigma = {reach}) does not fit in rmax = {}, lz = {}",
                self.r0,
                grid.rmax(),
                grid.lz()
            )));
        }
        Ok(())
    }

    /// `(E, ∂_r E, ∂_z E)` at `(r, z)`.
    fn envelope(&self, grid: &Grid, r: f64, z: f64) -> (f64, f64, f64) {
        let s2 = self.sigma * self.sigma;
        let (dr, dz) = (r - self.r0, z - 0.5 * grid.lz());
        let d2 = dr * dr + dz * dz;
        let rho2 = d2 / (9.0 * s2);
        if rho2 >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let g = (-d2 / s2).exp();
        let w = 1.0 - rho2;
        let e = g * w.powi(4);
        let deriv = |x: f64| e * (-2.0 * x / s2) - g * 8.0 * w.powi(3) * x / (9.0 * s2);
        (e, deriv(dr), deriv(dz))
    }

    /// Restricted-class profiles (`b^r = a^θ = b^z = 0`).
    pub fn profiles(&self, grid: Grid, n: u32, completion: SwirlCompletion) -> Result<ProfilePair> {
        self.check_fits(&grid)?;
        let (amp, sig) = (self.amplitude, self.sigma);
        let a_r = grid.sample(|r, z| amp * (r / sig) * self.envelope(&grid, r, z).0);
        let a_z = grid.sample(|r, z| amp * self.envelope(&grid, r, z).0);
        match completion {
            SwirlCompletion::Discrete => {
                complete_swirl_from_constraint(grid, a_r, a_z, grid.zeros(), grid.zeros(), n)
            }
            SwirlCompletion::Analytic => {
                // −r(∂_r a^r + a^r/r + ∂_z a^z) with a^r = A r E/σ, a^z = A E
                let b_theta = grid.sample(|r, z| {
                    let (e, er, ez) = self.envelope(&grid, r, z);
                    -r * amp * (2.0 * e / sig + r * er / sig + ez)
                });
                Ok(ProfilePair {
                    grid,
                    a: [a_r, grid.zeros(), a_z],
                    b: [grid.zeros(), b_theta, grid.zeros()],
                })
            }
        }
    }
}

fn check_constraint(profiles: &ProfilePair, n: u32, tolerance: f64) -> Result<()> {
    let residual = profiles.relative_constraint_residual(n);
    if !(residual <= tolerance) {
        return Err(Error::Constraint { residual, tolerance });
    }
    Ok(())
}

fn place_block(state: &mut VelocityModeSet, k: usize, n_k: u32, p: &ProfilePair) {
    let inv = 1.0 / n_k as f64;
    let c = state.coefficients_mut();
    for comp in Component::ALL {
        let s = if comp == Component::Theta { inv } else { 1.0 };
        *c.get_mut(k, Family::Cos, comp) = &p.a[comp.index()] * s;
        *c.get_mut(k, Family::Sin, comp) = &p.b[comp.index()] * s;
    }
}

/// Places one block at frequency `N` in mode 1 of a container with base `N`
/// and truncation `K`; the θ-profiles are divided by `N`. Profiles whose
/// relative constraint residual exceeds `tolerance` are rejected.
pub fn build_single_mode_data(
    profiles: &ProfilePair,
    n: u32,
    k_max: usize,
    tolerance: f64,
) -> Result<VelocityModeSet> {
    let mut state = VelocityModeSet::zeros(profiles.grid, n, k_max)?;
    check_constraint(profiles, n, tolerance)?;
    place_block(&mut state, 1, n, profiles);
    state.set_restricted(profiles.is_restricted());
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct CompositeData {
    pub state: VelocityModeSet,
    /// `Σ_k ‖Υ_k‖_{L³}^{3/2}` over the blocks.
    pub upsilon_sum: f64,
}

/// Superposes blocks `(profiles, N_k)` on an axisymmetric no-swirl part
/// `(ū^r, ū^z)`. Every `N_k` must be a distinct multiple of `n_base` no
/// larger than `K·n_base`.
pub fn build_composite_data(
    grid: Grid,
    blocks: &[(ProfilePair, u32)],
    axisym: Option<(&Array2<f64>, &Array2<f64>)>,
    n_base: u32,
    k_max: usize,
    tolerance: f64,
) -> Result<CompositeData> {
    let mut state = VelocityModeSet::zeros(grid, n_base, k_max)?;
    let mut used = vec![false; k_max + 1];
    let mut restricted = true;
    let mut upsilon_sum = 0.0;
    for (profiles, n_k) in blocks {
        if profiles.grid != grid {
            return Err(Error::GridMismatch(format!("block N = {n_k} lives on a different grid")));
        }
        if *n_k == 0 || n_k % n_base != 0 {
            return Err(Error::InvalidInput(format!(
                "block frequency {n_k} is not a positive multiple of the base {n_base}"
            )));
        }
        let k = (n_k / n_base) as usize;
        if k > k_max {
            return Err(Error::InvalidInput(format!(
                "block frequency {n_k} lands in mode {k} beyond truncation {k_max}"
            )));
        }
        if used[k] {
            return Err(Error::InvalidInput(format!("two blocks share frequency {n_k}")));
        }
        used[k] = true;
        check_constraint(profiles, *n_k, tolerance)?;
        place_block(&mut state, k, *n_k, profiles);
        restricted &= profiles.is_restricted();
        upsilon_sum += profiles.l3_norm().powf(1.5);
    }
    if let Some((ur, uz)) = axisym {
        grid.check_shape(ur)?;
        grid.check_shape(uz)?;
        let l2 = |x: &Array2<f64>| inner_product(&grid, x, x).sqrt();
        let radii = grid.radii();
        let over_r = Array2::from_shape_fn(ur.dim(), |(j, i)| ur[[j, i]] / radii[i]);
        let div = divergence_values(&grid, ur, uz, 0, None);
        let scale = l2(&d_dr_values(&grid, ur, Component::R.parity(0)))
            + l2(&over_r)
            + l2(&d_dz_values(&grid, uz));
        let residual = if scale == 0.0 { 0.0 } else { l2(&div) / scale };
        if !(residual <= tolerance) {
            return Err(Error::Constraint { residual, tolerance });
        }
        let c = state.coefficients_mut();
        c.cos[0][0] = ur.clone();
        c.cos[0][2] = uz.clone();
    }
    state.set_restricted(restricted);
    Ok(CompositeData { state, upsilon_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::state::mode_divergence;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 4.0, 4.0).unwrap()
    }

    fn ring() -> GaussianRing {
        GaussianRing::new(1.0, 2.0, 0.4).unwrap()
    }

    #[test]
    fn zero_profiles_give_zero_state() {
        let s = build_single_mode_data(&ProfilePair::zeros(grid(16)), 8, 3, 1e-12).unwrap();
        assert!(s.is_zero());
        assert!(s.is_restricted());
        let g = grid(16);
        let p = complete_swirl_from_constraint(g, g.zeros(), g.zeros(), g.zeros(), g.zeros(), 8).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn swirl_completion_matches_symbolic_derivative() {
        // a^r = z φ, φ = exp(−((r−2)²+(z−2)²)/0.25)
        let phi = |r: f64, z: f64| (-((r - 2.0).powi(2) + (z - 2.0).powi(2)) / 0.25).exp();
        let exact = |r: f64, z: f64| {
            let dphi_dr = -2.0 * (r - 2.0) / 0.25 * phi(r, z);
            -r * (z * dphi_dr + z * phi(r, z) / r)
        };
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = grid(n);
            let a_r = g.sample(|r, z| z * phi(r, z));
            let p = complete_swirl_from_constraint(g, a_r, g.zeros(), g.zeros(), g.zeros(), 8).unwrap();
            let e = g.sample(exact);
            errs.push((&p.b[1] - &e).iter().fold(0.0f64, |m, v| m.max(v.abs())));
            assert!(p.relative_constraint_residual(8) < 1e-14);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }

    #[test]
    fn analytic_ring_converges_at_second_order() {
        let mut res = Vec::new();
        for n in [64, 128, 256] {
            let wide = GaussianRing::new(1.0, 2.0, 0.65).unwrap();
            let p = wide.profiles(grid(n), 8, SwirlCompletion::Analytic).unwrap();
            let s = build_single_mode_data(&p, 8, 2, CONSTRAINT_TOLERANCE).unwrap();
            let d = mode_divergence(&s);
            let [ra, rb] = p.constraint_residuals(8);
            assert!(d.cos[0] == ra && d.sin[0] == rb);
            res.push(p.relative_constraint_residual(8));
        }
        assert!(res[1] <= 1e-3, "{res:?}");
        assert!(res[0] / res[1] > 3.5 && res[1] / res[2] > 3.5, "{res:?}");
    }

    #[test]
    fn ring_profiles_are_admissible_and_restricted() {
        let p = ring().profiles(grid(64), 8, SwirlCompletion::Discrete).unwrap();
        assert!(p.is_restricted());
        assert!(p.m_norms(8).unwrap().iter().all(|v| v.is_finite()));
        let s = build_single_mode_data(&p, 8, 3, 1e-12).unwrap();
        assert!(s.is_restricted() && s.satisfies_restricted_symmetry());
        let d = mode_divergence(&s);
        assert!(d.iter().all(|a| a.iter().all(|v| v.abs() < 1e-12)));
        assert!(s.coefficients().cos[2].iter().all(|a| a.iter().all(|v| *v == 0.0)));
        // θ-profile divided by N
        assert_eq!(s.coefficients().sin[1][1], &p.b[1] / 8.0);
    }

    #[test]
    fn builder_rejects_violated_constraint() {
        let g = grid(32);
        let mut p = ProfilePair::zeros(g);
        p.a[0] = g.sample(|r, z| (-((r - 2.0).powi(2) + (z - 2.0).powi(2))).exp());
        match build_single_mode_data(&p, 4, 2, CONSTRAINT_TOLERANCE) {
            Err(Error::Constraint { residual, .. }) => assert!(residual > 0.1),
            other => panic!("{other:?}"),
        }
        assert!(GaussianRing::new(1.0, 1.0, 0.5).is_err());
        assert!(GaussianRing::new(1.0, 3.5, 0.4).unwrap().profiles(g, 4, SwirlCompletion::Discrete).is_err());
    }

    #[test]
    fn composite_blocks_land_in_their_modes() {
        let g = grid(32);
        let p8 = ring().profiles(g, 8, SwirlCompletion::Discrete).unwrap();
        let p16 = ring().profiles(g, 16, SwirlCompletion::Discrete).unwrap();
        let c = build_composite_data(g, &[(p8.clone(), 8), (p16.clone(), 16)], None, 8, 3, 1e-12).unwrap();
        let co = c.state.coefficients();
        assert_eq!(co.cos[1][0], p8.a[0]);
        assert_eq!(co.cos[2][0], p16.a[0]);
        assert_eq!(co.sin[2][1], &p16.b[1] / 16.0);
        assert!(co.cos[3][0].iter().all(|v| *v == 0.0));
        let expect = p8.l3_norm().powf(1.5) + p16.l3_norm().powf(1.5);
        assert!((c.upsilon_sum - expect).abs() < 1e-14 * expect);

        let single = build_composite_data(g, &[(p8.clone(), 8)], None, 8, 3, 1e-12).unwrap();
        assert_eq!(single.state, build_single_mode_data(&p8, 8, 3, 1e-12).unwrap());

        let empty = build_composite_data(g, &[], None, 8, 3, 1e-12).unwrap();
        assert!(empty.state.is_zero() && empty.upsilon_sum == 0.0);

        assert!(build_composite_data(g, &[(p8.clone(), 12)], None, 8, 3, 1e-12).is_err());
        assert!(build_composite_data(g, &[(p8.clone(), 8), (p8, 8)], None, 8, 3, 1e-12).is_err());
        let bad = g.sample(|r, z| (-((r - 2.0).powi(2) + (z - 2.0).powi(2))).exp());
        let zero = g.zeros();
        assert!(build_composite_data(g, &[], Some((&bad, &zero)), 8, 3, 1e-2).is_err());
    }
}
