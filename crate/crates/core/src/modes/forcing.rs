//! Quadratic forcing `−(u·∇)u` (with the cylindrical curvature terms)
//! projected onto the truncated azimuthal modes.
//!
//! In components,
//! `F^r = −(u·∇u^r − (u^θ)²/r)`, `F^θ = −(u·∇u^θ + u^r u^θ/r)`,
//! `F^z = −u·∇u^z`, with `u·∇ = u^r ∂_r + (u^θ/r) ∂_θ + u^z ∂_z`.

use std::f64::consts::PI;

use ndarray::Array2;

use super::state::{Component, ModeCoefficients, VelocityModeSet};
use crate::grid::{d_dr_values, d_dz_values, Grid};

/// Forcing coefficients laid out like the state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeForcing {
    pub grid: Grid,
    pub n_base: u32,
    pub coeffs: ModeCoefficients,
}

impl ModeForcing {
    pub fn zeros(grid: Grid, n_base: u32, k_max: usize) -> Self {
        ModeForcing {
            grid,
            n_base,
            coeffs: ModeCoefficients::zeros(&grid, k_max),
        }
    }

    pub fn max_abs_difference(&self, other: &ModeForcing) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|((_, _, _, a), (_, _, _, b))| {
                a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// A scalar trigonometric series in `φ = Nθ`; `None` marks an exactly
/// zero coefficient so that products of zeros are never formed.
#[derive(Clone, Debug)]
struct Series {
    cos: Vec<Option<Array2<f64>>>,
    sin: Vec<Option<Array2<f64>>>,
}

fn nonzero(a: &Array2<f64>) -> Option<Array2<f64>> {
    a.iter().any(|v| *v != 0.0).then(|| a.clone())
}

impl Series {
    fn empty(k_max: usize) -> Self {
        Series {
            cos: vec![None; k_max + 1],
            sin: vec![None; k_max + 1],
        }
    }

    fn of_component(c: &ModeCoefficients, comp: Component) -> Self {
        let i = comp.index();
        Series {
            cos: c.cos.iter().map(|b| nonzero(&b[i])).collect(),
            sin: c
                .sin
                .iter()
                .enumerate()
                .map(|(k, b)| if k == 0 { None } else { nonzero(&b[i]) })
                .collect(),
        }
    }

    fn k_max(&self) -> usize {
        self.cos.len() - 1
    }

    fn map(&self, f: impl Fn(usize, &Array2<f64>) -> Array2<f64>) -> Self {
        Series {
            cos: self.cos.iter().enumerate().map(|(k, a)| a.as_ref().map(|a| f(k, a))).collect(),
            sin: self.sin.iter().enumerate().map(|(k, a)| a.as_ref().map(|a| f(k, a))).collect(),
        }
    }

    fn d_r(&self, grid: &Grid, comp: Component, n_base: u32) -> Self {
        self.map(|k, a| d_dr_values(grid, a, comp.parity(k as u32 * n_base)))
    }

    fn d_z(&self, grid: &Grid) -> Self {
        self.map(|_, a| d_dz_values(grid, a))
    }

    /// `∂_θ`: cos ↦ −kN sin, sin ↦ kN cos.
    fn d_theta(&self, n_base: u32) -> Self {
        let w = |k: usize| (k as f64) * (n_base as f64);
        Series {
            cos: self.sin.iter().enumerate().map(|(k, a)| a.as_ref().map(|a| a * w(k))).collect(),
            sin: self
                .cos
                .iter()
                .enumerate()
                .map(|(k, a)| if k == 0 { None } else { a.as_ref().map(|a| a * (-w(k))) })
                .collect(),
        }
    }

    fn over_r(&self, grid: &Grid) -> Self {
        let radii = grid.radii();
        self.map(|_, a| Array2::from_shape_fn(a.dim(), |(j, i)| a[[j, i]] / radii[i]))
    }

    fn add_into(slot: &mut Option<Array2<f64>>, coef: f64, prod: &Array2<f64>) {
        match slot {
            Some(acc) => acc.scaled_add(coef, prod),
            None => *slot = Some(prod * coef),
        }
    }

    /// `self += sign · a·b`, truncated at `K`.
    fn accumulate_product(&mut self, sign: f64, a: &Series, b: &Series) {
        let kk = self.k_max();
        for k1 in 0..=kk {
            for k2 in 0..=kk {
                let sum = k1 + k2;
                let diff = k1.abs_diff(k2);
                // cos k1 · cos k2 = ½[cos(k1+k2) + cos(k1−k2)]
                if let (Some(x), Some(y)) = (&a.cos[k1], &b.cos[k2]) {
                    let p = x * y;
                    if sum <= kk {
                        Self::add_into(&mut self.cos[sum], 0.5 * sign, &p);
                    }
                    Self::add_into(&mut self.cos[diff], 0.5 * sign, &p);
                }
                // sin k1 · sin k2 = ½[cos(k1−k2) − cos(k1+k2)]
                if let (Some(x), Some(y)) = (&a.sin[k1], &b.sin[k2]) {
                    let p = x * y;
                    if sum <= kk {
                        Self::add_into(&mut self.cos[sum], -0.5 * sign, &p);
                    }
                    Self::add_into(&mut self.cos[diff], 0.5 * sign, &p);
                }
                // sin k1 · cos k2 = ½[sin(k1+k2) + sin(k1−k2)]
                if let (Some(x), Some(y)) = (&a.sin[k1], &b.cos[k2]) {
                    let p = x * y;
                    if sum <= kk {
                        Self::add_into(&mut self.sin[sum], 0.5 * sign, &p);
                    }
                    if k1 != k2 {
                        let s = if k1 > k2 { 1.0 } else { -1.0 };
                        Self::add_into(&mut self.sin[diff], 0.5 * sign * s, &p);
                    }
                }
                // cos k1 · sin k2 = ½[sin(k1+k2) − sin(k1−k2)]
                if let (Some(x), Some(y)) = (&a.cos[k1], &b.sin[k2]) {
                    let p = x * y;
                    if sum <= kk {
                        Self::add_into(&mut self.sin[sum], 0.5 * sign, &p);
                    }
                    if k1 != k2 {
                        let s = if k2 > k1 { 1.0 } else { -1.0 };
                        Self::add_into(&mut self.sin[diff], 0.5 * sign * s, &p);
                    }
                }
            }
        }
    }

    /// Values at `φ`.
    fn sample(&self, grid: &Grid, phi: f64) -> Array2<f64> {
        let mut out = grid.zeros();
        for k in 0..=self.k_max() {
            let (s, c) = (k as f64 * phi).sin_cos();
            if let Some(a) = &self.cos[k] {
                out.scaled_add(c, a);
            }
            if let Some(a) = &self.sin[k] {
                out.scaled_add(s, a);
            }
        }
        out
    }
}

/// The velocity series and every derivative the forcing needs.
struct Operands {
    u: [Series; 3],
    u_theta_over_r: Series,
    d_r: [Series; 3],
    d_theta: [Series; 3],
    d_z: [Series; 3],
}

impl Operands {
    fn new(state: &VelocityModeSet) -> Self {
        let g = state.grid();
        let n = state.n_base();
        let c = state.coefficients();
        let u = Component::ALL.map(|comp| Series::of_component(c, comp));
        let d_r = Component::ALL.map(|comp| u[comp.index()].d_r(g, comp, n));
        let d_theta = Component::ALL.map(|comp| u[comp.index()].d_theta(n));
        let d_z = Component::ALL.map(|comp| u[comp.index()].d_z(g));
        let u_theta_over_r = u[1].over_r(g);
        Operands {
            u,
            u_theta_over_r,
            d_r,
            d_theta,
            d_z,
        }
    }
}

fn into_coefficients(grid: &Grid, out: [Series; 3]) -> ModeCoefficients {
    let k_max = out[0].k_max();
    let mut c = ModeCoefficients::zeros(grid, k_max);
    for (comp, s) in out.into_iter().enumerate() {
        for (k, a) in s.cos.into_iter().enumerate() {
            if let Some(a) = a {
                c.cos[k][comp] = a;
            }
        }
        for (k, a) in s.sin.into_iter().enumerate() {
            if let (Some(a), true) = (a, k > 0) {
                c.sin[k][comp] = a;
            }
        }
    }
    c
}

/// Forcing assembled mode by mode from the product-to-sum identities.
/// Products whose output index exceeds `K` are discarded; products with an
/// exactly zero factor are skipped, so symmetry classes are preserved
/// exactly.
pub fn nonlinear_forcing_convolution(state: &VelocityModeSet) -> ModeForcing {
    let grid = *state.grid();
    let k_max = state.k_max();
    let ops = Operands::new(state);
    let mut out = [Series::empty(k_max), Series::empty(k_max), Series::empty(k_max)];
    for (x, target) in out.iter_mut().enumerate() {
        target.accumulate_product(-1.0, &ops.u[0], &ops.d_r[x]);
        target.accumulate_product(-1.0, &ops.u_theta_over_r, &ops.d_theta[x]);
        target.accumulate_product(-1.0, &ops.u[2], &ops.d_z[x]);
    }
    // curvature: +(u^θ)²/r in F^r, −u^r u^θ/r in F^θ
    out[0].accumulate_product(1.0, &ops.u_theta_over_r, &ops.u[1]);
    out[1].accumulate_product(-1.0, &ops.u_theta_over_r, &ops.u[0]);
    ModeForcing {
        grid,
        n_base: state.n_base(),
        coeffs: into_coefficients(&grid, out),
    }
}

/// Reference forcing: samples `φ = Nθ` at `4K + 2` equispaced angles,
/// forms the products pointwise and projects back onto `cos kφ`, `sin kφ`.
/// With that many samples quadratic products are not aliased.
pub fn nonlinear_forcing_pseudospectral(state: &VelocityModeSet) -> ModeForcing {
    let grid = *state.grid();
    let k_max = state.k_max();
    let samples = 4 * k_max + 2;
    let ops = Operands::new(state);
    let mut coeffs = ModeCoefficients::zeros(&grid, k_max);
    for l in 0..samples {
        let phi = 2.0 * PI * l as f64 / samples as f64;
        let u = ops.u.each_ref().map(|s| s.sample(&grid, phi));
        let ut_r = ops.u_theta_over_r.sample(&grid, phi);
        let mut f: [Array2<f64>; 3] = std::array::from_fn(|x| {
            let dr = ops.d_r[x].sample(&grid, phi);
            let dt = ops.d_theta[x].sample(&grid, phi);
            let dz = ops.d_z[x].sample(&grid, phi);
            -(&u[0] * &dr + &ut_r * &dt + &u[2] * &dz)
        });
        f[0] += &(&ut_r * &u[1]);
        f[1] -= &(&ut_r * &u[0]);
        for k in 0..=k_max {
            let (s, c) = (k as f64 * phi).sin_cos();
            let w = if k == 0 { 1.0 } else { 2.0 } / samples as f64;
            for (x, fx) in f.iter().enumerate() {
                coeffs.cos[k][x].scaled_add(w * c, fx);
                if k > 0 {
                    coeffs.sin[k][x].scaled_add(w * s, fx);
                }
            }
        }
    }
    ModeForcing {
        grid,
        n_base: state.n_base(),
        coeffs,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::modes::state::Family;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(grid: &Grid, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let rc = rng.random_range(0.8..1.6);
        let zc = rng.random_range(0.5..1.5);
        let w = rng.random_range(0.2..0.4);
        let a = rng.random_range(-1.0..1.0);
        grid.sample(|r, z| a * (-((r - rc).powi(2) + (z - zc).powi(2)) / (w * w)).exp())
    }

    pub(crate) fn random_state(k_max: usize, seed: u64, restricted: bool) -> VelocityModeSet {
        let g = Grid::new(24, 20, 2.4, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = VelocityModeSet::zeros(g, 3, k_max).unwrap();
        for k in 0..=k_max {
            for comp in Component::ALL {
                for fam in [Family::Cos, Family::Sin] {
                    if k == 0 && fam == Family::Sin {
                        continue;
                    }
                    let forbidden = matches!(
                        (fam, comp),
                        (Family::Cos, Component::Theta) | (Family::Sin, Component::R) | (Family::Sin, Component::Z)
                    );
                    if restricted && forbidden {
                        continue;
                    }
                    *s.coefficients_mut().get_mut(k, fam, comp) = bump(&g, &mut rng);
                }
            }
        }
        s.set_restricted(restricted);
        s
    }

    #[test]
    fn convolution_matches_pseudospectral() {
        for seed in 0..3 {
            let s = random_state(4, seed, false);
            let a = nonlinear_forcing_convolution(&s);
            let b = nonlinear_forcing_pseudospectral(&s);
            assert!(a.max_abs_difference(&b) < 1e-12, "{}", a.max_abs_difference(&b));
        }
    }

    #[test]
    fn zero_and_mode_zero_only() {
        let s = VelocityModeSet::zeros(Grid::new(8, 8, 1.0, 1.0).unwrap(), 2, 3).unwrap();
        assert!(nonlinear_forcing_convolution(&s).coeffs.max_abs() == 0.0);
        let mut s = random_state(3, 4, false);
        for k in 1..=3 {
            for x in 0..3 {
                s.coefficients_mut().cos[k][x].fill(0.0);
                s.coefficients_mut().sin[k][x].fill(0.0);
            }
        }
        let f = nonlinear_forcing_convolution(&s);
        for k in 1..=3 {
            for x in 0..3 {
                assert!(f.coeffs.cos[k][x].iter().all(|v| *v == 0.0));
                assert!(f.coeffs.sin[k][x].iter().all(|v| *v == 0.0));
            }
        }
        assert!(f.coeffs.cos[0].iter().any(|a| a.iter().any(|v| *v != 0.0)));
    }

    #[test]
    fn single_mode_feeds_zero_and_two() {
        let mut s = random_state(4, 9, false);
        for k in [0usize, 2, 3, 4] {
            for x in 0..3 {
                s.coefficients_mut().cos[k][x].fill(0.0);
                s.coefficients_mut().sin[k][x].fill(0.0);
            }
        }
        let f = nonlinear_forcing_convolution(&s);
        let live = |k: usize| {
            f.coeffs.cos[k].iter().chain(f.coeffs.sin[k].iter()).any(|a| a.iter().any(|v| *v != 0.0))
        };
        assert!(live(0) && live(2));
        assert!(!live(1) && !live(3) && !live(4));
    }

    #[test]
    fn restricted_class_is_closed_and_homogeneous() {
        let s = random_state(3, 2, true);
        let f = nonlinear_forcing_convolution(&s);
        let fs = VelocityModeSet::from_coefficients(*s.grid(), 3, 0.0, true, f.coeffs.clone()).unwrap();
        assert!(fs.satisfies_restricted_symmetry());
        let mut s2 = s.clone();
        s2.coefficients_mut().scale(-3.0);
        let mut f2 = nonlinear_forcing_convolution(&s2).coeffs;
        f2.scale(1.0 / 9.0);
        let diff = ModeForcing { grid: f.grid, n_base: 3, coeffs: f2 }.max_abs_difference(&f);
        assert!(diff < 1e-13);
    }
}
