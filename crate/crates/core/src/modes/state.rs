//! Truncated azimuthal expansion of a velocity field,
//! `u^c(r,θ,z) = Σ_{k=0}^{K} c^c_k(r,z) cos(kNθ) + s^c_k(r,z) sin(kNθ)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d_dr_values, d_dz_values, Grid, Parity, ScalarModeField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    R,
    Theta,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::R, Component::Theta, Component::Z];

    pub fn index(self) -> usize {
        match self {
            Component::R => 0,
            Component::Theta => 1,
            Component::Z => 2,
        }
    }

    /// Axis parity of this cylindrical component at azimuthal wavenumber `m`.
    pub fn parity(self, m: u32) -> Parity {
        match self {
            Component::Z => Parity::of_wavenumber(m),
            _ => Parity::of_wavenumber(m + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Cos,
    Sin,
}

/// `cos[k][c]` multiplies `cos(kNθ)` in component `c` (r, θ, z); `sin[k][c]`
/// multiplies `sin(kNθ)`. `sin[0]` is kept identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoefficients {
    pub cos: Vec<[Array2<f64>; 3]>,
    pub sin: Vec<[Array2<f64>; 3]>,
}

impl ModeCoefficients {
    pub fn zeros(grid: &Grid, k_max: usize) -> Self {
        let block = || [grid.zeros(), grid.zeros(), grid.zeros()];
        ModeCoefficients {
            cos: (0..=k_max).map(|_| block()).collect(),
            sin: (0..=k_max).map(|_| block()).collect(),
        }
    }

    pub fn k_max(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn get(&self, k: usize, family: Family, c: Component) -> &Array2<f64> {
        match family {
            Family::Cos => &self.cos[k][c.index()],
            Family::Sin => &self.sin[k][c.index()],
        }
    }

    pub fn get_mut(&mut self, k: usize, family: Family, c: Component) -> &mut Array2<f64> {
        match family {
            Family::Cos => &mut self.cos[k][c.index()],
            Family::Sin => &mut self.sin[k][c.index()],
        }
    }

    /// Iterates over every stored array with its labels; mode 0 has only
    /// the cos family.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Family, Component, &Array2<f64>)> {
        (0..self.cos.len()).flat_map(move |k| {
            let fams: &'static [Family] = if k == 0 { &[Family::Cos] } else { &[Family::Cos, Family::Sin] };
            fams.iter().flat_map(move |&fam| {
                Component::ALL
                    .iter()
                    .map(move |&c| (k, fam, c, self.get(k, fam, c)))
            })
        })
    }

    pub fn scale(&mut self, c: f64) {
        for block in self.cos.iter_mut().chain(self.sin.iter_mut()) {
            for a in block.iter_mut() {
                a.mapv_inplace(|v| v * c);
            }
        }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &ModeCoefficients) {
        for (a, b) in self.cos.iter_mut().zip(&other.cos) {
            for (x, y) in a.iter_mut().zip(b) {
                x.scaled_add(c, y);
            }
        }
        for (a, b) in self.sin.iter_mut().zip(&other.sin) {
            for (x, y) in a.iter_mut().zip(b) {
                x.scaled_add(c, y);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter()
            .map(|(_, _, _, a)| a.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }
}

/// Full truncated state: base frequency `N`, modes `0..=K`, time stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityModeSet {
    grid: Grid,
    n_base: u32,
    t: f64,
    restricted: bool,
    coeffs: ModeCoefficients,
}

impl VelocityModeSet {
    pub fn zeros(grid: Grid, n_base: u32, k_max: usize) -> Result<Self> {
        if n_base == 0 || k_max == 0 {
            return Err(Error::InvalidInput(format!(
                "base frequency and truncation must be positive (N = {n_base}, K = {k_max})"
            )));
        }
        Ok(VelocityModeSet {
            grid,
            n_base,
            t: 0.0,
            restricted: false,
            coeffs: ModeCoefficients::zeros(&grid, k_max),
        })
    }

    pub fn from_coefficients(
        grid: Grid,
        n_base: u32,
        t: f64,
        restricted: bool,
        coeffs: ModeCoefficients,
    ) -> Result<Self> {
        if n_base == 0 || coeffs.cos.len() < 2 || coeffs.sin.len() != coeffs.cos.len() {
            return Err(Error::InvalidInput("malformed mode coefficients".into()));
        }
        for (_, _, _, a) in coeffs.iter() {
            grid.check_shape(a)?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite mode coefficient".into()));
            }
        }
        if coeffs.sin[0].iter().any(|a| a.iter().any(|v| *v != 0.0)) {
            return Err(Error::InvalidInput("mode 0 has no sin family".into()));
        }
        Ok(VelocityModeSet {
            grid,
            n_base,
            t,
            restricted,
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_base(&self) -> u32 {
        self.n_base
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.k_max()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Whether the state is declared to lie in the class with even r/z and
    /// odd θ components (cos-r, sin-θ, cos-z).
    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn set_restricted(&mut self, flag: bool) {
        self.restricted = flag;
    }

    pub fn coefficients(&self) -> &ModeCoefficients {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut ModeCoefficients {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> ModeCoefficients {
        self.coeffs
    }

    pub fn wavenumber(&self, k: usize) -> u32 {
        k as u32 * self.n_base
    }

    pub fn component(&self, k: usize, family: Family, c: Component) -> ScalarModeField {
        let m = self.wavenumber(k);
        ScalarModeField::from_parts(self.grid, m, c.parity(m), self.coeffs.get(k, family, c).clone())
    }

    pub fn set_component(
        &mut self,
        k: usize,
        family: Family,
        c: Component,
        field: &ScalarModeField,
    ) -> Result<()> {
        if *field.grid() != self.grid {
            return Err(Error::GridMismatch("component lives on a different grid".into()));
        }
        if k > self.k_max() {
            return Err(Error::InvalidInput(format!("mode {k} exceeds truncation {}", self.k_max())));
        }
        if k == 0 && family == Family::Sin {
            return Err(Error::InvalidInput("mode 0 has no sin family".into()));
        }
        *self.coeffs.get_mut(k, family, c) = field.values().clone();
        Ok(())
    }

    /// True when every component forbidden in the restricted class is
    /// exactly zero.
    pub fn satisfies_restricted_symmetry(&self) -> bool {
        forbidden_components(&self.coeffs).all(|a| a.iter().all(|v| *v == 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|(_, _, _, a)| a.iter().all(|v| *v == 0.0))
    }
}

/// Components that vanish in the restricted class: `u^θ_0`, and for
/// `k ≥ 1` the sin-r, cos-θ and sin-z coefficients.
pub fn forbidden_components(coeffs: &ModeCoefficients) -> impl Iterator<Item = &Array2<f64>> {
    coeffs.iter().filter_map(|(k, fam, c, a)| {
        let forbidden = match (fam, c) {
            (Family::Cos, Component::Theta) => true,
            (Family::Sin, Component::R) | (Family::Sin, Component::Z) => k > 0,
            _ => false,
        };
        forbidden.then_some(a)
    })
}

/// Complement of [`forbidden_components`].
pub fn active_components(coeffs: &ModeCoefficients) -> impl Iterator<Item = &Array2<f64>> {
    coeffs.iter().filter_map(|(k, fam, c, a)| {
        let active = match (fam, c) {
            (Family::Cos, Component::Theta) => false,
            (Family::Sin, Component::R) | (Family::Sin, Component::Z) => false,
            _ => k > 0 || fam == Family::Cos,
        };
        active.then_some(a)
    })
}

/// Per-mode divergence residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeDivergence {
    pub mode0: Array2<f64>,
    /// Indexed by `k - 1`.
    pub cos: Vec<Array2<f64>>,
    pub sin: Vec<Array2<f64>>,
}

impl ModeDivergence {
    pub fn iter(&self) -> impl Iterator<Item = &Array2<f64>> {
        std::iter::once(&self.mode0).chain(self.cos.iter()).chain(self.sin.iter())
    }
}

/// `D_r a + a/r + D_z b + w·c/r` on raw arrays.
pub(crate) fn divergence_values(
    grid: &Grid,
    ur: &Array2<f64>,
    uz: &Array2<f64>,
    m: u32,
    swirl: Option<(f64, &Array2<f64>)>,
) -> Array2<f64> {
    let mut out = d_dr_values(grid, ur, Component::R.parity(m));
    out += &d_dz_values(grid, uz);
    let radii = grid.radii();
    for ((j, i), v) in out.indexed_iter_mut() {
        let mut extra = ur[[j, i]];
        if let Some((w, th)) = swirl {
            extra += w * th[[j, i]];
        }
        *v += extra / radii[i];
    }
    out
}

/// Discrete divergence of every mode:
/// cos family `∂_r u^r_k + u^r_k/r + ∂_z u^z_k + kN v^θ_k/r`,
/// sin family `∂_r v^r_k + v^r_k/r + ∂_z v^z_k − kN u^θ_k/r`.
pub fn mode_divergence(state: &VelocityModeSet) -> ModeDivergence {
    let g = state.grid();
    let c = state.coefficients();
    let mode0 = divergence_values(g, &c.cos[0][0], &c.cos[0][2], 0, None);
    let mut cos = Vec::with_capacity(state.k_max());
    let mut sin = Vec::with_capacity(state.k_max());
    for k in 1..=state.k_max() {
        let m = state.wavenumber(k);
        let w = m as f64;
        cos.push(divergence_values(g, &c.cos[k][0], &c.cos[k][2], m, Some((w, &c.sin[k][1]))));
        sin.push(divergence_values(g, &c.sin[k][0], &c.sin[k][2], m, Some((-w, &c.cos[k][1]))));
    }
    ModeDivergence { mode0, cos, sin }
}

/// Cylindrical velocity components `(u^r, u^θ, u^z)` at angle `θ`.
pub fn synthesize(state: &VelocityModeSet, theta: f64) -> [Array2<f64>; 3] {
    synthesize_coefficients(&state.coeffs, state.n_base, theta)
}

pub(crate) fn synthesize_coefficients(c: &ModeCoefficients, n_base: u32, theta: f64) -> [Array2<f64>; 3] {
    Synthesizer::new(c, n_base).at(theta)
}

/// Evaluates the expansion at many angles, visiting only the nonzero
/// coefficient arrays.
pub(crate) struct Synthesizer<'a> {
    base: &'a [Array2<f64>; 3],
    /// `(kN, component, sin?, coefficients)`.
    terms: Vec<(f64, usize, bool, &'a Array2<f64>)>,
}

impl<'a> Synthesizer<'a> {
    pub fn new(c: &'a ModeCoefficients, n_base: u32) -> Self {
        let mut terms = Vec::new();
        for k in 1..c.cos.len() {
            let w = k as f64 * n_base as f64;
            for comp in 0..3 {
                for (sin, a) in [(false, &c.cos[k][comp]), (true, &c.sin[k][comp])] {
                    if a.iter().any(|v| *v != 0.0) {
                        terms.push((w, comp, sin, a));
                    }
                }
            }
        }
        Synthesizer { base: &c.cos[0], terms }
    }

    pub fn at(&self, theta: f64) -> [Array2<f64>; 3] {
        let mut out = self.base.clone();
        for &(w, comp, sin, a) in &self.terms {
            let (s, co) = (w * theta).sin_cos();
            out[comp].scaled_add(if sin { s } else { co }, a);
        }
        out
    }
}

/// Cartesian `(u^x, u^y, u^z)` at angle `θ`.
pub fn synthesize_cartesian(state: &VelocityModeSet, theta: f64) -> [Array2<f64>; 3] {
    let [ur, ut, uz] = synthesize(state, theta);
    let (s, c) = theta.sin_cos();
    let ux = &ur * c - &ut * s;
    let uy = &ur * s + &ut * c;
    [ux, uy, uz]
}

/// `u_λ(t, x) = λ u(λ² t, λ x)`: coefficients scale by `λ`, the grid
/// contracts by `λ` and the time stamp scales by `λ^{-2}`.
pub fn rescale(state: &VelocityModeSet, lambda: f64) -> Result<VelocityModeSet> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("scale factor must be positive, got {lambda}")));
    }
    let grid = state.grid.contracted(lambda)?;
    let mut coeffs = state.coeffs.clone();
    coeffs.scale(lambda);
    Ok(VelocityModeSet {
        grid,
        n_base: state.n_base,
        t: state.t / (lambda * lambda),
        restricted: state.restricted,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16, 12, 2.0, 3.0).unwrap()
    }

    #[test]
    fn zero_state_has_zero_divergence_and_synthesis() {
        let s = VelocityModeSet::zeros(grid(), 4, 3).unwrap();
        assert!(mode_divergence(&s).iter().all(|a| a.iter().all(|v| *v == 0.0)));
        assert!(synthesize(&s, 0.3).iter().all(|a| a.iter().all(|v| *v == 0.0)));
        assert!(s.satisfies_restricted_symmetry());
    }

    #[test]
    fn synthesis_at_zero_angle_reads_cos_terms() {
        let g = grid();
        let mut s = VelocityModeSet::zeros(g, 8, 2).unwrap();
        *s.coefficients_mut().get_mut(1, Family::Cos, Component::R) = g.sample(|r, _| r);
        *s.coefficients_mut().get_mut(1, Family::Sin, Component::Theta) = g.sample(|_, z| z);
        let [ur, ut, _] = synthesize(&s, 0.0);
        assert_eq!(ur, g.sample(|r, _| r));
        assert!(ut.iter().all(|v| *v == 0.0));
        let [_, ut, _] = synthesize(&s, std::f64::consts::PI / 16.0);
        let expect = g.sample(|_, z| z);
        assert!((&ut - &expect).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rescale_identity_and_scaling() {
        let g = grid();
        let mut s = VelocityModeSet::zeros(g, 2, 1).unwrap();
        s.set_time(0.5);
        *s.coefficients_mut().get_mut(0, Family::Cos, Component::Z) = g.sample(|r, z| r * z);
        assert_eq!(rescale(&s, 1.0).unwrap(), s);
        let t = rescale(&s, 2.0).unwrap();
        assert_eq!(t.grid().rmax(), 1.0);
        assert_eq!(t.time(), 0.125);
        assert_eq!(t.coefficients().cos[0][2][[3, 4]], 2.0 * s.coefficients().cos[0][2][[3, 4]]);
        assert!(rescale(&s, 0.0).is_err());
    }

    #[test]
    fn forbidden_and_active_partition() {
        let g = grid();
        let c = ModeCoefficients::zeros(&g, 3);
        // mode 0: 3 cos; k >= 1: 6 each
        assert_eq!(c.iter().count(), 3 + 3 * 6);
        assert_eq!(forbidden_components(&c).count(), 1 + 3 * 3);
        assert_eq!(active_components(&c).count(), 2 + 3 * 3);
    }

    #[test]
    fn component_parities() {
        assert_eq!(Component::R.parity(0), Parity::Odd);
        assert_eq!(Component::Z.parity(0), Parity::Even);
        assert_eq!(Component::Theta.parity(3), Parity::Even);
        assert_eq!(Component::Z.parity(3), Parity::Odd);
    }

    #[test]
    fn set_component_checks() {
        let g = grid();
        let mut s = VelocityModeSet::zeros(g, 2, 2).unwrap();
        let f = ScalarModeField::zeros(g, 2);
        assert!(s.set_component(0, Family::Sin, Component::R, &f).is_err());
        assert!(s.set_component(3, Family::Cos, Component::R, &f).is_err());
        let other = ScalarModeField::zeros(Grid::new(4, 4, 1.0, 1.0).unwrap(), 2);
        assert!(s.set_component(1, Family::Cos, Component::R, &other).is_err());
        assert!(s.set_component(1, Family::Cos, Component::R, &f).is_ok());
    }
}
