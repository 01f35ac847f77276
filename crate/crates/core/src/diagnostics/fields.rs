//! Instantaneous functionals of one state: energies, Plancherel checks,
//! symmetry leakage and the full-field `L^p` norms.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use crate::evolution::viscous_dissipation;
use crate::grid::{d_dr_values, d_dz_values, inner_product, Grid};
use crate::modes::state::Synthesizer;
use crate::modes::{
    active_components, forbidden_components, mode_divergence, Component, ModeCoefficients,
    VelocityModeSet,
};

/// `2π Σ f_ij r_i^{e+1} hr hz`: the integral of `r^e f` against the
/// three-dimensional measure of an axisymmetric function.
pub(crate) fn radial_integral(grid: &Grid, f: &Array2<f64>, e: f64) -> f64 {
    let weights: Vec<f64> = grid.radii().iter().map(|r| r.powf(e + 1.0)).collect();
    let mut total = 0.0;
    for row in f.rows() {
        for (v, w) in row.iter().zip(&weights) {
            total += v * w;
        }
    }
    2.0 * PI * total * grid.hr() * grid.hz()
}

/// Angles `θ_j = 2πj / (N M)` with `M = 4K + 2`, one period of the base
/// frequency; the trapezoid rule on them integrates `θ`-polynomials of
/// degree `2KN` exactly.
pub fn quadrature_angles(n_base: u32, k_max: usize) -> Vec<f64> {
    let m = 4 * k_max + 2;
    (0..m).map(|j| 2.0 * PI * j as f64 / (n_base as f64 * m as f64)).collect()
}

fn mode_weight(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        0.5
    }
}

/// `‖u‖²_{L²}` summed per mode with the angular weights (`2π` for mode 0,
/// `π` for `k ≥ 1`, the factor `2π` sitting in the inner product).
pub fn mode_energies(state: &VelocityModeSet) -> Vec<f64> {
    let g = state.grid();
    let c = state.coefficients();
    (0..=c.k_max())
        .map(|k| {
            let sq: f64 = (0..3)
                .map(|x| inner_product(g, &c.cos[k][x], &c.cos[k][x]) + inner_product(g, &c.sin[k][x], &c.sin[k][x]))
                .sum();
            mode_weight(k) * sq
        })
        .collect()
}

pub fn l2_norm_squared(state: &VelocityModeSet) -> f64 {
    mode_energies(state).iter().sum()
}

/// `‖∇u‖²_{L²}` including the curvature terms of the vector gradient.
pub fn enstrophy(state: &VelocityModeSet) -> f64 {
    viscous_dissipation(state.coefficients(), state.grid(), state.n_base())
}

/// `‖u_0‖_{L³}` of the axisymmetric part.
pub fn l3_mode0(state: &VelocityModeSet) -> f64 {
    let g = state.grid();
    let [r, t, z] = &state.coefficients().cos[0];
    let mut cube = g.zeros();
    ndarray::Zip::from(&mut cube).and(r).and(t).and(z).for_each(|o, a, b, c| {
        *o = (a * a + b * b + c * c).powf(1.5);
    });
    radial_integral(g, &cube, 0.0).cbrt()
}

/// `∫ |u|^p dx` by trapezoid quadrature in `θ` over one base period.
pub fn lp_power_full(state: &VelocityModeSet, p: f64) -> f64 {
    let g = state.grid();
    let angles = quadrature_angles(state.n_base(), state.k_max());
    let mut acc = g.zeros();
    let synth = Synthesizer::new(state.coefficients(), state.n_base());
    for &th in &angles {
        let [a, b, c] = synth.at(th);
        ndarray::Zip::from(&mut acc).and(&a).and(&b).and(&c).for_each(|o, x, y, z| {
            *o += (x * x + y * y + z * z).powf(0.5 * p);
        });
    }
    radial_integral(g, &acc, 0.0) / angles.len() as f64
}

/// Radial and axial derivatives of every coefficient, with the axis parity
/// of each component.
pub(crate) fn rz_gradients(c: &ModeCoefficients, grid: &Grid, n_base: u32) -> [ModeCoefficients; 2] {
    let mut dr = ModeCoefficients::zeros(grid, c.k_max());
    let mut dz = ModeCoefficients::zeros(grid, c.k_max());
    for k in 0..=c.k_max() {
        let m = k as u32 * n_base;
        for comp in Component::ALL {
            let x = comp.index();
            let par = comp.parity(m);
            for (src, (r_out, z_out)) in [
                (&c.cos[k][x], (&mut dr.cos[k][x], &mut dz.cos[k][x])),
                (&c.sin[k][x], (&mut dr.sin[k][x], &mut dz.sin[k][x])),
            ] {
                if src.iter().any(|v| *v != 0.0) {
                    *r_out = d_dr_values(grid, src, par);
                    *z_out = d_dz_values(grid, src);
                }
            }
        }
    }
    [dr, dz]
}

fn plancherel_pair(c: &[&ModeCoefficients], grid: &Grid, n_base: u32) -> f64 {
    let k_max = c[0].k_max();
    let mut mode_sum = 0.0;
    for coeffs in c {
        for k in 0..=k_max {
            for x in 0..3 {
                mode_sum += mode_weight(k)
                    * (inner_product(grid, &coeffs.cos[k][x], &coeffs.cos[k][x])
                        + inner_product(grid, &coeffs.sin[k][x], &coeffs.sin[k][x]));
            }
        }
    }
    let angles = quadrature_angles(n_base, k_max);
    let mut full = 0.0;
    for coeffs in c {
        let synth = Synthesizer::new(coeffs, n_base);
        for &th in &angles {
            for a in synth.at(th) {
                full += inner_product(grid, &a, &a);
            }
        }
    }
    full /= angles.len() as f64;
    if full == 0.0 {
        0.0
    } else {
        (mode_sum - full).abs() / full
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlancherelReport {
    pub velocity: f64,
    pub gradient: f64,
}

impl PlancherelReport {
    pub fn max(&self) -> f64 {
        self.velocity.max(self.gradient)
    }
}

/// Relative gap between the weighted mode sum of squared norms and the
/// `θ`-quadrature of the synthesised field, for `u` and its `(r,z)`
/// gradient. Zero fields report 0.
pub fn plancherel_check(state: &VelocityModeSet) -> PlancherelReport {
    let (g, n) = (state.grid(), state.n_base());
    let [dr, dz] = rz_gradients(state.coefficients(), g, n);
    PlancherelReport {
        velocity: plancherel_pair(&[state.coefficients()], g, n),
        gradient: plancherel_pair(&[&dr, &dz], g, n),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Leakage {
    pub odevity: f64,
    pub periodicity: f64,
}

/// Symmetry-class violations. `odevity` is the `L²` size of the components
/// the restricted class forbids relative to the permitted ones (0 unless
/// the state declares the restricted class). `periodicity` is the energy
/// in modes `k` that are not multiples of `period`, relative to the total;
/// `period = 1` disables it.
pub fn symmetry_leakage(state: &VelocityModeSet, period: usize) -> Leakage {
    let g = state.grid();
    let c = state.coefficients();
    let sq = |it: &mut dyn Iterator<Item = &Array2<f64>>| it.map(|a| inner_product(g, a, a)).sum::<f64>();
    let odevity = if state.is_restricted() {
        let bad = sq(&mut forbidden_components(c));
        let good = sq(&mut active_components(c));
        ratio(bad.sqrt(), good.sqrt())
    } else {
        0.0
    };
    let periodicity = if period > 1 {
        let e = mode_energies(state);
        let off: f64 = e.iter().enumerate().filter(|(k, _)| k % period != 0).map(|(_, v)| v).sum();
        ratio(off, e.iter().sum())
    } else {
        0.0
    };
    Leakage { odevity, periodicity }
}

fn ratio(a: f64, b: f64) -> f64 {
    match (a == 0.0, b == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        _ => a / b,
    }
}

/// Largest weighted-`L²` divergence residual over the modes and families.
pub fn max_divergence(state: &VelocityModeSet) -> f64 {
    let g = state.grid();
    mode_divergence(state)
        .iter()
        .map(|d| inner_product(g, d, d).sqrt())
        .fold(0.0, f64::max)
}
