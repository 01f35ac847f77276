//! Direct evaluation of the free-space inverse of `L_m` as a kernel integral,
//! `P(r,z) = (1/2π) ∫∫ F_m(ξ²) a(r̄,z̄) √(r̄/r) dr̄ dz̄`.
//!
//! This is an O((nr·nz)·|supp a|) cross-check of the sparse solver and is
//! not meant for production use.

use std::f64::consts::PI;

use super::evaluator::{h_series, xi_squared, KernelEvaluator};
use crate::error::{Error, Result};
use crate::grid::{Parity, ScalarModeField};

const TABLE_S_MIN: f64 = 1e-12;
const TABLE_STEP: f64 = 0.005;
const NEAR_SUBDIVISION: usize = 8;
const SELF_SUBDIVISION: usize = 16;

/// `F_m` tabulated on a uniform grid in `ln s`, with the large-`s` series
/// beyond the table and the logarithmic asymptote below it.
#[derive(Clone, Debug)]
pub struct KernelTable {
    m: u32,
    ln_min: f64,
    s_max: f64,
    values: Vec<f64>,
    log_offset: f64,
}

impl KernelTable {
    pub fn new(evaluator: &KernelEvaluator, m: u32) -> Result<Self> {
        let s_max = 16f64.max(m as f64);
        let ln_min = TABLE_S_MIN.ln();
        let n = ((s_max.ln() - ln_min) / TABLE_STEP).ceil() as usize + 4;
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let s = (ln_min + (k as f64 - 1.0) * TABLE_STEP).exp();
            values.push(evaluator.eval_fm(m, s)?);
        }
        // F_m(s) = -ln(s)/2 + c + o(1) as s -> 0
        let log_offset = values[1] + 0.5 * ln_min;
        Ok(KernelTable {
            m,
            ln_min,
            s_max,
            values,
            log_offset,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s >= self.s_max {
            return h_series(self.m, 0.5, s).unwrap_or(0.0);
        }
        let ln_s = s.ln();
        if ln_s <= self.ln_min {
            return self.log_offset - 0.5 * ln_s;
        }
        // values[k] sits at ln_min + (k-1)·step
        let x = (ln_s - self.ln_min) / TABLE_STEP + 1.0;
        let k = (x.floor() as usize).clamp(1, self.values.len() - 3);
        let t = x - k as f64;
        let (y0, y1, y2, y3) = (
            self.values[k - 1],
            self.values[k],
            self.values[k + 1],
            self.values[k + 2],
        );
        // cubic Lagrange through nodes -1, 0, 1, 2
        let a = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let b = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let d = (t + 1.0) * t * (t - 1.0) / 6.0;
        a * y0 + b * y1 + c * y2 + d * y3
    }
}

#[derive(Clone, Debug)]
pub struct InverseKernelResult {
    pub field: ScalarModeField,
    /// Set when the right-hand side reaches within two cells of the axis or
    /// of the outer radius, where the free-space kernel and the bounded
    /// domain solve need not agree.
    pub boundary_warning: bool,
}

/// Free-space kernel inverse of `L_m` applied to `rhs`, with `z` treated
/// periodically by the nearest-image convention.
pub fn apply_lm_inverse_kernel(
    evaluator: &KernelEvaluator,
    m: u32,
    rhs: &ScalarModeField,
) -> Result<InverseKernelResult> {
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "kernel inverse is only offered for m >= 3, got m = {m}"
        )));
    }
    let grid = *rhs.grid();
    let (nr, nz) = (grid.nr(), grid.nz());
    let (hr, hz, lz) = (grid.hr(), grid.hz(), grid.lz());
    let a = rhs.values();

    let support: Vec<(usize, usize, f64)> = a
        .indexed_iter()
        .filter(|(_, v)| **v != 0.0)
        .map(|((j, i), v)| (j, i, *v))
        .collect();
    let boundary_warning = support.iter().any(|&(_, i, _)| i < 2 || i + 2 >= nr);
    let mut out = grid.zeros();
    if support.is_empty() {
        return Ok(InverseKernelResult {
            field: ScalarModeField::with_parity(grid, m, Parity::of_wavenumber(m), out)?,
            boundary_warning,
        });
    }

    let table = KernelTable::new(evaluator, m)?;
    let wrap = |dz: f64| dz - lz * (dz / lz).round();
    let cell = hr * hz;

    // kernel integrated over source cell (is, js) for a target at (r, z)
    let cell_integral = |r: f64, z: f64, is: usize, js: usize, sub: usize| -> f64 {
        let rb0 = grid.r(is) - 0.5 * hr;
        let zb0 = grid.z(js) - 0.5 * hz;
        let (dr, dzs) = (hr / sub as f64, hz / sub as f64);
        let mut acc = 0.0;
        for a_ in 0..sub {
            let rb = rb0 + (a_ as f64 + 0.5) * dr;
            for b_ in 0..sub {
                let zb = zb0 + (b_ as f64 + 0.5) * dzs;
                let dz = wrap(z - zb);
                acc += table.eval(xi_squared(r, dz, rb, 0.0)) * (rb / r).sqrt();
            }
        }
        acc * dr * dzs
    };

    for j in 0..nz {
        let z = grid.z(j);
        for i in 0..nr {
            let r = grid.r(i);
            let mut sum = 0.0;
            for &(js, is, v) in &support {
                let di = i.abs_diff(is);
                let dj = {
                    let d = j.abs_diff(js);
                    d.min(nz - d)
                };
                let k = if di == 0 && dj == 0 {
                    cell_integral(r, z, is, js, SELF_SUBDIVISION)
                } else if di <= 1 && dj <= 1 {
                    cell_integral(r, z, is, js, NEAR_SUBDIVISION)
                } else {
                    let rb = grid.r(is);
                    let dz = wrap(z - grid.z(js));
                    table.eval(xi_squared(r, dz, rb, 0.0)) * (rb / r).sqrt() * cell
                };
                sum += k * v;
            }
            out[[j, i]] = sum / (2.0 * PI);
        }
    }
    Ok(InverseKernelResult {
        field: ScalarModeField::with_parity(grid, m, Parity::of_wavenumber(m), out)?,
        boundary_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn table_matches_evaluator() {
        let ev = KernelEvaluator::default();
        let t = KernelTable::new(&ev, 5).unwrap();
        for &s in &[1e-13, 1e-9, 3e-6, 0.0123, 0.7, 5.5, 15.9, 40.0, 1e3] {
            let exact = ev.eval_fm(5, s).unwrap();
            let got = t.eval(s);
            assert!((got - exact).abs() <= 1e-8 * exact.abs().max(1e-6), "s={s}: {got} vs {exact}");
        }
    }

    #[test]
    fn zero_rhs_and_small_m() {
        let ev = KernelEvaluator::default();
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let z = ScalarModeField::zeros(g, 4);
        let r = apply_lm_inverse_kernel(&ev, 4, &z).unwrap();
        assert!(r.field.is_zero());
        assert!(apply_lm_inverse_kernel(&ev, 2, &ScalarModeField::zeros(g, 2)).is_err());
    }

    #[test]
    fn boundary_flag() {
        let ev = KernelEvaluator::default();
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let mut f = ScalarModeField::zeros(g, 3);
        f.values_mut()[[2, 0]] = 1.0;
        assert!(apply_lm_inverse_kernel(&ev, 3, &f).unwrap().boundary_warning);
        let mut f = ScalarModeField::zeros(g, 3);
        f.values_mut()[[2, 4]] = 1.0;
        assert!(!apply_lm_inverse_kernel(&ev, 3, &f).unwrap().boundary_warning);
    }
}
