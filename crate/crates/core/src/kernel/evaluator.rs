//! Angular kernels `F_m`, `G_m` and the derivatives of `F_m`.
//!
//! All of them are instances of
//! `H_m^ν(s) = ∫_0^π cos mθ (s + 2(1 − cos θ))^{−ν} dθ`:
//! `F_m = H_m^{1/2}`, `F_m' = −½ H_m^{3/2}`, `F_m'' = ¾ H_m^{5/2}` and
//! `G_m = ½ (H_{m−1}^{3/2} − H_{m+1}^{3/2})`.

use std::f64::consts::PI;

use super::quadrature::{integrate_adaptive, AdaptiveSettings};
use crate::error::{Error, Result};

/// `ξ² = ((r − r̄)² + (z − z̄)²) / (r r̄)`.
pub fn xi_squared(r: f64, z: f64, r_bar: f64, z_bar: f64) -> f64 {
    let dr = r - r_bar;
    let dz = z - z_bar;
    (dr * dr + dz * dz) / (r * r_bar)
}

/// `2(1 − cos θ)` without cancellation near zero.
#[inline]
fn chord_sq(theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    4.0 * h * h
}

#[inline]
fn inv_pow(x: f64, nu: f64) -> f64 {
    if nu == 0.5 {
        1.0 / x.sqrt()
    } else if nu == 1.5 {
        1.0 / (x * x.sqrt())
    } else if nu == 2.5 {
        1.0 / (x * x * x.sqrt())
    } else {
        x.powf(-nu)
    }
}

#[derive(Clone, Debug)]
pub struct KernelEvaluator {
    rel_tol: f64,
    panels_per_mode: usize,
    split_constant: f64,
    series_floor: f64,
    g_route_min_m: u32,
    g_route_max_s: f64,
}

impl Default for KernelEvaluator {
    fn default() -> Self {
        KernelEvaluator {
            rel_tol: 1e-10,
            panels_per_mode: 20,
            split_constant: 4.0,
            series_floor: 16.0,
            g_route_min_m: 8,
            g_route_max_s: 1.0,
        }
    }
}

impl KernelEvaluator {
    pub fn new(rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1e-3) {
            return Err(Error::InvalidInput(format!(
                "kernel tolerance must lie in (0, 1e-3), got {rel_tol}"
            )));
        }
        Ok(KernelEvaluator {
            rel_tol,
            ..Default::default()
        })
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// Split point between the near-singular piece and the oscillatory tail.
    pub fn split_point(&self, s: f64) -> f64 {
        (self.split_constant * s.sqrt()).min(PI)
    }

    fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings {
            // the stopping rule is an estimate, so aim two digits below the contract
            rel_tol: self.rel_tol * 1e-2,
            // each Gauss–Kronrod panel already reports at least 50ε of its ∫|g|
            cancellation_floor: 1e-13,
            max_panels: 200_000,
        }
    }

    /// Breakpoints on `[0, π]`: graded towards the peak at θ = 0 inside
    /// `[0, θ*]`, and uniform panels of width `π / (20(m+1))` elsewhere.
    fn breakpoints(&self, s: f64, m: u32) -> Vec<f64> {
        let theta_star = self.split_point(s);
        let panels = self.panels_per_mode * (m as usize + 1);
        let width = PI / panels as f64;
        let mut bps = vec![0.0];
        let grading = theta_star.min(width);
        let mut t = grading;
        let mut graded = Vec::new();
        while t > 1e-3 * s.sqrt().min(1.0) && graded.len() < 40 {
            graded.push(t);
            t *= 0.25;
        }
        graded.reverse();
        bps.extend(graded);
        for k in 1..=panels {
            bps.push(k as f64 * width);
        }
        bps.push(theta_star);
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        *bps.last_mut().unwrap() = PI;
        bps
    }

    /// Integrates `g(θ)` over `[0, π]` using the breakpoints the kernel of
    /// separation `s` and frequency `m` calls for.
    pub fn integrate_angular<F: Fn(f64) -> f64>(&self, s: f64, m: u32, g: F) -> Result<f64> {
        let bps = self.breakpoints(s, m);
        let r = integrate_adaptive(g, &bps, &self.settings());
        if !r.value.is_finite() {
            return Err(Error::Domain(format!("kernel integral is not finite at s = {s}")));
        }
        Ok(r.value)
    }

    fn check_s(s: f64) -> Result<()> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!(
                "kernel argument must be positive and finite, got s = {s}"
            )));
        }
        Ok(())
    }

    fn use_series(&self, m: u32, s: f64) -> bool {
        s >= self.series_floor.max(m as f64)
    }

    /// `H_m^ν(s)` by whichever route is better conditioned.
    pub fn eval_h(&self, m: u32, nu: f64, s: f64) -> Result<f64> {
        Self::check_s(s)?;
        if self.use_series(m, s) {
            if let Some(v) = h_series(m, nu, s) {
                return Ok(v);
            }
        }
        self.eval_h_quadrature(m, nu, s)
    }

    pub fn eval_h_quadrature(&self, m: u32, nu: f64, s: f64) -> Result<f64> {
        Self::check_s(s)?;
        let mf = m as f64;
        self.integrate_angular(s, m, |t| (mf * t).cos() * inv_pow(s + chord_sq(t), nu))
    }

    /// `F_m(s)`; for large `m` and small `s` this is computed as `G_m(s)/m`.
    pub fn eval_fm(&self, m: u32, s: f64) -> Result<f64> {
        Self::check_s(s)?;
        if m >= self.g_route_min_m && s < self.g_route_max_s {
            return Ok(self.eval_gm(m, s)? / m as f64);
        }
        self.eval_h(m, 0.5, s)
    }

    /// `F_m(s)` from its defining integral, never rerouted through `G_m`.
    pub fn eval_fm_direct(&self, m: u32, s: f64) -> Result<f64> {
        self.eval_h(m, 0.5, s)
    }

    pub fn eval_gm(&self, m: u32, s: f64) -> Result<f64> {
        if m == 0 {
            return Err(Error::Domain("G_m is defined for m >= 1".into()));
        }
        Self::check_s(s)?;
        if self.use_series(m + 1, s) {
            if let (Some(lo), Some(hi)) = (h_series(m - 1, 1.5, s), h_series(m + 1, 1.5, s)) {
                return Ok(0.5 * (lo - hi));
            }
        }
        let mf = m as f64;
        self.integrate_angular(s, m, |t| {
            (mf * t).sin() * t.sin() * inv_pow(s + chord_sq(t), 1.5)
        })
    }

    pub fn eval_fm_deriv(&self, m: u32, s: f64, order: u32) -> Result<f64> {
        match order {
            1 => Ok(-0.5 * self.eval_h(m, 1.5, s)?),
            2 => Ok(0.75 * self.eval_h(m, 2.5, s)?),
            _ => Err(Error::InvalidInput(format!(
                "derivative order must be 1 or 2, got {order}"
            ))),
        }
    }
}

/// Large-`s` expansion
/// `H_m^ν(s) = π s^{−ν} (−1)^m Σ_{j≥m} C(−ν, j) C(2j, j−m) s^{−j}`,
/// summed relative to its first term so that huge `m` cannot underflow
/// intermediate values. Returns `None` where the series is not convergent.
pub fn h_series(m: u32, nu: f64, s: f64) -> Option<f64> {
    if !(s > 4.0) {
        return None;
    }
    let mf = m as f64;
    let mut log_lead = -(nu + mf) * s.ln();
    for i in 0..m {
        let i = i as f64;
        log_lead += ((nu + i) / (i + 1.0)).ln();
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut j = mf;
    for _ in 0..100_000 {
        let ratio = (-nu - j) / (j + 1.0) * (2.0 * j + 2.0) * (2.0 * j + 1.0)
            / ((j + 1.0 - mf) * (j + 1.0 + mf))
            / s;
        term *= ratio;
        sum += term;
        j += 1.0;
        if ratio.abs() < 1.0 && term.abs() <= 1e-18 * sum.abs() {
            return Some(PI * log_lead.exp() * sum);
        }
    }
    None
}
