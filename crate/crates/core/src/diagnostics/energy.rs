//! Scale-invariant weighted `L^p` energies and their running registers.
//!
//! For mode `k` write `ũ_k = (u^r_k, u^z_k)`, `ṽ_k = (v^r_k, v^z_k)` for the
//! cos and sin meridional parts. Each block `b` (meridional or swirl) of
//! each mode carries three registers:
//!
//! * `sup`: `sup_t ∫ r^{p−3} |b|^p`,
//! * `grad`: `∫_0^t ∫ r^{p−3} |∇̃b|² |b|^{p−2}` (cos and sin parts apart),
//! * `weight`: `∫_0^t ∫ r^{p−5} |b|^p`,
//!
//! combined as `c_k (sup + grad + (kN)² weight)` with `c_1 = N^{−2α}`,
//! `c_k = (kN)^{2β}` for `k ≥ 2` and an extra `(kN)^{p/2}` on the swirl
//! block. Time integrals use left-endpoint rectangles.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::fields::{l3_mode0, lp_power_full, radial_integral};
use crate::error::{Error, Result};
use crate::grid::{d_dr_values, d_dz_values, Grid};
use crate::modes::{Component, VelocityModeSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            p: 100.0 / 19.0,
            alpha_p: 1.0 / 30.0,
            beta_p: 17.0 / 16.0,
        }
    }
}

impl EnergyParams {
    pub fn new(p: f64, alpha_p: f64, beta_p: f64) -> Result<Self> {
        let e = EnergyParams { p, alpha_p, beta_p };
        e.validate()?;
        Ok(e)
    }

    /// `5 < p < 6`, `1 < β < (p−1)/4`, `0 < α < (p−3−2β)/4`.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let EnergyParams { p, alpha_p: a, beta_p: b } = *self;
        if !(p > 5.0 && p < 6.0) {
            bad.push(format!("diag.p = {p} must lie in (5, 6)"));
        }
        if !(b > 1.0 && b < (p - 1.0) / 4.0) {
            bad.push(format!("diag.beta_p = {b} must lie in (1, (p-1)/4 = {})", (p - 1.0) / 4.0));
        }
        if !(a > 0.0 && a < (p - 3.0 - 2.0 * b) / 4.0) {
            bad.push(format!(
                "diag.alpha_p = {a} must lie in (0, (p-3-2*beta_p)/4 = {})",
                (p - 3.0 - 2.0 * b) / 4.0
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Prefactor of mode `k ≥ 1` in the meridional (`swirl = false`) or
    /// swirl energy.
    pub fn prefactor(&self, k: usize, n_base: u32, swirl: bool) -> f64 {
        let kn = k as f64 * n_base as f64;
        let base = if k == 1 {
            (n_base as f64).powf(-2.0 * self.alpha_p)
        } else {
            kn.powf(2.0 * self.beta_p)
        };
        if swirl {
            base * kn.powf(0.5 * self.p)
        } else {
            base
        }
    }
}

/// Instantaneous integrands of one block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BlockSample {
    pub sup: f64,
    pub grad: f64,
    pub weight: f64,
}

/// Running registers of one block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BlockRegisters {
    pub sup: f64,
    pub grad: f64,
    pub weight: f64,
}

impl BlockRegisters {
    pub fn combine(&self, kn: f64) -> f64 {
        self.sup + self.grad + kn * kn * self.weight
    }
}

/// Everything the accumulator needs from one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    /// Indexed by `k − 1`.
    pub meridional: Vec<BlockSample>,
    pub swirl: Vec<BlockSample>,
    /// `Σ_k (kN)² ‖r^{−3/2}(ũ_k, ṽ_k)‖²`.
    pub d_rate: f64,
    /// `∫ r^{p−3} |ϖ_k|^p` with `ϖ_k = (ũ_k, ṽ_k, √(kN) u^θ_k, √(kN) v^θ_k)`.
    pub varpi: Vec<f64>,
    pub l3_u0: f64,
    /// `‖u‖_{L⁵}⁵`.
    pub l5_power: f64,
}

fn squares(arrays: &[&Array2<f64>], grid: &Grid) -> Array2<f64> {
    let mut out = grid.zeros();
    for a in arrays {
        out.zip_mut_with(a, |o, v| *o += v * v);
    }
    out
}

fn grad_squares(arrays: &[(&Array2<f64>, Component)], m: u32, grid: &Grid) -> Array2<f64> {
    let mut out = grid.zeros();
    for (a, comp) in arrays {
        if a.iter().all(|v| *v == 0.0) {
            continue;
        }
        let dr = d_dr_values(grid, a, comp.parity(m));
        let dz = d_dz_values(grid, a);
        Zip::from(&mut out).and(&dr).and(&dz).for_each(|o, x, y| *o += x * x + y * y);
    }
    out
}

/// `(cos part, sin part)` of one block of mode `k`.
type Block<'a> = (Vec<(&'a Array2<f64>, Component)>, Vec<(&'a Array2<f64>, Component)>);

fn block_sample(block: &Block<'_>, m: u32, grid: &Grid, p: f64) -> BlockSample {
    fn arrays<'b>(v: &[(&'b Array2<f64>, Component)]) -> Vec<&'b Array2<f64>> {
        v.iter().map(|x| x.0).collect()
    }
    let (cos, sin) = block;
    let mag2 = {
        let mut all = arrays(cos);
        all.extend(arrays(sin));
        squares(&all, grid)
    };
    if mag2.iter().all(|v| *v == 0.0) {
        return BlockSample::default();
    }
    let pow = mag2.mapv(|v| v.powf(0.5 * p));
    let mut grad_integrand = grid.zeros();
    for part in [cos, sin] {
        let m2 = squares(&arrays(part), grid);
        let g2 = grad_squares(part, m, grid);
        Zip::from(&mut grad_integrand).and(&g2).and(&m2).for_each(|o, g, v| {
            if *g != 0.0 {
                *o += g * v.powf(0.5 * (p - 2.0));
            }
        });
    }
    BlockSample {
        sup: radial_integral(grid, &pow, p - 3.0),
        grad: radial_integral(grid, &grad_integrand, p - 3.0),
        weight: radial_integral(grid, &pow, p - 5.0),
    }
}

impl Sample {
    pub fn of(state: &VelocityModeSet, params: &EnergyParams) -> Sample {
        let g = state.grid();
        let c = state.coefficients();
        let p = params.p;
        let mut meridional = Vec::with_capacity(state.k_max());
        let mut swirl = Vec::with_capacity(state.k_max());
        let mut varpi = Vec::with_capacity(state.k_max());
        let mut d_rate = 0.0;
        for k in 1..=state.k_max() {
            let m = state.wavenumber(k);
            let kn = m as f64;
            let (cb, sb) = (&c.cos[k], &c.sin[k]);
            let mer: Block<'_> = (
                vec![(&cb[0], Component::R), (&cb[2], Component::Z)],
                vec![(&sb[0], Component::R), (&sb[2], Component::Z)],
            );
            let sw: Block<'_> = (vec![(&cb[1], Component::Theta)], vec![(&sb[1], Component::Theta)]);
            meridional.push(block_sample(&mer, m, g, p));
            swirl.push(block_sample(&sw, m, g, p));

            let m2 = squares(&[&cb[0], &cb[2], &sb[0], &sb[2]], g);
            d_rate += kn * kn * radial_integral(g, &m2, -3.0);
            let t2 = squares(&[&cb[1], &sb[1]], g);
            let w = &m2 + &(t2 * kn);
            varpi.push(radial_integral(g, &w.mapv(|v| v.powf(0.5 * p)), p - 3.0));
        }
        Sample {
            t: state.time(),
            meridional,
            swirl,
            d_rate,
            varpi,
            l3_u0: l3_mode0(state),
            l5_power: lp_power_full(state, 5.0),
        }
    }
}

/// Sup-in-time and time-integral registers over a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsAccumulator {
    params: EnergyParams,
    n_base: u32,
    pub meridional: Vec<BlockRegisters>,
    pub swirl: Vec<BlockRegisters>,
    /// `D(t)`.
    pub d: f64,
    /// `sup_t ∫ r^{p−3} |ϖ_k|^p`, indexed by `k − 1`.
    pub varpi_sup: Vec<f64>,
    pub l3_u0_sup: f64,
    /// `∫_0^t ‖u‖_{L⁵}⁵`.
    pub l5_integral: f64,
    pub elapsed: f64,
    #[serde(skip)]
    pending: Option<Sample>,
}

impl DiagnosticsAccumulator {
    pub fn new(params: EnergyParams, n_base: u32, k_max: usize) -> Result<Self> {
        params.validate()?;
        Ok(DiagnosticsAccumulator {
            params,
            n_base,
            meridional: vec![BlockRegisters::default(); k_max],
            swirl: vec![BlockRegisters::default(); k_max],
            d: 0.0,
            varpi_sup: vec![0.0; k_max],
            l3_u0_sup: 0.0,
            l5_integral: 0.0,
            elapsed: 0.0,
            pending: None,
        })
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn n_base(&self) -> u32 {
        self.n_base
    }

    fn check(&self, s: &Sample) -> Result<()> {
        if s.meridional.len() != self.meridional.len() {
            return Err(Error::GridMismatch(format!(
                "sample has {} modes, accumulator {}",
                s.meridional.len(),
                self.meridional.len()
            )));
        }
        Ok(())
    }

    fn update_sups(&mut self, s: &Sample) {
        for (r, b) in self.meridional.iter_mut().zip(&s.meridional) {
            r.sup = r.sup.max(b.sup);
        }
        for (r, b) in self.swirl.iter_mut().zip(&s.swirl) {
            r.sup = r.sup.max(b.sup);
        }
        for (r, v) in self.varpi_sup.iter_mut().zip(&s.varpi) {
            *r = r.max(*v);
        }
        self.l3_u0_sup = self.l3_u0_sup.max(s.l3_u0);
    }

    fn integrate(&mut self, s: &Sample, dt: f64) {
        for (r, b) in self.meridional.iter_mut().zip(&s.meridional) {
            r.grad += dt * b.grad;
            r.weight += dt * b.weight;
        }
        for (r, b) in self.swirl.iter_mut().zip(&s.swirl) {
            r.grad += dt * b.grad;
            r.weight += dt * b.weight;
        }
        self.d += dt * s.d_rate;
        self.l5_integral += dt * s.l5_power;
        self.elapsed += dt;
    }

    /// Treats `state` as the left endpoint of an interval of length `dt`:
    /// sups see the state, integrals grow by `dt` times its integrands.
    pub fn accumulate(&mut self, state: &VelocityModeSet, dt: f64) -> Result<()> {
        let s = Sample::of(state, &self.params);
        self.check(&s)?;
        self.update_sups(&s);
        self.integrate(&s, dt);
        Ok(())
    }

    /// Time-stamp driven form: the interval since the previous recorded
    /// state is integrated with that state's integrands, then the new
    /// state enters the sups. Registers then cover `[0, t]` exactly.
    pub fn record(&mut self, state: &VelocityModeSet) -> Result<()> {
        let s = Sample::of(state, &self.params);
        self.check(&s)?;
        if let Some(prev) = self.pending.take() {
            let dt = s.t - prev.t;
            if dt < 0.0 {
                return Err(Error::InvalidInput(format!("time went backwards: {} after {}", s.t, prev.t)));
            }
            self.integrate(&prev, dt);
        }
        self.update_sups(&s);
        self.pending = Some(s);
        Ok(())
    }

    /// The most recent recorded sample.
    pub fn last_sample(&self) -> Option<&Sample> {
        self.pending.as_ref()
    }

    fn energy(&self, regs: &[BlockRegisters], swirl: bool) -> f64 {
        regs.iter()
            .enumerate()
            .map(|(i, r)| {
                let k = i + 1;
                let kn = k as f64 * self.n_base as f64;
                self.params.prefactor(k, self.n_base, swirl) * r.combine(kn)
            })
            .sum()
    }

    /// `E_p^{r,z}(t)`.
    pub fn ep_rz(&self) -> f64 {
        self.energy(&self.meridional, false)
    }

    /// `E_p^θ(t)`.
    pub fn ep_theta(&self) -> f64 {
        self.energy(&self.swirl, true)
    }

    /// `Σ_{k≥2} (kN)^{2β} sup_t ‖r^{1−3/p} ϖ_k‖_{L^p}^p`.
    pub fn tail_sum(&self) -> f64 {
        self.varpi_sup
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, v)| ((i + 1) as f64 * self.n_base as f64).powf(2.0 * self.params.beta_p) * v)
            .sum()
    }

    /// `‖u‖_{L⁵_t(L⁵)}` so far.
    pub fn l5_norm(&self) -> f64 {
        self.l5_integral.powf(0.2)
    }

    /// Every scalar register in a fixed order, for comparisons.
    pub fn registers(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in self.meridional.iter().chain(&self.swirl) {
            out.extend([r.sup, r.grad, r.weight]);
        }
        out.push(self.d);
        out.extend(&self.varpi_sup);
        out.extend([self.l3_u0_sup, self.l5_integral, self.ep_rz(), self.ep_theta(), self.tail_sum()]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::forcing::tests::random_state;
    use crate::modes::{build_single_mode_data, rescale, GaussianRing, SwirlCompletion, CONSTRAINT_TOLERANCE};

    #[test]
    fn defaults_validate_and_bad_sets_enumerate() {
        EnergyParams::default().validate().unwrap();
        match (EnergyParams { p: 7.0, alpha_p: 0.0, beta_p: 0.5 }).validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_stream_gives_zero_registers() {
        let s = VelocityModeSet::zeros(Grid::new(8, 8, 1.0, 1.0).unwrap(), 4, 3).unwrap();
        let mut acc = DiagnosticsAccumulator::new(EnergyParams::default(), 4, 3).unwrap();
        for _ in 0..3 {
            acc.accumulate(&s, 0.1).unwrap();
        }
        assert!(acc.registers().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_state_integrates_exactly() {
        let s = random_state(3, 1, false);
        let mut acc = DiagnosticsAccumulator::new(EnergyParams::default(), 3, 3).unwrap();
        let sample = Sample::of(&s, acc.params());
        for _ in 0..4 {
            acc.accumulate(&s, 0.25).unwrap();
        }
        for (r, b) in acc.meridional.iter().zip(&sample.meridional) {
            assert!((r.grad - b.grad).abs() <= 1e-15 * b.grad);
            assert!((r.weight - b.weight).abs() <= 1e-15 * b.weight);
            assert_eq!(r.sup, b.sup);
        }
        assert!((acc.d - sample.d_rate).abs() <= 1e-15 * sample.d_rate);
    }

    #[test]
    fn initial_energy_of_single_mode_data() {
        let g = Grid::new(64, 64, 4.0, 4.0).unwrap();
        let n = 8;
        let prof = GaussianRing::new(1.0, 2.0, 0.5)
            .unwrap()
            .profiles(g, n, SwirlCompletion::Discrete)
            .unwrap();
        let s = build_single_mode_data(&prof, n, 3, CONSTRAINT_TOLERANCE).unwrap();
        let params = EnergyParams::default();
        let mut acc = DiagnosticsAccumulator::new(params, n, 3).unwrap();
        acc.record(&s).unwrap();
        let p = params.p;
        let nn = n as f64;
        let lp = |a: &Array2<f64>| radial_integral(&g, &a.mapv(|v| v.abs().powf(p)), p - 3.0);
        let mag = (prof.a[0].mapv(|v| v * v) + prof.a[2].mapv(|v| v * v)).mapv(f64::sqrt);
        let expect = nn.powf(-2.0 * params.alpha_p) * lp(&mag)
            + nn.powf(-0.5 * p - 2.0 * params.alpha_p) * lp(&prof.b[1]);
        let got = acc.ep_rz() + acc.ep_theta();
        assert!((got - expect).abs() < 1e-12 * expect, "{got} {expect}");
        assert_eq!(acc.tail_sum(), 0.0);
    }

    #[test]
    fn registers_are_scale_invariant() {
        let s = random_state(3, 5, false);
        let t = rescale(&s, 2.0).unwrap();
        let params = EnergyParams::default();
        let mut a = DiagnosticsAccumulator::new(params, 3, 3).unwrap();
        let mut b = DiagnosticsAccumulator::new(params, 3, 3).unwrap();
        a.accumulate(&s, 0.1).unwrap();
        b.accumulate(&t, 0.1 / 4.0).unwrap();
        for (x, y) in a.registers().iter().zip(b.registers()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{x} {y}");
        }
    }
}
