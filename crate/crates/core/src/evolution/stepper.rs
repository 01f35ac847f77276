//! One time step: Adams–Bashforth 2 on the quadratic terms (forward Euler
//! on the first step), Crank–Nicolson on the viscous terms, then an
//! incremental pressure projection.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::projection::{subtract_gradient, PressureSet, Projector};
use super::viscous::{from_channels, to_channels, vector_laplacian, viscous_dissipation, HelmholtzSolver};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::SOLVE_TOLERANCE;
use crate::modes::{nonlinear_forcing_convolution, ModeCoefficients, VelocityModeSet};

pub const DEFAULT_CFL_LIMIT: f64 = 0.5;
/// Iterative-refinement sweeps allowed per implicit or pressure solve.
pub const DEFAULT_MAX_REFINEMENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub cfl_limit: f64,
    pub solver_tol: f64,
    pub max_refinement: usize,
}

impl StepperConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        StepperConfig {
            dt,
            t_final,
            checkpoint_every: 0,
            cfl_limit: DEFAULT_CFL_LIMIT,
            solver_tol: SOLVE_TOLERANCE,
            max_refinement: DEFAULT_MAX_REFINEMENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("time.dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            bad.push(format!("time.t_final = {} must be non-negative", self.t_final));
        }
        if !(self.cfl_limit > 0.0) {
            bad.push(format!("CFL limit {} must be positive", self.cfl_limit));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            bad.push(format!("solver.tol = {} must lie in (0, 1)", self.solver_tol));
        }
        if self.max_refinement == 0 {
            bad.push("solver.max_iter must be at least 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Number of steps and the uniform step that lands exactly on
    /// `t_final` without exceeding the requested `dt`.
    pub fn schedule(&self) -> (u64, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_final / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        (n, self.t_final / n as f64)
    }
}

/// Upper bound on `|u|` from the mode coefficients:
/// per component `|c_0| + Σ_k √(c_k² + s_k²)`.
pub fn max_speed_bound(state: &VelocityModeSet) -> f64 {
    let c = state.coefficients();
    let g = state.grid();
    let mut best = 0.0f64;
    for j in 0..g.nz() {
        for i in 0..g.nr() {
            let mut sq = 0.0;
            for comp in 0..3 {
                let mut b = c.cos[0][comp][[j, i]].abs();
                for k in 1..=c.k_max() {
                    b += c.cos[k][comp][[j, i]].hypot(c.sin[k][comp][[j, i]]);
                }
                sq += b * b;
            }
            best = best.max(sq.sqrt());
        }
    }
    best
}

/// Multistep memory carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub steps: u64,
    pub prev_forcing: Option<ModeCoefficients>,
    pub pressure: PressureSet,
}

impl History {
    pub fn new(grid: &Grid, k_max: usize) -> Self {
        History {
            steps: 0,
            prev_forcing: None,
            pressure: PressureSet::zeros(grid, k_max),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: VelocityModeSet,
    /// `dt · ‖∇ū‖²` at the step midpoint `ū = (uⁿ + uⁿ⁺¹)/2`.
    pub dissipation: f64,
}

#[derive(Clone, Debug)]
pub struct Stepper {
    grid: Grid,
    n_base: u32,
    k_max: usize,
    dt: f64,
    cfg: StepperConfig,
    viscous: BTreeMap<u32, HelmholtzSolver>,
    projector: Projector,
    history: History,
}

impl Stepper {
    /// `dt` is the step actually taken (see [`StepperConfig::schedule`]).
    pub fn new(grid: Grid, n_base: u32, k_max: usize, dt: f64, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Stepper {
            grid,
            n_base,
            k_max,
            dt,
            cfg,
            viscous: BTreeMap::new(),
            projector: Projector::new(grid, cfg.solver_tol, cfg.max_refinement),
            history: History::new(&grid, k_max),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn set_history(&mut self, history: History) -> Result<()> {
        if history.pressure.cos.len() != self.k_max {
            return Err(Error::InvalidInput("history truncation does not match".into()));
        }
        self.history = history;
        Ok(())
    }

    fn check(&self, state: &VelocityModeSet) -> Result<()> {
        if *state.grid() != self.grid || state.n_base() != self.n_base || state.k_max() != self.k_max {
            return Err(Error::GridMismatch("state does not match the stepper layout".into()));
        }
        Ok(())
    }

    pub fn cfl(&self, state: &VelocityModeSet) -> f64 {
        max_speed_bound(state) * self.dt / self.grid.min_spacing()
    }

    /// Projects without touching the pressure history.
    pub fn project(&mut self, state: &VelocityModeSet) -> Result<VelocityModeSet> {
        self.check(state)?;
        let mut out = state.clone();
        self.projector.project(out.coefficients_mut(), self.n_base)?;
        Ok(out)
    }

    /// Sets the pressure to the one consistent with `state`, the potential
    /// of the gradient part of `F(u) + Δu`. Without it the first
    /// pressure increment absorbs the whole pressure and the first step
    /// loses energy to the projection.
    pub fn prime_pressure(&mut self, state: &VelocityModeSet) -> Result<()> {
        self.check(state)?;
        let (grid, n) = (self.grid, self.n_base);
        let mut accel = nonlinear_forcing_convolution(state).coeffs;
        accel.axpy(1.0, &vector_laplacian(state.coefficients(), &grid, n));
        self.history.pressure = self.projector.project(&mut accel, n)?;
        Ok(())
    }

    pub fn step(&mut self, state: &VelocityModeSet) -> Result<StepOutcome> {
        self.check(state)?;
        let cfl = self.cfl(state);
        if cfl > self.cfg.cfl_limit {
            return Err(Error::Cfl {
                cfl,
                limit: self.cfg.cfl_limit,
                suggested_dt: self.dt * self.cfg.cfl_limit / cfl,
            });
        }
        let (grid, n, dt) = (self.grid, self.n_base, self.dt);
        let un = state.coefficients();

        let forcing = nonlinear_forcing_convolution(state).coeffs;
        let mut rhs = un.clone();
        match &self.history.prev_forcing {
            None => rhs.axpy(dt, &forcing),
            Some(prev) => {
                rhs.axpy(1.5 * dt, &forcing);
                rhs.axpy(-0.5 * dt, prev);
            }
        }
        rhs.axpy(0.5 * dt, &vector_laplacian(un, &grid, n));
        let p = &self.history.pressure;
        subtract_gradient(&mut rhs, &grid, 0, 0, true, &p.mode0, dt);
        for k in 1..=self.k_max {
            let m = k as u32 * n;
            subtract_gradient(&mut rhs, &grid, k, m, true, &p.cos[k - 1], dt);
            subtract_gradient(&mut rhs, &grid, k, m, false, &p.sin[k - 1], dt);
        }

        let mut next = ModeCoefficients::zeros(&grid, self.k_max);
        for k in 0..=self.k_max {
            let mut ch = to_channels(&rhs, k, n);
            for c in ch.iter_mut() {
                let solver = match self.viscous.entry(c.mu) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(HelmholtzSolver::new(grid, c.mu, 0.5 * dt)?),
                };
                c.values = solver.solve(&c.values, self.cfg.solver_tol, self.cfg.max_refinement)?;
            }
            from_channels(&mut next, k, ch);
        }

        let phi = self.projector.project(&mut next, n)?;
        let mut pressure = self.history.pressure.clone();
        for (p, f) in pressure.iter_mut().zip(phi.iter()) {
            if f.iter().any(|v| *v != 0.0) {
                p.scaled_add(1.0 / dt, f);
            }
        }

        let mut mid = un.clone();
        mid.axpy(1.0, &next);
        mid.scale(0.5);
        let dissipation = dt * viscous_dissipation(&mid, &grid, n);

        let out = VelocityModeSet::from_coefficients(
            grid,
            n,
            state.time() + dt,
            state.is_restricted(),
            next,
        )?;
        self.history = History {
            steps: self.history.steps + 1,
            prev_forcing: Some(forcing),
            pressure,
        };
        Ok(StepOutcome {
            state: out,
            dissipation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_product;

    #[test]
    fn schedule_lands_on_final_time() {
        let c = StepperConfig::new(0.1, 1.0);
        let (n, dt) = c.schedule();
        assert_eq!(n, 10);
        assert!((dt - 0.1).abs() < 1e-15);
        let (n, dt) = StepperConfig::new(0.3, 1.0).schedule();
        assert_eq!(n, 4);
        assert_eq!(dt, 0.25);
        assert_eq!(StepperConfig::new(0.3, 0.0).schedule().0, 0);
        assert!(StepperConfig::new(-1.0, 1.0).validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(16, 16, 2.0, 2.0).unwrap();
        let s = VelocityModeSet::zeros(g, 4, 2).unwrap();
        let mut st = Stepper::new(g, 4, 2, 0.01, StepperConfig::new(0.01, 0.1)).unwrap();
        let out = st.step(&s).unwrap();
        assert!(out.state.is_zero());
        assert_eq!(out.state.time(), 0.01);
        assert_eq!(out.dissipation, 0.0);
    }

    #[test]
    fn cfl_violation_suggests_a_step() {
        let g = Grid::new(16, 16, 2.0, 2.0).unwrap();
        let mut s = VelocityModeSet::zeros(g, 4, 1).unwrap();
        s.coefficients_mut().cos[0][2].fill(10.0);
        let mut st = Stepper::new(g, 4, 1, 0.1, StepperConfig::new(0.1, 1.0)).unwrap();
        match st.step(&s) {
            Err(Error::Cfl { suggested_dt, .. }) => {
                assert!((suggested_dt * 10.0 / g.min_spacing() - 0.5).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stokes_decay_of_axisymmetric_field() {
        // mode-0 no-swirl field at small amplitude decays like exp(−λ t)
        let g = Grid::new(32, 32, 2.0, 2.0).unwrap();
        let mut s = VelocityModeSet::zeros(g, 1, 1).unwrap();
        let phi = g.sample(|r, z| 1e-6 * r * r * (2.0 - r).powi(2) * (std::f64::consts::PI * z).sin());
        s.coefficients_mut().cos[0][0] = phi;
        let dt = 1e-3;
        let mut st = Stepper::new(g, 1, 1, dt, StepperConfig::new(dt, 1.0)).unwrap();
        let mut s = st.project(&s).unwrap();
        st.prime_pressure(&s).unwrap();
        let energy = |s: &VelocityModeSet| {
            let c = s.coefficients();
            (0..3).map(|x| inner_product(&g, &c.cos[0][x], &c.cos[0][x])).sum::<f64>()
        };
        let mut e = vec![energy(&s)];
        for _ in 0..200 {
            let out = st.step(&s).unwrap();
            let before = energy(&s);
            s = out.state;
            let drop = before - energy(&s);
            // Crank–Nicolson: the energy drop is twice the midpoint dissipation
            // Crank–Nicolson with an orthogonal projection: the energy drop is
            // twice the midpoint dissipation
            assert!((drop - 2.0 * out.dissipation).abs() < 1e-2 * drop, "{drop} {}", out.dissipation);
            e.push(energy(&s));
        }
        assert!(e.windows(2).all(|w| w[1] < w[0]));
    }
}
