//! Trajectory driver: step loop, observer callbacks and checkpointing.

use std::path::{Path, PathBuf};

use super::checkpoint::{write_checkpoint, Checkpoint};
use super::stepper::{Stepper, StepperConfig};
use crate::error::{Error, Result};
use crate::modes::VelocityModeSet;

/// What an observer sees after each step (and once for the initial state).
#[derive(Clone, Copy, Debug)]
pub struct StepInfo<'a> {
    pub step: u64,
    pub dt: f64,
    /// `dt · ‖∇ū‖²` over the step just taken; 0 for the initial row.
    pub dissipation: f64,
    pub state: &'a VelocityModeSet,
}

pub trait Observer {
    fn observe(&mut self, info: &StepInfo<'_>) -> Result<()>;
}

impl<F: FnMut(&StepInfo<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, info: &StepInfo<'_>) -> Result<()> {
        self(info)
    }
}

pub fn checkpoint_name(steps: u64) -> String {
    format!("checkpoint_{steps:08}.cylm")
}

pub const LAST_GOOD: &str = "last_good.cylm";

/// A run failed after `steps` completed steps; the last good state was
/// saved to `saved` when a checkpoint directory was configured.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub steps: u64,
    pub saved: Option<PathBuf>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} steps", self.error, self.steps)?;
        match &self.saved {
            Some(p) => write!(f, "; last good state in {})", p.display()),
            None => write!(f, ")"),
        }
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    stepper: Stepper,
    state: VelocityModeSet,
    total_steps: u64,
    checkpoint_every: u64,
    fresh: bool,
}

impl Trajectory {
    /// Projects the initial state and primes the pressure from it.
    pub fn start(initial: &VelocityModeSet, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let (total_steps, dt) = cfg.schedule();
        let g = *initial.grid();
        let mut stepper = Stepper::new(g, initial.n_base(), initial.k_max(), dt, cfg)?;
        let state = stepper.project(initial)?;
        stepper.prime_pressure(&state)?;
        Ok(Trajectory {
            stepper,
            state,
            total_steps,
            checkpoint_every: cfg.checkpoint_every,
            fresh: true,
        })
    }

    /// Continues a run from a checkpoint written by [`Trajectory::run`].
    /// The schedule of `cfg` must reproduce the checkpoint's step size.
    pub fn resume(ck: Checkpoint, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let (total_steps, dt) = cfg.schedule();
        if dt.to_bits() != ck.header.dt.to_bits() {
            return Err(Error::InvalidInput(format!(
                "checkpoint step {} differs from the configured schedule step {dt}",
                ck.header.dt
            )));
        }
        let history = ck
            .history
            .ok_or_else(|| Error::Checkpoint("checkpoint carries no stepper history".into()))?;
        if history.steps > total_steps {
            return Err(Error::InvalidInput(format!(
                "checkpoint is at step {} beyond the scheduled {total_steps}",
                history.steps
            )));
        }
        let s = &ck.state;
        let mut stepper = Stepper::new(*s.grid(), s.n_base(), s.k_max(), dt, cfg)?;
        stepper.set_history(history)?;
        Ok(Trajectory {
            stepper,
            state: ck.state,
            total_steps,
            checkpoint_every: cfg.checkpoint_every,
            fresh: false,
        })
    }

    pub fn state(&self) -> &VelocityModeSet {
        &self.state
    }

    pub fn steps_done(&self) -> u64 {
        self.stepper.history().steps
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt()
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    fn save(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        write_checkpoint(&path, &self.state, Some(self.stepper.history()), self.dt())?;
        Ok(path)
    }

    /// Runs to the scheduled end. The observer sees the initial state (only
    /// on a fresh start) and every completed step. With a checkpoint
    /// directory, checkpoints follow the cadence and the final one is always
    /// written; on failure the last good state goes to `last_good.cylm`.
    pub fn run(
        &mut self,
        observer: &mut dyn Observer,
        checkpoint_dir: Option<&Path>,
    ) -> std::result::Result<(), RunFailure> {
        self.advance(observer, checkpoint_dir, u64::MAX).map(|_| ())
    }

    /// As [`Trajectory::run`], but stops after at most `max_steps` steps.
    /// Returns whether the schedule is complete.
    pub fn advance(
        &mut self,
        observer: &mut dyn Observer,
        checkpoint_dir: Option<&Path>,
        max_steps: u64,
    ) -> std::result::Result<bool, RunFailure> {
        let fail = |t: &Self, error: Error| {
            let saved = checkpoint_dir.and_then(|d| t.save(d, LAST_GOOD).ok());
            RunFailure {
                error,
                steps: t.steps_done(),
                saved,
            }
        };
        if self.fresh {
            self.fresh = false;
            let info = StepInfo {
                step: 0,
                dt: self.dt(),
                dissipation: 0.0,
                state: &self.state,
            };
            observer.observe(&info).map_err(|e| fail(self, e))?;
            if self.total_steps == 0 {
                if let Some(dir) = checkpoint_dir {
                    self.save(dir, &checkpoint_name(0)).map_err(|e| fail(self, e))?;
                }
                return Ok(true);
            }
        }
        let mut taken = 0;
        while self.steps_done() < self.total_steps && taken < max_steps {
            let out = match self.stepper.step(&self.state) {
                Ok(o) => o,
                Err(e) => return Err(fail(self, e)),
            };
            taken += 1;
            self.state = out.state;
            let step = self.steps_done();
            let info = StepInfo {
                step,
                dt: self.dt(),
                dissipation: out.dissipation,
                state: &self.state,
            };
            observer.observe(&info).map_err(|e| fail(self, e))?;
            if let Some(dir) = checkpoint_dir {
                let due = self.checkpoint_every > 0 && step.is_multiple_of(self.checkpoint_every);
                if step == self.total_steps || due {
                    self.save(dir, &checkpoint_name(step)).map_err(|e| fail(self, e))?;
                }
            }
        }
        Ok(self.steps_done() == self.total_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::checkpoint::read_checkpoint;
    use crate::grid::Grid;
    use crate::modes::{GaussianRing, SwirlCompletion, build_single_mode_data, CONSTRAINT_TOLERANCE};

    fn initial() -> VelocityModeSet {
        let g = Grid::new(24, 24, 3.0, 3.0).unwrap();
        let p = GaussianRing::new(0.5, 1.5, 0.4)
            .unwrap()
            .profiles(g, 3, SwirlCompletion::Discrete)
            .unwrap();
        build_single_mode_data(&p, 3, 2, CONSTRAINT_TOLERANCE).unwrap()
    }

    #[test]
    fn zero_horizon_emits_only_the_initial_row() {
        let mut rows = Vec::new();
        let mut t = Trajectory::start(&initial(), StepperConfig::new(0.01, 0.0)).unwrap();
        t.run(&mut |i: &StepInfo<'_>| {
            rows.push(i.step);
            Ok(())
        }, None)
        .unwrap();
        assert_eq!(rows, vec![0]);
    }

    #[test]
    fn restart_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = StepperConfig::new(0.005, 0.04);
        cfg.checkpoint_every = 3;
        let mut full = Vec::new();
        let mut t = Trajectory::start(&initial(), cfg).unwrap();
        t.run(&mut |i: &StepInfo<'_>| {
            full.push((i.step, i.state.clone(), i.dissipation.to_bits()));
            Ok(())
        }, Some(dir.path()))
        .unwrap();
        assert_eq!(full.len(), 9);
        assert!(dir.path().join(checkpoint_name(8)).exists());

        let ck = read_checkpoint(&dir.path().join(checkpoint_name(3))).unwrap();
        let mut resumed = Trajectory::resume(ck, cfg).unwrap();
        let mut rest = Vec::new();
        resumed
            .run(&mut |i: &StepInfo<'_>| {
                rest.push((i.step, i.state.clone(), i.dissipation.to_bits()));
                Ok(())
            }, None)
            .unwrap();
        assert_eq!(rest.len(), 5);
        for (a, b) in full[4..].iter().zip(&rest) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn advance_in_chunks_matches_run() {
        let cfg = StepperConfig::new(0.005, 0.035);
        let mut whole = Trajectory::start(&initial(), cfg).unwrap();
        whole.run(&mut |_: &StepInfo<'_>| Ok(()), None).unwrap();
        let mut parts = Trajectory::start(&initial(), cfg).unwrap();
        let mut seen = Vec::new();
        let mut obs = |i: &StepInfo<'_>| {
            seen.push(i.step);
            Ok(())
        };
        assert!(!parts.advance(&mut obs, None, 3).unwrap());
        assert!(!parts.advance(&mut obs, None, 3).unwrap());
        assert!(parts.advance(&mut obs, None, 3).unwrap());
        assert!(parts.advance(&mut obs, None, 3).unwrap());
        assert_eq!(seen, (0..=7).collect::<Vec<u64>>());
        assert_eq!(parts.state(), whole.state());
    }

    #[test]
    fn failure_saves_last_good_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Trajectory::start(&initial(), StepperConfig::new(0.005, 0.02)).unwrap();
        let err = t
            .run(&mut |i: &StepInfo<'_>| {
                if i.step == 2 {
                    Err(Error::InvalidInput("stop".into()))
                } else {
                    Ok(())
                }
            }, Some(dir.path()))
            .unwrap_err();
        assert_eq!(err.steps, 2);
        let ck = read_checkpoint(err.saved.as_ref().unwrap()).unwrap();
        assert_eq!(ck.history.unwrap().steps, 2);
    }
}
