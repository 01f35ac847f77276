//! Resuming from a mid-run checkpoint reproduces the uninterrupted run.

use cylmodes::cli::RunConfig;
use cylmodes::evolution::{checkpoint_name, read_checkpoint, StepInfo, Trajectory};

#[test]
fn resume_from_cli_checkpoint_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.nr = 32;
    cfg.grid.nz = 32;
    cfg.time.t_final = 0.15;
    cfg.time.checkpoint_every = 4;
    cfg.output.dir = dir.path().to_path_buf();
    let out = cylmodes::cli::simulate(&cfg).map_err(|f| f.to_string()).unwrap();
    let steps = out.summary.steps;
    assert!(steps > 8);

    let ck_dir = out.dir.join("checkpoints");
    let last = read_checkpoint(&ck_dir.join(checkpoint_name(steps))).unwrap();
    let mid = read_checkpoint(&ck_dir.join(checkpoint_name(8))).unwrap();
    let initial = cfg.initial_state().unwrap();
    let stepper_cfg = cfg.stepper_config(&initial).unwrap();
    let mut t = Trajectory::resume(mid, stepper_cfg).unwrap();
    let mut seen = 0;
    t.run(&mut |_: &StepInfo<'_>| {
        seen += 1;
        Ok(())
    }, None)
    .unwrap();
    assert_eq!(seen, steps - 8);
    assert_eq!(t.state(), &last.state);
    assert_eq!(t.stepper().history(), last.history.as_ref().unwrap());
}
