//! Implicit–explicit projection time stepping of the truncated mode system.

pub mod checkpoint;
pub mod projection;
pub mod run;
pub mod stepper;
pub mod viscous;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use projection::{project, PressureSet};
pub use stepper::{max_speed_bound, History, StepOutcome, Stepper, StepperConfig, DEFAULT_CFL_LIMIT, DEFAULT_MAX_REFINEMENT};
pub use run::{checkpoint_name, Observer, RunFailure, StepInfo, Trajectory, LAST_GOOD};
pub use viscous::{vector_laplacian, viscous_dissipation};
