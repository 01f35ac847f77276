//! Kernels of the inverse of `L_m`, the operator itself, and numerical
//! checks of their bounds.

pub mod bounds;
pub mod evaluator;
pub mod inverse_kernel;
pub mod lm;
pub mod probe;
pub mod quadrature;

pub use evaluator::{h_series, xi_squared, KernelEvaluator};
pub use lm::{apply_lm, solve_lm, LmOperator, SOLVE_TOLERANCE};
pub use bounds::{log_grid, verify_kernel_bounds, BoundReport, BoundRow, BoundSummary, ExponentSet};
pub use inverse_kernel::{apply_lm_inverse_kernel, InverseKernelResult, KernelTable};
pub use probe::{operator_norm_probe, ProbeKind, ProbeParams};
