//! Scale-invariant energies, concentration metrics, Plancherel checks and
//! symmetry leakage over a trajectory.

pub mod energy;
pub mod fields;
pub mod series;

pub use energy::{BlockRegisters, BlockSample, DiagnosticsAccumulator, EnergyParams, Sample};
pub use fields::{
    enstrophy, l2_norm_squared, l3_mode0, lp_power_full, max_divergence, mode_energies, plancherel_check,
    quadrature_angles, symmetry_leakage, Leakage, PlancherelReport,
};
pub use series::{
    csv_header, fit_concentration, ConcentrationFit, ConcentrationReport, CsvSink, Fitted, Monitor, Row,
    RunExtremes, RunSummary,
};
