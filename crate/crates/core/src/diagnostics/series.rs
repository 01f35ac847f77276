//! Time-series rows, the run monitor and end-of-run summaries.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use super::energy::{DiagnosticsAccumulator, EnergyParams};
use super::fields::{enstrophy, max_divergence, mode_energies, plancherel_check, symmetry_leakage};
use crate::error::{Error, Result};
use crate::evolution::{Observer, StepInfo};
use crate::modes::VelocityModeSet;
use crate::stats::{loglog_slope, ols};

/// One CSV row. `ke_total` is `½‖u‖²`; `e_mode` holds `½‖u_k‖²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub ke_total: f64,
    pub enstrophy: f64,
    pub l3_u0: f64,
    pub l5_u_running: f64,
    pub ep_rz: f64,
    pub ep_th: f64,
    pub d: f64,
    pub odevity_leak: f64,
    pub periodicity_leak: f64,
    pub div_max: f64,
    pub e_mode: Vec<f64>,
}

pub fn csv_header(k_max: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "ke_total", "enstrophy", "l3_u0", "l5_u_running", "Ep_rz", "Ep_th", "D",
        "odevity_leak", "periodicity_leak", "div_max",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..=k_max).map(|k| format!("e_mode_{k}")));
    h
}

impl Row {
    fn fields(&self) -> Vec<String> {
        let mut f: Vec<String> = [
            self.t,
            self.ke_total,
            self.enstrophy,
            self.l3_u0,
            self.l5_u_running,
            self.ep_rz,
            self.ep_th,
            self.d,
            self.odevity_leak,
            self.periodicity_leak,
            self.div_max,
        ]
        .iter()
        .map(|v| format!("{v:e}"))
        .collect();
        f.extend(self.e_mode.iter().map(|v| format!("{v:e}")));
        f
    }
}

pub struct CsvSink {
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: &Path, k_max: usize) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer.write_record(csv_header(k_max)).map_err(|e| csv_error(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(CsvSink { writer })
    }

    pub fn write(&mut self, row: &Row) -> Result<()> {
        self.writer
            .write_record(row.fields())
            .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        self.writer.flush().map_err(|e| Error::io("time series", e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv {}: {e}", path.display()))
}

/// Worst values seen over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunExtremes {
    /// `max_t |‖u‖² + 2∫‖∇u‖² − ‖u_in‖²| / ‖u_in‖²`, the dissipation
    /// integrated at step midpoints.
    pub energy_budget: f64,
    pub plancherel: f64,
    pub odevity_leak: f64,
    pub periodicity_leak: f64,
    pub div_max: f64,
    /// Energy share of the two highest modes.
    pub top_mode_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n_base: u32,
    pub horizon: f64,
    pub u0_l3_sup: f64,
    pub tail_sum: f64,
    pub l5_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fitted {
    /// Exponent of `ke_total ∝ exp(rate · t)` over the run.
    pub ke_decay_rate: Option<f64>,
    /// Exponent of `e_mode_k ∝ k^a` over the populated modes at the end.
    pub mode_energy_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub dt: f64,
    pub t_final: f64,
    pub energy_params: EnergyParams,
    pub extremes: RunExtremes,
    pub concentration: ConcentrationReport,
    pub ep_rz: f64,
    pub ep_th: f64,
    pub d: f64,
    pub final_row: Option<Row>,
    pub fitted: Fitted,
}

/// Observer that feeds the accumulator on every step and emits a row at
/// step 0, every `cadence` steps and the last step.
pub struct Monitor {
    acc: DiagnosticsAccumulator,
    cadence: u64,
    total_steps: u64,
    period: usize,
    initial_l2: Option<f64>,
    dissipated: f64,
    extremes: RunExtremes,
    rows: Vec<Row>,
    sink: Option<CsvSink>,
    last: Option<(u64, f64)>,
    ke_track: Vec<(f64, f64)>,
}

impl Monitor {
    /// `period` is the mode-support period checked for leakage (1 disables).
    pub fn new(params: EnergyParams, n_base: u32, k_max: usize, total_steps: u64, cadence: u64, period: usize) -> Result<Self> {
        if cadence == 0 {
            return Err(Error::Config(vec!["diag.cadence must be at least 1".into()]));
        }
        Ok(Monitor {
            acc: DiagnosticsAccumulator::new(params, n_base, k_max)?,
            cadence,
            total_steps,
            period: period.max(1),
            initial_l2: None,
            dissipated: 0.0,
            extremes: RunExtremes::default(),
            rows: Vec::new(),
            sink: None,
            last: None,
            ke_track: Vec::new(),
        })
    }

    pub fn with_csv(mut self, sink: CsvSink) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn accumulator(&self) -> &DiagnosticsAccumulator {
        &self.acc
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn extremes(&self) -> &RunExtremes {
        &self.extremes
    }

    fn row(&mut self, state: &VelocityModeSet) -> Row {
        let e: Vec<f64> = mode_energies(state).iter().map(|v| 0.5 * v).collect();
        let ke: f64 = e.iter().sum();
        let leak = symmetry_leakage(state, self.period);
        let div = max_divergence(state);
        let plan = plancherel_check(state).max();
        let x = &mut self.extremes;
        x.plancherel = x.plancherel.max(plan);
        x.odevity_leak = x.odevity_leak.max(leak.odevity);
        x.periodicity_leak = x.periodicity_leak.max(leak.periodicity);
        x.div_max = x.div_max.max(div);
        if ke > 0.0 && e.len() > 2 {
            let top: f64 = e[e.len() - 2..].iter().sum();
            x.top_mode_fraction = x.top_mode_fraction.max(top / ke);
        }
        let sample = self.acc.last_sample().expect("recorded before the row");
        Row {
            t: state.time(),
            ke_total: ke,
            enstrophy: enstrophy(state),
            l3_u0: sample.l3_u0,
            l5_u_running: self.acc.l5_norm(),
            ep_rz: self.acc.ep_rz(),
            ep_th: self.acc.ep_theta(),
            d: self.acc.d,
            odevity_leak: leak.odevity,
            periodicity_leak: leak.periodicity,
            div_max: div,
            e_mode: e,
        }
    }

    pub fn summary(&self) -> RunSummary {
        let (steps, dt) = self.last.unwrap_or((0, 0.0));
        let final_row = self.rows.last().cloned();
        let t_final = final_row.as_ref().map_or(0.0, |r| r.t);
        let (ts, lke): (Vec<f64>, Vec<f64>) = self
            .ke_track
            .iter()
            .filter(|(_, k)| *k > 0.0)
            .map(|(t, k)| (*t, k.ln()))
            .unzip();
        let mode_energy_slope = final_row.as_ref().and_then(|r| {
            let ks: Vec<f64> = (1..r.e_mode.len()).map(|k| k as f64).collect();
            loglog_slope(&ks, &r.e_mode[1..])
        });
        RunSummary {
            steps,
            dt,
            t_final,
            energy_params: *self.acc.params(),
            extremes: self.extremes,
            concentration: ConcentrationReport {
                n_base: self.acc.n_base(),
                horizon: t_final,
                u0_l3_sup: self.acc.l3_u0_sup,
                tail_sum: self.acc.tail_sum(),
                l5_norm: self.acc.l5_norm(),
            },
            ep_rz: self.acc.ep_rz(),
            ep_th: self.acc.ep_theta(),
            d: self.acc.d,
            final_row,
            fitted: Fitted {
                ke_decay_rate: ols(&ts, &lke).map(|(s, _)| s),
                mode_energy_slope,
            },
        }
    }
}

impl Observer for Monitor {
    fn observe(&mut self, info: &StepInfo<'_>) -> Result<()> {
        let s = info.state;
        self.acc.record(s)?;
        let l2: f64 = mode_energies(s).iter().sum();
        let initial = *self.initial_l2.get_or_insert(l2);
        self.dissipated += info.dissipation;
        if initial > 0.0 {
            let gap = (l2 + 2.0 * self.dissipated - initial).abs() / initial;
            self.extremes.energy_budget = self.extremes.energy_budget.max(gap);
        }
        self.ke_track.push((s.time(), 0.5 * l2));
        self.last = Some((info.step, info.dt));
        if info.step.is_multiple_of(self.cadence) || info.step == self.total_steps {
            let row = self.row(s);
            if let Some(sink) = self.sink.as_mut() {
                sink.write(&row)?;
            }
            self.rows.push(row);
        }
        Ok(())
    }
}

/// Exponent fits of a sweep over the base frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationFit {
    pub n: Vec<u32>,
    pub u0_l3_sup: Vec<f64>,
    pub tail_sum: Vec<f64>,
    pub u0_l3_exponent: Option<f64>,
    pub tail_sum_exponent: Option<f64>,
    pub u0_strictly_decreasing: bool,
    pub tail_decreasing: bool,
}

/// Fits `sup_t ‖u_0‖_{L³} ∝ N^a` and the tail sum likewise, by least squares
/// in log–log coordinates (at least three runs).
pub fn fit_concentration(reports: &[ConcentrationReport]) -> Result<ConcentrationFit> {
    if reports.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "an exponent fit needs at least 3 runs, got {}",
            reports.len()
        )));
    }
    let mut r: Vec<&ConcentrationReport> = reports.iter().collect();
    r.sort_by_key(|x| x.n_base);
    let n: Vec<u32> = r.iter().map(|x| x.n_base).collect();
    let nf: Vec<f64> = n.iter().map(|v| *v as f64).collect();
    let u0: Vec<f64> = r.iter().map(|x| x.u0_l3_sup).collect();
    let tail: Vec<f64> = r.iter().map(|x| x.tail_sum).collect();
    Ok(ConcentrationFit {
        u0_l3_exponent: loglog_slope(&nf, &u0),
        tail_sum_exponent: loglog_slope(&nf, &tail),
        u0_strictly_decreasing: u0.windows(2).all(|w| w[1] < w[0]),
        tail_decreasing: tail.windows(2).all(|w| w[1] <= w[0]),
        n,
        u0_l3_sup: u0,
        tail_sum: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{StepperConfig, Trajectory};
    use crate::grid::Grid;

    #[test]
    fn zero_horizon_writes_header_and_one_row() {
        let g = Grid::new(8, 8, 2.0, 2.0).unwrap();
        let s = VelocityModeSet::zeros(g, 4, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let mut mon = Monitor::new(EnergyParams::default(), 4, 2, 0, 1, 1)
            .unwrap()
            .with_csv(CsvSink::create(&path, 2).unwrap());
        let mut t = Trajectory::start(&s, StepperConfig::new(0.1, 0.0)).unwrap();
        t.run(&mut mon, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("t,ke_total,enstrophy,l3_u0,l5_u_running,Ep_rz,Ep_th,D,"));
        assert!(lines[0].ends_with("e_mode_0,e_mode_1,e_mode_2"));
        let summary = mon.summary();
        assert_eq!(summary.concentration.u0_l3_sup, 0.0);
        assert_eq!(summary.extremes, RunExtremes::default());
    }

    #[test]
    fn fit_recovers_power_law() {
        let reports: Vec<ConcentrationReport> = [4u32, 8, 16]
            .iter()
            .map(|&n| ConcentrationReport {
                n_base: n,
                horizon: 1.0,
                u0_l3_sup: (n as f64).powf(-0.2),
                tail_sum: (n as f64).powf(-0.5),
                l5_norm: 1.0,
            })
            .collect();
        let f = fit_concentration(&reports).unwrap();
        assert!((f.u0_l3_exponent.unwrap() + 0.2).abs() < 1e-12);
        assert!(f.u0_strictly_decreasing && f.tail_decreasing);
        assert!(fit_concentration(&reports[..2]).is_err());
    }
}
