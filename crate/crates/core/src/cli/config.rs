//! Run configuration: a TOML document with one table per concern, flag
//! overrides applied to the raw document before it is typed, and validation
//! that lists every violated key at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::EnergyParams;
use crate::error::{Error, Result};
use crate::evolution::{max_speed_bound, StepperConfig, DEFAULT_CFL_LIMIT, DEFAULT_MAX_REFINEMENT};
use crate::grid::Grid;
use crate::kernel::SOLVE_TOLERANCE;
use crate::modes::{
    build_composite_data, GaussianRing, ProfilePair, SwirlCompletion, VelocityModeSet, CONSTRAINT_TOLERANCE,
};

/// Relative paths in `output.dir` resolve under this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "CYLNS_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub lz: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nr: 128,
            nz: 128,
            rmax: 4.0,
            lz: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "K")]
    pub k: usize,
    /// Run in a base-1 container holding `K·N` modes, so that
    /// `2π/N`-periodicity is a measured property rather than built in.
    pub base_one: bool,
}

impl Default for ModesSection {
    fn default() -> Self {
        ModesSection {
            n: 8,
            k: 6,
            base_one: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    /// Fixed step; when absent it follows from `cfl` and the initial speed.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub t_final: f64,
    pub checkpoint_every: u64,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            dt: None,
            cfl: 0.4,
            t_final: 0.5,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(rename = "N")]
    pub n: u32,
    pub amplitude: f64,
    pub r0: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub profile: String,
    pub amplitude: f64,
    pub r0: f64,
    pub sigma: f64,
    /// Frequency of the leading block; defaults to `modes.N`.
    #[serde(rename = "N")]
    pub n: Option<u32>,
    /// `discrete` or `analytic` swirl completion.
    pub completion: String,
    /// Further rings at other frequencies.
    pub blocks: Vec<BlockSpec>,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            profile: "gaussian-ring".into(),
            amplitude: 1.0,
            r0: 2.0,
            sigma: 0.5,
            n: None,
            completion: "discrete".into(),
            blocks: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagSection {
    pub p: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    /// Steps between time-series rows.
    pub cadence: u64,
}

impl Default for DiagSection {
    fn default() -> Self {
        let e = EnergyParams::default();
        DiagSection {
            p: e.p,
            alpha_p: e.alpha_p,
            beta_p: e.beta_p,
            cadence: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    /// Refinement sweeps per implicit or pressure solve.
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: SOLVE_TOLERANCE,
            max_iter: DEFAULT_MAX_REFINEMENT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// `csv` or `json` for the time series.
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs/default"),
            format: "csv".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridSection,
    pub modes: ModesSection,
    pub time: TimeSection,
    pub init: InitSection,
    pub diag: DiagSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `section.key = value` in a raw document, creating tables on the way.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override `{assignment}` is not of the form key=value")]))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(vec![format!("override key `{path}` is malformed")]));
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(vec![format!("override `{path}`: `{k}` is not a table")]))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn from_table(doc: toml::Table) -> Result<Self> {
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))
    }

    /// Reads a config file and applies `key=value` overrides on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut doc = parse_table(&text)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_table(doc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// Container base frequency, truncation and the periodicity to monitor.
    pub fn container(&self) -> (u32, usize, usize) {
        let m = &self.modes;
        if m.base_one {
            (1, m.k * m.n as usize, m.n as usize)
        } else {
            (m.n, m.k, 1)
        }
    }

    pub fn energy_params(&self) -> EnergyParams {
        EnergyParams {
            p: self.diag.p,
            alpha_p: self.diag.alpha_p,
            beta_p: self.diag.beta_p,
        }
    }

    fn completion(&self) -> Option<SwirlCompletion> {
        match self.init.completion.as_str() {
            "discrete" => Some(SwirlCompletion::Discrete),
            "analytic" => Some(SwirlCompletion::Analytic),
            _ => None,
        }
    }

    /// All rings as `(N, amplitude, r0, sigma)`, leading block first.
    pub fn blocks(&self) -> Vec<(u32, f64, f64, f64)> {
        let i = &self.init;
        let mut out = vec![(i.n.unwrap_or(self.modes.n), i.amplitude, i.r0, i.sigma)];
        out.extend(i.blocks.iter().map(|b| (b.n, b.amplitude, b.r0, b.sigma)));
        out
    }

    /// Every violated key, checked independently of the others.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let g = &self.grid;
        if g.nr < 4 {
            bad.push(format!("grid.nr = {} must be at least 4", g.nr));
        }
        if g.nz < 4 {
            bad.push(format!("grid.nz = {} must be at least 4", g.nz));
        }
        if !(g.rmax > 0.0 && g.rmax.is_finite()) {
            bad.push(format!("grid.rmax = {} must be positive", g.rmax));
        }
        if !(g.lz > 0.0 && g.lz.is_finite()) {
            bad.push(format!("grid.lz = {} must be positive", g.lz));
        }
        let m = &self.modes;
        if m.n == 0 {
            bad.push("modes.N must be at least 1".into());
        }
        if m.k == 0 {
            bad.push("modes.K must be at least 1".into());
        }
        let t = &self.time;
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bad.push(format!("time.dt = {dt} must be positive"));
            }
        } else if !(t.cfl > 0.0 && t.cfl <= DEFAULT_CFL_LIMIT) {
            bad.push(format!("time.cfl = {} must lie in (0, {DEFAULT_CFL_LIMIT}]", t.cfl));
        }
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            bad.push(format!("time.t_final = {} must be non-negative", t.t_final));
        }
        let i = &self.init;
        if i.profile != "gaussian-ring" {
            bad.push(format!("init.profile = {:?} is unknown (expected \"gaussian-ring\")", i.profile));
        }
        if self.completion().is_none() {
            bad.push(format!(
                "init.completion = {:?} is unknown (expected \"discrete\" or \"analytic\")",
                i.completion
            ));
        }
        let (n_base, k_max, _) = self.container();
        let mut seen = Vec::new();
        for (idx, (n, amp, r0, sigma)) in self.blocks().into_iter().enumerate() {
            let key = if idx == 0 {
                "init".to_string()
            } else {
                format!("init.blocks[{}]", idx - 1)
            };
            if !amp.is_finite() {
                bad.push(format!("{key}.amplitude = {amp} must be finite"));
            }
            if !(sigma > 0.0 && sigma.is_finite()) {
                bad.push(format!("{key}.sigma = {sigma} must be positive"));
            } else {
                if !(r0 > 3.0 * sigma) {
                    bad.push(format!("{key}.r0 = {r0} must exceed 3 sigma = {}", 3.0 * sigma));
                }
                if r0 + 3.0 * sigma > g.rmax {
                    bad.push(format!("{key}.r0 + 3 sigma = {} exceeds grid.rmax = {}", r0 + 3.0 * sigma, g.rmax));
                }
                if 6.0 * sigma > g.lz {
                    bad.push(format!("{key}.sigma: ring height 6 sigma = {} exceeds grid.lz = {}", 6.0 * sigma, g.lz));
                }
            }
            if m.n > 0 && m.k > 0 {
                if n == 0 || n % m.n != 0 {
                    bad.push(format!("{key}.N = {n} must be a positive multiple of modes.N = {}", m.n));
                } else if (n / n_base) as usize > k_max {
                    bad.push(format!("{key}.N = {n} exceeds the largest resolved frequency {}", k_max as u32 * n_base));
                } else if seen.contains(&n) {
                    bad.push(format!("{key}.N = {n} repeats another block's frequency"));
                }
            }
            seen.push(n);
        }
        if let Err(Error::Config(list)) = self.energy_params().validate() {
            bad.extend(list);
        }
        if self.diag.cadence == 0 {
            bad.push("diag.cadence must be at least 1".into());
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            bad.push(format!("solver.tol = {} must lie in (0, 1)", s.tol));
        }
        if s.max_iter == 0 {
            bad.push("solver.max_iter must be at least 1".into());
        }
        if !matches!(self.output.format.as_str(), "csv" | "json") {
            bad.push(format!(
                "output.format = {:?} is unknown (expected \"csv\" or \"json\")",
                self.output.format
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nr, self.grid.nz, self.grid.rmax, self.grid.lz)
    }

    /// The initial state described by `init`, in the configured container.
    pub fn initial_state(&self) -> Result<VelocityModeSet> {
        self.validate()?;
        let grid = self.grid()?;
        let completion = self.completion().expect("validated");
        let blocks = self
            .blocks()
            .into_iter()
            .map(|(n, amp, r0, sigma)| {
                let p: ProfilePair = GaussianRing::new(amp, r0, sigma)?.profiles(grid, n, completion)?;
                Ok((p, n))
            })
            .collect::<Result<Vec<_>>>()?;
        let (n_base, k_max, _) = self.container();
        Ok(build_composite_data(grid, &blocks, None, n_base, k_max, CONSTRAINT_TOLERANCE)?.state)
    }

    /// Stepper settings for `initial`; a configured `dt` whose Courant
    /// number exceeds the stepper's limit is a configuration error.
    pub fn stepper_config(&self, initial: &VelocityModeSet) -> Result<StepperConfig> {
        let h = initial.grid().min_spacing();
        let vmax = max_speed_bound(initial);
        let dt = match self.time.dt {
            Some(dt) => {
                let cfl = dt * vmax / h;
                if cfl > DEFAULT_CFL_LIMIT {
                    return Err(Error::Config(vec![format!(
                        "time.dt = {dt} gives an initial Courant number {cfl:.3} above {DEFAULT_CFL_LIMIT}; \
                         use dt <= {:e}",
                        DEFAULT_CFL_LIMIT * h / vmax
                    )]));
                }
                dt
            }
            None if vmax > 0.0 => self.time.cfl * h / vmax,
            // a quiescent start has no velocity scale; take one cell per unit time
            None => self.time.cfl * h,
        };
        let mut cfg = StepperConfig::new(dt, self.time.t_final);
        cfg.checkpoint_every = self.time.checkpoint_every;
        cfg.solver_tol = self.solver.tol;
        cfg.max_refinement = self.solver.max_iter;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Where the run writes its artefacts.
    pub fn run_dir(&self) -> PathBuf {
        resolve_output(&self.output.dir)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(vec![format!("malformed config: {}", e.message())]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = RunConfig::default();
        c.grid.nr = 2;
        c.modes.k = 0;
        c.diag.p = 3.0;
        c.output.format = "hdf5".into();
        c.init.sigma = -1.0;
        let Err(Error::Config(list)) = c.validate() else {
            panic!("expected a config error")
        };
        for key in ["grid.nr", "modes.K", "diag.p", "output.format", "init.sigma"] {
            assert!(list.iter().any(|m| m.contains(key)), "{key} missing from {list:?}");
        }
    }

    #[test]
    fn overrides_are_typed() {
        let mut doc = toml::Table::new();
        apply_override(&mut doc, "grid.nr=32").unwrap();
        apply_override(&mut doc, "modes.base_one = true").unwrap();
        apply_override(&mut doc, "output.dir=runs/x").unwrap();
        let c = RunConfig::from_table(doc).unwrap();
        assert_eq!(c.grid.nr, 32);
        assert!(c.modes.base_one);
        assert_eq!(c.output.dir, PathBuf::from("runs/x"));
        assert!(apply_override(&mut toml::Table::new(), "grid.nr").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[grid]\nnrr = 4\n").unwrap_err();
        assert!(err.to_string().contains("nrr"), "{err}");
    }

    #[test]
    fn roundtrips_through_toml() {
        let mut c = RunConfig::default();
        c.init.blocks.push(BlockSpec {
            n: 16,
            amplitude: 0.5,
            r0: 2.0,
            sigma: 0.4,
        });
        c.time.dt = Some(1e-3);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn base_one_container() {
        let mut c = RunConfig::default();
        c.modes.base_one = true;
        assert_eq!(c.container(), (1, 48, 8));
    }
}
