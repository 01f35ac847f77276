//! Numerical suprema of weighted kernel quantities and their comparison
//! against the claimed shapes in `m`.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use super::evaluator::KernelEvaluator;
use crate::error::{Error, Result};

/// Ratio allowed between the normalized suprema of different `m` before a
/// family is declared to grow.
pub const GROWTH_FACTOR: f64 = 10.0;

/// One weighted kernel inequality with its exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family")]
pub enum ExponentSet {
    /// `s^{m+1/2} |F_m(s)| <= 4^m π` for `s > 4`.
    LargeSLiteral,
    /// `s^α |F_m| <= C α^{-1} ln(2+m) + 4^m π`, `0 < α <= m + 1/2`.
    GlobalPower { alpha: f64 },
    /// `s^β |F_m'| + s^γ |F_m''| <= C 4^m`, `1 <= β <= m + 3/2`, `2 <= γ <= m + 5/2`.
    GlobalDeriv { beta: f64, gamma: f64 },
    /// `s^α |F_m| <= C/m`, `m >= 3`, `1 <= α <= 7/2`.
    InverseM { alpha: f64 },
    /// `s^β |F_m'| + s^γ |F_m''| <= C/m`, `m >= 3`, `2 <= β <= 9/2`, `3 <= γ <= 11/2`.
    InverseMDeriv { beta: f64, gamma: f64 },
    /// `s^ᾱ |F_m| <= C ᾱ^{-1} ln m`, `m >= 3`, `0 < ᾱ <= 5/2`.
    LogM { alpha: f64 },
    /// `s^β |F_m'| + s^γ |F_m''| <= C ln m`, `m >= 3`, `1 <= β <= 7/2`, `2 <= γ <= 9/2`.
    LogMDeriv { beta: f64, gamma: f64 },
    /// `s^δ |F_m| + s^{1+δ} |F_m'| + s^{2+δ} |F_m''| <= C m^{-δ'}`,
    /// `m >= 3`, `0 < δ' < δ < 1`.
    FractionalDecay { delta: f64, delta_prime: f64 },
}

impl ExponentSet {
    pub fn family(&self) -> &'static str {
        match self {
            ExponentSet::LargeSLiteral => "large_s_literal",
            ExponentSet::GlobalPower { .. } => "global_power",
            ExponentSet::GlobalDeriv { .. } => "global_deriv",
            ExponentSet::InverseM { .. } => "inverse_m",
            ExponentSet::InverseMDeriv { .. } => "inverse_m_deriv",
            ExponentSet::LogM { .. } => "log_m",
            ExponentSet::LogMDeriv { .. } => "log_m_deriv",
            ExponentSet::FractionalDecay { .. } => "fractional_decay",
        }
    }

    pub fn exponent_label(&self, m: u32) -> String {
        match *self {
            ExponentSet::LargeSLiteral => format!("alpha={}", m as f64 + 0.5),
            ExponentSet::GlobalPower { alpha }
            | ExponentSet::InverseM { alpha }
            | ExponentSet::LogM { alpha } => format!("alpha={alpha}"),
            ExponentSet::GlobalDeriv { beta, gamma }
            | ExponentSet::InverseMDeriv { beta, gamma }
            | ExponentSet::LogMDeriv { beta, gamma } => format!("beta={beta};gamma={gamma}"),
            ExponentSet::FractionalDecay { delta, delta_prime } => {
                format!("delta={delta};delta_prime={delta_prime}")
            }
        }
    }

    pub fn claimed_form(&self) -> &'static str {
        match self {
            ExponentSet::LargeSLiteral => "4^m*pi",
            ExponentSet::GlobalPower { .. } => "C*ln(2+m)/alpha+4^m*pi",
            ExponentSet::GlobalDeriv { .. } => "C*4^m",
            ExponentSet::InverseM { .. } | ExponentSet::InverseMDeriv { .. } => "C/m",
            ExponentSet::LogM { .. } => "C*ln(m)/alpha",
            ExponentSet::LogMDeriv { .. } => "C*ln(m)",
            ExponentSet::FractionalDecay { .. } => "C*m^(-delta_prime)",
        }
    }

    fn needs_derivatives(&self) -> bool {
        matches!(
            self,
            ExponentSet::GlobalDeriv { .. }
                | ExponentSet::InverseMDeriv { .. }
                | ExponentSet::LogMDeriv { .. }
                | ExponentSet::FractionalDecay { .. }
        )
    }

    fn range_error(&self, detail: String) -> Error {
        Error::Range {
            bound: self.family().to_string(),
            detail,
        }
    }

    /// Checks the exponents against the range the inequality is stated for.
    pub fn validate(&self, m: u32) -> Result<()> {
        let mf = m as f64;
        let within = |x: f64, lo: f64, hi: f64| x >= lo && x <= hi;
        let need_m3 = || {
            if m < 3 {
                Err(self.range_error(format!("requires m >= 3, got m = {m}")))
            } else {
                Ok(())
            }
        };
        match *self {
            ExponentSet::LargeSLiteral => Ok(()),
            ExponentSet::GlobalPower { alpha } => {
                if alpha > 0.0 && alpha <= mf + 0.5 {
                    Ok(())
                } else {
                    Err(self.range_error(format!("0 < alpha <= m + 1/2 violated: alpha = {alpha}, m = {m}")))
                }
            }
            ExponentSet::GlobalDeriv { beta, gamma } => {
                if !within(beta, 1.0, mf + 1.5) {
                    Err(self.range_error(format!("1 <= beta <= m + 3/2 violated: beta = {beta}, m = {m}")))
                } else if !within(gamma, 2.0, mf + 2.5) {
                    Err(self.range_error(format!("2 <= gamma <= m + 5/2 violated: gamma = {gamma}, m = {m}")))
                } else {
                    Ok(())
                }
            }
            ExponentSet::InverseM { alpha } => {
                need_m3()?;
                if within(alpha, 1.0, 3.5) {
                    Ok(())
                } else {
                    Err(self.range_error(format!("1 <= alpha <= 7/2 violated: alpha = {alpha}")))
                }
            }
            ExponentSet::InverseMDeriv { beta, gamma } => {
                need_m3()?;
                if !within(beta, 2.0, 4.5) {
                    Err(self.range_error(format!("2 <= beta <= 9/2 violated: beta = {beta}")))
                } else if !within(gamma, 3.0, 5.5) {
                    Err(self.range_error(format!("3 <= gamma <= 11/2 violated: gamma = {gamma}")))
                } else {
                    Ok(())
                }
            }
            ExponentSet::LogM { alpha } => {
                need_m3()?;
                if alpha > 0.0 && alpha <= 2.5 {
                    Ok(())
                } else {
                    Err(self.range_error(format!("0 < alpha <= 5/2 violated: alpha = {alpha}")))
                }
            }
            ExponentSet::LogMDeriv { beta, gamma } => {
                need_m3()?;
                if !within(beta, 1.0, 3.5) {
                    Err(self.range_error(format!("1 <= beta <= 7/2 violated: beta = {beta}")))
                } else if !within(gamma, 2.0, 4.5) {
                    Err(self.range_error(format!("2 <= gamma <= 9/2 violated: gamma = {gamma}")))
                } else {
                    Ok(())
                }
            }
            ExponentSet::FractionalDecay { delta, delta_prime } => {
                need_m3()?;
                if 0.0 < delta_prime && delta_prime < delta && delta < 1.0 {
                    Ok(())
                } else {
                    Err(self.range_error(format!(
                        "0 < delta_prime < delta < 1 violated: delta = {delta}, delta_prime = {delta_prime}"
                    )))
                }
            }
        }
    }

    /// Weighted left-hand side at one `s`.
    fn lhs(&self, m: u32, s: f64, f: f64, d1: f64, d2: f64) -> f64 {
        match *self {
            ExponentSet::LargeSLiteral => s.powf(m as f64 + 0.5) * f.abs(),
            ExponentSet::GlobalPower { alpha }
            | ExponentSet::InverseM { alpha }
            | ExponentSet::LogM { alpha } => s.powf(alpha) * f.abs(),
            ExponentSet::GlobalDeriv { beta, gamma }
            | ExponentSet::InverseMDeriv { beta, gamma }
            | ExponentSet::LogMDeriv { beta, gamma } => {
                s.powf(beta) * d1.abs() + s.powf(gamma) * d2.abs()
            }
            ExponentSet::FractionalDecay { delta, .. } => {
                s.powf(delta) * f.abs()
                    + s.powf(1.0 + delta) * d1.abs()
                    + s.powf(2.0 + delta) * d2.abs()
            }
        }
    }

    /// The measured supremum divided by the `m`-dependent part of the claim,
    /// i.e. the constant the claim would need at this `m`.
    fn normalize(&self, m: u32, sup: f64) -> f64 {
        let mf = m as f64;
        let four_m_pi = 4f64.powi(m as i32) * std::f64::consts::PI;
        match *self {
            ExponentSet::LargeSLiteral => sup / four_m_pi,
            ExponentSet::GlobalPower { alpha } => sup / ((2.0 + mf).ln() / alpha + four_m_pi),
            ExponentSet::GlobalDeriv { .. } => sup / 4f64.powi(m as i32),
            ExponentSet::InverseM { .. } | ExponentSet::InverseMDeriv { .. } => sup * mf,
            ExponentSet::LogM { alpha } => sup * alpha / mf.ln(),
            ExponentSet::LogMDeriv { .. } => sup / mf.ln(),
            ExponentSet::FractionalDecay { delta_prime, .. } => sup * mf.powf(delta_prime),
        }
    }
}

impl fmt::Display for ExponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family())?;
        match *self {
            ExponentSet::LargeSLiteral => Ok(()),
            _ => write!(f, "[{}]", self.exponent_label(0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub lemma: String,
    pub m: u32,
    pub exponent: String,
    pub measured_sup: f64,
    pub claimed_form: String,
    pub constant: f64,
    pub pass: bool,
}

/// Per-family verdict, written to the JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub lemma: String,
    pub exponent: String,
    pub m_min: u32,
    pub m_max: u32,
    /// Largest normalized supremum (the best-fit constant).
    pub constant: f64,
    /// Largest over smallest normalized supremum across `m`.
    pub spread: f64,
    /// Fitted log–log slope in `m`, when meaningful.
    pub slope: Option<f64>,
    pub claimed_slope: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundReport {
    pub m_list: Vec<u32>,
    pub s_grid: Vec<f64>,
    pub rows: Vec<BoundRow>,
    pub summaries: Vec<BoundSummary>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.summaries.iter().all(|s| s.pass) && self.rows.iter().all(|r| r.pass)
    }

    pub fn merge(&mut self, other: BoundReport) {
        for m in other.m_list {
            if !self.m_list.contains(&m) {
                self.m_list.push(m);
            }
        }
        if self.s_grid.is_empty() {
            self.s_grid = other.s_grid;
        }
        self.rows.extend(other.rows);
        self.summaries.extend(other.summaries);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::InvalidInput(format!("csv serialisation failed: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "m_list": self.m_list,
            "s_min": self.s_grid.first(),
            "s_max": self.s_grid.last(),
            "s_points": self.s_grid.len(),
            "all_pass": self.all_pass(),
            "families": self.summaries,
        })
    }
}

/// Log-spaced grid with `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Scans every exponent set over `m_list × s_grid` and reports suprema,
/// best-fit constants and pass flags.
///
/// A family passes when no normalized supremum exceeds [`GROWTH_FACTOR`]
/// times the one at the first listed `m` (the claimed shape is bounded and
/// does not grow); the literal large-`s` bound must hold with constant one.
/// Normalized suprema are free to decay: `m s^α |F_m|` falls like
/// `m^{1-2α}`, so the spread between largest and smallest is reported but
/// not judged.
pub fn verify_kernel_bounds(
    evaluator: &KernelEvaluator,
    m_list: &[u32],
    s_grid: &[f64],
    exponent_sets: &[ExponentSet],
) -> Result<BoundReport> {
    if m_list.is_empty() || s_grid.is_empty() {
        return Err(Error::InvalidInput("empty m list or s grid".into()));
    }
    if let Some(bad) = s_grid.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!("s grid must be positive, found {bad}")));
    }
    for set in exponent_sets {
        for &m in m_list {
            set.validate(m)?;
        }
        if *set == ExponentSet::LargeSLiteral && !s_grid.iter().any(|&s| s > 4.0) {
            return Err(set.range_error("requires grid points with s > 4".into()));
        }
    }

    let need_d = exponent_sets.iter().any(|e| e.needs_derivatives());
    let mut report = BoundReport {
        m_list: m_list.to_vec(),
        s_grid: s_grid.to_vec(),
        ..Default::default()
    };
    // normalized suprema per set, in m_list order
    let mut normalized = vec![Vec::with_capacity(m_list.len()); exponent_sets.len()];
    let mut sups = vec![Vec::with_capacity(m_list.len()); exponent_sets.len()];

    for &m in m_list {
        let mut f = Vec::with_capacity(s_grid.len());
        let mut d1 = vec![0.0; s_grid.len()];
        let mut d2 = vec![0.0; s_grid.len()];
        for (k, &s) in s_grid.iter().enumerate() {
            f.push(evaluator.eval_fm(m, s)?);
            if need_d {
                d1[k] = evaluator.eval_fm_deriv(m, s, 1)?;
                d2[k] = evaluator.eval_fm_deriv(m, s, 2)?;
            }
        }
        for (idx, set) in exponent_sets.iter().enumerate() {
            let mut sup = 0.0f64;
            for (k, &s) in s_grid.iter().enumerate() {
                if *set == ExponentSet::LargeSLiteral && s <= 4.0 {
                    continue;
                }
                sup = sup.max(set.lhs(m, s, f[k], d1[k], d2[k]));
            }
            sups[idx].push(sup);
            normalized[idx].push(set.normalize(m, sup));
        }
    }

    for (idx, set) in exponent_sets.iter().enumerate() {
        let q = &normalized[idx];
        let q_max = q.iter().cloned().fold(0.0f64, f64::max);
        let q_min = q.iter().cloned().fold(f64::INFINITY, f64::min);
        let q_first = q[0];
        let row_pass = |qm: f64| match set {
            ExponentSet::LargeSLiteral => qm <= 1.0,
            _ => qm < GROWTH_FACTOR * q_first,
        };
        let mut family_pass = true;
        for (k, &m) in m_list.iter().enumerate() {
            let pass = row_pass(q[k]) && q[k].is_finite();
            family_pass &= pass;
            report.rows.push(BoundRow {
                lemma: set.family().to_string(),
                m,
                exponent: set.exponent_label(m),
                measured_sup: sups[idx][k],
                claimed_form: set.claimed_form().to_string(),
                constant: q_max,
                pass,
            });
        }
        report.summaries.push(BoundSummary {
            lemma: set.family().to_string(),
            exponent: match set {
                ExponentSet::LargeSLiteral => "alpha=m+1/2".to_string(),
                other => other.exponent_label(0),
            },
            m_min: *m_list.iter().min().unwrap(),
            m_max: *m_list.iter().max().unwrap(),
            constant: q_max,
            spread: if q_min > 0.0 { q_max / q_min } else { f64::INFINITY },
            slope: None,
            claimed_slope: None,
            pass: family_pass,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_large_s_bound_small_m() {
        let ev = KernelEvaluator::default();
        let s = log_grid(4.0001, 1e4, 60);
        let r = verify_kernel_bounds(&ev, &[0, 1, 2, 3], &s, &[ExponentSet::LargeSLiteral]).unwrap();
        assert!(r.all_pass());
        let m3 = r.rows.iter().find(|row| row.m == 3).unwrap();
        assert!(m3.measured_sup <= 64.0 * std::f64::consts::PI);
    }

    #[test]
    fn range_rejections_name_the_condition() {
        let ev = KernelEvaluator::default();
        let s = log_grid(1e-2, 1e2, 5);
        let err = verify_kernel_bounds(&ev, &[3, 4], &s, &[ExponentSet::InverseM { alpha: 0.0 }])
            .unwrap_err();
        match err {
            Error::Range { bound, detail } => {
                assert_eq!(bound, "inverse_m");
                assert!(detail.contains("1 <= alpha <= 7/2"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(verify_kernel_bounds(&ev, &[2], &s, &[ExponentSet::LogM { alpha: 1.0 }]).is_err());
        assert!(verify_kernel_bounds(&ev, &[0], &s, &[ExponentSet::GlobalPower { alpha: 0.6 }]).is_err());
        assert!(verify_kernel_bounds(
            &ev,
            &[5],
            &s,
            &[ExponentSet::FractionalDecay { delta: 0.5, delta_prime: 0.5 }]
        )
        .is_err());
        assert!(verify_kernel_bounds(&ev, &[1], &[0.5, 1.0], &[ExponentSet::LargeSLiteral]).is_err());
    }

    #[test]
    fn inverse_m_family_is_flat() {
        let ev = KernelEvaluator::default();
        let s = log_grid(1e-3, 1e4, 80);
        let ms = [3u32, 6, 12, 24];
        let r = verify_kernel_bounds(&ev, &ms, &s, &[ExponentSet::InverseM { alpha: 2.0 }]).unwrap();
        assert!(r.all_pass(), "{:?}", r.summaries);
        let csv = {
            let mut buf = Vec::new();
            r.write_csv(&mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        assert!(csv.starts_with("lemma,m,exponent,measured_sup,claimed_form,constant,pass"));
        assert_eq!(csv.lines().count(), 1 + ms.len());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e3, 7);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[6] - 1e3).abs() < 1e-9);
        assert!((g[3] - 1.0).abs() < 1e-12);
    }
}
