//! Reference tables and report comparison.
//!
//! The reference format is comma-separated text with `#` comments. The
//! header is `metric,arm,sigma2_sq,<rho_1>,...,<rho_m>` and each row gives
//! one metric (`type1`, `type2` or `loops`) for one arm and impulse power
//! across the listed impulse rates.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Arm, CellMetrics, ExperimentReport};
use crate::{Error, Result};

/// The published tables, shipped as the default reference.
pub const REFERENCE_TABLES: &str = include_str!("../../assets/reference_tables.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Type1,
    Type2,
    Loops,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Type1 => "type1",
            Metric::Type2 => "type2",
            Metric::Loops => "loops",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" => Ok(Metric::Type1),
            "type2" => Ok(Metric::Type2),
            "loops" => Ok(Metric::Loops),
            _ => Err(Error::domain(format!(
                "unknown metric `{s}` (type1, type2, loops)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub metric: Metric,
    pub arm: Arm,
    pub sigma2_sq: f64,
    pub rho: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceTables {
    pub cells: Vec<ReferenceCell>,
}

impl ReferenceTables {
    /// The tables shipped in `assets/reference_tables.csv`.
    pub fn shipped() -> Self {
        Self::parse("reference_tables.csv", REFERENCE_TABLES).expect("shipped tables parse")
    }

    pub fn get(&self, metric: Metric, arm: Arm, sigma2_sq: f64, rho: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.metric == metric && c.arm == arm && c.sigma2_sq == sigma2_sq && c.rho == rho
            })
            .map(|c| c.value)
    }

    pub fn parse(source_name: &str, text: &str) -> Result<Self> {
        let mut rhos: Option<Vec<f64>> = None;
        let mut cells = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |col: usize, msg: String| Error::parse(source_name, line_no, col, msg);
            let number = |col: usize| -> Result<f64> {
                fields[col - 1]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(col, format!("invalid number `{}`", fields[col - 1])))
            };

            let Some(rhos) = rhos.as_ref() else {
                if fields.len() < 4 || fields[..3] != ["metric", "arm", "sigma2_sq"] {
                    return Err(err(
                        1,
                        "expected header `metric,arm,sigma2_sq,<rho>...`".into(),
                    ));
                }
                rhos = Some((4..=fields.len()).map(number).collect::<Result<_>>()?);
                continue;
            };
            if fields.len() != rhos.len() + 3 {
                return Err(err(
                    fields.len().min(rhos.len() + 3) + 1,
                    format!("expected {} fields, found {}", rhos.len() + 3, fields.len()),
                ));
            }
            let metric = fields[0]
                .parse::<Metric>()
                .map_err(|e| err(1, e.to_string()))?;
            let arm = fields[1]
                .parse::<Arm>()
                .map_err(|e| err(2, e.to_string()))?;
            let sigma2_sq = number(3)?;
            for (j, &rho) in rhos.iter().enumerate() {
                cells.push(ReferenceCell {
                    metric,
                    arm,
                    sigma2_sq,
                    rho,
                    value: number(4 + j)?,
                });
            }
        }
        if rhos.is_none() {
            return Err(Error::parse(source_name, 1, 1, "missing header row"));
        }
        Ok(Self { cells })
    }
}

/// Acceptance bands for [`compare_tables`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// Type II passes within the larger of this relative deviation...
    pub type2_relative: f64,
    /// ...or this many pooled binomial standard errors.
    pub type2_standard_errors: f64,
    /// Type I passes within this multiplicative factor, both rates floored
    /// at one event over the pooled background count.
    pub type1_factor: f64,
    /// Loop counts pass within this multiplicative factor.
    pub loops_factor: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            type2_relative: 0.30,
            type2_standard_errors: 3.0,
            type1_factor: 10.0,
            loops_factor: 2.0,
        }
    }
}

impl TolerancePolicy {
    /// Checks one measured metric against its reference value. Returns the
    /// measured value (if defined) and the verdict.
    pub fn check(&self, metric: Metric, reference: f64, m: &CellMetrics) -> (Option<f64>, bool) {
        let within_factor = |a: f64, b: f64, f: f64| a <= b * f && b <= a * f;
        match metric {
            Metric::Type2 => match m.type2_rate {
                Some(ours) => {
                    let se = (reference * (1.0 - reference) / m.impulse_count.max(1) as f64).sqrt();
                    let band =
                        (self.type2_relative * reference).max(self.type2_standard_errors * se);
                    (Some(ours), (ours - reference).abs() <= band)
                }
                None => (None, false),
            },
            Metric::Type1 => {
                let ours = m.type1_rate;
                let one_event = 1.0 / m.background_count.max(1) as f64;
                let pass = within_factor(
                    ours.max(one_event),
                    reference.max(one_event),
                    self.type1_factor,
                );
                (Some(ours), pass)
            }
            Metric::Loops => {
                let ours = m.mean_loops;
                (
                    Some(ours),
                    within_factor(ours, reference, self.loops_factor),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub metric: Metric,
    pub arm: Arm,
    pub sigma2_sq: f64,
    pub rho: f64,
    pub reference: f64,
    pub measured: Option<f64>,
    /// Type I only: false alarms per sample rather than per background sample.
    pub measured_per_sample: Option<f64>,
    /// `(measured - reference) / reference`; `None` when undefined.
    pub relative_deviation: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub policy: TolerancePolicy,
    pub rows: Vec<CellComparison>,
    /// Reference cells with no counterpart in the report.
    pub unmatched: usize,
}

impl Comparison {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_abs_relative_deviation(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.relative_deviation)
            .map(f64::abs)
            .reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison is always serializable") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut out = String::from(
            "metric,arm,sigma2_sq,rho,reference,measured,measured_per_sample,relative_deviation,pass\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.metric,
                r.arm,
                r.sigma2_sq,
                r.rho,
                r.reference,
                opt(r.measured),
                opt(r.measured_per_sample),
                opt(r.relative_deviation),
                r.pass
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
        let mut out = format!(
            "{:<6} {:<9} {:>9} {:>9} {:>11} {:>11} {:>9}  {}\n",
            "metric", "arm", "sigma2_sq", "rho", "reference", "measured", "rel.dev", "verdict"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} {:<9} {:>9.0e} {:>9.0e} {:>11.4e} {:>11} {:>9}  {}",
                r.metric.name(),
                r.arm.name(),
                r.sigma2_sq,
                r.rho,
                r.reference,
                opt(r.measured),
                r.relative_deviation
                    .map_or("-".to_string(), |d| format!("{:+.1}%", 100.0 * d)),
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "{} of {} cells within tolerance; {} reference cells not in report",
            self.passed(),
            self.rows.len(),
            self.unmatched
        );
        out
    }
}

/// Compares every reference cell that the report covers.
pub fn compare_tables(
    report: &ExperimentReport,
    reference: &ReferenceTables,
    policy: &TolerancePolicy,
) -> Comparison {
    let mut rows = Vec::new();
    let mut unmatched = 0;
    for c in &reference.cells {
        let Some(m) = report.cell(c.sigma2_sq, c.rho, c.arm) else {
            unmatched += 1;
            continue;
        };
        let (measured, pass) = policy.check(c.metric, c.value, m);
        let relative_deviation = measured.and_then(|v| {
            if c.value != 0.0 {
                Some((v - c.value) / c.value)
            } else if v == 0.0 {
                Some(0.0)
            } else {
                None
            }
        });
        rows.push(CellComparison {
            metric: c.metric,
            arm: c.arm,
            sigma2_sq: c.sigma2_sq,
            rho: c.rho,
            reference: c.value,
            measured,
            measured_per_sample: (c.metric == Metric::Type1).then_some(m.type1_rate_per_sample),
            relative_deviation,
            pass,
        });
    }
    Comparison {
        policy: *policy,
        rows,
        unmatched,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{CellReport, GridSpec, REPORT_FORMAT};
    use super::*;

    #[test]
    fn shipped_tables_parse_completely() {
        let t = ReferenceTables::shipped();
        assert_eq!(t.cells.len(), 3 * 3 * 5 * 5);
        assert_eq!(t.get(Metric::Type2, Arm::RgeSsi, 1e2, 1e-4), Some(0.3863));
        assert_eq!(t.get(Metric::Type2, Arm::RgeSsi, 1e6, 1e-2), Some(0.0053));
        assert_eq!(t.get(Metric::Type1, Arm::RgeSsi, 1e6, 1e-2), Some(2.3e-6));
        assert_eq!(t.get(Metric::Loops, Arm::RgeSsi, 1e6, 1e-2), Some(4.18));
        assert_eq!(t.get(Metric::Loops, Arm::OnlySsi, 1e2, 1e-2), Some(193.47));
        assert_eq!(t.get(Metric::Loops, Arm::OnlyRge, 1e5, 3e-3), Some(1133.3));
        assert_eq!(t.get(Metric::Type2, Arm::RgeSsi, 1e4, 1e-3), Some(0.0426));
    }

    fn parse_error(text: &str) -> (usize, usize) {
        match ReferenceTables::parse("ref.csv", text).unwrap_err() {
            Error::Parse { line, column, .. } => (line, column),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_reference_reports_location() {
        let header = "metric,arm,sigma2_sq,1e-4,1e-3\n";
        assert_eq!(parse_error("foo,bar\n"), (1, 1));
        assert_eq!(
            parse_error(&format!("{header}type2,rge_ssi,1e2,0.1,x\n")),
            (2, 5)
        );
        assert_eq!(
            parse_error(&format!("{header}type3,rge_ssi,1e2,0.1,0.2\n")),
            (2, 1)
        );
        assert_eq!(
            parse_error(&format!("{header}type2,nope,1e2,0.1,0.2\n")),
            (2, 2)
        );
        assert_eq!(
            parse_error(&format!("{header}type2,rge_ssi,1e2,0.1\n")),
            (2, 5)
        );
        assert_eq!(parse_error("# only comments\n"), (1, 1));
    }

    fn metrics(type1: f64, type2: f64, loops: f64) -> CellMetrics {
        CellMetrics {
            type1_rate: type1,
            type2_rate: Some(type2),
            type1_rate_per_sample: type1,
            mean_loops: loops,
            trials_completed: 100,
            nonconverged_trials: 0,
            type1_count: 0,
            type2_count: 0,
            background_count: 10_000_000,
            impulse_count: 10_000,
            total_loops: 0,
        }
    }

    fn report(cells: Vec<CellReport>) -> ExperimentReport {
        ExperimentReport {
            format: REPORT_FORMAT.into(),
            tool_version: "test".into(),
            spec: GridSpec {
                sigma1_sq: 1.0,
                sigma2_sq_list: vec![1e2],
                rho_list: vec![1e-4, 1e-3],
                n: 100_000,
                trials: 100,
                base_seed: 0,
                arms: vec![Arm::RgeSsi],
            },
            cells,
            wall_time_s: 0.0,
        }
    }

    const REF: &str = "metric,arm,sigma2_sq,1e-4,1e-3\n\
                       type1,rge_ssi,1e2,2e-5,3e-5\n\
                       type2,rge_ssi,1e2,0.38,0.33\n\
                       loops,rge_ssi,1e2,3.4,3.1\n";

    #[test]
    fn identical_report_passes_with_zero_deviation() {
        let r = report(vec![
            CellReport {
                sigma2_sq: 1e2,
                rho: 1e-4,
                arm: Arm::RgeSsi,
                metrics: metrics(2e-5, 0.38, 3.4),
            },
            CellReport {
                sigma2_sq: 1e2,
                rho: 1e-3,
                arm: Arm::RgeSsi,
                metrics: metrics(3e-5, 0.33, 3.1),
            },
        ]);
        let c = compare_tables(
            &r,
            &ReferenceTables::parse("r", REF).unwrap(),
            &TolerancePolicy::default(),
        );
        assert_eq!(c.rows.len(), 6);
        assert!(c.all_pass());
        assert_eq!(c.max_abs_relative_deviation(), Some(0.0));
        assert_eq!(c.unmatched, 0);
        assert_eq!(c.to_csv().lines().count(), 7);
        assert!(c.to_text().contains("6 of 6"));
    }

    #[test]
    fn far_off_cells_fail() {
        let r = report(vec![CellReport {
            sigma2_sq: 1e2,
            rho: 1e-4,
            arm: Arm::RgeSsi,
            // type2 off by 10x the 30% band, type1 off by 1000x, loops by 5x
            metrics: metrics(2e-2, 0.38 * 4.0, 17.0),
        }]);
        let c = compare_tables(
            &r,
            &ReferenceTables::parse("r", REF).unwrap(),
            &TolerancePolicy::default(),
        );
        assert_eq!(c.rows.len(), 3);
        assert_eq!(c.passed(), 0);
        assert_eq!(c.unmatched, 3);
    }

    #[test]
    fn type1_zero_reference_uses_one_event_floor() {
        let p = TolerancePolicy::default();
        let mut m = metrics(0.0, 0.1, 1.0);
        assert!(p.check(Metric::Type1, 0.0, &m).1);
        m.type1_rate = 5e-7; // five events in 10^7
        assert!(p.check(Metric::Type1, 0.0, &m).1);
        m.type1_rate = 2e-6;
        assert!(!p.check(Metric::Type1, 0.0, &m).1);
    }

    #[test]
    fn type2_band_uses_standard_errors_for_small_rates() {
        let p = TolerancePolicy::default();
        let mut m = metrics(0.0, 0.0, 1.0);
        m.impulse_count = 1000;
        // 3 * sqrt(0.005 * 0.995 / 1000) = 0.0067 > 0.3 * 0.005
        m.type2_rate = Some(0.011);
        assert!(p.check(Metric::Type2, 0.005, &m).1);
        m.type2_rate = Some(0.013);
        assert!(!p.check(Metric::Type2, 0.005, &m).1);
        m.type2_rate = None;
        assert!(!p.check(Metric::Type2, 0.005, &m).1);
    }
}
