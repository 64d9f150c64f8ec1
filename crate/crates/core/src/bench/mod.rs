//! Monte-Carlo harness over a `(sigma2_sq, rho, arm)` grid.
//!
//! Every trial draws its own seed from a stateless hash of the cell
//! coordinates and trial index, so metrics do not depend on worker count or
//! scheduling order. Error rates are pooled over trials and normalized by
//! the ground truth: Type I = false alarms / background samples, Type II =
//! misses / true impulses.

mod config;
mod reference;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{builtin_config, parse_config, parse_count, BUILTIN_CONFIGS};
pub use reference::{
    compare_tables, CellComparison, Comparison, Metric, ReferenceCell, ReferenceTables,
    TolerancePolicy, REFERENCE_TABLES,
};

use crate::detect::{its_blind, DetectorConfig, InitRule};
use crate::model::generate;
use crate::posterior::EstimatorKind;
use crate::{Error, NoiseParams, Result};

pub const REPORT_FORMAT: &str = "bg-impulse-report/1";

/// Ablation arm of the blind detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Robust background estimate with sparsity-sensitive initialization.
    RgeSsi,
    /// Ergodic background estimate with sparsity-sensitive initialization.
    OnlySsi,
    /// Robust background estimate with three-sigma initialization.
    OnlyRge,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::RgeSsi, Arm::OnlySsi, Arm::OnlyRge];

    pub fn name(self) -> &'static str {
        match self {
            Arm::RgeSsi => "rge_ssi",
            Arm::OnlySsi => "only_ssi",
            Arm::OnlyRge => "only_rge",
        }
    }

    fn code(self) -> u64 {
        match self {
            Arm::RgeSsi => 1,
            Arm::OnlySsi => 2,
            Arm::OnlyRge => 3,
        }
    }

    pub fn detector_config(self) -> DetectorConfig {
        let (estimator, init) = match self {
            Arm::RgeSsi => (EstimatorKind::Robust, InitRule::Ssi),
            Arm::OnlySsi => (EstimatorKind::Ergodic, InitRule::Ssi),
            Arm::OnlyRge => (EstimatorKind::Robust, InitRule::ThreeSigma),
        };
        DetectorConfig {
            estimator,
            init,
            ..DetectorConfig::default()
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::domain(format!("unknown arm `{s}` (rge_ssi, only_ssi, only_rge)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sigma1_sq: f64,
    pub sigma2_sq_list: Vec<f64>,
    pub rho_list: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub arms: Vec<Arm>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.n == 0 {
            return Err(Error::domain("n and trials must be at least 1"));
        }
        if self.sigma2_sq_list.is_empty() || self.rho_list.is_empty() || self.arms.is_empty() {
            return Err(Error::domain(
                "sigma2_sq, rho and arms lists must be non-empty",
            ));
        }
        for &s2 in &self.sigma2_sq_list {
            for &rho in &self.rho_list {
                NoiseParams::new(rho, self.sigma1_sq, s2)?;
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.sigma2_sq_list.len() * self.rho_list.len() * self.arms.len()
    }
}

/// Pooled metrics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    /// `type1_count / background_count`.
    pub type1_rate: f64,
    /// `type2_count / impulse_count`; `None` when no impulse occurred.
    pub type2_rate: Option<f64>,
    /// False alarms per sample, `type1_count / (n * trials)`.
    pub type1_rate_per_sample: f64,
    pub mean_loops: f64,
    pub trials_completed: usize,
    pub nonconverged_trials: usize,
    pub type1_count: u64,
    pub type2_count: u64,
    pub background_count: u64,
    pub impulse_count: u64,
    pub total_loops: u64,
}

/// Outcome of one detector run against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub false_alarms: u64,
    pub misses: u64,
    pub background: u64,
    pub impulses: u64,
    pub loops: u64,
    pub converged: bool,
}

impl TrialOutcome {
    /// Confusion counts of `detected` against `truth`.
    pub fn score(detected: &[bool], truth: &[bool], loops: usize, converged: bool) -> Result<Self> {
        if detected.len() != truth.len() {
            return Err(Error::ShapeMismatch {
                left: detected.len(),
                right: truth.len(),
            });
        }
        let mut out = TrialOutcome {
            loops: loops as u64,
            converged,
            ..Default::default()
        };
        for (&d, &t) in detected.iter().zip(truth) {
            match (d, t) {
                (true, false) => out.false_alarms += 1,
                (false, true) => out.misses += 1,
                _ => {}
            }
            if t {
                out.impulses += 1;
            } else {
                out.background += 1;
            }
        }
        Ok(out)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed of one trial, a hash of the cell coordinates and index.
pub fn trial_seed(base_seed: u64, sigma2_sq: f64, rho: f64, arm: Arm, trial: u64) -> u64 {
    [sigma2_sq.to_bits(), rho.to_bits(), arm.code(), trial]
        .into_iter()
        .fold(splitmix64(base_seed), |h, w| splitmix64(h ^ w))
}

pub fn run_trial(params: NoiseParams, n: usize, seed: u64, arm: Arm) -> Result<TrialOutcome> {
    let noise = generate(params, n, seed)?;
    let result = its_blind(&noise.observations, &arm.detector_config())?;
    TrialOutcome::score(&result.labels, &noise.truth, result.loops, result.converged)
}

fn aggregate(outcomes: &[TrialOutcome], n: usize) -> CellMetrics {
    let sum = |f: fn(&TrialOutcome) -> u64| outcomes.iter().map(f).sum::<u64>();
    let type1_count = sum(|o| o.false_alarms);
    let type2_count = sum(|o| o.misses);
    let background_count = sum(|o| o.background);
    let impulse_count = sum(|o| o.impulses);
    let total_loops = sum(|o| o.loops);
    let trials = outcomes.len();
    CellMetrics {
        type1_rate: if background_count > 0 {
            type1_count as f64 / background_count as f64
        } else {
            0.0
        },
        type2_rate: (impulse_count > 0).then(|| type2_count as f64 / impulse_count as f64),
        type1_rate_per_sample: type1_count as f64 / (n as f64 * trials as f64),
        mean_loops: total_loops as f64 / trials as f64,
        trials_completed: trials,
        nonconverged_trials: outcomes.iter().filter(|o| !o.converged).count(),
        type1_count,
        type2_count,
        background_count,
        impulse_count,
        total_loops,
    }
}

/// Runs `trials` independent trials of one cell on the current rayon pool.
pub fn run_cell(
    params: NoiseParams,
    n: usize,
    trials: usize,
    arm: Arm,
    base_seed: u64,
) -> Result<CellMetrics> {
    if trials == 0 || n == 0 {
        return Err(Error::domain("n and trials must be at least 1"));
    }
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(base_seed, params.sigma2_sq, params.rho, arm, t);
            run_trial(params, n, seed, arm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&outcomes, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub sigma2_sq: f64,
    pub rho: f64,
    pub arm: Arm,
    pub metrics: CellMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub tool_version: String,
    pub spec: GridSpec,
    pub cells: Vec<CellReport>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn cell(&self, sigma2_sq: f64, rho: f64, arm: Arm) -> Option<&CellMetrics> {
        self.cells
            .iter()
            .find(|c| c.sigma2_sq == sigma2_sq && c.rho == rho && c.arm == arm)
            .map(|c| &c.metrics)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable") + "\n"
    }

    pub fn from_json(source_name: &str, text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(source_name, e.line(), e.column(), e.to_string()))?;
        if report.format != REPORT_FORMAT {
            return Err(Error::parse(
                source_name,
                1,
                1,
                format!("unsupported report format `{}`", report.format),
            ));
        }
        Ok(report)
    }

    /// One CSV row per cell, for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sigma2_sq,rho,arm,type1_rate,type2_rate,type1_rate_per_sample,mean_loops,\
             trials,nonconverged,type1_count,type2_count,background_count,impulse_count\n",
        );
        for c in &self.cells {
            let m = &c.metrics;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.sigma2_sq,
                c.rho,
                c.arm,
                m.type1_rate,
                m.type2_rate.map_or(String::new(), |v| v.to_string()),
                m.type1_rate_per_sample,
                m.mean_loops,
                m.trials_completed,
                m.nonconverged_trials,
                m.type1_count,
                m.type2_count,
                m.background_count,
                m.impulse_count,
            ));
        }
        out
    }
}

/// Progress notification emitted after each finished cell.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
    pub sigma2_sq: f64,
    pub rho: f64,
    pub arm: Arm,
}

#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    pub progress: Option<&'a (dyn Fn(Progress) + Sync)>,
}

pub fn run_grid(spec: &GridSpec, opts: &RunOptions<'_>) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Error::domain("workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;

    let start = Instant::now();
    let total = spec.cell_count();
    let mut cells = Vec::with_capacity(total);
    pool.install(|| -> Result<()> {
        for &sigma2_sq in &spec.sigma2_sq_list {
            for &rho in &spec.rho_list {
                let params = NoiseParams::new(rho, spec.sigma1_sq, sigma2_sq)?;
                for &arm in &spec.arms {
                    let metrics = run_cell(params, spec.n, spec.trials, arm, spec.base_seed)?;
                    cells.push(CellReport {
                        sigma2_sq,
                        rho,
                        arm,
                        metrics,
                    });
                    if let Some(progress) = opts.progress {
                        progress(Progress {
                            done: cells.len(),
                            total,
                            sigma2_sq,
                            rho,
                            arm,
                        });
                    }
                }
            }
        }
        Ok(())
    })?;

    Ok(ExperimentReport {
        format: REPORT_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        cells,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> GridSpec {
        GridSpec {
            sigma1_sq: 1.0,
            sigma2_sq_list: vec![1e3],
            rho_list: vec![1e-2],
            n: 2000,
            trials: 1,
            base_seed: 3,
            arms: Arm::ALL.to_vec(),
        }
    }

    #[test]
    fn arm_names_round_trip() {
        for arm in Arm::ALL {
            assert_eq!(arm.name().parse::<Arm>().unwrap(), arm);
        }
        assert!("rge".parse::<Arm>().is_err());
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = trial_seed(1, 1e2, 1e-4, Arm::RgeSsi, 0);
        assert_eq!(a, trial_seed(1, 1e2, 1e-4, Arm::RgeSsi, 0));
        assert_ne!(a, trial_seed(1, 1e2, 1e-4, Arm::RgeSsi, 1));
        assert_ne!(a, trial_seed(1, 1e2, 1e-4, Arm::OnlySsi, 0));
        assert_ne!(a, trial_seed(1, 1e3, 1e-4, Arm::RgeSsi, 0));
        assert_ne!(a, trial_seed(2, 1e2, 1e-4, Arm::RgeSsi, 0));
    }

    #[test]
    fn confusion_counts_add_up() {
        let o = TrialOutcome::score(
            &[true, false, true, false, false],
            &[true, true, false, false, false],
            4,
            true,
        )
        .unwrap();
        assert_eq!(
            (o.false_alarms, o.misses, o.background, o.impulses),
            (1, 1, 3, 2)
        );
        assert!(TrialOutcome::score(&[true], &[true, false], 1, true).is_err());
    }

    #[test]
    fn one_trial_grid_has_one_cell_per_arm() {
        let r = run_grid(&tiny_spec(), &RunOptions::default()).unwrap();
        assert_eq!(r.cells.len(), 3);
        for c in &r.cells {
            let m = &c.metrics;
            assert_eq!(m.trials_completed, 1);
            assert_eq!(m.background_count + m.impulse_count, 2000);
            assert!((0.0..=1.0).contains(&m.type1_rate));
            assert!(m.type2_rate.is_none_or(|v| (0.0..=1.0).contains(&v)));
            assert!(m.mean_loops >= 1.0);
        }
    }

    #[test]
    fn impulse_free_cell_has_undefined_type2() {
        let p = NoiseParams::new(0.0, 1.0, 1e4).unwrap();
        let m = run_cell(p, 5000, 3, Arm::RgeSsi, 9).unwrap();
        assert_eq!(m.impulse_count, 0);
        assert!(m.type2_rate.is_none());
        assert!(m.type1_rate.is_finite());
    }

    #[test]
    fn report_json_round_trip_and_determinism() {
        let spec = tiny_spec();
        let mut a = run_grid(&spec, &RunOptions::default()).unwrap();
        let mut b = run_grid(
            &spec,
            &RunOptions {
                workers: Some(2),
                progress: None,
            },
        )
        .unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a.to_json(), b.to_json());
        let back = ExperimentReport::from_json("r.json", &a.to_json()).unwrap();
        assert_eq!(back, a);
        assert!(ExperimentReport::from_json("r.json", "{").is_err());
        assert_eq!(a.to_csv().lines().count(), 4);
    }

    #[test]
    fn progress_is_reported_per_cell() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let seen = AtomicUsize::new(0);
        let cb = |p: Progress| {
            assert_eq!(p.total, 3);
            seen.fetch_add(1, Ordering::SeqCst);
        };
        run_grid(
            &tiny_spec(),
            &RunOptions {
                workers: Some(1),
                progress: Some(&cb),
            },
        )
        .unwrap();
        assert_eq!(seen.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let mut s = tiny_spec();
        s.trials = 0;
        assert!(run_grid(&s, &RunOptions::default()).is_err());
        let mut s = tiny_spec();
        s.rho_list = vec![2.0];
        assert!(s.validate().is_err());
    }
}
