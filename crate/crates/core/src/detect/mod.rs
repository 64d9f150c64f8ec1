//! Impulse detectors.
//!
//! [`its_known`] and [`its_blind`] run iterative threshold shifting: the
//! labeling is always `|x_n| >= T`, and each loop compares the current
//! threshold against moving it down by one order statistic (promoting the
//! largest background sample) or up by one (demoting the smallest impulse).
//! [`smlr`], [`exhaustive_map`] and [`three_sigma_baseline`] are reference
//! detectors used to validate it.

mod exhaustive;
mod its;
mod order;
mod scoring;
mod smlr;

use serde::{Deserialize, Serialize};

pub use exhaustive::{exhaustive_map, EXHAUSTIVE_MAX_LEN};
pub use its::{its_blind, its_known, RESYNC_INTERVAL};
pub use scoring::ScoringModel;
pub use smlr::{smlr, SmlrResult};

use crate::posterior::{
    estimate_robust, log_posterior, EstimatorKind, PlugInEstimate, PosteriorScore, VarianceFloor,
};
use crate::robust::{self, DEFAULT_SSI_COEFFICIENT};
use crate::{Error, LabelSequence, ObservationSequence, Result};

/// Rule choosing the initial threshold `T0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// `4.4478 * MAD(x)`.
    ThreeSigma,
    /// `ssi_coefficient * gini(|x|) * 1.4826 * MAD(x)`.
    Ssi,
    Fixed(f64),
}

/// How candidate scores are evaluated inside ITS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreEval {
    /// O(1) per candidate from magnitude-ordered prefix sums.
    #[default]
    Incremental,
    /// Rebuild the labeling and rescore it from scratch, O(N) per candidate.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Loop budget; `None` means `N + 1`, enough for a shift across every
    /// order statistic followed by the terminating check.
    pub max_loops: Option<usize>,
    pub variance_floor_scale: f64,
    pub ssi_coefficient: f64,
    pub estimator: EstimatorKind,
    pub init: InitRule,
    /// Known-parameter detectors score the prior with this rate instead of
    /// re-estimating it from each candidate.
    pub fixed_rho: Option<f64>,
    pub score_eval: ScoreEval,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_loops: None,
            variance_floor_scale: VarianceFloor::default().scale,
            ssi_coefficient: DEFAULT_SSI_COEFFICIENT,
            estimator: EstimatorKind::Robust,
            init: InitRule::Ssi,
            fixed_rho: None,
            score_eval: ScoreEval::Incremental,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_loops == Some(0) {
            return Err(Error::domain("max_loops must be at least 1"));
        }
        if !(self.ssi_coefficient.is_finite() && self.ssi_coefficient > 0.0) {
            return Err(Error::domain(format!(
                "ssi_coefficient must be positive, got {}",
                self.ssi_coefficient
            )));
        }
        VarianceFloor::new(self.variance_floor_scale)?;
        if let InitRule::Fixed(t) = self.init {
            if t.is_nan() || t < 0.0 {
                return Err(Error::domain(format!(
                    "initial threshold must be >= 0, got {t}"
                )));
            }
        }
        if let Some(r) = self.fixed_rho {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!(
                    "fixed_rho must lie in [0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn floor(&self) -> VarianceFloor {
        VarianceFloor {
            scale: self.variance_floor_scale,
        }
    }

    pub(crate) fn loop_budget(&self, n: usize) -> usize {
        self.max_loops.unwrap_or(n + 1).max(1)
    }

    /// Evaluates the initial threshold rule on `x`.
    pub fn initial_threshold(&self, x: &[f64]) -> Result<f64> {
        match self.init {
            InitRule::ThreeSigma => robust::threshold_three_sigma(x),
            InitRule::Ssi => robust::threshold_ssi(x, self.ssi_coefficient),
            InitRule::Fixed(t) => Ok(t),
        }
    }
}

/// Output of a thresholding detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Equal to `classify_threshold(x, final_threshold())`.
    pub labels: LabelSequence,
    pub estimate: PlugInEstimate,
    pub score: PosteriorScore,
    /// Main-loop iterations: accepted shifts plus the final no-shift check.
    pub loops: usize,
    /// `T0` followed by the threshold after each accepted shift.
    pub threshold_trace: Vec<f64>,
    /// True when the run stopped because no neighbour improved the score.
    pub converged: bool,
}

impl DetectionResult {
    pub fn final_threshold(&self) -> f64 {
        *self
            .threshold_trace
            .last()
            .expect("trace always holds the initial threshold")
    }

    pub fn shifts(&self) -> usize {
        self.threshold_trace.len() - 1
    }
}

/// `label_n = |x_n| >= t`.
pub fn classify_threshold(x: &[f64], t: f64) -> LabelSequence {
    LabelSequence::new(x.iter().map(|v| v.abs() >= t).collect())
}

/// One-shot thresholding at the three-sigma rule.
pub fn three_sigma_baseline(x: &ObservationSequence) -> Result<DetectionResult> {
    let t = robust::threshold_three_sigma(x)?;
    let labels = classify_threshold(x, t);
    let estimate = estimate_robust(x, &labels, VarianceFloor::default())?;
    let score = log_posterior(x, &labels, &estimate)?;
    Ok(DetectionResult {
        labels,
        estimate,
        score,
        loops: 0,
        threshold_trace: vec![t],
        converged: true,
    })
}
